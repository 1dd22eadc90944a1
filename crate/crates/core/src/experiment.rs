//! Repeated random-split experiments comparing kernel methods.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::AtomicKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{FeatureMode, ValueRange};
use crate::gram::{gram_matrices, GramMatrix};
use crate::kernel::KernelKind;
use crate::rng::{derive_seed, rng_from};
use crate::selection::{grid_search_precomputed, stratified_folds, GridCell, Grids};
use crate::stats::{mean_std, metrics, wilcoxon_signed_rank, ConfusionMatrix, Metrics, WilcoxonOutcome};
use crate::svm::{predict, train, SvmParams};

const SPLIT_TAG: u64 = 0x5350_4c49_54;
const FOLD_TAG: u64 = 0x464f_4c44;

/// p-values below this mark a pair of methods as significantly different.
pub const SIGNIFICANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Method {
    pub kernel: KernelKind,
    pub atomic: AtomicKind,
}

impl Method {
    pub fn new(kernel: KernelKind, atomic: AtomicKind) -> Self {
        Method { kernel, atomic }
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.kernel.name(), self.atomic.name())
    }

    /// The four rooted/subpath × Gaussian/χ² combinations.
    pub fn standard() -> Vec<Method> {
        let mut out = Vec::new();
        for kernel in [KernelKind::Rooted, KernelKind::Subpath] {
            for atomic in [AtomicKind::Gaussian, AtomicKind::Chi2] {
                out.push(Method::new(kernel, atomic));
            }
        }
        out
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Parses `"<kernel>-<atomic>"`, e.g. `subpath-chi2`.
    fn from_str(s: &str) -> Result<Self> {
        let (k, a) = s
            .split_once('-')
            .ok_or_else(|| Error::Param(format!("method {s:?} is not <kernel>-<atomic>")))?;
        Ok(Method::new(k.parse()?, a.parse()?))
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub repetitions: usize,
    pub train_per_class: usize,
    pub seed: u64,
    pub grids: Grids,
    pub folds: usize,
    pub normalize: bool,
    /// Histogram bins for χ² methods.
    pub bins: usize,
    /// Histogram value ranges; derived from the data's leaf values when `None`.
    pub ranges: Option<Vec<ValueRange>>,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            repetitions: 20,
            train_per_class: 20,
            seed: 0,
            grids: Grids::default(),
            folds: 5,
            normalize: true,
            bins: 4,
            ranges: None,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Param("repetitions must be positive".into()));
        }
        if self.train_per_class == 0 {
            return Err(Error::Param("train_per_class must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Param("at least two folds are needed".into()));
        }
        if self.bins == 0 {
            return Err(Error::Param("bins must be positive".into()));
        }
        self.grids.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub metrics: Metrics,
    pub selected: GridCell,
    /// Wall time of grid search plus final training and prediction.
    pub train_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let (mean, std) = mean_std(values);
        Summary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub name: String,
    pub repetitions: Vec<RepetitionResult>,
    pub oa: Summary,
    pub aa: Summary,
    pub kappa: Summary,
    /// Wall time of computing the Gram matrices for the whole grid.
    pub gram_seconds: f64,
    pub train_seconds: f64,
}

impl MethodReport {
    pub fn oa_values(&self) -> Vec<f64> {
        self.repetitions.iter().map(|r| r.metrics.oa).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// Mean OA of `a` minus mean OA of `b`.
    pub mean_difference: f64,
    pub wilcoxon: WilcoxonOutcome,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub labels: Vec<String>,
    pub n_items: usize,
    pub protocol: Protocol,
    pub methods: Vec<MethodReport>,
    /// One hash per repetition of the training item set, shared by all methods.
    pub split_hashes: Vec<String>,
    pub comparisons: Vec<Comparison>,
}

impl ExperimentReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a))
    }

    /// One row per method: accuracies in percent and wall times in seconds.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "method,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std,gram_seconds,train_seconds\n",
        );
        for m in &self.methods {
            s.push_str(&format!(
                "{},{:.2},{:.2},{:.2},{:.2},{:.4},{:.4},{:.3},{:.3}\n",
                m.name,
                100.0 * m.oa.mean,
                100.0 * m.oa.std,
                100.0 * m.aa.mean,
                100.0 * m.aa.std,
                m.kappa.mean,
                m.kappa.std,
                m.gram_seconds,
                m.train_seconds
            ));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Param(format!("report serialization: {e}")))
    }
}

/// Seed of the train/test split of one repetition.
pub fn split_seed(base: u64, repetition: usize) -> u64 {
    derive_seed(base, SPLIT_TAG, repetition as u64)
}

/// Stratified split: `per_class` training items drawn from every class.
pub fn stratified_split(labels: &[usize], n_classes: usize, per_class: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng_from(seed);
    let mut train = Vec::new();
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..per_class.min(members.len())]);
    }
    train.sort_unstable();
    let mut in_train = vec![false; labels.len()];
    for &i in &train {
        in_train[i] = true;
    }
    let test = (0..labels.len()).filter(|&i| !in_train[i]).collect();
    (train, test)
}

/// FNV-1a over the sorted training indices, as 16 hex digits.
pub fn split_hash(train: &[usize]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &i in train {
        for b in (i as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Per-dimension [min, max] of all leaf values in the dataset.
pub fn leaf_value_ranges(ds: &Dataset) -> Result<Vec<ValueRange>> {
    let mut ranges: Option<Vec<ValueRange>> = None;
    for item in &ds.items {
        for node in &item.tree.nodes {
            let Some(v) = &node.leaf_values else { continue };
            let r = ranges.get_or_insert_with(|| vec![ValueRange::new(f64::INFINITY, f64::NEG_INFINITY); v.len()]);
            if r.len() != v.len() {
                return Err(Error::DimensionMismatch {
                    left: r.len(),
                    right: v.len(),
                });
            }
            for (r, &x) in r.iter_mut().zip(v) {
                r.lo = r.lo.min(x);
                r.hi = r.hi.max(x);
            }
        }
    }
    let mut ranges = ranges.ok_or_else(|| Error::Features("dataset has no leaf values".into()))?;
    for r in &mut ranges {
        if r.hi <= r.lo {
            r.hi = r.lo + 1.0;
        }
    }
    Ok(ranges)
}

/// Feature mode a method uses on `ds`: supplied features when present,
/// mean/variance for Gaussian and delta atomics, histograms for χ².
pub fn feature_mode(
    ds: &Dataset,
    atomic: AtomicKind,
    bins: usize,
    ranges: Option<&[ValueRange]>,
) -> Result<FeatureMode> {
    if matches!(&ds.feature_spec, Some(s) if matches!(s.mode, FeatureMode::Provided)) {
        return Ok(FeatureMode::Provided);
    }
    Ok(match atomic {
        AtomicKind::Gaussian | AtomicKind::Delta => FeatureMode::MeanVariance,
        AtomicKind::Chi2 => FeatureMode::Histogram {
            bins,
            ranges: match ranges {
                Some(r) => r.to_vec(),
                None => leaf_value_ranges(ds)?,
            },
        },
    })
}

fn method_grams(ds: &Dataset, method: Method, protocol: &Protocol) -> Result<Vec<GramMatrix>> {
    let mode = feature_mode(ds, method.atomic, protocol.bins, protocol.ranges.as_deref())?;
    let featured = ds.with_features(&mode)?;
    let bins = match mode {
        FeatureMode::Histogram { bins, .. } => Some(bins),
        _ => None,
    };
    let mut grids = protocol.grids.clone();
    if method.kernel == KernelKind::Rooted {
        // roots all have relative size 1, so β cannot change a rooted kernel
        grids.beta = vec![grids.beta.iter().copied().fold(f64::INFINITY, f64::min)];
    }
    let configs = grids.kernel_configs(method.atomic, protocol.normalize, bins);
    gram_matrices(&featured, &configs, method.kernel)
}

fn run_repetition(
    grams: &[GramMatrix],
    labels: &[usize],
    label_names: &[String],
    protocol: &Protocol,
    repetition: usize,
) -> Result<RepetitionResult> {
    let start = Instant::now();
    let n_classes = label_names.len();
    let (train_items, test_items) = stratified_split(
        labels,
        n_classes,
        protocol.train_per_class,
        split_seed(protocol.seed, repetition),
    );
    let train_labels: Vec<usize> = train_items.iter().map(|&i| labels[i]).collect();
    let folds = stratified_folds(
        &train_labels,
        protocol.folds,
        &mut rng_from(derive_seed(protocol.seed, FOLD_TAG, repetition as u64)),
    );
    let grid = grid_search_precomputed(
        grams,
        &train_items,
        labels,
        n_classes,
        &protocol.grids.c,
        &folds,
        &SvmParams::default(),
    )?;
    let best = &grid.best;
    let gram = grams
        .iter()
        .find(|g| g.config.gamma == best.gamma && g.config.beta == best.beta)
        .expect("selected cell comes from the grid");
    let model = train(
        &gram.select(&train_items, &train_items),
        &train_labels,
        n_classes,
        &SvmParams::with_c(best.c),
    )?;
    let predicted = predict(&model, &gram.select(&test_items, &train_items))?;
    let truth: Vec<usize> = test_items.iter().map(|&i| labels[i]).collect();
    let cm = ConfusionMatrix::from_predictions(&truth, &predicted, label_names)?;
    Ok(RepetitionResult {
        metrics: metrics(&cm)?,
        selected: grid.best,
        train_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every method over `protocol.repetitions` random splits.
///
/// Within a repetition all methods share the same split and the same CV
/// folds. Gram matrices are computed once per method over the whole dataset
/// (they do not depend on labels) and reused by every repetition.
pub fn run_experiment(ds: &Dataset, methods: &[Method], protocol: &Protocol) -> Result<ExperimentReport> {
    protocol.validate()?;
    if methods.is_empty() {
        return Err(Error::Param("no methods given".into()));
    }
    let labels = ds.class_indices();
    let n_classes = ds.labels.len();
    if n_classes < 2 {
        return Err(Error::Param("need at least two classes".into()));
    }
    for (c, name) in ds.labels.iter().enumerate() {
        let count = labels.iter().filter(|&&l| l == c).count();
        if count <= protocol.train_per_class {
            return Err(Error::Param(format!(
                "class {name} has {count} items; need more than train_per_class = {}",
                protocol.train_per_class
            )));
        }
    }

    let split_hashes = (0..protocol.repetitions)
        .map(|r| {
            let (train, _) = stratified_split(
                &labels,
                n_classes,
                protocol.train_per_class,
                split_seed(protocol.seed, r),
            );
            split_hash(&train)
        })
        .collect();

    let mut reports = Vec::with_capacity(methods.len());
    for &method in methods {
        let start = Instant::now();
        let grams = method_grams(ds, method, protocol)?;
        let gram_seconds = start.elapsed().as_secs_f64();
        let repetitions = (0..protocol.repetitions)
            .into_par_iter()
            .map(|r| {
                run_repetition(&grams, &labels, &ds.labels, protocol, r).map_err(|e| Error::Repetition {
                    repetition: r,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let col = |f: fn(&Metrics) -> f64| -> Vec<f64> { repetitions.iter().map(|r| f(&r.metrics)).collect() };
        reports.push(MethodReport {
            method,
            name: method.name(),
            oa: Summary::of(&col(|m| m.oa)),
            aa: Summary::of(&col(|m| m.aa)),
            kappa: Summary::of(&col(|m| m.kappa)),
            gram_seconds,
            train_seconds: repetitions.iter().map(|r| r.train_seconds).sum(),
            repetitions,
        });
    }

    let mut comparisons = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let (a, b) = (&reports[i], &reports[j]);
            let wilcoxon = wilcoxon_signed_rank(&a.oa_values(), &b.oa_values())?;
            comparisons.push(Comparison {
                a: a.name.clone(),
                b: b.name.clone(),
                mean_difference: a.oa.mean - b.oa.mean,
                significant: wilcoxon.p_value().is_some_and(|p| p < SIGNIFICANCE),
                wilcoxon,
            });
        }
    }

    Ok(ExperimentReport {
        labels: ds.labels.clone(),
        n_items: ds.len(),
        protocol: protocol.clone(),
        methods: reports,
        split_hashes,
        comparisons,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub ratio: f64,
    pub method: String,
    pub mean: f64,
    pub std: f64,
}

/// One experiment per (ratio, dataset); mean and std of OA per method.
pub fn robustness_curve(
    suite: &[(f64, Dataset)],
    methods: &[Method],
    protocol: &Protocol,
) -> Result<Vec<CurvePoint>> {
    let mut points = Vec::new();
    for (ratio, ds) in suite {
        let report = run_experiment(ds, methods, protocol)?;
        for m in &report.methods {
            points.push(CurvePoint {
                ratio: *ratio,
                method: m.name.clone(),
                mean: m.oa.mean,
                std: m.oa.std,
            });
        }
    }
    Ok(points)
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("ratio,method,mean,std\n");
    for p in points {
        s.push_str(&format!("{},{},{},{}\n", p.ratio, p.method, p.mean, p.std));
    }
    s
}
