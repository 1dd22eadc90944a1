//! Hyperparameter grid search scored by stratified k-fold cross-validation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::atomic::{AtomicKind, KernelConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gram::{gram_matrices, GramMatrix};
use crate::kernel::KernelKind;
use crate::rng::{rng_from, Rng};
use crate::svm::{predict, train, SvmParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub gamma: Vec<f64>,
    pub c: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Default for Grids {
    /// γ ∈ {0, 1e-3, …, 1e2}, C ∈ {1e-2, …, 1e3}, β ∈ {0, 0.25, …, 1}.
    fn default() -> Self {
        let mut gamma = vec![0.0];
        gamma.extend((-3..=2).map(|k| 10f64.powi(k)));
        Grids {
            gamma,
            c: (-2..=3).map(|k| 10f64.powi(k)).collect(),
            beta: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl Grids {
    pub fn validate(&self) -> Result<()> {
        if self.gamma.is_empty() || self.c.is_empty() || self.beta.is_empty() {
            return Err(Error::Param("grids must be non-empty".into()));
        }
        Ok(())
    }

    /// Kernel configurations for every (γ, β), γ-major.
    pub fn kernel_configs(&self, atomic: AtomicKind, normalize: bool, bins: Option<usize>) -> Vec<KernelConfig> {
        self.gamma
            .iter()
            .flat_map(|&g| {
                self.beta.iter().map(move |&b| KernelConfig {
                    atomic,
                    gamma: g,
                    beta: b,
                    normalize,
                    bins,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub gamma: f64,
    pub beta: f64,
    pub c: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridCell,
    pub table: Vec<GridCell>,
}

impl GridResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma,beta,C,mean_cv_accuracy,std\n");
        for c in &self.table {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                c.gamma, c.beta, c.c, c.mean_accuracy, c.std_accuracy
            ));
        }
        s
    }
}

/// Fold index for each item; every class is spread round-robin over the folds
/// after a shuffle.
pub fn stratified_folds(labels: &[usize], k: usize, rng: &mut Rng) -> Vec<usize> {
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut folds = vec![0; labels.len()];
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        for (rank, i) in members.into_iter().enumerate() {
            folds[i] = rank % k;
        }
    }
    folds
}

/// Mean and population standard deviation of per-fold accuracies.
pub fn cross_validate(
    gram: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    folds: &[usize],
    params: &SvmParams,
) -> Result<(f64, f64)> {
    let k = folds.iter().copied().max().map_or(0, |m| m + 1);
    let mut accs = Vec::with_capacity(k);
    for f in 0..k {
        let test: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == f).collect();
        let fit: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != f).collect();
        if test.is_empty() {
            continue;
        }
        let sub = DMatrix::from_fn(fit.len(), fit.len(), |r, s| gram[(fit[r], fit[s])]);
        let fit_labels: Vec<usize> = fit.iter().map(|&i| labels[i]).collect();
        let model = train(&sub, &fit_labels, n_classes, params)?;
        let rows = DMatrix::from_fn(test.len(), fit.len(), |r, s| gram[(test[r], fit[s])]);
        let pred = predict(&model, &rows)?;
        let correct = test
            .iter()
            .zip(&pred)
            .filter(|(&i, &p)| labels[i] == p)
            .count();
        accs.push(correct as f64 / test.len() as f64);
    }
    if accs.is_empty() {
        return Err(Error::Param("cross-validation produced no folds".into()));
    }
    let (mean, std) = crate::stats::mean_std_population(&accs);
    Ok((mean, std))
}

/// Scores every (Gram, C) cell on the training items and picks the best.
///
/// `grams` are full-dataset matrices, one per (γ, β); only the rows and
/// columns of `train_items` are read. Ties in mean accuracy go to the larger
/// C, then the smaller γ, then the smaller β. At the smallest C of a tie every
/// multiplier tends to sit at its bound, leaving the bias poorly determined.
pub fn grid_search_precomputed(
    grams: &[GramMatrix],
    train_items: &[usize],
    labels: &[usize],
    n_classes: usize,
    c_grid: &[f64],
    folds: &[usize],
    base: &SvmParams,
) -> Result<GridResult> {
    if grams.is_empty() || c_grid.is_empty() {
        return Err(Error::Param("grids must be non-empty".into()));
    }
    let train_labels: Vec<usize> = train_items.iter().map(|&i| labels[i]).collect();
    let mut table = Vec::with_capacity(grams.len() * c_grid.len());
    for g in grams {
        let sub = g.select(train_items, train_items);
        for &c in c_grid {
            let params = SvmParams { c, ..base.clone() };
            let (mean, std) = cross_validate(&sub, &train_labels, n_classes, folds, &params)?;
            table.push(GridCell {
                gamma: g.config.gamma,
                beta: g.config.beta,
                c,
                mean_accuracy: mean,
                std_accuracy: std,
            });
        }
    }
    let mut order: Vec<&GridCell> = table.iter().collect();
    order.sort_by(|a, b| {
        b.c.total_cmp(&a.c)
            .then(a.gamma.total_cmp(&b.gamma))
            .then(a.beta.total_cmp(&b.beta))
    });
    let mut best = order[0];
    for cell in order {
        if cell.mean_accuracy > best.mean_accuracy {
            best = cell;
        }
    }
    Ok(GridResult {
        best: best.clone(),
        table,
    })
}

/// Grid search over a whole dataset whose features are already extracted.
///
/// Every item is a training item; folds are drawn from `seed`.
pub fn grid_search(
    ds: &Dataset,
    kind: KernelKind,
    atomic: AtomicKind,
    grids: &Grids,
    normalize: bool,
    folds_k: usize,
    seed: u64,
) -> Result<(KernelConfig, SvmParams, GridResult)> {
    grids.validate()?;
    let bins = match (&ds.feature_spec, atomic) {
        (Some(spec), AtomicKind::Chi2) => match &spec.mode {
            crate::features::FeatureMode::Histogram { bins, .. } => Some(*bins),
            _ => None,
        },
        _ => None,
    };
    let configs = grids.kernel_configs(atomic, normalize, bins);
    let grams = gram_matrices(ds, &configs, kind)?;
    let labels = ds.class_indices();
    let items: Vec<usize> = (0..ds.len()).collect();
    let folds = stratified_folds(&labels, folds_k, &mut rng_from(seed));
    let result = grid_search_precomputed(
        &grams,
        &items,
        &labels,
        ds.labels.len(),
        &grids.c,
        &folds,
        &SvmParams::default(),
    )?;
    let cfg = KernelConfig {
        atomic,
        gamma: result.best.gamma,
        beta: result.best.beta,
        normalize,
        bins,
    };
    Ok((cfg, SvmParams::with_c(result.best.c), result))
}
