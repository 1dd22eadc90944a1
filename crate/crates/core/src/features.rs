//! Node features derived from the raw values of descendant leaves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        ValueRange { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FeatureMode {
    /// Per-dimension mean followed by per-dimension population variance.
    MeanVariance,
    /// Per-dimension `bins`-bin frequency histograms, stacked.
    ///
    /// `ranges` holds either one range shared by all dimensions or one per dimension.
    Histogram { bins: usize, ranges: Vec<ValueRange> },
    /// Features were supplied with the data.
    Provided,
}

/// Feature layout shared by every tree of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub mode: FeatureMode,
    /// Length of every node feature vector.
    pub dims: usize,
}

/// Computes `features` on every node from the leaf values below it.
pub fn extract_features(tree: &Tree, mode: &FeatureMode) -> Result<Tree> {
    if let FeatureMode::Provided = mode {
        if tree.nodes.iter().all(|n| n.features.is_some()) {
            return Ok(tree.clone());
        }
        return Err(Error::Features("provided mode but features are missing".into()));
    }

    let mut dim = None;
    for node in tree.nodes.iter().filter(|n| n.is_leaf()) {
        let values = node
            .leaf_values
            .as_ref()
            .ok_or_else(|| Error::Features(format!("leaf {} has no leaf_values", node.id)))?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: values.len(),
                })
            }
            _ => {}
        }
    }
    let dim = dim.ok_or_else(|| Error::Features("tree has no leaves".into()))?;
    if dim == 0 {
        return Err(Error::Features("leaf_values are empty".into()));
    }

    if let FeatureMode::Histogram { bins, ranges } = mode {
        if *bins == 0 {
            return Err(Error::Features("histogram needs at least one bin".into()));
        }
        if ranges.is_empty() {
            return Err(Error::Features("histogram mode requires a declared value range".into()));
        }
        if ranges.len() != 1 && ranges.len() != dim {
            return Err(Error::Features(format!(
                "{} ranges declared for {dim} dimensions",
                ranges.len()
            )));
        }
        if let Some(r) = ranges.iter().find(|r| !(r.hi > r.lo)) {
            return Err(Error::Features(format!("empty range [{}, {}]", r.lo, r.hi)));
        }
    }

    let below = tree.leaves_below();
    let mut out = tree.clone();
    let mut column = Vec::new();
    for (n, leaves) in below.iter().enumerate() {
        if leaves.is_empty() {
            // unreachable node; validation reports it
            continue;
        }
        let mut feats = Vec::new();
        for d in 0..dim {
            column.clear();
            column.extend(
                leaves
                    .iter()
                    .map(|&l| tree.nodes[l].leaf_values.as_ref().expect("checked above")[d]),
            );
            // sorted so the result does not depend on leaf enumeration order
            column.sort_by(f64::total_cmp);
            match mode {
                FeatureMode::MeanVariance => {
                    let (mean, var) = mean_variance(&column);
                    feats.push(mean);
                    feats.push(var);
                }
                FeatureMode::Histogram { bins, ranges } => {
                    let range = if ranges.len() == 1 { ranges[0] } else { ranges[d] };
                    feats.extend(histogram(&column, *bins, range));
                }
                FeatureMode::Provided => unreachable!(),
            }
        }
        if let FeatureMode::MeanVariance = mode {
            // reorder [m0, v0, m1, v1, ..] into [m0, m1, .., v0, v1, ..]
            let means = feats.iter().step_by(2).copied();
            let vars = feats.iter().skip(1).step_by(2).copied();
            feats = means.chain(vars).collect();
        }
        out.nodes[n].features = Some(feats);
    }
    Ok(out)
}

/// Mean and population variance.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Equal-width frequency histogram over `range`; out-of-range values go to the end bins.
pub fn histogram(values: &[f64], bins: usize, range: ValueRange) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    let width = (range.hi - range.lo) / bins as f64;
    for &v in values {
        let pos = ((v - range.lo) / width).floor();
        let b = if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(bins - 1)
        };
        counts[b] += 1.0;
    }
    let total = values.len() as f64;
    counts.iter_mut().for_each(|c| *c /= total);
    counts
}
