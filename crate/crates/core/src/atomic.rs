//! Node-to-node similarities.
//!
//! An atomic kernel compares two nodes through an RBF over a feature distance,
//! optionally weighted by the relative sizes of the nodes:
//! `rel_size(n)^β · rel_size(n')^β · exp(-γ d(x, x'))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::Node;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomicKind {
    /// RBF over the squared Euclidean distance.
    Gaussian,
    /// RBF over the χ² histogram distance.
    Chi2,
    /// 1 if the feature vectors are bitwise equal, 0 otherwise.
    Delta,
}

impl AtomicKind {
    pub fn name(self) -> &'static str {
        match self {
            AtomicKind::Gaussian => "gaussian",
            AtomicKind::Chi2 => "chi2",
            AtomicKind::Delta => "delta",
        }
    }
}

impl std::str::FromStr for AtomicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(AtomicKind::Gaussian),
            "chi2" => Ok(AtomicKind::Chi2),
            "delta" => Ok(AtomicKind::Delta),
            other => Err(Error::Param(format!("unknown atomic kernel '{other}'"))),
        }
    }
}

/// Everything needed to evaluate a tree kernel; also serves as the provenance
/// fingerprint stored alongside Gram matrices and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub atomic: AtomicKind,
    /// RBF bandwidth.
    pub gamma: f64,
    /// Size-weight exponent.
    pub beta: f64,
    /// Divide by the geometric mean of the self-similarities.
    pub normalize: bool,
    /// Histogram bins per dimension (χ² only).
    pub bins: Option<usize>,
}

impl KernelConfig {
    pub fn new(atomic: AtomicKind, gamma: f64, beta: f64) -> Self {
        KernelConfig {
            atomic,
            gamma,
            beta,
            normalize: false,
            bins: None,
        }
    }

    pub fn normalized(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn with_bins(mut self, bins: usize) -> Self {
        self.bins = Some(bins);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Param(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Param(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.bins == Some(0) {
            return Err(Error::Param("bins must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn gaussian_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// χ² distance between stacked histograms; empty bins on both sides contribute 0.
pub fn chi2_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x, y)?;
    if let Some(&v) = x.iter().chain(y).find(|v| **v < 0.0) {
        return Err(Error::NegativeEntry(v));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| {
            let s = a + b;
            if s > 0.0 {
                (a - b) * (a - b) / s
            } else {
                0.0
            }
        })
        .sum())
}

#[inline]
pub fn rbf(distance: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        // exp(-0 * inf) would be NaN
        return 1.0;
    }
    (-gamma * distance).exp()
}

/// `a^β · b^β`, with `0^0 = 1`.
#[inline]
pub fn size_weight(a: f64, b: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        1.0
    } else {
        a.powf(beta) * b.powf(beta)
    }
}

/// Distance underlying an atomic kernel; delta maps equal vectors to 0 and
/// anything else to +inf so that `rbf` with γ > 0 yields the indicator.
pub fn feature_distance(kind: AtomicKind, x: &[f64], y: &[f64]) -> Result<f64> {
    match kind {
        AtomicKind::Gaussian => gaussian_distance(x, y),
        AtomicKind::Chi2 => chi2_distance(x, y),
        AtomicKind::Delta => {
            check_dims(x, y)?;
            let equal = x.iter().zip(y).all(|(a, b)| a.to_bits() == b.to_bits());
            Ok(if equal { 0.0 } else { f64::INFINITY })
        }
    }
}

/// Atomic similarity from a precomputed distance.
#[inline]
pub fn atomic_from_distance(kind: AtomicKind, distance: f64, weight: f64, gamma: f64) -> f64 {
    let k = match kind {
        AtomicKind::Delta => {
            if distance == 0.0 {
                1.0
            } else {
                0.0
            }
        }
        _ => rbf(distance, gamma),
    };
    weight * k
}

pub fn atomic(n: &Node, m: &Node, cfg: &KernelConfig) -> Result<f64> {
    let x = node_features(n)?;
    let y = node_features(m)?;
    let d = feature_distance(cfg.atomic, x, y)?;
    let w = size_weight(n.rel_size, m.rel_size, cfg.beta);
    Ok(atomic_from_distance(cfg.atomic, d, w, cfg.gamma))
}

pub(crate) fn node_features(n: &Node) -> Result<&[f64]> {
    n.features
        .as_deref()
        .ok_or_else(|| Error::Features(format!("node {} has no features", n.id)))
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}
