//! Accuracy metrics and the Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Below this many nonzero differences the exact null distribution is used.
const EXACT_LIMIT: usize = 20;
/// Fewest nonzero differences for which a p-value is reported.
const MIN_PAIRS: usize = 5;

/// Counts with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub labels: Vec<String>,
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], labels: &[String]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Metrics("truth and prediction lengths differ".into()));
        }
        let l = labels.len();
        let mut counts = vec![vec![0u64; l]; l];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= l || p >= l {
                return Err(Error::Metrics(format!("class index out of range ({t}, {p})")));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix {
            counts,
            labels: labels.to_vec(),
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Overall accuracy.
    pub oa: f64,
    /// Mean per-class accuracy.
    pub aa: f64,
    pub kappa: f64,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Metrics("empty confusion matrix".into()));
    }
    let l = cm.counts.len();
    let row: Vec<u64> = cm.counts.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<u64> = (0..l).map(|j| cm.counts.iter().map(|r| r[j]).sum()).collect();
    let trace: u64 = (0..l).map(|i| cm.counts[i][i]).sum();
    let n = total as f64;
    let oa = trace as f64 / n;

    let mut aa = 0.0;
    for i in 0..l {
        if row[i] == 0 {
            let name = cm.labels.get(i).cloned().unwrap_or_else(|| i.to_string());
            return Err(Error::Metrics(format!("class {name} has no test items")));
        }
        aa += cm.counts[i][i] as f64 / row[i] as f64;
    }
    aa /= l as f64;

    let pe = (0..l).map(|i| row[i] as f64 * col[i] as f64).sum::<f64>() / (n * n);
    let kappa = if pe == 1.0 { 1.0 } else { (oa - pe) / (1.0 - pe) };
    Ok(Metrics { oa, aa, kappa })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum WilcoxonOutcome {
    Test {
        p_value: f64,
        /// Sum of the ranks of positive differences.
        w_plus: f64,
        /// Nonzero differences used.
        n: usize,
        exact: bool,
    },
    InsufficientData {
        n: usize,
    },
}

impl WilcoxonOutcome {
    pub fn p_value(&self) -> Option<f64> {
        match self {
            WilcoxonOutcome::Test { p_value, .. } => Some(*p_value),
            WilcoxonOutcome::InsufficientData { .. } => None,
        }
    }
}

/// Two-sided Wilcoxon signed-rank test for paired samples.
///
/// Zero differences are dropped and tied magnitudes get mid-ranks. With
/// fewer than 20 remaining pairs the p-value comes from the exact null
/// distribution of the positive rank sum (given the observed ranks);
/// otherwise from the tie-corrected normal approximation.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonOutcome> {
    if a.len() != b.len() {
        return Err(Error::Param("paired samples differ in length".into()));
    }
    let mut diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < MIN_PAIRS {
        return Ok(WilcoxonOutcome::InsufficientData { n });
    }
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));

    // mid-ranks, doubled so they stay integral
    let mut rank2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        for r in rank2.iter_mut().take(j + 1).skip(i) {
            *r = (i + 1 + j + 1) as u64;
        }
        i = j + 1;
    }
    let w2: u64 = diffs
        .iter()
        .zip(&rank2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w_plus = w2 as f64 / 2.0;

    let (p, exact) = if n < EXACT_LIMIT {
        (exact_p(&rank2, w2), true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = (w_plus - mean) / var.sqrt();
        (erfc(z.abs() / std::f64::consts::SQRT_2), false)
    };
    Ok(WilcoxonOutcome::Test {
        p_value: p.min(1.0),
        w_plus,
        n,
        exact,
    })
}

/// Two-sided exact p-value: 2·min(P(W ≤ w), P(W ≥ w)) under random signs.
fn exact_p(rank2: &[u64], w2: u64) -> f64 {
    let max: u64 = rank2.iter().sum();
    let mut ways = vec![0f64; max as usize + 1];
    ways[0] = 1.0;
    let mut reach = 0usize;
    for &r in rank2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if ways[s] != 0.0 {
                ways[s + r] += ways[s];
            }
        }
        reach += r;
    }
    let total = 2f64.powi(rank2.len() as i32);
    let w = w2 as usize;
    let lower: f64 = ways[..=w].iter().sum::<f64>() / total;
    let upper: f64 = ways[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Mean and sample (n−1) standard deviation; 0 spread for a single value.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn mean_std_population(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, (ss / n).sqrt())
}
