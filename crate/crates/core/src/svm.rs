//! C-SVM on precomputed Gram matrices.
//!
//! Binary machines solve the soft-margin dual
//!
//! ```text
//! min_α  ½ αᵀQα − eᵀα   s.t.  yᵀα = 0,  0 ≤ α_i ≤ C,   Q_ij = y_i y_j K_ij
//! ```
//!
//! with SMO and second-order working-set selection. Multiclass problems use
//! one-against-one voting.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            kkt_tolerance: 1e-3,
            max_iterations: 10_000_000,
        }
    }
}

impl SvmParams {
    pub fn with_c(c: f64) -> Self {
        SvmParams {
            c,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Param(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::Param("kkt_tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Param("max_iterations must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    /// Indices of the support vectors in the training set.
    pub support: Vec<usize>,
    /// `α_i · y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Class indices mapped to +1 and −1.
    pub positive: usize,
    pub negative: usize,
    /// Full dual solution, indexed like the training set.
    pub alpha: Vec<f64>,
    /// Final maximal KKT violation `m(α) − M(α)`.
    pub kkt_violation: f64,
    pub iterations: usize,
}

impl BinarySvm {
    /// Decision value for a column of kernel values against the training set.
    pub fn decision(&self, kernel_row: impl Fn(usize) -> f64) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(&i, &c)| c * kernel_row(i))
            .sum::<f64>()
            + self.bias
    }
}

/// Dual objective `½ αᵀQα − eᵀα`.
pub fn dual_objective(gram: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[(i, j)];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Trains one soft-margin machine. `y` holds ±1 per row of `gram`.
pub fn train_binary(gram: &DMatrix<f64>, y: &[f64], params: &SvmParams) -> Result<BinarySvm> {
    params.validate()?;
    let n = y.len();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::Svm(format!(
            "gram is {}x{} for {n} labels",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Svm("labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Svm("training set holds a single class".into()));
    }

    let c = params.c;
    let q = |i: usize, j: usize| y[i] * y[j] * gram[(i, j)];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let violation = loop {
        // first index: maximal violating from I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        // second index: largest objective decrease from I_low
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if let Some(i) = i_sel {
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = gram[(i, i)] + gram[(t, t)] - 2.0 * gram[(i, t)];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -b * b / a;
                    if obj <= best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let violation = gmax - gmin;
        if violation < params.kkt_tolerance {
            break violation.max(0.0);
        }
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) => (i, j),
            _ => break violation.max(0.0),
        };
        if iterations >= params.max_iterations {
            return Err(Error::Convergence {
                iterations,
                violation,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = gram[(i, i)] + gram[(j, j)] + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = gram[(i, i)] + gram[(j, j)] - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    };

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };

    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let coef = support.iter().map(|&t| alpha[t] * y[t]).collect();
    Ok(BinarySvm {
        support,
        coef,
        bias: -rho,
        positive: 0,
        negative: 1,
        alpha,
        kkt_violation: violation,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub machines: Vec<BinarySvm>,
    pub n_classes: usize,
    /// Number of training items the support indices refer to.
    pub n_train: usize,
}

/// One-against-one training; `labels[i]` is the class index of training item `i`.
pub fn train(
    gram: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    params: &SvmParams,
) -> Result<SvmModel> {
    if n_classes < 2 {
        return Err(Error::Svm("need at least two classes".into()));
    }
    if gram.nrows() != labels.len() || gram.ncols() != labels.len() {
        return Err(Error::Svm("gram and label sizes differ".into()));
    }
    let mut machines = Vec::with_capacity(n_classes * (n_classes - 1) / 2);
    for a in 0..n_classes {
        for b in a + 1..n_classes {
            let idx: Vec<usize> = (0..labels.len())
                .filter(|&i| labels[i] == a || labels[i] == b)
                .collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if labels[i] == a { 1.0 } else { -1.0 })
                .collect();
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, s| gram[(idx[r], idx[s])]);
            let mut m = train_binary(&sub, &y, params)
                .map_err(|e| Error::Svm(format!("classes {a} vs {b}: {e}")))?;
            m.support = m.support.iter().map(|&s| idx[s]).collect();
            let mut alpha = vec![0.0; labels.len()];
            for (k, &i) in idx.iter().enumerate() {
                alpha[i] = m.alpha[k];
            }
            m.alpha = alpha;
            m.positive = a;
            m.negative = b;
            machines.push(m);
        }
    }
    Ok(SvmModel {
        machines,
        n_classes,
        n_train: labels.len(),
    })
}

/// Majority vote over the binary machines; ties go to the lowest class index.
///
/// `kernel_rows` has one row per test item and one column per training item.
pub fn predict(model: &SvmModel, kernel_rows: &DMatrix<f64>) -> Result<Vec<usize>> {
    if kernel_rows.ncols() != model.n_train {
        return Err(Error::Svm(format!(
            "kernel rows have {} columns, model was trained on {} items",
            kernel_rows.ncols(),
            model.n_train
        )));
    }
    let mut out = Vec::with_capacity(kernel_rows.nrows());
    let mut votes = vec![0usize; model.n_classes];
    for r in 0..kernel_rows.nrows() {
        votes.fill(0);
        for m in &model.machines {
            let d = m.decision(|i| kernel_rows[(r, i)]);
            if d > 0.0 {
                votes[m.positive] += 1;
            } else {
                votes[m.negative] += 1;
            }
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        out.push(best);
    }
    Ok(out)
}
