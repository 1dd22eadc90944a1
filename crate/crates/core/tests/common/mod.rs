#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use subpath_kernel::rng::{rng_from, Rng as ChaRng};
use subpath_kernel::tree::{compute_rel_sizes, Node, SizeMode, Tree};

/// Random tree whose nodes carry `dims`-dimensional features in [0, 1).
pub fn featured_tree(n: usize, dims: usize, rng: &mut ChaRng) -> Tree {
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let mut node = Node::new(format!("v{i}"), (i > 0).then(|| rng.random_range(0..i)));
            node.features = Some((0..dims).map(|_| rng.random::<f64>()).collect());
            node
        })
        .collect();
    let tree = Tree::from_parent_links(nodes).unwrap();
    compute_rel_sizes(&tree, SizeMode::LeafCount).unwrap()
}

/// Gram matrix `XᵀX` of random points, hence PSD.
pub fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from(seed);
    let d = rng.random_range(2..6);
    let x = DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
    x.transpose() * x
}

/// `½ αᵀQα − Σα` with `Q_ij = y_i y_j K_ij`.
pub fn objective(k: &DMatrix<f64>, y: &[f64], a: &[f64]) -> f64 {
    let n = a.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    0.5 * quad - a.iter().sum::<f64>()
}

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}`.
///
/// With `α(λ) = clip(v − λy, 0, C)` the constraint `yᵀα(λ)` is piecewise linear
/// and non-increasing in λ; the root is located between breakpoints.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(&vi, &yi)| (vi - lam * yi).clamp(0.0, c))
            .collect()
    };
    let g = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let mut bps: Vec<f64> = v
        .iter()
        .zip(y)
        .flat_map(|(&vi, &yi)| [yi * vi, yi * (vi - c)])
        .collect();
    bps.sort_by(f64::total_cmp);
    // first breakpoint where the constraint turns negative
    let split = bps.partition_point(|&b| g(b) >= 0.0);
    let lo = if split == 0 { bps[0] - 1.0 } else { bps[split - 1] };
    let hi = if split == bps.len() { bps[bps.len() - 1] + 1.0 } else { bps[split] };
    let (glo, ghi) = (g(lo), g(hi));
    let lam = if glo == ghi { lo } else { lo + (hi - lo) * glo / (glo - ghi) };
    at(lam)
}

/// Accelerated projected gradient on the C-SVM dual, run to stagnation.
pub fn reference_dual(k: &DMatrix<f64>, y: &[f64], c: f64) -> Vec<f64> {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let lip = q.clone().symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lip;
    let matvec = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| q[(i, j)] * v[j]).sum()).collect() };
    let value = |v: &[f64], qv: &[f64]| -> f64 {
        v.iter().zip(qv).map(|(a, b)| 0.5 * a * b - a).sum()
    };
    let mut x = vec![0.0; n];
    let mut qx = vec![0.0; n];
    let mut z = x.clone();
    let mut qz = qx.clone();
    let mut t = 1.0f64;
    let mut f_x = 0.0;
    for it in 0..400_000 {
        let v: Vec<f64> = z.iter().zip(&qz).map(|(zi, qi)| zi - step * (qi - 1.0)).collect();
        let next = project(&v, y, c);
        let qn = matvec(&next);
        let f_next = value(&next, &qn);
        if f_next > f_x {
            // adaptive restart
            z.clone_from(&x);
            qz.clone_from(&qx);
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let m = (t - 1.0) / t_next;
        z = next.iter().zip(&x).map(|(a, b)| a + m * (a - b)).collect();
        qz = qn.iter().zip(&qx).map(|(a, b)| a + m * (a - b)).collect();
        let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        qx = qn;
        f_x = f_next;
        t = t_next;
        if moved < 1e-12 && it > 100 {
            break;
        }
    }
    x
}
