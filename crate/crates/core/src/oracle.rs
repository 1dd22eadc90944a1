//! Randomized cross-check of the dynamic program against path enumeration.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::atomic::{AtomicKind, KernelConfig};
use crate::error::Result;
use crate::kernel::{subpath_kernel, subpath_kernel_oracle};
use crate::rng::{derive_seed, rng_from, Rng};
use crate::tree::{compute_rel_sizes, Node, SizeMode, Tree};

const CASE_TAG: u64 = 0x4f52_4143;

/// Random tree with `n` nodes: node `i > 0` hangs below a uniformly drawn
/// earlier node. Relative sizes follow leaf counts.
pub fn random_tree(n: usize, rng: &mut Rng) -> Tree {
    let nodes: Vec<Node> = (0..n.max(1))
        .map(|i| {
            let parent = (i > 0).then(|| rng.random_range(0..i));
            Node::new(format!("n{i}"), parent)
        })
        .collect();
    let tree = Tree::from_parent_links(nodes).expect("parent links form a tree");
    compute_rel_sizes(&tree, SizeMode::LeafCount).expect("leaf counts are consistent")
}

/// Random features on every node: uniform reals for Gaussian, non-negative
/// reals for χ², and a single symbol from a small alphabet for delta.
pub fn random_features(tree: &mut Tree, kind: AtomicKind, rng: &mut Rng) {
    let dims = rng.random_range(1..=3);
    let alphabet = rng.random_range(1..=3u32);
    for node in &mut tree.nodes {
        node.features = Some(match kind {
            AtomicKind::Gaussian => (0..dims).map(|_| rng.random_range(-2.0..2.0)).collect(),
            AtomicKind::Chi2 => (0..dims)
                .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.0) })
                .collect(),
            AtomicKind::Delta => vec![f64::from(rng.random_range(0..alphabet))],
        });
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleCase {
    pub case: usize,
    pub config: KernelConfig,
    pub nodes: (usize, usize),
    pub dp: f64,
    pub oracle: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases: usize,
    pub max_relative_error: f64,
    pub worst: Option<OracleCase>,
}

/// Compares the dynamic program with explicit enumeration on `cases` random
/// tree pairs of at most `max_nodes` nodes each. Atomic kinds rotate
/// Gaussian, χ², delta; γ is drawn from [0, 5] and β from {0, 0.5, 1}.
pub fn oracle_check(max_nodes: usize, cases: usize, seed: u64) -> Result<OracleReport> {
    let kinds = [AtomicKind::Gaussian, AtomicKind::Chi2, AtomicKind::Delta];
    let mut report = OracleReport {
        cases,
        max_relative_error: 0.0,
        worst: None,
    };
    for case in 0..cases {
        let mut rng = rng_from(derive_seed(seed, CASE_TAG, case as u64));
        let kind = kinds[case % kinds.len()];
        let mut a = random_tree(rng.random_range(1..=max_nodes.max(1)), &mut rng);
        let mut b = random_tree(rng.random_range(1..=max_nodes.max(1)), &mut rng);
        random_features(&mut a, kind, &mut rng);
        let b_dims = a.nodes[0].features.as_ref().map_or(1, Vec::len);
        random_features(&mut b, kind, &mut rng);
        // both trees must share a feature dimension
        for node in &mut b.nodes {
            if let Some(f) = &mut node.features {
                f.resize(b_dims, 0.5);
            }
        }
        let gamma = rng.random_range(0.0..=5.0);
        let beta = [0.0, 0.5, 1.0][rng.random_range(0..3)];
        let cfg = KernelConfig::new(kind, gamma, beta);
        let dp = subpath_kernel(&a, &b, &cfg)?;
        let oracle = subpath_kernel_oracle(&a, &b, &cfg)?;
        let err = if oracle == 0.0 {
            dp.abs()
        } else {
            (dp - oracle).abs() / oracle.abs()
        };
        if err > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = report.max_relative_error.max(err);
            report.worst = Some(OracleCase {
                case,
                config: cfg,
                nodes: (a.len(), b.len()),
                dp,
                oracle,
                relative_error: err,
            });
        }
    }
    Ok(report)
}
