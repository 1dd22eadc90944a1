//! Tree kernels: the subpath kernel, its brute-force reference, and the
//! root-only baseline.
//!
//! The subpath kernel sums, over every pair of equal-length downward paths
//! `(s, s')` of two trees, the product of the atomic kernels between the
//! aligned nodes (top to bottom). It is evaluated with two tables over node
//! pairs:
//!
//! ```text
//! P(n, n') = k(n, n') · (1 + Σ_{c ∈ C(n), c' ∈ C(n')} P(c, c'))
//! W(n, n') = P(n, n') + Σ_{c ∈ C(n), c' ∈ C(n')} W(c, c')
//! K(T, T') = Σ_{n'} W(r, n') + Σ_{n ≠ r} W(n, r')
//! ```
//!
//! `P` sums the path pairs starting exactly at `(n, n')`; `W` sums the pairs
//! whose start nodes lie at the same depth below `n` and `n'`. Every pair of
//! start nodes has exactly one ancestor alignment that puts one of them at a
//! root, so `K` counts each path pair once. Cost is `O(|T|·|T'|)`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::atomic::{
    atomic, atomic_from_distance, feature_distance, node_features, size_weight, AtomicKind,
    KernelConfig,
};
use crate::error::{Error, Result};
use crate::tree::{subpath_length_census, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Subpath,
    Rooted,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Subpath => "subpath",
            KernelKind::Rooted => "rooted",
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subpath" => Ok(KernelKind::Subpath),
            "rooted" => Ok(KernelKind::Rooted),
            other => Err(Error::Param(format!("unknown kernel '{other}'"))),
        }
    }
}

/// A tree flattened into post-order with CSR child lists.
///
/// Position `i` is the `i`-th node in post-order, so children always precede
/// their parent and the root is last. Children are kept in ascending storage
/// index order, which makes evaluation independent of stored child order.
#[derive(Debug, Clone)]
pub struct PreparedTree {
    child_start: Vec<u32>,
    child_list: Vec<u32>,
    rel_size: Vec<f64>,
    features: Vec<f64>,
    dim: usize,
}

impl PreparedTree {
    pub fn new(tree: &Tree) -> Result<Self> {
        let order = tree.post_order();
        if order.len() != tree.len() {
            return Err(Error::Features("tree has nodes unreachable from the root".into()));
        }
        let mut position = vec![0u32; tree.len()];
        for (pos, &node) in order.iter().enumerate() {
            position[node] = pos as u32;
        }
        let dim = node_features(tree.root_node())?.len();
        let mut child_start = Vec::with_capacity(order.len() + 1);
        let mut child_list = Vec::with_capacity(order.len());
        let mut rel_size = Vec::with_capacity(order.len());
        let mut features = Vec::with_capacity(order.len() * dim);
        child_start.push(0);
        for &node in &order {
            child_list.extend(tree.sorted_children(node).into_iter().map(|c| position[c]));
            child_start.push(child_list.len() as u32);
            rel_size.push(tree.nodes[node].rel_size);
            let f = node_features(&tree.nodes[node])?;
            if f.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: f.len(),
                });
            }
            features.extend_from_slice(f);
        }
        Ok(PreparedTree {
            child_start,
            child_list,
            rel_size,
            features,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.rel_size.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rel_size.is_empty()
    }

    fn root(&self) -> usize {
        self.len() - 1
    }

    #[inline]
    fn children(&self, i: usize) -> &[u32] {
        &self.child_list[self.child_start[i] as usize..self.child_start[i + 1] as usize]
    }

    #[inline]
    fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// A batch of kernel configurations evaluated together.
///
/// All members share the atomic kind; distances are computed once per node
/// pair and each distinct γ and β is applied once.
#[derive(Debug, Clone)]
pub struct ConfigBatch {
    kind: AtomicKind,
    gammas: Vec<f64>,
    betas: Vec<f64>,
    /// (gamma index, beta index) for every configuration.
    lanes: Vec<(usize, usize)>,
}

impl ConfigBatch {
    pub fn new(configs: &[KernelConfig]) -> Result<Self> {
        let first = configs
            .first()
            .ok_or_else(|| Error::Param("empty configuration list".into()))?;
        let mut gammas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut lanes = Vec::with_capacity(configs.len());
        for cfg in configs {
            cfg.validate()?;
            if cfg.atomic != first.atomic {
                return Err(Error::Param("configurations mix atomic kernels".into()));
            }
            let g = index_of(&mut gammas, cfg.gamma);
            let b = index_of(&mut betas, cfg.beta);
            lanes.push((g, b));
        }
        Ok(ConfigBatch {
            kind: first.atomic,
            gammas,
            betas,
            lanes,
        })
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }
}

fn index_of(v: &mut Vec<f64>, x: f64) -> usize {
    match v.iter().position(|y| y.to_bits() == x.to_bits()) {
        Some(i) => i,
        None => {
            v.push(x);
            v.len() - 1
        }
    }
}

/// Reusable buffers for [`SubpathEvaluator`].
#[derive(Debug, Default)]
pub struct Scratch {
    dist: Vec<f64>,
    rbf: Vec<f64>,
    weight_a: Vec<f64>,
    weight_b: Vec<f64>,
    atom: Vec<f64>,
    p: Vec<f64>,
    w: Vec<f64>,
    acc: Vec<f64>,
}

/// Unnormalized subpath kernel values for every configuration of a batch.
pub fn subpath_kernel_batch(
    a: &PreparedTree,
    b: &PreparedTree,
    batch: &ConfigBatch,
    scratch: &mut Scratch,
) -> Result<Vec<f64>> {
    let (n1, n2) = (a.len(), b.len());
    let lanes = batch.len();
    let pairs = n1 * n2;

    // distances and per-γ RBF values
    scratch.dist.clear();
    for i in 0..n1 {
        for j in 0..n2 {
            scratch
                .dist
                .push(feature_distance(batch.kind, a.features(i), b.features(j))?);
        }
    }
    let ng = batch.gammas.len();
    scratch.rbf.clear();
    scratch.rbf.resize(pairs * ng, 0.0);
    for (g, &gamma) in batch.gammas.iter().enumerate() {
        for (pair, &d) in scratch.dist.iter().enumerate() {
            scratch.rbf[g * pairs + pair] = atomic_from_distance(batch.kind, d, 1.0, gamma);
        }
    }
    // per-β size weights of each node
    let nb = batch.betas.len();
    scratch.weight_a.clear();
    scratch.weight_b.clear();
    for &beta in &batch.betas {
        scratch
            .weight_a
            .extend(a.rel_size.iter().map(|&s| size_weight(s, 1.0, beta)));
        scratch
            .weight_b
            .extend(b.rel_size.iter().map(|&s| size_weight(s, 1.0, beta)));
    }
    debug_assert_eq!(scratch.weight_a.len(), nb * n1);

    scratch.atom.clear();
    scratch.atom.resize(pairs * lanes, 0.0);
    for i in 0..n1 {
        for j in 0..n2 {
            let pair = i * n2 + j;
            let out = &mut scratch.atom[pair * lanes..(pair + 1) * lanes];
            for (slot, &(g, bi)) in out.iter_mut().zip(&batch.lanes) {
                let w = scratch.weight_a[bi * n1 + i] * scratch.weight_b[bi * n2 + j];
                *slot = w * scratch.rbf[g * pairs + pair];
            }
        }
    }

    scratch.p.clear();
    scratch.p.resize(pairs * lanes, 0.0);
    scratch.w.clear();
    scratch.w.resize(pairs * lanes, 0.0);
    scratch.acc.clear();
    scratch.acc.resize(2 * lanes, 0.0);
    let Scratch { atom, p, w, acc, .. } = scratch;
    let (sp, sw) = acc.split_at_mut(lanes);

    for i in 0..n1 {
        let ci = a.children(i);
        for j in 0..n2 {
            let base = (i * n2 + j) * lanes;
            let cj = b.children(j);
            if ci.is_empty() || cj.is_empty() {
                p[base..base + lanes].copy_from_slice(&atom[base..base + lanes]);
                w[base..base + lanes].copy_from_slice(&atom[base..base + lanes]);
                continue;
            }
            sp.fill(0.0);
            sw.fill(0.0);
            for &x in ci {
                let row = x as usize * n2;
                for &y in cj {
                    let cb = (row + y as usize) * lanes;
                    for l in 0..lanes {
                        sp[l] += p[cb + l];
                        sw[l] += w[cb + l];
                    }
                }
            }
            for l in 0..lanes {
                let v = atom[base + l] * (1.0 + sp[l]);
                p[base + l] = v;
                w[base + l] = v + sw[l];
            }
        }
    }

    let (ra, rb) = (a.root(), b.root());
    let mut total = vec![0.0; lanes];
    for j in 0..n2 {
        let base = (ra * n2 + j) * lanes;
        for l in 0..lanes {
            total[l] += w[base + l];
        }
    }
    for i in 0..n1 {
        if i == ra {
            continue;
        }
        let base = (i * n2 + rb) * lanes;
        for l in 0..lanes {
            total[l] += w[base + l];
        }
    }
    Ok(total)
}

/// Subpath kernel between two trees with extracted features.
pub fn subpath_kernel(t1: &Tree, t2: &Tree, cfg: &KernelConfig) -> Result<f64> {
    let a = PreparedTree::new(t1)?;
    let b = PreparedTree::new(t2)?;
    let batch = ConfigBatch::new(std::slice::from_ref(cfg))?;
    let mut scratch = Scratch::default();
    let k = subpath_kernel_batch(&a, &b, &batch, &mut scratch)?[0];
    if !cfg.normalize {
        return Ok(k);
    }
    let kaa = subpath_kernel_batch(&a, &a, &batch, &mut scratch)?[0];
    let kbb = subpath_kernel_batch(&b, &b, &batch, &mut scratch)?[0];
    normalize(k, kaa, kbb)
}

pub(crate) fn normalize(k: f64, kaa: f64, kbb: f64) -> Result<f64> {
    if kaa <= 0.0 || kbb <= 0.0 {
        return Err(Error::ZeroSelfSimilarity);
    }
    Ok(k / (kaa * kbb).sqrt())
}

/// All downward paths of a tree, each listed from its top node to its bottom node.
pub fn enumerate_subpaths(tree: &Tree) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for start in 0..tree.len() {
        let mut stack = vec![vec![start]];
        while let Some(path) = stack.pop() {
            let last = *path.last().expect("non-empty");
            for &c in &tree.nodes[last].children {
                let mut next = path.clone();
                next.push(c);
                stack.push(next);
            }
            out.push(path);
        }
    }
    out
}

/// Reference evaluation by explicit enumeration of all subpath pairs.
///
/// Quartic in the tree sizes; meant for small trees and for checking
/// [`subpath_kernel`].
pub fn subpath_kernel_oracle(t1: &Tree, t2: &Tree, cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    let raw = |x: &Tree, y: &Tree| -> Result<f64> {
        let sx = enumerate_subpaths(x);
        let sy = enumerate_subpaths(y);
        let mut total = 0.0;
        for s in &sx {
            for t in sy.iter().filter(|t| t.len() == s.len()) {
                let mut prod = 1.0;
                for (&n, &m) in s.iter().zip(t) {
                    prod *= atomic(&x.nodes[n], &y.nodes[m], cfg)?;
                }
                total += prod;
            }
        }
        Ok(total)
    };
    let k = raw(t1, t2)?;
    if !cfg.normalize {
        return Ok(k);
    }
    normalize(k, raw(t1, t1)?, raw(t2, t2)?)
}

/// Atomic kernel between the two roots only.
pub fn rooted_kernel(t1: &Tree, t2: &Tree, cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    let (r1, r2) = (t1.root_node(), t2.root_node());
    let k = atomic(r1, r2, cfg)?;
    if !cfg.normalize {
        return Ok(k);
    }
    normalize(k, atomic(r1, r1, cfg)?, atomic(r2, r2, cfg)?)
}

/// Key identifying a subpath by the exact bit patterns of its node features.
pub type Signature = Vec<Vec<u64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SubpathCensus {
    pub by_length: BTreeMap<usize, u64>,
    pub by_signature: Option<HashMap<Signature, u64>>,
}

impl SubpathCensus {
    pub fn total(&self) -> u64 {
        self.by_length.values().sum()
    }
}

/// Counts subpaths by length and, when `signatures` is set, by feature sequence.
pub fn subpath_census(tree: &Tree, signatures: bool) -> Result<SubpathCensus> {
    let by_length = subpath_length_census(tree);
    let by_signature = if signatures {
        let mut map = HashMap::new();
        for path in enumerate_subpaths(tree) {
            let sig = path
                .iter()
                .map(|&n| {
                    node_features(&tree.nodes[n]).map(|f| f.iter().map(|v| v.to_bits()).collect())
                })
                .collect::<Result<Signature>>()?;
            *map.entry(sig).or_insert(0) += 1;
        }
        Some(map)
    } else {
        None
    };
    Ok(SubpathCensus {
        by_length,
        by_signature,
    })
}

/// Symbolic subpath kernel: Σ over shared subpaths of the product of occurrence counts.
pub fn symbolic_kernel(a: &SubpathCensus, b: &SubpathCensus) -> Option<u64> {
    let (sa, sb) = (a.by_signature.as_ref()?, b.by_signature.as_ref()?);
    Some(
        sa.iter()
            .filter_map(|(s, &h)| sb.get(s).map(|&g| h * g))
            .sum(),
    )
}

/// Σ_ℓ census_a[ℓ] · census_b[ℓ].
pub fn length_census_product(a: &BTreeMap<usize, u64>, b: &BTreeMap<usize, u64>) -> u64 {
    a.iter()
        .filter_map(|(l, &x)| b.get(l).map(|&y| x * y))
        .sum()
}
