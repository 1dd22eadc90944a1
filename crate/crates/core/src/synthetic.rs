//! Seeded generators for the artificial two-class tree scenarios.
//!
//! Leaves carry a 1-D value drawn uniformly from a type interval:
//! type A from `[0, 1)`, type B from `[2, 3)`, outliers from `[4, 5)`.
//! Optional noise dimensions are drawn from `[0, 5)` for every leaf of every
//! class. Trees are grown bottom-up: the current level is shuffled and cut
//! into groups whose sizes are drawn from a fanout range, each group getting
//! a new parent, until a single root remains.
//!
//! * `a`: class 1 leaves are all A, class 2 leaves all B; shapes are random.
//! * `b`: all leaves are A; the classes use disjoint fanout ranges.
//! * `c`: every tree has as many A as B leaves, leaves come in sibling pairs.
//!   Class 1 pairs are always (A, B); class 2 pairs are (A, A) or (B, B).
//! * `c1`: `c` with a fraction of leaves redrawn from the outlier interval.
//! * `c2`: `c` with a fraction of leaves flipped to the opposite type.

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Item};
use crate::error::{Error, Result};
use crate::features::ValueRange;
use crate::rng::{derive_seed, rng_from, Rng};
use crate::tree::{compute_rel_sizes, validate_tree, Node, SizeMode, Tree};

pub const TYPE_A: (f64, f64) = (0.0, 1.0);
pub const TYPE_B: (f64, f64) = (2.0, 3.0);
pub const OUTLIER: (f64, f64) = (4.0, 5.0);
pub const NOISE: (f64, f64) = (0.0, 5.0);

/// Histogram range covering every value the two-class generators produce.
pub const VALUE_RANGE: ValueRange = ValueRange { lo: 0.0, hi: 5.0 };

const TREE_TAG: u64 = 0x7472_6565;
const SUITE_TAG: u64 = 0x7375_6974;
const PAIRING_TAG: u64 = 0x7061_6972;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    A,
    B,
    C,
    C1,
    C2,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::A => "a",
            Scenario::B => "b",
            Scenario::C => "c",
            Scenario::C1 => "c1",
            Scenario::C2 => "c2",
        }
    }

    /// Histogram bins per dimension used with this scenario.
    pub fn histogram_bins(self) -> usize {
        match self {
            Scenario::C1 => 12,
            _ => 4,
        }
    }

    /// Largest legal distortion ratio.
    pub fn max_distortion(self) -> f64 {
        match self {
            Scenario::C1 => 1.0,
            Scenario::C2 => 0.5,
            _ => 0.0,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Scenario::A),
            "b" => Ok(Scenario::B),
            "c" => Ok(Scenario::C),
            "c1" => Ok(Scenario::C1),
            "c2" => Ok(Scenario::C2),
            other => Err(Error::Param(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Inclusive integer range.
pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub scenario: Scenario,
    pub trees_per_class: usize,
    pub leaf_range: Span,
    pub fanout_range_class1: Span,
    pub fanout_range_class2: Span,
    pub distortion_ratio: f64,
    pub extra_noise_dims: usize,
    pub seed: u64,
}

impl ScenarioParams {
    /// Defaults: 120 trees per class, 16..=32 leaves, fanout 2..=3
    /// (5..=8 for class 2 in scenario `b`).
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        let class2 = if scenario == Scenario::B { (5, 8) } else { (2, 3) };
        ScenarioParams {
            scenario,
            trees_per_class: 120,
            leaf_range: (16, 32),
            fanout_range_class1: (2, 3),
            fanout_range_class2: class2,
            distortion_ratio: 0.0,
            extra_noise_dims: 0,
            seed,
        }
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.distortion_ratio = ratio;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Param(m));
        if self.trees_per_class < 21 {
            return bad(format!(
                "trees_per_class must be >= 21, got {}",
                self.trees_per_class
            ));
        }
        let (lo, hi) = self.leaf_range;
        if lo < 1 || lo > hi {
            return bad(format!("empty leaf range {lo}..={hi}"));
        }
        for (lo, hi) in [self.fanout_range_class1, self.fanout_range_class2] {
            if lo < 2 || lo > hi {
                return bad(format!("fanout range {lo}..={hi} must satisfy 2 <= lo <= hi"));
            }
        }
        if matches!(self.scenario, Scenario::C | Scenario::C1 | Scenario::C2)
            && lo.div_ceil(4) > hi / 4
        {
            return bad(format!("leaf range {lo}..={hi} contains no multiple of 4"));
        }
        let r = self.distortion_ratio;
        if !(0.0..=self.scenario.max_distortion()).contains(&r) {
            return bad(format!(
                "distortion ratio {r} outside [0, {}] for scenario {}",
                self.scenario.max_distortion(),
                self.scenario.name()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LeafType {
    A,
    B,
}

impl LeafType {
    fn interval(self) -> (f64, f64) {
        match self {
            LeafType::A => TYPE_A,
            LeafType::B => TYPE_B,
        }
    }

    fn flipped(self) -> LeafType {
        match self {
            LeafType::A => LeafType::B,
            LeafType::B => LeafType::A,
        }
    }
}

/// Builds a two-class dataset; identical parameters give identical datasets.
pub fn generate(params: &ScenarioParams) -> Result<Dataset> {
    params.validate()?;
    let mut items = Vec::with_capacity(2 * params.trees_per_class);
    for class in 0..2 {
        let fanout = if class == 0 {
            params.fanout_range_class1
        } else {
            params.fanout_range_class2
        };
        for t in 0..params.trees_per_class {
            let stream = (class * params.trees_per_class + t) as u64;
            let mut rng = rng_from(derive_seed(params.seed, TREE_TAG, stream));
            let tree = scenario_tree(params, class, fanout, &mut rng)?;
            items.push(Item {
                id: format!("class{}-{t:04}", class + 1),
                label: format!("class{}", class + 1),
                tree,
            });
        }
    }
    Dataset::new(items)
}

fn scenario_tree(params: &ScenarioParams, class: usize, fanout: Span, rng: &mut Rng) -> Result<Tree> {
    let (lo, hi) = params.leaf_range;
    let (mut parents, leaves, mut types) = match params.scenario {
        Scenario::A | Scenario::B => {
            let n = rng.random_range(lo..=hi);
            let parents = random_merge(n, fanout, rng);
            let t = if params.scenario == Scenario::A && class == 1 {
                LeafType::B
            } else {
                LeafType::A
            };
            (parents, (0..n).collect::<Vec<_>>(), vec![t; n])
        }
        Scenario::C | Scenario::C1 | Scenario::C2 => {
            let pairs = 2 * rng.random_range(lo.div_ceil(4)..=hi / 4);
            let mut parents = random_merge(pairs, fanout, rng);
            let mut contents: Vec<(LeafType, LeafType)> = if class == 0 {
                vec![(LeafType::A, LeafType::B); pairs]
            } else {
                let mut v = vec![(LeafType::A, LeafType::A); pairs / 2];
                v.extend(vec![(LeafType::B, LeafType::B); pairs / 2]);
                v
            };
            contents.shuffle(rng);
            let mut leaves = Vec::with_capacity(2 * pairs);
            let mut types = Vec::with_capacity(2 * pairs);
            for (p, (x, y)) in contents.into_iter().enumerate() {
                for t in [x, y] {
                    leaves.push(parents.len());
                    parents.push(Some(p));
                    types.push(t);
                }
            }
            (parents, leaves, types)
        }
    };

    let mut values: Vec<Vec<f64>> = types
        .iter()
        .map(|t| {
            let mut v = vec![uniform(rng, t.interval())];
            v.extend((0..params.extra_noise_dims).map(|_| uniform(rng, NOISE)));
            v
        })
        .collect();

    let k = (params.distortion_ratio * leaves.len() as f64).round() as usize;
    if k > 0 {
        let chosen = index::sample(rng, leaves.len(), k).into_vec();
        for l in chosen {
            match params.scenario {
                Scenario::C1 => values[l][0] = uniform(rng, OUTLIER),
                Scenario::C2 => {
                    types[l] = types[l].flipped();
                    values[l][0] = uniform(rng, types[l].interval());
                }
                _ => unreachable!("validated: distortion only for c1/c2"),
            }
        }
    }

    let mut nodes: Vec<Node> = parents
        .drain(..)
        .enumerate()
        .map(|(i, p)| Node::new(format!("n{i}"), p))
        .collect();
    for (&l, v) in leaves.iter().zip(values) {
        nodes[l].leaf_values = Some(v);
    }
    finish_tree(nodes)
}

fn finish_tree(nodes: Vec<Node>) -> Result<Tree> {
    let tree = Tree::from_parent_links(nodes).map_err(|violations| Error::Validation {
        tree: "generated".into(),
        violations,
    })?;
    let tree = compute_rel_sizes(&tree, SizeMode::LeafCount)?;
    let violations = validate_tree(&tree);
    if !violations.is_empty() {
        return Err(Error::Validation {
            tree: "generated".into(),
            violations,
        });
    }
    Ok(tree)
}

fn uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..hi)
}

/// Parent links of a random tree above `bottom` initial nodes.
///
/// Nodes `0..bottom` are the initial nodes; merge nodes are appended and the
/// last one is the root. Each level is shuffled and cut into groups of sizes
/// drawn from `fanout`; a tail shorter than the minimum fanout moves up a
/// level unmerged.
pub fn random_merge(bottom: usize, (lo, hi): Span, rng: &mut Rng) -> Vec<Option<usize>> {
    let mut parents: Vec<Option<usize>> = vec![None; bottom];
    let mut level: Vec<usize> = (0..bottom).collect();
    while level.len() > 1 {
        level.shuffle(rng);
        if level.len() <= hi {
            let root = parents.len();
            parents.push(None);
            for &c in &level {
                parents[c] = Some(root);
            }
            break;
        }
        let mut next = Vec::new();
        let mut i = 0;
        while i < level.len() {
            let rem = level.len() - i;
            if rem < lo {
                next.extend_from_slice(&level[i..]);
                break;
            }
            let k = rng.random_range(lo..=hi).min(rem);
            let p = parents.len();
            parents.push(None);
            for &c in &level[i..i + k] {
                parents[c] = Some(p);
            }
            next.push(p);
            i += k;
        }
        level = next;
    }
    parents
}

/// One dataset per ratio, each with a seed derived from `base.seed` and its position.
pub fn scenario_suite(base: &ScenarioParams, ratios: &[f64]) -> Result<Vec<Dataset>> {
    let params: Vec<ScenarioParams> = ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| ScenarioParams {
            distortion_ratio: r,
            seed: suite_seed(base.seed, i),
            ..base.clone()
        })
        .collect();
    for p in &params {
        p.validate()?;
    }
    params.iter().map(generate).collect()
}

/// Seed used for the `index`-th dataset of a suite.
pub fn suite_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, SUITE_TAG, index as u64)
}

/// Value range of the multi-class pairing generator.
pub const PAIRING_VALUE_RANGE: ValueRange = ValueRange { lo: 0.0, hi: 8.0 };

/// Sibling-pair compositions per class over four leaf types; every pattern
/// uses each type exactly twice, so all classes share the same leaf multiset.
const PAIRING_PATTERNS: [[(u8, u8); 4]; 7] = [
    [(0, 1), (0, 1), (2, 3), (2, 3)],
    [(0, 2), (0, 2), (1, 3), (1, 3)],
    [(0, 3), (0, 3), (1, 2), (1, 2)],
    [(0, 0), (1, 1), (2, 2), (3, 3)],
    [(0, 0), (1, 1), (2, 3), (2, 3)],
    [(0, 1), (0, 1), (2, 2), (3, 3)],
    [(0, 2), (0, 2), (1, 1), (3, 3)],
];

/// Seven-class variant of scenario `c`.
///
/// Leaves have one of four types (type `k` drawn from `[2k, 2k+1)`) in equal
/// numbers in every tree; classes differ only in which types share a parent.
/// Trees hold 2 to 4 blocks of four pairs (16 to 32 leaves) and upper levels
/// merge with fanout 2..=3.
pub fn generate_pairing_classes(trees_per_class: usize, seed: u64) -> Result<Dataset> {
    if trees_per_class < 21 {
        return Err(Error::Param("trees_per_class must be >= 21".into()));
    }
    let mut items = Vec::new();
    for (class, pattern) in PAIRING_PATTERNS.iter().enumerate() {
        for t in 0..trees_per_class {
            let stream = (class * trees_per_class + t) as u64;
            let mut rng = rng_from(derive_seed(seed, PAIRING_TAG, stream));
            let blocks = rng.random_range(2..=4usize);
            let pairs = 4 * blocks;
            let mut parents = random_merge(pairs, (2, 3), &mut rng);
            let mut contents: Vec<(u8, u8)> = pattern.repeat(blocks);
            contents.shuffle(&mut rng);
            let mut leaf_types = Vec::new();
            for (p, (x, y)) in contents.into_iter().enumerate() {
                for ty in [x, y] {
                    leaf_types.push((parents.len(), ty));
                    parents.push(Some(p));
                }
            }
            let mut nodes: Vec<Node> = parents
                .into_iter()
                .enumerate()
                .map(|(i, p)| Node::new(format!("n{i}"), p))
                .collect();
            for (l, ty) in leaf_types {
                let lo = 2.0 * ty as f64;
                nodes[l].leaf_values = Some(vec![uniform(&mut rng, (lo, lo + 1.0))]);
            }
            items.push(Item {
                id: format!("class{}-{t:04}", class + 1),
                label: format!("class{}", class + 1),
                tree: finish_tree(nodes)?,
            });
        }
    }
    Dataset::new(items)
}
