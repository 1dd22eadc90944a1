//! Rooted unordered trees with per-node payloads.
//!
//! Nodes live in a flat vector and refer to each other by index. Child order
//! carries no meaning: every traversal here visits children in ascending
//! index order, whatever order the `children` lists happen to be stored in.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Tolerance used when checking size invariants on stored reals.
const SIZE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// Opaque identifier, unique within the tree.
    pub id: String,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Absolute size (pixel count) when known.
    pub size: Option<f64>,
    /// Raw per-dimension observations; carried by leaves.
    pub leaf_values: Option<Vec<f64>>,
    /// Feature vector consumed by the atomic kernels.
    pub features: Option<Vec<f64>>,
    /// Size relative to the root, in (0, 1].
    pub rel_size: f64,
}

impl Node {
    pub fn new(id: impl Into<String>, parent: Option<usize>) -> Self {
        Node {
            id: id.into(),
            parent,
            children: Vec::new(),
            size: None,
            leaf_values: None,
            features: None,
            rel_size: 1.0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub root: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NoRoot,
    MultipleRoots,
    Cycle,
    Unreachable,
    InconsistentLinks,
    UnknownNode,
    DuplicateId,
    ChildLargerThanParent,
    RootSizeNotOne,
    RelSizeOutOfRange,
    PartialSizes,
    MissingPayload,
    FeatureDims,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NoRoot => "no root",
            Rule::MultipleRoots => "multiple roots",
            Rule::Cycle => "cycle",
            Rule::Unreachable => "unreachable from root",
            Rule::InconsistentLinks => "inconsistent links",
            Rule::UnknownNode => "unknown node reference",
            Rule::DuplicateId => "duplicate node id",
            Rule::ChildLargerThanParent => "child larger than parent",
            Rule::RootSizeNotOne => "root rel_size is not 1",
            Rule::RelSizeOutOfRange => "rel_size outside (0, 1]",
            Rule::PartialSizes => "size given on some nodes only",
            Rule::MissingPayload => "leaf has neither features nor leaf_values",
            Rule::FeatureDims => "feature dimension mismatch",
        };
        f.write_str(s)
    }
}

/// One broken invariant, attributed to a node where that makes sense.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    pub node: Option<String>,
}

impl Violation {
    pub fn new(rule: Rule, node: Option<&str>) -> Self {
        Violation {
            rule,
            node: node.map(str::to_owned),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(n) => write!(f, "{} (node {})", self.rule, n),
            None => write!(f, "{}", self.rule),
        }
    }
}

/// How relative sizes are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeMode {
    /// Use the absolute `size` stored on every node.
    Pixel,
    /// Size of a node = number of leaves below it.
    LeafCount,
}

impl Tree {
    /// Builds child lists and locates the root from parent links alone.
    ///
    /// Structural problems (root count, dangling references, cycles) are
    /// returned as violations; payload invariants are left to [`validate_tree`].
    pub fn from_parent_links(mut nodes: Vec<Node>) -> std::result::Result<Tree, Vec<Violation>> {
        let n = nodes.len();
        let mut violations = Vec::new();
        for node in nodes.iter_mut() {
            node.children.clear();
        }
        let mut roots = Vec::new();
        for i in 0..n {
            match nodes[i].parent {
                None => roots.push(i),
                Some(p) if p >= n || p == i => {
                    let rule = if p == i { Rule::Cycle } else { Rule::UnknownNode };
                    violations.push(Violation::new(rule, Some(&nodes[i].id)));
                }
                Some(p) => nodes[p].children.push(i),
            }
        }
        match roots.len() {
            0 => violations.push(Violation::new(Rule::NoRoot, None)),
            1 => {}
            _ => violations.push(Violation::new(Rule::MultipleRoots, None)),
        }
        let tree = Tree {
            nodes,
            root: roots.first().copied().unwrap_or(0),
        };
        violations.extend(tree.reachability_violations());
        if violations.is_empty() {
            Ok(tree)
        } else {
            violations.dedup();
            Err(violations)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_node(&self) -> &Node {
        &self.nodes[self.root]
    }

    /// Children of `n` in ascending index order.
    pub fn sorted_children(&self, n: usize) -> Vec<usize> {
        let mut c = self.nodes[n].children.clone();
        c.sort_unstable();
        c
    }

    /// Post-order (children before parents) over the nodes reachable from the root.
    pub fn post_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![(self.root, false)];
        seen[self.root] = true;
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                out.push(node);
                continue;
            }
            stack.push((node, true));
            // reversed so that the smallest index is visited first
            for c in self.sorted_children(node).into_iter().rev() {
                if c < n && !seen[c] {
                    seen[c] = true;
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// Leaf indices below each node (a leaf is below itself).
    pub fn leaves_below(&self) -> Vec<Vec<usize>> {
        let mut below: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for n in self.post_order() {
            if self.nodes[n].is_leaf() {
                below[n].push(n);
            } else {
                let mut acc = Vec::new();
                for c in self.sorted_children(n) {
                    acc.extend_from_slice(&below[c]);
                }
                below[n] = acc;
            }
        }
        below
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Height in edges of the deepest leaf below the root.
    pub fn height(&self) -> usize {
        let mut h = vec![0usize; self.len()];
        for n in self.post_order() {
            h[n] = self.nodes[n]
                .children
                .iter()
                .map(|&c| h[c] + 1)
                .max()
                .unwrap_or(0);
        }
        h.get(self.root).copied().unwrap_or(0)
    }

    fn reachability_violations(&self) -> Vec<Violation> {
        let n = self.len();
        let mut out = Vec::new();
        if n == 0 {
            out.push(Violation::new(Rule::NoRoot, None));
            return out;
        }
        let mut visits = vec![0u32; n];
        let mut stack = vec![self.root];
        visits[self.root] = 1;
        while let Some(node) = stack.pop() {
            for &c in &self.nodes[node].children {
                if c >= n {
                    continue;
                }
                visits[c] += 1;
                if visits[c] == 1 {
                    stack.push(c);
                } else {
                    out.push(Violation::new(Rule::Cycle, Some(&self.nodes[c].id)));
                }
            }
        }
        for i in 0..n {
            if visits[i] > 0 {
                continue;
            }
            // Walk parent links; an unreachable node either sits on a loop or hangs off one.
            let mut cur = i;
            let mut steps = 0;
            let mut looped = false;
            while let Some(p) = self.nodes[cur].parent {
                if p >= n {
                    break;
                }
                cur = p;
                steps += 1;
                if steps > n {
                    looped = true;
                    break;
                }
            }
            let rule = if looped { Rule::Cycle } else { Rule::Unreachable };
            out.push(Violation::new(rule, Some(&self.nodes[i].id)));
        }
        out
    }
}

/// Checks every structural and payload invariant of a tree.
///
/// An empty report means the tree is valid.
pub fn validate_tree(tree: &Tree) -> Vec<Violation> {
    let n = tree.len();
    let mut out = Vec::new();
    if n == 0 || tree.root >= n {
        out.push(Violation::new(Rule::NoRoot, None));
        return out;
    }

    let parentless: Vec<usize> = (0..n).filter(|&i| tree.nodes[i].parent.is_none()).collect();
    match parentless.len() {
        0 => out.push(Violation::new(Rule::NoRoot, None)),
        1 if parentless[0] != tree.root => out.push(Violation::new(
            Rule::InconsistentLinks,
            Some(&tree.nodes[tree.root].id),
        )),
        1 => {}
        _ => out.push(Violation::new(Rule::MultipleRoots, None)),
    }

    let mut ids = std::collections::HashSet::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        if !ids.insert(node.id.as_str()) {
            out.push(Violation::new(Rule::DuplicateId, Some(&node.id)));
        }
        for &c in &node.children {
            if c >= n {
                out.push(Violation::new(Rule::UnknownNode, Some(&node.id)));
            } else if tree.nodes[c].parent != Some(i) {
                out.push(Violation::new(Rule::InconsistentLinks, Some(&tree.nodes[c].id)));
            }
        }
        if let Some(p) = node.parent {
            if p >= n {
                out.push(Violation::new(Rule::UnknownNode, Some(&node.id)));
            } else if !tree.nodes[p].children.contains(&i) {
                out.push(Violation::new(Rule::InconsistentLinks, Some(&node.id)));
            }
        }
    }

    out.extend(tree.reachability_violations());

    let root = &tree.nodes[tree.root];
    if (root.rel_size - 1.0).abs() > SIZE_EPS {
        out.push(Violation::new(Rule::RootSizeNotOne, Some(&root.id)));
    }
    for node in &tree.nodes {
        if !(node.rel_size > 0.0 && node.rel_size <= 1.0 + SIZE_EPS) {
            out.push(Violation::new(Rule::RelSizeOutOfRange, Some(&node.id)));
        }
        for &c in &node.children {
            if c < n && tree.nodes[c].rel_size > node.rel_size + SIZE_EPS {
                out.push(Violation::new(
                    Rule::ChildLargerThanParent,
                    Some(&tree.nodes[c].id),
                ));
            }
        }
    }

    let dims: Vec<Option<usize>> = tree
        .nodes
        .iter()
        .map(|n| n.features.as_ref().map(Vec::len))
        .collect();
    if dims.iter().any(Option::is_some) {
        let first = dims.iter().flatten().next().copied();
        for (node, d) in tree.nodes.iter().zip(&dims) {
            if *d != first {
                out.push(Violation::new(Rule::FeatureDims, Some(&node.id)));
            }
        }
    }
    out
}

/// Fills `rel_size` on every node as size(n) / size(root).
pub fn compute_rel_sizes(tree: &Tree, mode: SizeMode) -> Result<Tree> {
    let mut out = tree.clone();
    let abs: Vec<f64> = match mode {
        SizeMode::Pixel => tree
            .nodes
            .iter()
            .map(|n| {
                n.size.ok_or_else(|| {
                    Error::Features(format!("node {} has no absolute size", n.id))
                })
            })
            .collect::<Result<_>>()?,
        SizeMode::LeafCount => {
            let mut count = vec![0.0; tree.len()];
            for n in tree.post_order() {
                count[n] = if tree.nodes[n].is_leaf() {
                    1.0
                } else {
                    tree.nodes[n].children.iter().map(|&c| count[c]).sum()
                };
            }
            count
        }
    };
    let root_size = abs[tree.root];
    if !(root_size > 0.0) {
        return Err(Error::Features("root size is zero".into()));
    }
    for (node, s) in out.nodes.iter_mut().zip(abs) {
        node.rel_size = s / root_size;
    }
    Ok(out)
}

/// Number of downward subpaths of each node count (single nodes have length 1).
pub fn subpath_length_census(tree: &Tree) -> BTreeMap<usize, u64> {
    // profile[n][d] = descendants of n exactly d edges below it (d = 0 is n itself)
    let mut profile: Vec<Vec<u64>> = vec![Vec::new(); tree.len()];
    let mut census = BTreeMap::new();
    for n in tree.post_order() {
        let mut p = vec![1u64];
        for &c in &tree.nodes[n].children {
            let child = &profile[c];
            if p.len() < child.len() + 1 {
                p.resize(child.len() + 1, 0);
            }
            for (d, &k) in child.iter().enumerate() {
                p[d + 1] += k;
            }
        }
        for (d, &k) in p.iter().enumerate() {
            *census.entry(d + 1).or_insert(0) += k;
        }
        profile[n] = p;
    }
    census
}
