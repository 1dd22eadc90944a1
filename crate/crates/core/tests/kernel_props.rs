mod common;

use common::featured_tree;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use subpath_kernel::atomic::{AtomicKind, KernelConfig};
use subpath_kernel::dataset::{Dataset, Item};
use subpath_kernel::gram::gram_matrix;
use subpath_kernel::kernel::{
    length_census_product, subpath_census, subpath_kernel, subpath_kernel_oracle, symbolic_kernel,
    KernelKind,
};
use subpath_kernel::oracle::{random_features, random_tree};
use subpath_kernel::rng::rng_from;
use subpath_kernel::tree::{subpath_length_census, Node, Tree};

fn rel_gap(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Same tree with node storage shuffled, so every child list is permuted.
fn shuffled(tree: &Tree, seed: u64) -> Tree {
    let mut order: Vec<usize> = (0..tree.len()).collect();
    order.shuffle(&mut rng_from(seed));
    let mut position = vec![0; tree.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let nodes: Vec<Node> = order
        .iter()
        .map(|&old| {
            let src = &tree.nodes[old];
            let mut n = Node::new(src.id.clone(), src.parent.map(|p| position[p]));
            n.features = src.features.clone();
            n.leaf_values = src.leaf_values.clone();
            n.rel_size = src.rel_size;
            n
        })
        .collect();
    Tree::from_parent_links(nodes).unwrap()
}

fn kind_strategy() -> impl Strategy<Value = AtomicKind> {
    prop_oneof![
        Just(AtomicKind::Gaussian),
        Just(AtomicKind::Chi2),
        Just(AtomicKind::Delta)
    ]
}

fn tree_pair(seed: u64, n1: usize, n2: usize, kind: AtomicKind) -> (Tree, Tree) {
    let mut rng = rng_from(seed);
    let mut a = random_tree(n1, &mut rng);
    let mut b = random_tree(n2, &mut rng);
    random_features(&mut a, kind, &mut rng);
    random_features(&mut b, kind, &mut rng);
    let dims = a.nodes[0].features.as_ref().unwrap().len();
    for n in &mut b.nodes {
        n.features.as_mut().unwrap().resize(dims, 0.25);
    }
    (a, b)
}

#[test]
fn figure_tree_counts() {
    let mut nodes = vec![
        Node::new("A", None),
        Node::new("B1", Some(0)),
        Node::new("B2", Some(0)),
        Node::new("C", Some(2)),
    ];
    for (n, v) in nodes.iter_mut().zip([0.0, 1.0, 1.0, 2.0]) {
        n.features = Some(vec![v]);
    }
    let t = Tree::from_parent_links(nodes).unwrap();
    let counting = KernelConfig::new(AtomicKind::Gaussian, 0.0, 0.0);
    assert_eq!(subpath_kernel(&t, &t, &counting).unwrap(), 26.0);
    let delta = KernelConfig::new(AtomicKind::Delta, 1.0, 0.0);
    assert_eq!(subpath_kernel(&t, &t, &delta).unwrap(), 12.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dynamic_program_matches_enumeration(
        seed in any::<u64>(),
        n1 in 1usize..10,
        n2 in 1usize..10,
        kind in kind_strategy(),
        gamma in 0.0f64..5.0,
        beta in prop_oneof![Just(0.0), Just(0.5), Just(1.0)],
        normalize in any::<bool>(),
    ) {
        let (a, b) = tree_pair(seed, n1, n2, kind);
        let cfg = KernelConfig::new(kind, gamma, beta).normalized(normalize);
        let dp = subpath_kernel(&a, &b, &cfg).unwrap();
        let oracle = subpath_kernel_oracle(&a, &b, &cfg).unwrap();
        prop_assert!(rel_gap(dp, oracle) <= 1e-9, "dp {dp} oracle {oracle}");
    }

    #[test]
    fn symmetric(seed in any::<u64>(), n1 in 1usize..30, n2 in 1usize..30, kind in kind_strategy(), gamma in 0.0f64..3.0) {
        let (a, b) = tree_pair(seed, n1, n2, kind);
        let cfg = KernelConfig::new(kind, gamma, 0.5);
        let ab = subpath_kernel(&a, &b, &cfg).unwrap();
        let ba = subpath_kernel(&b, &a, &cfg).unwrap();
        prop_assert!(rel_gap(ab, ba) <= 1e-12);
    }

    #[test]
    fn child_order_invariant(seed in any::<u64>(), n1 in 1usize..25, n2 in 1usize..25, gamma in 0.0f64..3.0) {
        let (a, b) = tree_pair(seed, n1, n2, AtomicKind::Gaussian);
        let cfg = KernelConfig::new(AtomicKind::Gaussian, gamma, 1.0);
        let base = subpath_kernel(&a, &b, &cfg).unwrap();
        let moved = subpath_kernel(&shuffled(&a, seed ^ 1), &shuffled(&b, seed ^ 2), &cfg).unwrap();
        prop_assert!(rel_gap(moved, base) <= 1e-12);
        // reversing stored child lists alone leaves the value bit-identical
        let mut r = a.clone();
        for n in &mut r.nodes {
            n.children.reverse();
        }
        prop_assert_eq!(subpath_kernel(&r, &b, &cfg).unwrap(), base);
    }

    #[test]
    fn counting_identity(seed in any::<u64>(), n1 in 1usize..40, n2 in 1usize..40) {
        let (a, b) = tree_pair(seed, n1, n2, AtomicKind::Gaussian);
        let cfg = KernelConfig::new(AtomicKind::Gaussian, 0.0, 0.0);
        let k = subpath_kernel(&a, &b, &cfg).unwrap();
        let expected = length_census_product(&subpath_length_census(&a), &subpath_length_census(&b));
        prop_assert_eq!(k, expected as f64);
    }

    #[test]
    fn delta_reduces_to_symbolic_census(seed in any::<u64>(), n1 in 1usize..15, n2 in 1usize..15) {
        let (a, b) = tree_pair(seed, n1, n2, AtomicKind::Delta);
        let cfg = KernelConfig::new(AtomicKind::Delta, 1.0, 0.0);
        let k = subpath_kernel(&a, &b, &cfg).unwrap();
        let ca = subpath_census(&a, true).unwrap();
        let cb = subpath_census(&b, true).unwrap();
        prop_assert_eq!(Some(k as u64), symbolic_kernel(&ca, &cb));
    }

    #[test]
    fn normalized_gram_is_psd(seed in any::<u64>(), n in 2usize..14, gamma in 0.0f64..4.0, beta in 0.0f64..1.0) {
        let mut rng = rng_from(seed);
        let items: Vec<Item> = (0..n)
            .map(|i| Item {
                id: format!("t{i}"),
                label: format!("c{}", i % 2),
                tree: featured_tree(1 + i * 3 % 11, 2, &mut rng),
            })
            .collect();
        let ds = Dataset::new(items).unwrap();
        let g = gram_matrix(&ds, &KernelConfig::new(AtomicKind::Gaussian, gamma, beta).normalized(true), KernelKind::Subpath).unwrap();
        prop_assert!(g.is_symmetric());
        prop_assert!(g.min_eigenvalue() >= -1e-8);
        for i in 0..n {
            prop_assert!((g.values[(i, i)] - 1.0).abs() <= 1e-12);
            for j in 0..n {
                let direct = subpath_kernel(&ds.items[i].tree, &ds.items[j].tree,
                    &KernelConfig::new(AtomicKind::Gaussian, gamma, beta).normalized(true)).unwrap();
                prop_assert!(rel_gap(g.values[(i, j)], direct) <= 1e-12);
            }
        }
    }
}
