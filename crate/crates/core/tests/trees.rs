mod common;

use common::{assignments, random_dist, random_tree, rng};
use proptest::prelude::*;
use rand::Rng;
use tsar::trees::distinct_entries;
use tsar::{Context, CptTree, TabularCpt, Variable};

fn vars(cards: &[usize]) -> Vec<Variable> {
    cards
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            Variable::new(format!("X{i}"), (0..c).map(|k| format!("v{k}")).collect()).unwrap()
        })
        .collect()
}

fn setup(seed: u64) -> (Vec<Variable>, CptTree) {
    let mut r = rng(seed);
    let n = r.gen_range(1..=4);
    let cards: Vec<usize> = (0..n)
        .map(|_| if r.gen_bool(0.2) { 3 } else { 2 })
        .collect();
    let vs = vars(&cards);
    let tree = random_tree(&mut r, &vs, 2, 4, 0.3);
    (vs, tree)
}

fn no_identical_children(t: &CptTree) -> bool {
    match t {
        CptTree::Leaf(_) => true,
        CptTree::Node(n) => {
            let same = n.children.windows(2).all(|w| w[0].approx_eq(&w[1], 1e-9));
            !same && n.children.iter().all(no_identical_children)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn every_full_context_reaches_one_leaf(seed in any::<u64>()) {
        let (vs, tree) = setup(seed);
        for ctx in assignments(&vs) {
            let path = tree.reads(&ctx).unwrap();
            let mut sorted = path.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), path.len());
            prop_assert!(tree.eval_leaf(&ctx).is_ok());
        }
    }

    #[test]
    fn reduce_agrees_on_consistent_contexts(seed in any::<u64>()) {
        let (vs, tree) = setup(seed);
        let mut r = rng(seed ^ 0x5eed);
        let mut fixed = Context::new();
        for v in &vs {
            if r.gen_bool(0.4) {
                fixed.assign(v.name(), r.gen_range(0..v.card()));
            }
        }
        let reduced = tree.reduce(&fixed);
        for ctx in assignments(&vs).into_iter().filter(|c| fixed.is_subset_of(c)) {
            prop_assert!(reduced.eval(&ctx).unwrap().approx_eq(tree.eval(&ctx).unwrap(), 1e-12));
        }
        for v in fixed.vars() {
            prop_assert!(!reduced.tested_vars().contains(v));
        }
    }

    #[test]
    fn merge_annotations_match_inputs(seed in any::<u64>()) {
        let (vs, first) = setup(seed);
        let mut r = rng(seed.wrapping_add(1));
        let second = random_tree(&mut r, &vs, 2, 3, 0.3);
        let third = random_tree(&mut r, &vs, 2, 2, 0.5);
        let inputs = [first, second, third];
        let merged = CptTree::merge(&inputs).unwrap();
        for ctx in merged.leaf_contexts() {
            let leaf = merged.eval_leaf(&ctx).unwrap();
            prop_assert_eq!(leaf.annotations.len(), inputs.len());
            for (t, a) in inputs.iter().zip(&leaf.annotations) {
                // The branch must select a leaf of every input.
                let d = t.eval(&ctx).unwrap();
                prop_assert!(d.approx_eq(a, 1e-12));
            }
        }
        prop_assert!(merged.repeated_test().is_none());
    }

    #[test]
    fn table_round_trip_preserves_the_function(seed in any::<u64>()) {
        let (vs, tree) = setup(seed);
        let table = tree.to_table(&vs).unwrap();
        let order: Vec<String> = vs.iter().rev().map(|v| v.name().to_string()).collect();
        let back = table.to_tree(&order).unwrap();
        for ctx in assignments(&vs) {
            prop_assert!(back.eval(&ctx).unwrap().approx_eq(tree.eval(&ctx).unwrap(), 1e-12));
        }
        prop_assert!(back.leaf_count() <= table.num_rows());
        prop_assert!(no_identical_children(&back));
    }

    #[test]
    fn collapse_leaves_no_redundant_node(seed in any::<u64>()) {
        let (vs, tree) = setup(seed);
        let c = tree.collapse_identical();
        prop_assert!(no_identical_children(&c));
        prop_assert!(c.leaf_count() <= tree.leaf_count());
        for ctx in assignments(&vs) {
            prop_assert!(c.eval(&ctx).unwrap().approx_eq(tree.eval(&ctx).unwrap(), 1e-12));
        }
    }

    #[test]
    fn graft_replaces_one_region(seed in any::<u64>()) {
        let (vs, tree) = setup(seed);
        let mut r = rng(seed.wrapping_mul(3));
        let sub = random_tree(&mut r, &vs, 2, 3, 0.3);
        let sites = tree.leaf_contexts();
        let k = r.gen_range(0..sites.len());
        let site = &sites[k];
        // Locator: child indices along the branch to the chosen leaf.
        let mut at = Vec::new();
        let mut cur = &tree;
        while let CptTree::Node(n) = cur {
            let v = site.get(&n.var).unwrap();
            at.push(v);
            cur = &n.children[v];
        }
        let grafted = tree.graft(&at, &sub, true).unwrap();
        for ctx in assignments(&vs) {
            let expect = if site.is_subset_of(&ctx) { sub.eval(&ctx) } else { tree.eval(&ctx) };
            prop_assert!(grafted.eval(&ctx).unwrap().approx_eq(expect.unwrap(), 1e-12));
        }
        prop_assert!(grafted.repeated_test().is_none());
    }
}

#[test]
fn constant_table_becomes_a_leaf() {
    let vs = vars(&[2, 2]);
    let mut r = rng(1);
    let d = random_dist(&mut r, 2);
    let tree = CptTree::leaf(d.clone());
    let table = tree.to_table(&vs).unwrap();
    assert_eq!(table.num_rows(), 4);
    assert!(table.rows().iter().all(|row| row.approx_eq(&d, 0.0)));
    let back = table.to_tree(&["X0".into(), "X1".into()]).unwrap();
    assert_eq!(distinct_entries(&back), 1);
}

#[test]
fn tables_convert_in_any_order() {
    let vs = vars(&[2, 3]);
    let mut r = rng(9);
    let rows = (0..6).map(|_| random_dist(&mut r, 2)).collect();
    let table = TabularCpt::new(vec!["X0".into(), "X1".into()], vec![2, 3], rows).unwrap();
    for order in [["X0", "X1"], ["X1", "X0"]] {
        let order: Vec<String> = order.iter().map(|s| s.to_string()).collect();
        let tree = table.to_tree(&order).unwrap();
        for ctx in assignments(&vs) {
            assert!(tree
                .eval(&ctx)
                .unwrap()
                .approx_eq(table.row(&ctx).unwrap(), 0.0));
        }
    }
}
