//! The two reference networks used throughout the tests and shipped as files
//! under `fixtures/`.
//!
//! `f1` is the single-arc reversal example: A depends on A', B', C', D'
//! through a five-leaf tree and the observation O depends on D, B, C and A,
//! with A tested at one place only. `f2` is a seven-variable two-slice
//! network (states A..F, sensor O) built so that F is needed only in some
//! contexts of E, D and C.

use crate::dpn::DpnSchema;
use crate::network::{BayesNet, Conditional};
use crate::trees::{CptTree, Distribution, Variable};

fn leaf(p: f64) -> CptTree {
    // rounded so the complement prints as written
    let q = ((1.0 - p) * 1e9).round() / 1e9;
    CptTree::leaf(Distribution::new(vec![p, q]).expect("valid probability"))
}

fn test(var: &str, on_true: CptTree, on_false: CptTree) -> CptTree {
    CptTree::node(var, vec![on_true, on_false])
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

pub fn f1_tree_a() -> CptTree {
    test(
        "A'",
        leaf(0.9),
        test(
            "B'",
            test("C'", leaf(0.7), leaf(0.4)),
            test("D'", leaf(0.2), leaf(0.05)),
        ),
    )
}

pub fn f1_tree_o() -> CptTree {
    test(
        "D",
        leaf(0.6),
        test(
            "B",
            test("C", leaf(0.3), leaf(0.85)),
            test("A", leaf(0.95), test("C", leaf(0.1), leaf(0.5))),
        ),
    )
}

pub fn f1() -> BayesNet {
    let roots = [
        ("A'", 0.35),
        ("B'", 0.6),
        ("C'", 0.45),
        ("D'", 0.25),
        ("D", 0.4),
        ("B", 0.55),
        ("C", 0.3),
    ];
    let mut variables: Vec<Variable> = roots.iter().map(|(n, _)| Variable::binary(*n)).collect();
    variables.push(Variable::binary("A"));
    variables.push(Variable::binary("O"));
    let mut cpts: Vec<Conditional> = roots
        .iter()
        .map(|(n, p)| Conditional::tree(*n, vec![], leaf(*p)))
        .collect();
    cpts.push(Conditional::tree(
        "A",
        names(&["A'", "B'", "C'", "D'"]),
        f1_tree_a(),
    ));
    cpts.push(Conditional::tree(
        "O",
        names(&["D", "B", "C", "A"]),
        f1_tree_o(),
    ));
    BayesNet::checked(variables, cpts).expect("f1 is valid")
}

fn prev(name: &str) -> String {
    format!("{name}{}", crate::dpn::PREV_SUFFIX)
}

fn ptest(var: &str, on_true: CptTree, on_false: CptTree) -> CptTree {
    test(&prev(var), on_true, on_false)
}

pub fn f2() -> DpnSchema {
    let vars = ["O", "A", "B", "C", "D", "E", "F"];
    let variables: Vec<Variable> = vars.iter().map(|n| Variable::binary(*n)).collect();

    let a = {
        let t = f1_tree_a().rename(&|v: &str| prev(v.trim_end_matches('\'')));
        Conditional::tree("A", vec![prev("A"), prev("B"), prev("C"), prev("D")], t)
    };
    let o = Conditional::tree("O", names(&["D", "B", "C", "A"]), f1_tree_o());
    let d = Conditional::tree(
        "D",
        vec![prev("E"), prev("F"), prev("D")],
        ptest(
            "E",
            ptest("D", leaf(0.8), leaf(0.3)),
            ptest("F", leaf(0.65), leaf(0.15)),
        ),
    );
    let b = Conditional::tree(
        "B",
        vec!["D".to_string(), prev("B")],
        test("D", ptest("B", leaf(0.75), leaf(0.35)), leaf(0.2)),
    );
    let c = Conditional::tree(
        "C",
        vec![prev("C"), prev("E")],
        ptest("C", leaf(0.7), ptest("E", leaf(0.45), leaf(0.1))),
    );
    let e = Conditional::tree(
        "E",
        vec![prev("E"), prev("D"), prev("C"), prev("F")],
        ptest(
            "E",
            ptest(
                "D",
                leaf(0.85),
                ptest("C", leaf(0.6), ptest("F", leaf(0.4), leaf(0.1))),
            ),
            leaf(0.25),
        ),
    );
    let f = Conditional::tree(
        "F",
        vec![prev("E"), prev("F")],
        ptest("E", leaf(0.5), ptest("F", leaf(0.9), leaf(0.2))),
    );
    let transition = vec![o, a, b, c, d, e, f];

    let prior = vec![
        Conditional::tree("O", names(&["D", "B", "C", "A"]), f1_tree_o()),
        Conditional::tree("A", vec![], leaf(0.5)),
        Conditional::tree("B", names(&["D"]), test("D", leaf(0.6), leaf(0.3))),
        Conditional::tree("C", vec![], leaf(0.4)),
        Conditional::tree("D", vec![], leaf(0.5)),
        Conditional::tree("E", vec![], leaf(0.7)),
        Conditional::tree("F", vec![], leaf(0.5)),
    ];
    DpnSchema::new(
        variables,
        names(&["A", "B", "C", "D", "E", "F"]),
        names(&["O"]),
        prior,
        transition,
    )
    .expect("f2 is valid")
}
