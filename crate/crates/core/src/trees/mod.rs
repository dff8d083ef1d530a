//! Decision-tree CPTs.
//!
//! A [`CptTree`] maps contexts over a child's parents to distributions over
//! the child. Children of a test node are indexed by the tested variable's
//! canonical domain order. Leaves may carry annotations (one distribution per
//! input of a [`CptTree::merge`]) and both leaves and nodes carry a transient
//! `marked` flag used while reversing an arc.

mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::TOLERANCE;

pub use table::TabularCpt;

/// A discrete random variable with an ordered domain of value labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Variable {
    name: String,
    values: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Result<Self> {
        let name = name.into();
        if values.len() < 2 {
            return Err(Error::Invalid(format!(
                "variable `{name}` needs at least two values"
            )));
        }
        let unique: BTreeSet<&String> = values.iter().collect();
        if unique.len() != values.len() {
            return Err(Error::Invalid(format!(
                "variable `{name}` has duplicate value labels"
            )));
        }
        Ok(Variable { name, values })
    }

    /// Binary variable with domain `["true", "false"]`.
    pub fn binary(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            values: vec!["true".to_string(), "false".to_string()],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn card(&self) -> usize {
        self.values.len()
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.values.iter().position(|v| v == label)
    }

    pub fn renamed(&self, name: impl Into<String>) -> Variable {
        Variable {
            name: name.into(),
            values: self.values.clone(),
        }
    }
}

/// A probability vector over the domain of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        for &p in &probs {
            if !p.is_finite() || !(-TOLERANCE..=1.0 + TOLERANCE).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "entry {p} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Distribution(probs))
    }

    /// Wraps a vector produced by exact arithmetic on valid distributions.
    pub(crate) fn computed(probs: Vec<f64>) -> Self {
        debug_assert!(
            (probs.iter().sum::<f64>() - 1.0).abs() < 1e-6,
            "computed distribution does not normalize: {probs:?}"
        );
        Distribution(probs)
    }

    pub fn uniform(n: usize) -> Self {
        Distribution(vec![1.0 / n as f64; n])
    }

    pub fn point(n: usize, index: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Distribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Distribution, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }
}

/// A partial assignment of value indices to variable names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context(BTreeMap<String, usize>);

impl Context {
    pub fn new() -> Self {
        Context(BTreeMap::new())
    }

    pub fn get(&self, var: &str) -> Option<usize> {
        self.0.get(var).copied()
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    /// Assigns `var`, returning the previous value if there was one.
    pub fn assign(&mut self, var: impl Into<String>, value: usize) -> Option<usize> {
        self.0.insert(var.into(), value)
    }

    pub fn remove(&mut self, var: &str) -> Option<usize> {
        self.0.remove(var)
    }

    pub fn with(&self, var: impl Into<String>, value: usize) -> Context {
        let mut ctx = self.clone();
        ctx.assign(var, value);
        ctx
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// True when no variable is assigned different values by the two contexts.
    pub fn consistent_with(&self, other: &Context) -> bool {
        self.iter()
            .all(|(k, v)| other.get(k).is_none_or(|w| w == v))
    }

    /// True when every assignment of `self` also appears in `other`.
    pub fn is_subset_of(&self, other: &Context) -> bool {
        self.iter().all(|(k, v)| other.get(k) == Some(v))
    }

    /// Union of two consistent contexts; `None` on conflict.
    pub fn union(&self, other: &Context) -> Option<Context> {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            match out.get(k) {
                Some(w) if w != v => return None,
                _ => {
                    out.assign(k, v);
                }
            }
        }
        Some(out)
    }

    pub fn restrict<'a>(&self, vars: impl IntoIterator<Item = &'a str>) -> Context {
        vars.into_iter()
            .filter_map(|v| self.get(v).map(|x| (v.to_string(), x)))
            .collect()
    }
}

impl FromIterator<(String, usize)> for Context {
    fn from_iter<I: IntoIterator<Item = (String, usize)>>(iter: I) -> Self {
        Context(iter.into_iter().collect())
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub dist: Distribution,
    pub annotations: Vec<Distribution>,
    pub marked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub var: String,
    pub children: Vec<CptTree>,
    pub marked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CptTree {
    Leaf(Leaf),
    Node(Node),
}

impl CptTree {
    pub fn leaf(dist: Distribution) -> Self {
        CptTree::Leaf(Leaf {
            dist,
            annotations: Vec::new(),
            marked: false,
        })
    }

    pub fn node(var: impl Into<String>, children: Vec<CptTree>) -> Self {
        CptTree::Node(Node {
            var: var.into(),
            children,
            marked: false,
        })
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, CptTree::Leaf(_))
    }

    pub fn is_marked(&self) -> bool {
        match self {
            CptTree::Leaf(l) => l.marked,
            CptTree::Node(n) => n.marked,
        }
    }

    pub fn set_marked(&mut self, marked: bool) {
        match self {
            CptTree::Leaf(l) => l.marked = marked,
            CptTree::Node(n) => n.marked = marked,
        }
    }

    /// True if this node or any descendant is marked.
    pub fn contains_mark(&self) -> bool {
        match self {
            CptTree::Leaf(l) => l.marked,
            CptTree::Node(n) => n.marked || n.children.iter().any(CptTree::contains_mark),
        }
    }

    /// Follows `ctx` from the root to a leaf.
    pub fn eval_leaf(&self, ctx: &Context) -> Result<&Leaf> {
        let mut cur = self;
        loop {
            match cur {
                CptTree::Leaf(l) => return Ok(l),
                CptTree::Node(n) => {
                    let v = ctx
                        .get(&n.var)
                        .ok_or_else(|| Error::MissingAssignment(n.var.clone()))?;
                    cur = n.children.get(v).ok_or_else(|| Error::ValueOutOfRange {
                        variable: n.var.clone(),
                        value: v,
                    })?;
                }
            }
        }
    }

    pub fn eval(&self, ctx: &Context) -> Result<&Distribution> {
        self.eval_leaf(ctx).map(|l| &l.dist)
    }

    /// Variables tested along the path `ctx` selects, in path order.
    pub fn reads(&self, ctx: &Context) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let mut cur = self;
        while let CptTree::Node(n) = cur {
            out.push(n.var.clone());
            let v = ctx
                .get(&n.var)
                .ok_or_else(|| Error::MissingAssignment(n.var.clone()))?;
            cur = n.children.get(v).ok_or_else(|| Error::ValueOutOfRange {
                variable: n.var.clone(),
                value: v,
            })?;
        }
        Ok(out)
    }

    /// Removes tests fixed by `fixed` and collapses nodes whose children are
    /// identical leaves. Marks on removed nodes move to their replacement.
    pub fn reduce(&self, fixed: &Context) -> CptTree {
        match self {
            CptTree::Leaf(l) => CptTree::Leaf(l.clone()),
            CptTree::Node(n) => {
                if let Some(child) = fixed.get(&n.var).and_then(|v| n.children.get(v)) {
                    let mut out = child.reduce(fixed);
                    if n.marked {
                        out.set_marked(true);
                    }
                    return out;
                }
                let children: Vec<CptTree> = n.children.iter().map(|c| c.reduce(fixed)).collect();
                let all_same_leaf = children.iter().all(CptTree::is_leaf)
                    && children[1..]
                        .iter()
                        .all(|c| c.approx_eq(&children[0], TOLERANCE));
                if all_same_leaf {
                    let mut out = children.into_iter().next().expect("node without children");
                    if n.marked {
                        out.set_marked(true);
                    }
                    out
                } else {
                    CptTree::Node(Node {
                        var: n.var.clone(),
                        children,
                        marked: n.marked,
                    })
                }
            }
        }
    }

    /// Replaces every leaf by `f(branch context, leaf)`. A marked leaf passes
    /// its mark to the root of its replacement.
    pub fn map_leaves<F>(&self, base: &Context, f: &mut F) -> CptTree
    where
        F: FnMut(&Context, &Leaf) -> CptTree,
    {
        let mut ctx = base.clone();
        self.map_leaves_rec(&mut ctx, f)
    }

    fn map_leaves_rec<F>(&self, ctx: &mut Context, f: &mut F) -> CptTree
    where
        F: FnMut(&Context, &Leaf) -> CptTree,
    {
        match self {
            CptTree::Leaf(l) => {
                let mut out = f(ctx, l);
                if l.marked {
                    out.set_marked(true);
                }
                out
            }
            CptTree::Node(n) => {
                let prev = ctx.get(&n.var);
                let children = n
                    .children
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        ctx.assign(n.var.clone(), i);
                        c.map_leaves_rec(ctx, f)
                    })
                    .collect();
                match prev {
                    Some(p) => {
                        ctx.assign(n.var.clone(), p);
                    }
                    None => {
                        ctx.remove(&n.var);
                    }
                }
                CptTree::Node(Node {
                    var: n.var.clone(),
                    children,
                    marked: n.marked,
                })
            }
        }
    }

    /// Calls `f(path, branch context, leaf)` for each leaf in depth-first,
    /// domain order.
    pub fn for_each_leaf<F>(&self, mut f: F)
    where
        F: FnMut(&[usize], &Context, &Leaf),
    {
        fn rec<F: FnMut(&[usize], &Context, &Leaf)>(
            t: &CptTree,
            path: &mut Vec<usize>,
            ctx: &mut Context,
            f: &mut F,
        ) {
            match t {
                CptTree::Leaf(l) => f(path, ctx, l),
                CptTree::Node(n) => {
                    for (i, c) in n.children.iter().enumerate() {
                        path.push(i);
                        ctx.assign(n.var.clone(), i);
                        rec(c, path, ctx, f);
                        ctx.remove(&n.var);
                        path.pop();
                    }
                }
            }
        }
        rec(self, &mut Vec::new(), &mut Context::new(), &mut f);
    }

    /// Branch contexts of all leaves, in depth-first order.
    pub fn leaf_contexts(&self) -> Vec<Context> {
        let mut out = Vec::new();
        self.for_each_leaf(|_, ctx, _| out.push(ctx.clone()));
        out
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            CptTree::Leaf(_) => 1,
            CptTree::Node(n) => n.children.iter().map(CptTree::leaf_count).sum(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            CptTree::Leaf(_) => 0,
            CptTree::Node(n) => 1 + n.children.iter().map(CptTree::node_count).sum::<usize>(),
        }
    }

    pub fn tested_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_tested(&mut out);
        out
    }

    fn collect_tested(&self, out: &mut BTreeSet<String>) {
        if let CptTree::Node(n) = self {
            out.insert(n.var.clone());
            for c in &n.children {
                c.collect_tested(out);
            }
        }
    }

    /// Returns a variable tested twice on some root-to-leaf path, if any.
    pub fn repeated_test(&self) -> Option<String> {
        fn rec<'a>(t: &'a CptTree, seen: &mut Vec<&'a str>) -> Option<String> {
            match t {
                CptTree::Leaf(_) => None,
                CptTree::Node(n) => {
                    if seen.contains(&n.var.as_str()) {
                        return Some(n.var.clone());
                    }
                    seen.push(&n.var);
                    let r = n.children.iter().find_map(|c| rec(c, seen));
                    seen.pop();
                    r
                }
            }
        }
        rec(self, &mut Vec::new())
    }

    /// Structural equality: same tests, same children, leaf distributions and
    /// annotations equal within `tol`, same marks.
    pub fn approx_eq(&self, other: &CptTree, tol: f64) -> bool {
        match (self, other) {
            (CptTree::Leaf(a), CptTree::Leaf(b)) => {
                a.marked == b.marked
                    && a.dist.approx_eq(&b.dist, tol)
                    && a.annotations.len() == b.annotations.len()
                    && a.annotations
                        .iter()
                        .zip(&b.annotations)
                        .all(|(x, y)| x.approx_eq(y, tol))
            }
            (CptTree::Node(a), CptTree::Node(b)) => {
                a.var == b.var
                    && a.marked == b.marked
                    && a.children.len() == b.children.len()
                    && a.children
                        .iter()
                        .zip(&b.children)
                        .all(|(x, y)| x.approx_eq(y, tol))
            }
            _ => false,
        }
    }

    /// Bottom-up collapse of every node whose children are identical subtrees.
    pub fn collapse_identical(&self) -> CptTree {
        match self {
            CptTree::Leaf(_) => self.clone(),
            CptTree::Node(n) => {
                let children: Vec<CptTree> =
                    n.children.iter().map(CptTree::collapse_identical).collect();
                if children[1..]
                    .iter()
                    .all(|c| c.approx_eq(&children[0], TOLERANCE))
                {
                    let mut out = children.into_iter().next().expect("node without children");
                    if n.marked {
                        out.set_marked(true);
                    }
                    out
                } else {
                    CptTree::Node(Node {
                        var: n.var.clone(),
                        children,
                        marked: n.marked,
                    })
                }
            }
        }
    }

    /// Copy with all marks and annotations removed.
    pub fn cleaned(&self) -> CptTree {
        match self {
            CptTree::Leaf(l) => CptTree::leaf(l.dist.clone()),
            CptTree::Node(n) => CptTree::node(
                n.var.clone(),
                n.children.iter().map(CptTree::cleaned).collect(),
            ),
        }
    }

    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> CptTree {
        match self {
            CptTree::Leaf(_) => self.clone(),
            CptTree::Node(n) => CptTree::Node(Node {
                var: f(&n.var),
                children: n.children.iter().map(|c| c.rename(f)).collect(),
                marked: n.marked,
            }),
        }
    }

    /// Replaces the position `at` (a leaf, or a node as a replacement site) by
    /// a copy of `subtree` reduced under the branch context leading to `at`.
    pub fn graft(&self, at: &[usize], subtree: &CptTree, mark: bool) -> Result<CptTree> {
        fn rec(
            t: &CptTree,
            at: &[usize],
            depth: usize,
            ctx: &mut Context,
            subtree: &CptTree,
            mark: bool,
        ) -> Result<CptTree> {
            if depth == at.len() {
                let mut out = subtree.reduce(ctx);
                if mark || t.is_marked() {
                    out.set_marked(true);
                }
                return Ok(out);
            }
            match t {
                CptTree::Leaf(_) => Err(Error::InvalidLocator(at.to_vec())),
                CptTree::Node(n) => {
                    let i = at[depth];
                    if i >= n.children.len() {
                        return Err(Error::InvalidLocator(at.to_vec()));
                    }
                    ctx.assign(n.var.clone(), i);
                    let replaced = rec(&n.children[i], at, depth + 1, ctx, subtree, mark)?;
                    let mut children = n.children.clone();
                    children[i] = replaced;
                    Ok(CptTree::Node(Node {
                        var: n.var.clone(),
                        children,
                        marked: n.marked,
                    }))
                }
            }
        }
        rec(self, at, 0, &mut Context::new(), subtree, mark)
    }

    /// Tree refining every input's branches. Inputs are grafted in order onto
    /// the leaves of the running merge; each leaf records, per input, the
    /// input's leaf distribution in that leaf's context. The leaf distribution
    /// itself is the last input's.
    pub fn merge(trees: &[CptTree]) -> Result<CptTree> {
        let (first, rest) = trees
            .split_first()
            .ok_or_else(|| Error::Invalid("merge of an empty list of trees".into()))?;
        let root = Context::new();
        let mut running = first.map_leaves(&root, &mut |_, l| {
            CptTree::Leaf(Leaf {
                dist: l.dist.clone(),
                annotations: vec![l.dist.clone()],
                marked: false,
            })
        });
        for t in rest {
            running = running.map_leaves(&root, &mut |ctx, l| {
                t.reduce(ctx).map_leaves(ctx, &mut |_, tl| {
                    let mut annotations = l.annotations.clone();
                    annotations.push(tl.dist.clone());
                    CptTree::Leaf(Leaf {
                        dist: tl.dist.clone(),
                        annotations,
                        marked: false,
                    })
                })
            });
        }
        Ok(running.reduce(&root))
    }

    pub fn to_table(&self, parents: &[Variable]) -> Result<TabularCpt> {
        TabularCpt::from_tree(self, parents)
    }
}

/// Number of leaves; equal leaf values are not deduplicated.
pub fn distinct_entries(tree: &CptTree) -> usize {
    tree.leaf_count()
}
