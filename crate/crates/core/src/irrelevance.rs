//! Context-dependent irrelevance of slice variables and the guarded sample
//! schedules built from it.
//!
//! The analysis runs in four phases: unconditional relevance, sample graphs,
//! per-variable irrelevance conditions, and schedule construction. A guard
//! is an irrelevance condition over variables of the same slice: a trial
//! skips the variable whenever its guard holds for the values already drawn.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::dpn::{prev_name, strip_prev, DpnSchema};
use crate::error::{Error, Result};
use crate::network::{BayesNet, Conditional, Cpt};
use crate::trees::{Context, CptTree};

/// The tree a CPT is read through during sampling: tables are expanded in
/// declared parent order and identical subtrees are collapsed, so no test
/// is left whose outcome cannot matter.
pub fn canonical_tree(c: &Conditional) -> Result<CptTree> {
    Ok(match &c.cpt {
        Cpt::Tree(t) => t.collapse_identical(),
        Cpt::Table(t) => t.to_tree(&c.parents)?,
    })
}

/// Least set containing `interest` and closed under taking parents, both
/// in-slice and previous-slice, in prior and transition networks. Returned
/// in declaration order.
pub fn relevant_variables(schema: &DpnSchema, interest: &[String]) -> Result<Vec<String>> {
    let mut relevant = BTreeSet::new();
    let mut stack = Vec::new();
    for v in interest {
        schema
            .variable(v)
            .ok_or_else(|| Error::UnknownVariable(v.clone()))?;
        stack.push(v.clone());
    }
    while let Some(v) = stack.pop() {
        if !relevant.insert(v.clone()) {
            continue;
        }
        let parents = schema
            .transition()
            .parents(&v)
            .iter()
            .chain(schema.prior().parents(&v));
        for p in parents {
            let base = strip_prev(p).unwrap_or(p);
            if !relevant.contains(base) {
                stack.push(base.to_string());
            }
        }
    }
    Ok(schema
        .variables()
        .iter()
        .map(|v| v.name().to_string())
        .filter(|n| relevant.contains(n))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GraphNode {
    Sink,
    Test { var: String, children: Vec<usize> },
}

/// Which variables a tree reads, and in what conditional order, with leaf
/// values forgotten: subtrees equal up to leaf values are shared and all
/// leaves lead to one sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleGraph {
    nodes: Vec<GraphNode>,
    root: usize,
}

pub const SINK: usize = 0;

impl SampleGraph {
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &GraphNode {
        &self.nodes[id]
    }

    /// Number of test nodes.
    pub fn test_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Variables read, in order, when the graph is walked under `ctx`.
    pub fn reads(&self, ctx: &Context) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let mut i = self.root;
        while let GraphNode::Test { var, children } = &self.nodes[i] {
            out.push(var.clone());
            let v = ctx
                .get(var)
                .ok_or_else(|| Error::MissingAssignment(var.clone()))?;
            i = *children.get(v).ok_or_else(|| Error::ValueOutOfRange {
                variable: var.clone(),
                value: v,
            })?;
        }
        Ok(out)
    }

    pub fn tested_vars(&self) -> BTreeSet<String> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                GraphNode::Test { var, .. } => Some(var.clone()),
                GraphNode::Sink => None,
            })
            .collect()
    }

    /// For every node, whether some node reachable from it satisfies `pred`.
    fn reaches(&self, pred: &dyn Fn(&str) -> bool) -> Vec<bool> {
        // children always have smaller ids than their parents
        let mut out = vec![false; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let GraphNode::Test { var, children } = n {
                out[i] = pred(var) || children.iter().any(|&c| out[c]);
            }
        }
        out
    }
}

pub fn build_sample_graph(tree: &CptTree) -> SampleGraph {
    fn rec(t: &CptTree, nodes: &mut Vec<GraphNode>, ids: &mut HashMap<GraphNode, usize>) -> usize {
        match t {
            CptTree::Leaf(_) => SINK,
            CptTree::Node(n) => {
                let children = n.children.iter().map(|c| rec(c, nodes, ids)).collect();
                let key = GraphNode::Test {
                    var: n.var.clone(),
                    children,
                };
                *ids.entry(key.clone()).or_insert_with(|| {
                    nodes.push(key);
                    nodes.len() - 1
                })
            }
        }
    }
    let mut nodes = vec![GraphNode::Sink];
    let mut ids = HashMap::new();
    let root = rec(&tree.collapse_identical(), &mut nodes, &mut ids);
    SampleGraph { nodes, root }
}

/// A disjunction of conjunctions of `variable = value` literals. No
/// disjuncts is FALSE; an empty disjunct is TRUE.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DnfCondition {
    disjuncts: Vec<Context>,
}

impl DnfCondition {
    pub fn never() -> Self {
        DnfCondition {
            disjuncts: Vec::new(),
        }
    }

    pub fn always() -> Self {
        DnfCondition {
            disjuncts: vec![Context::new()],
        }
    }

    pub fn literal(var: impl Into<String>, value: usize) -> Self {
        DnfCondition {
            disjuncts: vec![Context::new().with(var, value)],
        }
    }

    /// Builds a condition, dropping subsumed disjuncts.
    pub fn from_disjuncts(disjuncts: Vec<Context>) -> Self {
        let mut c = DnfCondition { disjuncts };
        c.simplify();
        c
    }

    pub fn disjuncts(&self) -> &[Context] {
        &self.disjuncts
    }

    pub fn is_false(&self) -> bool {
        self.disjuncts.is_empty()
    }

    pub fn is_true(&self) -> bool {
        self.disjuncts.iter().any(Context::is_empty)
    }

    pub fn or(&self, other: &DnfCondition) -> DnfCondition {
        let mut d = self.disjuncts.clone();
        d.extend(other.disjuncts.iter().cloned());
        DnfCondition::from_disjuncts(d)
    }

    pub fn and(&self, other: &DnfCondition) -> DnfCondition {
        let mut d = Vec::new();
        for a in &self.disjuncts {
            for b in &other.disjuncts {
                if let Some(u) = a.union(b) {
                    d.push(u);
                }
            }
        }
        DnfCondition::from_disjuncts(d)
    }

    /// Keeps minimal disjuncts only, in a canonical order.
    fn simplify(&mut self) {
        let mut d = std::mem::take(&mut self.disjuncts);
        d.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        d.dedup();
        let mut kept: Vec<Context> = Vec::new();
        for c in d {
            if !kept.iter().any(|k| k.is_subset_of(&c)) {
                kept.push(c);
            }
        }
        self.disjuncts = kept;
    }

    /// True when some disjunct is satisfied by `ctx`.
    pub fn holds(&self, ctx: &Context) -> bool {
        self.disjuncts.iter().any(|d| d.is_subset_of(ctx))
    }

    /// As [`DnfCondition::holds`] with values looked up by name; a literal
    /// over an unknown value is false.
    pub fn holds_with(&self, value: impl Fn(&str) -> Option<usize>) -> bool {
        self.disjuncts
            .iter()
            .any(|d| d.iter().all(|(k, v)| value(k) == Some(v)))
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.disjuncts
            .iter()
            .flat_map(|d| d.vars().map(str::to_string))
            .collect()
    }

    /// Text form with value labels taken from `schema`, such as
    /// `E=true & D=false | C=true`.
    pub fn render(&self, schema: &DpnSchema) -> String {
        self.render_with(&|var, v| {
            schema
                .variable(var)
                .and_then(|x| x.values().get(v).cloned())
                .unwrap_or_else(|| v.to_string())
        })
    }

    fn render_with(&self, label: &dyn Fn(&str, usize) -> String) -> String {
        if self.is_false() {
            return "FALSE".into();
        }
        if self.is_true() {
            return "TRUE".into();
        }
        self.disjuncts
            .iter()
            .map(|d| {
                d.iter()
                    .map(|(k, v)| format!("{k}={}", label(k, v)))
                    .collect::<Vec<_>>()
                    .join(" & ")
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

impl fmt::Display for DnfCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_with(&|_, v| v.to_string()))
    }
}

/// Topological order over `vars` with arcs `edges[v]` (parents of v) and
/// ties broken by position in `vars`.
fn ordered(vars: &[String], edges: &BTreeMap<String, BTreeSet<String>>) -> Option<Vec<String>> {
    let mut placed = BTreeSet::new();
    let mut out = Vec::with_capacity(vars.len());
    while out.len() < vars.len() {
        let next = vars.iter().find(|v| {
            !placed.contains(*v)
                && edges
                    .get(*v)
                    .is_none_or(|ps| ps.iter().all(|p| placed.contains(p)))
        })?;
        placed.insert(next.clone());
        out.push(next.clone());
    }
    Some(out)
}

fn in_slice_arcs(net: &BayesNet, vars: &[String]) -> BTreeMap<String, BTreeSet<String>> {
    vars.iter()
        .map(|v| {
            let ps = net
                .parents(v)
                .iter()
                .filter(|p| strip_prev(p).is_none())
                .cloned()
                .collect();
            (v.clone(), ps)
        })
        .collect()
}

fn slice_vars(schema: &DpnSchema) -> Vec<String> {
    schema
        .variables()
        .iter()
        .map(|v| v.name().to_string())
        .collect()
}

/// Order of the slice variables in which every variable follows its
/// in-slice parents; ties go to declaration order.
pub fn slice_ordering(schema: &DpnSchema) -> Result<Vec<String>> {
    let vars = slice_vars(schema);
    ordered(&vars, &in_slice_arcs(schema.transition(), &vars)).ok_or(Error::CyclicSlice)
}

/// Irrelevance of one variable with respect to each consumer graph.
#[derive(Debug, Clone, PartialEq)]
pub struct IrrelevanceCondition {
    pub variable: String,
    /// (consumer, condition) in slice order.
    pub per_graph: Vec<(String, DnfCondition)>,
    pub condition: DnfCondition,
}

/// Conditions under which `v` in one slice is not read by any consumer in
/// the next. `consumers` are taken in `order`; `known` holds the
/// per-graph condition for `v` of every consumer already processed, and
/// is substituted where a graph reads that consumer in-slice.
pub fn irrelevance_condition(
    schema: &DpnSchema,
    v: &str,
    order: &[String],
    consumers: &BTreeSet<String>,
) -> Result<IrrelevanceCondition> {
    schema
        .variable(v)
        .ok_or_else(|| Error::UnknownVariable(v.to_string()))?;
    let v_prev = prev_name(v);
    let mut known: BTreeMap<String, DnfCondition> = BTreeMap::new();
    let mut per_graph = Vec::new();
    let mut condition = DnfCondition::always();
    for x in order.iter().filter(|x| consumers.contains(*x)) {
        let c = schema
            .transition_conditional(x)
            .ok_or_else(|| Error::UnknownVariable(x.clone()))?;
        let graph = build_sample_graph(&canonical_tree(c)?);
        let cond = free_of(&graph, v, &v_prev, &known);
        condition = condition.and(&cond);
        known.insert(x.clone(), cond.clone());
        per_graph.push((x.clone(), cond));
    }
    Ok(IrrelevanceCondition {
        variable: v.to_string(),
        per_graph,
        condition,
    })
}

/// DNF over previous-slice literals under which a walk of `graph` never
/// needs the previous value of `v`.
fn free_of(
    graph: &SampleGraph,
    v: &str,
    v_prev: &str,
    known: &BTreeMap<String, DnfCondition>,
) -> DnfCondition {
    let concern = |var: &str| {
        var == v_prev || (strip_prev(var).is_none() && known.get(var).is_none_or(|c| !c.is_true()))
    };
    let touches = graph.reaches(&concern);
    let mut memo: Vec<Option<DnfCondition>> = vec![None; graph.nodes.len()];
    for (i, node) in graph.nodes.iter().enumerate() {
        let cond = match node {
            GraphNode::Sink => DnfCondition::always(),
            _ if !touches[i] => DnfCondition::always(),
            GraphNode::Test { var, children } => {
                let child = |c: usize| memo[c].as_ref().expect("children come first");
                if var == v_prev || var == v {
                    DnfCondition::never()
                } else if let Some(u) = strip_prev(var) {
                    // whatever U is, the branch is free when every child is
                    let mut acc = DnfCondition::always();
                    for &c in children {
                        acc = acc.and(child(c));
                    }
                    for (value, &c) in children.iter().enumerate() {
                        acc = acc.or(&DnfCondition::literal(u, value).and(child(c)));
                    }
                    acc
                } else {
                    // an in-slice read: v must not matter to that variable
                    // and every branch below must be free of v as well
                    let mut acc = known.get(var).cloned().unwrap_or_default();
                    for &c in children {
                        acc = acc.and(child(c));
                    }
                    acc
                }
            }
        };
        memo[i] = Some(cond);
    }
    memo[graph.root].take().expect("computed")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub variable: String,
    /// Skip the variable when this holds.
    pub guard: DnfCondition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSchedule {
    /// Slice 1, ordered by the prior network.
    pub initial: Vec<ScheduleEntry>,
    /// Every later slice.
    pub transition: Vec<ScheduleEntry>,
    pub warnings: Vec<String>,
}

impl SampleSchedule {
    /// Every variable sampled in order, nothing ever skipped.
    pub fn unguarded(schema: &DpnSchema) -> Result<Self> {
        let entries = |order: Vec<String>| {
            order
                .into_iter()
                .map(|variable| ScheduleEntry {
                    variable,
                    guard: DnfCondition::never(),
                })
                .collect()
        };
        let initial = schema
            .prior()
            .topological_order()
            .ok_or(Error::CyclicSlice)?;
        Ok(SampleSchedule {
            initial: entries(initial),
            transition: entries(slice_ordering(schema)?),
            warnings: Vec::new(),
        })
    }

    pub fn for_slice(&self, t: usize) -> &[ScheduleEntry] {
        if t <= 1 {
            &self.initial
        } else {
            &self.transition
        }
    }
}

/// Orders one slice so that, where possible, guard variables come before
/// the variable they guard. Guards are claimed in reverse declaration
/// order; a disjunct whose variables cannot all be placed first is dropped.
fn schedule_slice(
    vars: &[String],
    tie_break: &[String],
    hard: &BTreeMap<String, BTreeSet<String>>,
    guards: &BTreeMap<String, DnfCondition>,
    warnings: &mut Vec<String>,
    label: &str,
) -> Result<Vec<ScheduleEntry>> {
    let mut edges = hard.clone();
    let mut kept: BTreeMap<String, DnfCondition> = BTreeMap::new();
    for v in vars.iter().rev() {
        let guard = guards.get(v).cloned().unwrap_or_default();
        let mut keep = Vec::new();
        for d in guard.disjuncts() {
            let mut trial = edges.clone();
            trial
                .entry(v.clone())
                .or_default()
                .extend(d.vars().map(str::to_string));
            if ordered(vars, &trial).is_some() {
                edges = trial;
                keep.push(d.clone());
            } else {
                warnings.push(format!(
                    "{label}: dropped guard disjunct {d} of {v}: its variables cannot precede {v}"
                ));
            }
        }
        kept.insert(v.clone(), DnfCondition::from_disjuncts(keep));
    }
    let order = ordered(tie_break, &edges).ok_or(Error::CyclicSlice)?;
    Ok(order
        .into_iter()
        .map(|variable| {
            let guard = kept.remove(&variable).unwrap_or_default();
            ScheduleEntry { variable, guard }
        })
        .collect())
}

/// Builds the guarded schedule. `conditions` are the guards for slices
/// after the first and `initial` the guards for slice 1.
pub fn build_schedule(
    schema: &DpnSchema,
    conditions: &BTreeMap<String, DnfCondition>,
    initial: &BTreeMap<String, DnfCondition>,
) -> Result<SampleSchedule> {
    let vars = slice_vars(schema);
    let mut warnings = Vec::new();
    let order = slice_ordering(schema)?;
    let transition = schedule_slice(
        &vars,
        &order,
        &in_slice_arcs(schema.transition(), &vars),
        conditions,
        &mut warnings,
        "transition",
    )?;
    let prior_order = schema
        .prior()
        .topological_order()
        .ok_or(Error::CyclicSlice)?;
    let initial = schedule_slice(
        &vars,
        &prior_order,
        &in_slice_arcs(schema.prior(), &vars),
        initial,
        &mut warnings,
        "initial",
    )?;
    Ok(SampleSchedule {
        initial,
        transition,
        warnings,
    })
}

/// Everything the four phases produce.
#[derive(Debug, Clone)]
pub struct IrrelevanceAnalysis {
    pub interest: Vec<String>,
    /// Interest variables, sensors, and everything either depends on.
    pub relevant: Vec<String>,
    pub order: Vec<String>,
    pub conditions: Vec<IrrelevanceCondition>,
    /// Guards after the in-slice and interest overrides.
    pub guards: BTreeMap<String, DnfCondition>,
    pub initial_guards: BTreeMap<String, DnfCondition>,
    pub schedule: SampleSchedule,
}

/// Runs all four phases for `interest` on an evidence-integrated schema.
///
/// Sensors always count as consumers since their weights are read in every
/// slice. A variable read in-slice by a consumer, and every interest
/// variable, is never skipped.
pub fn analyze(schema: &DpnSchema, interest: &[String]) -> Result<IrrelevanceAnalysis> {
    let mut seeds: Vec<String> = interest.to_vec();
    seeds.extend(schema.sensors().iter().cloned());
    let relevant = relevant_variables(schema, &seeds)?;
    let consumers: BTreeSet<String> = relevant.iter().cloned().collect();
    let order = slice_ordering(schema)?;

    let read_in_slice = |net: &BayesNet| -> Result<BTreeSet<String>> {
        let mut out = BTreeSet::new();
        for x in &consumers {
            let c = net
                .conditional(x)
                .ok_or_else(|| Error::UnknownVariable(x.clone()))?;
            out.extend(
                canonical_tree(c)?
                    .tested_vars()
                    .into_iter()
                    .filter(|t| strip_prev(t).is_none()),
            );
        }
        Ok(out)
    };
    let pinned_transition = read_in_slice(schema.transition())?;
    let pinned_prior = read_in_slice(schema.prior())?;

    let mut conditions = Vec::new();
    let mut guards = BTreeMap::new();
    let mut initial_guards = BTreeMap::new();
    for v in slice_vars(schema) {
        let result = irrelevance_condition(schema, &v, &order, &consumers)?;
        let base = if interest.contains(&v) {
            DnfCondition::never()
        } else {
            result.condition.clone()
        };
        let pin = |pinned: &BTreeSet<String>| {
            if pinned.contains(&v) {
                DnfCondition::never()
            } else {
                base.clone()
            }
        };
        guards.insert(v.clone(), pin(&pinned_transition));
        initial_guards.insert(v.clone(), pin(&pinned_prior));
        conditions.push(result);
    }
    let schedule = build_schedule(schema, &guards, &initial_guards)?;
    Ok(IrrelevanceAnalysis {
        interest: interest.to_vec(),
        relevant,
        order,
        conditions,
        guards,
        initial_guards,
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpn::integrate_evidence;
    use crate::fixtures;
    use crate::trees::{Distribution, Variable};

    fn leaf(p: f64) -> CptTree {
        CptTree::leaf(Distribution::new(vec![p, 1.0 - p]).unwrap())
    }

    fn ctx(pairs: &[(&str, usize)]) -> Context {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn dnf_algebra() {
        let t = DnfCondition::always();
        let f = DnfCondition::never();
        let e = DnfCondition::literal("E", 0);
        assert!(t.is_true() && f.is_false());
        assert_eq!(e.and(&t), e);
        assert!(e.and(&f).is_false());
        assert!(e.or(&t).is_true());
        assert!(e.and(&DnfCondition::literal("E", 1)).is_false());
        let ed = e.and(&DnfCondition::literal("D", 0));
        assert_eq!(e.or(&ed), e);
        assert!(ed.holds(&ctx(&[("E", 0), ("D", 0), ("C", 1)])));
        assert!(!ed.holds(&ctx(&[("E", 0)])));
        assert_eq!(f.to_string(), "FALSE");
        assert_eq!(ed.to_string(), "D=0 & E=0");
    }

    #[test]
    fn single_leaf_graph_is_just_the_sink() {
        let g = build_sample_graph(&leaf(0.3));
        assert_eq!(g.root(), SINK);
        assert_eq!(g.test_count(), 0);
        assert!(g.reads(&Context::new()).unwrap().is_empty());
    }

    #[test]
    fn sample_graph_shares_shapes_but_keeps_distinct_tests() {
        // D(leaf, leaf) with distinct values still has to read D
        let t = CptTree::node("D", vec![leaf(0.2), leaf(0.7)]);
        let g = build_sample_graph(&t);
        assert_eq!(g.test_count(), 1);
        // identical leaves make the test redundant
        let t = CptTree::node("D", vec![leaf(0.2), leaf(0.2)]);
        assert_eq!(build_sample_graph(&t).test_count(), 0);
        // two C tests with different leaves become one node
        let t = CptTree::node(
            "B",
            vec![
                CptTree::node("C", vec![leaf(0.1), leaf(0.2)]),
                CptTree::node("C", vec![leaf(0.3), leaf(0.4)]),
            ],
        );
        let g = build_sample_graph(&t);
        assert_eq!(g.test_count(), 2);
        assert_eq!(g.reads(&ctx(&[("B", 1), ("C", 0)])).unwrap(), ["B", "C"]);
    }

    #[test]
    fn graph_with_e_at_the_root_bypasses_f_on_one_branch() {
        let (e, f, d) = (prev_name("E"), prev_name("F"), "D".to_string());
        let below = |p: f64| CptTree::node(d.clone(), vec![leaf(p), leaf(p / 2.0)]);
        let t = CptTree::node(
            e.clone(),
            vec![
                below(0.8),
                CptTree::node(f.clone(), vec![below(0.6), below(0.4)]),
            ],
        );
        let g = build_sample_graph(&t);
        let GraphNode::Test { var, children } = g.node(g.root()) else {
            panic!("empty graph")
        };
        assert_eq!(var, &e);
        // both F branches and the E=true branch share one D node
        assert_eq!(g.test_count(), 3);
        let GraphNode::Test {
            children: below_f, ..
        } = g.node(children[1])
        else {
            panic!("F expected")
        };
        assert_eq!(below_f[0], children[0]);
        assert_eq!(below_f[1], children[0]);
    }

    #[test]
    fn f2_integrated_sensor_graph_reads_f_only_when_e_is_false() {
        let s = integrate_evidence(&fixtures::f2()).unwrap().schema;
        let c = s.transition_conditional("O").unwrap();
        let g = build_sample_graph(&canonical_tree(c).unwrap());
        let e = prev_name("E");
        let f = prev_name("F");
        for full in s.transition().full_contexts() {
            let reads = g.reads(&full).unwrap();
            assert_eq!(reads.contains(&f), full.get(&e) == Some(1), "{full}");
        }
    }

    #[test]
    fn f2_ordering_and_guard() {
        let s = integrate_evidence(&fixtures::f2()).unwrap().schema;
        let order = slice_ordering(&s).unwrap();
        assert_eq!(order[0], "O");
        let a = analyze(&s, &["A".to_string()]).unwrap();
        assert_eq!(a.relevant.len(), 7);
        let f = a.conditions.iter().find(|c| c.variable == "F").unwrap();
        let of = |x: &str| f.per_graph.iter().find(|(n, _)| n == x).unwrap().1.clone();
        assert_eq!(of("O"), DnfCondition::literal("E", 0));
        assert_eq!(of("D"), DnfCondition::literal("E", 0));
        // e'd' or e'd̄'c', found in the shorter equivalent form e'd' or e'c'
        let case_split = DnfCondition::from_disjuncts(vec![
            ctx(&[("E", 0), ("D", 0)]),
            ctx(&[("E", 0), ("D", 1), ("C", 0)]),
        ]);
        let expected = DnfCondition::from_disjuncts(vec![
            ctx(&[("E", 0), ("D", 0)]),
            ctx(&[("E", 0), ("C", 0)]),
        ]);
        assert_eq!(a.guards["F"], expected);
        for full in s.prior().full_contexts() {
            assert_eq!(case_split.holds(&full), expected.holds(&full));
        }
        for (v, g) in &a.guards {
            if v != "F" {
                assert!(g.is_false(), "{v}: {g}");
            }
        }
        let pos = |v: &str| {
            a.schedule
                .transition
                .iter()
                .position(|e| e.variable == v)
                .unwrap()
        };
        assert!(pos("E") < pos("F") && pos("D") < pos("F") && pos("C") < pos("F"));
        assert!(a.schedule.warnings.is_empty());
        assert_eq!(
            a.guards["F"].render(&s),
            "C=true & E=true | D=true & E=true"
        );
    }

    #[test]
    fn unread_variable_is_always_irrelevant_and_root_read_never() {
        let s = DpnSchema::new(
            vec![Variable::binary("X"), Variable::binary("Y")],
            vec!["X".into(), "Y".into()],
            vec![],
            vec![
                Conditional::tree("X", vec![], leaf(0.5)),
                Conditional::tree("Y", vec![], leaf(0.5)),
            ],
            vec![
                Conditional::tree(
                    "X",
                    vec![prev_name("X")],
                    CptTree::node(prev_name("X"), vec![leaf(0.9), leaf(0.1)]),
                ),
                Conditional::tree(
                    "Y",
                    vec![prev_name("X")],
                    CptTree::node(prev_name("X"), vec![leaf(0.3), leaf(0.6)]),
                ),
            ],
        )
        .unwrap();
        let consumers: BTreeSet<String> = ["X".to_string()].into();
        let order = slice_ordering(&s).unwrap();
        assert!(irrelevance_condition(&s, "Y", &order, &consumers)
            .unwrap()
            .condition
            .is_true());
        assert!(irrelevance_condition(&s, "X", &order, &consumers)
            .unwrap()
            .condition
            .is_false());
        let a = analyze(&s, &["X".to_string()]).unwrap();
        assert_eq!(a.relevant, ["X"]);
        assert!(a.guards["Y"].is_true());
    }

    #[test]
    fn mutual_guards_keep_the_later_variable() {
        // Z reads F only when not G and not E; W reads E only when not H and not F
        let p = |n: &str| prev_name(n);
        let t_z = CptTree::node(
            p("G"),
            vec![
                leaf(0.1),
                CptTree::node(
                    p("E"),
                    vec![leaf(0.2), CptTree::node(p("F"), vec![leaf(0.3), leaf(0.4)])],
                ),
            ],
        );
        let t_w = CptTree::node(
            p("H"),
            vec![
                leaf(0.5),
                CptTree::node(
                    p("F"),
                    vec![leaf(0.6), CptTree::node(p("E"), vec![leaf(0.7), leaf(0.8)])],
                ),
            ],
        );
        let names = ["E", "F", "G", "H", "Z", "W"];
        let vars = names.iter().map(|n| Variable::binary(*n)).collect();
        let root = |n: &str| Conditional::tree(n, vec![], leaf(0.5));
        let mut transition: Vec<Conditional> = names[..4].iter().map(|n| root(n)).collect();
        transition.push(Conditional::tree("Z", vec![p("G"), p("E"), p("F")], t_z));
        transition.push(Conditional::tree("W", vec![p("H"), p("F"), p("E")], t_w));
        let s = DpnSchema::new(
            vars,
            names.iter().map(|n| n.to_string()).collect(),
            vec![],
            names.iter().map(|n| root(n)).collect(),
            transition,
        )
        .unwrap();
        let a = analyze(&s, &["Z".to_string(), "W".to_string()]).unwrap();
        assert!(a.guards["E"].vars().contains("F"));
        assert!(a.guards["F"].vars().contains("E"));
        let entry = |v: &str| {
            a.schedule
                .transition
                .iter()
                .find(|x| x.variable == v)
                .unwrap()
                .clone()
        };
        // F is declared later, so its guard survives whole
        assert_eq!(entry("F").guard, a.guards["F"]);
        assert_eq!(
            entry("E").guard,
            DnfCondition::from_disjuncts(vec![ctx(&[("G", 0), ("H", 0)])])
        );
        assert!(!a.schedule.warnings.is_empty());
        let pos = |v: &str| {
            a.schedule
                .transition
                .iter()
                .position(|x| x.variable == v)
                .unwrap()
        };
        assert!(pos("E") < pos("F"));
    }
}
