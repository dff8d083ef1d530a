//! Static Bayesian networks with tree or tabular CPTs.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::trees::{Context, CptTree, Distribution, TabularCpt, Variable};

#[derive(Debug, Clone, PartialEq)]
pub enum Cpt {
    Tree(CptTree),
    Table(TabularCpt),
}

impl Cpt {
    pub fn eval(&self, ctx: &Context) -> Result<&Distribution> {
        match self {
            Cpt::Tree(t) => t.eval(ctx),
            Cpt::Table(t) => t.row(ctx),
        }
    }

    pub fn as_tree(&self) -> Option<&CptTree> {
        match self {
            Cpt::Tree(t) => Some(t),
            Cpt::Table(_) => None,
        }
    }

    /// Number of stored entries: leaves for a tree, rows for a table.
    pub fn size(&self) -> usize {
        match self {
            Cpt::Tree(t) => t.leaf_count(),
            Cpt::Table(t) => t.num_rows(),
        }
    }
}

/// The CPT of one variable together with its declared parent list.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub child: String,
    pub parents: Vec<String>,
    pub cpt: Cpt,
}

impl Conditional {
    pub fn tree(child: impl Into<String>, parents: Vec<String>, tree: CptTree) -> Self {
        Conditional {
            child: child.into(),
            parents,
            cpt: Cpt::Tree(tree),
        }
    }

    /// Copy with the child and every parent passed through `f`.
    pub fn renamed(&self, f: &dyn Fn(&str) -> String) -> Self {
        Conditional {
            child: f(&self.child),
            parents: self.parents.iter().map(|p| f(p)).collect(),
            cpt: match &self.cpt {
                Cpt::Tree(t) => Cpt::Tree(t.rename(f)),
                Cpt::Table(t) => Cpt::Table(t.renamed(f)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateVariable,
    BadName,
    BadDomain,
    MissingCpt,
    DuplicateCpt,
    UnknownChild,
    UnknownParent(String),
    DuplicateParent(String),
    SelfParent,
    Cycle,
    UndeclaredTest(String),
    RepeatedTest(String),
    ArityMismatch(String),
    BadDistribution(String),
    TableMismatch(String),
    MarkedTree,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub variable: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.variable;
        match &self.kind {
            ViolationKind::DuplicateVariable => write!(f, "{v}: declared more than once"),
            ViolationKind::BadName => write!(f, "{v}: not a valid variable name"),
            ViolationKind::BadDomain => write!(f, "{v}: domain needs two or more distinct values"),
            ViolationKind::MissingCpt => write!(f, "{v}: has no CPT"),
            ViolationKind::DuplicateCpt => write!(f, "{v}: has more than one CPT"),
            ViolationKind::UnknownChild => write!(f, "{v}: CPT for an undeclared variable"),
            ViolationKind::UnknownParent(p) => write!(f, "{v}: undeclared parent `{p}`"),
            ViolationKind::DuplicateParent(p) => write!(f, "{v}: parent `{p}` listed twice"),
            ViolationKind::SelfParent => write!(f, "{v}: is its own parent"),
            ViolationKind::Cycle => write!(f, "{v}: lies on a directed cycle"),
            ViolationKind::UndeclaredTest(p) => {
                write!(f, "{v}: tree tests `{p}`, which is not a declared parent")
            }
            ViolationKind::RepeatedTest(p) => write!(f, "{v}: tree tests `{p}` twice on one path"),
            ViolationKind::ArityMismatch(p) => {
                write!(f, "{v}: node on `{p}` has the wrong number of children")
            }
            ViolationKind::BadDistribution(m) => write!(f, "{v}: {m}"),
            ViolationKind::TableMismatch(m) => write!(f, "{v}: table {m}"),
            ViolationKind::MarkedTree => write!(f, "{v}: tree carries reversal marks"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, variable: &str, kind: ViolationKind) {
        self.violations.push(Violation {
            variable: variable.to_string(),
            kind,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// `[A-Za-z_][A-Za-z0-9_']*`, optionally followed by an `@suffix` used for
/// slice-indexed copies.
pub fn is_valid_name(name: &str) -> bool {
    let (base, suffix) = match name.split_once('@') {
        Some((b, s)) => (b, Some(s)),
        None => (name, None),
    };
    let mut chars = base.chars();
    let head_ok = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    let tail_ok = chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'');
    let suffix_ok = suffix
        .is_none_or(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
    head_ok && tail_ok && suffix_ok
}

/// X = Π(A)\Π(O), Y = Π(A)∩Π(O), Z = Π(O)\Π(A)\{A}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReversalPartition {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub z: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    variables: Vec<Variable>,
    conditionals: Vec<Conditional>,
    var_index: HashMap<String, usize>,
    cpt_index: HashMap<String, usize>,
}

impl BayesNet {
    /// Builds a network without checking it; see [`BayesNet::validate`].
    pub fn new(variables: Vec<Variable>, conditionals: Vec<Conditional>) -> Self {
        let mut var_index = HashMap::new();
        for (i, v) in variables.iter().enumerate() {
            var_index.entry(v.name().to_string()).or_insert(i);
        }
        let mut cpt_index = HashMap::new();
        for (i, c) in conditionals.iter().enumerate() {
            cpt_index.entry(c.child.clone()).or_insert(i);
        }
        BayesNet {
            variables,
            conditionals,
            var_index,
            cpt_index,
        }
    }

    /// Builds and validates.
    pub fn checked(variables: Vec<Variable>, conditionals: Vec<Conditional>) -> Result<Self> {
        let net = BayesNet::new(variables, conditionals);
        let report = net.validate();
        if report.is_empty() {
            Ok(net)
        } else {
            Err(Error::Validation(report))
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn conditionals(&self) -> &[Conditional] {
        &self.conditionals
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.var_index.get(name).map(|&i| &self.variables[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<&Variable> {
        self.variable(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn conditional(&self, name: &str) -> Option<&Conditional> {
        self.cpt_index.get(name).map(|&i| &self.conditionals[i])
    }

    fn require_conditional(&self, name: &str) -> Result<&Conditional> {
        self.conditional(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn parents(&self, name: &str) -> &[String] {
        self.conditional(name).map_or(&[], |c| c.parents.as_slice())
    }

    pub fn parent_vars(&self, name: &str) -> Result<Vec<Variable>> {
        self.parents(name)
            .iter()
            .map(|p| self.require(p).cloned())
            .collect()
    }

    pub fn children(&self, name: &str) -> Vec<String> {
        self.conditionals
            .iter()
            .filter(|c| c.parents.iter().any(|p| p == name))
            .map(|c| c.child.clone())
            .collect()
    }

    /// Replaces the CPT of `conditional.child`.
    pub fn set_conditional(&mut self, conditional: Conditional) {
        match self.cpt_index.get(&conditional.child) {
            Some(&i) => self.conditionals[i] = conditional,
            None => {
                self.cpt_index
                    .insert(conditional.child.clone(), self.conditionals.len());
                self.conditionals.push(conditional);
            }
        }
    }

    /// Number of full instantiations of all variables.
    pub fn num_full_contexts(&self) -> u128 {
        self.variables
            .iter()
            .map(|v| v.card() as u128)
            .fold(1u128, |a, c| a.saturating_mul(c))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen = BTreeSet::new();
        for v in &self.variables {
            if !seen.insert(v.name()) {
                report.push(v.name(), ViolationKind::DuplicateVariable);
            }
            if !is_valid_name(v.name()) {
                report.push(v.name(), ViolationKind::BadName);
            }
            let labels: BTreeSet<&String> = v.values().iter().collect();
            if v.card() < 2 || labels.len() != v.card() {
                report.push(v.name(), ViolationKind::BadDomain);
            }
        }
        let mut with_cpt = BTreeSet::new();
        for c in &self.conditionals {
            if !with_cpt.insert(c.child.as_str()) {
                report.push(&c.child, ViolationKind::DuplicateCpt);
            }
            let Some(child) = self.variable(&c.child) else {
                report.push(&c.child, ViolationKind::UnknownChild);
                continue;
            };
            let mut declared = BTreeSet::new();
            for p in &c.parents {
                if !declared.insert(p.as_str()) {
                    report.push(&c.child, ViolationKind::DuplicateParent(p.clone()));
                }
                if p == &c.child {
                    report.push(&c.child, ViolationKind::SelfParent);
                }
                if self.variable(p).is_none() {
                    report.push(&c.child, ViolationKind::UnknownParent(p.clone()));
                }
            }
            match &c.cpt {
                Cpt::Tree(t) => self.check_tree(child, &declared, t, &mut report),
                Cpt::Table(t) => self.check_table(child, c, t, &mut report),
            }
        }
        for v in &self.variables {
            if !with_cpt.contains(v.name()) {
                report.push(v.name(), ViolationKind::MissingCpt);
            }
        }
        for v in self.cyclic_variables() {
            report.push(&v, ViolationKind::Cycle);
        }
        report
    }

    fn check_tree(
        &self,
        child: &Variable,
        declared: &BTreeSet<&str>,
        tree: &CptTree,
        report: &mut ValidationReport,
    ) {
        for t in tree.tested_vars() {
            if !declared.contains(t.as_str()) {
                report.push(child.name(), ViolationKind::UndeclaredTest(t));
            }
        }
        if let Some(r) = tree.repeated_test() {
            report.push(child.name(), ViolationKind::RepeatedTest(r));
        }
        if tree.contains_mark() {
            report.push(child.name(), ViolationKind::MarkedTree);
        }
        fn walk(net: &BayesNet, child: &Variable, t: &CptTree, report: &mut ValidationReport) {
            match t {
                CptTree::Leaf(l) => {
                    if l.dist.len() != child.card() {
                        report.push(
                            child.name(),
                            ViolationKind::BadDistribution(format!(
                                "leaf has {} entries, domain has {}",
                                l.dist.len(),
                                child.card()
                            )),
                        );
                    }
                }
                CptTree::Node(n) => {
                    if let Some(v) = net.variable(&n.var) {
                        if v.card() != n.children.len() {
                            report.push(child.name(), ViolationKind::ArityMismatch(n.var.clone()));
                        }
                    }
                    for c in &n.children {
                        walk(net, child, c, report);
                    }
                }
            }
        }
        walk(self, child, tree, report);
    }

    fn check_table(
        &self,
        child: &Variable,
        c: &Conditional,
        t: &TabularCpt,
        report: &mut ValidationReport,
    ) {
        if t.parents() != c.parents.as_slice() {
            report.push(
                child.name(),
                ViolationKind::TableMismatch("parents differ from the declared parents".into()),
            );
            return;
        }
        for (p, &card) in t.parents().iter().zip(t.cards()) {
            if self.variable(p).is_some_and(|v| v.card() != card) {
                report.push(
                    child.name(),
                    ViolationKind::TableMismatch(format!("cardinality of `{p}` is wrong")),
                );
            }
        }
        if t.rows().iter().any(|r| r.len() != child.card()) {
            report.push(
                child.name(),
                ViolationKind::TableMismatch("row width differs from the domain size".into()),
            );
        }
    }

    fn cyclic_variables(&self) -> Vec<String> {
        // a variable is cyclic iff it can reach itself through parent links
        let mut out = Vec::new();
        for v in &self.variables {
            let mut stack: Vec<&str> = self.parents(v.name()).iter().map(String::as_str).collect();
            let mut visited = BTreeSet::new();
            while let Some(u) = stack.pop() {
                if u == v.name() {
                    out.push(v.name().to_string());
                    break;
                }
                if visited.insert(u) {
                    stack.extend(self.parents(u).iter().map(String::as_str));
                }
            }
        }
        out
    }

    /// Parents-before-children order; ties broken by declaration order.
    /// `None` if the graph is cyclic.
    pub fn topological_order(&self) -> Option<Vec<String>> {
        let n = self.variables.len();
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n).find(|&i| {
                !placed[i]
                    && self
                        .parents(self.variables[i].name())
                        .iter()
                        .all(|p| self.position(p).is_none_or(|j| placed[j]))
            })?;
            placed[next] = true;
            order.push(self.variables[next].name().to_string());
        }
        Some(order)
    }

    /// True if `to` is reachable from `from` by a directed path, ignoring the
    /// direct arc `from -> to` when `skip_direct` is set.
    pub fn has_path(&self, from: &str, to: &str, skip_direct: bool) -> bool {
        let mut stack: Vec<String> = self
            .children(from)
            .into_iter()
            .filter(|c| !(skip_direct && c == to))
            .collect();
        let mut visited = BTreeSet::new();
        while let Some(u) = stack.pop() {
            if u == to {
                return true;
            }
            if visited.insert(u.clone()) {
                stack.extend(self.children(&u));
            }
        }
        false
    }

    /// Chain-rule probability of a full context.
    pub fn joint_probability(&self, full: &Context) -> Result<f64> {
        let mut p = 1.0;
        for v in &self.variables {
            let value = full
                .get(v.name())
                .ok_or_else(|| Error::MissingAssignment(v.name().to_string()))?;
            let dist = self.require_conditional(v.name())?.cpt.eval(full)?;
            p *= dist.get(value);
        }
        Ok(p)
    }

    pub fn partition(&self, a: &str, o: &str) -> Result<ReversalPartition> {
        let pa = self.parents(a);
        let po = self.parents(o);
        if !po.iter().any(|p| p == a) {
            return Err(Error::NoSuchArc {
                from: a.to_string(),
                to: o.to_string(),
            });
        }
        let x = pa.iter().filter(|p| !po.contains(p)).cloned().collect();
        let y = pa.iter().filter(|p| po.contains(p)).cloned().collect();
        let z = po
            .iter()
            .filter(|p| !pa.contains(p) && p.as_str() != a)
            .cloned()
            .collect();
        Ok(ReversalPartition { x, y, z })
    }

    /// Every full context of the network in canonical order (first declared
    /// variable most significant).
    pub fn full_contexts(&self) -> FullContexts<'_> {
        FullContexts {
            vars: &self.variables,
            values: vec![0; self.variables.len()],
            done: false,
        }
    }
}

/// Odometer over all full instantiations of a variable list.
pub struct FullContexts<'a> {
    vars: &'a [Variable],
    values: Vec<usize>,
    done: bool,
}

impl Iterator for FullContexts<'_> {
    type Item = Context;

    fn next(&mut self) -> Option<Context> {
        if self.done {
            return None;
        }
        let ctx = self
            .vars
            .iter()
            .zip(&self.values)
            .map(|(v, &x)| (v.name().to_string(), x))
            .collect();
        self.done = true;
        for i in (0..self.vars.len()).rev() {
            self.values[i] += 1;
            if self.values[i] < self.vars[i].card() {
                self.done = false;
                break;
            }
            self.values[i] = 0;
        }
        Some(ctx)
    }
}
