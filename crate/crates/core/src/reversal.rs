//! Arc reversal: the tabular construction and the tree-structured one.
//!
//! Reversing `A -> O` gives O the new parents `Π(O)\{A} ∪ X` and A the new
//! parents `Π(A) ∪ Z ∪ {O}`, where X/Y/Z is the [`ReversalPartition`]. The
//! new CPT of O is `Σ_a P(O|y,z,a) P(a|x,y)` and the new CPT of A is
//! `P(O|A,y,z) P(A|x,y) / P(O|x,y,z)`.
//!
//! The tree path only evaluates these formulas where the structure of the
//! old trees makes the value differ from a retained one: leaves of the old
//! O tree that do not lie under a test of A are carried over, and in the new
//! A tree every region of the new O tree outside a marked subtree collapses
//! to the old `P(A|x,y)` leaf.
//!
//! A zero denominator in the A formula means the context cannot occur
//! together with that value of O; a uniform distribution is written there and
//! the context is listed in [`TreeReversal::unreachable`].

use crate::error::{Error, Result};
use crate::exact::Oracle;
use crate::network::{BayesNet, Conditional, Cpt, ReversalPartition};
use crate::trees::{Context, CptTree, Distribution, Leaf, Node, TabularCpt, Variable};
use crate::TOLERANCE;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReversalStats {
    /// Leaves of the new O tree computed as a mixture over A.
    pub eq1_evals: usize,
    /// Leaves of the new A tree computed by Bayes' rule.
    pub eq2_evals: usize,
    /// Leaves of the old O tree carried over unchanged.
    pub o_leaves_retained: usize,
    pub o_leaves: usize,
    pub a_leaves: usize,
    /// Rows the tabular construction would produce for O and A.
    pub tabular_o_entries: usize,
    pub tabular_a_entries: usize,
}

impl ReversalStats {
    pub fn explicit_computations(&self) -> usize {
        self.eq1_evals + self.eq2_evals
    }

    pub fn tabular_entries(&self) -> usize {
        self.tabular_o_entries + self.tabular_a_entries
    }
}

#[derive(Debug, Clone)]
pub struct TreeReversal {
    pub net: BayesNet,
    pub stats: ReversalStats,
    /// Branch contexts (including O) of new A leaves filled uniformly.
    pub unreachable: Vec<Context>,
}

struct Plan {
    partition: ReversalPartition,
    o_parents: Vec<String>,
    a_parents: Vec<String>,
}

fn plan(net: &BayesNet, a: &str, o: &str) -> Result<Plan> {
    net.require(a)?;
    net.require(o)?;
    let partition = net.partition(a, o)?;
    if net.has_path(a, o, true) {
        return Err(Error::WouldCreateCycle {
            from: a.to_string(),
            to: o.to_string(),
        });
    }
    let mut o_parents: Vec<String> = net
        .parents(o)
        .iter()
        .filter(|p| p.as_str() != a)
        .cloned()
        .collect();
    o_parents.extend(partition.x.iter().cloned());
    let mut a_parents: Vec<String> = net.parents(a).to_vec();
    a_parents.extend(partition.z.iter().cloned());
    a_parents.push(o.to_string());
    Ok(Plan {
        partition,
        o_parents,
        a_parents,
    })
}

fn rows(net: &BayesNet, parents: &[String]) -> Result<usize> {
    parents
        .iter()
        .map(|p| net.require(p).map(Variable::card))
        .product()
}

/// The tabular reversal. Both new CPTs are dense tables.
pub fn reverse_arc_tabular(net: &BayesNet, a: &str, o: &str) -> Result<BayesNet> {
    let plan = plan(net, a, o)?;
    let var_a = net.require(a)?.clone();
    let var_o = net.require(o)?.clone();
    let cpt_a = &net
        .conditional(a)
        .ok_or_else(|| Error::UnknownVariable(a.into()))?
        .cpt;
    let cpt_o = &net
        .conditional(o)
        .ok_or_else(|| Error::UnknownVariable(o.into()))?
        .cpt;

    let mixture = |ctx: &Context| -> Result<Vec<f64>> {
        let prior_a = cpt_a.eval(ctx)?;
        let mut out = vec![0.0; var_o.card()];
        for ai in 0..var_a.card() {
            let p_o = cpt_o.eval(&ctx.with(a, ai))?;
            for (slot, &q) in out.iter_mut().zip(p_o.probs()) {
                *slot += q * prior_a.get(ai);
            }
        }
        Ok(out)
    };

    let o_vars = plan
        .o_parents
        .iter()
        .map(|p| net.require(p).cloned())
        .collect::<Result<Vec<_>>>()?;
    let o_shape = TabularCpt::new(
        plan.o_parents.clone(),
        o_vars.iter().map(Variable::card).collect(),
        vec![Distribution::uniform(var_o.card()); rows(net, &plan.o_parents)?],
    )?;
    let mut o_rows = Vec::with_capacity(o_shape.num_rows());
    for i in 0..o_shape.num_rows() {
        o_rows.push(Distribution::computed(mixture(&o_shape.instantiation(i))?));
    }

    let a_vars = plan
        .a_parents
        .iter()
        .map(|p| net.require(p).cloned())
        .collect::<Result<Vec<_>>>()?;
    let a_shape = TabularCpt::new(
        plan.a_parents.clone(),
        a_vars.iter().map(Variable::card).collect(),
        vec![Distribution::uniform(var_a.card()); rows(net, &plan.a_parents)?],
    )?;
    let mut a_rows = Vec::with_capacity(a_shape.num_rows());
    for i in 0..a_shape.num_rows() {
        let ctx = a_shape.instantiation(i);
        let ov = ctx.get(o).expect("O is a new parent of A");
        let denom = mixture(&ctx)?[ov];
        if denom <= 0.0 {
            a_rows.push(Distribution::uniform(var_a.card()));
            continue;
        }
        let prior_a = cpt_a.eval(&ctx)?;
        let probs = (0..var_a.card())
            .map(|ai| Ok(cpt_o.eval(&ctx.with(a, ai))?.get(ov) * prior_a.get(ai) / denom))
            .collect::<Result<Vec<f64>>>()?;
        a_rows.push(Distribution::computed(probs));
    }

    let mut out = net.clone();
    out.set_conditional(Conditional {
        child: o.to_string(),
        parents: plan.o_parents.clone(),
        cpt: Cpt::Table(TabularCpt::new(
            plan.o_parents,
            o_shape.cards().to_vec(),
            o_rows,
        )?),
    });
    out.set_conditional(Conditional {
        child: a.to_string(),
        parents: plan.a_parents.clone(),
        cpt: Cpt::Table(TabularCpt::new(
            plan.a_parents,
            a_shape.cards().to_vec(),
            a_rows,
        )?),
    });
    Ok(out)
}

fn tree_of<'a>(net: &'a BayesNet, v: &str) -> Result<&'a CptTree> {
    net.conditional(v)
        .ok_or_else(|| Error::UnknownVariable(v.to_string()))?
        .cpt
        .as_tree()
        .ok_or_else(|| Error::NotATree(v.to_string()))
}

/// Builds the new O tree, keeping marks on the roots of the grafted copies of
/// the old A tree and annotations `P(O|a)` on every computed leaf.
struct OBuilder<'a> {
    a: &'a str,
    tree_a: &'a CptTree,
    card_a: usize,
    stats: ReversalStats,
}

impl OBuilder<'_> {
    fn build(&mut self, t: &CptTree, ctx: &mut Context) -> Result<CptTree> {
        match t {
            CptTree::Leaf(l) => {
                self.stats.o_leaves_retained += 1;
                Ok(CptTree::Leaf(l.clone()))
            }
            CptTree::Node(n) if n.var == self.a => self.site(n, ctx),
            CptTree::Node(n) => {
                let mut children = Vec::with_capacity(n.children.len());
                for (i, c) in n.children.iter().enumerate() {
                    ctx.assign(n.var.clone(), i);
                    children.push(self.build(c, ctx)?);
                }
                ctx.remove(&n.var);
                Ok(CptTree::Node(Node {
                    var: n.var.clone(),
                    children,
                    marked: false,
                }))
            }
        }
    }

    /// One occurrence of A: graft the reduced old A tree, then under each of
    /// its leaves a reduced copy of the merged per-value subtrees, and mix.
    fn site(&mut self, site: &Node, ctx: &Context) -> Result<CptTree> {
        if site.children.len() != self.card_a {
            return Err(Error::Invalid(format!(
                "test of `{}` has the wrong arity",
                self.a
            )));
        }
        let merged = CptTree::merge(&site.children)?;
        let copy = self.tree_a.reduce(ctx);
        let mut eq1 = 0usize;
        let mut failure = None;
        let mut grafted = copy.map_leaves(ctx, &mut |leaf_ctx, a_leaf| {
            let p_a = a_leaf.dist.clone();
            merged.reduce(leaf_ctx).map_leaves(leaf_ctx, &mut |_, m| {
                eq1 += 1;
                if m.annotations.len() != p_a.len() {
                    failure = Some(Error::Invalid(
                        "merged leaf lacks per-value annotations".into(),
                    ));
                    return CptTree::Leaf(m.clone());
                }
                let width = m.annotations[0].len();
                let mut mix = vec![0.0; width];
                for (ann, &w) in m.annotations.iter().zip(p_a.probs()) {
                    for (slot, &q) in mix.iter_mut().zip(ann.probs()) {
                        *slot += q * w;
                    }
                }
                CptTree::Leaf(Leaf {
                    dist: Distribution::computed(mix),
                    annotations: m.annotations.clone(),
                    marked: false,
                })
            })
        });
        if let Some(e) = failure {
            return Err(e);
        }
        self.stats.eq1_evals += eq1;
        grafted.set_marked(true);
        Ok(grafted)
    }
}

/// Collapses every maximal subtree that contains no mark into a leaf, leaving
/// the tests above marked regions in place.
fn collapse_unmarked(t: &CptTree) -> CptTree {
    if t.is_marked() || t.is_leaf() {
        return t.clone();
    }
    if !t.contains_mark() {
        // placeholder value: unmarked leaves are relabelled with P_l(A)
        return CptTree::leaf(Distribution::uniform(1));
    }
    match t {
        CptTree::Node(n) => CptTree::Node(Node {
            var: n.var.clone(),
            children: n.children.iter().map(collapse_unmarked).collect(),
            marked: false,
        }),
        CptTree::Leaf(_) => unreachable!(),
    }
}

struct ABuilder<'a> {
    o: &'a str,
    card_o: usize,
    card_a: usize,
    stats: ReversalStats,
    unreachable: Vec<Context>,
}

impl ABuilder<'_> {
    /// Labels a collapsed, reduced copy of the new O tree under one leaf of
    /// the old A tree carrying `p_a`.
    fn label(
        &mut self,
        t: &CptTree,
        under_mark: bool,
        p_a: &Distribution,
        ctx: &mut Context,
    ) -> Result<CptTree> {
        let marked = under_mark || t.is_marked();
        match t {
            CptTree::Leaf(_) if !marked => Ok(CptTree::leaf(p_a.clone())),
            CptTree::Leaf(l) => {
                if l.annotations.len() != self.card_a {
                    return Err(Error::Invalid(
                        "marked leaf lacks per-value annotations".into(),
                    ));
                }
                let mut children = Vec::with_capacity(self.card_o);
                for ov in 0..self.card_o {
                    self.stats.eq2_evals += 1;
                    let denom = l.dist.get(ov);
                    if denom <= 0.0 {
                        self.unreachable.push(ctx.with(self.o, ov));
                        children.push(CptTree::leaf(Distribution::uniform(self.card_a)));
                        continue;
                    }
                    let probs = (0..self.card_a)
                        .map(|ai| l.annotations[ai].get(ov) * p_a.get(ai) / denom)
                        .collect();
                    children.push(CptTree::leaf(Distribution::computed(probs)));
                }
                Ok(CptTree::node(self.o, children))
            }
            CptTree::Node(n) => {
                let mut children = Vec::with_capacity(n.children.len());
                for (i, c) in n.children.iter().enumerate() {
                    ctx.assign(n.var.clone(), i);
                    children.push(self.label(c, marked, p_a, ctx)?);
                }
                ctx.remove(&n.var);
                Ok(CptTree::node(n.var.clone(), children))
            }
        }
    }
}

/// The tree-structured reversal of `a -> o`.
pub fn reverse_arc_tree(net: &BayesNet, a: &str, o: &str) -> Result<TreeReversal> {
    let plan = plan(net, a, o)?;
    let tree_a = tree_of(net, a)?;
    let tree_o = tree_of(net, o)?;
    let card_a = net.require(a)?.card();
    let card_o = net.require(o)?.card();

    let mut ob = OBuilder {
        a,
        tree_a,
        card_a,
        stats: ReversalStats::default(),
    };
    let new_o = ob.build(tree_o, &mut Context::new())?;
    let mut stats = ob.stats;
    stats.o_leaves = new_o.leaf_count();

    let mut ab = ABuilder {
        o,
        card_o,
        card_a,
        stats,
        unreachable: Vec::new(),
    };
    let mut failure = None;
    let new_a = tree_a.map_leaves(&Context::new(), &mut |ctx_l, leaf_l| {
        let reduced = collapse_unmarked(&new_o.reduce(ctx_l));
        let mut ctx = ctx_l.clone();
        match ab.label(&reduced, false, &leaf_l.dist, &mut ctx) {
            Ok(t) => t,
            Err(e) => {
                failure = Some(e);
                CptTree::leaf(leaf_l.dist.clone())
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let mut stats = ab.stats;
    stats.a_leaves = new_a.leaf_count();
    stats.tabular_o_entries = rows(net, &plan.o_parents)?;
    stats.tabular_a_entries = rows(net, &plan.a_parents)?;
    // partition is implied by the parent lists; kept for the assertion below
    debug_assert_eq!(
        plan.o_parents.len() + 1,
        net.parents(o).len() + plan.partition.x.len()
    );

    let mut out = net.clone();
    out.set_conditional(Conditional::tree(o, plan.o_parents, new_o.cleaned()));
    out.set_conditional(Conditional::tree(a, plan.a_parents, new_a.cleaned()));
    Ok(TreeReversal {
        net: out,
        stats,
        unreachable: ab.unreachable,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsiViolation {
    /// Branch context of the leaf.
    pub branch: Context,
    /// Instantiation of the untested parents where the claim fails.
    pub witness: Context,
    pub deviation: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsiReport {
    pub checks: usize,
    pub max_deviation: f64,
    pub violations: Vec<CsiViolation>,
}

impl CsiReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks, for every leaf branch `c` of `v`'s tree, that
/// `P(v | c, w) = P(v | c)` for every instantiation `w` of the untested
/// parents with `P(c, w) > 0`, using the joint distribution of `net` itself.
pub fn verify_csi(net: &BayesNet, v: &str) -> Result<CsiReport> {
    verify_csi_against(net, net, v)
}

/// As [`verify_csi`], taking the tree and parent set from `tree_net` and the
/// joint distribution from `joint_net`.
pub fn verify_csi_against(joint_net: &BayesNet, tree_net: &BayesNet, v: &str) -> Result<CsiReport> {
    let tree = tree_of(tree_net, v)?;
    let parents = tree_net.parents(v).to_vec();
    let card_v = joint_net.require(v)?.card();
    for p in &parents {
        joint_net.require(p)?;
    }
    let oracle = Oracle::default();
    oracle.guard(joint_net.num_full_contexts())?;

    let branches = tree.leaf_contexts();
    let parent_cards: Vec<usize> = parents
        .iter()
        .map(|p| joint_net.require(p).map(Variable::card))
        .collect::<Result<_>>()?;
    let parent_rows: usize = parent_cards.iter().product();
    // mass[branch][parent row][value of v]
    let mut mass = vec![vec![vec![0.0; card_v]; parent_rows]; branches.len()];
    for full in joint_net.full_contexts() {
        let p = joint_net.joint_probability(&full)?;
        let branch = branches
            .iter()
            .position(|b| b.is_subset_of(&full))
            .expect("every full context reaches exactly one leaf");
        let mut row = 0;
        for (name, &card) in parents.iter().zip(&parent_cards) {
            row = row * card + full.get(name).expect("full context");
        }
        mass[branch][row][full.get(v).expect("full context")] += p;
    }

    let mut report = CsiReport::default();
    let template = TabularCpt::new(
        parents.clone(),
        parent_cards.clone(),
        vec![Distribution::uniform(card_v); parent_rows],
    )?;
    for (bi, branch) in branches.iter().enumerate() {
        let mut pooled = vec![0.0; card_v];
        for row in &mass[bi] {
            for (s, m) in pooled.iter_mut().zip(row) {
                *s += m;
            }
        }
        let total: f64 = pooled.iter().sum();
        if total <= 0.0 {
            continue;
        }
        for (ri, row) in mass[bi].iter().enumerate() {
            let row_total: f64 = row.iter().sum();
            if row_total <= 0.0 {
                continue;
            }
            report.checks += 1;
            let dev = row
                .iter()
                .zip(&pooled)
                .map(|(m, s)| (m / row_total - s / total).abs())
                .fold(0.0, f64::max);
            report.max_deviation = report.max_deviation.max(dev);
            if dev > TOLERANCE {
                let witness = template
                    .instantiation(ri)
                    .iter()
                    .filter(|(k, _)| !branch.contains(k))
                    .map(|(k, x)| (k.to_string(), x))
                    .collect();
                report.violations.push(CsiViolation {
                    branch: branch.clone(),
                    witness,
                    deviation: dev,
                });
            }
        }
    }
    Ok(report)
}
