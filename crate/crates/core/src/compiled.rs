//! Index-based CPT evaluation for the enumeration and sampling hot loops.

use crate::error::{Error, Result};
use crate::network::{BayesNet, Cpt};
use crate::trees::CptTree;

#[derive(Debug, Clone)]
enum CNode {
    Test { slot: usize, children: Vec<u32> },
    Leaf { offset: usize },
}

/// A tree whose tests refer to integer slots instead of names.
#[derive(Debug, Clone)]
pub(crate) struct CompiledTree {
    nodes: Vec<CNode>,
    probs: Vec<f64>,
    card: usize,
}

/// Why a compiled evaluation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Unassigned(pub usize);

impl CompiledTree {
    pub fn compile(
        tree: &CptTree,
        card: usize,
        slot_of: &dyn Fn(&str) -> Option<usize>,
    ) -> Result<Self> {
        let mut out = CompiledTree {
            nodes: Vec::new(),
            probs: Vec::new(),
            card,
        };
        out.push(tree, slot_of)?;
        Ok(out)
    }

    pub fn compile_cpt(
        cpt: &Cpt,
        parents: &[String],
        card: usize,
        slot_of: &dyn Fn(&str) -> Option<usize>,
    ) -> Result<Self> {
        match cpt {
            Cpt::Tree(t) => Self::compile(t, card, slot_of),
            Cpt::Table(t) => Self::compile(&t.to_tree(parents)?, card, slot_of),
        }
    }

    fn push(&mut self, tree: &CptTree, slot_of: &dyn Fn(&str) -> Option<usize>) -> Result<u32> {
        let id = self.nodes.len();
        match tree {
            CptTree::Leaf(l) => {
                let offset = self.probs.len();
                self.probs.extend_from_slice(l.dist.probs());
                self.nodes.push(CNode::Leaf { offset });
            }
            CptTree::Node(n) => {
                let slot = slot_of(&n.var).ok_or_else(|| Error::UnknownVariable(n.var.clone()))?;
                self.nodes.push(CNode::Test {
                    slot,
                    children: Vec::new(),
                });
                let children = n
                    .children
                    .iter()
                    .map(|c| self.push(c, slot_of))
                    .collect::<Result<Vec<u32>>>()?;
                if let CNode::Test { children: ch, .. } = &mut self.nodes[id] {
                    *ch = children;
                }
            }
        }
        Ok(id as u32)
    }

    /// Distribution reached when slot values come from `value`.
    #[inline]
    pub fn eval(
        &self,
        value: impl Fn(usize) -> Option<usize>,
    ) -> std::result::Result<&[f64], Unassigned> {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                CNode::Leaf { offset } => return Ok(&self.probs[*offset..*offset + self.card]),
                CNode::Test { slot, children } => {
                    let v = value(*slot).ok_or(Unassigned(*slot))?;
                    i = children[v] as usize;
                }
            }
        }
    }

    /// Evaluation against a full assignment vector.
    #[inline]
    pub fn eval_full(&self, values: &[usize]) -> &[f64] {
        self.eval(|s| Some(values[s])).expect("full assignment")
    }
}

/// A network compiled to slot indices. Slots follow the network's variable
/// declaration order; `order` is a topological order of slots.
#[derive(Debug, Clone)]
pub(crate) struct CompiledNet {
    pub names: Vec<String>,
    pub cards: Vec<usize>,
    pub order: Vec<usize>,
    pub cpts: Vec<CompiledTree>,
}

impl CompiledNet {
    pub fn new(net: &BayesNet) -> Result<Self> {
        let report = net.validate();
        if !report.is_empty() {
            return Err(Error::Validation(report));
        }
        let names: Vec<String> = net
            .variables()
            .iter()
            .map(|v| v.name().to_string())
            .collect();
        let cards = net.variables().iter().map(|v| v.card()).collect();
        let slot_of = |n: &str| net.position(n);
        let cpts = net
            .variables()
            .iter()
            .map(|v| {
                let c = net.conditional(v.name()).expect("validated");
                CompiledTree::compile_cpt(&c.cpt, &c.parents, v.card(), &slot_of)
            })
            .collect::<Result<Vec<_>>>()?;
        let order = net
            .topological_order()
            .expect("validated")
            .iter()
            .map(|n| net.position(n).expect("known"))
            .collect();
        Ok(CompiledNet {
            names,
            cards,
            order,
            cpts,
        })
    }

    pub fn joint(&self, values: &[usize]) -> f64 {
        self.cpts
            .iter()
            .enumerate()
            .map(|(i, c)| c.eval_full(values)[values[i]])
            .product()
    }

    /// Depth-first enumeration in topological order of every full
    /// assignment agreeing with `fixed`, passing its joint probability.
    /// Slots in `unweighted` are clamped by `fixed` but contribute no factor.
    pub fn enumerate<F>(&self, fixed: &[Option<usize>], unweighted: &[bool], f: &mut F)
    where
        F: FnMut(&[usize], f64),
    {
        let mut values = vec![0usize; self.names.len()];
        self.rec(0, 1.0, fixed, unweighted, &mut values, f);
    }

    fn rec<F>(
        &self,
        depth: usize,
        p: f64,
        fixed: &[Option<usize>],
        unweighted: &[bool],
        values: &mut Vec<usize>,
        f: &mut F,
    ) where
        F: FnMut(&[usize], f64),
    {
        if depth == self.order.len() {
            f(values, p);
            return;
        }
        let slot = self.order[depth];
        match fixed[slot] {
            Some(v) => {
                values[slot] = v;
                let factor = if unweighted[slot] {
                    1.0
                } else {
                    self.cpts[slot].eval_full(values)[v]
                };
                self.rec(depth + 1, p * factor, fixed, unweighted, values, f);
            }
            None => {
                for v in 0..self.cards[slot] {
                    values[slot] = v;
                    let factor = self.cpts[slot].eval_full(values)[v];
                    self.rec(depth + 1, p * factor, fixed, unweighted, values, f);
                }
            }
        }
    }
}
