use super::{Context, CptTree, Distribution, Variable};
use crate::error::{Error, Result};
use crate::TOLERANCE;

/// Dense CPT: one row per full parent instantiation. Rows are indexed in
/// mixed radix over `parents`, first parent most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCpt {
    parents: Vec<String>,
    cards: Vec<usize>,
    rows: Vec<Distribution>,
}

impl TabularCpt {
    pub fn new(parents: Vec<String>, cards: Vec<usize>, rows: Vec<Distribution>) -> Result<Self> {
        if parents.len() != cards.len() {
            return Err(Error::Invalid(
                "parent list and cardinalities differ in length".into(),
            ));
        }
        let expected: usize = cards.iter().product();
        if rows.len() != expected {
            return Err(Error::Invalid(format!(
                "table has {} rows, expected {expected}",
                rows.len()
            )));
        }
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::Invalid("table rows have different lengths".into()));
            }
        }
        Ok(TabularCpt {
            parents,
            cards,
            rows,
        })
    }

    /// Same rows with every parent renamed.
    pub fn renamed(&self, f: &dyn Fn(&str) -> String) -> TabularCpt {
        TabularCpt {
            parents: self.parents.iter().map(|p| f(p)).collect(),
            cards: self.cards.clone(),
            rows: self.rows.clone(),
        }
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row_index(&self, ctx: &Context) -> Result<usize> {
        let mut idx = 0;
        for (p, &card) in self.parents.iter().zip(&self.cards) {
            let v = ctx
                .get(p)
                .ok_or_else(|| Error::MissingAssignment(p.clone()))?;
            if v >= card {
                return Err(Error::ValueOutOfRange {
                    variable: p.clone(),
                    value: v,
                });
            }
            idx = idx * card + v;
        }
        Ok(idx)
    }

    pub fn row(&self, ctx: &Context) -> Result<&Distribution> {
        Ok(&self.rows[self.row_index(ctx)?])
    }

    /// The parent instantiation of row `index`.
    pub fn instantiation(&self, mut index: usize) -> Context {
        let mut values = vec![0; self.cards.len()];
        for (slot, &card) in values.iter_mut().zip(&self.cards).rev() {
            *slot = index % card;
            index /= card;
        }
        self.parents.iter().cloned().zip(values).collect()
    }

    pub fn from_tree(tree: &CptTree, parents: &[Variable]) -> Result<Self> {
        for v in tree.tested_vars() {
            if !parents.iter().any(|p| p.name() == v) {
                return Err(Error::UnknownVariable(v));
            }
        }
        let names: Vec<String> = parents.iter().map(|p| p.name().to_string()).collect();
        let cards: Vec<usize> = parents.iter().map(Variable::card).collect();
        let mut table = TabularCpt {
            parents: names,
            cards,
            rows: Vec::new(),
        };
        let n: usize = table.cards.iter().product();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            rows.push(tree.eval(&table.instantiation(i))?.clone());
        }
        table.rows = rows;
        Ok(table)
    }

    /// Full tree in `order`, collapsing every node whose children are
    /// identical subtrees.
    pub fn to_tree(&self, order: &[String]) -> Result<CptTree> {
        let mut sorted_order = order.to_vec();
        sorted_order.sort();
        let mut sorted_parents = self.parents.clone();
        sorted_parents.sort();
        if sorted_order != sorted_parents {
            return Err(Error::Invalid(
                "tree order must be a permutation of the table's parents".into(),
            ));
        }
        let cards: Vec<usize> = order
            .iter()
            .map(|v| {
                let i = self
                    .parents
                    .iter()
                    .position(|p| p == v)
                    .expect("checked permutation");
                self.cards[i]
            })
            .collect();
        let mut ctx = Context::new();
        self.build(order, &cards, 0, &mut ctx)
    }

    fn build(
        &self,
        order: &[String],
        cards: &[usize],
        depth: usize,
        ctx: &mut Context,
    ) -> Result<CptTree> {
        if depth == order.len() {
            return Ok(CptTree::leaf(self.row(ctx)?.clone()));
        }
        let var = &order[depth];
        let mut children = Vec::with_capacity(cards[depth]);
        for i in 0..cards[depth] {
            ctx.assign(var.clone(), i);
            children.push(self.build(order, cards, depth + 1, ctx)?);
        }
        ctx.remove(var);
        if children[1..]
            .iter()
            .all(|c| c.approx_eq(&children[0], TOLERANCE))
        {
            Ok(children.swap_remove(0))
        } else {
            Ok(CptTree::node(var.clone(), children))
        }
    }

    /// Largest entrywise difference to another table over the same parents
    /// (possibly in a different order).
    pub fn max_abs_diff(&self, other: &TabularCpt) -> Result<f64> {
        if self.num_rows() != other.num_rows() {
            return Err(Error::Invalid("tables have different sizes".into()));
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.num_rows() {
            let ctx = self.instantiation(i);
            worst = worst.max(self.rows[i].max_abs_diff(other.row(&ctx)?));
        }
        Ok(worst)
    }
}
