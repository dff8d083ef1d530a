//! Two-slice dynamic networks: schemas, unrolling and evidence integration.
//!
//! A schema holds a prior network for slice 1 and a transition network for
//! a generic slice. Transition CPTs may test previous-slice copies, named
//! with [`PREV_SUFFIX`]; inside the transition network those copies are
//! roots with uniform CPTs, so it is a valid network on its own.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::network::{is_valid_name, BayesNet, Conditional};
use crate::reversal::{reverse_arc_tree, ReversalStats};
use crate::trees::{Context, CptTree, Distribution, Variable};

pub const PREV_SUFFIX: &str = "@prev";

pub fn prev_name(var: &str) -> String {
    format!("{var}{PREV_SUFFIX}")
}

/// `X` for `X@prev`, otherwise `None`.
pub fn strip_prev(name: &str) -> Option<&str> {
    name.strip_suffix(PREV_SUFFIX)
}

/// Name of `var` in slice `t` of an unrolled network.
pub fn slice_name(var: &str, t: usize) -> String {
    format!("{var}@{t}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpnSchema {
    variables: Vec<Variable>,
    state: Vec<String>,
    sensors: Vec<String>,
    prior: BayesNet,
    transition: BayesNet,
}

impl DpnSchema {
    /// `prior` holds one CPT per variable over slice-1 variables only;
    /// `transition` holds one CPT per variable whose parents are current
    /// variables or `X@prev` copies.
    pub fn new(
        variables: Vec<Variable>,
        state: Vec<String>,
        sensors: Vec<String>,
        prior: Vec<Conditional>,
        transition: Vec<Conditional>,
    ) -> Result<Self> {
        for v in &variables {
            if v.name().contains('@') || !is_valid_name(v.name()) {
                return Err(Error::Invalid(format!(
                    "invalid slice variable name `{}`",
                    v.name()
                )));
            }
        }
        let prior = BayesNet::checked(variables.clone(), prior)?;
        let mut cpts = transition;
        let mut all = variables.clone();
        for v in &variables {
            let p = prev_name(v.name());
            all.push(v.renamed(p.clone()));
            cpts.push(Conditional::tree(
                p,
                vec![],
                CptTree::leaf(Distribution::uniform(v.card())),
            ));
        }
        let transition = BayesNet::checked(all, cpts)?;
        Self::from_parts(variables, state, sensors, prior, transition)
    }

    fn from_parts(
        variables: Vec<Variable>,
        state: Vec<String>,
        sensors: Vec<String>,
        prior: BayesNet,
        transition: BayesNet,
    ) -> Result<Self> {
        let known: BTreeSet<&str> = variables.iter().map(|v| v.name()).collect();
        for list in [&state, &sensors] {
            let mut seen = BTreeSet::new();
            for n in list {
                if !known.contains(n.as_str()) {
                    return Err(Error::UnknownVariable(n.clone()));
                }
                if !seen.insert(n) {
                    return Err(Error::Invalid(format!("`{n}` listed twice")));
                }
            }
        }
        Ok(DpnSchema {
            variables,
            state,
            sensors,
            prior,
            transition,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.prior.variable(name)
    }

    pub fn state(&self) -> &[String] {
        &self.state
    }

    pub fn sensors(&self) -> &[String] {
        &self.sensors
    }

    pub fn is_sensor(&self, name: &str) -> bool {
        self.sensors.iter().any(|s| s == name)
    }

    pub fn prior(&self) -> &BayesNet {
        &self.prior
    }

    /// The transition network, including the uniform `X@prev` roots.
    pub fn transition(&self) -> &BayesNet {
        &self.transition
    }

    /// Transition CPT of a slice variable.
    pub fn transition_conditional(&self, name: &str) -> Option<&Conditional> {
        self.transition.conditional(name)
    }

    /// Transition CPTs of the slice variables in declaration order.
    pub fn transition_conditionals(&self) -> impl Iterator<Item = &Conditional> {
        self.variables
            .iter()
            .map(|v| self.transition.conditional(v.name()).expect("validated"))
    }

    /// Prior CPTs in declaration order.
    pub fn prior_conditionals(&self) -> impl Iterator<Item = &Conditional> {
        self.variables
            .iter()
            .map(|v| self.prior.conditional(v.name()).expect("validated"))
    }

    /// Current-slice parents of `name` in the transition network.
    pub fn in_slice_parents(&self, name: &str) -> Vec<String> {
        self.transition
            .parents(name)
            .iter()
            .filter(|p| strip_prev(p).is_none())
            .cloned()
            .collect()
    }

    /// Previous-slice parents of `name`, without the suffix.
    pub fn prev_parents(&self, name: &str) -> Vec<String> {
        self.transition
            .parents(name)
            .iter()
            .filter_map(|p| strip_prev(p).map(str::to_string))
            .collect()
    }

    /// Number of full instantiations of all variables over `horizon` slices.
    pub fn num_full_contexts(&self, horizon: usize) -> u128 {
        let slice = self.prior.num_full_contexts();
        (0..horizon).fold(1u128, |acc, _| acc.saturating_mul(slice))
    }

    /// Flat network over `V@1 .. V@horizon`.
    pub fn unroll(&self, horizon: usize) -> Result<BayesNet> {
        if horizon == 0 {
            return Err(Error::Invalid("horizon must be at least 1".into()));
        }
        let mut variables = Vec::with_capacity(self.variables.len() * horizon);
        let mut cpts = Vec::with_capacity(variables.capacity());
        for t in 1..=horizon {
            for v in &self.variables {
                variables.push(v.renamed(slice_name(v.name(), t)));
            }
            if t == 1 {
                for c in self.prior_conditionals() {
                    cpts.push(c.renamed(&|n| slice_name(n, 1)));
                }
            } else {
                for c in self.transition_conditionals() {
                    cpts.push(c.renamed(&|n| match strip_prev(n) {
                        Some(base) => slice_name(base, t - 1),
                        None => slice_name(n, t),
                    }));
                }
            }
        }
        Ok(BayesNet::new(variables, cpts))
    }
}

/// Sensor observations keyed by (time, variable); times start at 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    observations: BTreeMap<(usize, String), usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Evidence::default()
    }

    /// Records `variable = value` at `time`, checked against `schema`.
    pub fn observe(
        &mut self,
        schema: &DpnSchema,
        time: usize,
        variable: &str,
        value: usize,
    ) -> Result<()> {
        if time == 0 {
            return Err(Error::Invalid("evidence times start at 1".into()));
        }
        let var = schema
            .variable(variable)
            .ok_or_else(|| Error::UnknownVariable(variable.to_string()))?;
        if !schema.is_sensor(variable) {
            return Err(Error::Invalid(format!("`{variable}` is not a sensor")));
        }
        if value >= var.card() {
            return Err(Error::ValueOutOfRange {
                variable: variable.to_string(),
                value,
            });
        }
        let key = (time, variable.to_string());
        match self.observations.get(&key) {
            Some(&old) if old != value => Err(Error::Invalid(format!(
                "conflicting observations of `{variable}` at time {time}"
            ))),
            _ => {
                self.observations.insert(key, value);
                Ok(())
            }
        }
    }

    /// As [`Evidence::observe`] with a value label.
    pub fn observe_label(
        &mut self,
        schema: &DpnSchema,
        time: usize,
        variable: &str,
        label: &str,
    ) -> Result<()> {
        let var = schema
            .variable(variable)
            .ok_or_else(|| Error::UnknownVariable(variable.to_string()))?;
        let value = var.value_index(label).ok_or_else(|| Error::UnknownValue {
            variable: variable.to_string(),
            value: label.to_string(),
        })?;
        self.observe(schema, time, variable, value)
    }

    pub fn get(&self, time: usize, variable: &str) -> Option<usize> {
        self.observations
            .get(&(time, variable.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Observations ordered by time, then variable name.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &str, usize)> {
        self.observations
            .iter()
            .map(|((t, v), &x)| (*t, v.as_str(), x))
    }

    pub fn max_time(&self) -> usize {
        self.observations.keys().map(|(t, _)| *t).max().unwrap_or(0)
    }

    /// The observations as a context over unrolled names `V@t`, keeping
    /// only times up to `horizon`.
    pub fn unrolled(&self, horizon: usize) -> Context {
        self.iter()
            .filter(|(t, _, _)| *t <= horizon)
            .map(|(t, v, x)| (slice_name(v, t), x))
            .collect()
    }
}

/// Which network of the schema a reversal was applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceNet {
    Prior,
    Transition,
}

impl SliceNet {
    pub fn as_str(self) -> &'static str {
        match self {
            SliceNet::Prior => "prior",
            SliceNet::Transition => "transition",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReversalStep {
    pub net: SliceNet,
    pub sensor: String,
    /// The state variable whose arc into the sensor was reversed.
    pub parent: String,
    pub stats: ReversalStats,
}

#[derive(Debug, Clone)]
pub struct Integration {
    pub schema: DpnSchema,
    pub steps: Vec<ReversalStep>,
}

impl Integration {
    pub fn stats(&self) -> Vec<ReversalStats> {
        self.steps.iter().map(|s| s.stats).collect()
    }

    pub fn transition_steps(&self) -> impl Iterator<Item = &ReversalStep> {
        self.steps.iter().filter(|s| s.net == SliceNet::Transition)
    }
}

/// Reverses every in-slice arc into each sensor, in both the prior and the
/// transition network, so that sensors depend on previous-slice variables
/// only.
pub fn integrate_evidence(schema: &DpnSchema) -> Result<Integration> {
    let mut steps = Vec::new();
    let in_slice = |n: &str| strip_prev(n).is_none();
    let prior = integrate_net(
        schema,
        schema.prior.clone(),
        SliceNet::Prior,
        &in_slice,
        &mut steps,
    )?;
    let transition = integrate_net(
        schema,
        schema.transition.clone(),
        SliceNet::Transition,
        &in_slice,
        &mut steps,
    )?;
    let out = DpnSchema::from_parts(
        schema.variables.clone(),
        schema.state.clone(),
        schema.sensors.clone(),
        prior,
        transition,
    )?;
    Ok(Integration { schema: out, steps })
}

fn integrate_net(
    schema: &DpnSchema,
    mut net: BayesNet,
    which: SliceNet,
    in_slice: &dyn Fn(&str) -> bool,
    steps: &mut Vec<ReversalStep>,
) -> Result<BayesNet> {
    // Sensors go upstream first so a later sensor never reaches an earlier
    // one through state. Arcs between sensors stay: both ends are observed.
    let order = net.topological_order().ok_or(Error::CyclicSlice)?;
    let sensors: Vec<&String> = order.iter().filter(|n| schema.is_sensor(n)).collect();
    let state_parent = |net: &BayesNet, s: &str| -> Vec<String> {
        net.parents(s)
            .iter()
            .filter(|p| in_slice(p) && !schema.is_sensor(p))
            .cloned()
            .collect()
    };
    for sensor in sensors {
        loop {
            let parents = state_parent(&net, sensor);
            if parents.is_empty() {
                break;
            }
            // the topologically latest parent has no other path into the sensor
            let order = net.topological_order().ok_or(Error::CyclicSlice)?;
            let latest = order
                .iter()
                .rev()
                .find(|n| parents.contains(n))
                .expect("parents appear in the order")
                .clone();
            let reversal = reverse_arc_tree(&net, &latest, sensor)?;
            steps.push(ReversalStep {
                net: which,
                sensor: sensor.clone(),
                parent: latest,
                stats: reversal.stats,
            });
            net = reversal.net;
        }
    }
    Ok(net)
}
