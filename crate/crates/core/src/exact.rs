//! Brute-force oracles: joint enumeration with a size guard.

use crate::compiled::CompiledNet;
use crate::error::{Error, Result};
use crate::network::BayesNet;
use crate::trees::{Context, Distribution};
use crate::TOLERANCE;

/// Default cap on the number of enumerated full contexts.
pub const DEFAULT_CONTEXT_CAP: u128 = 1 << 22;

/// Failing contexts kept in a report.
const FAILURE_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle {
    pub cap: u128,
    pub tolerance: f64,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            cap: DEFAULT_CONTEXT_CAP,
            tolerance: TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub checks: u64,
    pub max_deviation: f64,
    pub failing: Vec<Context>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failing.is_empty()
    }
}

impl Oracle {
    pub fn with_cap(cap: u128) -> Self {
        Oracle {
            cap,
            ..Oracle::default()
        }
    }

    pub fn guard(&self, contexts: u128) -> Result<()> {
        if contexts > self.cap {
            Err(Error::TooLarge {
                contexts,
                cap: self.cap,
            })
        } else {
            Ok(())
        }
    }

    /// max over all full contexts of |P1 - P2|, enumerated in `a`'s
    /// declaration order.
    pub fn compare_joints(&self, a: &BayesNet, b: &BayesNet) -> Result<OracleReport> {
        let mut names_a: Vec<&str> = a.variables().iter().map(|v| v.name()).collect();
        let mut names_b: Vec<&str> = b.variables().iter().map(|v| v.name()).collect();
        names_a.sort_unstable();
        names_b.sort_unstable();
        if names_a != names_b {
            return Err(Error::MismatchedVariables);
        }
        for v in a.variables() {
            if b.variable(v.name()).map(|w| w.card()) != Some(v.card()) {
                return Err(Error::MismatchedVariables);
            }
        }
        self.guard(a.num_full_contexts())?;
        let ca = CompiledNet::new(a)?;
        let cb = CompiledNet::new(b)?;
        // slot permutation from a's layout to b's
        let to_b: Vec<usize> = ca
            .names
            .iter()
            .map(|n| b.position(n).expect("same variables"))
            .collect();
        let mut report = OracleReport {
            checks: 0,
            max_deviation: 0.0,
            failing: Vec::new(),
        };
        let mut values_b = vec![0usize; to_b.len()];
        let mut values = vec![0usize; ca.names.len()];
        loop {
            for (i, &v) in values.iter().enumerate() {
                values_b[to_b[i]] = v;
            }
            let dev = (ca.joint(&values) - cb.joint(&values_b)).abs();
            report.checks += 1;
            report.max_deviation = report.max_deviation.max(dev);
            if dev > self.tolerance && report.failing.len() < FAILURE_CAP {
                report.failing.push(
                    ca.names
                        .iter()
                        .cloned()
                        .zip(values.iter().copied())
                        .collect(),
                );
            }
            if !odometer(&mut values, &ca.cards) {
                break;
            }
        }
        Ok(report)
    }

    /// P(query | evidence) by summing the joint over all completions.
    pub fn posterior(
        &self,
        net: &BayesNet,
        evidence: &Context,
        query: &str,
    ) -> Result<Distribution> {
        let compiled = CompiledNet::new(net)?;
        let q = net
            .position(query)
            .ok_or_else(|| Error::UnknownVariable(query.to_string()))?;
        let mut fixed = vec![None; compiled.names.len()];
        for (name, value) in evidence.iter() {
            let slot = net
                .position(name)
                .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
            if value >= compiled.cards[slot] {
                return Err(Error::ValueOutOfRange {
                    variable: name.to_string(),
                    value,
                });
            }
            fixed[slot] = Some(value);
        }
        let free: u128 = compiled
            .cards
            .iter()
            .zip(&fixed)
            .filter(|(_, f)| f.is_none())
            .map(|(&c, _)| c as u128)
            .product();
        self.guard(free)?;
        let mut mass = vec![0.0; compiled.cards[q]];
        let unweighted = vec![false; compiled.names.len()];
        compiled.enumerate(&fixed, &unweighted, &mut |values, p| mass[values[q]] += p);
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroEvidenceProbability);
        }
        Ok(Distribution::computed(
            mass.into_iter().map(|m| m / total).collect(),
        ))
    }

    /// Sum of the joint over every full context; 1 for a valid network.
    pub fn total_mass(&self, net: &BayesNet) -> Result<f64> {
        self.guard(net.num_full_contexts())?;
        let compiled = CompiledNet::new(net)?;
        let fixed = vec![None; compiled.names.len()];
        let unweighted = vec![false; compiled.names.len()];
        let mut total = 0.0;
        compiled.enumerate(&fixed, &unweighted, &mut |_, p| total += p);
        Ok(total)
    }
}

/// Advances a mixed-radix counter; false once it wraps around.
pub(crate) fn odometer(values: &mut [usize], cards: &[usize]) -> bool {
    for i in (0..values.len()).rev() {
        values[i] += 1;
        if values[i] < cards[i] {
            return true;
        }
        values[i] = 0;
    }
    false
}

pub fn compare_joints(a: &BayesNet, b: &BayesNet) -> Result<OracleReport> {
    Oracle::default().compare_joints(a, b)
}
