//! Likelihood weighting over unrolled slices, following a guarded sample
//! schedule.
//!
//! Trial `i` of a run seeded with `s` draws from ChaCha8 seeded with `s` on
//! stream `i`, so every trial is reproducible on its own and the aggregate
//! does not depend on how trials are spread over threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::compiled::{CompiledTree, Unassigned};
use crate::dpn::{strip_prev, DpnSchema, Evidence};
use crate::error::{Error, Result};
use crate::exact::Oracle;
use crate::irrelevance::{canonical_tree, SampleSchedule};
use crate::network::{BayesNet, Conditional};
use crate::trees::{Context, Distribution};

/// Trials aggregated sequentially before partial sums are combined.
const CHUNK: usize = 256;

struct Step {
    slot: usize,
    /// Disjuncts of the guard as (slot, value) literals.
    guard: Vec<Vec<(usize, usize)>>,
}

struct SliceProgram {
    steps: Vec<Step>,
    cpts: Vec<CompiledTree>,
}

/// A schema and schedule compiled to slot indices. In the transition
/// program, slots `0..n` are the current slice and `n..2n` the previous one.
pub struct Simulator {
    names: Vec<String>,
    cards: Vec<usize>,
    initial: SliceProgram,
    transition: SliceProgram,
}

impl Simulator {
    pub fn new(schema: &DpnSchema, schedule: &SampleSchedule) -> Result<Self> {
        let names: Vec<String> = schema
            .variables()
            .iter()
            .map(|v| v.name().to_string())
            .collect();
        let cards: Vec<usize> = schema.variables().iter().map(|v| v.card()).collect();
        let n = names.len();
        let slot = |name: &str| names.iter().position(|x| x == name);
        let transition_slot = |name: &str| match strip_prev(name) {
            Some(base) => slot(base).map(|i| n + i),
            None => slot(name),
        };
        let compile = |c: &Conditional, slot_of: &dyn Fn(&str) -> Option<usize>| {
            let card = cards[slot(&c.child).expect("known child")];
            CompiledTree::compile(&canonical_tree(c)?, card, slot_of)
        };
        let prior_cpts = schema
            .prior_conditionals()
            .map(|c| compile(c, &slot))
            .collect::<Result<Vec<_>>>()?;
        let transition_cpts = schema
            .transition_conditionals()
            .map(|c| compile(c, &transition_slot))
            .collect::<Result<Vec<_>>>()?;
        let steps = |entries: &[crate::irrelevance::ScheduleEntry]| -> Result<Vec<Step>> {
            let mut seen = vec![false; n];
            let mut out = Vec::with_capacity(n);
            for e in entries {
                let s =
                    slot(&e.variable).ok_or_else(|| Error::UnknownVariable(e.variable.clone()))?;
                if std::mem::replace(&mut seen[s], true) {
                    return Err(Error::Invalid(format!("`{}` scheduled twice", e.variable)));
                }
                let guard = e
                    .guard
                    .disjuncts()
                    .iter()
                    .map(|d| {
                        d.iter()
                            .map(|(k, v)| {
                                slot(k)
                                    .map(|i| (i, v))
                                    .ok_or_else(|| Error::UnknownVariable(k.to_string()))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.push(Step { slot: s, guard });
            }
            if let Some(i) = seen.iter().position(|s| !s) {
                return Err(Error::Invalid(format!(
                    "`{}` is missing from the schedule",
                    names[i]
                )));
            }
            Ok(out)
        };
        Ok(Simulator {
            initial: SliceProgram {
                steps: steps(&schedule.initial)?,
                cpts: prior_cpts,
            },
            transition: SliceProgram {
                steps: steps(&schedule.transition)?,
                cpts: transition_cpts,
            },
            names,
            cards,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn slot(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Evidence as per-slice vectors over slots, for slices 1..=horizon.
    fn clamp(&self, evidence: &Evidence, horizon: usize) -> Result<Vec<Vec<Option<usize>>>> {
        let mut out = vec![vec![None; self.names.len()]; horizon];
        for (t, var, value) in evidence.iter() {
            if t == 0 || t > horizon {
                return Err(Error::Invalid(format!(
                    "evidence for `{var}` at time {t} lies outside the horizon {horizon}"
                )));
            }
            let s = self.slot(var)?;
            if value >= self.cards[s] {
                return Err(Error::ValueOutOfRange {
                    variable: var.to_string(),
                    value,
                });
            }
            out[t - 1][s] = Some(value);
        }
        Ok(out)
    }

    fn run(&self, clamped: &[Vec<Option<usize>>], seed: u64, index: u64) -> Result<Trial> {
        let n = self.names.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut slices: Vec<Vec<Option<usize>>> = Vec::with_capacity(clamped.len());
        let mut weight = 1.0;
        for (t0, observed) in clamped.iter().enumerate() {
            let time = t0 + 1;
            let program = if time == 1 {
                &self.initial
            } else {
                &self.transition
            };
            let mut cur: Vec<Option<usize>> = vec![None; n];
            for step in &program.steps {
                let s = step.slot;
                let prev = slices.last();
                let value_of = |slot: usize| {
                    if slot < n {
                        cur[slot]
                    } else {
                        prev.and_then(|p| p[slot - n])
                    }
                };
                let unsampled = |Unassigned(slot): Unassigned| {
                    let (variable, at) = if slot < n {
                        (slot, time)
                    } else {
                        (slot - n, time - 1)
                    };
                    Error::UnsampledRead {
                        variable: self.names[variable].clone(),
                        time: at,
                    }
                };
                if let Some(v) = observed[s] {
                    let p = program.cpts[s].eval(value_of).map_err(unsampled)?;
                    weight *= p[v];
                    cur[s] = Some(v);
                    continue;
                }
                let skip = step
                    .guard
                    .iter()
                    .any(|d| d.iter().all(|&(g, v)| cur[g] == Some(v)));
                if skip {
                    continue;
                }
                let p = program.cpts[s].eval(value_of).map_err(unsampled)?;
                cur[s] = Some(draw(p, rng.gen::<f64>()));
            }
            slices.push(cur);
        }
        Ok(Trial {
            slices,
            weight,
            seed,
            stream: index,
        })
    }

    /// One trial over `horizon` slices.
    pub fn run_trial(
        &self,
        evidence: &Evidence,
        horizon: usize,
        seed: u64,
        index: u64,
    ) -> Result<Trial> {
        let clamped = self.clamp(evidence, horizon)?;
        self.run(&clamped, seed, index)
    }

    /// Aggregates `trials` trials of the marginal of `query` at `time`.
    pub fn estimate(
        &self,
        evidence: &Evidence,
        query: &str,
        time: usize,
        horizon: usize,
        trials: usize,
        seed: u64,
    ) -> Result<SimulationEstimate> {
        if time == 0 || time > horizon {
            return Err(Error::Invalid(format!(
                "query time {time} lies outside 1..={horizon}"
            )));
        }
        let q = self.slot(query)?;
        let clamped = self.clamp(evidence, horizon)?;
        let blank = || Tally::new(self.cards[q], horizon, self.names.len());
        let chunks: Vec<Tally> = (0..trials.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut tally = blank();
                for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                    let trial = self.run(&clamped, seed, i as u64)?;
                    let value = trial.slices[time - 1][q].ok_or_else(|| Error::UnsampledQuery {
                        variable: query.to_string(),
                        time,
                    })?;
                    tally.add(&trial, value);
                }
                Ok(tally)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = blank();
        for c in &chunks {
            total.merge(c);
        }
        if total.weight <= 0.0 {
            return Err(Error::AllZeroWeights);
        }
        Ok(SimulationEstimate {
            variable: query.to_string(),
            time,
            horizon,
            trials,
            seed,
            variables: self.names.clone(),
            mass: total.mass,
            sq_mass: total.sq_mass,
            total_weight: total.weight,
            total_sq_weight: total.sq_weight,
            skipped: total.skipped,
        })
    }

    /// As [`Simulator::estimate`] on a pool of `threads` workers.
    #[allow(clippy::too_many_arguments)]
    pub fn estimate_on(
        &self,
        threads: usize,
        evidence: &Evidence,
        query: &str,
        time: usize,
        horizon: usize,
        trials: usize,
        seed: u64,
    ) -> Result<SimulationEstimate> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| self.estimate(evidence, query, time, horizon, trials, seed))
    }
}

/// Inverse-CDF draw over the canonical value order.
fn draw(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &q) in p.iter().enumerate() {
        acc += q;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the last partial sum
    p.iter().rposition(|&q| q > 0.0).unwrap_or(p.len() - 1)
}

/// One weighted trajectory; `None` marks a skipped variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// `slices[t - 1][i]` is variable `i` at slice `t`.
    pub slices: Vec<Vec<Option<usize>>>,
    pub weight: f64,
    pub seed: u64,
    pub stream: u64,
}

struct Tally {
    mass: Vec<f64>,
    sq_mass: Vec<f64>,
    weight: f64,
    sq_weight: f64,
    skipped: Vec<Vec<u64>>,
}

impl Tally {
    fn new(card: usize, horizon: usize, vars: usize) -> Self {
        Tally {
            mass: vec![0.0; card],
            sq_mass: vec![0.0; card],
            weight: 0.0,
            sq_weight: 0.0,
            skipped: vec![vec![0; vars]; horizon],
        }
    }

    fn add(&mut self, trial: &Trial, value: usize) {
        let w = trial.weight;
        self.mass[value] += w;
        self.sq_mass[value] += w * w;
        self.weight += w;
        self.sq_weight += w * w;
        for (counts, slice) in self.skipped.iter_mut().zip(&trial.slices) {
            for (c, v) in counts.iter_mut().zip(slice) {
                if v.is_none() {
                    *c += 1;
                }
            }
        }
    }

    fn merge(&mut self, other: &Tally) {
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        for (a, b) in self.sq_mass.iter_mut().zip(&other.sq_mass) {
            *a += b;
        }
        self.weight += other.weight;
        self.sq_weight += other.sq_weight;
        for (a, b) in self.skipped.iter_mut().zip(&other.skipped) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationEstimate {
    pub variable: String,
    pub time: usize,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    /// Slice variables in declaration order, indexing `skipped`.
    pub variables: Vec<String>,
    /// Total weight of trials ending in each query value.
    pub mass: Vec<f64>,
    /// Sum of squared weights per query value.
    pub sq_mass: Vec<f64>,
    pub total_weight: f64,
    pub total_sq_weight: f64,
    /// `skipped[t - 1][i]`: trials in which variable `i` was skipped at `t`.
    pub skipped: Vec<Vec<u64>>,
}

impl SimulationEstimate {
    pub fn distribution(&self) -> Distribution {
        Distribution::computed(self.mass.iter().map(|m| m / self.total_weight).collect())
    }

    /// Standard error of each normalized estimate (delta method).
    pub fn standard_errors(&self) -> Vec<f64> {
        let w2 = self.total_weight * self.total_weight;
        self.mass
            .iter()
            .zip(&self.sq_mass)
            .map(|(&m, &s)| {
                let p = m / self.total_weight;
                let var = s * (1.0 - p) * (1.0 - p) + (self.total_sq_weight - s) * p * p;
                (var / w2).sqrt()
            })
            .collect()
    }

    pub fn effective_sample_size(&self) -> f64 {
        if self.total_sq_weight == 0.0 {
            0.0
        } else {
            self.total_weight * self.total_weight / self.total_sq_weight
        }
    }

    fn index(&self, variable: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == variable)
            .ok_or_else(|| Error::UnknownVariable(variable.to_string()))
    }

    /// Fraction of trials that skipped `variable` at slice `t`.
    pub fn skip_rate_at(&self, variable: &str, t: usize) -> Result<f64> {
        let i = self.index(variable)?;
        let row = self
            .skipped
            .get(t.wrapping_sub(1))
            .ok_or_else(|| Error::Invalid(format!("slice {t} outside the horizon")))?;
        Ok(row[i] as f64 / self.trials as f64)
    }

    /// Fraction of (trial, slice) pairs in which `variable` was skipped.
    pub fn skip_rate(&self, variable: &str) -> Result<f64> {
        let i = self.index(variable)?;
        let total: u64 = self.skipped.iter().map(|r| r[i]).sum();
        Ok(total as f64 / (self.trials * self.horizon) as f64)
    }
}

/// P(query | evidence) by enumeration on a flat network.
pub fn exact_query(net: &BayesNet, evidence: &Context, query: &str) -> Result<Distribution> {
    Oracle::default().posterior(net, evidence, query)
}
