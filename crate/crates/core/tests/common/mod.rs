//! Random model generators and brute-force oracles shared by the
//! integration tests. Nothing here calls the code under test except to
//! build values and read their CPTs.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tsar::dpn::{prev_name, DpnSchema, Evidence};
use tsar::irrelevance::DnfCondition;
use tsar::{BayesNet, Conditional, Context, CptTree, Distribution, Variable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// A binary distribution with both entries in [0.05, 0.95].
pub fn random_dist(rng: &mut ChaCha8Rng, card: usize) -> Distribution {
    let raw: Vec<f64> = (0..card).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = probs[..card - 1].iter().sum();
    probs[card - 1] = 1.0 - head;
    Distribution::new(probs).expect("valid distribution")
}

/// A random tree over `candidates` in which no variable repeats on a path.
pub fn random_tree(
    rng: &mut ChaCha8Rng,
    candidates: &[Variable],
    card: usize,
    depth: usize,
    leaf_chance: f64,
) -> CptTree {
    fn rec(
        rng: &mut ChaCha8Rng,
        free: &[Variable],
        card: usize,
        depth: usize,
        leaf_chance: f64,
        top: bool,
    ) -> CptTree {
        let stop = free.is_empty() || depth == 0 || (!top && rng.gen_bool(leaf_chance));
        if stop {
            return CptTree::leaf(random_dist(rng, card));
        }
        let i = rng.gen_range(0..free.len());
        let var = &free[i];
        let rest: Vec<Variable> = free
            .iter()
            .filter(|v| v.name() != var.name())
            .cloned()
            .collect();
        let children = (0..var.card())
            .map(|_| rec(rng, &rest, card, depth - 1, leaf_chance, false))
            .collect();
        CptTree::node(var.name(), children)
    }
    rec(rng, candidates, card, depth, leaf_chance, true)
}

/// Declared parents are exactly the tested variables, in `order`.
pub fn conditional(child: &str, tree: CptTree, order: &[String]) -> Conditional {
    let tested = tree.tested_vars();
    let parents = order
        .iter()
        .filter(|p| tested.contains(*p))
        .cloned()
        .collect();
    Conditional::tree(child, parents, tree)
}

/// A network over `n` binary variables `V0..` whose CPT for `Vi` is a
/// random tree over a random subset of `V0..Vi`.
pub fn random_net(rng: &mut ChaCha8Rng, n: usize) -> BayesNet {
    loop {
        let vars: Vec<Variable> = (0..n).map(|i| Variable::binary(format!("V{i}"))).collect();
        let names: Vec<String> = vars.iter().map(|v| v.name().to_string()).collect();
        let mut cpts = Vec::new();
        for i in 0..n {
            let pool: Vec<Variable> = vars[..i]
                .iter()
                .filter(|_| rng.gen_bool(0.6))
                .cloned()
                .collect();
            let tree = random_tree(rng, &pool, 2, 3, 0.3);
            cpts.push(conditional(&names[i], tree, &names));
        }
        let net = BayesNet::checked(vars, cpts).expect("generated net is valid");
        if net.conditionals().iter().any(|c| !c.parents.is_empty()) {
            return net;
        }
    }
}

/// A random arc `(a, o)` whose reversal keeps the graph acyclic.
pub fn legal_arc(rng: &mut ChaCha8Rng, net: &BayesNet) -> (String, String) {
    let mut arcs = Vec::new();
    for c in net.conditionals() {
        for a in &c.parents {
            let other_path = net
                .children(a)
                .iter()
                .any(|k| k != &c.child && net.has_path(k, &c.child, false));
            if !other_path {
                arcs.push((a.clone(), c.child.clone()));
            }
        }
    }
    arcs.sort();
    arcs[rng.gen_range(0..arcs.len())].clone()
}

/// A random two-slice schema with `n_state` binary state variables and
/// `n_sensors` binary sensors that depend only on current state.
pub fn random_schema(rng: &mut ChaCha8Rng, n_state: usize, n_sensors: usize) -> DpnSchema {
    let state: Vec<Variable> = (0..n_state)
        .map(|i| Variable::binary(format!("S{i}")))
        .collect();
    let sensors: Vec<Variable> = (0..n_sensors)
        .map(|i| Variable::binary(format!("O{i}")))
        .collect();
    let prev: Vec<Variable> = state
        .iter()
        .map(|v| v.renamed(prev_name(v.name())))
        .collect();
    let state_names: Vec<String> = state.iter().map(|v| v.name().to_string()).collect();
    let mut order: Vec<String> = state_names.clone();
    order.extend(prev.iter().map(|v| v.name().to_string()));

    let mut prior = Vec::new();
    let mut transition = Vec::new();
    for i in 0..n_state {
        let earlier: Vec<Variable> = state[..i]
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .cloned()
            .collect();
        prior.push(conditional(
            &state_names[i],
            random_tree(rng, &earlier, 2, 2, 0.3),
            &order,
        ));
        let mut pool: Vec<Variable> = prev.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        if !pool.iter().any(|v| v.name() == prev[i].name()) && rng.gen_bool(0.7) {
            pool.push(prev[i].clone());
        }
        pool.extend(state[..i].iter().filter(|_| rng.gen_bool(0.4)).cloned());
        transition.push(conditional(
            &state_names[i],
            random_tree(rng, &pool, 2, 3, 0.25),
            &order,
        ));
    }
    for s in &sensors {
        let pool: Vec<Variable> = state
            .iter()
            .filter(|_| rng.gen_bool(0.6))
            .cloned()
            .collect();
        let tree = random_tree(rng, &pool, 2, 2, 0.2);
        prior.push(conditional(s.name(), tree.clone(), &order));
        transition.push(conditional(s.name(), tree, &order));
    }
    let mut variables = state;
    variables.extend(sensors.iter().cloned());
    DpnSchema::new(
        variables,
        state_names,
        sensors.iter().map(|v| v.name().to_string()).collect(),
        prior,
        transition,
    )
    .expect("generated schema is valid")
}

/// Random observations of every sensor at every slice up to `horizon`.
pub fn random_evidence(rng: &mut ChaCha8Rng, schema: &DpnSchema, horizon: usize) -> Evidence {
    let mut ev = Evidence::new();
    for t in 1..=horizon {
        for s in schema.sensors() {
            let card = schema.variable(s).expect("sensor is declared").card();
            ev.observe(schema, t, s, rng.gen_range(0..card))
                .expect("valid observation");
        }
    }
    ev
}

/// Every full assignment of `vars`, first variable most significant.
pub fn assignments(vars: &[Variable]) -> Vec<Context> {
    let mut out = vec![Context::new()];
    for v in vars {
        let mut next = Vec::with_capacity(out.len() * v.card());
        for ctx in &out {
            for i in 0..v.card() {
                next.push(ctx.with(v.name(), i));
            }
        }
        out = next;
    }
    out
}

/// Product of the listed CPTs of `net` under a full context.
pub fn product(net: &BayesNet, children: &[String], ctx: &Context) -> f64 {
    children
        .iter()
        .map(|c| {
            let cond = net.conditional(c).expect("listed child has a CPT");
            cond.cpt
                .eval(ctx)
                .expect("context is full")
                .get(ctx.get(c).expect("child assigned"))
        })
        .product()
}

/// Largest change in the joint of `relevant` current-slice variables when
/// `var` alone is toggled in the previous slice, over all previous-slice
/// contexts whose slice values satisfy `guard`. `None` when no context
/// satisfies the guard.
pub fn guard_toggle_deviation(
    schema: &DpnSchema,
    relevant: &[String],
    var: &str,
    guard: &DnfCondition,
) -> Option<f64> {
    let net = schema.transition();
    let others: Vec<Variable> = schema
        .variables()
        .iter()
        .filter(|v| v.name() != var)
        .cloned()
        .collect();
    let current: Vec<Variable> = schema
        .variables()
        .iter()
        .filter(|v| relevant.iter().any(|r| r == v.name()))
        .cloned()
        .collect();
    let card = schema.variable(var).expect("guarded variable").card();
    let currents = assignments(&current);
    let mut worst: Option<f64> = None;
    for slice in assignments(&others) {
        for flip in 0..card {
            // The guard is judged on the slice as the sampler saw it.
            let seen = slice.with(var, flip);
            if !guard.holds(&seen) {
                continue;
            }
            let mut prev = Context::new();
            for (k, v) in seen.iter() {
                prev.assign(prev_name(k), v);
            }
            let base: Vec<f64> = currents
                .iter()
                .map(|c| product(net, relevant, &c.union(&prev).expect("disjoint names")))
                .collect();
            for alt in 0..card {
                let p = prev.with(prev_name(var), alt);
                for (c, b) in currents.iter().zip(&base) {
                    let x = product(net, relevant, &c.union(&p).expect("disjoint names"));
                    let d = (x - b).abs();
                    worst = Some(worst.map_or(d, |w: f64| w.max(d)));
                }
            }
        }
    }
    worst
}

/// Forward pass of the likelihood-weighting proposal: every sensor is
/// clamped to its observation and every other variable is drawn from its
/// CPT. Returns, per slice, the distribution over full slice assignments
/// in `assignments(schema.variables())` order.
pub fn proposal_marginals(
    schema: &DpnSchema,
    evidence: &Evidence,
    horizon: usize,
) -> Vec<Vec<f64>> {
    let vars = schema.variables().to_vec();
    let slices = assignments(&vars);
    let names: Vec<String> = vars.iter().map(|v| v.name().to_string()).collect();
    let sampled: Vec<String> = names
        .iter()
        .filter(|n| !schema.is_sensor(n))
        .cloned()
        .collect();
    let matches = |t: usize, s: &Context| {
        schema
            .sensors()
            .iter()
            .all(|o| evidence.get(t, o).is_none_or(|v| s.get(o) == Some(v)))
    };
    let mut out = Vec::new();
    let first: Vec<f64> = slices
        .iter()
        .map(|s| {
            if matches(1, s) {
                product(schema.prior(), &sampled, s)
            } else {
                0.0
            }
        })
        .collect();
    out.push(first);
    for t in 2..=horizon {
        let last = out.last().expect("one slice at least");
        let mut next = vec![0.0; slices.len()];
        for (i, s) in slices.iter().enumerate() {
            if last[i] == 0.0 {
                continue;
            }
            let mut prev = Context::new();
            for (k, v) in s.iter() {
                prev.assign(prev_name(k), v);
            }
            for (j, s2) in slices.iter().enumerate() {
                if !matches(t, s2) {
                    continue;
                }
                let full = s2.union(&prev).expect("disjoint names");
                next[j] += last[i] * product(schema.transition(), &sampled, &full);
            }
        }
        out.push(next);
    }
    out
}

/// Probability, under the proposal, that `guard` holds at each slice,
/// using `initial` for slice 1.
pub fn guard_probabilities(
    schema: &DpnSchema,
    evidence: &Evidence,
    horizon: usize,
    initial: &DnfCondition,
    guard: &DnfCondition,
) -> Vec<f64> {
    let slices = assignments(schema.variables());
    proposal_marginals(schema, evidence, horizon)
        .iter()
        .enumerate()
        .map(|(t, m)| {
            let g = if t == 0 { initial } else { guard };
            slices
                .iter()
                .zip(m)
                .filter(|(s, _)| g.holds(s))
                .map(|(_, p)| p)
                .sum()
        })
        .collect()
}

/// Posterior of `var` at `time` by summing the unrolled joint directly.
pub fn brute_posterior(
    schema: &DpnSchema,
    evidence: &Evidence,
    horizon: usize,
    var: &str,
    time: usize,
) -> Vec<f64> {
    let slices = assignments(schema.variables());
    let names: Vec<String> = schema
        .variables()
        .iter()
        .map(|v| v.name().to_string())
        .collect();
    let card = schema.variable(var).expect("query variable").card();
    // alpha[t][i]: joint mass of slices 1..=t ending in assignment i,
    // with the query recorded separately.
    let weight = |t: usize, s: &Context| {
        schema
            .sensors()
            .iter()
            .all(|o| evidence.get(t, o).is_none_or(|v| s.get(o) == Some(v)))
    };
    let mut alpha: Vec<BTreeMap<usize, f64>> = slices
        .iter()
        .map(|s| {
            let mut m = BTreeMap::new();
            if weight(1, s) {
                let key = if time == 1 {
                    s.get(var).expect("assigned")
                } else {
                    0
                };
                m.insert(key, product(schema.prior(), &names, s));
            }
            m
        })
        .collect();
    for t in 2..=horizon {
        let mut next: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); slices.len()];
        for (i, s) in slices.iter().enumerate() {
            if alpha[i].is_empty() {
                continue;
            }
            let mut prev = Context::new();
            for (k, v) in s.iter() {
                prev.assign(prev_name(k), v);
            }
            for (j, s2) in slices.iter().enumerate() {
                if !weight(t, s2) {
                    continue;
                }
                let p = product(
                    schema.transition(),
                    &names,
                    &s2.union(&prev).expect("disjoint names"),
                );
                for (&k, &m) in &alpha[i] {
                    let key = if t == time {
                        s2.get(var).expect("assigned")
                    } else {
                        k
                    };
                    *next[j].entry(key).or_insert(0.0) += m * p;
                }
            }
        }
        alpha = next;
    }
    let mut post = vec![0.0; card];
    for m in &alpha {
        for (&k, &v) in m {
            post[k] += v;
        }
    }
    let z: f64 = post.iter().sum();
    post.iter().map(|p| p / z).collect()
}
