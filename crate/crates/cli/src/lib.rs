//! The `tsar` command line: argument parsing, subcommands and reports.
//!
//! Every report is a JSON document holding the tool version, the resolved
//! configuration and the results. Errors go to stderr as a JSON record and
//! select the exit status: 1 usage, 2 parse or I/O, 3 validation, 4 size
//! guard, 5 internal assertion.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use tsar::dpn::{integrate_evidence, DpnSchema, Evidence};
use tsar::exact::Oracle;
use tsar::irrelevance::{analyze, DnfCondition, SampleSchedule, ScheduleEntry};
use tsar::reversal::{reverse_arc_tabular, reverse_arc_tree, verify_csi, ReversalStats};
use tsar::simulate::Simulator;
use tsar::{io, BayesNet, Context, Distribution, Error};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Parser, Serialize)]
#[command(
    name = "tsar",
    version,
    about = "Tree-structured arc reversal and irrelevance-aware simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Reverse one arc of a network.
    Reverse(ReverseArgs),
    /// Reverse in-slice arcs into every sensor of a DPN.
    Integrate(IntegrateArgs),
    /// Build the guarded sample schedule of an evidence-integrated DPN.
    Schedule(ScheduleArgs),
    /// Likelihood-weighted estimate of a DPN query.
    Simulate(SimulateArgs),
    /// Exact posterior by enumeration.
    Exact(ExactArgs),
    /// Compare two networks and check the independences their trees claim.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the tabular part of the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Pretty-printed JSON.
    Json,
    /// One `path: value` line per scalar.
    Text,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReverseArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Tail of the arc to reverse.
    #[arg(long)]
    pub from: String,
    /// Head of the arc to reverse.
    #[arg(long)]
    pub to: String,
    /// Use dense tables instead of trees.
    #[arg(long)]
    pub tabular: bool,
    /// Where to write the reversed network.
    #[arg(long)]
    pub net_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IntegrateArgs {
    #[arg(long)]
    pub dpn: PathBuf,
    /// Where to write the integrated schema.
    #[arg(long)]
    pub net_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub dpn: PathBuf,
    /// Variables of interest, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub interest: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub dpn: PathBuf,
    /// CSV with a `time,variable,value` header.
    #[arg(long)]
    pub evidence: Option<PathBuf>,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    /// Query as `VAR@T`.
    #[arg(long, value_parser = parse_query)]
    pub query: Query,
    /// Variables of interest; defaults to the query variable.
    #[arg(long, value_delimiter = ',')]
    pub interest: Vec<String>,
    /// Sample every variable in every slice.
    #[arg(long)]
    pub no_guards: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactArgs {
    /// A flat network; query a plain variable name.
    #[arg(long, conflicts_with = "dpn", required_unless_present = "dpn")]
    pub net: Option<PathBuf>,
    /// A DPN, unrolled to `--horizon`; query as `VAR@T`.
    #[arg(long, requires = "horizon")]
    pub dpn: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Evidence CSV for a DPN.
    #[arg(long, requires = "dpn")]
    pub evidence: Option<PathBuf>,
    /// Evidence for a flat network as `X=value,Y=value`.
    #[arg(long, value_delimiter = ',', conflicts_with = "dpn")]
    pub given: Vec<String>,
    #[arg(long)]
    pub query: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// A network that should define the same joint distribution.
    #[arg(long)]
    pub against: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Query {
    pub variable: String,
    pub time: usize,
}

pub fn parse_query(s: &str) -> Result<Query, String> {
    let (variable, time) = s
        .rsplit_once('@')
        .ok_or_else(|| format!("expected VAR@T, got `{s}`"))?;
    let time: usize = time
        .parse()
        .map_err(|_| format!("`{time}` is not a time index"))?;
    if variable.is_empty() || time == 0 {
        return Err(format!("expected VAR@T with T >= 1, got `{s}`"));
    }
    Ok(Query {
        variable: variable.to_string(),
        time,
    })
}

/// A failed run: exit status plus a machine-readable record.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    /// Report to write despite the failure.
    pub report: Option<Value>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind: "usage",
            message: message.into(),
            report: None,
        }
    }

    pub fn record(&self) -> Value {
        json!({"error": {"kind": self.kind, "message": self.message, "exit_code": self.code}})
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Syntax { .. } => (2, "syntax"),
            Error::Io(_) => (2, "io"),
            Error::TooLarge { .. } => (4, "too_large"),
            Error::UnsampledRead { .. }
            | Error::MissingAssignment(_)
            | Error::InvalidLocator(_) => (5, "internal"),
            _ => (3, "validation"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
            report: None,
        }
    }
}

type Outcome = Result<Value, Failure>;

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::from(Error::Io(e)))
}

fn header(config: &impl Serialize) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), json!("tsar"));
    m.insert("version".into(), json!(VERSION));
    m.insert(
        "config".into(),
        serde_json::to_value(config).expect("config serializes"),
    );
    m
}

fn labels(vars: &[tsar::Variable], ctx: &Context) -> Value {
    Value::Object(
        ctx.iter()
            .map(|(k, v)| {
                let label = vars
                    .iter()
                    .find(|x| x.name() == k)
                    .and_then(|x| x.values().get(v))
                    .cloned()
                    .unwrap_or_else(|| v.to_string());
                (k.to_string(), json!(label))
            })
            .collect(),
    )
}

fn stats_json(s: &ReversalStats) -> Value {
    json!({
        "eq1_evals": s.eq1_evals,
        "eq2_evals": s.eq2_evals,
        "o_leaves_retained": s.o_leaves_retained,
        "o_leaves": s.o_leaves,
        "a_leaves": s.a_leaves,
        "explicit_computations": s.explicit_computations(),
        "tabular_o_entries": s.tabular_o_entries,
        "tabular_a_entries": s.tabular_a_entries,
        "tabular_entries": s.tabular_entries(),
    })
}

const STAT_COLUMNS: [&str; 7] = [
    "eq1_evals",
    "eq2_evals",
    "o_leaves_retained",
    "o_leaves",
    "a_leaves",
    "tabular_o_entries",
    "tabular_a_entries",
];

fn stat_values(s: &ReversalStats) -> [usize; 7] {
    [
        s.eq1_evals,
        s.eq2_evals,
        s.o_leaves_retained,
        s.o_leaves,
        s.a_leaves,
        s.tabular_o_entries,
        s.tabular_a_entries,
    ]
}

fn distribution_json(var: &tsar::Variable, d: &Distribution) -> Value {
    Value::Object(
        var.values()
            .iter()
            .zip(d.probs())
            .map(|(l, p)| (l.clone(), json!(p)))
            .collect(),
    )
}

fn reverse(args: &ReverseArgs, config: &Command) -> Outcome {
    let net = io::parse_network_file(&args.net)?;
    let mut report = header(config);
    let (out, stats) = if args.tabular {
        let out = reverse_arc_tabular(&net, &args.from, &args.to)?;
        (out, None)
    } else {
        let r = reverse_arc_tree(&net, &args.from, &args.to)?;
        let unreachable: Vec<Value> = r
            .unreachable
            .iter()
            .map(|c| labels(net.variables(), c))
            .collect();
        report.insert("unreachable".into(), Value::Array(unreachable));
        (r.net, Some(r.stats))
    };
    let sizes = json!({
        args.to.clone(): out.conditional(&args.to).map(|c| c.cpt.size()),
        args.from.clone(): out.conditional(&args.from).map(|c| c.cpt.size()),
    });
    let parents = json!({
        args.to.clone(): out.parents(&args.to),
        args.from.clone(): out.parents(&args.from),
    });
    report.insert(
        "method".into(),
        json!(if args.tabular { "tabular" } else { "tree" }),
    );
    report.insert("parents".into(), parents);
    report.insert("cpt_sizes".into(), sizes);
    if let Some(s) = &stats {
        report.insert("stats".into(), stats_json(s));
    }
    if let Some(path) = &args.output.csv {
        let mut text = String::from("statistic,value\n");
        match &stats {
            Some(s) => {
                for (k, v) in STAT_COLUMNS.iter().zip(stat_values(s)) {
                    let _ = writeln!(text, "{k},{v}");
                }
            }
            None => {
                for v in [&args.to, &args.from] {
                    let size = out.conditional(v).map_or(0, |c| c.cpt.size());
                    let _ = writeln!(text, "{v}_entries,{size}");
                }
            }
        }
        write_file(path, &text)?;
    }
    if let Some(path) = &args.net_out {
        write_file(path, &io::write_network_string(&out))?;
    }
    Ok(Value::Object(report))
}

fn integrate(args: &IntegrateArgs, config: &Command) -> Outcome {
    let schema = io::parse_dpn_file(&args.dpn)?;
    let int = integrate_evidence(&schema)?;
    let mut report = header(config);
    let steps: Vec<Value> = int
        .steps
        .iter()
        .map(|s| {
            json!({
                "net": s.net.as_str(),
                "sensor": s.sensor,
                "parent": s.parent,
                "stats": stats_json(&s.stats),
            })
        })
        .collect();
    let explicit: usize = int
        .steps
        .iter()
        .map(|s| s.stats.explicit_computations())
        .sum();
    let tabular: usize = int.steps.iter().map(|s| s.stats.tabular_entries()).sum();
    report.insert("steps".into(), Value::Array(steps));
    report.insert(
        "totals".into(),
        json!({"reversals": int.steps.len(), "explicit_computations": explicit, "tabular_entries": tabular}),
    );
    let sizes: Map<String, Value> = int
        .schema
        .transition_conditionals()
        .map(|c| (c.child.clone(), json!(c.cpt.size())))
        .collect();
    report.insert("transition_cpt_sizes".into(), Value::Object(sizes));
    if let Some(path) = &args.output.csv {
        let mut text = format!("net,sensor,parent,{}\n", STAT_COLUMNS.join(","));
        for s in &int.steps {
            let values: Vec<String> = stat_values(&s.stats).iter().map(usize::to_string).collect();
            let _ = writeln!(
                text,
                "{},{},{},{}",
                s.net.as_str(),
                s.sensor,
                s.parent,
                values.join(",")
            );
        }
        write_file(path, &text)?;
    }
    if let Some(path) = &args.net_out {
        write_file(path, &io::write_dpn_string(&int.schema))?;
    }
    Ok(Value::Object(report))
}

fn entries_json(schema: &DpnSchema, entries: &[ScheduleEntry]) -> Value {
    Value::Array(
        entries
            .iter()
            .map(|e| json!({"variable": e.variable, "guard": e.guard.render(schema)}))
            .collect(),
    )
}

fn schedule_json(schema: &DpnSchema, s: &SampleSchedule) -> Value {
    json!({
        "initial": entries_json(schema, &s.initial),
        "transition": entries_json(schema, &s.transition),
        "warnings": s.warnings,
    })
}

fn check_interest(schema: &DpnSchema, interest: &[String]) -> Result<(), Failure> {
    for v in interest {
        if schema.variable(v).is_none() {
            return Err(Error::UnknownVariable(v.clone()).into());
        }
    }
    Ok(())
}

fn schedule(args: &ScheduleArgs, config: &Command) -> Outcome {
    let schema = integrate_evidence(&io::parse_dpn_file(&args.dpn)?)?.schema;
    check_interest(&schema, &args.interest)?;
    let a = analyze(&schema, &args.interest)?;
    let mut report = header(config);
    report.insert("relevant".into(), json!(a.relevant));
    report.insert("slice_order".into(), json!(a.order));
    let render = |c: &DnfCondition| c.render(&schema);
    let conditions: Vec<Value> = a
        .conditions
        .iter()
        .map(|c| {
            let per_graph: Vec<Value> = c
                .per_graph
                .iter()
                .map(|(g, d)| json!({"consumer": g, "condition": render(d)}))
                .collect();
            json!({
                "variable": c.variable,
                "per_graph": per_graph,
                "condition": render(&c.condition),
                "guard": render(&a.guards[&c.variable]),
                "initial_guard": render(&a.initial_guards[&c.variable]),
            })
        })
        .collect();
    report.insert("conditions".into(), Value::Array(conditions));
    report.insert("schedule".into(), schedule_json(&schema, &a.schedule));
    if let Some(path) = &args.output.csv {
        let mut text = String::from("slices,position,variable,guard\n");
        for (which, entries) in [
            ("initial", &a.schedule.initial),
            ("transition", &a.schedule.transition),
        ] {
            for (i, e) in entries.iter().enumerate() {
                let _ = writeln!(
                    text,
                    "{which},{i},{},\"{}\"",
                    e.variable,
                    e.guard.render(&schema)
                );
            }
        }
        write_file(path, &text)?;
    }
    Ok(Value::Object(report))
}

fn load_evidence(schema: &DpnSchema, path: Option<&PathBuf>) -> Result<Evidence, Failure> {
    Ok(match path {
        Some(p) => io::parse_evidence_file(schema, p)?,
        None => Evidence::new(),
    })
}

fn simulate(args: &SimulateArgs, config: &Command) -> Outcome {
    let original = io::parse_dpn_file(&args.dpn)?;
    let evidence = load_evidence(&original, args.evidence.as_ref())?;
    let schema = integrate_evidence(&original)?.schema;
    let interest = if args.interest.is_empty() {
        vec![args.query.variable.clone()]
    } else {
        args.interest.clone()
    };
    check_interest(&schema, &interest)?;
    let plan = if args.no_guards {
        SampleSchedule::unguarded(&schema)?
    } else {
        analyze(&schema, &interest)?.schedule
    };
    let sim = Simulator::new(&schema, &plan)?;
    let q = &args.query;
    let est = match args.threads {
        Some(0) => return Err(Failure::usage("--threads must be positive")),
        Some(n) => sim.estimate_on(
            n,
            &evidence,
            &q.variable,
            q.time,
            args.horizon,
            args.trials,
            args.seed,
        )?,
        None => sim.estimate(
            &evidence,
            &q.variable,
            q.time,
            args.horizon,
            args.trials,
            args.seed,
        )?,
    };
    let var = schema
        .variable(&q.variable)
        .expect("checked by the estimate");
    let mut report = header(config);
    let ses: Map<String, Value> = var
        .values()
        .iter()
        .zip(est.standard_errors())
        .map(|(l, s)| (l.clone(), json!(s)))
        .collect();
    let mass: Map<String, Value> = var
        .values()
        .iter()
        .zip(&est.mass)
        .map(|(l, m)| (l.clone(), json!(m)))
        .collect();
    report.insert(
        "estimate".into(),
        json!({
            "variable": q.variable,
            "time": q.time,
            "distribution": distribution_json(var, &est.distribution()),
            "standard_errors": ses,
            "weighted_mass": mass,
            "total_weight": est.total_weight,
            "effective_sample_size": est.effective_sample_size(),
            "trials": est.trials,
        }),
    );
    let mut skip = Map::new();
    let mut per_slice = Vec::new();
    for v in &est.variables {
        skip.insert(v.clone(), json!(est.skip_rate(v)?));
    }
    for t in 1..=args.horizon {
        let mut row = Map::new();
        for v in &est.variables {
            row.insert(v.clone(), json!(est.skip_rate_at(v, t)?));
        }
        per_slice.push(json!({"slice": t, "skip_rates": row}));
    }
    report.insert("skip_rates".into(), Value::Object(skip));
    report.insert("skip_rates_by_slice".into(), Value::Array(per_slice));
    report.insert("schedule".into(), schedule_json(&schema, &plan));
    if let Some(path) = &args.output.csv {
        let mut text = String::from("slice,variable,skipped,skip_rate\n");
        for t in 1..=args.horizon {
            for (i, v) in est.variables.iter().enumerate() {
                let _ = writeln!(
                    text,
                    "{t},{v},{},{}",
                    est.skipped[t - 1][i],
                    est.skip_rate_at(v, t)?
                );
            }
        }
        write_file(path, &text)?;
    }
    Ok(Value::Object(report))
}

fn parse_given(net: &BayesNet, given: &[String]) -> Result<Context, Failure> {
    let mut ctx = Context::new();
    for item in given {
        let (name, label) = item
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("expected VAR=value, got `{item}`")))?;
        let var = net.require(name)?;
        let value = var.value_index(label).ok_or_else(|| Error::UnknownValue {
            variable: name.to_string(),
            value: label.to_string(),
        })?;
        ctx.assign(name, value);
    }
    Ok(ctx)
}

fn exact(args: &ExactArgs, config: &Command) -> Outcome {
    let (net, evidence, query) = match (&args.net, &args.dpn) {
        (Some(path), None) => {
            let net = io::parse_network_file(path)?;
            let ev = parse_given(&net, &args.given)?;
            (net, ev, args.query.clone())
        }
        (None, Some(path)) => {
            let schema = io::parse_dpn_file(path)?;
            let horizon = args
                .horizon
                .ok_or_else(|| Failure::usage("--dpn needs --horizon"))?;
            let q = parse_query(&args.query).map_err(Failure::usage)?;
            if q.time > horizon {
                return Err(Failure::usage(format!(
                    "query time {} exceeds the horizon {horizon}",
                    q.time
                )));
            }
            Oracle::default().guard(schema.num_full_contexts(horizon))?;
            let ev = load_evidence(&schema, args.evidence.as_ref())?;
            if ev.max_time() > horizon {
                return Err(Failure::usage("evidence lies beyond the horizon"));
            }
            let net = schema.unroll(horizon)?;
            (
                net,
                ev.unrolled(horizon),
                tsar::dpn::slice_name(&q.variable, q.time),
            )
        }
        _ => return Err(Failure::usage("give exactly one of --net and --dpn")),
    };
    let posterior = Oracle::default().posterior(&net, &evidence, &query)?;
    let var = net.require(&query)?;
    let mut report = header(config);
    report.insert("query".into(), json!(query));
    report.insert("evidence".into(), labels(net.variables(), &evidence));
    report.insert("distribution".into(), distribution_json(var, &posterior));
    if let Some(path) = &args.output.csv {
        let mut text = String::from("value,probability\n");
        for (l, p) in var.values().iter().zip(posterior.probs()) {
            let _ = writeln!(text, "{l},{p}");
        }
        write_file(path, &text)?;
    }
    Ok(Value::Object(report))
}

fn csi_json(net: &BayesNet) -> Result<(Value, bool), Failure> {
    let mut out = Map::new();
    let mut ok = true;
    for c in net.conditionals() {
        if c.cpt.as_tree().is_none() {
            continue;
        }
        let r = verify_csi(net, &c.child)?;
        ok &= r.is_empty();
        let violations: Vec<Value> = r
            .violations
            .iter()
            .map(|v| {
                json!({
                    "branch": labels(net.variables(), &v.branch),
                    "witness": labels(net.variables(), &v.witness),
                    "deviation": v.deviation,
                })
            })
            .collect();
        out.insert(
            c.child.clone(),
            json!({"checks": r.checks, "max_deviation": r.max_deviation, "violations": violations}),
        );
    }
    Ok((Value::Object(out), ok))
}

fn verify(args: &VerifyArgs, config: &Command) -> Outcome {
    let net = io::parse_network_file(&args.net)?;
    let mut report = header(config);
    let mut ok = true;
    let (csi, csi_ok) = csi_json(&net)?;
    ok &= csi_ok;
    report.insert("csi".into(), csi);
    if let Some(path) = &args.against {
        let other = io::parse_network_file(path)?;
        let r = Oracle::default().compare_joints(&net, &other)?;
        ok &= r.passed();
        let failing: Vec<Value> = r
            .failing
            .iter()
            .map(|c| labels(net.variables(), c))
            .collect();
        report.insert(
            "joint".into(),
            json!({
                "checks": r.checks,
                "max_deviation": r.max_deviation,
                "tolerance": tsar::TOLERANCE,
                "failing": failing,
            }),
        );
        let (csi, csi_ok) = csi_json(&other)?;
        ok &= csi_ok;
        report.insert("against_csi".into(), csi);
    }
    report.insert("passed".into(), json!(ok));
    if let Some(path) = &args.output.csv {
        let mut text = String::from("check,max_deviation,passed\n");
        if let Some(j) = report.get("joint") {
            let _ = writeln!(
                text,
                "joint,{},{}",
                j["max_deviation"],
                j["failing"].as_array().is_some_and(|f| f.is_empty())
            );
        }
        for key in ["csi", "against_csi"] {
            if let Some(Value::Object(m)) = report.get(key) {
                for (v, r) in m {
                    let passed = r["violations"].as_array().is_some_and(|f| f.is_empty());
                    let _ = writeln!(text, "{key}:{v},{},{passed}", r["max_deviation"]);
                }
            }
        }
        write_file(path, &text)?;
    }
    let report = Value::Object(report);
    if ok {
        Ok(report)
    } else {
        Err(Failure {
            code: 3,
            kind: "verification",
            message: "verification failed".into(),
            report: Some(report),
        })
    }
}

fn output_of(c: &Command) -> &OutputArgs {
    match c {
        Command::Reverse(a) => &a.output,
        Command::Integrate(a) => &a.output,
        Command::Schedule(a) => &a.output,
        Command::Simulate(a) => &a.output,
        Command::Exact(a) => &a.output,
        Command::Verify(a) => &a.output,
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let c = &cli.command;
    match c {
        Command::Reverse(a) => reverse(a, c),
        Command::Integrate(a) => integrate(a, c),
        Command::Schedule(a) => schedule(a, c),
        Command::Simulate(a) => simulate(a, c),
        Command::Exact(a) => exact(a, c),
        Command::Verify(a) => verify(a, c),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(xs) if !xs.is_empty() => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::String(s) => {
            let _ = writeln!(out, "{prefix}: {s}");
        }
        other => {
            let _ = writeln!(out, "{prefix}: {other}");
        }
    }
}

pub fn render(report: &Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("reports serialize") + "\n",
        Format::Text => {
            let mut out = String::new();
            flatten("", report, &mut out);
            out
        }
    }
}

fn emit(
    report: &Value,
    output: &OutputArgs,
    stdout: &mut dyn std::io::Write,
) -> Result<(), Failure> {
    let text = render(report, output.format);
    match &output.out {
        Some(path) => write_file(path, &text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::from(Error::Io(e))),
    }
}

/// Runs the command line and returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    let f =
                        Failure::usage(text.lines().next().unwrap_or("usage error").to_string());
                    let _ = writeln!(stderr, "{}", f.record());
                    1
                }
            };
        }
    };
    let output = output_of(&cli.command);
    let result = dispatch(&cli).and_then(|report| emit(&report, output, stdout));
    match result {
        Ok(()) => 0,
        Err(f) => {
            if let Some(report) = &f.report {
                let _ = emit(report, output, stdout);
            }
            let _ = writeln!(stderr, "{}", f.record());
            f.code
        }
    }
}
