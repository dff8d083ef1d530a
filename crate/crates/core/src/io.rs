//! File formats: JSON networks and DPN schemas, CSV evidence.
//!
//! A network document has `variables` (each `{"name", "values"}`) and
//! `cpts` (each `{"child", "parents", "tree"}` or `{"child", "parents",
//! "table"}`). A tree is `{"leaf": [p, ...]}` or `{"test": name,
//! "children": {label: tree, ...}}`; a table lists one row per parent
//! instantiation, first parent most significant. DPN documents add
//! `state`, `sensors`, `prior` and `transition`, and refer to a
//! previous-slice copy as `{"prev": "X"}`.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dpn::{prev_name, strip_prev, DpnSchema, Evidence};
use crate::error::{Error, Result};
use crate::network::{BayesNet, Conditional, Cpt, ValidationReport, Violation, ViolationKind};
use crate::trees::{CptTree, Distribution, TabularCpt, Variable};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    values: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum NameDoc {
    Plain(String),
    Prev { prev: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TreeDoc {
    Leaf {
        leaf: Vec<f64>,
    },
    Test {
        test: NameDoc,
        children: IndexMap<String, TreeDoc>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptDoc {
    child: String,
    #[serde(default)]
    parents: Vec<NameDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tree: Option<TreeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    variables: Vec<VariableDoc>,
    cpts: Vec<CptDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DpnDoc {
    variables: Vec<VariableDoc>,
    #[serde(default)]
    state: Vec<String>,
    #[serde(default)]
    sensors: Vec<String>,
    prior: Vec<CptDoc>,
    transition: Vec<CptDoc>,
}

fn syntax(e: serde_json::Error) -> Error {
    let text = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: text.strip_suffix(&suffix).unwrap_or(&text).to_string(),
    }
}

fn variables_from_docs(docs: Vec<VariableDoc>) -> Result<Vec<Variable>> {
    let mut out = Vec::with_capacity(docs.len());
    let mut report = ValidationReport::default();
    for d in docs {
        match Variable::new(d.name.clone(), d.values) {
            Ok(v) => out.push(v),
            Err(_) => report.violations.push(Violation {
                variable: d.name,
                kind: ViolationKind::BadDomain,
            }),
        }
    }
    if report.is_empty() {
        Ok(out)
    } else {
        Err(Error::Validation(report))
    }
}

/// Converts documents to CPTs, collecting every problem into one report.
struct Reader<'a> {
    variables: &'a [Variable],
    allow_prev: bool,
    report: ValidationReport,
}

impl Reader<'_> {
    fn fail(&mut self, child: &str, kind: ViolationKind) {
        self.report.violations.push(Violation {
            variable: child.to_string(),
            kind,
        });
    }

    fn name(&mut self, child: &str, doc: &NameDoc) -> Option<String> {
        match doc {
            NameDoc::Plain(s) => Some(s.clone()),
            NameDoc::Prev { prev } if self.allow_prev => Some(prev_name(prev)),
            NameDoc::Prev { prev } => {
                self.fail(child, ViolationKind::UnknownParent(prev_name(prev)));
                None
            }
        }
    }

    fn domain(&self, name: &str) -> Option<&Variable> {
        let base = if self.allow_prev {
            strip_prev(name).unwrap_or(name)
        } else {
            name
        };
        self.variables.iter().find(|v| v.name() == base)
    }

    fn distribution(&mut self, child: &str, probs: Vec<f64>) -> Option<Distribution> {
        let card = self.domain(child).map(Variable::card);
        if card.is_some_and(|c| c != probs.len()) {
            self.fail(
                child,
                ViolationKind::BadDistribution(format!(
                    "leaf has {} entries for a domain of {}",
                    probs.len(),
                    card.unwrap_or(0)
                )),
            );
            return None;
        }
        match Distribution::new(probs) {
            Ok(d) => Some(d),
            Err(e) => {
                self.fail(child, ViolationKind::BadDistribution(e.to_string()));
                None
            }
        }
    }

    fn tree(&mut self, child: &str, doc: TreeDoc) -> Option<CptTree> {
        match doc {
            TreeDoc::Leaf { leaf } => self.distribution(child, leaf).map(CptTree::leaf),
            TreeDoc::Test { test, mut children } => {
                let var = self.name(child, &test)?;
                let Some(domain) = self.domain(&var).cloned() else {
                    self.fail(child, ViolationKind::UndeclaredTest(var));
                    return None;
                };
                let mut subtrees = Vec::with_capacity(domain.card());
                let mut ok = true;
                for label in domain.values() {
                    match children.shift_remove(label) {
                        Some(sub) => match self.tree(child, sub) {
                            Some(t) => subtrees.push(t),
                            None => ok = false,
                        },
                        None => {
                            self.fail(child, ViolationKind::ArityMismatch(var.clone()));
                            return None;
                        }
                    }
                }
                if !children.is_empty() {
                    self.fail(child, ViolationKind::ArityMismatch(var));
                    return None;
                }
                ok.then(|| CptTree::node(var, subtrees))
            }
        }
    }

    fn conditional(&mut self, doc: CptDoc) -> Option<Conditional> {
        let child = doc.child;
        let parents: Vec<String> = doc
            .parents
            .iter()
            .map(|p| self.name(&child, p))
            .collect::<Option<_>>()?;
        let cpt = match (doc.tree, doc.table) {
            (Some(t), None) => Cpt::Tree(self.tree(&child, t)?),
            (None, Some(rows)) => {
                let mut cards = Vec::with_capacity(parents.len());
                for p in &parents {
                    match self.domain(p) {
                        Some(v) => cards.push(v.card()),
                        None => {
                            self.fail(&child, ViolationKind::UnknownParent(p.clone()));
                            return None;
                        }
                    }
                }
                let rows: Vec<Distribution> = rows
                    .into_iter()
                    .map(|r| self.distribution(&child, r))
                    .collect::<Option<_>>()?;
                match TabularCpt::new(parents.clone(), cards, rows) {
                    Ok(t) => Cpt::Table(t),
                    Err(e) => {
                        self.fail(&child, ViolationKind::TableMismatch(e.to_string()));
                        return None;
                    }
                }
            }
            _ => {
                self.fail(
                    &child,
                    ViolationKind::BadDistribution(
                        "CPT needs exactly one of `tree` and `table`".into(),
                    ),
                );
                return None;
            }
        };
        Some(Conditional {
            child,
            parents,
            cpt,
        })
    }

    fn conditionals(&mut self, docs: Vec<CptDoc>) -> Vec<Conditional> {
        docs.into_iter()
            .filter_map(|d| self.conditional(d))
            .collect()
    }

    fn finish<T>(self, value: T) -> Result<T> {
        if self.report.is_empty() {
            Ok(value)
        } else {
            Err(Error::Validation(self.report))
        }
    }
}

pub fn parse_network_str(text: &str) -> Result<BayesNet> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(syntax)?;
    let variables = variables_from_docs(doc.variables)?;
    let mut reader = Reader {
        variables: &variables,
        allow_prev: false,
        report: ValidationReport::default(),
    };
    let cpts = reader.conditionals(doc.cpts);
    reader.finish(())?;
    BayesNet::checked(variables, cpts)
}

pub fn parse_network_file(path: impl AsRef<Path>) -> Result<BayesNet> {
    parse_network_str(&std::fs::read_to_string(path)?)
}

pub fn parse_dpn_str(text: &str) -> Result<DpnSchema> {
    let doc: DpnDoc = serde_json::from_str(text).map_err(syntax)?;
    let variables = variables_from_docs(doc.variables)?;
    let mut reader = Reader {
        variables: &variables,
        allow_prev: false,
        report: ValidationReport::default(),
    };
    let prior = reader.conditionals(doc.prior);
    reader.allow_prev = true;
    let transition = reader.conditionals(doc.transition);
    reader.finish(())?;
    DpnSchema::new(variables.clone(), doc.state, doc.sensors, prior, transition)
}

pub fn parse_dpn_file(path: impl AsRef<Path>) -> Result<DpnSchema> {
    parse_dpn_str(&std::fs::read_to_string(path)?)
}

fn variable_doc(v: &Variable) -> VariableDoc {
    VariableDoc {
        name: v.name().to_string(),
        values: v.values().to_vec(),
    }
}

struct Writer<'a> {
    variables: &'a [Variable],
    prev_refs: bool,
}

impl Writer<'_> {
    fn name(&self, n: &str) -> NameDoc {
        match strip_prev(n) {
            Some(base) if self.prev_refs => NameDoc::Prev {
                prev: base.to_string(),
            },
            _ => NameDoc::Plain(n.to_string()),
        }
    }

    fn tree(&self, t: &CptTree) -> TreeDoc {
        match t {
            CptTree::Leaf(l) => TreeDoc::Leaf {
                leaf: l.dist.probs().to_vec(),
            },
            CptTree::Node(n) => {
                let base = if self.prev_refs {
                    strip_prev(&n.var).unwrap_or(&n.var)
                } else {
                    &n.var
                };
                let var = self
                    .variables
                    .iter()
                    .find(|v| v.name() == base)
                    .expect("tested variables are declared");
                TreeDoc::Test {
                    test: self.name(&n.var),
                    children: var
                        .values()
                        .iter()
                        .cloned()
                        .zip(n.children.iter().map(|c| self.tree(c)))
                        .collect(),
                }
            }
        }
    }

    fn conditional(&self, c: &Conditional) -> CptDoc {
        let (tree, table) = match &c.cpt {
            Cpt::Tree(t) => (Some(self.tree(t)), None),
            Cpt::Table(t) => (
                None,
                Some(t.rows().iter().map(|r| r.probs().to_vec()).collect()),
            ),
        };
        CptDoc {
            child: c.child.clone(),
            parents: c.parents.iter().map(|p| self.name(p)).collect(),
            tree,
            table,
        }
    }
}

pub fn write_network_string(net: &BayesNet) -> String {
    let w = Writer {
        variables: net.variables(),
        prev_refs: false,
    };
    let doc = NetworkDoc {
        variables: net.variables().iter().map(variable_doc).collect(),
        cpts: net
            .variables()
            .iter()
            .filter_map(|v| net.conditional(v.name()))
            .map(|c| w.conditional(c))
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("documents serialize") + "\n"
}

pub fn write_dpn_string(schema: &DpnSchema) -> String {
    let w = Writer {
        variables: schema.variables(),
        prev_refs: true,
    };
    let doc = DpnDoc {
        variables: schema.variables().iter().map(variable_doc).collect(),
        state: schema.state().to_vec(),
        sensors: schema.sensors().to_vec(),
        prior: schema
            .prior_conditionals()
            .map(|c| w.conditional(c))
            .collect(),
        transition: schema
            .transition_conditionals()
            .map(|c| w.conditional(c))
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("documents serialize") + "\n"
}

/// Reads `time,variable,value` rows (header required) with value labels.
pub fn parse_evidence_str(schema: &DpnSchema, text: &str) -> Result<Evidence> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let at = |line: u64, message: String| Error::Syntax {
        line: line as usize,
        column: 1,
        message,
    };
    let headers = reader.headers().map_err(|e| at(1, e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["time", "variable", "value"] {
        return Err(at(1, "expected header `time,variable,value`".into()));
    }
    let mut ev = Evidence::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            at(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let time: usize = record[0]
            .parse()
            .map_err(|_| at(line, format!("`{}` is not a time index", &record[0])))?;
        ev.observe_label(schema, time, &record[1], &record[2])
            .map_err(|e| at(line, e.to_string()))?;
    }
    Ok(ev)
}

pub fn parse_evidence_file(schema: &DpnSchema, path: impl AsRef<Path>) -> Result<Evidence> {
    parse_evidence_str(schema, &std::fs::read_to_string(path)?)
}

pub fn write_evidence_string(schema: &DpnSchema, evidence: &Evidence) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "variable", "value"])
        .expect("in-memory write");
    for (t, var, value) in evidence.iter() {
        let label = schema
            .variable(var)
            .and_then(|v| v.values().get(value))
            .cloned()
            .unwrap_or_else(|| value.to_string());
        w.write_record([t.to_string(), var.to_string(), label])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
