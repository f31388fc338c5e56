//! JSON scenario files and CSV traces.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::approximation::ApproximationKind;
use crate::builtins;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::ode::{LinearSystemModel, Model};
use crate::orchestration::{Convergence, ConvergenceMode, OrchestratorKind, Trace};
use crate::scenario::{Granularity, Scenario};
use crate::solvers::{IterationConfig, StepperKind};
use crate::units::{Reactivity, SimulationUnit, UnitConfig};
use crate::Scalar;

/// Inline linear matrices. Missing `B`/`D` mean no inputs, missing `C` means
/// the state is the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
    pub x0: Vec<f64>,
}

/// Built-in model with optional initial conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinSpec {
    pub builtin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Named(String),
    Builtin(BuiltinSpec),
    Linear(LinearSpec),
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationSpec {
    pub epsilon: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSpec {
    pub model: ModelSpec,
    pub solver: StepperKind,
    pub h: f64,
    #[serde(default)]
    pub approximation: ApproximationKind,
    #[serde(default, skip_serializing_if = "is_false")]
    pub input_reactive: bool,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub output_reactive: bool,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub rollbackable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<IterationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrchestratorName {
    #[default]
    GaussSeidel,
    Jacobi,
    IterativeGaussSeidel,
    IterativeJacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Implicit,
    SemiImplicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrchestratorSpec {
    pub kind: OrchestratorName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSpec>,
}

/// A scenario as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub units: BTreeMap<String, UnitSpec>,
    #[serde(default)]
    pub connections: Vec<ConnectionSpec>,
    #[serde(rename = "H")]
    pub step: f64,
    #[serde(rename = "T")]
    pub end: f64,
    #[serde(default)]
    pub orchestrator: OrchestratorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "is_vector")]
    pub granularity: Granularity,
}

fn is_vector(g: &Granularity) -> bool {
    *g == Granularity::Vector
}

fn rows<T: Scalar>(key: &str, r: &[Vec<f64>]) -> Result<Matrix<T>> {
    let converted: Vec<Vec<T>> = r
        .iter()
        .map(|row| row.iter().map(|&v| T::lit(v)).collect())
        .collect();
    Matrix::from_rows(&converted).map_err(|e| Error::Parse(format!("{key}: {e}")))
}

fn to_rows<T: Scalar>(m: &Matrix<T>) -> Vec<Vec<f64>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(Scalar::as_f64).collect())
        .collect()
}

impl LinearSpec {
    fn build<T: Scalar>(&self, key: &str) -> Result<LinearSystemModel<T>> {
        let a: Matrix<T> = rows(&format!("{key}.A"), &self.a)?;
        let n = a.rows();
        let b = match &self.b {
            Some(b) if !b.is_empty() => rows(&format!("{key}.B"), b)?,
            _ => Matrix::zeros(n, 0),
        };
        let c = match &self.c {
            Some(c) => rows(&format!("{key}.C"), c)?,
            None => Matrix::identity(n),
        };
        let d = match &self.d {
            Some(d) if !d.is_empty() => rows(&format!("{key}.D"), d)?,
            _ => Matrix::zeros(c.rows(), b.cols()),
        };
        let x0 = Vector::new(self.x0.iter().map(|&v| T::lit(v)).collect());
        LinearSystemModel::new(a, b, c, d, x0).map_err(|e| Error::Parse(format!("{key}: {e}")))
    }

    fn from_model<T: Scalar>(m: &LinearSystemModel<T>) -> Self {
        let b = m.b.cols() > 0;
        LinearSpec {
            a: to_rows(&m.a),
            b: b.then(|| to_rows(&m.b)),
            c: Some(to_rows(&m.c)),
            d: b.then(|| to_rows(&m.d)),
            x0: m.x0.iter().map(|v| v.as_f64()).collect(),
        }
    }
}

impl ModelSpec {
    fn build<T: Scalar>(&self, key: &str) -> Result<Model<T>> {
        let unknown = |name: &str| Error::Parse(format!("{key}: unknown builtin model {name:?}"));
        match self {
            ModelSpec::Named(name) => builtins::model_by_name(name).map_err(|_| unknown(name)),
            ModelSpec::Linear(spec) => Ok(Model::Linear(spec.build(key)?)),
            ModelSpec::Builtin(spec) => {
                let mut model = builtins::model_by_name::<T>(&spec.builtin)
                    .map_err(|_| unknown(&spec.builtin))?;
                let conv = |v: &[f64]| Vector::new(v.iter().map(|&x| T::lit(x)).collect());
                let bad = |what: &str, n: usize| {
                    Error::Parse(format!("{key}.{what}: expected {n} entries"))
                };
                match &mut model {
                    Model::SecondOrder(m) => {
                        if let Some(x0) = &spec.x0 {
                            if x0.len() != m.dim {
                                return Err(bad("x0", m.dim));
                            }
                            m.x0 = conv(x0);
                        }
                        if let Some(v0) = &spec.v0 {
                            if v0.len() != m.dim {
                                return Err(bad("v0", m.dim));
                            }
                            m.v0 = conv(v0);
                        }
                    }
                    Model::Linear(m) => {
                        if spec.v0.is_some() {
                            return Err(Error::Parse(format!(
                                "{key}.v0: only second-order models take v0"
                            )));
                        }
                        if let Some(x0) = &spec.x0 {
                            if x0.len() != m.state_dim() {
                                return Err(bad("x0", m.state_dim()));
                            }
                            m.x0 = conv(x0);
                        }
                    }
                    Model::General(_) => {}
                }
                Ok(model)
            }
        }
    }
}

impl UnitSpec {
    fn build<T: Scalar>(&self, name: &str) -> Result<SimulationUnit<T>> {
        let key = format!("units.{name}");
        let model = self.model.build(&format!("{key}.model"))?;
        let mut cfg = UnitConfig::new(self.solver, T::lit(self.h))
            .approximation(self.approximation)
            .reactivity(Reactivity::new(self.input_reactive, self.output_reactive))
            .rollbackable(self.rollbackable);
        if let Some(it) = &self.iteration {
            let ic = IterationConfig::new(T::lit(it.epsilon), it.max_iterations)
                .map_err(|e| Error::Parse(format!("{key}.iteration: {e}")))?;
            cfg = cfg.iteration(ic);
        }
        SimulationUnit::new(name, model, cfg).map_err(|e| match e {
            Error::InvalidScenario(m) => Error::InvalidScenario(format!("{key}: {m}")),
            other => other,
        })
    }
}

impl OrchestratorSpec {
    pub fn build<T: Scalar>(&self) -> Result<OrchestratorKind<T>> {
        let convergence = || -> Result<Convergence<T>> {
            let Some(c) = &self.convergence else {
                return Ok(Convergence::default());
            };
            let max = c.max_iterations.unwrap_or(100);
            match c.mode {
                ModeName::Implicit => {
                    let eps = c.epsilon.unwrap_or(1e-9);
                    if !(eps > 0.0) {
                        return Err(Error::Parse(
                            "orchestrator.convergence.epsilon: must be positive".into(),
                        ));
                    }
                    Ok(Convergence::implicit(T::lit(eps), max))
                }
                ModeName::SemiImplicit => {
                    let n = c.iterations.ok_or_else(|| {
                        Error::Parse(
                            "orchestrator.convergence.iterations: required for semi_implicit"
                                .into(),
                        )
                    })?;
                    if n == 0 {
                        return Err(Error::Parse(
                            "orchestrator.convergence.iterations: must be at least 1".into(),
                        ));
                    }
                    Ok(Convergence::semi_implicit(n))
                }
            }
        };
        Ok(match self.kind {
            OrchestratorName::GaussSeidel => OrchestratorKind::GaussSeidel,
            OrchestratorName::Jacobi => OrchestratorKind::Jacobi,
            OrchestratorName::IterativeGaussSeidel => {
                OrchestratorKind::IterativeGaussSeidel(convergence()?)
            }
            OrchestratorName::IterativeJacobi => OrchestratorKind::IterativeJacobi(convergence()?),
        })
    }

    pub fn from_kind<T: Scalar>(kind: &OrchestratorKind<T>) -> Self {
        let spec = |c: &Convergence<T>| {
            Some(match c.mode {
                ConvergenceMode::Implicit { epsilon } => ConvergenceSpec {
                    mode: ModeName::Implicit,
                    epsilon: Some(epsilon.as_f64()),
                    iterations: None,
                    max_iterations: Some(c.max_iterations),
                },
                ConvergenceMode::SemiImplicit { iterations } => ConvergenceSpec {
                    mode: ModeName::SemiImplicit,
                    epsilon: None,
                    iterations: Some(iterations),
                    max_iterations: None,
                },
            })
        };
        match kind {
            OrchestratorKind::GaussSeidel => OrchestratorSpec::default(),
            OrchestratorKind::Jacobi => OrchestratorSpec {
                kind: OrchestratorName::Jacobi,
                convergence: None,
            },
            OrchestratorKind::IterativeGaussSeidel(c) => OrchestratorSpec {
                kind: OrchestratorName::IterativeGaussSeidel,
                convergence: spec(c),
            },
            OrchestratorKind::IterativeJacobi(c) => OrchestratorSpec {
                kind: OrchestratorName::IterativeJacobi,
                convergence: spec(c),
            },
        }
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." || path == "?" || path.is_empty() {
                Error::Parse(inner.to_string())
            } else {
                Error::Parse(format!("{path}: {inner}"))
            }
        })
    }

    pub fn read(mut reader: impl Read) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }

    pub fn build<T: Scalar>(&self) -> Result<(Scenario<T>, OrchestratorKind<T>)> {
        let mut b =
            Scenario::builder(T::lit(self.step), T::lit(self.end)).granularity(self.granularity);
        for (name, spec) in &self.units {
            b = b.unit(spec.build(name)?);
        }
        for (i, c) in self.connections.iter().enumerate() {
            b = b.connect(&c.from, &c.to).map_err(|e| match e {
                Error::InvalidPort(p) => Error::InvalidPort(format!("connections[{i}]: {p}")),
                other => other,
            })?;
        }
        if let Some(sigma) = &self.sigma {
            b = b.sigma(sigma);
        }
        Ok((b.build()?, self.orchestrator.build()?))
    }

    /// File form of a scenario whose units are all linear.
    pub fn from_scenario<T: Scalar>(s: &Scenario<T>, kind: &OrchestratorKind<T>) -> Result<Self> {
        let mut units = BTreeMap::new();
        for u in s.units() {
            let m = u.model().as_linear().ok_or_else(|| {
                Error::Unsupported(format!("unit '{}' has no inline file form", u.name()))
            })?;
            let c = u.config();
            units.insert(
                u.name().to_string(),
                UnitSpec {
                    model: ModelSpec::Linear(LinearSpec::from_model(m)),
                    solver: c.stepper,
                    h: c.h.as_f64(),
                    approximation: c.approximation,
                    input_reactive: c.reactivity.input_reactive(),
                    output_reactive: c.reactivity.output_reactive(),
                    rollbackable: c.rollbackable,
                    iteration: Some(IterationSpec {
                        epsilon: c.iteration.epsilon.as_f64(),
                        max_iterations: c.iteration.max_iterations,
                    }),
                },
            );
        }
        Ok(ScenarioFile {
            units,
            connections: s
                .connections()
                .iter()
                .map(|c| ConnectionSpec {
                    from: c.from.to_string(),
                    to: c.to.to_string(),
                })
                .collect(),
            step: s.communication_step().as_f64(),
            end: s.end_time().as_f64(),
            orchestrator: OrchestratorSpec::from_kind(kind),
            sigma: s
                .sigma()
                .map(|ix| ix.iter().map(|&i| s.unit(i).name().to_string()).collect()),
            granularity: s.granularity(),
        })
    }
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("csv: {e}"))
}

fn fmt<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

/// Column names: `t`, then every output, then every state, units in trace order.
pub fn trace_header<T: Scalar>(trace: &Trace<T>) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for (u, name) in trace.units.iter().enumerate() {
        let n = trace.outputs[u].first().map_or(0, Vector::len);
        h.extend((0..n).map(|i| format!("{name}.y[{i}]")));
    }
    for (u, name) in trace.units.iter().enumerate() {
        let n = trace.states[u].first().map_or(0, Vector::len);
        h.extend((0..n).map(|i| format!("{name}.x[{i}]")));
    }
    h
}

pub fn write_trace_csv<T: Scalar>(trace: &Trace<T>, out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(trace_header(trace)).map_err(csv_err)?;
    for (k, &t) in trace.times.iter().enumerate() {
        let mut row = vec![fmt(t)];
        for series in trace.outputs.iter().chain(&trace.states) {
            row.extend(series[k].iter().map(|&v| fmt(v)));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Internal solver steps of unit slot `u` as `t, name.x[i]...` rows.
pub fn write_internal_csv<T: Scalar>(trace: &Trace<T>, u: usize, out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let name = &trace.units[u];
    let n = trace.states[u].first().map_or(0, Vector::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("{name}.x[{i}]")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, x) in &trace.internal[u] {
        let mut row = vec![fmt(*t)];
        row.extend(x.iter().map(|&v| fmt(v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Header and numeric rows of a CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_csv(input: impl Read) -> Result<Table> {
    let mut r = csv::Reader::from_reader(input);
    let header = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{f:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}
