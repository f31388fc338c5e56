//! Coupled scenarios: units, couplings, communication grid and execution order.

mod graph;

use std::collections::BTreeMap;
use std::fmt;

pub use graph::{
    classify_loops, topological_order, Action, Cycle, DependencyGraph, Granularity, LoopKind,
    LoopReport, Node, NodeKind,
};

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::units::SimulationUnit;
use crate::Scalar;

/// A reference to one scalar port, e.g. `car.y[1]` or `passenger.u[0]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub unit: String,
    pub output: bool,
    pub index: usize,
}

impl PortRef {
    pub fn output(unit: impl Into<String>, index: usize) -> Self {
        PortRef {
            unit: unit.into(),
            output: true,
            index,
        }
    }

    pub fn input(unit: impl Into<String>, index: usize) -> Self {
        PortRef {
            unit: unit.into(),
            output: false,
            index,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidPort(format!("{s:?} (expected unit.y[i] or unit.u[j])"));
        let (unit, port) = s.trim().rsplit_once('.').ok_or_else(bad)?;
        let (var, rest) = port.split_once('[').ok_or_else(bad)?;
        let index = rest.strip_suffix(']').ok_or_else(bad)?;
        let index: usize = index.trim().parse().map_err(|_| bad())?;
        let output = match var.trim() {
            "y" => true,
            "u" => false,
            _ => return Err(bad()),
        };
        if unit.is_empty() {
            return Err(bad());
        }
        Ok(PortRef {
            unit: unit.to_string(),
            output,
            index,
        })
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = if self.output { "y" } else { "u" };
        write!(f, "{}.{}[{}]", self.unit, var, self.index)
    }
}

/// Index-wise assignment `to := from`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Connection {
    pub from: PortRef,
    pub to: PortRef,
}

impl Connection {
    pub fn parse(from: &str, to: &str) -> Result<Self> {
        let from = PortRef::parse(from)?;
        let to = PortRef::parse(to)?;
        if !from.output {
            return Err(Error::InvalidPort(format!("{from} is not an output")));
        }
        if to.output {
            return Err(Error::InvalidPort(format!("{to} is not an input")));
        }
        Ok(Connection { from, to })
    }
}

/// One communication step `[t, t + step]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommunicationStep<T> {
    pub t: T,
    pub step: T,
    /// Grid point closing the step.
    pub end: T,
}

#[derive(Debug, Clone)]
pub struct Scenario<T> {
    units: Vec<SimulationUnit<T>>,
    connections: Vec<Connection>,
    /// `sources[w][j] = (v, k)`: input `j` of unit `w` reads output `k` of unit `v`.
    sources: Vec<Vec<(usize, usize)>>,
    step: T,
    end: T,
    sigma: Option<Vec<usize>>,
    granularity: Granularity,
}

impl<T: Scalar> Scenario<T> {
    pub fn builder(step: T, end: T) -> ScenarioBuilder<T> {
        ScenarioBuilder {
            units: Vec::new(),
            connections: Vec::new(),
            step,
            end,
            sigma: None,
            granularity: Granularity::Vector,
        }
    }

    pub fn units(&self) -> &[SimulationUnit<T>] {
        &self.units
    }

    pub fn unit(&self, index: usize) -> &SimulationUnit<T> {
        &self.units[index]
    }

    pub fn unit_index(&self, name: &str) -> Option<usize> {
        self.units.binary_search_by(|u| u.name().cmp(name)).ok()
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn sources(&self, unit: usize) -> &[(usize, usize)] {
        &self.sources[unit]
    }

    pub fn communication_step(&self) -> T {
        self.step
    }

    pub fn end_time(&self) -> T {
        self.end
    }

    pub fn sigma(&self) -> Option<&[usize]> {
        self.sigma.as_deref()
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn with_granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = granularity;
        self
    }

    pub fn with_sigma(mut self, sigma: Option<Vec<usize>>) -> Result<Self> {
        if let Some(s) = &sigma {
            check_permutation(s, self.units.len())?;
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// `C_w`: gathers unit `w`'s input from the outputs of its sources.
    pub fn assemble_input(&self, w: usize, outputs: &[Vector<T>]) -> Vector<T> {
        Vector::new(
            self.sources[w]
                .iter()
                .map(|&(v, k)| outputs[v][k])
                .collect(),
        )
    }

    /// Communication grid; a trailing partial step lands exactly on the end time.
    pub fn steps(&self) -> Vec<CommunicationStep<T>> {
        let (n, rem) = grid(self.step, self.end);
        let mut out: Vec<CommunicationStep<T>> = (0..n)
            .map(|i| CommunicationStep {
                t: T::from_count(i) * self.step,
                step: self.step,
                end: T::from_count(i + 1) * self.step,
            })
            .collect();
        if let Some(r) = rem {
            out.push(CommunicationStep {
                t: T::from_count(n) * self.step,
                step: r,
                end: self.end,
            });
        }
        out
    }

    pub fn dependency_graph(&self, granularity: Granularity) -> DependencyGraph {
        DependencyGraph::build(self, granularity)
    }

    /// Unit execution order: the explicit order if one was given, otherwise
    /// a sort of the dependency graph at the scenario's granularity.
    pub fn execution_order(&self) -> Result<Vec<usize>> {
        let g = self.dependency_graph(Granularity::Vector);
        match &self.sigma {
            Some(s) => {
                g.check_order(s)?;
                Ok(s.clone())
            }
            None => topological_order(&g).map_err(|r| Error::NoValidOrder(r.to_string())),
        }
    }

    /// Explicit order, or dependency order when one exists, or name order.
    /// Iterative orchestrators accept any order.
    pub fn loose_order(&self) -> Vec<usize> {
        if let Some(s) = &self.sigma {
            return s.clone();
        }
        topological_order(&self.dependency_graph(Granularity::Vector))
            .unwrap_or_else(|_| (0..self.units.len()).collect())
    }

    /// Fine-grained action order for scalar-level Gauss-Seidel.
    pub fn action_order(&self) -> Result<Vec<Action>> {
        graph::action_order(self)
    }

    pub fn validate_jacobi(&self) -> Result<()> {
        for u in &self.units {
            if u.reactivity().input_reactive() {
                return Err(Error::InvalidScenario(format!(
                    "unit {} is input reactive and cannot run under a Jacobi orchestrator",
                    u.name()
                )));
            }
        }
        Ok(())
    }

    pub fn validate_rollback(&self) -> Result<()> {
        for u in &self.units {
            if !u.is_rollbackable() {
                return Err(Error::InvalidScenario(format!(
                    "unit {} does not support rollback, required by iterative orchestrators",
                    u.name()
                )));
            }
        }
        Ok(())
    }
}

fn grid<T: Scalar>(step: T, end: T) -> (usize, Option<T>) {
    let ratio = end / step;
    let tol = T::lit(1e-9);
    let mut n = (ratio + tol).floor();
    if n < T::zero() {
        n = T::zero();
    }
    let rem = end - n * step;
    let n = n.to_usize().unwrap_or(0);
    if rem > tol * step {
        (n, Some(rem))
    } else {
        (n, None)
    }
}

fn check_permutation(sigma: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in sigma {
        if i >= n || seen[i] {
            return Err(Error::InvalidScenario(
                "sigma must list every unit exactly once".into(),
            ));
        }
        seen[i] = true;
    }
    if sigma.len() != n {
        return Err(Error::InvalidScenario(
            "sigma must list every unit exactly once".into(),
        ));
    }
    Ok(())
}

pub struct ScenarioBuilder<T> {
    units: Vec<SimulationUnit<T>>,
    connections: Vec<Connection>,
    step: T,
    end: T,
    sigma: Option<Vec<String>>,
    granularity: Granularity,
}

impl<T: Scalar> ScenarioBuilder<T> {
    pub fn unit(mut self, unit: SimulationUnit<T>) -> Self {
        self.units.push(unit);
        self
    }

    pub fn connection(mut self, connection: Connection) -> Self {
        self.connections.push(connection);
        self
    }

    /// Adds `to := from`, both written as `unit.y[i]` / `unit.u[j]`.
    pub fn connect(self, from: &str, to: &str) -> Result<Self> {
        Ok(self.connection(Connection::parse(from, to)?))
    }

    pub fn sigma<S: Into<String>>(mut self, order: impl IntoIterator<Item = S>) -> Self {
        self.sigma = Some(order.into_iter().map(Into::into).collect());
        self
    }

    pub fn granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = granularity;
        self
    }

    pub fn build(self) -> Result<Scenario<T>> {
        let ScenarioBuilder {
            mut units,
            connections,
            step,
            end,
            sigma,
            granularity,
        } = self;
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "H must be positive, got {step}"
            )));
        }
        if !(end >= step) || !end.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "T must be at least H, got T = {end}, H = {step}"
            )));
        }
        units.sort_by(|a, b| a.name().cmp(b.name()));
        for w in units.windows(2) {
            if w[0].name() == w[1].name() {
                return Err(Error::InvalidScenario(format!(
                    "duplicate unit name {}",
                    w[0].name()
                )));
            }
        }
        let index: BTreeMap<&str, usize> = units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.name(), i))
            .collect();

        let (_, rem) = grid(step, end);
        for u in &units {
            u.steps_per(step)?;
            if let Some(r) = rem {
                u.steps_per(r)?;
            }
        }

        let mut slots: Vec<Vec<Option<(usize, usize)>>> =
            units.iter().map(|u| vec![None; u.input_dim()]).collect();
        for c in &connections {
            let v = *index
                .get(c.from.unit.as_str())
                .ok_or_else(|| Error::UnknownUnit(c.from.unit.clone()))?;
            let w = *index
                .get(c.to.unit.as_str())
                .ok_or_else(|| Error::UnknownUnit(c.to.unit.clone()))?;
            if c.from.index >= units[v].output_dim() {
                return Err(Error::InvalidPort(format!(
                    "{} out of range, unit has {} outputs",
                    c.from,
                    units[v].output_dim()
                )));
            }
            if c.to.index >= units[w].input_dim() {
                return Err(Error::InvalidPort(format!(
                    "{} out of range, unit has {} inputs",
                    c.to,
                    units[w].input_dim()
                )));
            }
            let slot = &mut slots[w][c.to.index];
            if slot.is_some() {
                return Err(Error::InvalidPort(format!(
                    "{} driven more than once",
                    c.to
                )));
            }
            *slot = Some((v, c.from.index));
        }
        let mut sources = Vec::with_capacity(units.len());
        for (w, s) in slots.into_iter().enumerate() {
            let mut row = Vec::with_capacity(s.len());
            for (j, src) in s.into_iter().enumerate() {
                row.push(src.ok_or_else(|| {
                    Error::InvalidPort(format!(
                        "{} is not driven",
                        PortRef::input(units[w].name(), j)
                    ))
                })?);
            }
            sources.push(row);
        }

        let sigma = match sigma {
            None => None,
            Some(names) => {
                let mut order = Vec::with_capacity(names.len());
                for n in &names {
                    order.push(
                        *index
                            .get(n.as_str())
                            .ok_or_else(|| Error::UnknownUnit(n.clone()))?,
                    );
                }
                check_permutation(&order, units.len())?;
                Some(order)
            }
        };

        Ok(Scenario {
            units,
            connections,
            sources,
            step,
            end,
            sigma,
            granularity,
        })
    }
}
