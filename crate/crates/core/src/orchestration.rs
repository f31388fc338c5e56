//! Gauss-Seidel, Jacobi and their iterative variants.

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::scenario::{Action, Granularity, Scenario};
use crate::units::{SimulationUnit, StepArguments};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ConvergenceMode<T> {
    /// Retry until inputs settle to within `epsilon`.
    Implicit { epsilon: T },
    /// Exactly `iterations` sweeps per step.
    SemiImplicit { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence<T> {
    pub mode: ConvergenceMode<T>,
    pub max_iterations: usize,
}

impl<T: Scalar> Convergence<T> {
    pub fn implicit(epsilon: T, max_iterations: usize) -> Self {
        Convergence {
            mode: ConvergenceMode::Implicit { epsilon },
            max_iterations,
        }
    }

    pub fn semi_implicit(iterations: usize) -> Self {
        Convergence {
            mode: ConvergenceMode::SemiImplicit { iterations },
            max_iterations: iterations,
        }
    }

    fn budget(&self) -> usize {
        match self.mode {
            ConvergenceMode::Implicit { .. } => self.max_iterations.max(1),
            ConvergenceMode::SemiImplicit { iterations } => iterations.max(1),
        }
    }
}

impl<T: Scalar> Default for Convergence<T> {
    fn default() -> Self {
        Convergence::implicit(T::lit(1e-9), 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrchestratorKind<T> {
    GaussSeidel,
    Jacobi,
    IterativeGaussSeidel(Convergence<T>),
    IterativeJacobi(Convergence<T>),
}

impl<T> OrchestratorKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            OrchestratorKind::GaussSeidel => "gauss_seidel",
            OrchestratorKind::Jacobi => "jacobi",
            OrchestratorKind::IterativeGaussSeidel(_) => "iterative_gauss_seidel",
            OrchestratorKind::IterativeJacobi(_) => "iterative_jacobi",
        }
    }
}

/// `call` counts from 1 within the current step.
pub fn has_converged<T: Scalar>(
    current: &[Vector<T>],
    aux: &[Vector<T>],
    mode: &ConvergenceMode<T>,
    call: usize,
) -> bool {
    match *mode {
        ConvergenceMode::SemiImplicit { iterations } => call >= iterations,
        ConvergenceMode::Implicit { epsilon } => {
            let mut worst = T::zero();
            for (c, a) in current.iter().zip(aux) {
                if !c.is_finite() {
                    return false;
                }
                let d = (c - a).inf_norm() / (T::one() + a.inf_norm());
                if !(d <= worst) {
                    worst = d;
                }
            }
            worst < epsilon
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Step Jacobi units on the rayon pool.
    pub parallel: bool,
    /// Keep every internal solver step.
    pub record_internal: bool,
}

/// Values at every communication point. Per-unit series follow `units` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub units: Vec<String>,
    pub times: Vec<T>,
    /// `outputs[u][k]`: output of unit `u` at `times[k]`.
    pub outputs: Vec<Vec<Vector<T>>>,
    pub states: Vec<Vec<Vector<T>>>,
    pub inputs: Vec<Vec<Vector<T>>>,
    /// Sweeps used per communication step (1 for non-iterative kinds).
    pub iterations: Vec<usize>,
    /// `(time, state)` of every internal step, when recorded.
    pub internal: Vec<Vec<(T, Vector<T>)>>,
}

impl<T: Scalar> Trace<T> {
    fn new(units: &[SimulationUnit<T>], order: &[usize]) -> Self {
        let n = order.len();
        Trace {
            units: order.iter().map(|&i| units[i].name().to_string()).collect(),
            times: Vec::new(),
            outputs: vec![Vec::new(); n],
            states: vec![Vec::new(); n],
            inputs: vec![Vec::new(); n],
            iterations: Vec::new(),
            internal: vec![Vec::new(); n],
        }
    }

    pub fn unit_index(&self, name: &str) -> Option<usize> {
        self.units.iter().position(|u| u == name)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Series of output component `k` of unit `name`.
    pub fn output_series(&self, name: &str, k: usize) -> Option<Vec<T>> {
        let u = self.unit_index(name)?;
        Some(self.outputs[u].iter().map(|y| y[k]).collect())
    }

    pub fn state_series(&self, name: &str, i: usize) -> Option<Vec<T>> {
        let u = self.unit_index(name)?;
        Some(self.states[u].iter().map(|x| x[i]).collect())
    }

    /// Concatenated states of all units at point `k`.
    pub fn stacked_state(&self, k: usize) -> Vector<T> {
        let mut v = Vec::new();
        for s in &self.states {
            v.extend_from_slice(s[k].as_slice());
        }
        Vector::new(v)
    }
}

struct Run<'a, T> {
    scenario: &'a Scenario<T>,
    units: Vec<SimulationUnit<T>>,
    order: Vec<usize>,
    uc: Vec<Vector<T>>,
    up: Vec<Vector<T>>,
    y: Vec<Vector<T>>,
    trace: Trace<T>,
    options: RunOptions,
}

impl<'a, T: Scalar> Run<'a, T> {
    fn new(scenario: &'a Scenario<T>, order: Vec<usize>, options: RunOptions) -> Self {
        let mut units = scenario.units().to_vec();
        if options.record_internal {
            for u in &mut units {
                u.set_record_internal(true);
            }
        }
        let uc: Vec<Vector<T>> = units.iter().map(|u| Vector::zeros(u.input_dim())).collect();
        let y = units
            .iter()
            .map(|u| Vector::zeros(u.output_dim()))
            .collect();
        let trace = Trace::new(&units, &order);
        Run {
            scenario,
            up: uc.clone(),
            uc,
            y,
            units,
            order,
            trace,
            options,
        }
    }

    fn input(&self, w: usize) -> Vector<T> {
        self.scenario.assemble_input(w, &self.y)
    }

    fn output(&mut self, w: usize) -> Result<()> {
        self.y[w] = self.units[w].get_output(&self.uc[w])?;
        Ok(())
    }

    fn record(&mut self, t: T, iterations: Option<usize>) {
        self.trace.times.push(t);
        for (slot, &w) in self.order.iter().enumerate() {
            self.trace.outputs[slot].push(self.y[w].clone());
            self.trace.states[slot].push(self.units[w].state().clone());
            self.trace.inputs[slot].push(self.uc[w].clone());
        }
        if let Some(n) = iterations {
            self.trace.iterations.push(n);
        }
    }

    fn finish(mut self) -> Trace<T> {
        if self.options.record_internal {
            for (slot, &w) in self.order.iter().enumerate() {
                self.trace.internal[slot] = self.units[w].internal_steps().to_vec();
            }
        }
        self.trace
    }

    /// Input assembly followed by output, in order; no stepping.
    fn output_sweep(&mut self) -> Result<()> {
        for i in 0..self.order.len() {
            let w = self.order[i];
            self.uc[w] = self.input(w);
            self.output(w)?;
        }
        Ok(())
    }

    fn refresh_inputs(&mut self) {
        for w in 0..self.units.len() {
            self.uc[w] = self.input(w);
        }
    }

    fn gs_sweep(&mut self, step: T) -> Result<()> {
        for i in 0..self.order.len() {
            let w = self.order[i];
            self.uc[w] = self.input(w);
            let args = StepArguments::gauss_seidel(step, self.uc[w].clone(), self.up[w].clone());
            self.units[w].do_step(&args)?;
            self.output(w)?;
        }
        Ok(())
    }

    fn jacobi_steps(&mut self, step: T) -> Result<()> {
        let uc = &self.uc;
        if self.options.parallel {
            let results: Vec<Result<()>> = self
                .units
                .par_iter_mut()
                .zip(uc.par_iter())
                .map(|(u, x)| u.do_step(&StepArguments::jacobi(step, x.clone())))
                .collect();
            results.into_iter().collect()
        } else {
            for (u, x) in self.units.iter_mut().zip(uc) {
                u.do_step(&StepArguments::jacobi(step, x.clone()))?;
            }
            Ok(())
        }
    }

    fn rollback_all(&mut self) -> Result<()> {
        for u in &mut self.units {
            u.rollback()?;
        }
        Ok(())
    }

    fn execute(&mut self, actions: &[Action], step: Option<T>) -> Result<()> {
        for a in actions {
            match *a {
                Action::Input { unit, index } => {
                    let (v, k) = self.scenario.sources(unit)[index];
                    self.uc[unit][index] = self.y[v][k];
                }
                Action::Output { unit, index } => {
                    let y = self.units[unit].get_output(&self.uc[unit])?;
                    self.y[unit][index] = y[index];
                }
                Action::Step { unit } => {
                    if let Some(h) = step {
                        let args = StepArguments::gauss_seidel(
                            h,
                            self.uc[unit].clone(),
                            self.up[unit].clone(),
                        );
                        self.units[unit].do_step(&args)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn uc_for<T: Clone>(uc: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&w| uc[w].clone()).collect()
}

/// Runs `scenario` from a fresh copy of its units.
pub fn run<T: Scalar>(
    scenario: &Scenario<T>,
    kind: &OrchestratorKind<T>,
    options: RunOptions,
) -> Result<Trace<T>> {
    info!(
        "running {} over [0, {}] with H = {}",
        kind.name(),
        scenario.end_time(),
        scenario.communication_step()
    );
    match kind {
        OrchestratorKind::GaussSeidel => match scenario.granularity() {
            Granularity::Vector => gauss_seidel(scenario, options),
            Granularity::Scalar => gauss_seidel_scalar(scenario, options),
        },
        OrchestratorKind::Jacobi => jacobi(scenario, options),
        OrchestratorKind::IterativeGaussSeidel(c) => iterative_gauss_seidel(scenario, c, options),
        OrchestratorKind::IterativeJacobi(c) => iterative_jacobi(scenario, c, options),
    }
}

pub fn run_gauss_seidel<T: Scalar>(scenario: &Scenario<T>) -> Result<Trace<T>> {
    run(
        scenario,
        &OrchestratorKind::GaussSeidel,
        RunOptions::default(),
    )
}

pub fn run_jacobi<T: Scalar>(scenario: &Scenario<T>) -> Result<Trace<T>> {
    run(scenario, &OrchestratorKind::Jacobi, RunOptions::default())
}

pub fn run_iterative_gauss_seidel<T: Scalar>(
    scenario: &Scenario<T>,
    c: Convergence<T>,
) -> Result<Trace<T>> {
    run(
        scenario,
        &OrchestratorKind::IterativeGaussSeidel(c),
        RunOptions::default(),
    )
}

pub fn run_iterative_jacobi<T: Scalar>(
    scenario: &Scenario<T>,
    c: Convergence<T>,
) -> Result<Trace<T>> {
    run(
        scenario,
        &OrchestratorKind::IterativeJacobi(c),
        RunOptions::default(),
    )
}

fn gauss_seidel<T: Scalar>(s: &Scenario<T>, options: RunOptions) -> Result<Trace<T>> {
    let mut r = Run::new(s, s.execution_order()?, options);
    r.output_sweep()?;
    r.up = r.uc.clone();
    r.record(T::zero(), None);
    for cs in s.steps() {
        r.gs_sweep(cs.step)?;
        r.up = r.uc.clone();
        r.record(cs.end, Some(1));
    }
    Ok(r.finish())
}

fn gauss_seidel_scalar<T: Scalar>(s: &Scenario<T>, options: RunOptions) -> Result<Trace<T>> {
    let actions = s.action_order()?;
    let init: Vec<Action> = actions
        .iter()
        .copied()
        .filter(|a| !matches!(a, Action::Step { .. }))
        .collect();
    let order = s
        .sigma()
        .map(<[usize]>::to_vec)
        .unwrap_or_else(|| (0..s.units().len()).collect());
    let mut r = Run::new(s, order, options);
    r.execute(&init, None)?;
    r.up = r.uc.clone();
    r.record(T::zero(), None);
    for cs in s.steps() {
        r.execute(&actions, Some(cs.step))?;
        r.up = r.uc.clone();
        r.record(cs.end, Some(1));
    }
    Ok(r.finish())
}

fn jacobi<T: Scalar>(s: &Scenario<T>, options: RunOptions) -> Result<Trace<T>> {
    s.validate_jacobi()?;
    let mut r = Run::new(s, s.execution_order()?, options);
    let steps = s.steps();
    for (i, cs) in steps.iter().enumerate() {
        r.output_sweep()?;
        r.refresh_inputs();
        r.record(cs.t, (i > 0).then_some(1));
        r.jacobi_steps(cs.step)?;
    }
    r.output_sweep()?;
    r.refresh_inputs();
    let last = steps.last().map_or(T::zero(), |cs| cs.end);
    r.record(last, Some(1));
    Ok(r.finish())
}

fn initial_iterations<T: Scalar>(
    r: &mut Run<'_, T>,
    c: &Convergence<T>,
    refresh: bool,
) -> Result<()> {
    let mut aux: Vec<Vector<T>> = r.uc.clone();
    for call in 1..=c.budget() {
        r.output_sweep()?;
        if refresh {
            r.refresh_inputs();
        }
        let current = uc_for(&r.uc, &r.order);
        if has_converged(&current, &uc_for(&aux, &r.order), &c.mode, call) {
            return Ok(());
        }
        aux = r.uc.clone();
    }
    Err(Error::NonConvergence {
        time: 0.0,
        iterations: c.budget(),
    })
}

fn iterative_gauss_seidel<T: Scalar>(
    s: &Scenario<T>,
    c: &Convergence<T>,
    options: RunOptions,
) -> Result<Trace<T>> {
    s.validate_rollback()?;
    let mut r = Run::new(s, s.loose_order(), options);
    initial_iterations(&mut r, c, false)?;
    r.up = r.uc.clone();
    let mut aux = r.uc.clone();
    r.record(T::zero(), None);
    for cs in s.steps() {
        let mut call = 0;
        loop {
            call += 1;
            r.gs_sweep(cs.step)?;
            if has_converged(
                &uc_for(&r.uc, &r.order),
                &uc_for(&aux, &r.order),
                &c.mode,
                call,
            ) {
                r.up = r.uc.clone();
                break;
            }
            aux = r.uc.clone();
            r.rollback_all()?;
            if call >= c.budget() {
                return Err(Error::NonConvergence {
                    time: cs.t.as_f64(),
                    iterations: call,
                });
            }
        }
        debug!("t = {}: {} sweeps", cs.end, call);
        r.record(cs.end, Some(call));
    }
    Ok(r.finish())
}

fn iterative_jacobi<T: Scalar>(
    s: &Scenario<T>,
    c: &Convergence<T>,
    options: RunOptions,
) -> Result<Trace<T>> {
    s.validate_jacobi()?;
    s.validate_rollback()?;
    let mut r = Run::new(s, s.loose_order(), options);
    initial_iterations(&mut r, c, true)?;
    r.record(T::zero(), None);
    for cs in s.steps() {
        let mut call = 0;
        loop {
            call += 1;
            let held = r.uc.clone();
            r.jacobi_steps(cs.step)?;
            r.output_sweep()?;
            r.refresh_inputs();
            if has_converged(
                &uc_for(&r.uc, &r.order),
                &uc_for(&held, &r.order),
                &c.mode,
                call,
            ) {
                break;
            }
            r.rollback_all()?;
            if call >= c.budget() {
                return Err(Error::NonConvergence {
                    time: cs.t.as_f64(),
                    iterations: call,
                });
            }
        }
        debug!("t = {}: {} sweeps", cs.end, call);
        r.record(cs.end, Some(call));
    }
    Ok(r.finish())
}

/// Largest `|u_w[j] - y_v[k]|` over all couplings and communication points.
pub fn coupling_residual<T: Scalar>(scenario: &Scenario<T>, trace: &Trace<T>) -> T {
    let mut worst = T::zero();
    for (slot, name) in trace.units.iter().enumerate() {
        let w = scenario.unit_index(name).expect("trace of this scenario");
        for (j, &(v, k)) in scenario.sources(w).iter().enumerate() {
            let vs = trace
                .unit_index(scenario.unit(v).name())
                .expect("trace of this scenario");
            for n in 0..trace.len() {
                let d = (trace.inputs[slot][n][j] - trace.outputs[vs][n][k]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::ode::{LinearSystemModel, Model};
    use crate::solvers::{explicit_euler_step, StepperKind};
    use crate::units::UnitConfig;

    fn unit(name: &str, a: f64, b: f64, c: f64, d: f64, x0: f64, h: f64) -> SimulationUnit<f64> {
        let m = LinearSystemModel::new(
            Matrix::from_f64_rows(&[&[a]]).unwrap(),
            Matrix::from_f64_rows(&[&[b]]).unwrap(),
            Matrix::from_f64_rows(&[&[c]]).unwrap(),
            Matrix::from_f64_rows(&[&[d]]).unwrap(),
            Vector::from_f64(&[x0]),
        )
        .unwrap();
        SimulationUnit::new(
            name,
            Model::Linear(m),
            UnitConfig::new(StepperKind::ExplicitEuler, h),
        )
        .unwrap()
    }

    fn autonomous(name: &str, a: f64, x0: f64, h: f64) -> SimulationUnit<f64> {
        let m = LinearSystemModel::autonomous(
            Matrix::from_f64_rows(&[&[a]]).unwrap(),
            Vector::from_f64(&[x0]),
        )
        .unwrap();
        SimulationUnit::new(
            name,
            Model::Linear(m),
            UnitConfig::new(StepperKind::ExplicitEuler, h),
        )
        .unwrap()
    }

    fn feedback(d1: f64, d2: f64, h: f64) -> Scenario<f64> {
        Scenario::builder(0.1, 2.0)
            .unit(unit("a", -1.0, 1.0, 1.0, d1, 1.0, h))
            .unit(unit("b", -2.0, 0.5, 1.0, d2, -1.0, h))
            .connect("a.y[0]", "b.u[0]")
            .unwrap()
            .connect("b.y[0]", "a.u[0]")
            .unwrap()
            .build()
            .unwrap()
    }

    fn all_kinds(c: Convergence<f64>) -> [OrchestratorKind<f64>; 4] {
        [
            OrchestratorKind::GaussSeidel,
            OrchestratorKind::Jacobi,
            OrchestratorKind::IterativeGaussSeidel(c),
            OrchestratorKind::IterativeJacobi(c),
        ]
    }

    #[test]
    fn convergence_test_examples() {
        let a = [Vector::from_f64(&[1.0, 2.0])];
        let eps = ConvergenceMode::Implicit { epsilon: 1e-6 };
        assert!(has_converged(&a, &a, &eps, 1));
        let b = [Vector::from_f64(&[1.001, 2.0])];
        assert!(!has_converged(&b, &a, &eps, 1));
        let semi = ConvergenceMode::SemiImplicit { iterations: 2 };
        assert!(!has_converged(&b, &a, &semi, 1));
        assert!(has_converged(&b, &a, &semi, 2));
        let nan = [Vector::from_f64(&[f64::NAN, 2.0])];
        assert!(!has_converged(&nan, &a, &eps, 1));
    }

    #[test]
    fn uncoupled_units_match_monolithic() {
        let s = Scenario::builder(0.1, 1.0)
            .unit(autonomous("p", -1.0, 1.0, 0.05))
            .unit(autonomous("q", -3.0, 2.0, 0.025))
            .build()
            .unwrap();
        let reference = run_gauss_seidel(&s).unwrap();
        for kind in all_kinds(Convergence::implicit(1e-10, 10)) {
            let t = run(&s, &kind, RunOptions::default()).unwrap();
            assert_eq!(t.outputs, reference.outputs, "{}", kind.name());
            assert_eq!(t.states, reference.states, "{}", kind.name());
            assert_eq!(t.times, reference.times);
        }
        let mut x = Vector::from_f64(&[2.0]);
        let f = |x: &Vector<f64>, _: &Vector<f64>| x.scale(-3.0);
        for n in 0..40 {
            x = explicit_euler_step(f, &x, |_| Vector::zeros(0), n as f64 * 0.025, 0.025).unwrap();
            if n % 4 == 3 {
                assert_eq!(reference.states[1][n / 4 + 1], x);
            }
        }
    }

    #[test]
    fn semi_implicit_one_matches_plain() {
        let s = feedback(0.5, 0.0, 0.05);
        let one = Convergence::semi_implicit(1);
        let gs = run_gauss_seidel(&s).unwrap();
        assert_eq!(run_iterative_gauss_seidel(&s, one).unwrap(), gs);
        let j = run_jacobi(&s).unwrap();
        assert_eq!(run_iterative_jacobi(&s, one).unwrap(), j);
        assert_ne!(gs.states, j.states);
    }

    #[test]
    fn acyclic_chain_iterates_twice() {
        let s = Scenario::builder(0.1, 1.0)
            .unit(autonomous("a", -1.0, 1.0, 0.1))
            .unit(unit("b", -2.0, 1.0, 1.0, 0.3, 0.0, 0.05))
            .unit(unit("c", -1.0, 1.0, 1.0, 0.0, 0.0, 0.1))
            .connect("a.y[0]", "b.u[0]")
            .unwrap()
            .connect("b.y[0]", "c.u[0]")
            .unwrap()
            .build()
            .unwrap();
        let gs = run_gauss_seidel(&s).unwrap();
        let it = run_iterative_gauss_seidel(&s, Convergence::implicit(1e-10, 10)).unwrap();
        assert!(it.iterations.iter().all(|&n| n <= 2));
        for (a, b) in gs.states.iter().flatten().zip(it.states.iter().flatten()) {
            assert!((a - b).inf_norm() < 1e-9);
        }
    }

    #[test]
    fn output_loop_converges() {
        let s = feedback(0.5, 0.4, 0.05);
        assert!(run_gauss_seidel(&s).is_err());
        let t = run_iterative_gauss_seidel(&s, Convergence::implicit(1e-13, 200)).unwrap();
        assert!(coupling_residual(&s, &t) < 1e-8);
        let j = run_iterative_jacobi(&s, Convergence::implicit(1e-13, 200)).unwrap();
        assert!(coupling_residual(&s, &j) < 1e-8);
    }

    #[test]
    fn divergent_loop_reported() {
        let s = feedback(2.0, 1.0, 0.05);
        for kind in [
            OrchestratorKind::IterativeGaussSeidel(Convergence::implicit(1e-9, 50)),
            OrchestratorKind::IterativeJacobi(Convergence::implicit(1e-9, 50)),
        ] {
            assert!(matches!(
                run(&s, &kind, RunOptions::default()),
                Err(Error::NonConvergence { .. })
            ));
        }
    }

    #[test]
    fn deterministic_and_parallel_identical() {
        let s = feedback(0.5, 0.0, 0.01);
        let a = run_jacobi(&s).unwrap();
        let b = run_jacobi(&s).unwrap();
        let par = run(
            &s,
            &OrchestratorKind::Jacobi,
            RunOptions {
                parallel: true,
                record_internal: false,
            },
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, par);
        assert_eq!(run_gauss_seidel(&s).unwrap(), run_gauss_seidel(&s).unwrap());
    }

    #[test]
    fn trace_shape() {
        let s = feedback(0.0, 0.0, 0.05);
        let t = run_gauss_seidel(&s).unwrap();
        assert_eq!(t.len(), 21);
        assert_eq!(t.iterations.len(), 20);
        assert!((t.times[20] - 2.0).abs() < 1e-12);
        assert!(t.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(t.output_series("a", 0).unwrap().len(), 21);
        let j = run_jacobi(&s).unwrap();
        assert_eq!(j.len(), 21);
        assert_eq!(j.iterations.len(), 20);
    }

    #[test]
    fn internal_steps_recorded() {
        let s = feedback(0.0, 0.0, 0.05);
        let t = run(
            &s,
            &OrchestratorKind::IterativeGaussSeidel(Convergence::implicit(1e-12, 20)),
            RunOptions {
                parallel: false,
                record_internal: true,
            },
        )
        .unwrap();
        assert_eq!(t.internal[0].len(), 40);
        assert_eq!(t.internal[0][39].1, t.states[0][20]);
    }

    #[test]
    fn jacobi_rejects_input_reactive() {
        let m =
            LinearSystemModel::autonomous(Matrix::<f64>::zeros(1, 1), Vector::zeros(1)).unwrap();
        let cfg = UnitConfig::new(StepperKind::ExplicitEuler, 0.1)
            .reactivity(crate::units::Reactivity::new(true, true));
        let u = SimulationUnit::new("r", Model::Linear(m), cfg).unwrap();
        let s = Scenario::builder(0.1, 1.0).unit(u).build().unwrap();
        assert!(matches!(run_jacobi(&s), Err(Error::InvalidScenario(_))));
        assert!(run_gauss_seidel(&s).is_ok());
    }

    #[test]
    fn trailing_partial_step() {
        let s = Scenario::builder(0.2, 0.5)
            .unit(autonomous("p", -1.0, 1.0, 0.1))
            .build()
            .unwrap();
        let t = run_jacobi(&s).unwrap();
        assert_eq!(t.len(), 4);
        assert!((t.times[3] - 0.5).abs() < 1e-15);
        assert!((t.states[0][3][0] - 0.9f64.powi(5)).abs() < 1e-15);
    }

    #[test]
    fn virtual_loop_needs_scalar_ordering() {
        let s = crate::builtins::virtual_loop_scenario().unwrap();
        assert!(matches!(run_gauss_seidel(&s), Err(Error::NoValidOrder(_))));
        let s = s.with_granularity(Granularity::Scalar);
        let t = run_gauss_seidel(&s).unwrap();
        assert_eq!(coupling_residual(&s, &t), 0.0);
        let it = run_iterative_gauss_seidel(&s, Convergence::implicit(1e-14, 50)).unwrap();
        for (a, b) in t.states.iter().flatten().zip(it.states.iter().flatten()) {
            assert!((a - b).inf_norm() < 1e-9);
        }
    }
}
