//! Black-box simulation units: model, stepper, input reconstruction, rollback.

use serde::{Deserialize, Serialize};

use crate::approximation::{ApproximationKind, InputBuffer, InputSignal};
use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::ode::{to_first_order, DependencyMasks, GeneralModel, Model, SecondOrderModel};
use crate::solvers::{
    central_velocity, explicit_euler_step, godunov_bootstrap, godunov_step, implicit_euler_step,
    midpoint_step, GuessMode, IterationConfig, StepperKind,
};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortReactivity {
    Reactive,
    Delayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Reactivity {
    pub input: PortReactivity,
    pub output: PortReactivity,
}

impl Reactivity {
    pub const DELAYED_REACTIVE: Reactivity = Reactivity {
        input: PortReactivity::Delayed,
        output: PortReactivity::Reactive,
    };

    pub fn new(input_reactive: bool, output_reactive: bool) -> Self {
        let pick = |r| {
            if r {
                PortReactivity::Reactive
            } else {
                PortReactivity::Delayed
            }
        };
        Reactivity {
            input: pick(input_reactive),
            output: pick(output_reactive),
        }
    }

    pub fn input_reactive(&self) -> bool {
        self.input == PortReactivity::Reactive
    }

    pub fn output_reactive(&self) -> bool {
        self.output == PortReactivity::Reactive
    }
}

impl Default for Reactivity {
    fn default() -> Self {
        Reactivity::DELAYED_REACTIVE
    }
}

/// Per-unit solver configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitConfig<T> {
    pub stepper: StepperKind,
    pub h: T,
    pub approximation: ApproximationKind,
    pub reactivity: Reactivity,
    pub rollbackable: bool,
    pub iteration: IterationConfig<T>,
    pub guess_mode: GuessMode,
    /// Exact position at `t = h` for Godunov units, replacing the Euler bootstrap.
    pub godunov_x_h: Option<Vector<T>>,
}

impl<T: Scalar> UnitConfig<T> {
    pub fn new(stepper: StepperKind, h: T) -> Self {
        UnitConfig {
            stepper,
            h,
            approximation: ApproximationKind::ZeroOrderHold,
            reactivity: Reactivity::default(),
            rollbackable: true,
            iteration: IterationConfig::default(),
            guess_mode: GuessMode::default(),
            godunov_x_h: None,
        }
    }

    pub fn approximation(mut self, kind: ApproximationKind) -> Self {
        self.approximation = kind;
        self
    }

    pub fn reactivity(mut self, reactivity: Reactivity) -> Self {
        self.reactivity = reactivity;
        self
    }

    pub fn rollbackable(mut self, rollbackable: bool) -> Self {
        self.rollbackable = rollbackable;
        self
    }

    pub fn iteration(mut self, cfg: IterationConfig<T>) -> Self {
        self.iteration = cfg;
        self
    }

    pub fn guess_mode(mut self, mode: GuessMode) -> Self {
        self.guess_mode = mode;
        self
    }

    pub fn godunov_x_h(mut self, x_h: Vector<T>) -> Self {
        self.godunov_x_h = Some(x_h);
        self
    }
}

/// Inputs to one `do_step` call. `previous` is the sample at the start of the
/// interval when the orchestrator tracks it separately (Gauss-Seidel); otherwise
/// `current` doubles as that sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StepArguments<T> {
    pub step: T,
    pub current: Vector<T>,
    pub previous: Option<Vector<T>>,
}

impl<T: Scalar> StepArguments<T> {
    pub fn jacobi(step: T, current: Vector<T>) -> Self {
        StepArguments {
            step,
            current,
            previous: None,
        }
    }

    pub fn gauss_seidel(step: T, current: Vector<T>, previous: Vector<T>) -> Self {
        StepArguments {
            step,
            current,
            previous: Some(previous),
        }
    }
}

#[derive(Debug, Clone)]
enum Dynamics<T> {
    FirstOrder(GeneralModel<T>),
    Godunov(SecondOrderModel<T>),
}

#[derive(Debug, Clone, PartialEq)]
struct Snapshot<T> {
    time: T,
    state: Vector<T>,
    prev_position: Option<Vector<T>>,
    buffer: InputBuffer<T>,
    signal: Option<InputSignal<T>>,
    internal_len: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationUnit<T> {
    name: String,
    model: Model<T>,
    dynamics: Dynamics<T>,
    config: UnitConfig<T>,
    time: T,
    /// First-order state; `[position; velocity]` for second-order models.
    state: Vector<T>,
    prev_position: Option<Vector<T>>,
    buffer: InputBuffer<T>,
    signal: Option<InputSignal<T>>,
    snapshot: Option<Snapshot<T>>,
    record_internal: bool,
    internal: Vec<(T, Vector<T>)>,
}

impl<T: Scalar> SimulationUnit<T> {
    pub fn new(name: impl Into<String>, model: Model<T>, config: UnitConfig<T>) -> Result<Self> {
        let name = name.into();
        if !(config.h > T::zero()) || !config.h.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "unit {name}: internal step must be positive, got {}",
                config.h
            )));
        }
        if config.reactivity.input_reactive()
            && config.approximation == ApproximationKind::FirstOrderExtrapolation
        {
            return Err(Error::InvalidScenario(format!(
                "unit {name}: input-reactive units need interpolation or a held endpoint, not extrapolation"
            )));
        }
        let dynamics = match (&model, config.stepper) {
            (Model::SecondOrder(m), StepperKind::Godunov) => {
                if let Some(x_h) = &config.godunov_x_h {
                    if x_h.len() != m.dim {
                        return Err(Error::mismatch(
                            format!("unit {name}: x_h"),
                            m.dim,
                            x_h.len(),
                        ));
                    }
                }
                Dynamics::Godunov(m.clone())
            }
            (_, StepperKind::Godunov) => {
                return Err(Error::InvalidScenario(format!(
                    "unit {name}: the godunov stepper needs a second-order model"
                )))
            }
            (Model::SecondOrder(m), _) => Dynamics::FirstOrder(to_first_order(m)),
            (Model::General(m), _) => Dynamics::FirstOrder(m.clone()),
            (Model::Linear(m), _) => Dynamics::FirstOrder(GeneralModel::from_linear(m)),
        };
        let state = match &model {
            Model::Linear(m) => m.x0.clone(),
            Model::General(m) => m.x0.clone(),
            Model::SecondOrder(m) => m.x0.concat(&m.v0),
        };
        Ok(SimulationUnit {
            name,
            model,
            dynamics,
            config,
            time: T::zero(),
            state,
            prev_position: None,
            buffer: InputBuffer::default(),
            signal: None,
            snapshot: None,
            record_internal: false,
            internal: Vec::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    pub fn config(&self) -> &UnitConfig<T> {
        &self.config
    }

    pub fn stepper(&self) -> StepperKind {
        self.config.stepper
    }

    pub fn internal_step(&self) -> T {
        self.config.h
    }

    pub fn reactivity(&self) -> Reactivity {
        self.config.reactivity
    }

    pub fn is_rollbackable(&self) -> bool {
        self.config.rollbackable
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn state(&self) -> &Vector<T> {
        &self.state
    }

    pub fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.model.output_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn masks(&self) -> DependencyMasks {
        self.model.masks()
    }

    pub fn buffer(&self) -> &InputBuffer<T> {
        &self.buffer
    }

    /// Starts keeping every internal step; cleared on each call.
    pub fn set_record_internal(&mut self, on: bool) {
        self.record_internal = on;
        self.internal.clear();
    }

    /// `(time, state)` after every internal step since recording started.
    pub fn internal_steps(&self) -> &[(T, Vector<T>)] {
        &self.internal
    }

    /// Number of internal steps in a communication step of length `step`.
    pub fn steps_per(&self, step: T) -> Result<usize> {
        let ratio = step / self.config.h;
        let k = ratio.round();
        let tol = T::lit(1e-9);
        if k < T::one() || ((k - ratio).abs() > tol * ratio) {
            return Err(Error::StepNotDivisible {
                unit: self.name.clone(),
                h: self.config.h.as_f64(),
                step: step.as_f64(),
            });
        }
        Ok(k.to_usize().expect("positive integer"))
    }

    pub fn push_input_sample(&mut self, t: T, u: Vector<T>) -> Result<()> {
        if u.len() != self.input_dim() {
            return Err(Error::mismatch(
                format!("unit {}: input", self.name),
                self.input_dim(),
                u.len(),
            ));
        }
        self.buffer.push(t, u)
    }

    fn check_input(&self, u: &Vector<T>) -> Result<()> {
        if u.len() != self.input_dim() {
            return Err(Error::mismatch(
                format!("unit {}: input", self.name),
                self.input_dim(),
                u.len(),
            ));
        }
        Ok(())
    }

    fn build_signal(&self, args: &StepArguments<T>, start: T, end: T) -> Result<InputSignal<T>> {
        let reactive = self.config.reactivity.input_reactive();
        if reactive && self.config.approximation == ApproximationKind::ZeroOrderHold {
            return Ok(InputSignal::constant(args.current.clone(), start, end));
        }
        let mut kind = self.config.approximation;
        if kind == ApproximationKind::FirstOrderExtrapolation && self.buffer.len() < 2 {
            kind = ApproximationKind::ZeroOrderHold;
        }
        let endpoint = reactive.then_some(&args.current);
        InputSignal::new(&self.buffer, kind, (start, end), endpoint)
    }

    /// Advances the state by one communication step.
    pub fn do_step(&mut self, args: &StepArguments<T>) -> Result<()> {
        self.check_input(&args.current)?;
        if let Some(p) = &args.previous {
            self.check_input(p)?;
        }
        let k = self.steps_per(args.step)?;
        self.snapshot = Some(Snapshot {
            time: self.time,
            state: self.state.clone(),
            prev_position: self.prev_position.clone(),
            buffer: self.buffer.clone(),
            signal: self.signal.clone(),
            internal_len: self.internal.len(),
        });
        let start = self.time;
        let end = start + args.step;
        let sample = args
            .previous
            .clone()
            .unwrap_or_else(|| args.current.clone());
        let result = self
            .buffer
            .push(start, sample)
            .and_then(|_| self.build_signal(args, start, end))
            .and_then(|signal| {
                self.integrate(&signal, start, k)?;
                self.signal = Some(signal);
                Ok(())
            });
        match result {
            Ok(()) => {
                self.time = end;
                Ok(())
            }
            Err(e) => {
                self.restore()?;
                Err(match e {
                    e @ Error::Divergence { .. } => e,
                    other => Error::UnitStep {
                        unit: self.name.clone(),
                        time: start.as_f64(),
                        source: Box::new(other),
                    },
                })
            }
        }
    }

    fn integrate(&mut self, signal: &InputSignal<T>, start: T, k: usize) -> Result<()> {
        let h = self.config.h;
        let u = |t: T| signal.at(t);
        match &self.dynamics {
            Dynamics::FirstOrder(m) => {
                let f = |x: &Vector<T>, u: &Vector<T>| (m.derivative)(x, u);
                let mut x = self.state.clone();
                for n in 0..k {
                    let t = start + T::from_count(n) * h;
                    x = match self.config.stepper {
                        StepperKind::ExplicitEuler => explicit_euler_step(f, &x, u, t, h)?,
                        StepperKind::Midpoint => midpoint_step(f, &x, u, t, h)?,
                        StepperKind::ImplicitEuler => {
                            let out = implicit_euler_step(
                                f,
                                &x,
                                u,
                                t,
                                h,
                                &self.config.iteration,
                                self.config.guess_mode,
                            )?;
                            if !out.converged {
                                return Err(Error::Divergence {
                                    unit: self.name.clone(),
                                    time: t.as_f64(),
                                    iterations: out.iterates.len(),
                                });
                            }
                            out.value
                        }
                        StepperKind::Godunov => unreachable!("rejected at construction"),
                    };
                    if !x.is_finite() {
                        return Err(Error::NonFinite {
                            what: "state".into(),
                        });
                    }
                    if self.record_internal {
                        self.internal
                            .push((start + T::from_count(n + 1) * h, x.clone()));
                    }
                }
                self.state = x;
            }
            Dynamics::Godunov(m) => {
                let d = m.dim;
                let f2 = |x: &Vector<T>, u: &Vector<T>| (m.acceleration)(x, u);
                let (mut pos, vel) = self.state.split_at(d);
                let mut prev = self.prev_position.clone();
                for n in 0..k {
                    let t = start + T::from_count(n) * h;
                    let next = match &prev {
                        None => self
                            .config
                            .godunov_x_h
                            .clone()
                            .unwrap_or_else(|| godunov_bootstrap(&pos, &vel, h)),
                        Some(p) => godunov_step(f2, &pos, p, u, t, h)?,
                    };
                    if !next.is_finite() {
                        return Err(Error::NonFinite {
                            what: "position".into(),
                        });
                    }
                    prev = Some(std::mem::replace(&mut pos, next));
                    if self.record_internal {
                        let t_next = t + h;
                        let v = Self::lookahead_velocity(
                            f2,
                            &pos,
                            prev.as_ref().unwrap(),
                            u,
                            t_next,
                            h,
                        )?;
                        self.internal.push((t_next, pos.concat(&v)));
                    }
                }
                if let Some(p) = &prev {
                    let v =
                        Self::lookahead_velocity(f2, &pos, p, u, start + T::from_count(k) * h, h)?;
                    self.state = pos.concat(&v);
                }
                self.prev_position = prev;
            }
        }
        Ok(())
    }

    fn lookahead_velocity<F, U>(
        f2: F,
        pos: &Vector<T>,
        prev: &Vector<T>,
        u: U,
        t: T,
        h: T,
    ) -> Result<Vector<T>>
    where
        F: Fn(&Vector<T>, &Vector<T>) -> Vector<T>,
        U: Fn(T) -> Vector<T>,
    {
        let ahead = godunov_step(f2, pos, prev, u, t, h)?;
        Ok(central_velocity(&ahead, prev, h))
    }

    /// Output at the unit's current time. Output-reactive units use `uc`;
    /// output-delayed units use their own reconstructed input at that time.
    pub fn get_output(&self, uc: &Vector<T>) -> Result<Vector<T>> {
        self.check_input(uc)?;
        let delayed;
        let u = match (&self.signal, self.config.reactivity.output_reactive()) {
            (Some(s), false) => {
                delayed = s.at(self.time);
                &delayed
            }
            _ => uc,
        };
        let y = match &self.dynamics {
            Dynamics::FirstOrder(m) => (m.output)(&self.state, u),
            Dynamics::Godunov(m) => {
                let (x, v) = self.state.split_at(m.dim);
                (m.output)(&x, &v, u)
            }
        };
        if y.len() != self.output_dim() {
            return Err(Error::mismatch(
                format!("unit {}: output", self.name),
                self.output_dim(),
                y.len(),
            ));
        }
        Ok(y)
    }

    fn restore(&mut self) -> Result<()> {
        let snap = self.snapshot.take().ok_or_else(|| Error::NoSnapshot {
            unit: self.name.clone(),
        })?;
        self.time = snap.time;
        self.state = snap.state;
        self.prev_position = snap.prev_position;
        self.buffer = snap.buffer;
        self.signal = snap.signal;
        self.internal.truncate(snap.internal_len);
        Ok(())
    }

    /// Undoes the most recent `do_step`.
    pub fn rollback(&mut self) -> Result<()> {
        if !self.config.rollbackable {
            return Err(Error::RollbackUnsupported {
                unit: self.name.clone(),
            });
        }
        self.restore()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::ode::LinearSystemModel;
    use std::sync::Arc;

    fn car_model() -> Model<f64> {
        let m = 1576.0;
        Model::Linear(
            LinearSystemModel::new(
                Matrix::from_f64_rows(&[&[-(1e3 + 0.5) / m]]).unwrap(),
                Matrix::from_f64_rows(&[&[1e3 / m]]).unwrap(),
                Matrix::identity(1),
                Matrix::zeros(1, 1),
                Vector::from_f64(&[0.0]),
            )
            .unwrap(),
        )
    }

    fn v(x: f64) -> Vector<f64> {
        Vector::new(vec![x])
    }

    fn passthrough(reactivity: Reactivity) -> SimulationUnit<f64> {
        let m = GeneralModel::new(
            1,
            1,
            1,
            Arc::new(|_, u: &Vector<f64>| u.clone()),
            Arc::new(|_, u: &Vector<f64>| u.clone()),
            v(0.0),
        )
        .unwrap();
        let cfg = UnitConfig::new(StepperKind::ExplicitEuler, 0.1).reactivity(reactivity);
        SimulationUnit::new("p", Model::General(m), cfg).unwrap()
    }

    #[test]
    fn car_single_step() {
        let mut u = SimulationUnit::new(
            "car",
            car_model(),
            UnitConfig::new(StepperKind::ExplicitEuler, 0.2),
        )
        .unwrap();
        u.do_step(&StepArguments::jacobi(0.2, v(40.0))).unwrap();
        assert!((u.state()[0] - 5.0761).abs() < 1e-3);
        assert!((u.time() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_field_unchanged() {
        let m = LinearSystemModel::autonomous(Matrix::zeros(2, 2), Vector::from_f64(&[1.0, 2.0]))
            .unwrap();
        let mut u = SimulationUnit::new(
            "z",
            Model::Linear(m),
            UnitConfig::new(StepperKind::Midpoint, 0.05),
        )
        .unwrap();
        for _ in 0..7 {
            u.do_step(&StepArguments::jacobi(0.5, Vector::zeros(0)))
                .unwrap();
        }
        assert_eq!(u.state().as_slice(), &[1.0, 2.0]);
    }

    fn motor(c: f64) -> Model<f64> {
        Model::SecondOrder(
            SecondOrderModel::new(
                1,
                0,
                1,
                Arc::new(move |x: &Vector<f64>, _: &Vector<f64>| x.scale(-c)),
                Arc::new(|x: &Vector<f64>, _: &Vector<f64>, _: &Vector<f64>| x.clone()),
                v(1.0),
                v(0.0),
            )
            .unwrap(),
        )
    }

    #[test]
    fn motor_tracks_cosine() {
        let h = 1e-3;
        let mut u = SimulationUnit::new(
            "motor",
            motor(1e4),
            UnitConfig::new(StepperKind::Godunov, h),
        )
        .unwrap();
        for _ in 0..1000 {
            u.do_step(&StepArguments::jacobi(h, Vector::zeros(0)))
                .unwrap();
        }
        let exact = 100f64.cos();
        assert!(
            (u.state()[0] - exact).abs() < 0.02 * exact.abs(),
            "{} vs {exact}",
            u.state()[0]
        );
    }

    #[test]
    fn motor_amplitude_with_exact_bootstrap() {
        let h: f64 = 1e-3;
        let cfg = UnitConfig::new(StepperKind::Godunov, h).godunov_x_h(v((100.0 * h).cos()));
        let mut u = SimulationUnit::new("motor", motor(1e4), cfg).unwrap();
        u.set_record_internal(true);
        u.do_step(&StepArguments::jacobi(1.0, Vector::zeros(0)))
            .unwrap();
        let peak = u
            .internal_steps()
            .iter()
            .map(|(_, x)| x[0].abs())
            .fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 0.01, "peak {peak}");
    }

    #[test]
    fn godunov_velocity_is_central_difference() {
        let h = 1e-3;
        let mut u = SimulationUnit::new(
            "motor",
            motor(1e4),
            UnitConfig::new(StepperKind::Godunov, h),
        )
        .unwrap();
        u.set_record_internal(true);
        u.do_step(&StepArguments::jacobi(10.0 * h, Vector::zeros(0)))
            .unwrap();
        u.do_step(&StepArguments::jacobi(h, Vector::zeros(0)))
            .unwrap();
        let rec = u.internal_steps();
        let (x9, x11) = (rec[8].1[0], rec[10].1[0]);
        let v10 = rec[9].1[1];
        assert!((v10 - (x11 - x9) / (2.0 * h)).abs() < 1e-9);
    }

    #[test]
    fn godunov_needs_second_order_model() {
        assert!(
            SimulationUnit::new("c", car_model(), UnitConfig::new(StepperKind::Godunov, 0.1))
                .is_err()
        );
    }

    #[test]
    fn output_modes() {
        let reactive = passthrough(Reactivity::new(false, true));
        assert_eq!(reactive.get_output(&v(7.0)).unwrap(), v(7.0));
        let mut delayed = passthrough(Reactivity::new(false, false));
        delayed
            .do_step(&StepArguments::gauss_seidel(0.1, v(9.0), v(2.0)))
            .unwrap();
        assert_eq!(delayed.get_output(&v(9.0)).unwrap(), v(2.0));
    }

    #[test]
    fn no_feedthrough_output_modes_agree() {
        let mk = |out| {
            SimulationUnit::new(
                "car",
                car_model(),
                UnitConfig::new(StepperKind::ExplicitEuler, 0.1)
                    .reactivity(Reactivity::new(false, out)),
            )
            .unwrap()
        };
        let (mut a, mut b) = (mk(true), mk(false));
        for i in 0..5 {
            let args = StepArguments::jacobi(0.2, v(i as f64));
            a.do_step(&args).unwrap();
            b.do_step(&args).unwrap();
            assert_eq!(
                a.get_output(&v(3.0)).unwrap(),
                b.get_output(&v(3.0)).unwrap()
            );
        }
    }

    #[test]
    fn rollback_contract() {
        let mut u = SimulationUnit::new(
            "car",
            car_model(),
            UnitConfig::new(StepperKind::ExplicitEuler, 0.05),
        )
        .unwrap();
        u.do_step(&StepArguments::jacobi(0.2, v(40.0))).unwrap();
        let before = (u.state().clone(), u.time(), u.buffer().clone());
        let args = StepArguments::jacobi(0.2, v(30.0));
        u.do_step(&args).unwrap();
        let after = u.state().clone();
        u.rollback().unwrap();
        assert_eq!((u.state().clone(), u.time(), u.buffer().clone()), before);
        assert!(matches!(u.rollback(), Err(Error::NoSnapshot { .. })));
        u.do_step(&args).unwrap();
        assert_eq!(u.state(), &after);
    }

    #[test]
    fn rollback_refused_when_unsupported() {
        let cfg = UnitConfig::new(StepperKind::ExplicitEuler, 0.1).rollbackable(false);
        let mut u = SimulationUnit::new("car", car_model(), cfg).unwrap();
        u.do_step(&StepArguments::jacobi(0.1, v(1.0))).unwrap();
        assert!(matches!(
            u.rollback(),
            Err(Error::RollbackUnsupported { .. })
        ));
    }

    #[test]
    fn delayed_step_ignores_current_input() {
        let mk = || {
            SimulationUnit::new(
                "car",
                car_model(),
                UnitConfig::new(StepperKind::ExplicitEuler, 0.05),
            )
            .unwrap()
        };
        let (mut a, mut b) = (mk(), mk());
        a.do_step(&StepArguments::gauss_seidel(0.2, v(40.0), v(10.0)))
            .unwrap();
        b.do_step(&StepArguments::gauss_seidel(0.2, v(-1e6), v(10.0)))
            .unwrap();
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn step_divisibility() {
        let u = SimulationUnit::new(
            "car",
            car_model(),
            UnitConfig::new(StepperKind::ExplicitEuler, 0.03),
        )
        .unwrap();
        assert!(matches!(
            u.steps_per(0.1),
            Err(Error::StepNotDivisible { .. })
        ));
        assert_eq!(u.steps_per(0.09).unwrap(), 3);
        assert!(u.steps_per(0.01).is_err());
    }

    #[test]
    fn push_samples() {
        let mut u = passthrough(Reactivity::default());
        u.push_input_sample(0.0, v(1.0)).unwrap();
        u.push_input_sample(0.2, v(2.0)).unwrap();
        assert!(u.push_input_sample(0.2, v(3.0)).is_err());
        u.push_input_sample(0.4, v(3.0)).unwrap();
        let kept: Vec<f64> = u.buffer().samples().map(|s| s.1[0]).collect();
        assert_eq!(kept, vec![2.0, 3.0]);
    }

    #[test]
    fn implicit_divergence_reported() {
        let m = LinearSystemModel::autonomous(Matrix::from_f64_rows(&[&[-50.0]]).unwrap(), v(1.0))
            .unwrap();
        let cfg = UnitConfig::new(StepperKind::ImplicitEuler, 0.1)
            .iteration(IterationConfig::new(1e-9, 30).unwrap());
        let mut u = SimulationUnit::new("stiff", Model::Linear(m), cfg).unwrap();
        let err = u
            .do_step(&StepArguments::jacobi(0.1, Vector::zeros(0)))
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
        assert_eq!(u.state()[0], 1.0);
        assert_eq!(u.time(), 0.0);
    }

    #[test]
    fn reactive_interpolation_reaches_endpoint() {
        let cfg = UnitConfig::new(StepperKind::ExplicitEuler, 0.25)
            .approximation(ApproximationKind::LinearInterpolation)
            .reactivity(Reactivity::new(true, true));
        let m = GeneralModel::new(
            1,
            1,
            1,
            Arc::new(|_, u: &Vector<f64>| u.clone()),
            Arc::new(|x: &Vector<f64>, _| x.clone()),
            v(0.0),
        )
        .unwrap();
        let mut u = SimulationUnit::new("int", Model::General(m), cfg).unwrap();
        u.do_step(&StepArguments::gauss_seidel(1.0, v(4.0), v(0.0)))
            .unwrap();
        // left Riemann sum of u(t) = 4t on [0, 1] with h = 0.25
        assert!((u.state()[0] - 0.25 * (0.0 + 1.0 + 2.0 + 3.0)).abs() < 1e-12);
    }
}
