//! Cruise-control car, mass-spring-damper, and the car/motor/passenger system,
//! plus small scenarios exhibiting each kind of algebraic loop.

use std::sync::Arc;

use crate::approximation::ApproximationKind;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::ode::{AffineDrive, DependencyMasks, LinearSystemModel, Model, SecondOrderModel};
use crate::scenario::Scenario;
use crate::solvers::StepperKind;
use crate::units::{Reactivity, SimulationUnit, UnitConfig};
use crate::Scalar;

/// Cruise-control car: `m v' = k (v_d - v) - c_f v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarParams {
    pub m: f64,
    pub k: f64,
    pub c_f: f64,
    pub v_d: f64,
}

impl Default for CarParams {
    fn default() -> Self {
        CarParams {
            m: 1576.0,
            k: 1e3,
            c_f: 0.5,
            v_d: 40.0,
        }
    }
}

impl CarParams {
    /// `a` in `v' = a v + b`.
    pub fn a(&self) -> f64 {
        -(self.k + self.c_f) / self.m
    }

    pub fn b(&self) -> f64 {
        self.k * self.v_d / self.m
    }

    /// Lipschitz constant of the velocity field, `(k + c_f) / m`.
    pub fn dfdv(&self) -> f64 {
        (self.k + self.c_f) / self.m
    }
}

fn m1<T: Scalar>(rows: &[&[f64]]) -> Matrix<T> {
    Matrix::from_f64_rows(rows).expect("well-formed constant matrix")
}

/// Velocity state, desired velocity input, velocity output.
pub fn car_model<T: Scalar>(p: &CarParams) -> LinearSystemModel<T> {
    LinearSystemModel::new(
        m1(&[&[p.a()]]),
        m1(&[&[p.k / p.m]]),
        m1(&[&[1.0]]),
        m1(&[&[0.0]]),
        Vector::from_f64(&[0.0]),
    )
    .expect("car dimensions")
}

/// Car with the desired velocity folded in as a constant drive.
pub fn car_closed<T: Scalar>(p: &CarParams) -> (LinearSystemModel<T>, AffineDrive<T>) {
    let m = LinearSystemModel::autonomous(m1(&[&[p.a()]]), Vector::from_f64(&[0.0]))
        .expect("car dimensions");
    (m, AffineDrive::new(Vector::from_f64(&[p.b()])))
}

/// `s' = 0`, output `s`; a held signal with no inputs.
pub fn constant_source<T: Scalar>(values: &[f64]) -> LinearSystemModel<T> {
    let n = values.len();
    LinearSystemModel::new(
        Matrix::zeros(n, n),
        Matrix::zeros(n, 0),
        Matrix::identity(n),
        Matrix::zeros(n, 0),
        Vector::from_f64(values),
    )
    .expect("source dimensions")
}

/// Mass-spring-damper with unit mass: state `[x, v]`, force input, full-state output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsdParams {
    pub m: f64,
    pub c: f64,
    pub c_f: f64,
    pub x0: f64,
    pub v0: f64,
}

impl Default for MsdParams {
    fn default() -> Self {
        MsdParams {
            m: 1.0,
            c: 1.0,
            c_f: 1e-4,
            x0: 1.0,
            v0: 0.0,
        }
    }
}

impl MsdParams {
    pub fn a_matrix<T: Scalar>(&self) -> Matrix<T> {
        m1(&[&[0.0, 1.0], &[-self.c / self.m, -self.c_f / self.m]])
    }
}

pub fn msd_model<T: Scalar>(p: &MsdParams) -> LinearSystemModel<T> {
    LinearSystemModel::new(
        p.a_matrix(),
        m1(&[&[0.0], &[1.0 / p.m]]),
        Matrix::identity(2),
        Matrix::zeros(2, 1),
        Vector::from_f64(&[p.x0, p.v0]),
    )
    .expect("msd dimensions")
}

/// The same system with its second-order structure, `x'' = (-c x - c_f v + f) / m`
/// expressed as a first-order velocity term is not representable, so damping is
/// only available through [`msd_model`]; this form is the undamped oscillator.
pub fn oscillator<T: Scalar>(c: f64, x0: f64, v0: f64) -> SecondOrderModel<T> {
    let c = T::lit(c);
    SecondOrderModel::new(
        1,
        0,
        1,
        Arc::new(move |x: &Vector<T>, _: &Vector<T>| x.scale(-c)),
        Arc::new(|x: &Vector<T>, _: &Vector<T>, _: &Vector<T>| x.clone()),
        Vector::from_f64(&[x0]),
        Vector::from_f64(&[v0]),
    )
    .expect("oscillator dimensions")
    .with_masks(DependencyMasks {
        output_input: vec![vec![]],
        output_state: vec![vec![true, false]],
        state_input: vec![vec![], vec![]],
    })
    .expect("oscillator masks")
}

/// Car, motor and passenger parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassengerCarParams {
    pub c_m: f64,
    pub m_c: f64,
    pub d_c: f64,
    pub k_c: f64,
    pub v_d: f64,
    pub a_c: f64,
    pub m_t: f64,
    pub c_t: f64,
    pub d_t: f64,
    pub m_h: f64,
    pub c_h: f64,
    pub d_h: f64,
}

impl Default for PassengerCarParams {
    fn default() -> Self {
        PassengerCarParams {
            c_m: 1e4,
            m_c: 1576.0,
            d_c: 0.5,
            k_c: 1e3,
            v_d: 40.0,
            a_c: 5e4,
            m_t: 75.0,
            c_t: 1e5,
            d_t: 1e5,
            m_h: 5.0,
            c_h: 1e6,
            d_h: 1e4,
        }
    }
}

impl PassengerCarParams {
    /// Mass moved by the car's engine: car, torso and head.
    pub fn total_mass(&self) -> f64 {
        self.m_c + self.m_t + self.m_h
    }

    /// Car acceleration as `(velocity, motor, constant)` coefficients.
    fn car_accel(&self) -> (f64, f64, f64) {
        let m = self.total_mass();
        (
            -(self.k_c + self.d_c) / m,
            self.a_c / m,
            self.k_c * self.v_d / m,
        )
    }

    /// Passenger rows `[x_t, v_t, x_h, v_h]` of the relative dynamics.
    fn passenger_rows(&self) -> [[f64; 4]; 4] {
        let (mt, mh) = (self.m_t, self.m_h);
        [
            [0.0, 1.0, 0.0, 0.0],
            [
                -(self.c_h + self.c_t) / mt,
                -(self.d_h + self.d_t) / mt,
                self.c_h / mt,
                self.d_h / mt,
            ],
            [0.0, 0.0, 0.0, 1.0],
            [self.c_h / mh, self.d_h / mh, -self.c_h / mh, -self.d_h / mh],
        ]
    }
}

/// Motor vibrations `x'' = -c_m x`, position output.
pub fn motor_model<T: Scalar>(p: &PassengerCarParams) -> SecondOrderModel<T> {
    oscillator(p.c_m, 1.0, 0.0)
}

/// Car states `[x_c, v_c, 1]`, motor position input, outputs `[v_c, a_c]`.
pub fn passenger_car_model<T: Scalar>(p: &PassengerCarParams) -> LinearSystemModel<T> {
    let (av, am, b) = p.car_accel();
    LinearSystemModel::new(
        m1(&[&[0.0, 1.0, 0.0], &[0.0, av, b], &[0.0, 0.0, 0.0]]),
        m1(&[&[0.0], &[am], &[0.0]]),
        m1(&[&[0.0, 1.0, 0.0], &[0.0, av, b]]),
        m1(&[&[0.0], &[am]]),
        Vector::from_f64(&[0.0, 0.0, 1.0]),
    )
    .expect("car dimensions")
}

/// Torso and head relative to the car: states `[x_t, v_t, x_h, v_h]`,
/// car acceleration input, outputs `[x_t, x_h]`.
pub fn passenger_model<T: Scalar>(p: &PassengerCarParams) -> LinearSystemModel<T> {
    let r = p.passenger_rows();
    let rows: Vec<&[f64]> = r.iter().map(|x| &x[..]).collect();
    LinearSystemModel::new(
        m1(&rows),
        m1(&[&[0.0], &[-1.0], &[0.0], &[-1.0]]),
        m1(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]]),
        m1(&[&[0.0], &[0.0]]),
        Vector::zeros(4),
    )
    .expect("passenger dimensions")
}

/// Whole system on `[x_m, v_m, x_c, v_c, x_t, v_t, x_h, v_h]`, with the cruise
/// target as a constant drive.
pub fn passenger_car_monolithic<T: Scalar>(
    p: &PassengerCarParams,
) -> (LinearSystemModel<T>, AffineDrive<T>) {
    let (av, am, b) = p.car_accel();
    let mut a = [[0.0f64; 8]; 8];
    a[0][1] = 1.0;
    a[1][0] = -p.c_m;
    a[2][3] = 1.0;
    a[3][3] = av;
    a[3][0] = am;
    let r = p.passenger_rows();
    for i in 0..4 {
        for j in 0..4 {
            a[4 + i][4 + j] = r[i][j];
        }
    }
    // both passenger velocities are driven by minus the car acceleration
    for row in [5, 7] {
        a[row][3] -= av;
        a[row][0] -= am;
    }
    let rows: Vec<&[f64]> = a.iter().map(|x| &x[..]).collect();
    let mut x0 = [0.0; 8];
    x0[0] = 1.0;
    let model = LinearSystemModel::autonomous(m1(&rows), Vector::from_f64(&x0)).expect("8 states");
    let drive = AffineDrive::new(Vector::from_f64(&[0.0, 0.0, 0.0, b, 0.0, -b, 0.0, -b]));
    (model, drive)
}

fn unit<T: Scalar>(name: &str, model: Model<T>, stepper: StepperKind, h: f64) -> SimulationUnit<T> {
    SimulationUnit::new(name, model, UnitConfig::new(stepper, T::lit(h))).expect("valid unit")
}

/// Car driven by a constant desired-velocity source.
pub fn car_scenario<T: Scalar>(
    stepper: StepperKind,
    h: f64,
    step: f64,
    end: f64,
) -> Result<Scenario<T>> {
    let p = CarParams::default();
    Scenario::builder(T::lit(step), T::lit(end))
        .unit(unit("car", Model::Linear(car_model(&p)), stepper, h))
        .unit(unit(
            "driver",
            Model::Linear(constant_source(&[p.v_d])),
            StepperKind::ExplicitEuler,
            h,
        ))
        .connect("driver.y[0]", "car.u[0]")?
        .build()
}

/// Step sizes of the car/motor/passenger co-simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassengerCarSteps {
    pub step: f64,
    pub end: f64,
    pub h_motor: f64,
    pub h_car: f64,
    pub h_passenger: f64,
}

impl Default for PassengerCarSteps {
    fn default() -> Self {
        PassengerCarSteps {
            step: 0.01,
            end: 1.0,
            h_motor: 1e-3,
            h_car: 0.01,
            h_passenger: 1e-4,
        }
    }
}

/// Motor (Godunov) drives the car, whose acceleration drives the passenger.
pub fn passenger_car_scenario<T: Scalar>(
    p: &PassengerCarParams,
    s: &PassengerCarSteps,
) -> Result<Scenario<T>> {
    Scenario::builder(T::lit(s.step), T::lit(s.end))
        .unit(unit(
            "motor",
            Model::SecondOrder(motor_model(p)),
            StepperKind::Godunov,
            s.h_motor,
        ))
        .unit(unit(
            "car",
            Model::Linear(passenger_car_model(p)),
            StepperKind::ExplicitEuler,
            s.h_car,
        ))
        .unit(unit(
            "passenger",
            Model::Linear(passenger_model(p)),
            StepperKind::ExplicitEuler,
            s.h_passenger,
        ))
        .connect("motor.y[0]", "car.u[0]")?
        .connect("car.y[1]", "passenger.u[0]")?
        .build()
}

fn scalar_linear<T: Scalar>(a: f64, b: f64, c: f64, d: f64, x0: f64) -> LinearSystemModel<T> {
    LinearSystemModel::new(
        m1(&[&[a]]),
        m1(&[&[b]]),
        m1(&[&[c]]),
        m1(&[&[d]]),
        Vector::from_f64(&[x0]),
    )
    .expect("scalar model")
}

/// Mass-spring-damper split into a position integrator `x' = v_in` and a
/// velocity unit `v' = -c x_in - c_f v`, coupled in a feedback loop.
pub fn split_msd_scenario<T: Scalar>(
    p: &MsdParams,
    stepper: StepperKind,
    step: f64,
    h: f64,
    end: f64,
) -> Result<Scenario<T>> {
    let pos = scalar_linear(0.0, 1.0, 1.0, 0.0, p.x0);
    let vel = scalar_linear(-p.c_f / p.m, -p.c / p.m, 1.0, 0.0, p.v0);
    Scenario::builder(T::lit(step), T::lit(end))
        .unit(unit("position", Model::Linear(pos), stepper, h))
        .unit(unit("velocity", Model::Linear(vel), stepper, h))
        .connect("velocity.y[0]", "position.u[0]")?
        .connect("position.y[0]", "velocity.u[0]")?
        .build()
}

/// Feedback pair with direct feedthrough in both units: a real output loop.
pub fn output_loop_scenario<T: Scalar>(d1: f64, d2: f64) -> Result<Scenario<T>> {
    Scenario::builder(T::lit(0.1), T::lit(2.0))
        .unit(unit(
            "a",
            Model::Linear(scalar_linear(-1.0, 1.0, 1.0, d1, 1.0)),
            StepperKind::ExplicitEuler,
            0.05,
        ))
        .unit(unit(
            "b",
            Model::Linear(scalar_linear(-2.0, 0.5, 1.0, d2, -1.0)),
            StepperKind::ExplicitEuler,
            0.05,
        ))
        .connect("a.y[0]", "b.u[0]")?
        .connect("b.y[0]", "a.u[0]")?
        .build()
}

/// Feedback pair where `a` interpolates its input and `b` has feedthrough:
/// the loop closes through `a`'s state.
pub fn state_loop_scenario<T: Scalar>() -> Result<Scenario<T>> {
    let cfg = UnitConfig::new(StepperKind::ExplicitEuler, T::lit(0.05))
        .approximation(ApproximationKind::LinearInterpolation)
        .reactivity(Reactivity::new(true, true));
    let a = SimulationUnit::new(
        "a",
        Model::Linear(scalar_linear(-1.0, 1.0, 1.0, 0.0, 1.0)),
        cfg,
    )?;
    Scenario::builder(T::lit(0.1), T::lit(2.0))
        .unit(a)
        .unit(unit(
            "b",
            Model::Linear(scalar_linear(-2.0, 0.5, 1.0, 0.5, -1.0)),
            StepperKind::ExplicitEuler,
            0.05,
        ))
        .connect("a.y[0]", "b.u[0]")?
        .connect("b.y[0]", "a.u[0]")?
        .build()
}

/// Two-port units whose vector-level dependencies form a cycle that vanishes
/// once individual components are considered.
pub fn virtual_loop_scenario<T: Scalar>() -> Result<Scenario<T>> {
    let a = LinearSystemModel::new(
        m1(&[&[-1.0]]),
        m1(&[&[1.0, 1.0]]),
        m1(&[&[1.0], &[1.0]]),
        m1(&[&[1.0, 0.0], &[0.0, 0.0]]),
        Vector::from_f64(&[1.0]),
    )?;
    let b = LinearSystemModel::new(
        m1(&[&[-2.0]]),
        m1(&[&[1.0]]),
        m1(&[&[1.0], &[1.0]]),
        m1(&[&[0.0], &[1.0]]),
        Vector::from_f64(&[-1.0]),
    )?;
    Scenario::builder(T::lit(0.1), T::lit(2.0))
        .unit(unit(
            "a",
            Model::Linear(a),
            StepperKind::ExplicitEuler,
            0.05,
        ))
        .unit(unit(
            "b",
            Model::Linear(b),
            StepperKind::ExplicitEuler,
            0.05,
        ))
        .connect("b.y[0]", "a.u[0]")?
        .connect("a.y[0]", "b.u[0]")?
        .connect("b.y[1]", "a.u[1]")?
        .build()
}

/// Built-in model by name.
pub fn model_by_name<T: Scalar>(name: &str) -> Result<Model<T>> {
    let p = PassengerCarParams::default();
    Ok(match name {
        "car" => Model::Linear(car_model(&CarParams::default())),
        "msd" => Model::Linear(msd_model(&MsdParams::default())),
        "motor" => Model::SecondOrder(motor_model(&p)),
        "passenger_car" => Model::Linear(passenger_car_model(&p)),
        "passenger" => Model::Linear(passenger_model(&p)),
        _ => {
            return Err(Error::InvalidScenario(format!(
                "unknown builtin model {name:?}"
            )))
        }
    })
}

pub const MODEL_NAMES: [&str; 5] = ["car", "msd", "motor", "passenger_car", "passenger"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::analytical_solution;

    #[test]
    fn car_coefficients() {
        let p = CarParams::default();
        assert!((p.dfdv() - 0.63484).abs() < 1e-5);
        assert!((-p.b() / p.a() - 39.980).abs() < 1e-3);
    }

    #[test]
    fn monolithic_matches_subsystems() {
        // derivative of the assembled system agrees with the three units wired together
        let p = PassengerCarParams::default();
        let (mono, drive) = passenger_car_monolithic::<f64>(&p);
        let car = passenger_car_model::<f64>(&p);
        let psg = passenger_model::<f64>(&p);
        let s = Vector::from_f64(&[0.3, -2.0, 1.0, 4.0, 0.01, 0.2, -0.02, 0.1]);
        let mono_dx = &mono.derivative(&s, &Vector::zeros(0)) + &drive.b;
        let xm = s.slice(0, 1);
        let car_x = Vector::from_f64(&[s[2], s[3], 1.0]);
        let car_dx = car.derivative(&car_x, &xm);
        let a_car = car.output(&car_x, &xm)[1];
        let psg_dx = psg.derivative(&s.slice(4, 4), &Vector::from_f64(&[a_car]));
        let expected = [
            s[1],
            -p.c_m * s[0],
            car_dx[0],
            car_dx[1],
            psg_dx[0],
            psg_dx[1],
            psg_dx[2],
            psg_dx[3],
        ];
        for (a, b) in mono_dx.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
        assert!((p.total_mass() - 1656.0).abs() < 1e-12);
    }

    #[test]
    fn monolithic_initial_state() {
        let (m, d) = passenger_car_monolithic::<f64>(&PassengerCarParams::default());
        let x = analytical_solution(&m, &d, 0.0).unwrap();
        assert_eq!(x[0], 1.0);
    }

    #[test]
    fn scenarios_build() {
        assert!(car_scenario::<f64>(StepperKind::ExplicitEuler, 0.2, 0.2, 10.0).is_ok());
        assert!(passenger_car_scenario::<f64>(
            &PassengerCarParams::default(),
            &PassengerCarSteps::default()
        )
        .is_ok());
        assert!(split_msd_scenario::<f64>(
            &MsdParams::default(),
            StepperKind::ExplicitEuler,
            0.1,
            0.1,
            1.0
        )
        .is_ok());
        assert!(output_loop_scenario::<f64>(0.5, 0.4).is_ok());
        assert!(state_loop_scenario::<f64>().is_ok());
        assert!(virtual_loop_scenario::<f64>().is_ok());
        for n in MODEL_NAMES {
            assert!(model_by_name::<f64>(n).is_ok());
        }
        assert!(model_by_name::<f64>("nope").is_err());
    }
}
