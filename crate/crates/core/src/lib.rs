#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod approximation;
pub mod builtins;
pub mod error;
pub mod io;
pub mod numerics;
pub mod ode;
pub mod orchestration;
mod scalar;
pub mod scenario;
pub mod solvers;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use numerics::{Matrix, Vector};
pub use ode::{LinearSystemModel, Model};
pub use orchestration::{run, Convergence, OrchestratorKind, RunOptions, Trace};
pub use scenario::Scenario;
pub use solvers::StepperKind;
pub use units::{SimulationUnit, UnitConfig};

pub type Matrix64 = Matrix<f64>;
pub type Vector64 = Vector<f64>;
pub type Scenario64 = Scenario<f64>;
pub type Unit64 = SimulationUnit<f64>;
pub type Trace64 = Trace<f64>;

pub type Matrix32 = Matrix<f32>;
pub type Vector32 = Vector<f32>;
pub type Scenario32 = Scenario<f32>;
pub type Unit32 = SimulationUnit<f32>;
pub type Trace32 = Trace<f32>;
