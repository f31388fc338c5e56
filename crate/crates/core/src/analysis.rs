//! Linear stability maps of unit and co-simulation steps, and experimental
//! error and order measurements.

use std::fmt;

use rayon::prelude::*;

use crate::approximation::ApproximationKind;
use crate::error::{Error, Result};
use crate::numerics::{inverse, spectral_radius, Matrix, Vector};
use crate::ode::{analytical_series, AffineDrive, LinearSystemModel};
use crate::orchestration::{ConvergenceMode, OrchestratorKind, Trace};
use crate::scenario::Scenario;
use crate::solvers::{
    explicit_euler_step, implicit_euler_step, midpoint_step, GuessMode, IterationConfig,
    StepperKind,
};
use crate::units::SimulationUnit;
use crate::Scalar;

/// Distance from 1 under which a spectral radius is reported as marginal.
pub const MARGINAL_TOLERANCE: f64 = 1e-6;

/// Errors below this are treated as round-off and left out of order fits.
pub const ROUND_OFF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl Verdict {
    pub fn from_radius<T: Scalar>(rho: T) -> Self {
        let d = rho.as_f64() - 1.0;
        if d.abs() < MARGINAL_TOLERANCE {
            Verdict::Marginal
        } else if d < 0.0 {
            Verdict::Stable
        } else {
            Verdict::Unstable
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "STABLE",
            Verdict::Unstable => "UNSTABLE",
            Verdict::Marginal => "MARGINAL",
        })
    }
}

/// One step of a linear scheme, `x_{i+1} = M x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMatrix<T> {
    pub matrix: Matrix<T>,
}

impl<T: Scalar> StepMatrix<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        matrix.ensure_square()?;
        Ok(StepMatrix { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn spectral_radius(&self) -> Result<T> {
        spectral_radius(&self.matrix)
    }

    pub fn verdict(&self) -> Result<Verdict> {
        Ok(Verdict::from_radius(self.spectral_radius()?))
    }

    pub fn report(&self) -> Result<StabilityReport<T>> {
        let rho = self.spectral_radius()?;
        Ok(StabilityReport {
            dim: self.dim(),
            rho,
            verdict: Verdict::from_radius(rho),
        })
    }

    pub fn apply(&self, x: &Vector<T>) -> Result<Vector<T>> {
        self.matrix.mul_vec(x)
    }

    /// `n` applications to `x`, keeping every iterate including `x`.
    pub fn orbit(&self, x: &Vector<T>, n: usize) -> Result<Vec<Vector<T>>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(x.clone());
        for _ in 0..n {
            let next = self.apply(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn pow(&self, k: usize) -> Result<Self> {
        Ok(StepMatrix {
            matrix: self.matrix.powi(k)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport<T> {
    pub dim: usize,
    pub rho: T,
    pub verdict: Verdict,
}

impl<T: Scalar> fmt::Display for StabilityReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimension: {}", self.dim)?;
        writeln!(f, "spectral radius: {:.6}", self.rho.as_f64())?;
        write!(f, "verdict: {}", self.verdict)
    }
}

/// Step map of `method` applied to `x' = A x`.
pub fn standalone_step_matrix<T: Scalar>(
    method: StepperKind,
    a: &Matrix<T>,
    h: T,
) -> Result<StepMatrix<T>> {
    a.ensure_square()?;
    let n = a.rows();
    let id = Matrix::identity(n);
    let ha = a.scale(h);
    let m = match method {
        StepperKind::ExplicitEuler => id.add(&ha)?,
        StepperKind::ImplicitEuler => inverse(&id.sub(&ha)?)?,
        StepperKind::Midpoint => id.add(&ha)?.add(&ha.mul(&ha)?.scale(T::lit(0.5)))?,
        StepperKind::Godunov => {
            return Err(Error::Unsupported(
                "the Godunov stepper has no first-order step matrix".into(),
            ))
        }
    };
    StepMatrix::new(m)
}

/// Largest explicit Euler step keeping `x'' = -c^2 x - c_f x'` stable.
pub fn explicit_euler_msd_hmax<T: Scalar>(c: T, c_f: T) -> Result<T> {
    if !(c > T::zero()) || c_f < T::zero() {
        return Err(Error::InvalidScenario("need c > 0 and c_f >= 0".into()));
    }
    let c2 = c * c;
    if c_f * c_f < T::lit(4.0) * c2 {
        // |1 + h λ|^2 = 1 - c_f h + c^2 h^2
        return Ok(c_f / c2);
    }
    let a = Matrix::from_rows(&[vec![T::zero(), T::one()], vec![-c2, -c_f]])?;
    let stable = |h: T| -> Result<bool> {
        let rho = standalone_step_matrix(StepperKind::ExplicitEuler, &a, h)?.spectral_radius()?;
        Ok(rho <= T::one())
    };
    let mut hi = T::one() / (c_f + c2);
    while stable(hi)? {
        hi = hi + hi;
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if stable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn linear_model<T: Scalar>(unit: &SimulationUnit<T>) -> Result<&LinearSystemModel<T>> {
    unit.model()
        .as_linear()
        .ok_or_else(|| Error::Unsupported(format!("unit '{}' is not linear", unit.name())))
}

/// Map of one communication step of `unit` on `[x; u]` with the input held.
pub fn unit_step_matrix<T: Scalar>(unit: &SimulationUnit<T>, step: T) -> Result<StepMatrix<T>> {
    let m = linear_model(unit)?;
    if unit.config().approximation != ApproximationKind::ZeroOrderHold
        || unit.reactivity().input_reactive()
    {
        return Err(Error::Unsupported(format!(
            "unit '{}' must be input delayed with zero-order hold",
            unit.name()
        )));
    }
    let k = unit.steps_per(step)?;
    let (n, p) = (m.state_dim(), m.input_dim());
    let mut aug = Matrix::zeros(n + p, n + p);
    aug.set_block(0, 0, &m.a);
    aug.set_block(0, n, &m.b);
    standalone_step_matrix(unit.stepper(), &aug, unit.internal_step())?.pow(k)
}

/// Blocks `[[M1x, M1u], [M2x, M2u]]` of a unit step map.
struct UnitBlocks<T> {
    m1x: Matrix<T>,
    m1u: Matrix<T>,
    m2x: Matrix<T>,
    m2u: Matrix<T>,
}

fn unit_blocks<T: Scalar>(unit: &SimulationUnit<T>, step: T) -> Result<UnitBlocks<T>> {
    let m = unit_step_matrix(unit, step)?.matrix;
    let (n, p) = (unit.state_dim(), unit.input_dim());
    Ok(UnitBlocks {
        m1x: m.submatrix(0, 0, n, n),
        m1u: m.submatrix(0, n, n, p),
        m2x: m.submatrix(n, 0, p, n),
        m2u: m.submatrix(n, n, p, p),
    })
}

fn check_pair<T: Scalar>(u1: &SimulationUnit<T>, u2: &SimulationUnit<T>) -> Result<()> {
    if u1.input_dim() != u2.output_dim() || u2.input_dim() != u1.output_dim() {
        return Err(Error::Unsupported(format!(
            "'{}' and '{}' do not form a feedback pair",
            u1.name(),
            u2.name()
        )));
    }
    Ok(())
}

/// Jacobi step map of the feedback pair `u1 = y2`, `u2 = y1` with `D2 = 0`,
/// acting on `(x1; x2)`.
pub fn cosim_step_matrix_jacobi<T: Scalar>(
    u1: &SimulationUnit<T>,
    u2: &SimulationUnit<T>,
    step: T,
) -> Result<StepMatrix<T>> {
    check_pair(u1, u2)?;
    let (m1, m2) = (linear_model(u1)?, linear_model(u2)?);
    if !m2.d.is_zero() {
        return Err(Error::Unsupported(format!(
            "unit '{}' must have no feedthrough",
            u2.name()
        )));
    }
    let (n1, n2) = (m1.state_dim(), m2.state_dim());
    let a1 = unit_step_matrix(u1, step)?.matrix;
    let a2 = unit_step_matrix(u2, step)?.matrix;
    let i1 = Matrix::identity(n1);
    let i2 = Matrix::identity(n2);
    let d1c2 = m1.d.mul(&m2.c)?;
    let project = Matrix::from_blocks(&[
        vec![
            Some(&i1),
            Some(&Matrix::zeros(n1, u1.input_dim())),
            None,
            Some(&Matrix::zeros(n1, u2.input_dim())),
        ],
        vec![
            None,
            Some(&Matrix::zeros(n2, u1.input_dim())),
            Some(&i2),
            Some(&Matrix::zeros(n2, u2.input_dim())),
        ],
    ])?;
    let steps = Matrix::block_diagonal(&[&a1, &a2]);
    let couple = Matrix::from_blocks(&[
        vec![Some(&i1), Some(&Matrix::zeros(n1, n2))],
        vec![Some(&Matrix::zeros(u1.input_dim(), n1)), Some(&m2.c)],
        vec![Some(&Matrix::zeros(n2, n1)), Some(&i2)],
        vec![Some(&m1.c), Some(&d1c2)],
    ])?;
    StepMatrix::new(project.mul(&steps)?.mul(&couple)?)
}

/// Iterative Jacobi step map of the same feedback pair on `(x1; u1; x2; u2)`,
/// with inputs taken at the end of each step.
pub fn cosim_step_matrix_iterative_jacobi<T: Scalar>(
    u1: &SimulationUnit<T>,
    u2: &SimulationUnit<T>,
    step: T,
) -> Result<StepMatrix<T>> {
    check_pair(u1, u2)?;
    let (m1, m2) = (linear_model(u1)?, linear_model(u2)?);
    let (n1, p1, n2, p2) = (
        u1.state_dim(),
        u1.input_dim(),
        u2.state_dim(),
        u2.input_dim(),
    );
    let b1 = unit_blocks(u1, step)?;
    let b2 = unit_blocks(u2, step)?;
    let z = Matrix::zeros;
    let current = Matrix::from_blocks(&[
        vec![
            Some(&b1.m1x),
            Some(&z(n1, p1)),
            Some(&z(n1, n2)),
            Some(&z(n1, p2)),
        ],
        vec![
            Some(&b1.m2x),
            Some(&z(p1, p1)),
            Some(&z(p1, n2)),
            Some(&z(p1, p2)),
        ],
        vec![
            Some(&z(n2, n1)),
            Some(&z(n2, p1)),
            Some(&b2.m1x),
            Some(&z(n2, p2)),
        ],
        vec![
            Some(&z(p2, n1)),
            Some(&z(p2, p1)),
            Some(&b2.m2x),
            Some(&z(p2, p2)),
        ],
    ])?;
    let next = Matrix::from_blocks(&[
        vec![
            Some(&z(n1, n1)),
            Some(&z(n1, p1)),
            Some(&b1.m1u.mul(&m2.c)?),
            Some(&z(n1, p2)),
        ],
        vec![
            Some(&z(p1, n1)),
            Some(&z(p1, p1)),
            Some(&b1.m2u.mul(&m2.c)?),
            Some(&z(p1, p2)),
        ],
        vec![
            Some(&b2.m1u.mul(&m1.c)?),
            Some(&b2.m1u.mul(&m1.d)?),
            Some(&z(n2, n2)),
            Some(&z(n2, p2)),
        ],
        vec![
            Some(&b2.m2u.mul(&m1.c)?),
            Some(&b2.m2u.mul(&m1.d)?),
            Some(&z(p2, n2)),
            Some(&z(p2, p2)),
        ],
    ])?;
    if !m2.d.is_zero() {
        return Err(Error::Unsupported(format!(
            "unit '{}' must have no feedthrough",
            u2.name()
        )));
    }
    let dim = n1 + p1 + n2 + p2;
    let solve = inverse(&Matrix::identity(dim).sub(&next)?)?;
    StepMatrix::new(solve.mul(&current)?)
}

struct Coupling<T> {
    state_offsets: Vec<usize>,
    input_offsets: Vec<usize>,
    states: usize,
    inputs: usize,
    /// Inputs as a function of outputs: `u = S y`.
    select: Matrix<T>,
    c: Matrix<T>,
    d: Matrix<T>,
}

fn offsets(sizes: impl Iterator<Item = usize>) -> (Vec<usize>, usize) {
    let mut out = Vec::new();
    let mut total = 0;
    for s in sizes {
        out.push(total);
        total += s;
    }
    (out, total)
}

fn coupling<T: Scalar>(s: &Scenario<T>) -> Result<Coupling<T>> {
    let models: Vec<&LinearSystemModel<T>> =
        s.units().iter().map(linear_model).collect::<Result<_>>()?;
    let (state_offsets, states) = offsets(models.iter().map(|m| m.state_dim()));
    let (input_offsets, inputs) = offsets(models.iter().map(|m| m.input_dim()));
    let (output_offsets, outputs) = offsets(models.iter().map(|m| m.output_dim()));
    let mut select = Matrix::zeros(inputs, outputs);
    for w in 0..models.len() {
        for (j, &(v, k)) in s.sources(w).iter().enumerate() {
            select[(input_offsets[w] + j, output_offsets[v] + k)] = T::one();
        }
    }
    let cs: Vec<&Matrix<T>> = models.iter().map(|m| &m.c).collect();
    let ds: Vec<&Matrix<T>> = models.iter().map(|m| &m.d).collect();
    Ok(Coupling {
        state_offsets,
        input_offsets,
        states,
        inputs,
        select,
        c: Matrix::block_diagonal(&cs),
        d: Matrix::block_diagonal(&ds),
    })
}

/// Jacobi step map of any linear scenario without algebraic loops, acting on
/// the concatenated unit states in name order.
pub fn jacobi_step_matrix<T: Scalar>(s: &Scenario<T>) -> Result<StepMatrix<T>> {
    if s.execution_order().is_err() {
        return Err(Error::Unsupported("scenario has an algebraic loop".into()));
    }
    let cp = coupling(s)?;
    let step = s.communication_step();
    // inputs at the start of a step: u = S (C x + D u)
    let sd = cp.select.mul(&cp.d)?;
    let solve = inverse(&Matrix::identity(cp.inputs).sub(&sd)?)?;
    let k = solve.mul(&cp.select)?.mul(&cp.c)?;
    let mut out = Matrix::zeros(cp.states, cp.states);
    for (w, unit) in s.units().iter().enumerate() {
        let (n, p) = (unit.state_dim(), unit.input_dim());
        let (xo, uo) = (cp.state_offsets[w], cp.input_offsets[w]);
        let m = unit_step_matrix(unit, step)?.matrix;
        let phi = m.submatrix(0, 0, n, n);
        let gamma = m.submatrix(0, n, n, p);
        let mut rows = gamma.mul(&k.submatrix(uo, 0, p, cp.states))?;
        for i in 0..n {
            for j in 0..n {
                rows[(i, xo + j)] = rows[(i, xo + j)] + phi[(i, j)];
            }
        }
        out.set_block(xo, 0, &rows);
    }
    StepMatrix::new(out)
}

/// The coupled system of a linear scenario as one closed model, `x' = A x`,
/// with the initial states of its units.
pub fn monolithic_model<T: Scalar>(s: &Scenario<T>) -> Result<LinearSystemModel<T>> {
    let cp = coupling(s)?;
    let sd = cp.select.mul(&cp.d)?;
    let solve = inverse(&Matrix::identity(cp.inputs).sub(&sd)?)
        .map_err(|_| Error::Unsupported("algebraic loop without a unique solution".into()))?;
    let k = solve.mul(&cp.select)?.mul(&cp.c)?;
    let models: Vec<&LinearSystemModel<T>> =
        s.units().iter().map(linear_model).collect::<Result<_>>()?;
    let a = Matrix::block_diagonal(&models.iter().map(|m| &m.a).collect::<Vec<_>>());
    let b = Matrix::block_diagonal(&models.iter().map(|m| &m.b).collect::<Vec<_>>());
    let mut x0 = Vec::with_capacity(cp.states);
    for m in &models {
        x0.extend_from_slice(m.x0.as_slice());
    }
    LinearSystemModel::autonomous(a.add(&b.mul(&k)?)?, Vector::new(x0))
}

/// Converged iterative Jacobi step map of a linear scenario, acting on the
/// stacked `(x_w; u_w)` of every unit in name order.
pub fn iterative_jacobi_step_matrix<T: Scalar>(s: &Scenario<T>) -> Result<StepMatrix<T>> {
    let cp = coupling(s)?;
    let step = s.communication_step();
    let dims: Vec<(usize, usize)> = s
        .units()
        .iter()
        .map(|u| (u.state_dim(), u.input_dim()))
        .collect();
    let (bar, dim) = offsets(dims.iter().map(|&(n, p)| n + p));
    let mut current = Matrix::zeros(dim, dim);
    let mut next = Matrix::zeros(dim, dim);
    // column of stacked state/input entries
    let xcol = |v: usize, i: usize| bar[v] + i;
    let ucol = |v: usize, j: usize| bar[v] + dims[v].0 + j;
    let sc = cp.select.mul(&cp.c)?;
    let sd = cp.select.mul(&cp.d)?;
    for (w, unit) in s.units().iter().enumerate() {
        let (n, p) = dims[w];
        let b = unit_blocks(unit, step)?;
        let uo = cp.input_offsets[w];
        // u_w(t_{i+1}) = S_w (C x(t_{i+1}) + D u(t_{i+1}))
        let mut link = Matrix::zeros(p, dim);
        for j in 0..p {
            for v in 0..dims.len() {
                for i in 0..dims[v].0 {
                    link[(j, xcol(v, i))] = sc[(uo + j, cp.state_offsets[v] + i)];
                }
                for i in 0..dims[v].1 {
                    link[(j, ucol(v, i))] = sd[(uo + j, cp.input_offsets[v] + i)];
                }
            }
        }
        current.set_block(bar[w], bar[w], &b.m1x);
        current.set_block(bar[w] + n, bar[w], &b.m2x);
        next.set_block(bar[w], 0, &b.m1u.mul(&link)?);
        next.set_block(bar[w] + n, 0, &b.m2u.mul(&link)?);
    }
    let solve = inverse(&Matrix::identity(dim).sub(&next)?)?;
    StepMatrix::new(solve.mul(&current)?)
}

/// Step map for the orchestrator `kind` on a linear scenario.
pub fn scenario_step_matrix<T: Scalar>(
    s: &Scenario<T>,
    kind: &OrchestratorKind<T>,
) -> Result<StepMatrix<T>> {
    match kind {
        OrchestratorKind::Jacobi => jacobi_step_matrix(s),
        OrchestratorKind::GaussSeidel if s.connections().is_empty() => jacobi_step_matrix(s),
        OrchestratorKind::IterativeJacobi(c)
            if matches!(c.mode, ConvergenceMode::Implicit { .. }) =>
        {
            iterative_jacobi_step_matrix(s)
        }
        other => Err(Error::Unsupported(format!(
            "no step matrix for the {} orchestrator on a coupled scenario",
            other.name()
        ))),
    }
}

/// Stacked `(x_w; u_w)` of every unit at trace point `k`, in the layout of
/// [`iterative_jacobi_step_matrix`].
pub fn stacked_state_input<T: Scalar>(trace: &Trace<T>, k: usize) -> Vector<T> {
    let mut order: Vec<usize> = (0..trace.units.len()).collect();
    order.sort_by(|&a, &b| trace.units[a].cmp(&trace.units[b]));
    let mut v = Vec::new();
    for u in order {
        v.extend_from_slice(trace.states[u][k].as_slice());
        v.extend_from_slice(trace.inputs[u][k].as_slice());
    }
    Vector::new(v)
}

/// Concatenated states at trace point `k` in unit name order.
pub fn stacked_state_sorted<T: Scalar>(trace: &Trace<T>, k: usize) -> Vector<T> {
    let mut order: Vec<usize> = (0..trace.units.len()).collect();
    order.sort_by(|&a, &b| trace.units[a].cmp(&trace.units[b]));
    let mut v = Vec::new();
    for u in order {
        v.extend_from_slice(trace.states[u][k].as_slice());
    }
    Vector::new(v)
}

/// `|X_k| / |X_0|` of the concatenated states in the Euclidean norm.
pub fn observed_growth<T: Scalar>(trace: &Trace<T>, k: usize) -> T {
    let norm = |x: Vector<T>| x.dot(&x).sqrt();
    norm(trace.stacked_state(k)) / norm(trace.stacked_state(0))
}

/// Maximum error over paired grid points, in the infinity norm.
pub fn max_error<T: Scalar>(approx: &[Vector<T>], exact: &[Vector<T>]) -> Result<T> {
    if approx.len() != exact.len() {
        return Err(Error::mismatch("grid points", exact.len(), approx.len()));
    }
    let mut worst = T::zero();
    for (a, e) in approx.iter().zip(exact) {
        if a.len() != e.len() {
            return Err(Error::mismatch("state dimension", e.len(), a.len()));
        }
        worst = worst.max((a - e).inf_norm());
    }
    Ok(worst)
}

/// Maximum error of `series`, sampled every `h` from 0, against the exact solution.
pub fn max_error_against<T: Scalar>(
    model: &LinearSystemModel<T>,
    drive: &AffineDrive<T>,
    h: T,
    series: &[Vector<T>],
) -> Result<T> {
    if series.is_empty() {
        return Err(Error::mismatch("grid points", 1, 0));
    }
    let exact = analytical_series(model, drive, h, series.len() - 1)?;
    max_error(series, &exact)
}

/// Integrates `x' = A x + b` with a fixed step, returning the grid values.
pub fn simulate_linear<T: Scalar>(
    method: StepperKind,
    model: &LinearSystemModel<T>,
    drive: &AffineDrive<T>,
    h: T,
    steps: usize,
) -> Result<Vec<Vector<T>>> {
    let f =
        |x: &Vector<T>, _: &Vector<T>| &model.a.mul_vec(x).expect("square state matrix") + &drive.b;
    let u = |_: T| Vector::zeros(0);
    let cfg = IterationConfig::new(T::lit(1e-14), 1000)?;
    let mut x = model.x0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x.clone());
    for n in 0..steps {
        let t = T::from_count(n) * h;
        x = match method {
            StepperKind::ExplicitEuler => explicit_euler_step(f, &x, u, t, h)?,
            StepperKind::Midpoint => midpoint_step(f, &x, u, t, h)?,
            StepperKind::ImplicitEuler => {
                let outcome =
                    implicit_euler_step(f, &x, u, t, h, &cfg, GuessMode::ExplicitPredictor)?;
                if !outcome.converged {
                    return Err(Error::Divergence {
                        unit: "monolithic".into(),
                        time: t.as_f64(),
                        iterations: cfg.max_iterations,
                    });
                }
                outcome.value
            }
            StepperKind::Godunov => {
                return Err(Error::Unsupported("Godunov on a first-order system".into()))
            }
        };
        out.push(x.clone());
    }
    Ok(out)
}

/// Maximum errors for a range of step sizes over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve<T> {
    pub points: Vec<(T, T)>,
    pub horizon: T,
}

impl<T: Scalar> ErrorCurve<T> {
    pub fn new(points: Vec<(T, T)>, horizon: T) -> Result<Self> {
        for (i, &(h, e)) in points.iter().enumerate() {
            if !(h > T::zero()) || !(e >= T::zero()) || !e.is_finite() {
                return Err(Error::DegenerateCurve(format!("invalid point ({h}, {e})")));
            }
            if points[..i].iter().any(|&(g, _)| g == h) {
                return Err(Error::DegenerateCurve(format!("repeated step size {h}")));
            }
        }
        Ok(ErrorCurve { points, horizon })
    }

    pub fn order(&self) -> Result<T> {
        estimate_order(self)
    }
}

/// Least-squares slope of `log e` against `log h`.
pub fn estimate_order<T: Scalar>(curve: &ErrorCurve<T>) -> Result<T> {
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|&&(_, e)| e.as_f64() >= ROUND_OFF_FLOOR)
        .map(|&(h, e)| (h.as_f64().ln(), e.as_f64().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::DegenerateCurve(format!(
            "{} usable points, need at least 4",
            pts.len()
        )));
    }
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo) / std::f64::consts::LN_10 < 2.0 - 1e-9 {
        return Err(Error::DegenerateCurve(
            "step sizes span less than two decades".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(T::lit(sxy / sxx))
}

/// `points` step sizes spaced evenly in log scale over `[h_min, h_max]`,
/// each adjusted so that it divides `horizon`.
pub fn log_spaced_steps<T: Scalar>(
    h_min: T,
    h_max: T,
    points: usize,
    horizon: T,
) -> Result<Vec<T>> {
    if !(h_min > T::zero()) || h_max < h_min || points == 0 || !(horizon > T::zero()) {
        return Err(Error::InvalidScenario(
            "need 0 < h_min <= h_max, points >= 1, horizon > 0".into(),
        ));
    }
    let (a, b) = (h_min.ln(), h_max.ln());
    let mut out: Vec<T> = Vec::with_capacity(points);
    for i in 0..points {
        let frac = if points == 1 {
            T::zero()
        } else {
            T::from_count(i) / T::from_count(points - 1)
        };
        let h = (a + (b - a) * frac).exp();
        let n = (horizon / h).round().max(T::one());
        let h = horizon / n;
        if !out.contains(&h) {
            out.push(h);
        }
    }
    Ok(out)
}

/// Error curve of `method` on the closed linear system; each `h` must divide `horizon`.
pub fn order_study<T: Scalar>(
    method: StepperKind,
    model: &LinearSystemModel<T>,
    drive: &AffineDrive<T>,
    steps: &[T],
    horizon: T,
) -> Result<ErrorCurve<T>> {
    let points: Vec<(T, T)> = steps
        .par_iter()
        .map(|&h| {
            let n = (horizon / h).round();
            if ((n * h - horizon) / horizon).abs() > T::lit(1e-9) {
                return Err(Error::StepNotDivisible {
                    unit: "monolithic".into(),
                    h: h.as_f64(),
                    step: horizon.as_f64(),
                });
            }
            let n = n.to_usize().unwrap_or(0);
            let series = simulate_linear(method, model, drive, h, n)?;
            Ok((h, max_error_against(model, drive, h, &series)?))
        })
        .collect::<Result<_>>()?;
    ErrorCurve::new(points, horizon)
}
