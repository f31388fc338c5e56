//! Fixed-step integration rules and the direct-iteration fixed-point solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepperKind {
    ExplicitEuler,
    ImplicitEuler,
    Midpoint,
    Godunov,
}

impl StepperKind {
    pub fn name(self) -> &'static str {
        match self {
            StepperKind::ExplicitEuler => "explicit_euler",
            StepperKind::ImplicitEuler => "implicit_euler",
            StepperKind::Midpoint => "midpoint",
            StepperKind::Godunov => "godunov",
        }
    }
}

/// Stopping rule for direct iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig<T> {
    pub epsilon: T,
    pub max_iterations: usize,
    /// When false, exactly `max_iterations` iterations run regardless of progress.
    pub check_convergence: bool,
}

impl<T: Scalar> IterationConfig<T> {
    pub fn new(epsilon: T, max_iterations: usize) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::InvalidScenario(format!(
                "iteration epsilon must be positive, got {epsilon}"
            )));
        }
        if max_iterations == 0 {
            return Err(Error::InvalidScenario(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(IterationConfig {
            epsilon,
            max_iterations,
            check_convergence: true,
        })
    }

    /// Runs exactly `iterations` substitutions.
    pub fn fixed(iterations: usize) -> Self {
        IterationConfig {
            epsilon: T::lit(1e-6),
            max_iterations: iterations.max(1),
            check_convergence: false,
        }
    }
}

impl<T: Scalar> Default for IterationConfig<T> {
    fn default() -> Self {
        IterationConfig {
            epsilon: T::lit(1e-6),
            max_iterations: 100,
            check_convergence: true,
        }
    }
}

/// Initial guess for the implicit Euler fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessMode {
    /// `x(t)`
    PreviousValue,
    /// `x(t) + h F(x(t), u(t))`
    #[default]
    ExplicitPredictor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome<T> {
    pub value: Vector<T>,
    pub guess: Vector<T>,
    /// `g(guess), g(g(guess)), ...`
    pub iterates: Vec<Vector<T>>,
    pub converged: bool,
}

impl<T: Scalar> IterationOutcome<T> {
    /// Guess followed by every iterate.
    pub fn sequence(&self) -> Vec<Vector<T>> {
        let mut s = Vec::with_capacity(self.iterates.len() + 1);
        s.push(self.guess.clone());
        s.extend(self.iterates.iter().cloned());
        s
    }
}

fn finite<T: Scalar>(v: Vector<T>, what: &str) -> Result<Vector<T>> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what: what.into() })
    }
}

/// `x + h F(x, u(t))`
pub fn explicit_euler_step<T, F, U>(f: F, x: &Vector<T>, u: U, t: T, h: T) -> Result<Vector<T>>
where
    T: Scalar,
    F: Fn(&Vector<T>, &Vector<T>) -> Vector<T>,
    U: Fn(T) -> Vector<T>,
{
    let dx = finite(f(x, &u(t)), "derivative")?;
    Ok(x.axpy(h, &dx))
}

/// Repeats `x <- g(x)` until successive iterates differ by less than `epsilon`
/// in the infinity norm, or the iteration budget is spent.
pub fn direct_iteration<T, G>(
    g: G,
    guess: &Vector<T>,
    cfg: &IterationConfig<T>,
) -> IterationOutcome<T>
where
    T: Scalar,
    G: Fn(&Vector<T>) -> Vector<T>,
{
    let mut iterates = Vec::new();
    let mut current = guess.clone();
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        let next = g(&current);
        let delta = (&next - &current).inf_norm();
        iterates.push(next.clone());
        current = next;
        if cfg.check_convergence && delta < cfg.epsilon {
            converged = true;
            break;
        }
    }
    if !cfg.check_convergence {
        converged = true;
    }
    IterationOutcome {
        value: current,
        guess: guess.clone(),
        iterates,
        converged,
    }
}

/// Solves `z = x + h F(z, u(t + h))` by direct iteration.
pub fn implicit_euler_step<T, F, U>(
    f: F,
    x: &Vector<T>,
    u: U,
    t: T,
    h: T,
    cfg: &IterationConfig<T>,
    guess_mode: GuessMode,
) -> Result<IterationOutcome<T>>
where
    T: Scalar,
    F: Fn(&Vector<T>, &Vector<T>) -> Vector<T>,
    U: Fn(T) -> Vector<T>,
{
    let guess = match guess_mode {
        GuessMode::PreviousValue => x.clone(),
        GuessMode::ExplicitPredictor => explicit_euler_step(&f, x, &u, t, h)?,
    };
    let u_next = u(t + h);
    let outcome = direct_iteration(|z| x.axpy(h, &f(z, &u_next)), &guess, cfg);
    finite(outcome.value.clone(), "implicit Euler iterate")?;
    Ok(outcome)
}

/// `x + h F(x + (h/2) F(x, u(t)), u(t + h/2))`
pub fn midpoint_step<T, F, U>(f: F, x: &Vector<T>, u: U, t: T, h: T) -> Result<Vector<T>>
where
    T: Scalar,
    F: Fn(&Vector<T>, &Vector<T>) -> Vector<T>,
    U: Fn(T) -> Vector<T>,
{
    let half = h * T::lit(0.5);
    let k1 = finite(f(x, &u(t)), "derivative")?;
    let mid = x.axpy(half, &k1);
    let k2 = finite(f(&mid, &u(t + half)), "derivative")?;
    Ok(x.axpy(h, &k2))
}

/// `2 x(t) - x(t - h) + h^2 F(x(t), u(t))`
pub fn godunov_step<T, F, U>(
    f2: F,
    x_t: &Vector<T>,
    x_prev: &Vector<T>,
    u: U,
    t: T,
    h: T,
) -> Result<Vector<T>>
where
    T: Scalar,
    F: Fn(&Vector<T>, &Vector<T>) -> Vector<T>,
    U: Fn(T) -> Vector<T>,
{
    if x_t.len() != x_prev.len() {
        return Err(Error::mismatch("position history", x_t.len(), x_prev.len()));
    }
    let acc = finite(f2(x_t, &u(t)), "acceleration")?;
    let two = T::lit(2.0);
    let base = &x_t.scale(two) - x_prev;
    Ok(base.axpy(h * h, &acc))
}

/// First position after the initial one by one explicit Euler step on the
/// first-order form: `x0 + h v0`.
pub fn godunov_bootstrap<T: Scalar>(x0: &Vector<T>, v0: &Vector<T>, h: T) -> Vector<T> {
    x0.axpy(h, v0)
}

/// `(x(t + h) - x(t - h)) / 2h`
pub fn central_velocity<T: Scalar>(x_next: &Vector<T>, x_prev: &Vector<T>, h: T) -> Vector<T> {
    (x_next - x_prev).scale(T::one() / (h + h))
}

/// Ratios `|x_{i+2} - x_{i+1}| / |x_{i+1} - x_i|` over consecutive iterates.
/// Stops at the first zero difference since the sequence has converged there.
pub fn contraction_ratio<T: Scalar>(iterates: &[Vector<T>]) -> Vec<T> {
    let diffs: Vec<T> = iterates
        .windows(2)
        .map(|w| (&w[1] - &w[0]).inf_norm())
        .collect();
    let mut ratios = Vec::new();
    for w in diffs.windows(2) {
        if w[0] == T::zero() || w[1] == T::zero() {
            break;
        }
        ratios.push(w[1] / w[0]);
    }
    ratios
}

/// Supremum of step sizes for which direct iteration contracts, `1 / |df/dx|`.
/// `None` means any step converges.
pub fn max_contraction_step<T: Scalar>(dfdx_bound: T) -> Option<T> {
    let bound = dfdx_bound.abs();
    if bound == T::zero() {
        None
    } else {
        Some(T::one() / bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: f64 = 1576.0;
    const K: f64 = 1e3;
    const CF: f64 = 0.5;
    const VD: f64 = 40.0;

    fn car(v: &Vector<f64>, u: &Vector<f64>) -> Vector<f64> {
        Vector::new(vec![(K * (u[0] - v[0]) - CF * v[0]) / M])
    }

    fn vd(_: f64) -> Vector<f64> {
        Vector::new(vec![VD])
    }

    fn none(_: f64) -> Vector<f64> {
        Vector::zeros(0)
    }

    fn v1(x: f64) -> Vector<f64> {
        Vector::new(vec![x])
    }

    fn msd(x: &Vector<f64>, _: &Vector<f64>) -> Vector<f64> {
        Vector::new(vec![x[1], -x[0] - 1e-4 * x[1]])
    }

    #[test]
    fn explicit_first_car_step() {
        let v = explicit_euler_step(car, &v1(0.0), vd, 0.0, 0.2).unwrap();
        assert!((v[0] - 0.2 / 1576.0 * 40000.0).abs() < 1e-12);
        assert!((v[0] - 5.0761).abs() < 1e-3);
    }

    #[test]
    fn explicit_zero_field() {
        let x = Vector::from_f64(&[1.0, -2.0]);
        let y = explicit_euler_step(|_, _| Vector::zeros(2), &x, none, 0.0, 0.3).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn explicit_msd_step() {
        let y = explicit_euler_step(msd, &Vector::from_f64(&[1.0, 0.0]), none, 0.0, 0.1).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12 && (y[1] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn explicit_rejects_nan() {
        let r = explicit_euler_step(|_, _| v1(f64::NAN), &v1(0.0), none, 0.0, 0.1);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn table_two_rows() {
        let cfg = IterationConfig::fixed(5);
        let g = |z: &Vector<f64>| v1(0.0).axpy(0.2, &car(z, &v1(VD)));
        let first = direct_iteration(g, &v1(5.0), &cfg);
        let expected = [4.4413, 4.5122, 4.5032, 4.5044, 4.5042];
        for (it, e) in first.iterates.iter().zip(expected) {
            assert!((it[0] - e).abs() < 1e-3, "{} vs {e}", it[0]);
        }
        let v = first.value.clone();
        let second = direct_iteration(|z| v.axpy(0.2, &car(z, &v1(VD))), &v, &cfg);
        let expected = [9.0085, 8.4366, 8.5092, 8.5000, 8.5012];
        for (it, e) in second.iterates.iter().zip(expected) {
            assert!((it[0] - e).abs() < 1e-3, "{} vs {e}", it[0]);
        }
        for row in [&first, &second] {
            let r = contraction_ratio(&row.sequence());
            assert_eq!(r.len(), 4);
            assert!(r.iter().all(|x| (x - 0.1270).abs() < 5e-4));
        }
    }

    #[test]
    fn predictor_guess_five_iterations() {
        let cfg = IterationConfig::fixed(5);
        let out = implicit_euler_step(
            car,
            &v1(0.0),
            vd,
            0.0,
            0.2,
            &cfg,
            GuessMode::ExplicitPredictor,
        )
        .unwrap();
        assert!((out.guess[0] - 5.0761).abs() < 1e-3);
        assert!((out.value[0] - 4.5042).abs() < 1e-3);
    }

    #[test]
    fn implicit_fixed_point() {
        let cfg = IterationConfig::new(1e-12, 200).unwrap();
        let out = implicit_euler_step(car, &v1(0.0), vd, 0.0, 0.2, &cfg, GuessMode::PreviousValue)
            .unwrap();
        assert!(out.converged);
        let slope = 0.2 * (K + CF) / M;
        let exact = 0.2 * K * VD / M / (1.0 + slope);
        assert!((out.value[0] - exact).abs() < 1e-10);
        assert!((out.value[0] - 4.50420).abs() < 1e-4);
    }

    #[test]
    fn implicit_zero_field_one_iteration() {
        let cfg = IterationConfig::default();
        let x = v1(3.0);
        let out = implicit_euler_step(
            |_, _| v1(0.0),
            &x,
            none,
            0.0,
            0.1,
            &cfg,
            GuessMode::PreviousValue,
        )
        .unwrap();
        assert_eq!(out.iterates.len(), 1);
        assert_eq!(out.value, x);
    }

    #[test]
    fn identity_converges_immediately() {
        let out = direct_iteration(
            |z: &Vector<f64>| z.clone(),
            &v1(7.0),
            &IterationConfig::default(),
        );
        assert!(out.converged);
        assert_eq!(out.iterates.len(), 1);
        assert!(contraction_ratio(&out.sequence()).is_empty());
    }

    #[test]
    fn divergence_flagged() {
        let cfg = IterationConfig::new(1e-6, 20).unwrap();
        let out = direct_iteration(|z: &Vector<f64>| z.scale(2.0), &v1(1.0), &cfg);
        assert!(!out.converged);
        assert_eq!(out.iterates.len(), 20);
    }

    #[test]
    fn geometric_ratios() {
        let seq: Vec<_> = [1.0, 0.5, 0.25, 0.125].iter().map(|&x| v1(x)).collect();
        assert_eq!(contraction_ratio(&seq), vec![0.5, 0.5]);
    }

    #[test]
    fn contraction_limits() {
        let h = max_contraction_step((K + CF) / M).unwrap();
        assert!((h - 1.5752).abs() < 1e-3);
        assert_eq!(max_contraction_step(1.0), Some(1.0));
        assert_eq!(max_contraction_step(2.0), Some(0.5));
        assert_eq!(max_contraction_step(0.0), None);
    }

    #[test]
    fn midpoint_examples() {
        let y = midpoint_step(|x, _| -x, &v1(1.0), none, 0.0, 0.1).unwrap();
        assert!((y[0] - 0.905).abs() < 1e-15);
        let osc = |x: &Vector<f64>, _: &Vector<f64>| Vector::new(vec![x[1], -x[0]]);
        let y = midpoint_step(osc, &Vector::from_f64(&[1.0, 0.0]), none, 0.0, 0.1).unwrap();
        assert!((y[0] - 0.995).abs() < 1e-12 && (y[1] + 0.1).abs() < 1e-12);
        let z = midpoint_step(|_, _| v1(0.0), &v1(2.0), none, 0.0, 0.1).unwrap();
        assert_eq!(z[0], 2.0);
    }

    #[test]
    fn godunov_identities() {
        let y = godunov_step(|_, _| v1(0.0), &v1(2.0), &v1(1.0), none, 0.0, 0.5).unwrap();
        assert_eq!(y[0], 3.0);
        let (g, h) = (-9.81, 0.01);
        let (xp, xt) = (v1(0.3), v1(0.31));
        let xn = godunov_step(|_, _| v1(g), &xt, &xp, none, 0.0, h).unwrap();
        assert!((xn[0] - 2.0 * xt[0] + xp[0] - g * h * h).abs() < 1e-15);
        assert!(godunov_step(|_, _| v1(0.0), &v1(0.0), &Vector::zeros(2), none, 0.0, 0.1).is_err());
    }

    #[test]
    fn godunov_motor_amplitude() {
        let (c, h) = (1e4, 1e-3);
        let f2 = |x: &Vector<f64>, _: &Vector<f64>| x.scale(-c);
        let mut prev = v1(1.0);
        let mut cur = godunov_bootstrap(&prev, &v1(0.0), h);
        let mut peak: f64 = 1.0;
        for n in 1..1000 {
            let next = godunov_step(f2, &cur, &prev, none, n as f64 * h, h).unwrap();
            prev = cur;
            cur = next;
            peak = peak.max(cur[0].abs());
        }
        assert!((peak - 1.0).abs() < 0.01, "peak {peak}");
    }

    #[test]
    fn central_velocity_of_line() {
        let v = central_velocity(&v1(3.0), &v1(1.0), 0.5);
        assert_eq!(v[0], 2.0);
    }
}
