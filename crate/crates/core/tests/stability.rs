use cosim_core::analysis::{
    cosim_step_matrix_iterative_jacobi, cosim_step_matrix_jacobi, iterative_jacobi_step_matrix,
    jacobi_step_matrix, observed_growth, stacked_state_input, stacked_state_sorted,
    standalone_step_matrix, Verdict,
};
use cosim_core::builtins::{self, MsdParams};
use cosim_core::orchestration::{run_iterative_jacobi, run_jacobi, Convergence};
use cosim_core::solvers::StepperKind;
use cosim_core::{LinearSystemModel, Matrix, Model, Scenario, SimulationUnit, UnitConfig, Vector};

fn split(stepper: StepperKind, step: f64, h: f64, end: f64) -> Scenario<f64> {
    builtins::split_msd_scenario(&MsdParams::default(), stepper, step, h, end).unwrap()
}

fn by_name<'a>(s: &'a Scenario<f64>, name: &str) -> &'a SimulationUnit<f64> {
    s.unit(s.unit_index(name).unwrap())
}

#[test]
fn split_msd_explicit_is_unstable() {
    let s = split(StepperKind::ExplicitEuler, 0.1, 0.1, 1.0);
    let m = jacobi_step_matrix(&s).unwrap();
    let r = m.report().unwrap();
    assert_eq!(r.dim, 2);
    assert!((r.rho - 1.004984).abs() < 1e-5);
    assert_eq!(r.verdict, Verdict::Unstable);
    // co-located explicit Euler steps are exactly the monolithic scheme
    let mono = standalone_step_matrix(
        StepperKind::ExplicitEuler,
        &MsdParams::default().a_matrix(),
        0.1,
    )
    .unwrap();
    assert!((mono.spectral_radius().unwrap() - r.rho).abs() < 1e-12);
}

#[test]
fn split_msd_implicit_iterated_is_stable() {
    let s = split(StepperKind::ImplicitEuler, 0.1, 0.1, 1.0);
    let m = iterative_jacobi_step_matrix(&s).unwrap();
    let r = m.report().unwrap();
    assert_eq!(r.verdict, Verdict::Stable);
    assert!((r.rho - 1.0 / (1.0f64 + 0.1 * 1e-4 + 0.01).sqrt()).abs() < 1e-9);
    let pair =
        cosim_step_matrix_iterative_jacobi(by_name(&s, "velocity"), by_name(&s, "position"), 0.1)
            .unwrap();
    assert!((pair.spectral_radius().unwrap() - r.rho).abs() < 1e-12);
}

#[test]
fn substeps_match_observed_growth() {
    let s = split(StepperKind::ExplicitEuler, 0.1, 0.01, 20.0);
    let m = jacobi_step_matrix(&s).unwrap();
    let t = run_jacobi(&s).unwrap();
    let orbit = m.orbit(&stacked_state_sorted(&t, 0), 200).unwrap();
    for (k, x) in orbit.iter().enumerate() {
        assert!((x - &stacked_state_sorted(&t, k)).inf_norm() < 1e-9);
    }
    let rho = m.spectral_radius().unwrap();
    // per-step growth from the exact powers of the step map
    let big = m
        .pow(200)
        .unwrap()
        .spectral_radius()
        .unwrap()
        .powf(1.0 / 200.0);
    assert!((big - rho).abs() < 1e-6);
}

#[test]
fn verdict_soundness_sweep() {
    let mut stable_seen = false;
    let mut unstable_seen = false;
    for &step in &[0.01, 0.1, 0.5, 1.0] {
        for stepper in [StepperKind::ExplicitEuler, StepperKind::ImplicitEuler] {
            let s = split(stepper, step, step, 400.0 * step);
            let (rho, trace) = if stepper == StepperKind::ExplicitEuler {
                (
                    jacobi_step_matrix(&s).unwrap().spectral_radius().unwrap(),
                    run_jacobi(&s).unwrap(),
                )
            } else {
                let rho = iterative_jacobi_step_matrix(&s)
                    .unwrap()
                    .spectral_radius()
                    .unwrap();
                match run_iterative_jacobi(&s, Convergence::implicit(1e-13, 500)) {
                    Ok(t) => (rho, t),
                    Err(e) => {
                        // successive substitution contracts by about H^2 per sweep
                        assert_eq!(step, 1.0, "{e}");
                        assert!(matches!(e, cosim_core::Error::NonConvergence { .. }));
                        continue;
                    }
                }
            };
            assert_eq!(trace.len(), 401);
            let growth = observed_growth(&trace, 400);
            if rho < 1.0 - 1e-6 {
                stable_seen = true;
                assert!(
                    growth < 1.0,
                    "H={step} {stepper:?}: rho {rho} growth {growth}"
                );
            } else if rho > 1.0 + 1e-6 {
                unstable_seen = true;
                assert!(
                    growth > 1.0,
                    "H={step} {stepper:?}: rho {rho} growth {growth}"
                );
            }
        }
    }
    assert!(stable_seen && unstable_seen);
}

fn linear(name: &str, a: f64, b: f64, c: f64, d: f64, x0: f64, h: f64) -> SimulationUnit<f64> {
    let m = |v: f64| Matrix::from_f64_rows(&[&[v]]).unwrap();
    let model = LinearSystemModel::new(m(a), m(b), m(c), m(d), Vector::from_f64(&[x0])).unwrap();
    SimulationUnit::new(
        name,
        Model::Linear(model),
        UnitConfig::new(StepperKind::ExplicitEuler, h),
    )
    .unwrap()
}

fn feedback_pair() -> Scenario<f64> {
    Scenario::builder(0.1, 5.0)
        .unit(linear("a", -1.0, 0.7, 1.0, 0.5, 1.0, 0.025))
        .unit(linear("b", -2.0, 0.4, 1.5, 0.0, -1.0, 0.05))
        .connect("b.y[0]", "a.u[0]")
        .unwrap()
        .connect("a.y[0]", "b.u[0]")
        .unwrap()
        .build()
        .unwrap()
}

#[test]
fn jacobi_run_is_repeated_step_matrix() {
    let s = feedback_pair();
    let m = cosim_step_matrix_jacobi(by_name(&s, "a"), by_name(&s, "b"), 0.1).unwrap();
    let t = run_jacobi(&s).unwrap();
    let orbit = m.orbit(&stacked_state_sorted(&t, 0), 50).unwrap();
    for (k, x) in orbit.iter().enumerate() {
        assert!(
            (x - &stacked_state_sorted(&t, k)).inf_norm() < 1e-9,
            "step {k}"
        );
    }
}

#[test]
fn converged_iterative_jacobi_follows_map() {
    let s = feedback_pair();
    let m = cosim_step_matrix_iterative_jacobi(by_name(&s, "a"), by_name(&s, "b"), 0.1).unwrap();
    let t = run_iterative_jacobi(&s, Convergence::implicit(1e-12, 200)).unwrap();
    for k in 0..t.len() - 1 {
        let next = m.apply(&stacked_state_input(&t, k)).unwrap();
        assert!(
            (&next - &stacked_state_input(&t, k + 1)).inf_norm() < 1e-8,
            "step {k}"
        );
    }
}
