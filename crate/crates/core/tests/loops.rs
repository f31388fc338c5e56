use cosim_core::builtins;
use cosim_core::orchestration::{
    coupling_residual, run_gauss_seidel, run_iterative_gauss_seidel, Convergence,
};
use cosim_core::scenario::{classify_loops, Granularity, LoopKind};
use cosim_core::Error;

#[test]
fn output_loop_is_real_and_iteration_resolves_it() {
    let s = builtins::output_loop_scenario::<f64>(0.5, 0.4).unwrap();
    let report = classify_loops(&s);
    assert!(!report.is_acyclic());
    assert!(report.cycles.iter().all(|c| c.kind == LoopKind::OutputLoop));
    assert!(report.virtual_loops.is_empty());
    assert!(matches!(run_gauss_seidel(&s), Err(Error::NoValidOrder(_))));
    let t = run_iterative_gauss_seidel(&s, Convergence::implicit(1e-12, 100)).unwrap();
    assert!(coupling_residual(&s, &t) < 1e-8);
    assert!(t.iterations.iter().all(|&n| n > 1));
}

#[test]
fn state_loop_is_real() {
    let s = builtins::state_loop_scenario::<f64>().unwrap();
    let report = classify_loops(&s);
    assert!(report.cycles.iter().any(|c| c.kind == LoopKind::StateLoop));
    let state = report
        .cycles
        .iter()
        .find(|c| c.kind == LoopKind::StateLoop)
        .unwrap();
    assert!(
        state.nodes.iter().any(|n| n.starts_with("a.x")),
        "{:?}",
        state.nodes
    );
    let t = run_iterative_gauss_seidel(&s, Convergence::implicit(1e-12, 100)).unwrap();
    assert!(coupling_residual(&s, &t) < 1e-8);
}

#[test]
fn virtual_loop_vanishes_at_scalar_level() {
    let s = builtins::virtual_loop_scenario::<f64>().unwrap();
    let report = classify_loops(&s);
    assert!(report.is_acyclic());
    assert!(!report.virtual_loops.is_empty());
    assert!(report.scalar_cycles.is_empty());
    assert!(run_gauss_seidel(&s).is_err());
    let scalar = s.clone().with_granularity(Granularity::Scalar);
    let t = run_gauss_seidel(&scalar).unwrap();
    assert!(t.iterations.iter().all(|&n| n == 1));
    // the same values as the converged fixed point of the iterative scheme
    let it = run_iterative_gauss_seidel(&s, Convergence::implicit(1e-14, 100)).unwrap();
    for (a, b) in t.outputs.iter().flatten().zip(it.outputs.iter().flatten()) {
        assert!((a - b).inf_norm() < 1e-10);
    }
    assert!(coupling_residual(&scalar, &t) < 1e-12);
}
