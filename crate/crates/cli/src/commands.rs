use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use cosim_core::analysis::{
    estimate_order, log_spaced_steps, monolithic_model, order_study, scenario_step_matrix,
};
use cosim_core::builtins::{self, CarParams, MsdParams};
use cosim_core::io::{write_internal_csv, write_trace_csv, ScenarioFile};
use cosim_core::numerics::Vector;
use cosim_core::ode::{AffineDrive, LinearSystemModel};
use cosim_core::orchestration::{run, OrchestratorKind, RunOptions, Trace};
use cosim_core::solvers::{contraction_ratio, direct_iteration, IterationConfig, StepperKind};
use cosim_core::{Error, Matrix, Scenario};
use log::info;

pub const VALIDATION: u8 = 1;
pub const RUNTIME: u8 = 2;
pub const UNSUPPORTED: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn validation(e: impl ToString) -> Self {
        Self::new(VALIDATION, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn classify(e: Error) -> Failure {
    let code = if e.is_validation() {
        VALIDATION
    } else {
        RUNTIME
    };
    Failure::new(code, e.to_string())
}

fn load(path: &Path) -> Result<(Scenario<f64>, OrchestratorKind<f64>), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    parse(&text)
}

fn parse(text: &str) -> Result<(Scenario<f64>, OrchestratorKind<f64>), Failure> {
    let file = ScenarioFile::from_json(text).map_err(Failure::validation)?;
    file.build().map_err(Failure::validation)
}

fn io_failure(path: &Path, e: impl ToString) -> Failure {
    Failure::new(RUNTIME, format!("{}: {}", path.display(), e.to_string()))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> cosim_core::Result<()>,
) -> CmdResult {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| io_failure(path, e))?;
    w.flush().map_err(|e| io_failure(path, e))
}

fn write_trace(trace: &Trace<f64>, out: &Path, internal: bool) -> CmdResult {
    write_file(out, |w| write_trace_csv(trace, w))?;
    if internal {
        for (u, name) in trace.units.iter().enumerate() {
            let path = out.with_file_name(format!(
                "{}.{name}.csv",
                out.file_name()
                    .map_or("trace.csv".into(), |n| n.to_string_lossy())
            ));
            write_file(&path, |w| write_internal_csv(trace, u, w))?;
        }
    }
    info!("wrote {}", out.display());
    Ok(())
}

fn simulate_scenario(
    s: &Scenario<f64>,
    kind: &OrchestratorKind<f64>,
    out: &Path,
    internal: bool,
    parallel: bool,
) -> CmdResult {
    let options = RunOptions {
        parallel,
        record_internal: internal,
    };
    let trace = run(s, kind, options).map_err(classify)?;
    write_trace(&trace, out, internal)
}

pub fn simulate(scenario: &Path, out: &Path, internal: bool, parallel: bool) -> CmdResult {
    let (s, kind) = load(scenario)?;
    simulate_scenario(&s, &kind, out, internal, parallel)
}

pub fn analyze_stability(scenario: &Path) -> CmdResult {
    let (s, kind) = load(scenario)?;
    let m = scenario_step_matrix(&s, &kind).map_err(|e| match e {
        Error::Unsupported(m) => Failure::new(UNSUPPORTED, m),
        other => Failure::new(RUNTIME, other.to_string()),
    })?;
    let report = m
        .report()
        .map_err(|e| Failure::new(RUNTIME, e.to_string()))?;
    println!("orchestrator: {}", kind.name());
    println!("{report}");
    Ok(())
}

fn method(name: &str) -> Result<StepperKind, Failure> {
    match name {
        "euler" | "explicit_euler" => Ok(StepperKind::ExplicitEuler),
        "implicit" | "implicit_euler" => Ok(StepperKind::ImplicitEuler),
        "midpoint" => Ok(StepperKind::Midpoint),
        other => Err(Failure::validation(format!(
            "--methods: unknown method {other:?}"
        ))),
    }
}

fn order_target(target: &str) -> Result<(LinearSystemModel<f64>, AffineDrive<f64>, f64), Failure> {
    match target {
        "msd" => {
            let m = builtins::msd_model(&MsdParams::default());
            let closed = LinearSystemModel::autonomous(m.a.clone(), m.x0.clone())
                .map_err(Failure::validation)?;
            Ok((closed, AffineDrive::zero(2), 10.0))
        }
        "decay" => {
            let a = Matrix::from_f64_rows(&[&[-1.0]]).map_err(Failure::validation)?;
            let m = LinearSystemModel::autonomous(a, Vector::from_f64(&[1.0]))
                .map_err(Failure::validation)?;
            Ok((m, AffineDrive::zero(1), 1.0))
        }
        path => {
            let (s, _) = load(Path::new(path))?;
            let m = monolithic_model(&s).map_err(|e| Failure::new(VALIDATION, e.to_string()))?;
            let n = m.state_dim();
            Ok((m, AffineDrive::zero(n), s.end_time()))
        }
    }
}

pub fn order(
    target: &str,
    methods: &[String],
    h_min: f64,
    h_max: f64,
    points: usize,
    horizon: Option<f64>,
    out: Option<&Path>,
) -> CmdResult {
    if points < 4 {
        return Err(Failure::validation(
            "--points: at least 4 step sizes are needed for a slope",
        ));
    }
    let kinds = methods
        .iter()
        .map(|m| method(m))
        .collect::<Result<Vec<_>, _>>()?;
    let (model, drive, default_horizon) = order_target(target)?;
    let horizon = horizon.unwrap_or(default_horizon);
    let hs = log_spaced_steps(h_min, h_max, points, horizon).map_err(Failure::validation)?;
    let mut table = String::from("method,h,error\n");
    let mut slopes = Vec::new();
    for (name, kind) in methods.iter().zip(kinds) {
        let curve = order_study(kind, &model, &drive, &hs, horizon).map_err(classify)?;
        for (h, e) in &curve.points {
            table.push_str(&format!("{name},{h:.16e},{e:.16e}\n"));
        }
        let slope = estimate_order(&curve).map_err(Failure::validation)?;
        slopes.push((name, slope));
    }
    match out {
        Some(path) => fs::write(path, &table).map_err(|e| io_failure(path, e))?,
        None => print!("{table}"),
    }
    println!("method,slope");
    for (name, slope) in slopes {
        println!("{name},{slope:.4}");
    }
    Ok(())
}

pub const EXAMPLES: [&str; 4] = ["car", "msd", "car-passenger", "table2"];

const CAR: &str = include_str!("../scenarios/car.json");
const MSD: &str = include_str!("../scenarios/msd.json");
const CAR_PASSENGER: &str = include_str!("../scenarios/car_passenger.json");

pub const TABLE2: [[f64; 5]; 2] = [
    [4.4413, 4.5122, 4.5032, 4.5044, 4.5042],
    [9.0085, 8.4366, 8.5092, 8.5000, 8.5012],
];

pub fn examples_list() -> CmdResult {
    let mut out = io::stdout().lock();
    for name in EXAMPLES {
        writeln!(out, "{name}").map_err(|e| Failure::new(RUNTIME, e.to_string()))?;
    }
    Ok(())
}

/// Implicit Euler on the car with five direct iterations per step from a guess of 5.
pub fn table2_rows() -> [Vec<f64>; 2] {
    let p = CarParams::default();
    let h = 0.2;
    let cfg = IterationConfig::fixed(5);
    let step_map =
        |x: f64| move |v: &Vector<f64>| Vector::from_f64(&[x + h * (p.a() * v[0] + p.b())]);
    let row1 = direct_iteration(step_map(0.0), &Vector::from_f64(&[5.0]), &cfg);
    let row2 = direct_iteration(step_map(row1.value[0]), &row1.value, &cfg);
    let values =
        |o: &cosim_core::solvers::IterationOutcome<f64>| o.iterates.iter().map(|v| v[0]).collect();
    let ratios = |o: &cosim_core::solvers::IterationOutcome<f64>| contraction_ratio(&o.sequence());
    info!("contraction ratios {:?} {:?}", ratios(&row1), ratios(&row2));
    [values(&row1), values(&row2)]
}

fn table2() -> CmdResult {
    let rows = table2_rows();
    let mut ok = true;
    println!("step,iterates");
    for (i, (row, want)) in rows.iter().zip(TABLE2).enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        println!("{},{}", i + 1, cells.join(","));
        ok &= row.len() == 5 && row.iter().zip(want).all(|(g, w)| (g - w).abs() <= 1e-3);
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::new(
            RUNTIME,
            "iterates differ from the reference table",
        ))
    }
}

pub fn examples_run(name: &str, out: Option<&Path>) -> CmdResult {
    let text = match name {
        "table2" => return table2(),
        "car" => CAR,
        "msd" => MSD,
        "car-passenger" => CAR_PASSENGER,
        other => {
            return Err(Failure::validation(format!(
                "unknown example {other:?}; expected one of {}",
                EXAMPLES.join(", ")
            )))
        }
    };
    let (s, kind) = parse(text)?;
    let default = format!("{name}.csv");
    let out = out.unwrap_or(Path::new(&default));
    simulate_scenario(&s, &kind, out, false, false)?;
    println!("{}", out.display());
    Ok(())
}
