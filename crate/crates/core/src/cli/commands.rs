use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Format, RunConfig, SIDECAR_KEY};
use super::output::{Cell, OutputDir, Table};
use super::{CliError, EXIT_NOT_ON_LIMIT_SET, EXIT_OK, EXIT_VERIFY_FAILED, THREADS_ENV};
use crate::analysis::{
    equilibrium_stability, linspace, lyapunov_spectrum, parameter_scan, AnalysisError, Classification, RunStatus,
    ScanConfig, SystemSpec,
};
use crate::integrator::{integrate, IntegrateError, IntegratorConfig, Trajectory};
use crate::invariants::{
    check_trajectory, derivative_identity_residual, norm_derivative_along_flow, norm_derivative_forms,
};
use crate::model::{self, lift, FullState, FullSystem, KRatio, Params, ReducedState};
use crate::reduction::{compare_full_vs_reduced, default_zero_tol, k_drift, ReductionError};

fn out_dir(cfg: &RunConfig) -> Result<OutputDir, CliError> {
    OutputDir::create(&cfg.output.directory)
}

fn sidecar(command: &str, cfg: &RunConfig, stats: Value) -> Value {
    json!({ SIDECAR_KEY: 1, "command": command, "config": cfg, "stats": stats })
}

/// Writes `table` as `<stem>.csv` or `<stem>.json`; returns the file name.
fn write_table(
    out: &OutputDir,
    cfg: &RunConfig,
    stem: &str,
    table: &Table,
    complete: bool,
) -> Result<String, CliError> {
    let name = match cfg.output.format {
        Format::Csv => format!("{stem}.csv"),
        Format::Json => format!("{stem}.json"),
    };
    match cfg.output.format {
        Format::Csv => out.write(&name, table.to_csv().as_bytes(), complete)?,
        Format::Json => out.write_json(&name, &table.to_json(), complete)?,
    };
    Ok(name)
}

fn state_columns(dim: usize) -> Vec<String> {
    std::iter::once("t".to_string()).chain((1..=dim).map(|i| format!("y{i}"))).collect()
}

fn trajectory_table(traj: &Trajectory) -> Table {
    let mut table = Table::new(state_columns(traj.dim));
    for (t, y) in traj.iter() {
        table.push(std::iter::once(t).chain(y.iter().copied()).map(Cell::Num).collect());
    }
    table
}

fn system_name(spec: &SystemSpec) -> &'static str {
    match spec {
        SystemSpec::Full { .. } => "full",
        SystemSpec::Reduced { .. } => "reduced",
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<u8, CliError> {
    let start = cfg.start()?;
    let (traj, failure) =
        match start.system.integrate(&start.y0, 0.0, cfg.times.t_total, cfg.times.out_stride, &cfg.integrator) {
            Ok(traj) => (traj, None),
            Err(e) => match e.partial() {
                Some(p) => (p.clone(), Some(e)),
                None => return Err(CliError::integration(e.to_string())),
            },
        };
    let out = out_dir(cfg)?;
    let complete = failure.is_none();
    let file = write_table(&out, cfg, "trajectory", &trajectory_table(&traj), complete)?;
    let stats = json!({
        "system": system_name(&start.system),
        "initial_state": start.y0,
        "samples": traj.len(),
        "t_end": traj.times.last(),
        "steps_taken": traj.steps_taken,
        "steps_rejected": traj.steps_rejected,
        "status": if complete { "completed" } else { "failed" },
        "message": failure.as_ref().map(ToString::to_string),
        "trajectory_file": file,
    });
    out.write_json("simulate.sidecar.json", &sidecar("simulate", cfg, stats), complete)?;
    match failure {
        None => Ok(EXIT_OK),
        Some(e) => Err(CliError::integration(format!("{e}; partial output left with a .partial suffix"))),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Check {
    max_residual: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn new(max_residual: f64, tolerance: f64) -> Self {
        Self { max_residual, tolerance, pass: max_residual <= tolerance }
    }
}

fn param_scale(p: &Params) -> f64 {
    1.0 + p.c.abs() + p.d.abs() + p.e.abs() + p.f.abs()
}

/// Pointwise residual scale: the identities mix terms up to degree four.
fn quartic_scale(y: &FullState, p: &Params) -> f64 {
    (1.0 + y.norm().powi(2)).powi(2) * param_scale(p)
}

fn worst(acc: f64, r: f64) -> f64 {
    if r.is_nan() || acc.is_nan() {
        f64::NAN
    } else {
        acc.max(r)
    }
}

pub fn verify(cfg: &RunConfig) -> Result<u8, CliError> {
    let v = &cfg.verify;
    let p = cfg.params;
    let tol = |default: f64| v.tolerance.unwrap_or(default);
    let mut rng = cfg.rng();
    let w = v.box_half_width;
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| FullState(std::array::from_fn(|_| rng.gen_range(-w..w)));

    let (mut deriv, mut forms, mut flow) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..v.samples {
        let y = draw(&mut rng);
        let scale = quartic_scale(&y, &p);
        deriv = worst(deriv, derivative_identity_residual(&y, &p) / scale);
        let nd = norm_derivative_forms(&y, &p);
        forms = worst(forms, (nd.raw - nd.canonical).abs() / ((1.0 + p.c.abs()) * (1.0 + y.norm().powi(2))));
        flow = worst(flow, (norm_derivative_along_flow(&y, &p) - nd.raw).abs() / scale);
    }

    let sys = FullSystem::new(p);
    let run_check = |y0: &[f64], pick: &dyn Fn(&crate::invariants::TrajectoryReports) -> f64| -> f64 {
        match integrate(&sys, y0, 0.0, v.t_end, v.out_stride, &cfg.integrator) {
            Ok(traj) => match check_trajectory(&traj, &p, f64::INFINITY) {
                Ok(rep) => pick(&rep),
                Err(_) => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        }
    };
    let (mut law, mut prop) = (0.0_f64, 0.0_f64);
    for _ in 0..v.runs {
        let y0 = draw(&mut rng);
        law = worst(law, run_check(&y0.0, &|r| r.bilinear_law.max_rel_residual));
        let z = ReducedState(std::array::from_fn(|_| rng.gen_range(-w..w)));
        let k = rng.gen_range(-3.0..3.0);
        let on_plane = lift(&z, KRatio::Standard(k)).map_err(|e| CliError::validation(e.to_string()))?;
        prop =
            worst(prop, run_check(&on_plane.0, &|r| r.proportionality.map_or(f64::INFINITY, |x| x.max_rel_residual)));
    }

    let report: BTreeMap<&str, Check> = BTreeMap::from([
        ("bilinear_derivative_identity", Check::new(deriv, tol(1e-10))),
        ("norm_derivative_forms", Check::new(forms, tol(1e-10))),
        ("norm_derivative_along_flow", Check::new(flow, tol(1e-10))),
        ("bilinear_exponential_law", Check::new(law, tol(1e-7))),
        ("plane_proportionality", Check::new(prop, tol(1e-7))),
    ]);
    let all_pass = report.values().all(|c| c.pass);
    let out = out_dir(cfg)?;
    out.write_json("verify.json", &serde_json::to_value(&report).expect("report serialises"), true)?;
    let stats = json!({ "samples": v.samples, "runs": v.runs, "all_pass": all_pass });
    out.write_json("verify.sidecar.json", &sidecar("verify", cfg, stats), true)?;
    for (name, c) in &report {
        if !c.pass {
            eprintln!("dynlab verify: {name} failed: residual {:e} > tolerance {:e}", c.max_residual, c.tolerance);
        }
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

pub fn reduce(cfg: &RunConfig) -> Result<u8, CliError> {
    let y0 = FullState(cfg.full_start()?);
    let run = compare_full_vs_reduced(&y0, &cfg.params, cfg.times.t_total, cfg.times.out_stride, &cfg.integrator)
        .map_err(|e| match e {
            ReductionError::NotOnLimitSet { .. } | ReductionError::InconsistentRatios { .. } => CliError::new(
                EXIT_NOT_ON_LIMIT_SET,
                format!("{e}; the reduction needs y4 = K*y1, y5 = K*y2 (or the swapped form) at the start"),
            ),
            ReductionError::Model(m) => CliError::validation(m.to_string()),
            ReductionError::Integrate(i) => CliError::integration(i.to_string()),
        })?;
    let drift = k_drift(&run.full, default_zero_tol(&y0)).map_err(|e| CliError::integration(e.to_string()))?;
    let mut table = Table::new(["t", "K"]);
    for (t, k) in drift {
        table.push(vec![Cell::Num(t), k.map_or(Cell::Empty, Cell::Num)]);
    }
    let out = out_dir(cfg)?;
    let drift_file = write_table(&out, cfg, "k_drift", &table, true)?;
    let c = &run.comparison;
    let representation = match c.k {
        KRatio::Standard(_) => "standard",
        KRatio::Swapped(_) => "swapped",
        KRatio::ZeroPair => "zero_pair",
    };
    let report = json!({
        "K": c.k.value(),
        "representation": representation,
        "max_state_deviation": c.max_state_deviation,
        "horizon": c.horizon,
        "tol_used": c.tol_used,
        "drift_file": drift_file,
    });
    out.write_json("reduce.json", &report, true)?;
    let stats = json!({ "full_steps": run.full.steps_taken, "reduced_steps": run.reduced.steps_taken });
    out.write_json("reduce.sidecar.json", &sidecar("reduce", cfg, stats), true)?;
    Ok(EXIT_OK)
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::InvalidInput(m) => CliError::validation(m),
        AnalysisError::Model(m) => CliError::validation(m.to_string()),
        AnalysisError::Integrate(IntegrateError::InvalidConfig(m) | IntegrateError::InvalidInput(m)) => {
            CliError::validation(m)
        }
        AnalysisError::Integrate(i) => CliError::integration(i.to_string()),
    }
}

pub fn lyapunov(cfg: &RunConfig) -> Result<u8, CliError> {
    let start = cfg.start()?;
    let t = &cfg.times;
    let rep = lyapunov_spectrum(
        &start.system,
        &start.y0,
        t.t_transient,
        t.t_total,
        cfg.lyapunov.renorm_interval,
        &cfg.integrator,
    )
    .map_err(analysis_error)?;
    let d = start.system.dim();
    let mut trace = Table::new(std::iter::once("t".to_string()).chain((1..=d).map(|i| format!("lambda{i}"))));
    for point in &rep.convergence_trace {
        let mut est = point.estimates.clone();
        est.sort_by(|a, b| b.total_cmp(a));
        trace.push(std::iter::once(point.t).chain(est).map(Cell::Num).collect());
    }
    let complete = !rep.diverged();
    let out = out_dir(cfg)?;
    let trace_file = write_table(&out, cfg, "lyapunov_trace", &trace, complete)?;
    let report = json!({
        "system": system_name(&start.system),
        "exponents": rep.exponents,
        "sum": rep.sum(),
        "t_transient": rep.t_transient,
        "t_total": rep.t_total,
        "renorm_interval": rep.renorm_interval,
        "status": rep.status,
        "final_state": rep.final_state,
        "trace_file": trace_file,
    });
    out.write_json("lyapunov.json", &report, complete)?;
    let stats = json!({ "steps_taken": rep.steps_taken, "initial_state": start.y0 });
    out.write_json("lyapunov.sidecar.json", &sidecar("lyapunov", cfg, stats), complete)?;
    match rep.status {
        RunStatus::Completed => Ok(EXIT_OK),
        RunStatus::Diverged { t, message } => Err(CliError::integration(format!(
            "diverged at t = {t}: {message}; partial output left with a .partial suffix"
        ))),
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) if s.trim().is_empty() => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::validation(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
    }
}

const GNUPLOT_TEMPLATE: &str = "\
set datafile separator ','
set terminal pngcairo size 1200,800
set output 'bifurcation.png'
set xlabel '@PARAM@'
set ylabel 'local maxima of y1'
set key off
plot '@FILE@' every ::1 using 1:2 with dots lc rgb 'black'
";

pub fn scan(cfg: &RunConfig) -> Result<u8, CliError> {
    let s = &cfg.scan;
    let start = cfg.start()?;
    if !(cfg.times.t_total > cfg.times.t_transient) {
        return Err(CliError::validation("scan needs times.t_total > times.t_transient"));
    }
    let scan_cfg = ScanConfig {
        t_transient: cfg.times.t_transient,
        t_total: cfg.times.t_total,
        renorm_interval: cfg.lyapunov.renorm_interval,
        out_stride: cfg.times.out_stride,
        integrator: IntegratorConfig { max_steps: s.max_steps, ..cfg.integrator },
        eps_zero: cfg.lyapunov.eps_zero,
        extrema_cap: s.extrema_cap,
        threads: threads_from_env()?,
    };
    let values = linspace(s.start, s.end, s.steps);
    let records =
        parameter_scan(&start.system, &start.y0, s.param, &values, s.policy, &scan_cfg).map_err(analysis_error)?;

    let d = start.system.dim();
    let mut summary = Table::new(
        ["param".to_string(), "classification".to_string()].into_iter().chain((1..=d).map(|i| format!("lambda{i}"))),
    );
    let mut extrema = Table::new(["param", "extremum"]);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &records {
        let mut row = vec![Cell::Num(r.param_value), Cell::Text(r.classification.to_string())];
        row.extend((0..d).map(|i| r.exponents.get(i).map_or(Cell::Empty, |v| Cell::Num(*v))));
        summary.push(row);
        for m in &r.extrema_sample {
            extrema.push(vec![Cell::Num(r.param_value), Cell::Num(*m)]);
        }
        *counts.entry(r.classification.as_str()).or_default() += 1;
    }
    let out = out_dir(cfg)?;
    let scan_file = write_table(&out, cfg, "scan", &summary, true)?;
    let extrema_file = write_table(&out, cfg, "extrema", &extrema, true)?;
    let gnuplot_file = if s.gnuplot && cfg.output.format == Format::Csv {
        let script = GNUPLOT_TEMPLATE.replace("@PARAM@", s.param.as_str()).replace("@FILE@", &extrema_file);
        out.write("bifurcation.gp", script.as_bytes(), true)?;
        Some("bifurcation.gp")
    } else {
        None
    };
    let stats = json!({
        "system": system_name(&start.system),
        "initial_state": start.y0,
        "points": records.len(),
        "classifications": counts,
        "chaotic_values": records.iter().filter(|r| r.classification == Classification::Chaotic).map(|r| r.param_value).collect::<Vec<_>>(),
        "scan_file": scan_file,
        "extrema_file": extrema_file,
        "gnuplot_file": gnuplot_file,
    });
    out.write_json("scan.sidecar.json", &sidecar("scan", cfg, stats), true)?;
    Ok(EXIT_OK)
}

pub fn equilibrium(cfg: &RunConfig) -> Result<u8, CliError> {
    let p = cfg.params;
    let eq = model::equilibrium(&p).map_err(|e| CliError::validation(e.to_string()))?;
    let eig = equilibrium_stability(&p).map_err(|e| CliError::validation(e.to_string()))?;
    let report = json!({
        "params": p,
        "equilibrium": eq.0,
        "eigenvalues": eig.iter().map(|l| json!({ "re": l.re, "im": l.im })).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    Ok(EXIT_OK)
}
