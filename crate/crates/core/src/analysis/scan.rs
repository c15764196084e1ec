use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{classify, local_maxima, lyapunov_spectrum, AnalysisError, Classification, SystemSpec};
use crate::integrator::IntegratorConfig;
use crate::model::ParamName;

/// How each scan point chooses its initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Every point starts from the same state; points run in parallel.
    Fixed,
    /// Each point starts from the previous point's terminal state.
    Follow,
}

/// Per-integration step budget of a scan point. Growth in this system speeds
/// up the rotation, so divergent runs exhaust steps long before reaching the
/// blow-up threshold.
pub const DEFAULT_MAX_STEPS: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub t_transient: f64,
    pub t_total: f64,
    pub renorm_interval: f64,
    /// Sampling stride of the post-transient trajectory used for
    /// classification and extrema.
    pub out_stride: f64,
    pub integrator: IntegratorConfig,
    pub eps_zero: f64,
    pub extrema_cap: usize,
    /// Worker threads for fixed-seed scans; `None` uses all available.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            t_transient: 200.0,
            t_total: 2200.0,
            renorm_interval: 1.0,
            out_stride: 0.05,
            integrator: IntegratorConfig { max_steps: DEFAULT_MAX_STEPS, ..IntegratorConfig::default() },
            eps_zero: super::DEFAULT_EPS_ZERO,
            extrema_cap: 64,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub param_name: ParamName,
    pub param_value: f64,
    pub classification: Classification,
    /// `NaN` when no exponent could be computed.
    pub largest_exponent: f64,
    pub exponents: Vec<f64>,
    /// Post-transient local maxima of `y1`.
    pub extrema_sample: Vec<f64>,
    /// Final state of the run (empty when diverged before any output).
    pub terminal_state: Vec<f64>,
}

pub fn linspace(start: f64, end: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n).map(|i| start + (end - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn diverged(name: ParamName, value: f64, terminal: Vec<f64>, exponents: Vec<f64>) -> ScanRecord {
    ScanRecord {
        param_name: name,
        param_value: value,
        classification: Classification::Diverged,
        largest_exponent: exponents.first().copied().unwrap_or(f64::NAN),
        exponents,
        extrema_sample: Vec::new(),
        terminal_state: terminal,
    }
}

fn run_point(spec: &SystemSpec, y0: &[f64], name: ParamName, value: f64, cfg: &ScanConfig) -> ScanRecord {
    let integ = &cfg.integrator;
    let span = cfg.t_total - cfg.t_transient;
    let start = if cfg.t_transient > 0.0 {
        match spec.integrate(y0, 0.0, cfg.t_transient, cfg.t_transient, integ) {
            Ok(traj) => traj.last().expect("non-empty").to_vec(),
            Err(e) => {
                let last = e.partial().and_then(|p| p.last()).map(<[f64]>::to_vec).unwrap_or_default();
                return diverged(name, value, last, Vec::new());
            }
        }
    } else {
        y0.to_vec()
    };
    let traj = match spec.integrate(&start, 0.0, span, cfg.out_stride, integ) {
        Ok(traj) => traj,
        Err(e) => {
            let last = e.partial().and_then(|p| p.last()).map(<[f64]>::to_vec).unwrap_or_default();
            return diverged(name, value, last, Vec::new());
        }
    };
    let report = match lyapunov_spectrum(spec, &start, 0.0, span, cfg.renorm_interval, integ) {
        Ok(r) => r,
        Err(_) => return diverged(name, value, traj.last().map(<[f64]>::to_vec).unwrap_or_default(), Vec::new()),
    };
    let classification = classify(&report, &traj, cfg.eps_zero);
    let terminal = traj.last().map(<[f64]>::to_vec).unwrap_or_default();
    if classification == Classification::Diverged {
        return diverged(name, value, terminal, report.exponents);
    }
    ScanRecord {
        param_name: name,
        param_value: value,
        classification,
        largest_exponent: report.largest().unwrap_or(f64::NAN),
        exponents: report.exponents,
        extrema_sample: local_maxima(&traj.component(0), cfg.extrema_cap),
        terminal_state: terminal,
    }
}

/// Sweeps `param` over `values`, classifying the attractor reached from
/// `y0` at each value. Records are returned in the order of `values`;
/// failing points are recorded as diverged.
pub fn parameter_scan(
    base: &SystemSpec,
    y0: &[f64],
    param: ParamName,
    values: &[f64],
    policy: SeedPolicy,
    cfg: &ScanConfig,
) -> Result<Vec<ScanRecord>, AnalysisError> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidInput(format!("scan value {v} is not finite")));
    }
    if y0.len() != base.dim() {
        return Err(AnalysisError::InvalidInput(format!(
            "initial state has {} components, system expects {}",
            y0.len(),
            base.dim()
        )));
    }
    if !(cfg.t_transient >= 0.0 && cfg.t_total > cfg.t_transient) {
        return Err(AnalysisError::InvalidInput("scan needs t_total > t_transient >= 0".into()));
    }
    cfg.integrator.validate()?;
    let specs = values.iter().map(|&v| base.with_param(param, v)).collect::<Result<Vec<_>, _>>()?;

    match policy {
        SeedPolicy::Fixed => {
            let work = || -> Vec<ScanRecord> {
                specs.par_iter().zip(values.par_iter()).map(|(spec, &v)| run_point(spec, y0, param, v, cfg)).collect()
            };
            match cfg.threads {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| AnalysisError::InvalidInput(format!("cannot build thread pool: {e}")))?;
                    Ok(pool.install(work))
                }
                None => Ok(work()),
            }
        }
        SeedPolicy::Follow => {
            let mut seed = y0.to_vec();
            let mut out = Vec::with_capacity(values.len());
            for (spec, &v) in specs.iter().zip(values) {
                let rec = run_point(spec, &seed, param, v, cfg);
                if rec.classification != Classification::Diverged && rec.terminal_state.len() == seed.len() {
                    seed.clone_from(&rec.terminal_state);
                }
                out.push(rec);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Params;

    fn quick() -> ScanConfig {
        ScanConfig { t_transient: 50.0, t_total: 250.0, out_stride: 0.1, ..ScanConfig::default() }
    }

    #[test]
    fn linspace_endpoints() {
        assert!(linspace(0.0, 1.0, 0).is_empty());
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
        let v = linspace(-3.0, -2.2, 5);
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], -3.0);
        assert!((v[4] + 2.2).abs() < 1e-15);
    }

    #[test]
    fn empty_scan() {
        let base = SystemSpec::Full { params: Params::new(-3.0, -1.0, -1.0, 0.0) };
        let out = parameter_scan(&base, &[0.1; 5], ParamName::C, &[], SeedPolicy::Fixed, &quick()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn rejects_bad_inputs() {
        let base = SystemSpec::Full { params: Params::new(-3.0, -1.0, -1.0, 0.0) };
        assert!(parameter_scan(&base, &[0.1; 5], ParamName::C, &[f64::NAN], SeedPolicy::Fixed, &quick()).is_err());
        assert!(parameter_scan(&base, &[0.1; 5], ParamName::K, &[1.0], SeedPolicy::Fixed, &quick()).is_err());
        assert!(parameter_scan(&base, &[0.1; 3], ParamName::C, &[1.0], SeedPolicy::Fixed, &quick()).is_err());
    }

    #[test]
    fn divergent_points_do_not_abort_the_scan() {
        // positive motor slope: y3 grows without bound
        let base = SystemSpec::Full { params: Params::new(-3.0, -1.0, 1.0, 0.0) };
        let y0 = [0.0, 0.0, 0.1, 0.0, 0.0];
        let out = parameter_scan(&base, &y0, ParamName::C, &[-3.0, -1.0], SeedPolicy::Follow, &quick()).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|r| r.classification == Classification::Diverged && r.extrema_sample.is_empty()));
    }

    #[test]
    fn reduced_k_scan_on_stable_range() {
        let base = SystemSpec::Reduced { params: Params::new(-3.0, -1.0, -1.0, 0.5), k: 0.0 };
        let out = parameter_scan(&base, &[0.5, -0.2, 0.1], ParamName::K, &[0.0, 1.0, 2.0], SeedPolicy::Fixed, &quick())
            .unwrap();
        assert!(out.iter().all(|r| r.classification == Classification::Equilibrium), "{out:?}");
        assert_eq!(out.iter().map(|r| r.param_value).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
    }
}
