use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::integrator::{
    integrate, integrate_to, integrate_with_tangents, IntegrateError, IntegratorConfig, TangentBundle, TangentRun,
    Trajectory,
};
use crate::model::{FullSystem, ParamName, Params, ReducedSystem};
use crate::system::Jacobian;

/// Which vector field an analysis runs on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Full {
        params: Params,
    },
    Reduced {
        params: Params,
        #[serde(rename = "K")]
        k: f64,
    },
}

impl SystemSpec {
    pub fn dim(&self) -> usize {
        match self {
            SystemSpec::Full { .. } => 5,
            SystemSpec::Reduced { .. } => 3,
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            SystemSpec::Full { params } | SystemSpec::Reduced { params, .. } => params,
        }
    }

    /// Copy with one quantity replaced. `K` is only defined for the reduced
    /// system.
    pub fn with_param(&self, name: ParamName, value: f64) -> Result<Self, AnalysisError> {
        Ok(match (*self, name) {
            (SystemSpec::Reduced { params, .. }, ParamName::K) => SystemSpec::Reduced { params, k: value },
            (SystemSpec::Full { .. }, ParamName::K) => {
                return Err(AnalysisError::InvalidInput("K can only be varied for the reduced system".into()))
            }
            (SystemSpec::Full { params }, name) => SystemSpec::Full { params: params.with(name, value) },
            (SystemSpec::Reduced { params, k }, name) => SystemSpec::Reduced { params: params.with(name, value), k },
        })
    }

    pub fn param_value(&self, name: ParamName) -> Option<f64> {
        match (self, name) {
            (SystemSpec::Reduced { k, .. }, ParamName::K) => Some(*k),
            (_, name) => self.params().get(name),
        }
    }

    /// Sampled trajectory of the selected vector field.
    pub fn integrate(
        &self,
        y0: &[f64],
        t0: f64,
        t1: f64,
        out_stride: f64,
        cfg: &IntegratorConfig,
    ) -> Result<Trajectory, IntegrateError> {
        match *self {
            SystemSpec::Full { params } => integrate(&FullSystem::new(params), y0, t0, t1, out_stride, cfg),
            SystemSpec::Reduced { params, k } => integrate(&ReducedSystem::new(params, k), y0, t0, t1, out_stride, cfg),
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        self.params().validate()?;
        if let SystemSpec::Reduced { k, .. } = self {
            if !k.is_finite() {
                return Err(AnalysisError::InvalidInput(format!("K must be finite, got {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { t: f64, message: String },
}

/// Running exponent estimates after a renormalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Exponents per unit time, sorted descending.
    pub exponents: Vec<f64>,
    pub t_transient: f64,
    pub t_total: f64,
    pub renorm_interval: f64,
    pub convergence_trace: Vec<TracePoint>,
    pub status: RunStatus,
    /// Base state at the end of the run (or at divergence).
    pub final_state: Vec<f64>,
    pub steps_taken: u64,
}

impl LyapunovReport {
    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }

    pub fn largest(&self) -> Option<f64> {
        self.exponents.first().copied()
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// Benettin-style spectrum: integrates through the transient, then
/// propagates an orthonormal frame over `[t_transient, t_total]` with
/// Gram–Schmidt renormalisation every `renorm_interval`.
///
/// The starting frame is [`crate::linalg::generic_frame`] rather than the
/// identity: with block-structured Jacobians an axis-aligned column can
/// stay locked onto a lower exponent for a long time.
pub fn lyapunov_spectrum(
    system: &SystemSpec,
    y0: &[f64],
    t_transient: f64,
    t_total: f64,
    renorm_interval: f64,
    cfg: &IntegratorConfig,
) -> Result<LyapunovReport, AnalysisError> {
    system.validate()?;
    if y0.len() != system.dim() {
        return Err(AnalysisError::InvalidInput(format!(
            "initial state has {} components, system expects {}",
            y0.len(),
            system.dim()
        )));
    }
    if !(t_transient >= 0.0 && t_total > t_transient && t_total.is_finite()) {
        return Err(AnalysisError::InvalidInput(format!(
            "need t_total > t_transient >= 0, got {t_transient} / {t_total}"
        )));
    }
    match *system {
        SystemSpec::Full { params } => {
            spectrum_of(FullSystem::new(params), y0, t_transient, t_total, renorm_interval, cfg)
        }
        SystemSpec::Reduced { params, k } => {
            spectrum_of(ReducedSystem::new(params, k), y0, t_transient, t_total, renorm_interval, cfg)
        }
    }
}

fn spectrum_of<S: Jacobian>(
    sys: S,
    y0: &[f64],
    t_transient: f64,
    t_total: f64,
    renorm_interval: f64,
    cfg: &IntegratorConfig,
) -> Result<LyapunovReport, AnalysisError> {
    let report = |exponents, trace, status, final_state: Vec<f64>, steps| LyapunovReport {
        exponents,
        t_transient,
        t_total,
        renorm_interval,
        convergence_trace: trace,
        status,
        final_state,
        steps_taken: steps,
    };

    let start = if t_transient > 0.0 {
        match integrate_to(&sys, y0, 0.0, t_transient, cfg) {
            Ok(y) => y,
            Err(IntegrateError::BlowUp { t, partial }) => {
                let last = partial.last().map(<[f64]>::to_vec).unwrap_or_else(|| y0.to_vec());
                let status = RunStatus::Diverged { t, message: "blow-up during transient".into() };
                return Ok(report(Vec::new(), Vec::new(), status, last, partial.steps_taken));
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        y0.to_vec()
    };

    let bundle = TangentBundle::generic(start);
    match integrate_with_tangents(&sys, &bundle, t_transient, t_total, renorm_interval, cfg) {
        Ok(run) => {
            let (exponents, trace) = summarise(&run);
            Ok(report(exponents, trace, RunStatus::Completed, run.bundle.base, run.steps_taken))
        }
        Err(err) if err.source.is_blow_up() => {
            let (exponents, trace) = summarise(&err.partial);
            let t = match err.source {
                IntegrateError::BlowUp { t, .. } => t,
                _ => err.partial.t,
            };
            let status = RunStatus::Diverged { t, message: err.source.to_string() };
            Ok(report(exponents, trace, status, err.partial.bundle.base.clone(), err.partial.steps_taken))
        }
        Err(err) => Err(err.source.into()),
    }
}

fn summarise(run: &TangentRun) -> (Vec<f64>, Vec<TracePoint>) {
    let d = run.bundle.dim();
    let mut sums = vec![0.0; d];
    let mut elapsed = 0.0;
    let mut trace = Vec::with_capacity(run.records.len());
    for rec in &run.records {
        elapsed += rec.dt;
        for (s, l) in sums.iter_mut().zip(&rec.log_stretch) {
            *s += l;
        }
        trace.push(TracePoint { t: rec.t, estimates: sums.iter().map(|s| s / elapsed).collect() });
    }
    if elapsed == 0.0 {
        return (Vec::new(), trace);
    }
    let mut exponents: Vec<f64> = sums.iter().map(|s| s / elapsed).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    (exponents, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_param_editing() {
        let p = Params::new(-1.0, 1.0, -1.0, 0.0);
        let full = SystemSpec::Full { params: p };
        assert!(full.with_param(ParamName::K, 1.0).is_err());
        assert_eq!(full.with_param(ParamName::E, -2.0).unwrap().params().e, -2.0);
        let red = SystemSpec::Reduced { params: p, k: 0.5 };
        assert_eq!(red.with_param(ParamName::K, 2.0).unwrap().param_value(ParamName::K), Some(2.0));
        assert_eq!(red.dim(), 3);
    }

    #[test]
    fn rejects_bad_windows() {
        let s = SystemSpec::Full { params: Params::new(-3.0, -1.0, -1.0, 0.0) };
        let cfg = IntegratorConfig::default();
        assert!(lyapunov_spectrum(&s, &[0.0; 5], 10.0, 10.0, 1.0, &cfg).is_err());
        assert!(lyapunov_spectrum(&s, &[0.0; 3], 0.0, 10.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn blow_up_in_transient_is_a_diverged_report() {
        // pairs stay at zero while y3 grows like e^t
        let s = SystemSpec::Full { params: Params::new(-1.0, 0.0, 1.0, 0.0) };
        let rep =
            lyapunov_spectrum(&s, &[0.0, 0.0, 0.1, 0.0, 0.0], 50.0, 100.0, 1.0, &IntegratorConfig::default()).unwrap();
        assert!(rep.diverged());
        assert!(rep.exponents.is_empty());
        match rep.status {
            RunStatus::Diverged { t, .. } => assert!(t > 25.0 && t < 35.0, "t = {t}"),
            RunStatus::Completed => unreachable!(),
        }
    }

    #[test]
    fn rotation_driven_growth_underflows_instead_of_hanging() {
        let s = SystemSpec::Full { params: Params::new(-1.0, 0.0, 1.0, 0.0) };
        let cfg = IntegratorConfig { h_min: 1e-4, ..IntegratorConfig::default() };
        let err = lyapunov_spectrum(&s, &[0.0, 0.0, 0.1, 0.0, 0.0], 0.0, 100.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, AnalysisError::Integrate(IntegrateError::StepUnderflow { .. })), "{err:?}");
    }
}
