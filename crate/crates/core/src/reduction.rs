//! Reduction of the full flow to the three-dimensional flow on an invariant
//! plane `y4 = K·y1, y5 = K·y2` (or its swapped counterpart).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{integrate, IntegrateError, IntegratorConfig, Trajectory};
use crate::invariants::bilinear;
use crate::model::{lift, FullState, FullSystem, KRatio, ModelError, Params, ReducedState, ReducedSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("initial state is not on a limit set: y1*y5 - y2*y4 = {bilinear:e} exceeds {bound:e}")]
    NotOnLimitSet { bilinear: f64, bound: f64 },
    #[error("pair ratios disagree: residual {residual:e} exceeds {bound:e}")]
    InconsistentRatios { residual: f64, bound: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Default zero threshold `1e-9·(1 + ‖y0‖)`.
pub fn default_zero_tol(y0: &FullState) -> f64 {
    1e-9 * (1.0 + y0.norm())
}

/// Proportionality constant of `y0`, taken from the larger-magnitude
/// component of the dominant pair.
pub fn extract_k(y0: &FullState, zero_tol: f64) -> Result<KRatio, ReductionError> {
    y0.check_finite()?;
    let [y1, y2, _, y4, y5] = y0.0;
    let i = bilinear(y0);
    let bound = zero_tol * (1.0 + y0.norm().powi(2));
    if !(i.abs() <= bound) {
        return Err(ReductionError::NotOnLimitSet { bilinear: i, bound });
    }

    // (lead, follow) pairs: follow = K * lead
    let (k, residual, ratio) = if y1.abs().max(y2.abs()) > zero_tol {
        let k = if y1.abs() >= y2.abs() { y4 / y1 } else { y5 / y2 };
        (k, (y4 - k * y1).abs().max((y5 - k * y2).abs()), KRatio::Standard(k))
    } else if y4.abs().max(y5.abs()) > zero_tol {
        let k = if y4.abs() >= y5.abs() { y1 / y4 } else { y2 / y5 };
        (k, (y1 - k * y4).abs().max((y2 - k * y5).abs()), KRatio::Swapped(k))
    } else {
        return Ok(KRatio::ZeroPair);
    };
    let bound = zero_tol * (1.0 + k.abs()) * (1.0 + y0.norm());
    if !(residual <= bound) {
        return Err(ReductionError::InconsistentRatios { residual, bound });
    }
    Ok(ratio)
}

/// Reduced coordinates of `y0` for the representation `k`.
pub fn project(y0: &FullState, k: KRatio) -> ReducedState {
    match k {
        KRatio::Swapped(_) => ReducedState([y0.0[3], y0.0[4], y0.0[2]]),
        KRatio::Standard(_) | KRatio::ZeroPair => y0.project(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionComparison {
    #[serde(rename = "K")]
    pub k: KRatio,
    pub max_state_deviation: f64,
    pub horizon: f64,
    /// Larger of the two integrator tolerances used for both runs.
    pub tol_used: f64,
}

/// Full and reduced trajectories behind a [`ReductionComparison`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRun {
    pub comparison: ReductionComparison,
    pub full: Trajectory,
    pub reduced: Trajectory,
}

/// Integrates the full system from `y0` and the reduced system from its
/// projection over `[0, t_end]` and reports the largest max-norm gap between
/// the lifted reduced states and the full states.
pub fn compare_full_vs_reduced(
    y0: &FullState,
    p: &Params,
    t_end: f64,
    out_stride: f64,
    cfg: &IntegratorConfig,
) -> Result<ComparisonRun, ReductionError> {
    p.validate()?;
    let k = extract_k(y0, default_zero_tol(y0))?;
    let z0 = project(y0, k);
    let full = integrate(&FullSystem::new(*p), &y0.0, 0.0, t_end, out_stride, cfg)?;
    let reduced = integrate(&ReducedSystem::new(*p, k.value()), &z0.0, 0.0, t_end, out_stride, cfg)?;

    let mut deviation = 0.0_f64;
    for (yf, zr) in full.states().zip(reduced.states()) {
        let lifted = lift(&ReducedState(zr.try_into().expect("3 components")), k)?;
        for (a, b) in lifted.0.iter().zip(yf) {
            deviation = deviation.max((a - b).abs());
        }
    }
    Ok(ComparisonRun {
        comparison: ReductionComparison {
            k,
            max_state_deviation: deviation,
            horizon: t_end,
            tol_used: cfg.abs_tol.max(cfg.rel_tol),
        },
        full,
        reduced,
    })
}

/// Least-squares ratio `(y1y4 + y2y5)/(y1² + y2²)` at each sample; `None`
/// where the denominator does not exceed `zero_tol`.
pub fn k_drift(traj: &Trajectory, zero_tol: f64) -> Result<Vec<(f64, Option<f64>)>, ReductionError> {
    if traj.dim != 5 {
        return Err(ReductionError::Integrate(IntegrateError::InvalidInput(format!(
            "k_drift expects a 5-dimensional trajectory, got {}",
            traj.dim
        ))));
    }
    Ok(traj
        .iter()
        .map(|(t, y)| {
            let den = y[0] * y[0] + y[1] * y[1];
            let k = (den > zero_tol).then(|| (y[0] * y[3] + y[1] * y[4]) / den);
            (t, k)
        })
        .collect())
}
