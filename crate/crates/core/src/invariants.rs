//! Algebraic identities of the full system: the bilinear quantity
//! `y1·y5 − y2·y4` and its exponential law, the proportionality residuals
//! that vanish on limit sets, and the two forms of the derivative of
//! `y1² + y2² + y4² + y5²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::Trajectory;
use crate::model::{full_field_raw, FullState, Params};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("expected a trajectory of the 5-dimensional system, got dimension {0}")]
    DimensionMismatch(usize),
    #[error("trajectory is empty")]
    Empty,
}

/// Worst residual of one identity over a trajectory or a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    pub worst_time: f64,
    pub pass: bool,
}

/// `y1·y5 − y2·y4`.
#[inline]
pub fn bilinear(y: &FullState) -> f64 {
    bilinear_raw(&y.0)
}

#[inline]
fn bilinear_raw(y: &[f64]) -> f64 {
    y[0] * y[4] - y[1] * y[3]
}

/// Closed-form value `I0·exp(2C·t)` of the bilinear quantity.
pub fn bilinear_prediction(i0: f64, c: f64, t: f64) -> f64 {
    if i0 == 0.0 {
        return 0.0;
    }
    i0 * (2.0 * c * t).exp()
}

/// `|∇I·f(y) − 2C·I(y)|` with `I` the bilinear quantity. Zero in exact
/// arithmetic.
pub fn derivative_identity_residual(y: &FullState, p: &Params) -> f64 {
    let [y1, y2, _, y4, y5] = y.0;
    let mut f = [0.0; 5];
    full_field_raw(&y.0, p, &mut f);
    let along_flow = y5 * f[0] - y4 * f[1] - y2 * f[3] + y1 * f[4];
    (along_flow - 2.0 * p.c * bilinear(y)).abs()
}

/// Multiplicative proportionality residuals `(r14, r25)` of `y` relative to
/// the initial state `y0`.
pub fn proportionality_residuals(y: &FullState, y0: &FullState) -> (f64, f64) {
    let r14 = y0.0[3] * y.0[0] - y0.0[0] * y.0[3];
    let r25 = y0.0[4] * y.0[1] - y0.0[1] * y.0[4];
    (r14, r25)
}

/// `y1² + y2² + y4² + y5²`.
#[inline]
pub fn quadratic_norm(y: &FullState) -> f64 {
    quadratic_norm_raw(&y.0)
}

#[inline]
fn quadratic_norm_raw(y: &[f64]) -> f64 {
    y[0] * y[0] + y[1] * y[1] + y[3] * y[3] + y[4] * y[4]
}

/// Time derivative of [`quadratic_norm`] along the flow in two algebraic
/// forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormDerivative {
    /// `2C·S + 8(y1y2 + y4y5)`.
    pub raw: f64,
    /// `(C+2)(y1+y2)² + (C−2)(y1−y2)² + (C+2)(y4+y5)² + (C−2)(y4−y5)²`.
    pub canonical: f64,
}

pub fn norm_derivative_forms(y: &FullState, p: &Params) -> NormDerivative {
    let [y1, y2, _, y4, y5] = y.0;
    let c = p.c;
    let raw = 2.0 * c * quadratic_norm(y) + 8.0 * (y1 * y2 + y4 * y5);
    let plus = c + 2.0;
    let minus = c - 2.0;
    let canonical =
        plus * (y1 + y2).powi(2) + minus * (y1 - y2).powi(2) + plus * (y4 + y5).powi(2) + minus * (y4 - y5).powi(2);
    NormDerivative { raw, canonical }
}

/// `∇S·f(y)` evaluated directly from the vector field.
pub fn norm_derivative_along_flow(y: &FullState, p: &Params) -> f64 {
    let mut f = [0.0; 5];
    full_field_raw(&y.0, p, &mut f);
    2.0 * (y.0[0] * f[0] + y.0[1] * f[1] + y.0[3] * f[3] + y.0[4] * f[4])
}

/// Reports from [`check_trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReports {
    /// `|I(t) − I0·exp(2C(t − t0))|`.
    pub bilinear_law: InvariantReport,
    /// `max(|r14|, |r25|)`; only evaluated when the initial state has a
    /// vanishing bilinear quantity.
    pub proportionality: Option<InvariantReport>,
}

struct Tracker {
    max_abs: f64,
    max_rel: f64,
    worst_time: f64,
}

impl Tracker {
    fn new(t0: f64) -> Self {
        Self { max_abs: 0.0, max_rel: 0.0, worst_time: t0 }
    }

    fn update(&mut self, t: f64, abs: f64, scale: f64) {
        let rel = abs / scale;
        self.max_abs = self.max_abs.max(abs);
        // NaN compares false; force it to be recorded as the worst sample.
        if rel > self.max_rel || rel.is_nan() {
            self.max_rel = if rel.is_nan() { f64::INFINITY } else { rel };
            self.worst_time = t;
        }
    }

    fn finish(self, tol: f64) -> InvariantReport {
        InvariantReport {
            max_abs_residual: self.max_abs,
            max_rel_residual: self.max_rel,
            worst_time: self.worst_time,
            pass: self.max_rel <= tol,
        }
    }
}

/// Threshold below which the initial bilinear quantity counts as zero.
pub fn on_limit_set_threshold(y0: &FullState) -> f64 {
    1e-12 * (1.0 + y0.norm().powi(2))
}

/// Evaluates the bilinear law and, when applicable, the proportionality
/// residuals at every output sample of a full-system trajectory.
///
/// Relative residuals are divided by `max(1, running max of |y|²)` since
/// both identities are homogeneous of degree two; `pass` compares the
/// relative residual against `tol`.
pub fn check_trajectory(traj: &Trajectory, p: &Params, tol: f64) -> Result<TrajectoryReports, InvariantError> {
    if traj.dim != 5 {
        return Err(InvariantError::DimensionMismatch(traj.dim));
    }
    let y0 = FullState(traj.first().ok_or(InvariantError::Empty)?.try_into().expect("5 components"));
    let t0 = traj.times[0];
    let i0 = bilinear(&y0);
    let track_proportionality = i0.abs() <= on_limit_set_threshold(&y0);

    let mut law = Tracker::new(t0);
    let mut prop = Tracker::new(t0);
    let mut running_max = y0.norm().powi(2);
    for (t, y) in traj.iter() {
        let y = FullState(y.try_into().expect("5 components"));
        running_max = running_max.max(y.norm().powi(2));
        let scale = running_max.max(1.0);
        let predicted = bilinear_prediction(i0, p.c, t - t0);
        law.update(t, (bilinear(&y) - predicted).abs(), scale);
        if track_proportionality {
            let (r14, r25) = proportionality_residuals(&y, &y0);
            prop.update(t, r14.abs().max(r25.abs()), scale);
        }
    }
    Ok(TrajectoryReports {
        bilinear_law: law.finish(tol),
        proportionality: track_proportionality.then(|| prop.finish(tol)),
    })
}

/// `quadratic_norm` at every sample of a full trajectory.
pub fn quadratic_norm_series(traj: &Trajectory) -> Result<Vec<f64>, InvariantError> {
    if traj.dim != 5 {
        return Err(InvariantError::DimensionMismatch(traj.dim));
    }
    Ok(traj.states().map(quadratic_norm_raw).collect())
}

/// Bilinear quantity at every sample of a full trajectory.
pub fn bilinear_series(traj: &Trajectory) -> Result<Vec<f64>, InvariantError> {
    if traj.dim != 5 {
        return Err(InvariantError::DimensionMismatch(traj.dim));
    }
    Ok(traj.states().map(bilinear_raw).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, IntegratorConfig};
    use crate::model::{equilibrium, FullSystem};
    use proptest::prelude::*;

    fn fs(v: [f64; 5]) -> FullState {
        FullState(v)
    }

    #[test]
    fn bilinear_examples() {
        assert_eq!(bilinear(&fs([1.0, 0.0, 9.0, 0.0, 1.0])), 1.0);
        assert_eq!(bilinear(&fs([1.0, 2.0, -4.0, 3.0, 6.0])), 0.0);
        assert_eq!(bilinear(&fs([2.0, 1.0, 0.5, -1.0, 1.0])), 3.0);
    }

    #[test]
    fn prediction_examples() {
        assert_eq!(bilinear_prediction(3.5, 0.0, 17.0), 3.5);
        assert!((bilinear_prediction(1.0, -1.0, 1.0) - 0.1353352832366127).abs() < 1e-15);
        assert_eq!(bilinear_prediction(0.0, 5.0, 1e3), 0.0);
    }

    #[test]
    fn derivative_identity_examples() {
        for p in [Params::new(-1.0, 1.0, -1.0, 0.0), Params::new(2.0, -3.0, 0.5, 1.0)] {
            assert_eq!(derivative_identity_residual(&fs([1.0, 0.0, 0.0, 0.0, 1.0]), &p), 0.0);
        }
        let p = Params::new(-1.5, 0.5, -2.0, 3.0);
        let eq = equilibrium(&p).unwrap();
        assert_eq!(derivative_identity_residual(&eq, &p), 0.0);
    }

    #[test]
    fn proportionality_examples() {
        let y0 = fs([1.0, 1.0, 0.0, 2.0, 2.0]);
        assert_eq!(proportionality_residuals(&y0, &y0), (0.0, 0.0));
        assert_eq!(proportionality_residuals(&fs([3.0, 5.0, 7.0, 6.0, 10.0]), &y0), (0.0, 0.0));
        let r = proportionality_residuals(&fs([0.0, 0.0, 0.0, 1.0, 0.0]), &fs([1.0, 0.0, 0.0, 0.0, 0.0]));
        assert_eq!(r, (-1.0, 0.0));
    }

    #[test]
    fn quadratic_norm_examples() {
        assert_eq!(quadratic_norm(&FullState::ORIGIN), 0.0);
        assert_eq!(quadratic_norm(&fs([1.0, 0.0, 7.0, 0.0, 1.0])), 2.0);
        assert_eq!(quadratic_norm(&fs([1.0, 2.0, 0.0, 3.0, 4.0])), 30.0);
    }

    #[test]
    fn norm_derivative_examples() {
        let p = Params::new(-1.0, 1.0, -1.0, 0.0);
        let y = fs([1.0, 0.0, 0.0, 0.0, 1.0]);
        let forms = norm_derivative_forms(&y, &p);
        assert_eq!((forms.raw, forms.canonical), (-4.0, -4.0));
        assert_eq!(norm_derivative_along_flow(&y, &p), -4.0);

        let p = Params::new(-2.0, 1.0, -1.0, 0.0);
        let forms = norm_derivative_forms(&fs([0.7, 0.7, 3.0, -1.3, -1.3]), &p);
        assert_eq!(forms.canonical, 0.0);

        let forms = norm_derivative_forms(&FullState::ORIGIN, &p);
        assert_eq!((forms.raw, forms.canonical), (0.0, 0.0));
    }

    #[test]
    fn trajectory_checks() {
        let p = Params::new(-1.0, 0.5, -1.0, 0.2);
        let cfg = IntegratorConfig::default();
        let traj = integrate(&FullSystem::new(p), &[1.0, 0.0, 0.0, 0.0, 1.0], 0.0, 10.0, 0.5, &cfg).unwrap();
        let rep = check_trajectory(&traj, &p, 1e-8).unwrap();
        assert!(rep.bilinear_law.pass, "{rep:?}");
        assert!(rep.proportionality.is_none());
        for (t, i) in traj.times.iter().zip(bilinear_series(&traj).unwrap()) {
            let expected = (-2.0 * t).exp();
            assert!((i - expected).abs() <= 1e-8 * expected.max(1e-300) || (i - expected).abs() <= 1e-12, "t={t}");
        }

        // on the plane y4 = 2y1, y5 = 2y2
        let y0 = [0.8, -0.6, 0.1, 1.6, -1.2];
        let traj = integrate(&FullSystem::new(p), &y0, 0.0, 20.0, 0.5, &cfg).unwrap();
        let rep = check_trajectory(&traj, &p, 10.0 * cfg.abs_tol).unwrap();
        assert!(rep.bilinear_law.pass && rep.proportionality.unwrap().pass, "{rep:?}");
        assert!(rep.bilinear_law.worst_time >= 0.0 && rep.bilinear_law.worst_time <= 20.0);

        let planar = Trajectory::new(3);
        assert_eq!(check_trajectory(&planar, &p, 1.0), Err(InvariantError::DimensionMismatch(3)));
    }

    #[test]
    fn conserved_when_c_is_zero() {
        let p = Params::new(0.0, 1.0, -1.0, 0.3);
        let traj =
            integrate(&FullSystem::new(p), &[0.5, -0.2, 0.0, 0.3, 0.4], 0.0, 100.0, 1.0, &IntegratorConfig::default())
                .unwrap();
        let series = bilinear_series(&traj).unwrap();
        let i0 = series[0];
        assert!(series.iter().all(|i| (i - i0).abs() <= 1e-8), "{:?}", series.last());
    }

    fn state(r: f64) -> impl Strategy<Value = [f64; 5]> {
        prop::array::uniform5(-r..r)
    }

    fn params() -> impl Strategy<Value = Params> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(c, d, e, f)| Params::new(c, d, e, f))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn derivative_identity_is_round_off(y in state(10.0), p in params()) {
            let y = FullState(y);
            let bound = 1e-10 * (1.0 + y.norm().powi(3));
            prop_assert!(derivative_identity_residual(&y, &p) <= bound);
        }

        #[test]
        fn norm_derivative_forms_agree(y in state(10.0), p in params()) {
            let y = FullState(y);
            let forms = norm_derivative_forms(&y, &p);
            let n2 = y.norm().powi(2);
            prop_assert!((forms.raw - forms.canonical).abs() <= 1e-12 * (1.0 + n2));
            prop_assert!((forms.raw - norm_derivative_along_flow(&y, &p)).abs() <= 1e-10 * (1.0 + n2 * n2));
        }
    }
}
