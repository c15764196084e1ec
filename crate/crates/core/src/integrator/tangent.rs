//! Variational (tangent-space) propagation with periodic Gram–Schmidt
//! renormalisation.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{output_times, IntegrateError, IntegratorConfig, Stepper, Trajectory};
use crate::linalg;
use crate::system::{Jacobian, System};

/// Base point plus a `d × d` frame of tangent vectors stored column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentBundle {
    pub base: Vec<f64>,
    pub frame: Vec<f64>,
}

impl TangentBundle {
    /// Bundle with the identity frame.
    pub fn identity(base: Vec<f64>) -> Self {
        let d = base.len();
        Self { base, frame: linalg::identity(d) }
    }

    /// Bundle with [`linalg::generic_frame`], whose columns all have
    /// components along every direction.
    pub fn generic(base: Vec<f64>) -> Self {
        let d = base.len();
        Self { base, frame: linalg::generic_frame(d) }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.frame[j * d..(j + 1) * d]
    }

    pub fn orthonormality_defect(&self) -> f64 {
        linalg::orthonormality_defect(&self.frame, self.dim())
    }
}

/// Log stretch of each frame column over one renormalisation interval
/// ending at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchRecord {
    pub t: f64,
    pub dt: f64,
    pub log_stretch: Vec<f64>,
    /// `max |QᵀQ − I|` of the frame right after renormalisation.
    pub orthonormality_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentRun {
    pub bundle: TangentBundle,
    pub t: f64,
    pub records: Vec<StretchRecord>,
    pub steps_taken: u64,
    pub steps_rejected: u64,
}

/// Integration failure together with everything recorded before it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source}")]
pub struct TangentError {
    pub source: IntegrateError,
    pub partial: Box<TangentRun>,
}

/// Augmented system `(y, Φ)` with `ẏ = f(y)` and `Φ̇ = J(y)·Φ`.
pub struct Variational<S> {
    sys: S,
    jac: RefCell<Vec<f64>>,
}

impl<S: Jacobian> Variational<S> {
    pub fn new(sys: S) -> Self {
        let d = sys.dim();
        Self { sys, jac: RefCell::new(vec![0.0; d * d]) }
    }
}

impl<S: Jacobian> System for Variational<S> {
    fn dim(&self) -> usize {
        let d = self.sys.dim();
        d + d * d
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.sys.dim();
        let (base, frame) = y.split_at(d);
        let (dbase, dframe) = dy.split_at_mut(d);
        self.sys.rhs(t, base, dbase);
        let mut jac = self.jac.borrow_mut();
        self.sys.jacobian(t, base, &mut jac);
        for (col, dcol) in frame.chunks_exact(d).zip(dframe.chunks_exact_mut(d)) {
            for (i, out) in dcol.iter_mut().enumerate() {
                let row = &jac[i * d..(i + 1) * d];
                *out = row.iter().zip(col).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// Propagates `bundle0` from `t0` to `t1`, orthonormalising the frame every
/// `renorm_interval` time units (and at `t1`) and recording the log of each
/// column's stretch factor.
pub fn integrate_with_tangents<S: Jacobian>(
    sys: S,
    bundle0: &TangentBundle,
    t0: f64,
    t1: f64,
    renorm_interval: f64,
    cfg: &IntegratorConfig,
) -> Result<TangentRun, TangentError> {
    let d = sys.dim();
    let fail = |source: IntegrateError| TangentError {
        source,
        partial: Box::new(TangentRun {
            bundle: bundle0.clone(),
            t: t0,
            records: Vec::new(),
            steps_taken: 0,
            steps_rejected: 0,
        }),
    };
    cfg.validate().map_err(fail)?;
    if bundle0.base.len() != d || bundle0.frame.len() != d * d {
        return Err(fail(IntegrateError::InvalidInput(format!("tangent bundle does not match system dimension {d}"))));
    }
    if bundle0.base.iter().chain(&bundle0.frame).any(|v| !v.is_finite()) {
        return Err(fail(IntegrateError::InvalidInput("tangent bundle is not finite".into())));
    }
    if bundle0.orthonormality_defect() > 1e-10 {
        return Err(fail(IntegrateError::InvalidInput("initial frame is not orthonormal".into())));
    }
    if !(renorm_interval.is_finite() && renorm_interval > 0.0) {
        return Err(fail(IntegrateError::InvalidInput(format!(
            "renormalisation interval must be positive, got {renorm_interval}"
        ))));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(fail(IntegrateError::InvalidInput(format!("need finite t1 > t0, got [{t0}, {t1}]"))));
    }

    let aug = Variational::new(sys);
    let mut y: Vec<f64> = bundle0.base.iter().chain(&bundle0.frame).copied().collect();
    let mut stepper = Stepper::new(&aug, *cfg);
    let mut t = t0;
    let grid = output_times(t0, t1, renorm_interval);
    let mut records = Vec::with_capacity(grid.len());

    for &target in &grid[1..] {
        let t_start = t;
        if let Err(failure) = stepper.advance(&mut t, &mut y, target) {
            let mut base = Trajectory::new(d);
            base.push(t, &y[..d]);
            let source = failure.into_error(&y[..d], base);
            let partial = TangentRun {
                bundle: TangentBundle { base: y[..d].to_vec(), frame: y[d..].to_vec() },
                t,
                records,
                steps_taken: stepper.steps_taken,
                steps_rejected: stepper.steps_rejected,
            };
            return Err(TangentError { source, partial: Box::new(partial) });
        }
        let diag = linalg::gram_schmidt(&mut y[d..], d);
        stepper.reset();
        records.push(StretchRecord {
            t,
            dt: t - t_start,
            log_stretch: diag.iter().map(|r| r.ln()).collect(),
            orthonormality_defect: linalg::orthonormality_defect(&y[d..], d),
        });
    }

    Ok(TangentRun {
        bundle: TangentBundle { base: y[..d].to_vec(), frame: y[d..].to_vec() },
        t,
        records,
        steps_taken: stepper.steps_taken,
        steps_rejected: stepper.steps_rejected,
    })
}
