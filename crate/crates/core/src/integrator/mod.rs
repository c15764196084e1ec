//! Explicit Runge–Kutta integration: adaptive Dormand–Prince 5(4) and a
//! fixed-step classical RK4 used as an independent cross-check.
//!
//! Output samples are reached by capping the step at each output time, so
//! no dense-output interpolation enters the recorded states.

mod dopri;
mod tangent;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system::System;

pub use tangent::{integrate_with_tangents, StretchRecord, TangentBundle, TangentError, TangentRun, Variational};

/// States with any component above this magnitude are treated as divergent.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

const SAFETY: f64 = 0.9;
const FACTOR_MIN: f64 = 0.2;
const FACTOR_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "adaptive-dp54")]
    AdaptiveDp54,
    #[serde(rename = "fixed-rk4")]
    FixedRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Initial step for the adaptive method; the step size of fixed RK4.
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveDp54,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            h_init: 1e-3,
            h_min: 1e-12,
            h_max: 0.1,
            max_steps: 100_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    pub fn fixed_rk4(h: f64) -> Self {
        Self { method: Method::FixedRk4, h_init: h, h_min: h.min(1e-12), h_max: h, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |msg: String| Err(IntegrateError::InvalidConfig(msg));
        for (name, v) in [("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        for (name, v) in [("h_init", self.h_init), ("h_min", self.h_min), ("h_max", self.h_max)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        if !(self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return bad(format!(
                "step bounds must satisfy h_min <= h_init <= h_max, got {} / {} / {}",
                self.h_min, self.h_init, self.h_max
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }
}

/// Time-stamped states with integrator statistics. States are stored
/// contiguously, `dim` values per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    data: Vec<f64>,
    pub steps_taken: u64,
    pub steps_rejected: u64,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self { dim, times: Vec::new(), data: Vec::new(), steps_taken: 0, steps_rejected: 0 }
    }

    /// Builds a trajectory from explicit samples; used for analysing data
    /// produced elsewhere.
    pub fn from_samples(dim: usize, times: Vec<f64>, states: &[Vec<f64>]) -> Self {
        assert_eq!(times.len(), states.len(), "one state per time");
        let mut data = Vec::with_capacity(dim * states.len());
        for s in states {
            assert_eq!(s.len(), dim, "state dimension");
            data.extend_from_slice(s);
        }
        Self { dim, times, data, steps_taken: 0, steps_rejected: 0 }
    }

    pub fn push(&mut self, t: f64, y: &[f64]) {
        debug_assert_eq!(y.len(), self.dim);
        self.times.push(t);
        self.data.extend_from_slice(y);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times.iter().copied().zip(self.states())
    }

    pub fn first(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(0))
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    /// Values of one coordinate across all samples.
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states().map(|s| s[index]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid integration input: {0}")]
    InvalidInput(String),
    #[error("step size underflow at t = {t} (required h = {h:e} below h_min)")]
    StepUnderflow { t: f64, h: f64, state: Vec<f64>, partial: Box<Trajectory> },
    #[error("solution blew up at t = {t}")]
    BlowUp { t: f64, partial: Box<Trajectory> },
    #[error("step budget of {steps} exhausted at t = {t}")]
    Budget { t: f64, steps: u64, partial: Box<Trajectory> },
}

impl IntegrateError {
    /// Samples recorded before the failure, when any.
    pub fn partial(&self) -> Option<&Trajectory> {
        match self {
            IntegrateError::StepUnderflow { partial, .. }
            | IntegrateError::BlowUp { partial, .. }
            | IntegrateError::Budget { partial, .. } => Some(partial),
            _ => None,
        }
    }

    pub fn is_blow_up(&self) -> bool {
        matches!(self, IntegrateError::BlowUp { .. })
    }
}

/// Failure of a single `advance` call, before partial output is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StepFailure {
    Underflow { t: f64, h: f64 },
    BlowUp { t: f64 },
    Budget { t: f64, steps: u64 },
}

impl StepFailure {
    pub(crate) fn into_error(self, state: &[f64], partial: Trajectory) -> IntegrateError {
        let partial = Box::new(partial);
        match self {
            StepFailure::Underflow { t, h } => IntegrateError::StepUnderflow { t, h, state: state.to_vec(), partial },
            StepFailure::BlowUp { t } => IntegrateError::BlowUp { t, partial },
            StepFailure::Budget { t, steps } => IntegrateError::Budget { t, steps, partial },
        }
    }
}

#[inline]
fn diverged(y: &[f64]) -> bool {
    y.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD)
}

/// Reusable stepping state: work buffers, current step proposal, counters.
pub(crate) struct Stepper<'a, S: ?Sized> {
    sys: &'a S,
    cfg: IntegratorConfig,
    h: f64,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    fsal: bool,
    pub(crate) steps_taken: u64,
    pub(crate) steps_rejected: u64,
}

impl<'a, S: System + ?Sized> Stepper<'a, S> {
    pub(crate) fn new(sys: &'a S, cfg: IntegratorConfig) -> Self {
        let d = sys.dim();
        Self {
            sys,
            cfg,
            h: cfg.h_init,
            k: std::array::from_fn(|_| vec![0.0; d]),
            ytmp: vec![0.0; d],
            ynew: vec![0.0; d],
            fsal: false,
            steps_taken: 0,
            steps_rejected: 0,
        }
    }

    /// Forgets the cached first-stage derivative; required after the state is
    /// modified outside the stepper.
    pub(crate) fn reset(&mut self) {
        self.fsal = false;
    }

    /// Advances `(t, y)` to exactly `t_target`.
    pub(crate) fn advance(&mut self, t: &mut f64, y: &mut [f64], t_target: f64) -> Result<(), StepFailure> {
        match self.cfg.method {
            Method::AdaptiveDp54 => self.advance_dp54(t, y, t_target),
            Method::FixedRk4 => self.advance_rk4(t, y, t_target),
        }
    }

    fn check_budget(&self, t: f64) -> Result<(), StepFailure> {
        let steps = self.steps_taken + self.steps_rejected;
        if steps >= self.cfg.max_steps {
            return Err(StepFailure::Budget { t, steps });
        }
        Ok(())
    }

    fn advance_rk4(&mut self, t: &mut f64, y: &mut [f64], t_target: f64) -> Result<(), StepFailure> {
        let h = self.cfg.h_init;
        while *t < t_target {
            self.check_budget(*t)?;
            let remaining = t_target - *t;
            let (step, last) = if h >= remaining { (remaining, true) } else { (h, false) };
            rk4_step_into(self.sys, *t, y, step, &mut self.k, &mut self.ytmp, &mut self.ynew);
            self.steps_taken += 1;
            let t_next = if last { t_target } else { *t + step };
            if diverged(&self.ynew) {
                return Err(StepFailure::BlowUp { t: t_next });
            }
            y.copy_from_slice(&self.ynew);
            *t = t_next;
        }
        Ok(())
    }

    fn advance_dp54(&mut self, t: &mut f64, y: &mut [f64], t_target: f64) -> Result<(), StepFailure> {
        use dopri::*;

        let n = y.len();
        let cfg = self.cfg;
        while *t < t_target {
            self.check_budget(*t)?;
            if !self.fsal {
                self.sys.rhs(*t, y, &mut self.k[0]);
                self.fsal = true;
            }
            let remaining = t_target - *t;
            let (h, capped) = if self.h >= remaining { (remaining, true) } else { (self.h, false) };
            let t0 = *t;

            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let ytmp = &mut self.ytmp;
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            self.sys.rhs(t0 + C2 * h, ytmp, k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            self.sys.rhs(t0 + C3 * h, ytmp, k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            self.sys.rhs(t0 + C4 * h, ytmp, k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            self.sys.rhs(t0 + C5 * h, ytmp, k5);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            self.sys.rhs(t0 + h, ytmp, k6);
            let ynew = &mut self.ynew;
            for i in 0..n {
                ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            self.sys.rhs(t0 + h, ynew, k7);

            let mut acc = 0.0;
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(ynew[i].abs());
                let r = e / scale;
                acc += r * r;
            }
            let err = (acc / n as f64).sqrt();

            if !err.is_finite() {
                // Non-finite trial: shrink hard; failing that, the solution has diverged.
                self.steps_rejected += 1;
                self.h = h * FACTOR_MIN;
                if self.h < cfg.h_min {
                    return Err(StepFailure::BlowUp { t: t0 });
                }
                continue;
            }

            if err <= 1.0 {
                self.steps_taken += 1;
                let t_next = if capped { t_target } else { t0 + h };
                if diverged(ynew) {
                    return Err(StepFailure::BlowUp { t: t_next });
                }
                y.copy_from_slice(ynew);
                std::mem::swap(k1, k7);
                *t = t_next;
                let factor =
                    if err == 0.0 { FACTOR_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FACTOR_MIN, FACTOR_MAX) };
                // A capped step says nothing about the achievable step size unless it grew.
                let proposal = (h * factor).min(cfg.h_max);
                self.h = if capped { proposal.max(self.h.min(cfg.h_max)) } else { proposal };
            } else {
                self.steps_rejected += 1;
                let factor = (SAFETY * err.powf(-0.2)).clamp(FACTOR_MIN, 1.0);
                self.h = h * factor;
                if self.h < cfg.h_min {
                    return Err(StepFailure::Underflow { t: t0, h: self.h });
                }
            }
        }
        Ok(())
    }
}

fn rk4_step_into<S: System + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
    k: &mut [Vec<f64>; 7],
    ytmp: &mut [f64],
    out: &mut [f64],
) {
    let n = y.len();
    let [k1, k2, k3, k4, ..] = k;
    sys.rhs(t, y, k1);
    for i in 0..n {
        ytmp[i] = y[i] + 0.5 * h * k1[i];
    }
    sys.rhs(t + 0.5 * h, ytmp, k2);
    for i in 0..n {
        ytmp[i] = y[i] + 0.5 * h * k2[i];
    }
    sys.rhs(t + 0.5 * h, ytmp, k3);
    for i in 0..n {
        ytmp[i] = y[i] + h * k3[i];
    }
    sys.rhs(t + h, ytmp, k4);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// One classical fourth-order Runge–Kutta step.
pub fn fixed_rk4_step<S: System + ?Sized>(sys: &S, y: &[f64], t: f64, h: f64) -> Result<Vec<f64>, IntegrateError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(IntegrateError::InvalidInput(format!("step must be positive, got {h}")));
    }
    if y.len() != sys.dim() {
        return Err(IntegrateError::InvalidInput(format!(
            "state has {} components, system expects {}",
            y.len(),
            sys.dim()
        )));
    }
    let d = y.len();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; d]);
    let mut ytmp = vec![0.0; d];
    let mut out = vec![0.0; d];
    rk4_step_into(sys, t, y, h, &mut k, &mut ytmp, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        let mut partial = Trajectory::new(d);
        partial.push(t, y);
        return Err(IntegrateError::BlowUp { t: t + h, partial: Box::new(partial) });
    }
    Ok(out)
}

/// Output grid `t0, t0 + stride, …, t1` with `t1` always last.
pub fn output_times(t0: f64, t1: f64, stride: f64) -> Vec<f64> {
    let mut times = vec![t0];
    let eps = 1e-12 * t1.abs().max(1.0);
    let mut i = 1u64;
    loop {
        let t = t0 + i as f64 * stride;
        if t >= t1 - eps {
            break;
        }
        times.push(t);
        i += 1;
    }
    times.push(t1);
    times
}

/// Integrates `sys` from `(t0, y0)` to `t1`, recording a sample every
/// `out_stride` time units and at `t1`.
pub fn integrate<S: System + ?Sized>(
    sys: &S,
    y0: &[f64],
    t0: f64,
    t1: f64,
    out_stride: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    cfg.validate()?;
    if y0.len() != sys.dim() {
        return Err(IntegrateError::InvalidInput(format!(
            "initial state has {} components, system expects {}",
            y0.len(),
            sys.dim()
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::InvalidInput("initial state is not finite".into()));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(IntegrateError::InvalidInput(format!("need finite t1 > t0, got [{t0}, {t1}]")));
    }
    if !(out_stride.is_finite() && out_stride > 0.0) {
        return Err(IntegrateError::InvalidInput(format!("output stride must be positive, got {out_stride}")));
    }

    let grid = output_times(t0, t1, out_stride);
    let mut traj = Trajectory::new(y0.len());
    traj.times.reserve(grid.len());
    traj.data.reserve(grid.len() * y0.len());
    traj.push(t0, y0);

    let mut stepper = Stepper::new(sys, *cfg);
    let mut t = t0;
    let mut y = y0.to_vec();
    for &target in &grid[1..] {
        if let Err(failure) = stepper.advance(&mut t, &mut y, target) {
            traj.steps_taken = stepper.steps_taken;
            traj.steps_rejected = stepper.steps_rejected;
            return Err(failure.into_error(&y, traj));
        }
        traj.push(t, &y);
    }
    traj.steps_taken = stepper.steps_taken;
    traj.steps_rejected = stepper.steps_rejected;
    Ok(traj)
}

/// Integrates to `t1` and returns only the final state.
pub fn integrate_to<S: System + ?Sized>(
    sys: &S,
    y0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>, IntegrateError> {
    let traj = integrate(sys, y0, t0, t1, t1 - t0, cfg)?;
    Ok(traj.last().expect("non-empty trajectory").to_vec())
}
