//! Lyapunov spectra, equilibrium stability, attractor classification,
//! Poincaré sections and parameter scans.

mod classify;
mod extrema;
mod lyapunov;
mod scan;
mod section;
mod stability;

use thiserror::Error;

use crate::integrator::IntegrateError;
use crate::model::ModelError;

pub use classify::{classify, terminal_variation, Classification, DEFAULT_EPS_ZERO, SETTLED_VARIATION};
pub use extrema::local_maxima;
pub use lyapunov::{lyapunov_spectrum, LyapunovReport, RunStatus, SystemSpec, TracePoint};
pub use scan::{linspace, parameter_scan, ScanConfig, ScanRecord, SeedPolicy, DEFAULT_MAX_STEPS};
pub use section::{poincare_section, Direction, SectionPlane, SectionPoints};
pub use stability::equilibrium_stability;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid analysis input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}
