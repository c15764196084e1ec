use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::CliError;
use crate::analysis::{SeedPolicy, SystemSpec, DEFAULT_EPS_ZERO, DEFAULT_MAX_STEPS};
use crate::integrator::IntegratorConfig;
use crate::model::{equilibrium, lift, KRatio, ParamName, Params, ReducedState};

/// Marker key identifying a sidecar document.
pub const SIDECAR_KEY: &str = "dynlab_sidecar";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: Params,
    pub initial_state: InitialState,
    pub integrator: IntegratorConfig,
    pub times: Times,
    /// Seed of the generator behind random initial states and the verify
    /// sample sets.
    pub seed: u64,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
    pub lyapunov: LyapunovConfig,
    pub scan: ScanSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: Params::new(-2.5, -1.0, -1.0, 0.5),
            initial_state: InitialState::default(),
            integrator: IntegratorConfig::default(),
            times: Times::default(),
            seed: 0,
            output: OutputConfig::default(),
            verify: VerifyConfig::default(),
            lyapunov: LyapunovConfig::default(),
            scan: ScanSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Explicit five-dimensional state.
    Full { y: [f64; 5] },
    /// Reduced coordinates on the plane with ratio `K`; runs the reduced
    /// system except where a full state is required.
    Reduced {
        z: [f64; 3],
        #[serde(rename = "K")]
        k: f64,
    },
    /// The equilibrium `(0, 0, −F/E, 0, 0)` plus an offset.
    Equilibrium {
        #[serde(default)]
        offset: [f64; 5],
    },
    /// Components uniform in `[low, high)`, drawn from `seed`.
    Random {
        #[serde(default = "default_low")]
        low: f64,
        #[serde(default = "default_high")]
        high: f64,
    },
}

fn default_low() -> f64 {
    -5.0
}

fn default_high() -> f64 {
    5.0
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Random { low: default_low(), high: default_high() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Times {
    pub t_transient: f64,
    pub t_total: f64,
    pub out_stride: f64,
}

impl Default for Times {
    fn default() -> Self {
        Self { t_transient: 200.0, t_total: 2200.0, out_stride: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("."), format: Format::Csv }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Overrides every per-identity tolerance when set.
    pub tolerance: Option<f64>,
    /// Random states for the pointwise identities.
    pub samples: usize,
    /// Random trajectories for the flow-level checks.
    pub runs: usize,
    pub t_end: f64,
    pub out_stride: f64,
    /// Half-width of the box random states are drawn from.
    pub box_half_width: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { tolerance: None, samples: 10_000, runs: 8, t_end: 10.0, out_stride: 0.1, box_half_width: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub renorm_interval: f64,
    pub eps_zero: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self { renorm_interval: 1.0, eps_zero: DEFAULT_EPS_ZERO }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub param: ParamName,
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    pub policy: SeedPolicy,
    pub extrema_cap: usize,
    /// Step budget of each integration in the scan.
    pub max_steps: u64,
    pub gnuplot: bool,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            param: ParamName::C,
            start: -3.0,
            end: -2.2,
            steps: 9,
            policy: SeedPolicy::Fixed,
            extrema_cap: 64,
            max_steps: DEFAULT_MAX_STEPS,
            gnuplot: true,
        }
    }
}

/// System and starting state selected by a config.
#[derive(Debug, Clone, PartialEq)]
pub struct Start {
    pub system: SystemSpec,
    pub y0: Vec<f64>,
}

impl RunConfig {
    /// Reads a config or sidecar document, applies `key=value` overrides and
    /// validates the result.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("config {} is not valid JSON: {e}", path.display())))?;
        Self::from_value(doc, overrides)
    }

    pub fn from_value(doc: Value, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = unwrap_sidecar(doc)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| CliError::validation(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(|e| CliError::validation(e.to_string()))?;
        self.integrator.validate().map_err(|e| CliError::validation(e.to_string()))?;
        let t = &self.times;
        if !(t.t_transient >= 0.0 && t.t_total > 0.0 && t.t_total.is_finite()) {
            return Err(CliError::validation(format!(
                "times need t_total > 0 and t_transient >= 0, got {} / {}",
                t.t_transient, t.t_total
            )));
        }
        if !(t.out_stride > 0.0 && t.out_stride.is_finite()) {
            return Err(CliError::validation(format!("times.out_stride must be positive, got {}", t.out_stride)));
        }
        let finite = |name: &str, v: &[f64]| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(CliError::validation(format!("initial_state.{name} must be finite")))
            }
        };
        match &self.initial_state {
            InitialState::Full { y } => finite("y", y)?,
            InitialState::Reduced { z, k } => {
                finite("z", z)?;
                finite("K", &[*k])?;
            }
            InitialState::Equilibrium { offset } => {
                finite("offset", offset)?;
                equilibrium(&self.params).map_err(|e| CliError::validation(format!("equilibrium seeding: {e}")))?;
            }
            InitialState::Random { low, high } => {
                finite("low/high", &[*low, *high])?;
                if !(low < high) {
                    return Err(CliError::validation(format!("random box needs low < high, got [{low}, {high})")));
                }
            }
        }
        let v = &self.verify;
        if let Some(tol) = v.tolerance {
            if !(tol >= 0.0) {
                return Err(CliError::validation(format!("verify.tolerance must be >= 0, got {tol}")));
            }
        }
        if !(v.t_end > 0.0 && v.out_stride > 0.0 && v.box_half_width > 0.0) {
            return Err(CliError::validation("verify.t_end, out_stride and box_half_width must be positive"));
        }
        let l = &self.lyapunov;
        if !(l.renorm_interval > 0.0 && l.eps_zero >= 0.0) {
            return Err(CliError::validation("lyapunov.renorm_interval must be positive and eps_zero >= 0"));
        }
        let s = &self.scan;
        if !(s.start.is_finite() && s.end.is_finite()) {
            return Err(CliError::validation("scan.start and scan.end must be finite"));
        }
        if s.max_steps == 0 {
            return Err(CliError::validation("scan.max_steps must be positive"));
        }
        Ok(())
    }

    /// Resolves the initial state. Random states are drawn from `seed`.
    pub fn start(&self) -> Result<Start, CliError> {
        let p = self.params;
        Ok(match &self.initial_state {
            InitialState::Full { y } => Start { system: SystemSpec::Full { params: p }, y0: y.to_vec() },
            InitialState::Reduced { z, k } => {
                Start { system: SystemSpec::Reduced { params: p, k: *k }, y0: z.to_vec() }
            }
            InitialState::Equilibrium { offset } => {
                let eq = equilibrium(&p).map_err(|e| CliError::validation(format!("equilibrium seeding: {e}")))?;
                let y0 = eq.0.iter().zip(offset).map(|(a, b)| a + b).collect();
                Start { system: SystemSpec::Full { params: p }, y0 }
            }
            InitialState::Random { low, high } => {
                let mut rng = self.rng();
                let y0 = (0..5).map(|_| rng.gen_range(*low..*high)).collect();
                Start { system: SystemSpec::Full { params: p }, y0 }
            }
        })
    }

    /// Full-space version of the initial state (reduced states are lifted).
    pub fn full_start(&self) -> Result<[f64; 5], CliError> {
        if let InitialState::Reduced { z, k } = &self.initial_state {
            let y = lift(&ReducedState(*z), KRatio::Standard(*k)).map_err(|e| CliError::validation(e.to_string()))?;
            return Ok(y.0);
        }
        let s = self.start()?;
        Ok(s.y0.try_into().expect("full start has 5 components"))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn unwrap_sidecar(doc: Value) -> Result<Value, CliError> {
    match doc {
        Value::Object(mut map) if map.contains_key(SIDECAR_KEY) => {
            map.remove("config").ok_or_else(|| CliError::validation("sidecar has no \"config\" entry"))
        }
        other => Ok(other),
    }
}

/// Applies `a.b.c=value`. The value is parsed as JSON, falling back to a
/// plain string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("override {assignment:?} is not of the form key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::validation(format!("override key {path:?} is malformed")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for (i, key) in keys.iter().enumerate() {
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Map::new());
            } else {
                return Err(CliError::validation(format!(
                    "override {path:?}: {} is not an object",
                    keys[..i].join(".")
                )));
            }
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == keys.len() {
            map.insert((*key).to_string(), value);
            return Ok(());
        }
        node = map.entry((*key).to_string()).or_insert(Value::Null);
    }
    unreachable!("keys is non-empty")
}
