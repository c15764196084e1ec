//! Averaged five-dimensional pendulum / motor system and its reduction onto
//! the invariant planes `y4 = K·y1, y5 = K·y2`.
//!
//! Everything here is a pure function of its inputs. Parameters are
//! validated at operation boundaries rather than at construction so that
//! parameter sweeps can pass through degenerate values such as `E = 0`.

use nalgebra::{Matrix3, Matrix5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system::{Jacobian, System};

/// Coefficient of the bilinear coupling term `M(y)` in the pair equations.
const COUPLING: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("state contains a non-finite component: {0:?}")]
    NonFiniteState(Vec<f64>),
    #[error("parameter {name} is not finite ({value})")]
    NonFiniteParam { name: &'static str, value: f64 },
    #[error("degenerate parameters: {0}")]
    DegenerateParams(&'static str),
}

/// The four model constants.
///
/// Negative `C` is dissipative; `E` is the slope of the linearised motor
/// characteristic and `F` the constant torque term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

impl Params {
    pub const fn new(c: f64, d: f64, e: f64, f: f64) -> Self {
        Self { c, d, e, f }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("C", self.c), ("D", self.d), ("E", self.e), ("F", self.f)] {
            if !value.is_finite() {
                return Err(ModelError::NonFiniteParam { name, value });
            }
        }
        Ok(())
    }

    /// Value of the named parameter (`C`, `D`, `E` or `F`).
    pub fn get(&self, name: ParamName) -> Option<f64> {
        match name {
            ParamName::C => Some(self.c),
            ParamName::D => Some(self.d),
            ParamName::E => Some(self.e),
            ParamName::F => Some(self.f),
            ParamName::K => None,
        }
    }

    /// Copy with one parameter replaced. `K` is not a model parameter and
    /// leaves the set unchanged.
    pub fn with(&self, name: ParamName, value: f64) -> Self {
        let mut p = *self;
        match name {
            ParamName::C => p.c = value,
            ParamName::D => p.d = value,
            ParamName::E => p.e = value,
            ParamName::F => p.f = value,
            ParamName::K => {}
        }
        p
    }
}

/// Names of sweepable quantities. `K` is the manifold ratio of the reduced
/// system rather than one of the four model constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamName {
    C,
    D,
    E,
    F,
    K,
}

impl ParamName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParamName::C => "C",
            ParamName::D => "D",
            ParamName::E => "E",
            ParamName::F => "F",
            ParamName::K => "K",
        }
    }
}

impl std::str::FromStr for ParamName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "C" => Ok(ParamName::C),
            "D" => Ok(ParamName::D),
            "E" => Ok(ParamName::E),
            "F" => Ok(ParamName::F),
            "K" => Ok(ParamName::K),
            other => Err(format!("unknown parameter name {other:?} (expected C, D, E, F or K)")),
        }
    }
}

/// Point `(y1, …, y5)` of the full phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FullState(pub [f64; 5]);

/// Point `(y1, y2, y3)` of a reduced phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReducedState(pub [f64; 3]);

macro_rules! state_common {
    ($ty:ident, $n:expr) => {
        impl $ty {
            pub const fn new(v: [f64; $n]) -> Self {
                Self(v)
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }

            pub fn check_finite(&self) -> Result<(), ModelError> {
                if self.is_finite() {
                    Ok(())
                } else {
                    Err(ModelError::NonFiniteState(self.0.to_vec()))
                }
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }

            pub fn norm(&self) -> f64 {
                self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
        }

        impl std::ops::Index<usize> for $ty {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl TryFrom<&[f64]> for $ty {
            type Error = ModelError;
            fn try_from(v: &[f64]) -> Result<Self, ModelError> {
                let arr: [f64; $n] = v.try_into().map_err(|_| ModelError::NonFiniteState(v.to_vec()))?;
                Ok(Self(arr))
            }
        }
    };
}

state_common!(FullState, 5);
state_common!(ReducedState, 3);

impl FullState {
    pub const ORIGIN: FullState = FullState([0.0; 5]);

    /// Drops the `(y4, y5)` pair.
    pub fn project(&self) -> ReducedState {
        ReducedState([self.0[0], self.0[1], self.0[2]])
    }
}

/// Proportionality representation of a state on an invariant plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRatio {
    /// `y4 = K·y1`, `y5 = K·y2`.
    Standard(f64),
    /// `y1 = K'·y4`, `y2 = K'·y5`; the reduced coordinates are `(y4, y5, y3)`.
    Swapped(f64),
    /// Both pairs vanish; any `K` represents the state.
    ZeroPair,
}

impl KRatio {
    /// Ratio entering the reduced field. The reduced equations are identical
    /// for the standard and swapped representations.
    pub fn value(&self) -> f64 {
        match *self {
            KRatio::Standard(k) | KRatio::Swapped(k) => k,
            KRatio::ZeroPair => 0.0,
        }
    }
}

#[inline]
fn shared_terms(y: &[f64; 5]) -> (f64, f64) {
    let [y1, y2, y3, y4, y5] = *y;
    let g = y3 + 0.125 * (y1 * y1 + y2 * y2 + y4 * y4 + y5 * y5);
    let m = y1 * y5 - y2 * y4;
    (g, m)
}

/// Full field without validation. Used by the integrator hot loop.
#[inline]
pub fn full_field_raw(y: &[f64; 5], p: &Params, out: &mut [f64; 5]) {
    let [y1, y2, y3, y4, y5] = *y;
    let (g, m) = shared_terms(y);
    let cm = COUPLING * m;
    out[0] = p.c * y1 - g * y2 - cm * y4 + 2.0 * y2;
    out[1] = p.c * y2 + g * y1 - cm * y5 + 2.0 * y1;
    out[2] = p.d * (y1 * y2 + y4 * y5) + p.e * y3 + p.f;
    out[3] = p.c * y4 - g * y5 + cm * y1 + 2.0 * y5;
    out[4] = p.c * y5 + g * y4 + cm * y2 + 2.0 * y4;
}

/// Row-major analytic Jacobian of [`full_field_raw`].
pub fn full_jacobian_raw(y: &[f64; 5], p: &Params, jac: &mut [f64; 25]) {
    let [y1, y2, _, y4, y5] = *y;
    let (g, m) = shared_terms(y);
    let dg = [0.25 * y1, 0.25 * y2, 1.0, 0.25 * y4, 0.25 * y5];
    let dm = [y5, -y4, 0.0, -y2, y1];
    let a = COUPLING;
    let am = a * m;

    for j in 0..5 {
        jac[j] = -y2 * dg[j] - a * y4 * dm[j];
        jac[5 + j] = y1 * dg[j] - a * y5 * dm[j];
        jac[15 + j] = -y5 * dg[j] + a * y1 * dm[j];
        jac[20 + j] = y4 * dg[j] + a * y2 * dm[j];
    }
    // row 1
    jac[0] += p.c;
    jac[1] += 2.0 - g;
    jac[3] -= am;
    // row 2
    jac[5] += 2.0 + g;
    jac[6] += p.c;
    jac[9] -= am;
    // row 3
    jac[10] = p.d * y2;
    jac[11] = p.d * y1;
    jac[12] = p.e;
    jac[13] = p.d * y5;
    jac[14] = p.d * y4;
    // row 4
    jac[15] += am;
    jac[18] += p.c;
    jac[19] += 2.0 - g;
    // row 5
    jac[21] += am;
    jac[23] += 2.0 + g;
    jac[24] += p.c;
}

/// Reduced field without validation.
#[inline]
pub fn reduced_field_raw(z: &[f64; 3], k: f64, p: &Params, out: &mut [f64; 3]) {
    let [z1, z2, z3] = *z;
    let s = 1.0 + k * k;
    let h = z3 + 0.125 * s * (z1 * z1 + z2 * z2);
    out[0] = p.c * z1 - h * z2 + 2.0 * z2;
    out[1] = p.c * z2 + h * z1 + 2.0 * z1;
    out[2] = p.d * (s * (z1 * z2)) + p.e * z3 + p.f;
}

/// Row-major analytic Jacobian of [`reduced_field_raw`].
pub fn reduced_jacobian_raw(z: &[f64; 3], k: f64, p: &Params, jac: &mut [f64; 9]) {
    let [z1, z2, z3] = *z;
    let s = 1.0 + k * k;
    let h = z3 + 0.125 * s * (z1 * z1 + z2 * z2);
    let dh = [0.25 * s * z1, 0.25 * s * z2, 1.0];
    jac[0] = p.c - z2 * dh[0];
    jac[1] = -z2 * dh[1] - h + 2.0;
    jac[2] = -z2;
    jac[3] = z1 * dh[0] + h + 2.0;
    jac[4] = p.c + z1 * dh[1];
    jac[5] = z1;
    jac[6] = p.d * s * z2;
    jac[7] = p.d * s * z1;
    jac[8] = p.e;
}

fn check_k(k: f64) -> Result<(), ModelError> {
    if k.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFiniteParam { name: "K", value: k })
    }
}

pub fn full_vector_field(y: &FullState, p: &Params) -> Result<FullState, ModelError> {
    y.check_finite()?;
    p.validate()?;
    let mut out = [0.0; 5];
    full_field_raw(&y.0, p, &mut out);
    Ok(FullState(out))
}

/// Analytic Jacobian `∂ẏi/∂yj` of the full field.
pub fn full_jacobian(y: &FullState, p: &Params) -> Result<Matrix5<f64>, ModelError> {
    y.check_finite()?;
    p.validate()?;
    let mut jac = [0.0; 25];
    full_jacobian_raw(&y.0, p, &mut jac);
    Ok(Matrix5::from_row_slice(&jac))
}

pub fn reduced_vector_field(z: &ReducedState, k: f64, p: &Params) -> Result<ReducedState, ModelError> {
    z.check_finite()?;
    check_k(k)?;
    p.validate()?;
    let mut out = [0.0; 3];
    reduced_field_raw(&z.0, k, p, &mut out);
    Ok(ReducedState(out))
}

pub fn reduced_jacobian(z: &ReducedState, k: f64, p: &Params) -> Result<Matrix3<f64>, ModelError> {
    z.check_finite()?;
    check_k(k)?;
    p.validate()?;
    let mut jac = [0.0; 9];
    reduced_jacobian_raw(&z.0, k, p, &mut jac);
    Ok(Matrix3::from_row_slice(&jac))
}

/// The equilibrium `(0, 0, −F/E, 0, 0)`.
pub fn equilibrium(p: &Params) -> Result<FullState, ModelError> {
    p.validate()?;
    if p.e == 0.0 {
        return Err(ModelError::DegenerateParams("equilibrium requires E != 0"));
    }
    Ok(FullState([0.0, 0.0, -p.f / p.e, 0.0, 0.0]))
}

/// Embeds a reduced state into the full phase space.
pub fn lift(z: &ReducedState, k: KRatio) -> Result<FullState, ModelError> {
    z.check_finite()?;
    let [z1, z2, z3] = z.0;
    let y = match k {
        KRatio::Standard(k) => [z1, z2, z3, k * z1, k * z2],
        KRatio::Swapped(k) => [k * z1, k * z2, z3, z1, z2],
        KRatio::ZeroPair => [z1, z2, z3, 0.0, 0.0],
    };
    let y = FullState(y);
    y.check_finite()?;
    Ok(y)
}

/// The full five-dimensional system as an integrable vector field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullSystem {
    pub params: Params,
}

impl FullSystem {
    pub fn new(params: Params) -> Self {
        Self { params }
    }
}

impl System for FullSystem {
    fn dim(&self) -> usize {
        5
    }

    #[inline]
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let y: &[f64; 5] = y.try_into().expect("full system state has 5 components");
        let dy: &mut [f64; 5] = dy.try_into().expect("full system derivative has 5 components");
        full_field_raw(y, &self.params, dy);
    }
}

impl Jacobian for FullSystem {
    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut [f64]) {
        let y: &[f64; 5] = y.try_into().expect("full system state has 5 components");
        let jac: &mut [f64; 25] = jac.try_into().expect("5x5 jacobian buffer");
        full_jacobian_raw(y, &self.params, jac);
    }
}

/// The three-dimensional system on the invariant plane with ratio `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSystem {
    pub params: Params,
    pub k: f64,
}

impl ReducedSystem {
    pub fn new(params: Params, k: f64) -> Self {
        Self { params, k }
    }
}

impl System for ReducedSystem {
    fn dim(&self) -> usize {
        3
    }

    #[inline]
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let z: &[f64; 3] = y.try_into().expect("reduced system state has 3 components");
        let dz: &mut [f64; 3] = dy.try_into().expect("reduced system derivative has 3 components");
        reduced_field_raw(z, self.k, &self.params, dz);
    }
}

impl Jacobian for ReducedSystem {
    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut [f64]) {
        let z: &[f64; 3] = y.try_into().expect("reduced system state has 3 components");
        let jac: &mut [f64; 9] = jac.try_into().expect("3x3 jacobian buffer");
        reduced_jacobian_raw(z, self.k, &self.params, jac);
    }
}
