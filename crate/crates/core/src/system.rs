//! Vector-field abstractions shared by the integrator and the analyses.

/// An autonomous or time-dependent first-order system `ẏ = f(t, y)`.
pub trait System {
    fn dim(&self) -> usize;

    /// Writes `f(t, y)` into `dy`. Both slices have length [`System::dim`].
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// A system with an analytic Jacobian, written row-major into a `dim × dim`
/// buffer.
pub trait Jacobian: System {
    fn jacobian(&self, t: f64, y: &[f64], jac: &mut [f64]);

    fn trace(&self, t: f64, y: &[f64]) -> f64 {
        let d = self.dim();
        let mut jac = vec![0.0; d * d];
        self.jacobian(t, y, &mut jac);
        (0..d).map(|i| jac[i * d + i]).sum()
    }
}

impl<S: System + ?Sized> System for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (**self).rhs(t, y, dy)
    }
}

impl<S: Jacobian + ?Sized> Jacobian for &S {
    fn jacobian(&self, t: f64, y: &[f64], jac: &mut [f64]) {
        (**self).jacobian(t, y, jac)
    }
}

/// Wraps a closure as a [`System`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> System for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

/// Linear constant-coefficient system `ẏ = A·y` with `A` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    dim: usize,
    matrix: Vec<f64>,
}

impl LinearSystem {
    pub fn new(dim: usize, matrix: Vec<f64>) -> Self {
        assert_eq!(matrix.len(), dim * dim, "matrix must be dim x dim");
        Self { dim, matrix }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let d = entries.len();
        let mut matrix = vec![0.0; d * d];
        for (i, v) in entries.iter().enumerate() {
            matrix[i * d + i] = *v;
        }
        Self::new(d, matrix)
    }
}

impl System for LinearSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        for (i, out) in dy.iter_mut().enumerate() {
            let row = &self.matrix[i * self.dim..(i + 1) * self.dim];
            *out = row.iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }
}

impl Jacobian for LinearSystem {
    fn jacobian(&self, _t: f64, _y: &[f64], jac: &mut [f64]) {
        jac.copy_from_slice(&self.matrix);
    }
}

/// Time-reversed flow of `S`.
pub struct Reversed<S>(pub S);

impl<S: System> System for Reversed<S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self.0.rhs(t, y, dy);
        for v in dy.iter_mut() {
            *v = -*v;
        }
    }
}
