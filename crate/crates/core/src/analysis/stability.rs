use num_complex::Complex64;

use crate::model::{equilibrium, full_jacobian, ModelError, Params};

/// Eigenvalues of the full Jacobian at the equilibrium `(0, 0, −F/E, 0, 0)`,
/// sorted by descending real part (ties by descending imaginary part).
pub fn equilibrium_stability(p: &Params) -> Result<Vec<Complex64>, ModelError> {
    let eq = equilibrium(p)?;
    let jac = full_jacobian(&eq, p)?;
    let mut eig: Vec<Complex64> = jac.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(eig)
}
