//! Thomas algorithm for the Crank-Nicolson systems.

use crate::error::{Error, Result};

/// Solve `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` in place.
///
/// `lower[0]` and `upper[n-1]` are ignored. `scratch` must have length `n`.
pub fn solve_in_place(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut denom = diag[0];
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularSystem { row: 0 });
    }
    scratch[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::SingularSystem { row: i });
        }
        scratch[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
    Ok(())
}
