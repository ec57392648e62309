//! Flux-form momentum diffusion `c * div(sqrt(e + |p|^2) grad u)` and its
//! Crank-Nicolson step.
//!
//! With face flux `kappa_{i+1/2} (u_{i+1} - u_i) / dp` the update telescopes
//! against the quadrature weights, so the discrete integral of `u` is
//! preserved by both the explicit operator and the implicit step.

use crate::error::Result;
use crate::grid::MomentumGrid;
use crate::tridiag;

/// Face coefficients `prefactor * sqrt(e_field + p_f^2)` on interior faces.
pub fn face_kappa(grid: &MomentumGrid, prefactor: f64, e_field: f64, out: &mut [f64]) {
    for (k, r) in out.iter_mut().zip(grid.faces()) {
        *k = prefactor * (e_field + r * r).sqrt();
    }
}

pub fn face_kappa_vec(grid: &MomentumGrid, prefactor: f64, e_field: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.len() - 1];
    face_kappa(grid, prefactor, e_field, &mut out);
    out
}

/// `(L u)_i` for the given face coefficients; zero flux at both ends.
pub fn apply(grid: &MomentumGrid, kappa: &[f64], u: &[f64], out: &mut [f64]) {
    let n = u.len();
    let h = grid.cell_width;
    let areas = grid.face_areas();
    let w = &grid.quad_weights;
    for i in 0..n {
        let right = if i + 1 < n {
            areas[i] * kappa[i] * (u[i + 1] - u[i])
        } else {
            0.0
        };
        let left = if i > 0 {
            areas[i - 1] * kappa[i - 1] * (u[i] - u[i - 1])
        } else {
            0.0
        };
        out[i] = (right - left) / (h * w[i]);
    }
}

/// Scratch buffers for one tridiagonal solve.
#[derive(Debug, Clone)]
pub struct CnWorkspace {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl CnWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }
}

/// `(I - dt/2 L) u_new = (I + dt/2 L) u` in place.
pub fn crank_nicolson(
    grid: &MomentumGrid,
    kappa: &[f64],
    dt: f64,
    u: &mut [f64],
    ws: &mut CnWorkspace,
) -> Result<()> {
    let n = u.len();
    let h = grid.cell_width;
    let areas = grid.face_areas();
    let w = &grid.quad_weights;
    let half = 0.5 * dt;
    for i in 0..n {
        let lo = if i > 0 {
            areas[i - 1] * kappa[i - 1] / (h * w[i])
        } else {
            0.0
        };
        let up = if i + 1 < n {
            areas[i] * kappa[i] / (h * w[i])
        } else {
            0.0
        };
        let mut lu = -(lo + up) * u[i];
        if i > 0 {
            lu += lo * u[i - 1];
        }
        if i + 1 < n {
            lu += up * u[i + 1];
        }
        ws.rhs[i] = u[i] + half * lu;
        ws.lower[i] = -half * lo;
        ws.upper[i] = -half * up;
        ws.diag[i] = 1.0 + half * (lo + up);
    }
    tridiag::solve_in_place(&ws.lower, &ws.diag, &ws.upper, &mut ws.rhs, &mut ws.scratch)?;
    u.copy_from_slice(&ws.rhs);
    Ok(())
}
