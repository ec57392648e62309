//! Point quantities of the relativistic Fokker-Planck operator and momentum
//! quadrature.

use crate::error::{Error, Result};
use crate::grid::MomentumGrid;

/// Gravitational potential value entering `e^{2 phi}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelParams {
    pub phi: f64,
}

impl RelParams {
    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "phi",
                reason: format!("must be finite, got {phi}"),
            });
        }
        Ok(Self { phi })
    }

    #[inline]
    pub fn exp2phi(&self) -> f64 {
        (2.0 * self.phi).exp()
    }
}

/// `sqrt(e^{2 phi} + |p|^2)`.
#[inline]
pub fn relativistic_energy(phi: f64, p_norm: f64) -> f64 {
    ((2.0 * phi).exp() + p_norm * p_norm).sqrt()
}

/// `(e^{2 phi} I + p (x) p) / sqrt(e^{2 phi} + |p|^2)` for 3-vectors.
pub fn diffusion_matrix(phi: f64, p: [f64; 3]) -> [[f64; 3]; 3] {
    let e2 = (2.0 * phi).exp();
    let energy = (e2 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let delta = if i == j { e2 } else { 0.0 };
            *entry = (delta + p[i] * p[j]) / energy;
        }
    }
    m
}

/// One-dimensional analogue: `(e^{2 phi} + p^2) / sqrt(e^{2 phi} + p^2)`.
#[inline]
pub fn diffusion_coefficient_1d(phi: f64, p: f64) -> f64 {
    relativistic_energy(phi, p)
}

/// Both evaluations of `v . Lambda v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticForm {
    /// Through the explicit matrix.
    pub matrix_form: f64,
    /// `(e^{2 phi} |v|^2 + (p . v)^2) / sqrt(e^{2 phi} + |p|^2)`.
    pub closed_form: f64,
}

impl QuadraticForm {
    pub fn relative_mismatch(&self) -> f64 {
        let scale = self.closed_form.abs().max(self.matrix_form.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.matrix_form - self.closed_form).abs() / scale
        }
    }
}

/// `p` and `v` must both have length 1 or both length 3.
pub fn dissipation_quadratic_form(phi: f64, p: &[f64], v: &[f64]) -> Result<QuadraticForm> {
    if p.len() != v.len() {
        return Err(Error::Dimension(format!(
            "momentum has {} components but v has {}",
            p.len(),
            v.len()
        )));
    }
    let e2 = (2.0 * phi).exp();
    let p2: f64 = p.iter().map(|x| x * x).sum();
    let v2: f64 = v.iter().map(|x| x * x).sum();
    let pv: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
    let energy = (e2 + p2).sqrt();
    let closed_form = (e2 * v2 + pv * pv) / energy;

    let matrix_form = match p.len() {
        3 => {
            let m = diffusion_matrix(phi, [p[0], p[1], p[2]]);
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += v[i] * m[i][j] * v[j];
                }
            }
            acc
        }
        1 => v[0] * diffusion_coefficient_1d(phi, p[0]) * v[0],
        d => {
            return Err(Error::Dimension(format!(
                "expected 1 or 3 components, got {d}"
            )))
        }
    };
    Ok(QuadraticForm {
        matrix_form,
        closed_form,
    })
}

/// `sum_i weight(node_i) * values_i * quad_weights_i`.
pub fn integrate_momentum(
    grid: &MomentumGrid,
    values: &[f64],
    weight: impl Fn(f64) -> f64,
) -> Result<f64> {
    grid.check_len(values)?;
    Ok(grid
        .nodes
        .iter()
        .zip(values)
        .zip(&grid.quad_weights)
        .map(|((&p, &v), &w)| weight(p) * v * w)
        .sum())
}
