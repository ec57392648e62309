//! Cell-centred momentum grids and the periodic space grid.
//!
//! Radial grids place node `i` at `(i + 1/2) * dr`, so no node sits on the
//! coordinate singularity. Quadrature weights double as finite-volume control
//! volumes; face areas are chosen so that the discrete radial divergence
//! telescopes against those weights and is exact for `div(p) = 3`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// Radially symmetric data on `[0, R]`, 3D measure `4 pi r^2 dr`.
    Radial3d,
    /// Signed momentum on `[-R, R]`, 1D measure `dp`.
    Line1d,
}

impl GridKind {
    /// Dimension of the momentum space the grid stands for.
    pub fn dimension(self) -> u32 {
        match self {
            GridKind::Radial3d => 3,
            GridKind::Line1d => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    pub kind: GridKind,
    pub nodes: Vec<f64>,
    pub cell_width: f64,
    pub domain_max: f64,
    pub quad_weights: Vec<f64>,
    /// Interior faces `i + 1/2`, `i = 0..n-1`; length `n - 1`.
    faces: Vec<f64>,
    face_areas: Vec<f64>,
}

impl MomentumGrid {
    pub fn new(kind: GridKind, n: usize, domain_max: f64) -> Result<Self> {
        match kind {
            GridKind::Radial3d => Self::radial3d(n, domain_max),
            GridKind::Line1d => Self::line1d(n, domain_max),
        }
    }

    pub fn radial3d(n: usize, domain_max: f64) -> Result<Self> {
        check_size(n, domain_max)?;
        let dr = domain_max / n as f64;
        let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dr).collect();
        let quad_weights = nodes.iter().map(|r| 4.0 * PI * r * r * dr).collect();
        let faces = (1..n).map(|i| i as f64 * dr).collect();
        // r_i * r_{i+1} = r_{i+1/2}^2 - dr^2 / 4
        let face_areas = nodes
            .windows(2)
            .map(|w| 4.0 * PI * w[0] * w[1])
            .collect();
        Ok(Self {
            kind: GridKind::Radial3d,
            nodes,
            cell_width: dr,
            domain_max,
            quad_weights,
            faces,
            face_areas,
        })
    }

    pub fn line1d(n: usize, half_width: f64) -> Result<Self> {
        check_size(n, half_width)?;
        let dp = 2.0 * half_width / n as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|i| -half_width + (i as f64 + 0.5) * dp)
            .collect();
        let faces = (1..n).map(|i| -half_width + i as f64 * dp).collect();
        Ok(Self {
            kind: GridKind::Line1d,
            nodes,
            cell_width: dp,
            domain_max: half_width,
            quad_weights: vec![dp; n],
            faces,
            face_areas: vec![1.0; n - 1],
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dimension(&self) -> u32 {
        self.kind.dimension()
    }

    /// Position of interior face `i + 1/2`.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// Area of interior face `i + 1/2` (including the `4 pi` for radial grids).
    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    /// Continuum measure of the truncated domain.
    pub fn continuum_volume(&self) -> f64 {
        match self.kind {
            GridKind::Radial3d => 4.0 / 3.0 * PI * self.domain_max.powi(3),
            GridKind::Line1d => 2.0 * self.domain_max,
        }
    }

    pub fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Flux-form divergence: `(A_{i+1/2} F_{i+1/2} - A_{i-1/2} F_{i-1/2}) / w_i`
    /// given interior face fluxes; both outer boundaries carry zero flux.
    pub fn divergence(&self, face_flux: &[f64], out: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(face_flux.len(), n - 1);
        for (i, o) in out.iter_mut().enumerate() {
            let right = if i + 1 < n {
                self.face_areas[i] * face_flux[i]
            } else {
                0.0
            };
            let left = if i > 0 {
                self.face_areas[i - 1] * face_flux[i - 1]
            } else {
                0.0
            };
            *o = (right - left) / self.quad_weights[i];
        }
    }
}

fn check_size(n: usize, extent: f64) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidGrid(format!("need at least 4 cells, got {n}")));
    }
    if !(extent.is_finite() && extent > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "domain extent must be positive and finite, got {extent}"
        )));
    }
    Ok(())
}

/// Periodic interval `[0, L)` with nodes `x_j = j L / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    pub n: usize,
    pub length: f64,
    pub dx: f64,
}

impl SpaceGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        check_size(n, length)?;
        Ok(Self {
            n,
            length,
            dx: length / n as f64,
        })
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Periodic index.
    #[inline]
    pub fn wrap(&self, j: isize) -> usize {
        j.rem_euclid(self.n as isize) as usize
    }
}
