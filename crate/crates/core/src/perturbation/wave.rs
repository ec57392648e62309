//! Periodic wave equation `∂_t^2 Φ - ∂_x^2 Φ = S` by kick-drift-kick
//! leapfrog.

use crate::deriv;
use crate::error::{Error, Result};

/// One leapfrog step in place. `source` is evaluated at the start and end
/// positions.
pub fn wave_step(
    phi: &mut [f64],
    dphi: &mut [f64],
    mut source: impl FnMut(&[f64]) -> Vec<f64>,
    dt: f64,
    dx: f64,
) -> Result<()> {
    if !(dt > 0.0 && dt <= dx) {
        return Err(Error::Cfl { dt, dx });
    }
    let n = phi.len();
    let mut lap = vec![0.0; n];
    deriv::periodic_laplacian(phi, dx, &mut lap);
    let s = source(phi);
    for j in 0..n {
        dphi[j] += 0.5 * dt * (lap[j] + s[j]);
        phi[j] += dt * dphi[j];
    }
    deriv::periodic_laplacian(phi, dx, &mut lap);
    let s = source(phi);
    for j in 0..n {
        dphi[j] += 0.5 * dt * (lap[j] + s[j]);
    }
    Ok(())
}

/// `½ Σ (∂_tΦ^2 + |D_x Φ|^2) dx` with the forward difference `D_x`.
pub fn wave_energy(phi: &[f64], dphi: &[f64], dx: f64) -> f64 {
    let n = phi.len();
    0.5 * dx
        * (0..n)
            .map(|j| {
                let g = (phi[(j + 1) % n] - phi[j]) / dx;
                dphi[j] * dphi[j] + g * g
            })
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn zero(phi: &[f64]) -> Vec<f64> {
        vec![0.0; phi.len()]
    }

    #[test]
    fn constant_state_is_fixed() {
        let mut phi = vec![0.4; 16];
        let mut dphi = vec![0.0; 16];
        wave_step(&mut phi, &mut dphi, zero, 0.1, 0.2).unwrap();
        assert!(phi.iter().all(|v| *v == 0.4) && dphi.iter().all(|v| *v == 0.0));
        assert!(matches!(wave_step(&mut phi, &mut dphi, zero, 0.3, 0.2), Err(Error::Cfl { .. })));
    }

    fn travelling_error(n: usize) -> f64 {
        let l = 2.0 * PI;
        let dx = l / n as f64;
        let dt = 0.5 * dx;
        let k = 2.0 * PI / l;
        let xs: Vec<f64> = (0..n).map(|j| j as f64 * dx).collect();
        let mut phi: Vec<f64> = xs.iter().map(|x| (k * x).cos()).collect();
        let mut dphi: Vec<f64> = xs.iter().map(|x| k * (k * x).sin()).collect();
        let steps = (1.0 / dt).round() as usize;
        let dt = 1.0 / steps as f64;
        for _ in 0..steps {
            wave_step(&mut phi, &mut dphi, zero, dt, dx).unwrap();
        }
        (xs.iter()
            .zip(&phi)
            .map(|(x, v)| (v - (k * (x - 1.0)).cos()).powi(2))
            .sum::<f64>()
            * dx)
            .sqrt()
    }

    #[test]
    fn travelling_wave_second_order() {
        let e1 = travelling_error(32);
        let e2 = travelling_error(64);
        let e3 = travelling_error(128);
        assert!((e1 / e2).log2() >= 1.9);
        assert!((e2 / e3).log2() >= 1.9);
    }

    #[test]
    fn constant_source_drives_mean_quadratically() {
        let n = 16;
        let dx = 2.0 * PI / n as f64;
        let mut phi: Vec<f64> = (0..n).map(|j| 0.1 + (j as f64 * dx).sin()).collect();
        let mut dphi = vec![0.2; n];
        let c = -0.7;
        let dt = 0.01;
        for _ in 0..100 {
            wave_step(&mut phi, &mut dphi, |p| vec![c; p.len()], dt, dx).unwrap();
        }
        let mean = phi.iter().sum::<f64>() / n as f64;
        assert!((mean - (0.1 + 0.2 + 0.5 * c)).abs() < 1e-12);
    }

    #[test]
    fn energy_oscillation_is_bounded() {
        // default perturbation grid and step: 32 cells on [0, 2π), dt = 1e-2
        let n = 32;
        let dx = 2.0 * PI / n as f64;
        let mut phi: Vec<f64> = (0..n).map(|j| (j as f64 * dx).cos() + 0.3 * (3.0 * j as f64 * dx).sin()).collect();
        let mut dphi = vec![0.0; n];
        let e0 = wave_energy(&phi, &dphi, dx);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            wave_step(&mut phi, &mut dphi, zero, 1e-2, dx).unwrap();
            worst = worst.max((wave_energy(&phi, &dphi, dx) - e0).abs() / e0);
        }
        assert!(worst <= 1e-3, "{worst}");
    }
}
