//! Second-order finite differences used by the monitors and functionals.

use crate::grid::{GridKind, MomentumGrid};

/// Parity of a radial profile about `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Centred first derivative on a momentum grid. Radial grids use the mirror
/// ghost `u_{-1} = +-u_0`; outer ends (and both ends of a line) use the
/// one-sided second-order stencil.
pub fn momentum_d1(grid: &MomentumGrid, u: &[f64], parity: Parity, out: &mut [f64]) {
    let n = u.len();
    let h = grid.cell_width;
    let inv = 1.0 / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (u[i + 1] - u[i - 1]) * inv;
    }
    out[0] = match grid.kind {
        GridKind::Radial3d => {
            let ghost = match parity {
                Parity::Even => u[0],
                Parity::Odd => -u[0],
            };
            (u[1] - ghost) * inv
        }
        GridKind::Line1d => (-3.0 * u[0] + 4.0 * u[1] - u[2]) * inv,
    };
    out[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) * inv;
}

/// `k`-th derivative by repeated application of [`momentum_d1`]; the input is
/// taken to be even in `r` on radial grids.
pub fn momentum_dk(grid: &MomentumGrid, u: &[f64], k: usize) -> Vec<f64> {
    let mut cur = u.to_vec();
    let mut next = vec![0.0; u.len()];
    let mut parity = Parity::Even;
    for _ in 0..k {
        momentum_d1(grid, &cur, parity, &mut next);
        std::mem::swap(&mut cur, &mut next);
        parity = parity.flip();
    }
    cur
}

/// Centred periodic first derivative.
pub fn periodic_d1(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len();
    let inv = 1.0 / (2.0 * dx);
    for j in 0..n {
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let jm = if j == 0 { n - 1 } else { j - 1 };
        out[j] = (u[jp] - u[jm]) * inv;
    }
}

pub fn periodic_dk(u: &[f64], dx: f64, k: usize) -> Vec<f64> {
    let mut cur = u.to_vec();
    let mut next = vec![0.0; u.len()];
    for _ in 0..k {
        periodic_d1(&cur, dx, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Periodic second difference `(u_{j+1} - 2 u_j + u_{j-1}) / dx^2`.
pub fn periodic_laplacian(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len();
    let inv = 1.0 / (dx * dx);
    for j in 0..n {
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let jm = if j == 0 { n - 1 } else { j - 1 };
        out[j] = (u[jp] - 2.0 * u[j] + u[jm]) * inv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn radial_derivative_second_order() {
        let mut prev = None;
        for n in [64, 128, 256] {
            let g = MomentumGrid::radial3d(n, 4.0).unwrap();
            let u: Vec<f64> = g.nodes.iter().map(|r| (-r * r).exp()).collect();
            let d2 = momentum_dk(&g, &u, 2);
            let exact: Vec<f64> = g
                .nodes
                .iter()
                .map(|r| (4.0 * r * r - 2.0) * (-r * r).exp())
                .collect();
            let err = max_err(&d2, &exact);
            if let Some(p) = prev {
                assert!(p / err > 3.5, "{}", p / err);
            }
            prev = Some(err);
        }
    }

    #[test]
    fn periodic_derivative_of_sine() {
        let n = 128;
        let dx = 2.0 * std::f64::consts::PI / n as f64;
        let u: Vec<f64> = (0..n).map(|j| (j as f64 * dx).sin()).collect();
        let d = periodic_dk(&u, dx, 1);
        for (j, v) in d.iter().enumerate() {
            assert!((v - (j as f64 * dx).cos()).abs() < 1e-3);
        }
        let mut lap = vec![0.0; n];
        periodic_laplacian(&u, dx, &mut lap);
        for (j, v) in lap.iter().enumerate() {
            assert!((v + (j as f64 * dx).sin()).abs() < 1e-3);
        }
    }
}
