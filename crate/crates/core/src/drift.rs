//! Conservative upwind drift `d_t u = -div(c p u)` with minmod-limited MUSCL
//! faces and SSP-RK3 substepping.

use crate::grid::MomentumGrid;

const CFL_TARGET: f64 = 0.4;

#[inline]
pub(crate) fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Right-hand side `-div(c p u)`; end cells use first-order reconstruction.
pub fn drift_rhs(grid: &MomentumGrid, c: f64, u: &[f64], out: &mut [f64]) {
    let n = u.len();
    let faces = grid.faces();
    let mut flux = vec![0.0; n - 1];
    let slope = |i: usize| -> f64 {
        if i == 0 || i + 1 == n {
            0.0
        } else {
            minmod(u[i] - u[i - 1], u[i + 1] - u[i])
        }
    };
    for (k, fl) in flux.iter_mut().enumerate() {
        let v = c * faces[k];
        *fl = if v >= 0.0 {
            v * (u[k] + 0.5 * slope(k))
        } else {
            v * (u[k + 1] - 0.5 * slope(k + 1))
        };
    }
    grid.divergence(&flux, out);
    for o in out.iter_mut() {
        *o = -*o;
    }
}

/// Largest `sum_faces A |p_f| / w_i`; the explicit rate per unit `|c|`.
pub fn rate_bound(grid: &MomentumGrid) -> f64 {
    let n = grid.len();
    let faces = grid.faces();
    let areas = grid.face_areas();
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            if i + 1 < n {
                s += areas[i] * faces[i].abs();
            }
            if i > 0 {
                s += areas[i - 1] * faces[i - 1].abs();
            }
            s / grid.quad_weights[i]
        })
        .fold(0.0, f64::max)
}

/// Number of SSP-RK3 substeps for a drift of strength `c` over `dt`.
pub fn substeps(grid: &MomentumGrid, c: f64, dt: f64) -> usize {
    let rate = c.abs() * rate_bound(grid) * dt;
    ((rate / CFL_TARGET).ceil() as usize).max(1)
}

/// Advance `d_t u = -div(c p u)` by `dt`.
pub fn drift_advance(grid: &MomentumGrid, c: f64, dt: f64, u: &mut [f64]) {
    if c == 0.0 {
        return;
    }
    let m = substeps(grid, c, dt);
    drift_advance_with(grid, c, dt, m, u);
}

/// Same as [`drift_advance`] with a caller-chosen substep count, so several
/// columns can share one count.
pub fn drift_advance_with(grid: &MomentumGrid, c: f64, dt: f64, m: usize, u: &mut [f64]) {
    if c == 0.0 {
        return;
    }
    let h = dt / m as f64;
    let n = u.len();
    let mut k = vec![0.0; n];
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for _ in 0..m {
        drift_rhs(grid, c, u, &mut k);
        for i in 0..n {
            s1[i] = u[i] + h * k[i];
        }
        drift_rhs(grid, c, &s1, &mut k);
        for i in 0..n {
            s2[i] = 0.75 * u[i] + 0.25 * (s1[i] + h * k[i]);
        }
        drift_rhs(grid, c, &s2, &mut k);
        for i in 0..n {
            u[i] = u[i] / 3.0 + 2.0 / 3.0 * (s2[i] + h * k[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mass(g: &MomentumGrid, u: &[f64]) -> f64 {
        u.iter().zip(&g.quad_weights).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn conserves_and_stays_nonnegative() {
        for g in [
            MomentumGrid::radial3d(128, 10.0).unwrap(),
            MomentumGrid::line1d(128, 10.0).unwrap(),
        ] {
            let mut u: Vec<f64> = g.nodes.iter().map(|p| (-p * p).exp()).collect();
            let m0 = mass(&g, &u);
            drift_advance(&g, 1.0, 0.5, &mut u);
            assert!(((mass(&g, &u) - m0) / m0).abs() < 1e-13);
            assert!(u.iter().all(|v| *v >= -1e-15));
        }
    }

    #[test]
    fn dilation_matches_exact_profile() {
        // d_t u = -div(p u) in 3D dilates: u(t, r) = e^{-3t} u0(e^{-t} r)
        let g = MomentumGrid::radial3d(400, 10.0).unwrap();
        let mut u: Vec<f64> = g.nodes.iter().map(|r| (-r * r).exp()).collect();
        let t = 0.3;
        drift_advance(&g, 1.0, t, &mut u);
        let err = g
            .nodes
            .iter()
            .zip(&u)
            .map(|(r, v)| {
                let s = (-t).exp() * r;
                (v - (-3.0 * t).exp() * (-s * s).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }
}
