//! Monotone cubic Hermite interpolation on a uniform node set.
//!
//! Node slopes come from a fourth-order centred difference and are then
//! clipped with Hyman's filter, so monotone data stays monotone while smooth
//! data keeps better than second-order accuracy. Outside the node range the
//! interpolant is zero.

use crate::grid::{GridKind, MomentumGrid};

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x0: f64,
    h: f64,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// Nodes `x0 + i h`, values `ys`.
    pub fn uniform(x0: f64, h: f64, ys: Vec<f64>) -> Self {
        let n = ys.len();
        assert!(n >= 3, "need at least three nodes");
        let secant: Vec<f64> = ys.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let mut slopes = vec![0.0; n];
        for i in 0..n {
            let raw = if i >= 2 && i + 2 < n {
                (-ys[i + 2] + 8.0 * ys[i + 1] - 8.0 * ys[i - 1] + ys[i - 2]) / (12.0 * h)
            } else if i >= 1 && i + 1 < n {
                (ys[i + 1] - ys[i - 1]) / (2.0 * h)
            } else if i == 0 {
                (-3.0 * ys[0] + 4.0 * ys[1] - ys[2]) / (2.0 * h)
            } else {
                (3.0 * ys[n - 1] - 4.0 * ys[n - 2] + ys[n - 3]) / (2.0 * h)
            };
            let left = if i > 0 { Some(secant[i - 1]) } else { None };
            let right = if i + 1 < n { Some(secant[i]) } else { None };
            slopes[i] = hyman_clip(raw, left, right);
        }
        Self {
            x0,
            h,
            ys,
            slopes,
        }
    }

    /// Interpolant for an even radial profile or a line profile on `grid`.
    pub fn from_grid(grid: &MomentumGrid, values: &[f64]) -> Self {
        match grid.kind {
            GridKind::Radial3d => {
                let n = values.len();
                let mut ys = Vec::with_capacity(2 * n);
                ys.extend(values.iter().rev());
                ys.extend(values.iter());
                Self::uniform(-grid.nodes[n - 1], grid.cell_width, ys)
            }
            GridKind::Line1d => Self::uniform(grid.nodes[0], grid.cell_width, values.to_vec()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.h;
        let last = (self.ys.len() - 1) as f64;
        if !(0.0..=last).contains(&s) {
            return 0.0;
        }
        let k = (s.floor() as usize).min(self.ys.len() - 2);
        let t = s - k as f64;
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let (d0, d1) = (self.slopes[k] * self.h, self.slopes[k + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1
    }
}

fn hyman_clip(raw: f64, left: Option<f64>, right: Option<f64>) -> f64 {
    match (left, right) {
        (Some(a), Some(b)) => {
            if a * b < 0.0 {
                // strict extremum
                0.0
            } else if a == 0.0 && b == 0.0 {
                0.0
            } else {
                // monotone or one flat side: keep the sign of the data
                let sign = if a + b > 0.0 { 1.0 } else { -1.0 };
                let bound = if a == 0.0 || b == 0.0 {
                    3.0 * a.abs().max(b.abs())
                } else {
                    3.0 * a.abs().min(b.abs())
                };
                if raw * sign <= 0.0 {
                    0.0
                } else {
                    sign * (raw.abs().min(bound))
                }
            }
        }
        (Some(a), None) | (None, Some(a)) => {
            if raw * a <= 0.0 {
                0.0
            } else {
                a.signum() * raw.abs().min(3.0 * a.abs())
            }
        }
        (None, None) => 0.0,
    }
}
