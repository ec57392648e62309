//! Reference quadrature and ODE integration used as independent checks.
//!
//! Nothing here is on a solver path; tests and the `verify` command compare
//! solver output against these routines.

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Classical RK4 for `y'' = accel(t, y, y')` with a fixed step.
pub fn rk4_second_order(
    accel: &dyn Fn(f64, f64, f64) -> f64,
    y0: f64,
    v0: f64,
    t_end: f64,
    dt: f64,
) -> (f64, f64) {
    let steps = (t_end / dt).round() as usize;
    let h = t_end / steps as f64;
    let (mut y, mut v) = (y0, v0);
    let mut t = 0.0;
    for _ in 0..steps {
        let k1y = v;
        let k1v = accel(t, y, v);
        let k2y = v + 0.5 * h * k1v;
        let k2v = accel(t + 0.5 * h, y + 0.5 * h * k1y, k2y);
        let k3y = v + 0.5 * h * k2v;
        let k3v = accel(t + 0.5 * h, y + 0.5 * h * k2y, k3y);
        let k4y = v + h * k3v;
        let k4v = accel(t + h, y + h * k3y, k4y);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        t += h;
    }
    (y, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_gaussian() {
        let v = adaptive_simpson(&|x: f64| (-x * x).exp(), 0.0, 10.0, 1e-14);
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rk4_harmonic() {
        let (y, _) = rk4_second_order(&|_, y, _| -y, 1.0, 0.0, 1.0, 1e-3);
        assert!((y - 1f64.cos()).abs() < 1e-12);
    }
}
