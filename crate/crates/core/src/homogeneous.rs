//! Spatially homogeneous system: degenerate Fokker-Planck diffusion of `F̄`
//! in momentum, coupled to `φ̄'' = -e^{2φ̄} ρ`.

use serde::{Deserialize, Serialize};

use crate::deriv;
use crate::diffusion::{self, CnWorkspace};
use crate::error::{Error, Result};
use crate::grid::{GridKind, MomentumGrid};
use crate::relkin;

/// Smallest value of the density tolerated after a step.
pub const NEGATIVITY_FLOOR: f64 = -1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub n: usize,
    pub domain_max: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<MomentumGrid> {
        MomentumGrid::new(self.kind, self.n, self.domain_max)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            kind: GridKind::Radial3d,
            n: 512,
            domain_max: 8.0,
        }
    }
}

/// Named families of momentum profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum InitialDatum {
    /// `amplitude * exp(-|p|^2 / width^2)`
    Gaussian { amplitude: f64, width: f64 },
    Constant { value: f64 },
    Zero,
}

impl Default for InitialDatum {
    fn default() -> Self {
        InitialDatum::Gaussian {
            amplitude: 1.0,
            width: 1.0,
        }
    }
}

impl InitialDatum {
    pub fn eval(&self, p: f64) -> f64 {
        match *self {
            InitialDatum::Gaussian { amplitude, width } => {
                let s = p / width;
                amplitude * (-s * s).exp()
            }
            InitialDatum::Constant { value } => value,
            InitialDatum::Zero => 0.0,
        }
    }

    pub fn sample(&self, grid: &MomentumGrid) -> Vec<f64> {
        grid.nodes.iter().map(|&p| self.eval(p)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialDatum::Gaussian { amplitude, width } => {
                if !(amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "amplitude",
                        reason: format!("must be finite and >= 0, got {amplitude}"),
                    });
                }
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "width",
                        reason: format!("must be finite and > 0, got {width}"),
                    });
                }
            }
            InitialDatum::Constant { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "value",
                        reason: format!("must be finite and >= 0, got {value}"),
                    });
                }
            }
            InitialDatum::Zero => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousConfig {
    pub grid: GridSpec,
    pub datum: InitialDatum,
    pub phi_in: f64,
    pub psi_in: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded samples.
    pub sample_every: usize,
    /// Base exponent for the moment monitors.
    pub gamma: f64,
}

impl Default for HomogeneousConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            datum: InitialDatum::default(),
            phi_in: 0.0,
            psi_in: 0.0,
            dt: 1e-3,
            t_end: 50.0,
            sample_every: 100,
            gamma: 1.0,
        }
    }
}

impl HomogeneousConfig {
    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        finite("phi_in", self.phi_in)?;
        finite("psi_in", self.psi_in)?;
        finite("gamma", self.gamma)?;
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter {
                name: "sample_every",
                reason: "must be at least 1".into(),
            });
        }
        self.datum.validate()?;
        self.grid.build().map(|_| ())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {v}"),
        })
    }
}

pub(crate) fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {v}"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousState {
    pub t: f64,
    pub phibar: f64,
    pub phibar_prime: f64,
    pub fbar: Vec<f64>,
}

impl HomogeneousState {
    pub fn initial(config: &HomogeneousConfig, grid: &MomentumGrid) -> Self {
        Self {
            t: 0.0,
            phibar: config.phi_in,
            phibar_prime: config.psi_in,
            fbar: config.datum.sample(grid),
        }
    }

    pub fn mass(&self, grid: &MomentumGrid) -> f64 {
        dot(&self.fbar, &grid.quad_weights)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `∫ F̄ / sqrt(e^{2φ̄} + |p|^2) dp`.
pub fn stress_integral_at(grid: &MomentumGrid, phibar: f64, fbar: &[f64]) -> f64 {
    let e = (2.0 * phibar).exp();
    grid.nodes
        .iter()
        .zip(fbar)
        .zip(&grid.quad_weights)
        .map(|((r, f), w)| f * w / (e + r * r).sqrt())
        .sum()
}

pub fn stress_integral(grid: &MomentumGrid, state: &HomogeneousState) -> Result<f64> {
    grid.check_len(&state.fbar)?;
    Ok(stress_integral_at(grid, state.phibar, &state.fbar))
}

/// `φ̄'' = -e^{2φ̄} ρ`.
pub fn phibar_rhs(phibar: f64, rho: f64) -> f64 {
    -(2.0 * phibar).exp() * rho
}

/// Explicit evaluation of `e^{2φ̄} div(Λ grad F̄)` in flux form.
pub fn fp_apply(state: &HomogeneousState, grid: &MomentumGrid) -> Result<Vec<f64>> {
    grid.check_len(&state.fbar)?;
    let e = (2.0 * state.phibar).exp();
    let kappa = diffusion::face_kappa_vec(grid, e, e);
    let mut out = vec![0.0; grid.len()];
    diffusion::apply(grid, &kappa, &state.fbar, &mut out);
    Ok(out)
}

/// One RK4 step of length `h` for `(φ̄, φ̄')` with `F̄` frozen.
pub fn ode_half_step(grid: &MomentumGrid, fbar: &[f64], phibar: f64, phibar_prime: f64, h: f64) -> (f64, f64) {
    let accel = |y: f64| phibar_rhs(y, stress_integral_at(grid, y, fbar));
    rk4_autonomous(&accel, phibar, phibar_prime, h)
}

pub(crate) fn rk4_autonomous(accel: &dyn Fn(f64) -> f64, y: f64, v: f64, h: f64) -> (f64, f64) {
    let k1y = v;
    let k1v = accel(y);
    let k2y = v + 0.5 * h * k1v;
    let k2v = accel(y + 0.5 * h * k1y);
    let k3y = v + 0.5 * h * k2v;
    let k3v = accel(y + 0.5 * h * k2y);
    let k4y = v + h * k3v;
    let k4v = accel(y + h * k3y);
    (
        y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

pub(crate) fn check_nonnegative(t: f64, values: &[f64]) -> Result<()> {
    if let Some((index, &value)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= NEGATIVITY_FLOOR))
    {
        return Err(Error::Negativity { t, index, value });
    }
    Ok(())
}

/// Reusable stepper holding the grid and solver scratch.
#[derive(Debug, Clone)]
pub struct HomogeneousStepper {
    pub grid: MomentumGrid,
    pub dt: f64,
    kappa: Vec<f64>,
    ws: CnWorkspace,
}

impl HomogeneousStepper {
    pub fn new(grid: MomentumGrid, dt: f64) -> Result<Self> {
        positive("dt", dt)?;
        let n = grid.len();
        Ok(Self {
            grid,
            dt,
            kappa: vec![0.0; n - 1],
            ws: CnWorkspace::new(n),
        })
    }

    /// Strang step: ODE half, CN diffusion at the midpoint `φ̄`, ODE half.
    pub fn step(&mut self, state: &mut HomogeneousState) -> Result<()> {
        self.grid.check_len(&state.fbar)?;
        let h = 0.5 * self.dt;
        let (y, v) = ode_half_step(&self.grid, &state.fbar, state.phibar, state.phibar_prime, h);
        self.diffuse(y, &mut state.fbar)?;
        let (y, v) = ode_half_step(&self.grid, &state.fbar, y, v, h);
        state.phibar = y;
        state.phibar_prime = v;
        state.t += self.dt;
        check_nonnegative(state.t, &state.fbar)
    }

    /// Full CN diffusion step of `fbar` with the coefficient frozen at `phibar`.
    pub fn diffuse(&mut self, phibar: f64, fbar: &mut [f64]) -> Result<()> {
        let e = (2.0 * phibar).exp();
        diffusion::face_kappa(&self.grid, e, e, &mut self.kappa);
        diffusion::crank_nicolson(&self.grid, &self.kappa, self.dt, fbar, &mut self.ws)
    }
}

pub fn step_homogeneous(state: &HomogeneousState, config: &HomogeneousConfig) -> Result<HomogeneousState> {
    let grid = config.grid.build()?;
    let mut stepper = HomogeneousStepper::new(grid, config.dt)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// `∫ (e^{2φ̄} + |p|^2)^{γ_k} |∂_r^k F̄|^2 dp` with `γ_k = γ, γ, γ, γ+1, γ+2`.
pub fn moment_monitor(grid: &MomentumGrid, state: &HomogeneousState, gamma: f64, k: usize) -> Result<f64> {
    grid.check_len(&state.fbar)?;
    if k > 4 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("derivative order must be at most 4, got {k}"),
        });
    }
    let gk = gamma + k.saturating_sub(2) as f64;
    let d = deriv::momentum_dk(grid, &state.fbar, k);
    let e = (2.0 * state.phibar).exp();
    Ok(relkin::integrate_momentum(grid, &d.iter().map(|v| v * v).collect::<Vec<_>>(), |r| {
        (e + r * r).powf(gk)
    })?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSample {
    pub t: f64,
    pub phibar: f64,
    pub phibar_prime: f64,
    pub mass: f64,
    pub linf_fbar: f64,
    pub min_fbar: f64,
    pub rho: f64,
    /// `moment_monitor(γ, k)` for `k = 0..=4`.
    pub moments: [f64; 5],
}

impl HomogeneousSample {
    pub fn of(grid: &MomentumGrid, state: &HomogeneousState, gamma: f64) -> Result<Self> {
        let mut moments = [0.0; 5];
        for (k, m) in moments.iter_mut().enumerate() {
            *m = moment_monitor(grid, state, gamma, k)?;
        }
        Ok(Self {
            t: state.t,
            phibar: state.phibar,
            phibar_prime: state.phibar_prime,
            mass: state.mass(grid),
            linf_fbar: state.fbar.iter().fold(0.0, |a, v| a.max(v.abs())),
            min_fbar: state.fbar.iter().cloned().fold(f64::INFINITY, f64::min),
            rho: stress_integral_at(grid, state.phibar, &state.fbar),
            moments,
        })
    }
}

#[derive(Debug, Clone)]
pub struct HomogeneousRun {
    pub grid: MomentumGrid,
    pub samples: Vec<HomogeneousSample>,
    pub final_state: HomogeneousState,
}

impl HomogeneousRun {
    /// Largest increase of `φ̄'` between consecutive samples (`<= 0` when
    /// nonincreasing).
    pub fn max_phibar_prime_increase(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[1].phibar_prime - w[0].phibar_prime)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn run_homogeneous(config: &HomogeneousConfig) -> Result<HomogeneousRun> {
    config.validate()?;
    let grid = config.grid.build()?;
    let mut state = HomogeneousState::initial(config, &grid);
    let mut stepper = HomogeneousStepper::new(grid.clone(), config.dt)?;
    let steps = config.steps();
    let mut samples = vec![HomogeneousSample::of(&grid, &state, config.gamma)?];
    for s in 1..=steps {
        stepper.step(&mut state)?;
        if s % config.sample_every == 0 || s == steps {
            samples.push(HomogeneousSample::of(&grid, &state, config.gamma)?);
        }
    }
    Ok(HomogeneousRun {
        grid,
        samples,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{adaptive_simpson, rk4_second_order};
    use std::f64::consts::PI;

    fn gaussian_state(grid: &MomentumGrid, phibar: f64) -> HomogeneousState {
        HomogeneousState {
            t: 0.0,
            phibar,
            phibar_prime: 0.0,
            fbar: InitialDatum::default().sample(grid),
        }
    }

    #[test]
    fn stress_integral_matches_quadrature() {
        let g = MomentumGrid::radial3d(1024, 8.0).unwrap();
        let s = gaussian_state(&g, 0.0);
        let got = stress_integral(&g, &s).unwrap();
        let want = adaptive_simpson(
            &|r: f64| 4.0 * PI * r * r * (-r * r).exp() / (1.0 + r * r).sqrt(),
            0.0,
            8.0,
            1e-13,
        );
        assert!((got - want).abs() / want < 1e-6);
        let zero = HomogeneousState { fbar: vec![0.0; 1024], ..s.clone() };
        assert_eq!(stress_integral(&g, &zero).unwrap(), 0.0);
    }

    #[test]
    fn phibar_rhs_values() {
        assert_eq!(phibar_rhs(3.0, 0.0), 0.0);
        assert_eq!(phibar_rhs(0.0, 1.0), -1.0);
    }

    #[test]
    fn constant_rho_ode_matches_reference() {
        // a constant profile keeps ρ(φ̄) = c ∫ 1/sqrt(e^{2φ̄}+r^2) while F̄ is fixed
        let grid = MomentumGrid::radial3d(64, 2.0).unwrap();
        let config = HomogeneousConfig {
            grid: GridSpec { kind: GridKind::Radial3d, n: 64, domain_max: 2.0 },
            datum: InitialDatum::Constant { value: 0.3 },
            dt: 1e-2,
            t_end: 1.0,
            ..Default::default()
        };
        let mut state = HomogeneousState::initial(&config, &grid);
        let fbar = state.fbar.clone();
        let mut stepper = HomogeneousStepper::new(grid.clone(), config.dt).unwrap();
        for _ in 0..100 {
            stepper.step(&mut state).unwrap();
        }
        let accel = |_: f64, y: f64, _: f64| phibar_rhs(y, stress_integral_at(&grid, y, &fbar));
        let (y, v) = rk4_second_order(&accel, 0.0, 0.0, 1.0, 1e-5);
        assert!((state.phibar - y).abs() / y.abs() < 1e-8);
        assert!((state.phibar_prime - v).abs() / v.abs() < 1e-8);
    }

    #[test]
    fn fp_apply_second_order() {
        let phibar = -0.3f64;
        let e = (2.0 * phibar).exp();
        let exact = |r: f64| {
            // (1/r^2) d/dr (r^2 e sqrt(e+r^2) (-2 r e^{-r^2}))
            let h = (e + r * r).sqrt();
            let dg = -2.0 * e * (-r * r).exp() * (3.0 * r * r * h + r.powi(4) / h - 2.0 * r.powi(4) * h);
            dg / (r * r)
        };
        let mut prev: Option<f64> = None;
        for n in [128, 256, 512] {
            let g = MomentumGrid::radial3d(n, 6.0).unwrap();
            let s = gaussian_state(&g, phibar);
            let out = fp_apply(&s, &g).unwrap();
            let err = g
                .nodes
                .iter()
                .zip(&out)
                .map(|(r, v)| (v - exact(*r)).abs())
                .fold(0.0, f64::max);
            let total: f64 = dot(&out, &g.quad_weights);
            assert!(total.abs() < 1e-12);
            if let Some(p) = prev {
                let order = (p / err).log2();
                assert!(order >= 1.9, "{order}");
            }
            prev = Some(err);
        }
    }

    #[test]
    fn zero_datum_keeps_phibar_affine() {
        let config = HomogeneousConfig {
            grid: GridSpec { kind: GridKind::Radial3d, n: 32, domain_max: 4.0 },
            datum: InitialDatum::Zero,
            phi_in: 0.5,
            psi_in: -0.25,
            t_end: 1.0,
            dt: 1e-2,
            sample_every: 10,
            ..Default::default()
        };
        let run = run_homogeneous(&config).unwrap();
        for s in &run.samples {
            assert!((s.phibar - (0.5 - 0.25 * s.t)).abs() < 1e-13);
            assert_eq!(s.mass, 0.0);
            assert_eq!(s.moments, [0.0; 5]);
        }
    }

    #[test]
    fn moment_zero_matches_quadrature() {
        let g = MomentumGrid::radial3d(1024, 8.0).unwrap();
        let s = gaussian_state(&g, 0.0);
        let got = moment_monitor(&g, &s, 1.0, 0).unwrap();
        let want = adaptive_simpson(
            &|r: f64| 4.0 * PI * r * r * (1.0 + r * r) * (-2.0 * r * r).exp(),
            0.0,
            8.0,
            1e-13,
        );
        assert!((got - want).abs() / want < 1e-6);
        let scaled = HomogeneousState { fbar: s.fbar.iter().map(|v| 3.0 * v).collect(), ..s.clone() };
        for k in 0..=4 {
            let a = moment_monitor(&g, &s, 1.0, k).unwrap();
            let b = moment_monitor(&g, &scaled, 1.0, k).unwrap();
            assert!((b - 9.0 * a).abs() <= 1e-12 * b);
        }
    }
}
