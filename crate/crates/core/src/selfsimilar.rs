//! Self-similar rescaling `q = e^{-φ̄} p`, `Ḡ(q) = e^{dφ̄} F̄(e^{φ̄} q)` and the
//! rescaled homogeneous system
//!
//! `∂_t Ḡ = φ̄' div(q Ḡ) + e^{φ̄} div(sqrt(1 + |q|^2) grad Ḡ)`,
//! `φ̄'' = -e^{φ̄} ∫ Ḡ / sqrt(1 + |q|^2) dq`,
//!
//! with `d` the momentum dimension of the grid.

use serde::{Deserialize, Serialize};

use crate::deriv;
use crate::diffusion::{self, CnWorkspace};
use crate::drift;
use crate::error::{Error, Result};
use crate::grid::MomentumGrid;
use crate::homogeneous::{
    check_nonnegative, dot, finite, positive, rk4_autonomous, GridSpec, InitialDatum,
};
use crate::interp::MonotoneCubic;

/// Mass fraction allowed to fall outside the target grid of a transform.
pub const ESCAPE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarState {
    pub t: f64,
    pub phibar: f64,
    pub phibar_prime: f64,
    pub gbar: Vec<f64>,
}

impl SelfSimilarState {
    pub fn mass(&self, grid: &MomentumGrid) -> f64 {
        dot(&self.gbar, &grid.quad_weights)
    }
}

/// Values `amp * src(scale * y)` at the nodes `y` of `dst`, after checking
/// that the part of `src` outside `dst`'s reach carries negligible mass.
fn rescale(src_grid: &MomentumGrid, src: &[f64], dst_grid: &MomentumGrid, scale: f64, amp: f64) -> Result<Vec<f64>> {
    src_grid.check_len(src)?;
    if src_grid.kind != dst_grid.kind {
        return Err(Error::InvalidGrid("transform grids must be of the same kind".into()));
    }
    if scale == 1.0 && src_grid == dst_grid {
        return Ok(src.iter().map(|v| amp * v).collect());
    }
    let reach = scale * dst_grid.domain_max;
    let (mut total, mut outside) = (0.0, 0.0);
    for ((p, v), w) in src_grid.nodes.iter().zip(src).zip(&src_grid.quad_weights) {
        let m = v.abs() * w;
        total += m;
        if p.abs() > reach {
            outside += m;
        }
    }
    if total > 0.0 && outside / total > ESCAPE_TOLERANCE {
        return Err(Error::SupportEscapes {
            fraction: outside / total,
        });
    }
    let interp = MonotoneCubic::from_grid(src_grid, src);
    Ok(dst_grid
        .nodes
        .iter()
        .map(|y| amp * interp.eval(scale * y))
        .collect())
}

/// `Ḡ(q) = e^{dφ̄} F̄(e^{φ̄} q)` sampled on `grid_q`.
pub fn selfsimilar_forward(fbar: &[f64], phibar: f64, grid_p: &MomentumGrid, grid_q: &MomentumGrid) -> Result<Vec<f64>> {
    let d = grid_p.dimension() as f64;
    rescale(grid_p, fbar, grid_q, phibar.exp(), (d * phibar).exp())
}

/// `F̄(p) = e^{-dφ̄} Ḡ(e^{-φ̄} p)` sampled on `grid_p`.
pub fn selfsimilar_inverse(gbar: &[f64], phibar: f64, grid_q: &MomentumGrid, grid_p: &MomentumGrid) -> Result<Vec<f64>> {
    let d = grid_q.dimension() as f64;
    rescale(grid_q, gbar, grid_p, (-phibar).exp(), (-d * phibar).exp())
}

/// `∫ Ḡ / sqrt(1 + |q|^2) dq`.
pub fn stress_integral_q(grid: &MomentumGrid, gbar: &[f64]) -> f64 {
    grid.nodes
        .iter()
        .zip(gbar)
        .zip(&grid.quad_weights)
        .map(|((q, g), w)| g * w / (1.0 + q * q).sqrt())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarConfig {
    /// Grid in the rescaled variable `q`.
    pub grid: GridSpec,
    /// Initial datum in the physical variable `p`.
    pub datum: InitialDatum,
    pub phi_in: f64,
    pub psi_in: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    /// Exponents for the decay and dissipation monitors, each in `(1/2, 3/2)`.
    pub lambdas: Vec<f64>,
    /// Highest derivative order in the monitors.
    pub k_max: usize,
}

impl Default for SelfSimilarConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec {
                n: 8192,
                domain_max: 640.0,
                ..GridSpec::default()
            },
            datum: InitialDatum::default(),
            phi_in: 0.0,
            psi_in: 0.0,
            dt: 1e-3,
            t_end: 2.6,
            sample_every: 20,
            lambdas: vec![0.75, 1.0, 1.25],
            k_max: 0,
        }
    }
}

impl SelfSimilarConfig {
    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        finite("phi_in", self.phi_in)?;
        finite("psi_in", self.psi_in)?;
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter {
                name: "sample_every",
                reason: "must be at least 1".into(),
            });
        }
        for &l in &self.lambdas {
            check_lambda(l)?;
        }
        if self.k_max > 4 {
            return Err(Error::InvalidParameter {
                name: "k_max",
                reason: format!("must be at most 4, got {}", self.k_max),
            });
        }
        self.datum.validate()?;
        self.grid.build().map(|_| ())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    /// Initial state: the datum mapped to `q` at `φ̄ = phi_in`.
    pub fn initial_state(&self, grid: &MomentumGrid) -> SelfSimilarState {
        let d = grid.dimension() as f64;
        let s = self.phi_in.exp();
        let amp = (d * self.phi_in).exp();
        SelfSimilarState {
            t: 0.0,
            phibar: self.phi_in,
            phibar_prime: self.psi_in,
            gbar: grid.nodes.iter().map(|q| amp * self.datum.eval(s * q)).collect(),
        }
    }
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.5 && lambda < 1.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("must lie in (1/2, 3/2), got {lambda}"),
        })
    }
}

/// Weight exponent used on a grid of dimension `d`; equals `λ` in 3D and is
/// shifted by `(3 - d)/2` on lower-dimensional grids so that the decay rate
/// `e^{2(3/2 - λ)φ̄}` keeps its meaning.
pub fn effective_lambda(lambda: f64, dimension: u32) -> f64 {
    lambda - (3.0 - dimension as f64) / 2.0
}

/// `Σ_{k≤K} ∫ (1 + |q|^2)^λ |∂_q^k Ḡ|^2 dq`.
pub fn gbar_decay_monitor(grid: &MomentumGrid, state: &SelfSimilarState, lambda: f64, k_max: usize) -> Result<f64> {
    check_lambda(lambda)?;
    grid.check_len(&state.gbar)?;
    let l = effective_lambda(lambda, grid.dimension());
    let weights: Vec<f64> = grid
        .nodes
        .iter()
        .zip(&grid.quad_weights)
        .map(|(q, w)| (1.0 + q * q).powf(l) * w)
        .collect();
    let mut total = 0.0;
    for k in 0..=k_max {
        let d = deriv::momentum_dk(grid, &state.gbar, k);
        total += d.iter().zip(&weights).map(|(v, w)| v * v * w).sum::<f64>();
    }
    Ok(total)
}

/// Integrand of the dissipation monitor at one time:
/// `e^{(2λ-2)φ̄} Σ_{k≤K} ∫ (1+|q|^2)^{λ-1/2} (|∇ ∂^k Ḡ|^2 + |q · ∇ ∂^k Ḡ|^2) dq`.
pub fn gbar_dissipation_integrand(grid: &MomentumGrid, state: &SelfSimilarState, lambda: f64, k_max: usize) -> Result<f64> {
    check_lambda(lambda)?;
    grid.check_len(&state.gbar)?;
    let l = effective_lambda(lambda, grid.dimension());
    let weights: Vec<f64> = grid
        .nodes
        .iter()
        .zip(&grid.quad_weights)
        .map(|(q, w)| (1.0 + q * q).powf(l + 0.5) * w)
        .collect();
    let mut total = 0.0;
    for k in 0..=k_max {
        let d = deriv::momentum_dk(grid, &state.gbar, k + 1);
        total += d.iter().zip(&weights).map(|(v, w)| v * v * w).sum::<f64>();
    }
    Ok(((2.0 * lambda - 2.0) * state.phibar).exp() * total)
}

/// Running trapezoid integral of [`gbar_dissipation_integrand`] over the
/// given states; one entry per state, starting at 0.
pub fn gbar_dissipation_monitor(grid: &MomentumGrid, trajectory: &[SelfSimilarState], lambda: f64, k_max: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(trajectory.len());
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for s in trajectory {
        let v = gbar_dissipation_integrand(grid, s, lambda, k_max)?;
        if let Some((t0, v0)) = prev {
            acc += 0.5 * (s.t - t0) * (v + v0);
        }
        out.push(acc);
        prev = Some((s.t, v));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SelfSimilarStepper {
    pub grid: MomentumGrid,
    pub dt: f64,
    kappa_unit: Vec<f64>,
    kappa: Vec<f64>,
    ws: CnWorkspace,
}

impl SelfSimilarStepper {
    pub fn new(grid: MomentumGrid, dt: f64) -> Result<Self> {
        positive("dt", dt)?;
        let n = grid.len();
        Ok(Self {
            kappa_unit: diffusion::face_kappa_vec(&grid, 1.0, 1.0),
            kappa: vec![0.0; n - 1],
            ws: CnWorkspace::new(n),
            grid,
            dt,
        })
    }

    /// ODE half, drift half, CN diffusion, drift half, ODE half.
    pub fn step(&mut self, state: &mut SelfSimilarState) -> Result<()> {
        self.grid.check_len(&state.gbar)?;
        let h = 0.5 * self.dt;
        let (y, v) = ode_half_step_q(&self.grid, &state.gbar, state.phibar, state.phibar_prime, h);
        self.kinetic(y, v, &mut state.gbar)?;
        let (y, v) = ode_half_step_q(&self.grid, &state.gbar, y, v, h);
        state.phibar = y;
        state.phibar_prime = v;
        state.t += self.dt;
        check_nonnegative(state.t, &state.gbar)
    }

    /// Drift half, CN full step, drift half with `(φ̄, φ̄')` frozen.
    pub fn kinetic(&mut self, phibar: f64, phibar_prime: f64, gbar: &mut [f64]) -> Result<()> {
        let h = 0.5 * self.dt;
        let c = -phibar_prime;
        let m = drift::substeps(&self.grid, c, h);
        drift::drift_advance_with(&self.grid, c, h, m, gbar);
        self.diffuse(phibar, gbar)?;
        drift::drift_advance_with(&self.grid, c, h, m, gbar);
        Ok(())
    }

    pub fn diffuse(&mut self, phibar: f64, gbar: &mut [f64]) -> Result<()> {
        let e = phibar.exp();
        for (k, u) in self.kappa.iter_mut().zip(&self.kappa_unit) {
            *k = e * u;
        }
        diffusion::crank_nicolson(&self.grid, &self.kappa, self.dt, gbar, &mut self.ws)
    }
}

/// RK4 for `φ̄'' = -e^{φ̄} ρ_q` with `Ḡ` frozen.
pub fn ode_half_step_q(grid: &MomentumGrid, gbar: &[f64], phibar: f64, phibar_prime: f64, h: f64) -> (f64, f64) {
    let rho = stress_integral_q(grid, gbar);
    rk4_autonomous(&|y: f64| -y.exp() * rho, phibar, phibar_prime, h)
}

pub fn step_selfsimilar(state: &SelfSimilarState, config: &SelfSimilarConfig) -> Result<SelfSimilarState> {
    let grid = config.grid.build()?;
    let mut stepper = SelfSimilarStepper::new(grid, config.dt)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarSample {
    pub t: f64,
    pub phibar: f64,
    pub phibar_prime: f64,
    pub mass: f64,
    pub linf_gbar: f64,
    pub min_gbar: f64,
    /// Per λ: the decay monitor.
    pub decay: Vec<f64>,
    /// Per λ: decay monitor divided by `e^{2(3/2-λ)φ̄}`.
    pub decay_ratio: Vec<f64>,
    /// Per λ: running dissipation integral.
    pub dissipation: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SelfSimilarRun {
    pub grid: MomentumGrid,
    pub lambdas: Vec<f64>,
    pub samples: Vec<SelfSimilarSample>,
    pub final_state: SelfSimilarState,
}

pub fn run_selfsimilar(config: &SelfSimilarConfig) -> Result<SelfSimilarRun> {
    config.validate()?;
    let grid = config.grid.build()?;
    let mut state = config.initial_state(&grid);
    let mut stepper = SelfSimilarStepper::new(grid.clone(), config.dt)?;
    let nl = config.lambdas.len();
    let integrand = |s: &SelfSimilarState| -> Result<Vec<f64>> {
        config
            .lambdas
            .iter()
            .map(|&l| gbar_dissipation_integrand(&grid, s, l, config.k_max))
            .collect()
    };
    let sample = |s: &SelfSimilarState, running: &[f64]| -> Result<SelfSimilarSample> {
        let decay: Vec<f64> = config
            .lambdas
            .iter()
            .map(|&l| gbar_decay_monitor(&grid, s, l, config.k_max))
            .collect::<Result<_>>()?;
        let decay_ratio = decay
            .iter()
            .zip(&config.lambdas)
            .map(|(v, l)| v / (2.0 * (1.5 - l) * s.phibar).exp())
            .collect();
        Ok(SelfSimilarSample {
            t: s.t,
            phibar: s.phibar,
            phibar_prime: s.phibar_prime,
            mass: s.mass(&grid),
            linf_gbar: s.gbar.iter().fold(0.0, |a, v| a.max(v.abs())),
            min_gbar: s.gbar.iter().cloned().fold(f64::INFINITY, f64::min),
            decay,
            decay_ratio,
            dissipation: running.to_vec(),
        })
    };
    let mut running = vec![0.0; nl];
    let mut prev = integrand(&state)?;
    let mut samples = vec![sample(&state, &running)?];
    let steps = config.steps();
    for s in 1..=steps {
        stepper.step(&mut state)?;
        let cur = integrand(&state)?;
        for i in 0..nl {
            running[i] += 0.5 * config.dt * (prev[i] + cur[i]);
        }
        prev = cur;
        if s % config.sample_every == 0 || s == steps {
            samples.push(sample(&state, &running)?);
        }
    }
    Ok(SelfSimilarRun {
        grid,
        lambdas: config.lambdas.clone(),
        samples,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridKind;
    use crate::reference::adaptive_simpson;
    use std::f64::consts::PI;

    fn gaussian(grid: &MomentumGrid) -> Vec<f64> {
        grid.nodes.iter().map(|p| (-p * p).exp()).collect()
    }

    #[test]
    fn identity_at_zero_phibar() {
        let g = MomentumGrid::radial3d(256, 8.0).unwrap();
        let f = gaussian(&g);
        let fwd = selfsimilar_forward(&f, 0.0, &g, &g).unwrap();
        assert_eq!(fwd, f);
        let back = selfsimilar_inverse(&fwd, 0.0, &g, &g).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn forward_preserves_mass() {
        let gp = MomentumGrid::radial3d(1024, 8.0).unwrap();
        let gq = MomentumGrid::radial3d(1024, 24.0).unwrap();
        let f = gaussian(&gp);
        let g = selfsimilar_forward(&f, -1.0, &gp, &gq).unwrap();
        let mp = dot(&f, &gp.quad_weights);
        let mq = dot(&g, &gq.quad_weights);
        assert!(((mp - mq) / mp).abs() < 1e-8, "{}", (mp - mq) / mp);
    }

    #[test]
    fn support_escape_is_reported() {
        let gp = MomentumGrid::radial3d(256, 8.0).unwrap();
        let gq = MomentumGrid::radial3d(256, 4.0).unwrap();
        let f = gaussian(&gp);
        assert!(matches!(
            selfsimilar_forward(&f, -1.0, &gp, &gq),
            Err(Error::SupportEscapes { .. })
        ));
    }

    #[test]
    fn zero_and_stationary_states() {
        let g = MomentumGrid::radial3d(64, 8.0).unwrap();
        let mut stepper = SelfSimilarStepper::new(g.clone(), 1e-2).unwrap();
        let mut s = SelfSimilarState { t: 0.0, phibar: 0.2, phibar_prime: -0.5, gbar: vec![0.0; 64] };
        for _ in 0..10 {
            stepper.step(&mut s).unwrap();
        }
        assert!((s.phibar - (0.2 - 0.05)).abs() < 1e-14);
        assert!(s.gbar.iter().all(|v| *v == 0.0));

        let mut s = SelfSimilarState { t: 0.0, phibar: 0.0, phibar_prime: 0.0, gbar: vec![0.7; 64] };
        let mut kinetic = s.gbar.clone();
        stepper.kinetic(0.0, 0.0, &mut kinetic).unwrap();
        assert!(kinetic.iter().all(|v| (v - 0.7).abs() < 1e-14));
        stepper.step(&mut s).unwrap();
        assert!(s.phibar_prime < 0.0);
    }

    #[test]
    fn mass_conserved_over_many_steps() {
        let config = SelfSimilarConfig {
            grid: GridSpec { kind: GridKind::Radial3d, n: 256, domain_max: 16.0 },
            dt: 1e-3,
            t_end: 1.0,
            sample_every: 1000,
            ..Default::default()
        };
        let run = run_selfsimilar(&config).unwrap();
        let m0 = run.samples[0].mass;
        let m1 = run.samples.last().unwrap().mass;
        assert!(((m1 - m0) / m0).abs() < 1e-10);
        assert!(run.samples.iter().all(|s| s.min_gbar >= -1e-13));
    }

    #[test]
    fn decay_monitor_matches_quadrature() {
        let g = MomentumGrid::radial3d(2048, 8.0).unwrap();
        let s = SelfSimilarState { t: 0.0, phibar: 0.0, phibar_prime: 0.0, gbar: gaussian(&g) };
        let got = gbar_decay_monitor(&g, &s, 1.0, 0).unwrap();
        let want = adaptive_simpson(
            &|r: f64| 4.0 * PI * r * r * (1.0 + r * r) * (-2.0 * r * r).exp(),
            0.0,
            8.0,
            1e-13,
        );
        assert!((got - want).abs() / want < 1e-6);
        assert!(gbar_decay_monitor(&g, &s, 1.5, 0).is_err());
        assert!(gbar_decay_monitor(&g, &s, 0.5, 0).is_err());
    }

    #[test]
    fn dissipation_monitor_nondecreasing() {
        let g = MomentumGrid::radial3d(128, 16.0).unwrap();
        let mut stepper = SelfSimilarStepper::new(g.clone(), 1e-2).unwrap();
        let mut s = SelfSimilarState { t: 0.0, phibar: 0.0, phibar_prime: 0.0, gbar: gaussian(&g) };
        let mut traj = vec![s.clone()];
        for _ in 0..50 {
            stepper.step(&mut s).unwrap();
            traj.push(s.clone());
        }
        let d = gbar_dissipation_monitor(&g, &traj, 1.0, 1).unwrap();
        assert_eq!(d[0], 0.0);
        assert!(d.windows(2).all(|w| w[1] >= w[0]));
        let zero: Vec<_> = traj
            .iter()
            .map(|s| SelfSimilarState { gbar: vec![0.0; 128], ..s.clone() })
            .collect();
        assert!(gbar_dissipation_monitor(&g, &zero, 1.0, 1).unwrap().iter().all(|v| *v == 0.0));
    }
}
