//! Split-step integrator for the perturbation system.
//!
//! One step of length `dt`:
//! field half step, [drift half], transport half, Crank-Nicolson diffusion,
//! transport half, [drift half], field half step. Bracketed stages exist only
//! in the self-similar formulation. The field half steps integrate
//! `(φ̄, φ̄', Φ, ∂_tΦ)` jointly with classical RK4 while the densities are
//! frozen; the kinetic stages see the fields frozen at the step midpoint.
//! Diffusion acts on the total density `F̄ + f` per `x` column, which carries
//! the background commutator term implicitly.

use serde::{Deserialize, Serialize};

use crate::deriv;
use crate::diffusion::{self, CnWorkspace};
use crate::drift;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

use super::operators::{self, Fields, Recon};
use super::wave::wave_energy;
use super::{linf_weighted, Formulation, PerturbationConfig, PerturbationState, PhaseGrid};

const TRANSPORT_CFL: f64 = 0.9;

/// Background density at the two kinetic sub-stages around the diffusion.
#[derive(Debug, Clone)]
pub(crate) struct BackgroundStages {
    pub before_diffusion: Vec<f64>,
    pub after_diffusion: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PerturbationStepper {
    pub grids: PhaseGrid,
    pub formulation: Formulation,
    pub dt: f64,
    pub execution: Execution,
    bg_ws: CnWorkspace,
    bg_kappa: Vec<f64>,
}

impl PerturbationStepper {
    pub fn new(grids: PhaseGrid, formulation: Formulation, dt: f64, execution: Execution) -> Result<Self> {
        if !(dt > 0.0 && dt <= grids.space.dx) {
            return Err(Error::Cfl {
                dt,
                dx: grids.space.dx,
            });
        }
        let np = grids.n_p();
        Ok(Self {
            grids,
            formulation,
            dt,
            execution,
            bg_ws: CnWorkspace::new(np),
            bg_kappa: vec![0.0; np - 1],
        })
    }

    pub fn step(&mut self, state: &mut PerturbationState) -> Result<()> {
        state.check(&self.grids)?;
        let h = 0.5 * self.dt;
        self.field_half(state, h);
        let bg = &state.background;
        let fields = Fields::new(self.formulation, bg.phibar, &state.phi, self.grids.space.dx);
        let (phibar, phibar_prime) = (bg.phibar, bg.phibar_prime);
        let stages = self.background_kinetic(phibar, phibar_prime, &mut state.background.fbar)?;
        self.kinetic(&mut state.f, &fields, phibar_prime, &stages)?;
        self.field_half(state, h);
        state.t += self.dt;
        state.background.t = state.t;
        Ok(())
    }

    /// Accelerations of `(φ̄, Φ_0, ..., Φ_{n-1})` with the densities frozen.
    fn field_accel(&self, y: &[f64], f: &[f64], fbar: &[f64]) -> Vec<f64> {
        let phibar = y[0];
        let phi = &y[1..];
        let fields = Fields::new(self.formulation, phibar, phi, self.grids.space.dx);
        let mut out = Vec::with_capacity(y.len());
        out.push(-fields.pref_bg * operators::stress(&self.grids, fields.e2_bg, fbar));
        let src = operators::wave_source_into(self.execution, &self.grids, &fields, f, fbar);
        let mut lap = vec![0.0; phi.len()];
        deriv::periodic_laplacian(phi, self.grids.space.dx, &mut lap);
        out.extend(lap.iter().zip(&src).map(|(a, b)| a + b));
        out
    }

    /// Joint RK4 step of length `h` for the background potential and `Φ`.
    pub(crate) fn field_half(&self, state: &mut PerturbationState, h: f64) {
        let n = state.phi.len() + 1;
        let mut y = Vec::with_capacity(n);
        y.push(state.background.phibar);
        y.extend_from_slice(&state.phi);
        let mut v = Vec::with_capacity(n);
        v.push(state.background.phibar_prime);
        v.extend_from_slice(&state.dphi);
        let (f, fbar) = (&state.f, &state.background.fbar);
        let shifted = |base: &[f64], d: &[f64], s: f64| -> Vec<f64> {
            base.iter().zip(d).map(|(a, b)| a + s * b).collect()
        };
        let k1y = v.clone();
        let k1v = self.field_accel(&y, f, fbar);
        let k2y = shifted(&v, &k1v, 0.5 * h);
        let k2v = self.field_accel(&shifted(&y, &k1y, 0.5 * h), f, fbar);
        let k3y = shifted(&v, &k2v, 0.5 * h);
        let k3v = self.field_accel(&shifted(&y, &k2y, 0.5 * h), f, fbar);
        let k4y = shifted(&v, &k3v, h);
        let k4v = self.field_accel(&shifted(&y, &k3y, h), f, fbar);
        for i in 0..n {
            y[i] += h / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        state.background.phibar = y[0];
        state.background.phibar_prime = v[0];
        state.phi.copy_from_slice(&y[1..]);
        state.dphi.copy_from_slice(&v[1..]);
    }

    /// Kinetic update of the background over `dt` with `(φ̄, φ̄')` frozen.
    pub(crate) fn background_kinetic(&mut self, phibar: f64, phibar_prime: f64, fbar: &mut [f64]) -> Result<BackgroundStages> {
        let g = &self.grids.momentum;
        let h = 0.5 * self.dt;
        let c = -phibar_prime;
        let drifting = self.formulation == Formulation::SelfSimilar;
        let m = drift::substeps(g, c, h);
        if drifting {
            drift::drift_advance_with(g, c, h, m, fbar);
        }
        let before_diffusion = fbar.to_vec();
        let pref = self.formulation.prefactor(phibar, 0.0);
        let e2 = (2.0 * self.formulation.hamiltonian_field(phibar, 0.0)).exp();
        diffusion::face_kappa(g, pref, e2, &mut self.bg_kappa);
        diffusion::crank_nicolson(g, &self.bg_kappa, self.dt, fbar, &mut self.bg_ws)?;
        let after_diffusion = fbar.to_vec();
        if drifting {
            drift::drift_advance_with(g, c, h, m, fbar);
        }
        Ok(BackgroundStages {
            before_diffusion,
            after_diffusion,
        })
    }

    /// Kinetic update of the perturbation over `dt` with the fields frozen.
    pub(crate) fn kinetic(&self, f: &mut [f64], fields: &Fields, phibar_prime: f64, stages: &BackgroundStages) -> Result<()> {
        let h = 0.5 * self.dt;
        let drifting = self.formulation == Formulation::SelfSimilar;
        if drifting {
            self.drift_rows(f, -phibar_prime, h);
        }
        self.transport(f, fields, &stages.before_diffusion, h);
        self.diffuse_rows(f, fields, stages)?;
        self.transport(f, fields, &stages.after_diffusion, h);
        if drifting {
            self.drift_rows(f, -phibar_prime, h);
        }
        Ok(())
    }

    fn drift_rows(&self, f: &mut [f64], c: f64, h: f64) {
        let g = &self.grids.momentum;
        let m = drift::substeps(g, c, h);
        par::for_each_row(self.execution, f, self.grids.n_p(), |_, row| {
            drift::drift_advance_with(g, c, h, m, row);
        });
    }

    fn diffuse_rows(&self, f: &mut [f64], fields: &Fields, stages: &BackgroundStages) -> Result<()> {
        let g = &self.grids.momentum;
        let np = self.grids.n_p();
        let dt = self.dt;
        par::try_for_each_row(self.execution, f, np, |j, row| {
            let kappa = diffusion::face_kappa_vec(g, fields.pref[j], fields.e2[j]);
            let mut total: Vec<f64> = row
                .iter()
                .zip(&stages.before_diffusion)
                .map(|(a, b)| a + b)
                .collect();
            let mut ws = CnWorkspace::new(np);
            diffusion::crank_nicolson(g, &kappa, dt, &mut total, &mut ws)?;
            for ((r, t), b) in row.iter_mut().zip(&total).zip(&stages.after_diffusion) {
                *r = t - b;
            }
            Ok(())
        })
    }

    /// `∂_t f = -T_h(f) - T_h^c(F̄)` over `h` by SSP-RK3 substeps.
    fn transport(&self, f: &mut [f64], fields: &Fields, fbar: &[f64], h: f64) {
        let grids = &self.grids;
        let exec = self.execution;
        let mut forcing = vec![0.0; f.len()];
        let wide = operators::broadcast(grids, fbar);
        operators::transport_into(exec, grids, fields, &wide, Recon::Central, &mut forcing);
        let max_b = (0..grids.n_x())
            .map(|j| fields.e2[j].sqrt() * fields.dphi_dx[j].abs())
            .fold(0.0, f64::max);
        let rate = 1.0 / grids.space.dx + max_b / grids.momentum.cell_width;
        let m = ((h * rate / TRANSPORT_CFL).ceil() as usize).max(1);
        let dt = h / m as f64;
        let n = f.len();
        let mut k = vec![0.0; n];
        let mut s1 = vec![0.0; n];
        let mut s2 = vec![0.0; n];
        let rhs = |u: &[f64], out: &mut [f64]| {
            operators::transport_into(exec, grids, fields, u, Recon::Upwind, out);
            for (o, fo) in out.iter_mut().zip(&forcing) {
                *o = -*o - fo;
            }
        };
        for _ in 0..m {
            rhs(f, &mut k);
            for i in 0..n {
                s1[i] = f[i] + dt * k[i];
            }
            rhs(&s1, &mut k);
            for i in 0..n {
                s2[i] = 0.75 * f[i] + 0.25 * (s1[i] + dt * k[i]);
            }
            rhs(&s2, &mut k);
            for i in 0..n {
                f[i] = f[i] / 3.0 + 2.0 / 3.0 * (s2[i] + dt * k[i]);
            }
        }
    }
}

pub fn step_perturbation(state: &PerturbationState, formulation: Formulation, config: &PerturbationConfig) -> Result<PerturbationState> {
    let grids = config.grids()?;
    let mut stepper = PerturbationStepper::new(grids, formulation, config.dt, config.execution)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSample {
    pub t: f64,
    pub phibar: f64,
    pub phibar_prime: f64,
    /// `∫∫ (F̄ + f) dx dp`.
    pub mass_total: f64,
    pub min_total: f64,
    pub linf_f: f64,
    pub linf_weighted: f64,
    /// `max_x (φ̄ + Φ)`.
    pub max_field: f64,
    /// `max_x (φ̄' + ∂_tΦ)`.
    pub max_field_rate: f64,
    pub phi_l2: f64,
    pub dphi_l2: f64,
    pub wave_energy: f64,
}

impl PerturbationSample {
    pub fn of(state: &PerturbationState, grids: &PhaseGrid, formulation: Formulation) -> Self {
        let dx = grids.space.dx;
        let l2 = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() * dx).sqrt();
        let bg = &state.background;
        Self {
            t: state.t,
            phibar: bg.phibar,
            phibar_prime: bg.phibar_prime,
            mass_total: state.total_mass(grids),
            min_total: state.min_total(grids),
            linf_f: state.f.iter().fold(0.0, |a, v| a.max(v.abs())),
            linf_weighted: linf_weighted(state, formulation, grids),
            max_field: bg.phibar + state.phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            max_field_rate: bg.phibar_prime + state.dphi.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            phi_l2: l2(&state.phi),
            dphi_l2: l2(&state.dphi),
            wave_energy: wave_energy(&state.phi, &state.dphi, dx),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PerturbationRun {
    pub grids: PhaseGrid,
    pub formulation: Formulation,
    pub samples: Vec<PerturbationSample>,
    pub final_state: PerturbationState,
}

/// Runs the configured system; `observe` sees every recorded state.
pub fn run_perturbation(
    config: &PerturbationConfig,
    mut observe: impl FnMut(&PerturbationState, &PhaseGrid) -> Result<()>,
) -> Result<PerturbationRun> {
    config.validate()?;
    let grids = config.grids()?;
    let mut state = config.initial_state(&grids);
    let mut stepper = PerturbationStepper::new(grids.clone(), config.formulation, config.dt, config.execution)?;
    let mut samples = vec![PerturbationSample::of(&state, &grids, config.formulation)];
    observe(&state, &grids)?;
    let steps = config.steps();
    for s in 1..=steps {
        stepper.step(&mut state)?;
        if s % config.sample_every == 0 || s == steps {
            samples.push(PerturbationSample::of(&state, &grids, config.formulation));
            observe(&state, &grids)?;
        }
    }
    Ok(PerturbationRun {
        grids,
        formulation: config.formulation,
        samples,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridKind;
    use crate::homogeneous::{GridSpec, HomogeneousConfig, HomogeneousState, HomogeneousStepper, InitialDatum};
    use crate::perturbation::PerturbationDatum;

    fn small(form: Formulation) -> PerturbationConfig {
        PerturbationConfig {
            formulation: form,
            n_x: 16,
            momentum: GridSpec { kind: GridKind::Line1d, n: 96, domain_max: 8.0 },
            dt: 0.02,
            t_end: 1.0,
            sample_every: 10,
            ..Default::default()
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        for form in [Formulation::Physical, Formulation::SelfSimilar] {
            let config = PerturbationConfig {
                background: InitialDatum::Zero,
                perturbation: PerturbationDatum::zero(),
                ..small(form)
            };
            let run = run_perturbation(&config, |_, _| Ok(())).unwrap();
            let s = &run.final_state;
            assert!(s.f.iter().chain(&s.phi).chain(&s.dphi).chain(&s.background.fbar).all(|v| *v == 0.0));
            assert_eq!(s.background.phibar, 0.0);
        }
    }

    #[test]
    fn mass_is_conserved() {
        for form in [Formulation::Physical, Formulation::SelfSimilar] {
            let run = run_perturbation(&small(form), |_, _| Ok(())).unwrap();
            let m0 = run.samples[0].mass_total;
            for s in &run.samples {
                assert!(((s.mass_total - m0) / m0).abs() < 1e-12);
                assert!(s.min_total >= -1e-12);
            }
        }
    }

    #[test]
    fn x_independent_data_reduces_to_homogeneous() {
        let mut config = small(Formulation::Physical);
        config.perturbation = PerturbationDatum { mode: 0, phi_amplitude: 0.0, f_amplitude: 0.3, ..Default::default() };
        config.dt = 1e-2;
        let grids = config.grids().unwrap();
        let mut state = config.initial_state(&grids);
        let mut stepper = PerturbationStepper::new(grids.clone(), config.formulation, config.dt, Execution::Sequential).unwrap();

        let hconfig = HomogeneousConfig { grid: config.momentum, dt: config.dt, ..Default::default() };
        let bg_total: Vec<f64> = state.background.fbar.iter().zip(state.row(&grids, 0)).map(|(a, b)| a + b).collect();
        let mut total = HomogeneousState { t: 0.0, phibar: 0.0, phibar_prime: 0.0, fbar: bg_total };
        let mut background = HomogeneousState { fbar: state.background.fbar.clone(), ..total.clone() };
        let mut h1 = HomogeneousStepper::new(grids.momentum.clone(), hconfig.dt).unwrap();
        let mut h2 = h1.clone();
        for _ in 0..100 {
            stepper.step(&mut state).unwrap();
            h1.step(&mut total).unwrap();
            h2.step(&mut background).unwrap();
        }
        let mut worst: f64 = 0.0;
        for j in 0..grids.n_x() {
            for (i, v) in state.row(&grids, j).iter().enumerate() {
                worst = worst.max((v - (total.fbar[i] - background.fbar[i])).abs());
            }
            worst = worst.max((state.background.phibar + state.phi[j] - total.phibar).abs());
        }
        assert!(worst <= 1e-8, "{worst:e}");
    }
}
