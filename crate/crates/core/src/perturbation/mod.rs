//! Reduced 1x+1p perturbation system around a homogeneous background.
//!
//! `f` (or `g` in the self-similar variables) lives on a periodic `x` grid
//! times a momentum line; the field perturbation `Φ` obeys a scalar wave
//! equation. Arrays over phase space are stored row-major with one contiguous
//! momentum row per `x` node: `f[j * n_p + i]`.

mod operators;
mod picard;
mod stepper;
mod tc;
mod wave;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridKind, MomentumGrid, SpaceGrid};
use crate::homogeneous::{finite, positive, GridSpec, HomogeneousState, InitialDatum};
use crate::par::Execution;

pub use operators::{fp_apply_perturbed, source_terms, transport_apply, wave_source};
pub use picard::{picard_iterate, PicardReport};
pub use stepper::{run_perturbation, step_perturbation, PerturbationRun, PerturbationSample, PerturbationStepper};
pub use tc::{detect_tc, TcSample};
pub use wave::{wave_energy, wave_step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    #[default]
    Physical,
    SelfSimilar,
}

impl Formulation {
    /// Field entering the Hamiltonian `sqrt(e^{2ψ} + |p|^2)`.
    #[inline]
    pub fn hamiltonian_field(self, phibar: f64, big_phi: f64) -> f64 {
        match self {
            Formulation::Physical => phibar + big_phi,
            Formulation::SelfSimilar => big_phi,
        }
    }

    /// Prefactor of the momentum diffusion and of the stress integral.
    #[inline]
    pub fn prefactor(self, phibar: f64, big_phi: f64) -> f64 {
        match self {
            Formulation::Physical => (2.0 * (phibar + big_phi)).exp(),
            Formulation::SelfSimilar => (phibar + 2.0 * big_phi).exp(),
        }
    }
}

/// Periodic `x` grid together with the momentum line.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub space: SpaceGrid,
    pub momentum: MomentumGrid,
}

impl PhaseGrid {
    pub fn new(space: SpaceGrid, momentum: MomentumGrid) -> Result<Self> {
        if momentum.kind != GridKind::Line1d {
            return Err(Error::InvalidGrid(
                "the perturbation solver needs a line momentum grid".into(),
            ));
        }
        Ok(Self { space, momentum })
    }

    pub fn n_x(&self) -> usize {
        self.space.n
    }

    pub fn n_p(&self) -> usize {
        self.momentum.len()
    }

    pub fn len(&self) -> usize {
        self.n_x() * self.n_p()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_phase(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    pub fn check_space(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_x() {
            return Err(Error::LengthMismatch {
                expected: self.n_x(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `∫∫ u dx dp`.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        let w = &self.momentum.quad_weights;
        u.chunks(self.n_p())
            .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .sum::<f64>()
            * self.space.dx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationState {
    pub t: f64,
    /// `f` (physical) or `g` (self-similar), row-major over `(x, p)`.
    pub f: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// `F̄` or `Ḡ` with `φ̄, φ̄'`; its time is kept equal to `t`.
    pub background: HomogeneousState,
}

impl PerturbationState {
    pub fn check(&self, grids: &PhaseGrid) -> Result<()> {
        grids.check_phase(&self.f)?;
        grids.check_space(&self.phi)?;
        grids.check_space(&self.dphi)?;
        grids.momentum.check_len(&self.background.fbar)
    }

    pub fn row(&self, grids: &PhaseGrid, j: usize) -> &[f64] {
        let n = grids.n_p();
        &self.f[j * n..(j + 1) * n]
    }

    /// `∫∫ (F̄ + f) dx dp`.
    pub fn total_mass(&self, grids: &PhaseGrid) -> f64 {
        let bg: f64 = self
            .background
            .fbar
            .iter()
            .zip(&grids.momentum.quad_weights)
            .map(|(a, b)| a * b)
            .sum();
        bg * grids.space.length + grids.integrate(&self.f)
    }

    /// Smallest value of `F̄ + f`.
    pub fn min_total(&self, grids: &PhaseGrid) -> f64 {
        let n = grids.n_p();
        self.f
            .iter()
            .enumerate()
            .map(|(k, v)| v + self.background.fbar[k % n])
            .fold(f64::INFINITY, f64::min)
    }
}

/// `‖e^{5φ̄} f‖_∞`; in the self-similar variables `f = e^{-dφ̄} g(e^{-φ̄} p)`,
/// so the same quantity is `e^{(5-d)φ̄} ‖g‖_∞`.
pub fn linf_weighted(state: &PerturbationState, formulation: Formulation, grids: &PhaseGrid) -> f64 {
    let m = state.f.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let exponent = match formulation {
        Formulation::Physical => 5.0,
        Formulation::SelfSimilar => 5.0 - grids.momentum.dimension() as f64,
    };
    (exponent * state.background.phibar).exp() * m
}

/// Initial perturbation `f_0 = a_f cos(k x) exp(-p^2 / w^2)`,
/// `Φ_0 = a_Φ cos(k x)`, `∂_tΦ_0 = a_dΦ sin(k x)` with `k = 2π mode / L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDatum {
    pub f_amplitude: f64,
    pub phi_amplitude: f64,
    pub dphi_amplitude: f64,
    pub mode: usize,
    pub width: f64,
}

impl Default for PerturbationDatum {
    fn default() -> Self {
        Self {
            f_amplitude: 1e-3,
            phi_amplitude: 1e-3,
            dphi_amplitude: 0.0,
            mode: 1,
            width: 1.0,
        }
    }
}

impl PerturbationDatum {
    pub fn zero() -> Self {
        Self {
            f_amplitude: 0.0,
            phi_amplitude: 0.0,
            dphi_amplitude: 0.0,
            mode: 0,
            width: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub formulation: Formulation,
    pub n_x: usize,
    pub length: f64,
    /// Line grid in `p` (physical) or `q` (self-similar).
    pub momentum: GridSpec,
    pub background: InitialDatum,
    pub phi_in: f64,
    pub psi_in: f64,
    pub perturbation: PerturbationDatum,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            formulation: Formulation::Physical,
            n_x: 32,
            length: 2.0 * std::f64::consts::PI,
            momentum: GridSpec {
                kind: GridKind::Line1d,
                n: 256,
                domain_max: 8.0,
            },
            background: InitialDatum::default(),
            phi_in: 0.0,
            psi_in: 0.0,
            perturbation: PerturbationDatum::default(),
            dt: 1e-2,
            t_end: 10.0,
            sample_every: 10,
            execution: Execution::default(),
        }
    }
}

impl PerturbationConfig {
    pub fn grids(&self) -> Result<PhaseGrid> {
        PhaseGrid::new(SpaceGrid::new(self.n_x, self.length)?, self.momentum.build()?)
    }

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
        let p = &self.perturbation;
        finite("f_amplitude", p.f_amplitude)?;
        finite("phi_amplitude", p.phi_amplitude)?;
        finite("dphi_amplitude", p.dphi_amplitude)?;
        positive("width", p.width)?;
        self.background.validate()?;
        let grids = self.grids()?;
        if self.dt > grids.space.dx {
            return Err(Error::Cfl {
                dt: self.dt,
                dx: grids.space.dx,
            });
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    /// Initial state; in the self-similar formulation both the background and
    /// the perturbation are mapped to `q` at `φ̄ = phi_in`.
    pub fn initial_state(&self, grids: &PhaseGrid) -> PerturbationState {
        let (scale, amp) = match self.formulation {
            Formulation::Physical => (1.0, 1.0),
            Formulation::SelfSimilar => {
                let d = grids.momentum.dimension() as f64;
                (self.phi_in.exp(), (d * self.phi_in).exp())
            }
        };
        let nodes = &grids.momentum.nodes;
        let fbar: Vec<f64> = nodes
            .iter()
            .map(|q| amp * self.background.eval(scale * q))
            .collect();
        let p = &self.perturbation;
        let k = 2.0 * std::f64::consts::PI * p.mode as f64 / self.length;
        let xs = grids.space.nodes();
        let mut f = Vec::with_capacity(grids.len());
        for &x in &xs {
            let c = (k * x).cos();
            for q in nodes {
                let s = scale * q / p.width;
                f.push(amp * p.f_amplitude * c * (-s * s).exp());
            }
        }
        PerturbationState {
            t: 0.0,
            f,
            phi: xs.iter().map(|x| p.phi_amplitude * (k * x).cos()).collect(),
            dphi: xs.iter().map(|x| p.dphi_amplitude * (k * x).sin()).collect(),
            background: HomogeneousState {
                t: 0.0,
                phibar: self.phi_in,
                phibar_prime: self.psi_in,
                fbar,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linf_weighted_examples() {
        let config = PerturbationConfig { n_x: 4, momentum: GridSpec { kind: GridKind::Line1d, n: 8, domain_max: 4.0 }, ..Default::default() };
        let grids = config.grids().unwrap();
        let mut s = config.initial_state(&grids);
        s.f.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(linf_weighted(&s, Formulation::Physical, &grids), 0.0);
        s.f[5] = -3.0;
        s.background.phibar = 0.0;
        assert_eq!(linf_weighted(&s, Formulation::Physical, &grids), 3.0);
        s.f.iter_mut().for_each(|v| *v *= -2.0);
        assert_eq!(linf_weighted(&s, Formulation::Physical, &grids), 6.0);
        s.background.phibar = -1.0;
        let a = linf_weighted(&s, Formulation::Physical, &grids);
        let b = linf_weighted(&s, Formulation::SelfSimilar, &grids);
        assert!((a - 6.0 * (-5f64).exp()).abs() < 1e-15);
        assert!((b - 6.0 * (-4f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn cfl_rejected() {
        let config = PerturbationConfig { dt: 0.5, ..Default::default() };
        assert!(matches!(config.validate(), Err(Error::Cfl { .. })));
        assert!(PerturbationConfig::default().validate().is_ok());
    }
}
