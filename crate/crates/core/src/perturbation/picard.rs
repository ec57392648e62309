//! Picard iteration: `f^{n+1}` solves the kinetic equation with the field
//! frozen at `Φ^n`, then `Φ^{n+1}` solves the wave equation with the source
//! built from `(f^{n+1}, Φ^n)`. The background is computed once and shared by
//! every iterate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogeneous::{rk4_autonomous, HomogeneousState};

use super::operators::{self, Fields};
use super::stepper::{BackgroundStages, PerturbationStepper};
use super::wave::wave_step;
use super::{Formulation, PerturbationConfig, PhaseGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardIterate {
    /// `f` (or `g`) at the final time.
    pub f: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub iterates: usize,
    /// `d_n = sup_t ‖(f^n - f^{n-1}, Φ^n - Φ^{n-1}, ∂_tΦ^n - ∂_tΦ^{n-1})‖`, `n ≥ 1`.
    pub differences: Vec<f64>,
    /// `d_{n+1} / d_n`; `NaN` when `d_n = 0`.
    pub ratios: Vec<f64>,
    /// Set when the last two ratios both exceed one.
    pub diverged: bool,
    /// Iterates `1..=n` at the final time.
    pub finals: Vec<PicardIterate>,
    /// Background at the final time.
    pub background: HomogeneousState,
}

struct Background {
    levels: Vec<HomogeneousState>,
    mids: Vec<(f64, f64)>,
    stages: Vec<BackgroundStages>,
}

fn background_accel(form: Formulation, grids: &PhaseGrid, phibar: f64, fbar: &[f64]) -> f64 {
    let pref = form.prefactor(phibar, 0.0);
    let e2 = (2.0 * form.hamiltonian_field(phibar, 0.0)).exp();
    -pref * operators::stress(grids, e2, fbar)
}

fn background_history(stepper: &mut PerturbationStepper, start: &HomogeneousState, steps: usize) -> Result<Background> {
    let form = stepper.formulation;
    let grids = stepper.grids.clone();
    let h = 0.5 * stepper.dt;
    let mut cur = start.clone();
    let mut levels = vec![cur.clone()];
    let mut mids = Vec::with_capacity(steps);
    let mut stages = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (y, v) = {
            let fbar = &cur.fbar;
            rk4_autonomous(&|y| background_accel(form, &grids, y, fbar), cur.phibar, cur.phibar_prime, h)
        };
        mids.push((y, v));
        stages.push(stepper.background_kinetic(y, v, &mut cur.fbar)?);
        let (y, v) = {
            let fbar = &cur.fbar;
            rk4_autonomous(&|y| background_accel(form, &grids, y, fbar), y, v, h)
        };
        cur.phibar = y;
        cur.phibar_prime = v;
        cur.t += stepper.dt;
        levels.push(cur.clone());
    }
    Ok(Background { levels, mids, stages })
}

/// Weighted `L^2` distance with momentum weight `sqrt(1 + p^2)`.
fn distance(grids: &PhaseGrid, a: &[f64], b: &[f64], pa: &[f64], pb: &[f64], da: &[f64], db: &[f64]) -> f64 {
    let np = grids.n_p();
    let m = &grids.momentum;
    let mut s = 0.0;
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let i = k % np;
        let p = m.nodes[i];
        s += (1.0 + p * p).sqrt() * m.quad_weights[i] * (x - y) * (x - y);
    }
    for j in 0..grids.n_x() {
        s += (pa[j] - pb[j]).powi(2) + (da[j] - db[j]).powi(2);
    }
    (s * grids.space.dx).sqrt()
}

/// Runs `n_iters` Picard iterates over `[0, config.t_end]`.
pub fn picard_iterate(config: &PerturbationConfig, n_iters: usize) -> Result<PicardReport> {
    if n_iters < 3 {
        return Err(Error::InvalidParameter {
            name: "n_iters",
            reason: format!("need at least 3 iterates, got {n_iters}"),
        });
    }
    config.validate()?;
    let grids = config.grids()?;
    let init = config.initial_state(&grids);
    let mut stepper = PerturbationStepper::new(grids.clone(), config.formulation, config.dt, config.execution)?;
    let steps = config.steps();
    let bg = background_history(&mut stepper, &init.background, steps)?;
    let dx = grids.space.dx;
    let dt = config.dt;
    let form = config.formulation;

    // iterate 0 is constant in time
    let mut f_prev = vec![init.f.clone(); steps + 1];
    let mut phi_prev = vec![init.phi.clone(); steps + 1];
    let mut dphi_prev = vec![init.dphi.clone(); steps + 1];
    let mut differences = Vec::with_capacity(n_iters);
    let mut finals = Vec::with_capacity(n_iters);

    for _ in 0..n_iters {
        let mut f_new = Vec::with_capacity(steps + 1);
        let mut f = init.f.clone();
        f_new.push(f.clone());
        for k in 0..steps {
            let (phibar_mid, phibar_prime_mid) = bg.mids[k];
            let phi_mid: Vec<f64> = phi_prev[k]
                .iter()
                .zip(&phi_prev[k + 1])
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let fields = Fields::new(form, phibar_mid, &phi_mid, dx);
            stepper.kinetic(&mut f, &fields, phibar_prime_mid, &bg.stages[k])?;
            f_new.push(f.clone());
        }

        let source_at = |k: usize| -> Vec<f64> {
            let level = &bg.levels[k];
            let fields = Fields::new(form, level.phibar, &phi_prev[k], dx);
            operators::wave_source_into(config.execution, &grids, &fields, &f_new[k], &level.fbar)
        };
        let mut phi_new = Vec::with_capacity(steps + 1);
        let mut dphi_new = Vec::with_capacity(steps + 1);
        let (mut phi, mut dphi) = (init.phi.clone(), init.dphi.clone());
        phi_new.push(phi.clone());
        dphi_new.push(dphi.clone());
        for k in 0..steps {
            let mut calls = 0;
            wave_step(
                &mut phi,
                &mut dphi,
                |_| {
                    calls += 1;
                    source_at(if calls == 1 { k } else { k + 1 })
                },
                dt,
                dx,
            )?;
            phi_new.push(phi.clone());
            dphi_new.push(dphi.clone());
        }

        let d = (0..=steps)
            .map(|k| {
                distance(
                    &grids,
                    &f_new[k],
                    &f_prev[k],
                    &phi_new[k],
                    &phi_prev[k],
                    &dphi_new[k],
                    &dphi_prev[k],
                )
            })
            .fold(0.0, f64::max);
        differences.push(d);
        finals.push(PicardIterate {
            f: f_new[steps].clone(),
            phi: phi_new[steps].clone(),
            dphi: dphi_new[steps].clone(),
        });
        f_prev = f_new;
        phi_prev = phi_new;
        dphi_prev = dphi_new;
    }

    let ratios: Vec<f64> = differences
        .windows(2)
        .map(|w| if w[0] == 0.0 { f64::NAN } else { w[1] / w[0] })
        .collect();
    let diverged = ratios.len() >= 2 && ratios[ratios.len() - 2..].iter().all(|r| *r > 1.0);
    Ok(PicardReport {
        iterates: n_iters,
        differences,
        ratios,
        diverged,
        finals,
        background: bg.levels[steps].clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridKind;
    use crate::homogeneous::{GridSpec, HomogeneousConfig, InitialDatum, run_homogeneous};
    use crate::perturbation::PerturbationDatum;

    fn base() -> PerturbationConfig {
        PerturbationConfig {
            n_x: 16,
            momentum: GridSpec { kind: GridKind::Line1d, n: 128, domain_max: 8.0 },
            dt: 1e-2,
            t_end: 0.1,
            ..Default::default()
        }
    }

    #[test]
    fn zero_data_gives_zero_iterates() {
        let config = PerturbationConfig {
            background: InitialDatum::Zero,
            perturbation: PerturbationDatum::zero(),
            ..base()
        };
        let r = picard_iterate(&config, 4).unwrap();
        assert!(r.differences.iter().all(|d| *d == 0.0));
        assert!(!r.diverged);
    }

    #[test]
    fn background_matches_homogeneous_solver() {
        let config = PerturbationConfig { perturbation: PerturbationDatum::zero(), ..base() };
        let r = picard_iterate(&config, 3).unwrap();
        let h = run_homogeneous(&HomogeneousConfig {
            grid: config.momentum,
            dt: config.dt,
            t_end: config.t_end,
            sample_every: 1,
            ..Default::default()
        })
        .unwrap();
        let fin = &h.final_state;
        assert!((r.background.phibar - fin.phibar).abs() <= 1e-12);
        for it in &r.finals {
            assert!(it.f.iter().chain(&it.phi).all(|v| *v == 0.0));
        }
        let worst = r.background.fbar.iter().zip(&fin.fbar).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-12);
    }

    #[test]
    fn small_data_contracts() {
        let r = picard_iterate(&base(), 5).unwrap();
        for n in 0..3 {
            assert!(r.ratios[n] < 1.0, "{:?}", r.ratios);
        }
    }
}
