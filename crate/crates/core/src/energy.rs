//! Weighted energy and dissipation functionals of the 1x+1p perturbation
//! state, together with the inequality monitors built on them.
//!
//! Derivatives are second-order centred differences: periodic in `x`,
//! one-sided at the momentum truncation. Momentum orders stay below 4.

use serde::{Deserialize, Serialize};

use crate::deriv;
use crate::error::{Error, Result};
use crate::grid::MomentumGrid;
use crate::par::{self, Execution};
use crate::perturbation::{Formulation, PerturbationState, PhaseGrid};
use crate::selfsimilar::{check_lambda, effective_lambda};

pub const MAX_ORDER: usize = 4;

/// Momentum derivative orders are restricted to `n < 4`.
const MAX_P_ORDER: usize = 3;

/// Cached derivative table `∂_x^m ∂_p^n f` and `∂_p` of each entry.
pub struct Derivatives {
    k_max: usize,
    mixed: Vec<Option<Vec<f64>>>,
    grad: Vec<Option<Vec<f64>>>,
    /// `(‖∂_t ∂_x^m Φ‖^2, ‖∂_x^{m+1} Φ‖^2)` for `m ≤ K`.
    phi_terms: Vec<(f64, f64)>,
    phi_l2_sq: f64,
    /// `ψ(x_j)` entering `(e^{2ψ} + |p|^2)`.
    psi: Vec<f64>,
    phibar: f64,
    formulation: Formulation,
}

fn x_derivative(u: &[f64], n_x: usize, n_p: usize, dx: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * dx);
    let mut out = vec![0.0; u.len()];
    for j in 0..n_x {
        let jp = (j + 1) % n_x;
        let jm = (j + n_x - 1) % n_x;
        for i in 0..n_p {
            out[j * n_p + i] = (u[jp * n_p + i] - u[jm * n_p + i]) * inv;
        }
    }
    out
}

fn p_derivative(exec: Execution, grid: &MomentumGrid, u: &[f64]) -> Vec<f64> {
    let mut out = u.to_vec();
    par::for_each_row(exec, &mut out, grid.len(), |_, row| {
        let src = row.to_vec();
        deriv::momentum_d1(grid, &src, deriv::Parity::Even, row);
    });
    out
}

fn l2_sq(u: &[f64], dx: f64) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>() * dx
}

fn check_order(k_max: usize) -> Result<()> {
    if k_max > MAX_ORDER {
        return Err(Error::InvalidParameter {
            name: "k_max",
            reason: format!("at most {MAX_ORDER}, got {k_max}"),
        });
    }
    Ok(())
}

impl Derivatives {
    pub fn new(state: &PerturbationState, grids: &PhaseGrid, k_max: usize, formulation: Formulation, exec: Execution) -> Result<Self> {
        check_order(k_max)?;
        state.check(grids)?;
        let (n_x, n_p, dx) = (grids.n_x(), grids.n_p(), grids.space.dx);
        let slots = (k_max + 1) * (k_max + 1);
        let mut mixed = vec![None; slots];
        let mut grad = vec![None; slots];
        let mut pcol = state.f.clone();
        for n in 0..=k_max.min(MAX_P_ORDER) {
            if n > 0 {
                pcol = p_derivative(exec, &grids.momentum, &pcol);
            }
            let mut u = pcol.clone();
            for m in 0..=(k_max - n) {
                if m > 0 {
                    u = x_derivative(&u, n_x, n_p, dx);
                }
                grad[m * (k_max + 1) + n] = Some(p_derivative(exec, &grids.momentum, &u));
                mixed[m * (k_max + 1) + n] = Some(u.clone());
            }
        }
        let phi_terms = (0..=k_max)
            .map(|m| {
                let dt = deriv::periodic_dk(&state.dphi, dx, m);
                let dxp = deriv::periodic_dk(&state.phi, dx, m + 1);
                (l2_sq(&dt, dx), l2_sq(&dxp, dx))
            })
            .collect();
        let phibar = state.background.phibar;
        let psi = state
            .phi
            .iter()
            .map(|p| formulation.hamiltonian_field(phibar, *p))
            .collect();
        Ok(Self {
            k_max,
            mixed,
            grad,
            phi_terms,
            phi_l2_sq: l2_sq(&state.phi, dx),
            psi,
            phibar,
            formulation,
        })
    }

    fn slot(&self, m: usize, n: usize) -> usize {
        m * (self.k_max + 1) + n
    }

    /// Orders `(m, n)` with `m + n ≤ K`, `n < 4`.
    pub fn orders(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.k_max).flat_map(move |m| (0..=(self.k_max - m).min(MAX_P_ORDER)).map(move |n| (m, n)))
    }

    fn exponent(&self, gamma: f64, grids: &PhaseGrid) -> Result<f64> {
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be finite, got {gamma}"),
            });
        }
        match self.formulation {
            Formulation::Physical => Ok(gamma),
            Formulation::SelfSimilar => {
                check_lambda(gamma)?;
                Ok(effective_lambda(gamma, grids.momentum.dimension()))
            }
        }
    }

    fn phibar_weight(&self, m: usize, n: usize) -> f64 {
        match self.formulation {
            Formulation::Physical => ((m + 3 * n) as f64 * self.phibar).exp(),
            Formulation::SelfSimilar => 1.0,
        }
    }

    /// Weighted square of `∂_x^m ∂_p^n f`.
    pub fn kinetic_energy(&self, grids: &PhaseGrid, gamma: f64, m: usize, n: usize, exec: Execution) -> Result<f64> {
        let g = self.exponent(gamma, grids)?;
        let u = self.mixed[self.slot(m, n)].as_ref().expect("order within K");
        let n_p = grids.n_p();
        let mom = &grids.momentum;
        let s = par::sum_indices(exec, grids.n_x(), |j| {
            let e2 = (2.0 * self.psi[j]).exp();
            let row = &u[j * n_p..(j + 1) * n_p];
            row.iter()
                .zip(&mom.nodes)
                .zip(&mom.quad_weights)
                .map(|((v, p), w)| (e2 + p * p).powf(g) * w * v * v)
                .sum::<f64>()
        });
        Ok(self.phibar_weight(m, n) * s * grids.space.dx)
    }

    /// Dissipation integrand summed for `∂_x^m ∂_p^n f`. In one momentum
    /// dimension `e^{2ψ}|∂_p u|^2 + |p ∂_p u|^2 = (e^{2ψ} + p^2)|∂_p u|^2`.
    pub fn kinetic_dissipation(&self, grids: &PhaseGrid, gamma: f64, m: usize, n: usize, exec: Execution) -> Result<f64> {
        let g = self.exponent(gamma, grids)?;
        let v = self.grad[self.slot(m, n)].as_ref().expect("order within K");
        let n_p = grids.n_p();
        let mom = &grids.momentum;
        let s = par::sum_indices(exec, grids.n_x(), |j| {
            let e2 = (2.0 * self.psi[j]).exp();
            let pre = match self.formulation {
                Formulation::Physical => e2,
                Formulation::SelfSimilar => self.phibar.exp(),
            };
            let row = &v[j * n_p..(j + 1) * n_p];
            pre * row
                .iter()
                .zip(&mom.nodes)
                .zip(&mom.quad_weights)
                .map(|((d, p), w)| (e2 + p * p).powf(g + 0.5) * w * d * d)
                .sum::<f64>()
        });
        Ok(self.phibar_weight(m, n) * s * grids.space.dx)
    }

    /// `‖∂_t ∂_x^m Φ‖^2 + ‖∂_x^{m+1} Φ‖^2`, carrying `e^{φ̄}` at the top
    /// order `m = K ≥ 1` of the physical family.
    pub fn phi_energy(&self, m: usize) -> f64 {
        let (a, b) = self.phi_terms[m];
        let w = if self.formulation == Formulation::Physical && m == self.k_max && m >= 1 {
            self.phibar.exp()
        } else {
            1.0
        };
        w * (a + b)
    }

    pub fn phi_l2_sq(&self) -> f64 {
        self.phi_l2_sq
    }
}

fn kinetic_sum(d: &Derivatives, grids: &PhaseGrid, gamma: f64, min_order: usize, exec: Execution) -> Result<f64> {
    let mut total = 0.0;
    for (m, n) in d.orders().filter(|(m, n)| m + n >= min_order).collect::<Vec<_>>() {
        total += d.kinetic_energy(grids, gamma, m, n, exec)?;
    }
    Ok(total)
}

fn dissipation_sum(d: &Derivatives, grids: &PhaseGrid, gamma: f64, exec: Execution) -> Result<f64> {
    let mut total = 0.0;
    for (m, n) in d.orders().collect::<Vec<_>>() {
        total += d.kinetic_dissipation(grids, gamma, m, n, exec)?;
    }
    Ok(total)
}

/// `E^γ` (physical) or `Ẽ^λ` (self-similar, `gamma` read as `λ`).
pub fn weighted_energy(state: &PerturbationState, grids: &PhaseGrid, gamma: f64, k_max: usize, formulation: Formulation) -> Result<f64> {
    let exec = Execution::default();
    let d = Derivatives::new(state, grids, k_max, formulation, exec)?;
    let phi: f64 = (0..=k_max).map(|m| d.phi_energy(m)).sum();
    Ok(kinetic_sum(&d, grids, gamma, 0, exec)? + phi)
}

/// `D^γ` or `D̃^λ`.
pub fn dissipation_rate(state: &PerturbationState, grids: &PhaseGrid, gamma: f64, k_max: usize, formulation: Formulation) -> Result<f64> {
    let exec = Execution::default();
    let d = Derivatives::new(state, grids, k_max, formulation, exec)?;
    dissipation_sum(&d, grids, gamma, exec)
}

/// `D̄^γ`: `D^γ` plus the kinetic energy terms of order at least one.
pub fn enhanced_dissipation(state: &PerturbationState, grids: &PhaseGrid, gamma: f64, k_max: usize, formulation: Formulation) -> Result<f64> {
    let exec = Execution::default();
    let d = Derivatives::new(state, grids, k_max, formulation, exec)?;
    Ok(dissipation_sum(&d, grids, gamma, exec)? + kinetic_sum(&d, grids, gamma, 1, exec)?)
}

/// Kinetic part of `Ẽ^λ` at order zero, evaluated on a physical state by the
/// change of variables `p = e^{φ̄} q`, `g(x, q) = e^{dφ̄} f(x, e^{φ̄} q)`:
/// `∫∫ (e^{2Φ} + e^{-2φ̄} |p|^2)^{λ_eff} e^{dφ̄} |f|^2 dx dp`.
pub fn tilde_energy_from_physical(state: &PerturbationState, grids: &PhaseGrid, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    state.check(grids)?;
    let d = grids.momentum.dimension();
    let l = effective_lambda(lambda, d);
    let phibar = state.background.phibar;
    let inv = (-2.0 * phibar).exp();
    let n_p = grids.n_p();
    let mom = &grids.momentum;
    let mut total = 0.0;
    for (j, big_phi) in state.phi.iter().enumerate() {
        let e2 = (2.0 * big_phi).exp();
        total += state.f[j * n_p..(j + 1) * n_p]
            .iter()
            .zip(&mom.nodes)
            .zip(&mom.quad_weights)
            .map(|((v, p), w)| (e2 + inv * p * p).powf(l) * w * v * v)
            .sum::<f64>();
    }
    Ok((d as f64 * phibar).exp() * total * grids.space.dx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFunctionals {
    pub gamma: f64,
    pub energy: f64,
    /// Kinetic part of `energy`.
    pub energy_f: f64,
    pub dissipation: f64,
    pub enhanced: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFunctionals {
    pub gamma: f64,
    pub m: usize,
    pub n: usize,
    pub energy: f64,
    pub dissipation: f64,
    pub enhanced: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiNorms {
    pub order: usize,
    pub dt_sq: f64,
    pub grad_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub phibar: f64,
    pub formulation: Formulation,
    pub k_max: usize,
    pub gammas: Vec<GammaFunctionals>,
    pub orders: Vec<OrderFunctionals>,
    pub phi_l2_sq: f64,
    pub phi_norms: Vec<PhiNorms>,
}

impl EnergyReport {
    pub fn compute(
        state: &PerturbationState,
        grids: &PhaseGrid,
        gammas: &[f64],
        k_max: usize,
        formulation: Formulation,
        exec: Execution,
    ) -> Result<Self> {
        let d = Derivatives::new(state, grids, k_max, formulation, exec)?;
        let phi_total: f64 = (0..=k_max).map(|m| d.phi_energy(m)).sum();
        let mut per_gamma = Vec::with_capacity(gammas.len());
        let mut orders = Vec::new();
        for &gamma in gammas {
            let mut energy_f = 0.0;
            let mut higher = 0.0;
            let mut dissipation = 0.0;
            for (m, n) in d.orders().collect::<Vec<_>>() {
                let e = d.kinetic_energy(grids, gamma, m, n, exec)?;
                let diss = d.kinetic_dissipation(grids, gamma, m, n, exec)?;
                energy_f += e;
                if m + n >= 1 {
                    higher += e;
                }
                dissipation += diss;
                let top = if formulation == Formulation::Physical && m == k_max && m >= 1 {
                    state.background.phibar.exp()
                } else {
                    1.0
                };
                let (a, b) = d.phi_terms[m];
                orders.push(OrderFunctionals {
                    gamma,
                    m,
                    n,
                    energy: e + top * (a + b),
                    dissipation: diss,
                    enhanced: diss + e,
                });
            }
            per_gamma.push(GammaFunctionals {
                gamma,
                energy: energy_f + phi_total,
                energy_f,
                dissipation,
                enhanced: dissipation + higher,
            });
        }
        Ok(Self {
            t: state.t,
            phibar: state.background.phibar,
            formulation,
            k_max,
            gammas: per_gamma,
            orders,
            phi_l2_sq: d.phi_l2_sq,
            phi_norms: d
                .phi_terms
                .iter()
                .enumerate()
                .map(|(order, (a, b))| PhiNorms { order, dt_sq: *a, grad_sq: *b })
                .collect(),
        })
    }

    pub fn gamma(&self, gamma: f64) -> Option<&GammaFunctionals> {
        self.gammas.iter().find(|g| g.gamma == gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCheck {
    /// `∫ f / sqrt(e^{2φ} + |p|^2) dp`.
    pub lhs: f64,
    /// `‖(e^{2φ} + |p|^2)^{δ_k/2} f‖_{L^2_p}` for `k = 1, 2`.
    pub rhs: (f64, f64),
}

impl SplitCheck {
    /// `lhs / (rhs.0 + rhs.1)`; `None` for `f ≡ 0`.
    pub fn ratio(&self) -> Option<f64> {
        let d = self.rhs.0 + self.rhs.1;
        (d > 0.0).then(|| self.lhs / d)
    }
}

/// Both sides of the momentum-singularity splitting for one column.
pub fn singular_split_check(grid: &MomentumGrid, f_col: &[f64], phi: f64, d1: f64, d2: f64) -> Result<SplitCheck> {
    grid.check_len(f_col)?;
    if !(d1 > 0.0 && d1 < 0.5) {
        return Err(Error::InvalidParameter {
            name: "d1",
            reason: format!("must lie in (0, 1/2), got {d1}"),
        });
    }
    if !(d2 > 0.5 && d2.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "d2",
            reason: format!("must exceed 1/2, got {d2}"),
        });
    }
    let e2 = (2.0 * phi).exp();
    let mut lhs = 0.0;
    let (mut r1, mut r2) = (0.0, 0.0);
    for ((p, w), f) in grid.nodes.iter().zip(&grid.quad_weights).zip(f_col) {
        let s = e2 + p * p;
        lhs += w * f / s.sqrt();
        r1 += w * s.powf(d1) * f * f;
        r2 += w * s.powf(d2) * f * f;
    }
    Ok(SplitCheck { lhs, rhs: (r1.sqrt(), r2.sqrt()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiSample {
    pub t: f64,
    pub phi_l2_sq: f64,
    pub dphi_l2_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiBoundReport {
    /// `2‖Φ_0‖^2 + 2t∫_0^t ‖∂_sΦ‖^2 ds - ‖Φ(t)‖^2` per sample.
    pub slack: Vec<f64>,
    pub min_slack: f64,
    /// Same with both factors 2 replaced by 1.
    pub min_slack_factor_one: f64,
    pub factor_one_holds: bool,
}

/// `‖Φ(t)‖^2 ≤ 2‖Φ_0‖^2 + 2t ∫_0^t ‖∂_sΦ‖^2 ds` with the time integral by
/// the trapezoid rule over the recorded samples.
pub fn phi_l2_bound_check(trajectory: &[PhiSample]) -> Result<PhiBoundReport> {
    let first = trajectory
        .first()
        .ok_or_else(|| Error::TooShort("empty trajectory".into()))?;
    let mut integral = 0.0;
    let mut slack = Vec::with_capacity(trajectory.len());
    let mut min_one = f64::INFINITY;
    for (k, s) in trajectory.iter().enumerate() {
        if k > 0 {
            let prev = &trajectory[k - 1];
            integral += 0.5 * (s.t - prev.t) * (s.dphi_l2_sq + prev.dphi_l2_sq);
        }
        let tau = s.t - first.t;
        slack.push(2.0 * first.phi_l2_sq + 2.0 * tau * integral - s.phi_l2_sq);
        min_one = min_one.min(first.phi_l2_sq + tau * integral - s.phi_l2_sq);
    }
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PhiBoundReport {
        slack,
        min_slack,
        min_slack_factor_one: min_one,
        factor_one_holds: min_one >= 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    /// `sup_t` of `ratios`; `None` when the denominator vanishes.
    pub c_fit: Option<f64>,
    pub ratios: Vec<f64>,
    /// Self-similar only: kinetic `Ẽ^λ` over `e^{½φ̄(3/2-λ)}`, per sample.
    pub decay_ratios: Vec<f64>,
}

/// Empirical constant of the energy-dissipation bound.
///
/// Physical reports: `[Σ_γ E^γ(t) + ∫_0^t Σ_γ D̄^γ] / [E^{γ_max}(0) + ‖Φ_0‖^2]`.
/// Self-similar reports (one `λ`): `[Ẽ^λ(t) + ∫_0^t D̃^λ] / [Ẽ^λ(0) + ‖Φ_0‖^2]`.
pub fn dissipation_budget(trajectory: &[EnergyReport], gammas: &[f64]) -> Result<BudgetReport> {
    let first = trajectory
        .first()
        .ok_or_else(|| Error::TooShort("empty trajectory".into()))?;
    if gammas.is_empty() {
        return Err(Error::InvalidParameter { name: "gammas", reason: "empty list".into() });
    }
    let lookup = |r: &EnergyReport, g: f64| -> Result<GammaFunctionals> {
        r.gamma(g).cloned().ok_or(Error::InvalidParameter {
            name: "gammas",
            reason: format!("report at t = {} lacks gamma = {g}", r.t),
        })
    };
    let selfsimilar = first.formulation == Formulation::SelfSimilar;
    let g_max = gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom = lookup(first, g_max)?.energy + first.phi_l2_sq;

    let mut integral = 0.0;
    let mut prev_rate: Option<(f64, f64)> = None;
    let mut ratios = Vec::with_capacity(trajectory.len());
    let mut decay_ratios = Vec::new();
    for r in trajectory {
        let mut energy = 0.0;
        let mut rate = 0.0;
        for &g in gammas {
            let e = lookup(r, g)?;
            energy += e.energy;
            rate += if selfsimilar { e.dissipation } else { e.enhanced };
        }
        if let Some((t0, r0)) = prev_rate {
            integral += 0.5 * (r.t - t0) * (rate + r0);
        }
        prev_rate = Some((r.t, rate));
        ratios.push((energy + integral) / denom);
        if selfsimilar {
            let lambda = gammas[0];
            let e = lookup(r, lambda)?;
            decay_ratios.push(e.energy_f / (0.5 * r.phibar * (1.5 - lambda)).exp());
        }
    }
    let c_fit = if denom > 0.0 {
        Some(ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    } else {
        None
    };
    Ok(BudgetReport { c_fit, ratios, decay_ratios })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingSample {
    pub t: f64,
    pub phibar: f64,
    pub phibar_prime: f64,
    /// `∫∫ |∂_x f|^2 dx dp`.
    pub grad_x_sq: f64,
    /// `∂_x f` on the phase grid.
    pub grad_x: Vec<f64>,
}

impl DampingSample {
    pub fn of(state: &PerturbationState, grids: &PhaseGrid) -> Self {
        let grad_x = x_derivative(&state.f, grids.n_x(), grids.n_p(), grids.space.dx);
        let sq: Vec<f64> = grad_x.iter().map(|v| v * v).collect();
        Self {
            t: state.t,
            phibar: state.background.phibar,
            phibar_prime: state.background.phibar_prime,
            grad_x_sq: grids.integrate(&sq),
            grad_x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingResidual {
    pub t: f64,
    /// `∫∫ ∂_t ∂_x f · e^{φ̄} ∂_x f`.
    pub lhs: f64,
    /// `½ d/dt ∫∫ e^{φ̄} |∂_x f|^2 - ½ φ̄' ∫∫ e^{φ̄} |∂_x f|^2`.
    pub rhs: f64,
    pub residual: f64,
}

/// Midpoint discretisation of the damping identity between two samples.
pub fn damping_identity_residual(a: &DampingSample, b: &DampingSample, grids: &PhaseGrid) -> Result<DampingResidual> {
    grids.check_phase(&a.grad_x)?;
    grids.check_phase(&b.grad_x)?;
    let h = b.t - a.t;
    if h <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "samples must be strictly increasing in time".into(),
        });
    }
    let phibar = 0.5 * (a.phibar + b.phibar);
    let phibar_prime = 0.5 * (a.phibar_prime + b.phibar_prime);
    let w = phibar.exp();
    let prod: Vec<f64> = a
        .grad_x
        .iter()
        .zip(&b.grad_x)
        .map(|(u0, u1)| (u1 - u0) / h * 0.5 * (u0 + u1))
        .collect();
    let lhs = w * grids.integrate(&prod);
    let mid = 0.5 * (a.grad_x_sq + b.grad_x_sq);
    let rhs = 0.5 * (b.phibar.exp() * b.grad_x_sq - a.phibar.exp() * a.grad_x_sq) / h
        - 0.5 * phibar_prime * w * mid;
    Ok(DampingResidual { t: 0.5 * (a.t + b.t), lhs, rhs, residual: lhs - rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridKind, SpaceGrid};
    use crate::homogeneous::{GridSpec, HomogeneousState};
    use crate::relkin::dissipation_quadratic_form;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grids(n_x: usize, n_p: usize) -> PhaseGrid {
        PhaseGrid::new(
            SpaceGrid::new(n_x, 2.0 * std::f64::consts::PI).unwrap(),
            MomentumGrid::line1d(n_p, 6.0).unwrap(),
        )
        .unwrap()
    }

    fn state(g: &PhaseGrid, phibar: f64, seed: u64) -> PerturbationState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_x, n_p) = (g.n_x(), g.n_p());
        let xs = g.space.nodes();
        let mut f = vec![0.0; n_x * n_p];
        let modes: Vec<(f64, f64)> = (0..3).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..6.0))).collect();
        for j in 0..n_x {
            for i in 0..n_p {
                let p = g.momentum.nodes[i];
                f[j * n_p + i] = modes
                    .iter()
                    .enumerate()
                    .map(|(k, (a, s))| a * ((k + 1) as f64 * xs[j] + s).cos() * (-(p - 0.3 * k as f64).powi(2)).exp())
                    .sum();
            }
        }
        let phi = xs.iter().map(|x| 0.1 * (x + rng.random_range(0.0..1.0)).sin()).collect();
        let dphi = xs.iter().map(|x| 0.05 * (2.0 * x).cos()).collect();
        PerturbationState {
            t: 0.0,
            f,
            phi,
            dphi,
            background: HomogeneousState {
                t: 0.0,
                phibar,
                phibar_prime: -0.5,
                fbar: vec![0.0; n_p],
            },
        }
    }

    fn scaled(s: &PerturbationState, c: f64) -> PerturbationState {
        let mut out = s.clone();
        for v in out.f.iter_mut().chain(out.phi.iter_mut()).chain(out.dphi.iter_mut()) {
            *v *= c;
        }
        out
    }

    #[test]
    fn zero_state_vanishes() {
        let g = grids(16, 64);
        let mut s = state(&g, -0.3, 1);
        s = scaled(&s, 0.0);
        for form in [Formulation::Physical, Formulation::SelfSimilar] {
            assert_eq!(weighted_energy(&s, &g, 1.0, 2, form).unwrap(), 0.0);
            assert_eq!(dissipation_rate(&s, &g, 1.0, 2, form).unwrap(), 0.0);
            assert_eq!(enhanced_dissipation(&s, &g, 1.0, 2, form).unwrap(), 0.0);
        }
    }

    #[test]
    fn quadratically_homogeneous_for_zero_field() {
        let g = grids(16, 64);
        let mut s = state(&g, -0.3, 2);
        s.phi.iter_mut().for_each(|v| *v = 0.0);
        for form in [Formulation::Physical, Formulation::SelfSimilar] {
            let e = weighted_energy(&s, &g, 1.0, 2, form).unwrap();
            let e3 = weighted_energy(&scaled(&s, 3.0), &g, 1.0, 2, form).unwrap();
            assert!((e3 - 9.0 * e).abs() <= 1e-12 * e3);
        }
    }

    #[test]
    fn single_mode_matches_fine_summation() {
        // f = cos(x) e^{-p^2}, Φ = 0, φ̄ = 0, γ = 1, K = 0
        let value = |n_x: usize, n_p: usize| {
            let g = grids(n_x, n_p);
            let xs = g.space.nodes();
            let mut s = state(&g, 0.0, 0);
            s.phi = vec![0.0; n_x];
            s.dphi = vec![0.0; n_x];
            for j in 0..n_x {
                for i in 0..n_p {
                    let p = g.momentum.nodes[i];
                    s.f[j * n_p + i] = xs[j].cos() * (-p * p).exp();
                }
            }
            weighted_energy(&s, &g, 1.0, 0, Formulation::Physical).unwrap()
        };
        let coarse = value(16, 96);
        let mut fine = 0.0;
        let (n_x, n_p) = (160, 960);
        let dx = 2.0 * std::f64::consts::PI / n_x as f64;
        let dp = 12.0 / n_p as f64;
        for j in 0..n_x {
            let c = (j as f64 * dx).cos();
            for i in 0..n_p {
                let p = -6.0 + (i as f64 + 0.5) * dp;
                fine += dx * dp * (1.0 + p * p) * c * c * (-2.0 * p * p).exp();
            }
        }
        assert!((coarse - fine).abs() <= 1e-10 * fine, "{coarse} {fine}");
    }

    #[test]
    fn p_constant_has_no_dissipation() {
        let g = grids(8, 32);
        let mut s = state(&g, -0.2, 3);
        let n_p = g.n_p();
        for j in 0..g.n_x() {
            for i in 0..n_p {
                s.f[j * n_p + i] = (j as f64).sin();
            }
        }
        assert!(dissipation_rate(&s, &g, 0.75, 0, Formulation::Physical).unwrap() <= 1e-24);
    }

    #[test]
    fn dissipation_matches_quadratic_form_path() {
        let g = grids(12, 48);
        for (seed, form) in [(5, Formulation::Physical), (6, Formulation::SelfSimilar)] {
            let s = state(&g, -0.4, seed);
            let gamma = 0.8;
            let k_max = 2;
            let direct = dissipation_rate(&s, &g, gamma, k_max, form).unwrap();
            // independent path: build each derivative by repeated stencils and
            // evaluate the matrix quadratic form pointwise
            let (n_x, n_p, dx) = (g.n_x(), g.n_p(), g.space.dx);
            let lam = match form {
                Formulation::Physical => gamma,
                Formulation::SelfSimilar => effective_lambda(gamma, 1),
            };
            let mut oracle = 0.0;
            for m in 0..=k_max {
                for n in 0..=(k_max - m) {
                    let mut u = s.f.clone();
                    for _ in 0..m {
                        let mut next = vec![0.0; u.len()];
                        for i in 0..n_p {
                            let col: Vec<f64> = (0..n_x).map(|j| u[j * n_p + i]).collect();
                            let d = deriv::periodic_dk(&col, dx, 1);
                            for j in 0..n_x {
                                next[j * n_p + i] = d[j];
                            }
                        }
                        u = next;
                    }
                    for j in 0..n_x {
                        let row = deriv::momentum_dk(&g.momentum, &u[j * n_p..(j + 1) * n_p], n + 1);
                        let psi = form.hamiltonian_field(s.background.phibar, s.phi[j]);
                        let e2 = (2.0 * psi).exp();
                        let pre = match form {
                            Formulation::Physical => ((m + 3 * n) as f64 * s.background.phibar + 2.0 * psi).exp(),
                            Formulation::SelfSimilar => s.background.phibar.exp(),
                        };
                        for i in 0..n_p {
                            let p = g.momentum.nodes[i];
                            let q = dissipation_quadratic_form(psi, &[p], &[row[i]]).unwrap().matrix_form;
                            oracle += dx * g.momentum.quad_weights[i] * pre * (e2 + p * p).powf(lam) * q;
                        }
                    }
                }
            }
            assert!((direct - oracle).abs() <= 1e-12 * oracle, "{direct} {oracle}");
        }
    }

    #[test]
    fn enhanced_minus_plain_is_higher_order_energy() {
        let g = grids(12, 48);
        let s = state(&g, -0.4, 7);
        let gamma = 0.3;
        assert_eq!(
            enhanced_dissipation(&s, &g, gamma, 0, Formulation::Physical).unwrap(),
            dissipation_rate(&s, &g, gamma, 0, Formulation::Physical).unwrap()
        );
        let k = 3;
        let diff = enhanced_dissipation(&s, &g, gamma, k, Formulation::Physical).unwrap()
            - dissipation_rate(&s, &g, gamma, k, Formulation::Physical).unwrap();
        let r = EnergyReport::compute(&s, &g, &[gamma], k, Formulation::Physical, Execution::Sequential).unwrap();
        let phi_sum: f64 = (0..=k).map(|m| {
            let top = if m == k { s.background.phibar.exp() } else { 1.0 };
            top * (r.phi_norms[m].dt_sq + r.phi_norms[m].grad_sq)
        }).sum();
        // E_{m,n} carries the Φ terms of order m once per n
        let order_sum: f64 = r.orders.iter().filter(|o| o.m + o.n >= 1).map(|o| {
            let top = if o.m == k { s.background.phibar.exp() } else { 1.0 };
            o.energy - top * (r.phi_norms[o.m].dt_sq + r.phi_norms[o.m].grad_sq)
        }).sum();
        assert!(diff > 0.0);
        assert!((diff - order_sum).abs() <= 1e-12 * diff);
        let e = weighted_energy(&s, &g, gamma, k, Formulation::Physical).unwrap();
        assert!((r.gammas[0].energy - e).abs() <= 1e-12 * e);
        assert!((r.gammas[0].energy_f + phi_sum - e).abs() <= 1e-12 * e);
    }

    #[test]
    fn modes_agree_bitwise() {
        let g = grids(16, 64);
        let s = state(&g, -0.1, 8);
        let a = EnergyReport::compute(&s, &g, &[0.25, 1.0], 2, Formulation::Physical, Execution::Sequential).unwrap();
        let b = EnergyReport::compute(&s, &g, &[0.25, 1.0], 2, Formulation::Physical, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_excess_order_and_bad_lambda() {
        let g = grids(8, 16);
        let s = state(&g, 0.0, 9);
        assert!(weighted_energy(&s, &g, 1.0, 5, Formulation::Physical).is_err());
        assert!(weighted_energy(&s, &g, 2.0, 1, Formulation::SelfSimilar).is_err());
    }

    #[test]
    fn split_check_trivia_and_phi_sweep() {
        let grid = GridSpec { kind: GridKind::Radial3d, n: 512, domain_max: 8.0 }.build().unwrap();
        let zero = vec![0.0; grid.len()];
        let z = singular_split_check(&grid, &zero, -1.0, 0.25, 1.0).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, (0.0, 0.0)));
        assert!(z.ratio().is_none());
        let f: Vec<f64> = grid.nodes.iter().map(|p| (-p * p).exp()).collect();
        let base = singular_split_check(&grid, &f, -2.0, 0.25, 1.0).unwrap().ratio().unwrap();
        let f3: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let r3 = singular_split_check(&grid, &f3, -2.0, 0.25, 1.0).unwrap().ratio().unwrap();
        assert!((base - r3).abs() <= 1e-14 * base);
        // the ratio saturates as e^{2φ} -> 0
        let ratios: Vec<f64> = (0..=8)
            .map(|k| -6.0 + 0.25 * k as f64)
            .map(|phi| singular_split_check(&grid, &f, phi, 0.25, 1.0).unwrap().ratio().unwrap())
            .collect();
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max <= 1.01 * min, "{min} {max}");
        assert!(singular_split_check(&grid, &f, 0.0, 0.5, 1.0).is_err());
        assert!(singular_split_check(&grid, &f, 0.0, 0.25, 0.5).is_err());
    }

    #[test]
    fn phi_bound_examples() {
        let constant: Vec<PhiSample> = (0..10)
            .map(|k| PhiSample { t: k as f64 * 0.1, phi_l2_sq: 2.0, dphi_l2_sq: 0.0 })
            .collect();
        let r = phi_l2_bound_check(&constant).unwrap();
        assert!(r.slack.iter().all(|s| (s - 2.0).abs() < 1e-15));
        // Φ = tψ with ‖ψ‖^2 = 1
        let linear: Vec<PhiSample> = (0..10)
            .map(|k| {
                let t = k as f64 * 0.1;
                PhiSample { t, phi_l2_sq: t * t, dphi_l2_sq: 1.0 }
            })
            .collect();
        let r = phi_l2_bound_check(&linear).unwrap();
        for (s, sample) in r.slack.iter().zip(&linear) {
            assert!((s - sample.t * sample.t).abs() < 1e-14);
        }
        assert!(r.factor_one_holds);
    }

    #[test]
    fn budget_is_scale_invariant_and_flags_zero_data() {
        let g = grids(8, 32);
        // Φ enters the weights, so only f and ∂_tΦ are scaled
        let mut s = state(&g, -0.1, 10);
        s.phi.iter_mut().for_each(|v| *v = 0.0);
        let mut traj = Vec::new();
        let mut scaled_traj = Vec::new();
        for k in 0..4 {
            let mut t = scaled(&s, 1.0 / (1.0 + k as f64));
            t.t = k as f64 * 0.1;
            traj.push(EnergyReport::compute(&t, &g, &[0.25, 1.0], 1, Formulation::Physical, Execution::Sequential).unwrap());
            scaled_traj.push(EnergyReport::compute(&scaled(&t, 5.0), &g, &[0.25, 1.0], 1, Formulation::Physical, Execution::Sequential).unwrap());
        }
        let a = dissipation_budget(&traj, &[0.25, 1.0]).unwrap().c_fit.unwrap();
        let b = dissipation_budget(&scaled_traj, &[0.25, 1.0]).unwrap().c_fit.unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
        let zero = EnergyReport::compute(&scaled(&s, 0.0), &g, &[0.25, 1.0], 1, Formulation::Physical, Execution::Sequential).unwrap();
        assert!(dissipation_budget(&[zero], &[0.25, 1.0]).unwrap().c_fit.is_none());
    }

    #[test]
    fn tilde_energy_agrees_with_mapped_state() {
        let g = grids(8, 512);
        let mut s = state(&g, -0.7, 12);
        let n_p = g.n_p();
        // compact momentum profile so the q image stays on the grid
        for j in 0..g.n_x() {
            for i in 0..n_p {
                let p = g.momentum.nodes[i];
                s.f[j * n_p + i] = (1.0 + 0.3 * (j as f64).cos()) * (-4.0 * p * p).exp();
            }
        }
        let direct = tilde_energy_from_physical(&s, &g, 1.0).unwrap();
        let phibar = s.background.phibar;
        let mut mapped = s.clone();
        for j in 0..g.n_x() {
            let row = crate::selfsimilar::selfsimilar_forward(s.row(&g, j), phibar, &g.momentum, &g.momentum).unwrap();
            mapped.f[j * n_p..(j + 1) * n_p].copy_from_slice(&row);
        }
        let d = Derivatives::new(&mapped, &g, 0, Formulation::SelfSimilar, Execution::Sequential).unwrap();
        let via_g = d.kinetic_energy(&g, 1.0, 0, 0, Execution::Sequential).unwrap();
        assert!((direct - via_g).abs() <= 1e-6 * direct, "{direct} {via_g}");
    }

    #[test]
    fn damping_residual_is_second_order() {
        let g = grids(32, 64);
        let s0 = state(&g, 0.0, 11);
        let sample = |t: f64| {
            let mut s = s0.clone();
            s.t = t;
            s.background.phibar = -t;
            s.background.phibar_prime = -1.0;
            for v in s.f.iter_mut() {
                *v *= (-0.7 * t).exp() * (1.0 + 0.3 * t.sin());
            }
            DampingSample::of(&s, &g)
        };
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|h| damping_identity_residual(&sample(0.5 - h / 2.0), &sample(0.5 + h / 2.0), &g).unwrap().residual.abs())
            .collect();
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }
}
