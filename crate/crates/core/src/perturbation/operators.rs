//! Phase-space operators of the perturbation system.
//!
//! Transport is written in conservative Hamiltonian form
//! `T(u) = ∂_x(a u) - ∂_p(b u)` with `a = p / H`, `b = e^{2ψ} ∂_xΦ / H`,
//! `H = sqrt(e^{2ψ} + p^2)`; since `∂_x a = ∂_p b` this equals the advective
//! form, and the discrete version telescopes in both directions.

use crate::deriv;
use crate::diffusion;
use crate::error::Result;
use crate::homogeneous::HomogeneousState;
use crate::par::{self, Execution};

use super::{Formulation, PhaseGrid};

/// Face reconstruction used by the transport operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Recon {
    /// Third-order upwind-biased (`κ = 1/3`) faces.
    Upwind,
    /// Arithmetic mean of the neighbours.
    Central,
}

/// Per-`x` coefficient data derived from `(φ̄, Φ)`.
#[derive(Debug, Clone)]
pub(crate) struct Fields {
    /// `e^{2ψ_j}`.
    pub e2: Vec<f64>,
    /// `e^{ψ_j + ψ_{j+1}}` on the face `j + 1/2`.
    pub e2_face: Vec<f64>,
    /// Centred `∂_xΦ`.
    pub dphi_dx: Vec<f64>,
    /// Diffusion / stress prefactor per `x`.
    pub pref: Vec<f64>,
    /// Background prefactor and `e^{2ψ}` at `Φ = 0`.
    pub pref_bg: f64,
    pub e2_bg: f64,
}

impl Fields {
    pub fn new(form: Formulation, phibar: f64, phi: &[f64], dx: f64) -> Self {
        let n = phi.len();
        let psi: Vec<f64> = phi.iter().map(|&v| form.hamiltonian_field(phibar, v)).collect();
        let e2 = psi.iter().map(|v| (2.0 * v).exp()).collect();
        let e2_face = (0..n).map(|j| (psi[j] + psi[(j + 1) % n]).exp()).collect();
        let mut dphi_dx = vec![0.0; n];
        deriv::periodic_d1(phi, dx, &mut dphi_dx);
        Self {
            e2,
            e2_face,
            dphi_dx,
            pref: phi.iter().map(|&v| form.prefactor(phibar, v)).collect(),
            pref_bg: form.prefactor(phibar, 0.0),
            e2_bg: (2.0 * form.hamiltonian_field(phibar, 0.0)).exp(),
        }
    }
}

#[inline]
fn face_value(recon: Recon, v: f64, um: f64, u0: f64, u1: f64, u2: f64) -> f64 {
    // face between u0 and u1; um and u2 are the outer neighbours
    match recon {
        Recon::Central => 0.5 * (u0 + u1),
        Recon::Upwind => {
            if v >= 0.0 {
                (-um + 5.0 * u0 + 2.0 * u1) / 6.0
            } else {
                (2.0 * u0 + 5.0 * u1 - u2) / 6.0
            }
        }
    }
}

/// `out = T_h(u)`.
pub(crate) fn transport_into(
    exec: Execution,
    grids: &PhaseGrid,
    fields: &Fields,
    u: &[f64],
    recon: Recon,
    out: &mut [f64],
) {
    let nx = grids.n_x();
    let np = grids.n_p();
    let p = &grids.momentum.nodes;
    let pf = grids.momentum.faces();
    let dx = grids.space.dx;
    let dp = grids.momentum.cell_width;
    let row = |j: usize| &u[j * np..(j + 1) * np];

    let mut flux_x = vec![0.0; nx * np];
    par::for_each_row(exec, &mut flux_x, np, |j, fl| {
        let (um, u0, u1, u2) = (
            row((j + nx - 1) % nx),
            row(j),
            row((j + 1) % nx),
            row((j + 2) % nx),
        );
        let e = fields.e2_face[j];
        for i in 0..np {
            let a = p[i] / (e + p[i] * p[i]).sqrt();
            fl[i] = a * face_value(recon, a, um[i], u0[i], u1[i], u2[i]);
        }
    });

    par::for_each_row(exec, out, np, |j, o| {
        let ur = row(j);
        let left = &flux_x[((j + nx - 1) % nx) * np..((j + nx - 1) % nx + 1) * np];
        let right = &flux_x[j * np..(j + 1) * np];
        let e = fields.e2[j];
        let g = fields.dphi_dx[j];
        let at = |i: isize| -> f64 {
            if i < 0 || i >= np as isize {
                0.0
            } else {
                ur[i as usize]
            }
        };
        let mut prev = 0.0;
        for i in 0..np {
            let next = if i + 1 < np {
                let v = if g == 0.0 { 0.0 } else { -e * g / (e + pf[i] * pf[i]).sqrt() };
                let k = i as isize;
                v * face_value(recon, v, at(k - 1), at(k), at(k + 1), at(k + 2))
            } else {
                0.0
            };
            o[i] = (right[i] - left[i]) / dx + (next - prev) / dp;
            prev = next;
        }
    });
}

/// Broadcast of a momentum profile to every `x` row.
pub(crate) fn broadcast(grids: &PhaseGrid, profile: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grids.len());
    for _ in 0..grids.n_x() {
        out.extend_from_slice(profile);
    }
    out
}

/// Transport term `T_h(f)` with `κ = 1/3` upwind-biased faces.
pub fn transport_apply(
    f: &[f64],
    phibar: f64,
    phi: &[f64],
    grids: &PhaseGrid,
    formulation: Formulation,
) -> Result<Vec<f64>> {
    grids.check_phase(f)?;
    grids.check_space(phi)?;
    let fields = Fields::new(formulation, phibar, phi, grids.space.dx);
    let mut out = vec![0.0; f.len()];
    transport_into(Execution::default(), grids, &fields, f, Recon::Upwind, &mut out);
    Ok(out)
}

pub(crate) fn diffusion_into(exec: Execution, grids: &PhaseGrid, fields: &Fields, u: &[f64], out: &mut [f64]) {
    let np = grids.n_p();
    let g = &grids.momentum;
    par::for_each_row(exec, out, np, |j, o| {
        let kappa = diffusion::face_kappa_vec(g, fields.pref[j], fields.e2[j]);
        diffusion::apply(g, &kappa, &u[j * np..(j + 1) * np], o);
    });
}

/// Column-wise `pref(x) ∂_p(sqrt(e^{2ψ(x)} + p^2) ∂_p f)` in flux form.
pub fn fp_apply_perturbed(
    f: &[f64],
    phibar: f64,
    phi: &[f64],
    grids: &PhaseGrid,
    formulation: Formulation,
) -> Result<Vec<f64>> {
    grids.check_phase(f)?;
    grids.check_space(phi)?;
    let fields = Fields::new(formulation, phibar, phi, grids.space.dx);
    let mut out = vec![0.0; f.len()];
    diffusion_into(Execution::default(), grids, &fields, f, &mut out);
    Ok(out)
}

/// Forcing `-T_h(F̄)` (central faces) plus the background commutator
/// `(L_φ - L_φ̄) F̄`.
pub(crate) fn source_into(exec: Execution, grids: &PhaseGrid, fields: &Fields, fbar: &[f64], out: &mut [f64]) {
    let np = grids.n_p();
    let g = &grids.momentum;
    let wide = broadcast(grids, fbar);
    transport_into(exec, grids, fields, &wide, Recon::Central, out);
    let kappa_bg = diffusion::face_kappa_vec(g, fields.pref_bg, fields.e2_bg);
    let mut l_bg = vec![0.0; np];
    diffusion::apply(g, &kappa_bg, fbar, &mut l_bg);
    par::for_each_row(exec, out, np, |j, o| {
        let same = fields.pref[j] == fields.pref_bg && fields.e2[j] == fields.e2_bg;
        if same {
            o.iter_mut().for_each(|v| *v = -*v);
            return;
        }
        let kappa = diffusion::face_kappa_vec(g, fields.pref[j], fields.e2[j]);
        let mut l = vec![0.0; np];
        diffusion::apply(g, &kappa, fbar, &mut l);
        for i in 0..np {
            o[i] = -o[i] + (l[i] - l_bg[i]);
        }
    });
}

pub fn source_terms(
    background: &HomogeneousState,
    phi: &[f64],
    grids: &PhaseGrid,
    formulation: Formulation,
) -> Result<Vec<f64>> {
    grids.momentum.check_len(&background.fbar)?;
    grids.check_space(phi)?;
    let fields = Fields::new(formulation, background.phibar, phi, grids.space.dx);
    let mut out = vec![0.0; grids.len()];
    source_into(Execution::default(), grids, &fields, &background.fbar, &mut out);
    Ok(out)
}

/// `∫ u / sqrt(e + p^2) dp`.
#[inline]
pub(crate) fn stress(grids: &PhaseGrid, e: f64, u: &[f64]) -> f64 {
    let m = &grids.momentum;
    m.nodes
        .iter()
        .zip(u)
        .zip(&m.quad_weights)
        .map(|((p, v), w)| v * w / (e + p * p).sqrt())
        .sum()
}

pub(crate) fn wave_source_into(exec: Execution, grids: &PhaseGrid, fields: &Fields, f: &[f64], fbar: &[f64]) -> Vec<f64> {
    let np = grids.n_p();
    let bg = fields.pref_bg * stress(grids, fields.e2_bg, fbar);
    par::map_indices(exec, grids.n_x(), |j| {
        let e = fields.e2[j];
        let pref = fields.pref[j];
        let own = pref * stress(grids, e, &f[j * np..(j + 1) * np]);
        let commutator = if pref == fields.pref_bg && e == fields.e2_bg {
            0.0
        } else {
            pref * stress(grids, e, fbar) - bg
        };
        -own - commutator
    })
}

/// Right-hand side of the wave equation for `Φ`.
pub fn wave_source(
    f: &[f64],
    background: &HomogeneousState,
    phi: &[f64],
    grids: &PhaseGrid,
    formulation: Formulation,
) -> Result<Vec<f64>> {
    grids.check_phase(f)?;
    grids.check_space(phi)?;
    grids.momentum.check_len(&background.fbar)?;
    let fields = Fields::new(formulation, background.phibar, phi, grids.space.dx);
    Ok(wave_source_into(Execution::default(), grids, &fields, f, &background.fbar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{MomentumGrid, SpaceGrid};
    use crate::reference::adaptive_simpson;
    use std::f64::consts::PI;

    fn grids(nx: usize, np: usize) -> PhaseGrid {
        PhaseGrid::new(SpaceGrid::new(nx, 2.0 * PI).unwrap(), MomentumGrid::line1d(np, 8.0).unwrap()).unwrap()
    }

    fn sample(g: &PhaseGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::new();
        for x in g.space.nodes() {
            for &p in &g.momentum.nodes {
                out.push(f(x, p));
            }
        }
        out
    }

    fn bg(g: &PhaseGrid, phibar: f64) -> HomogeneousState {
        HomogeneousState {
            t: 0.0,
            phibar,
            phibar_prime: 0.0,
            fbar: g.momentum.nodes.iter().map(|p| (-p * p).exp()).collect(),
        }
    }

    #[test]
    fn transport_vanishes_for_flat_data() {
        let g = grids(16, 64);
        let f = sample(&g, |_, p| (-p * p).exp());
        let phi = vec![0.3; 16];
        for form in [Formulation::Physical, Formulation::SelfSimilar] {
            let t = transport_apply(&f, -0.5, &phi, &g, form).unwrap();
            assert!(t.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn transport_second_order() {
        // physical, φ̄ = 0, Φ = 0.2 sin x, f = sin x e^{-p^2}
        let phi_of = |x: f64| 0.2 * x.sin();
        let exact = |x: f64, p: f64| {
            let phi = phi_of(x);
            let e = (2.0 * phi).exp();
            let h = (e + p * p).sqrt();
            let fx = x.cos() * (-p * p).exp();
            let fp = -2.0 * p * x.sin() * (-p * p).exp();
            p / h * fx - e * 0.2 * x.cos() / h * fp
        };
        let mut prev: Option<f64> = None;
        for n in [32usize, 64, 128] {
            let g = grids(n, 2 * n);
            let f = sample(&g, |x, p| x.sin() * (-p * p).exp());
            let phi: Vec<f64> = g.space.nodes().iter().map(|&x| phi_of(x)).collect();
            let t = transport_apply(&f, 0.0, &phi, &g, Formulation::Physical).unwrap();
            let e = sample(&g, exact);
            let err = t.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(g.integrate(&t).abs() < 1e-13);
            if let Some(p) = prev {
                assert!((p / err).log2() >= 1.9, "{}", (p / err).log2());
            }
            prev = Some(err);
        }
    }

    #[test]
    fn diffusion_columns_conserve() {
        let g = grids(8, 64);
        let f = sample(&g, |x, p| (1.0 + 0.5 * x.cos()) * (-p * p).exp());
        let phi: Vec<f64> = g.space.nodes().iter().map(|x| 0.1 * x.sin()).collect();
        let d = fp_apply_perturbed(&f, -0.2, &phi, &g, Formulation::Physical).unwrap();
        for row in d.chunks(64) {
            let s: f64 = row.iter().zip(&g.momentum.quad_weights).map(|(a, b)| a * b).sum();
            assert!(s.abs() < 1e-14);
        }
        let flat = sample(&g, |_, _| 2.0);
        assert!(fp_apply_perturbed(&flat, -0.2, &phi, &g, Formulation::Physical).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sources_vanish_at_zero_field() {
        let g = grids(8, 64);
        let b = bg(&g, -0.7);
        let zero = vec![0.0; 8];
        for form in [Formulation::Physical, Formulation::SelfSimilar] {
            assert!(source_terms(&b, &zero, &g, form).unwrap().iter().all(|v| *v == 0.0));
            let f = vec![0.0; g.len()];
            assert!(wave_source(&f, &b, &zero, &g, form).unwrap().iter().all(|v| *v == 0.0));
        }
        let nob = HomogeneousState { fbar: vec![0.0; 64], ..b };
        let phi: Vec<f64> = g.space.nodes().iter().map(|x| 0.1 * x.cos()).collect();
        assert!(source_terms(&nob, &phi, &g, Formulation::Physical).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn source_directional_derivative() {
        let g = grids(16, 128);
        let b = bg(&g, -0.4);
        let dir: Vec<f64> = g.space.nodes().iter().map(|x| x.cos() + 0.3 * (2.0 * x).sin()).collect();
        let eps = 1e-5;
        let at = |s: f64| -> Vec<f64> {
            let phi: Vec<f64> = dir.iter().map(|d| s * d).collect();
            source_terms(&b, &phi, &g, Formulation::Physical).unwrap()
        };
        let (plus, minus) = (at(eps), at(-eps));
        let (plus2, minus2) = (at(2.0 * eps), at(-2.0 * eps));
        // centred difference at ε versus 2ε: the directional derivative is
        // reproduced to O(ε^2)
        let d1: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let d2: Vec<f64> = plus2.iter().zip(&minus2).map(|(a, b)| (a - b) / (4.0 * eps)).collect();
        let scale = d1.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let diff = d1.iter().zip(&d2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(scale > 0.0);
        assert!(diff / scale < 1e-6, "{}", diff / scale);
    }

    #[test]
    fn wave_source_matches_quadrature() {
        let g = grids(8, 4096);
        let b = HomogeneousState { fbar: vec![0.0; 4096], ..bg(&g, 0.0) };
        let f = sample(&g, |_, p| (-p * p).exp());
        let phi: Vec<f64> = g.space.nodes().iter().map(|x| 0.1 * x.cos()).collect();
        let s = wave_source(&f, &b, &phi, &g, Formulation::Physical).unwrap();
        for (j, x) in g.space.nodes().iter().enumerate() {
            let ph = 0.1 * x.cos();
            let e = (2.0 * ph).exp();
            let want = -e * adaptive_simpson(&|p: f64| (-p * p).exp() / (e + p * p).sqrt(), -8.0, 8.0, 1e-13);
            assert!((s[j] - want).abs() < 1e-6 * want.abs(), "{} {}", s[j], want);
        }
        let f3: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let s3 = wave_source(&f3, &b, &phi, &g, Formulation::Physical).unwrap();
        for (a, c) in s.iter().zip(&s3) {
            assert!((3.0 * a - c).abs() < 1e-14 * c.abs());
        }
    }
}
