//! Evaluators for the acceptance criteria and the benchmark drivers that
//! feed them.
//!
//! Evaluators are pure functions of recorded runs so the `run` commands can
//! report them on arbitrary configurations; `criterion` fixes the benchmark
//! settings and times the whole check.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use vnfp_core::energy::{
    dissipation_budget, phi_l2_bound_check, singular_split_check, tilde_energy_from_physical, EnergyReport,
    PhiSample,
};
use vnfp_core::homogeneous::{run_homogeneous, GridSpec, HomogeneousConfig, HomogeneousRun, InitialDatum};
use vnfp_core::perturbation::{
    detect_tc, picard_iterate, run_perturbation, wave_step, Formulation, PerturbationConfig, PerturbationDatum,
    PerturbationRun, PerturbationSample, PhaseGrid, PicardReport, TcSample,
};
use vnfp_core::relkin::dissipation_quadratic_form;
use vnfp_core::selfsimilar::{run_selfsimilar, selfsimilar_forward, selfsimilar_inverse, SelfSimilarConfig, SelfSimilarRun};
use vnfp_core::{GridKind, MomentumGrid, Result as CoreResult};

use crate::config::EnergySettings;
use crate::fit::fit_affine;

#[derive(Debug, Clone, Serialize)]
pub struct SubCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Failure of this check is listed as a documented deviation.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub known_failure: bool,
}

impl SubCheck {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into(), known_failure: false }
    }

    fn error(name: impl Into<String>, e: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {e}"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub criterion: u8,
    pub name: &'static str,
    pub budget_secs: f64,
    /// Absent in command summaries, which must stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_secs: Option<f64>,
    pub checks: Vec<SubCheck>,
}

pub const CRITERIA: [(u8, &str, f64); 9] = [
    (1, "diffusion identity", 1.0),
    (2, "mass conservation", 30.0),
    (3, "potential asymptotics", 120.0),
    (4, "self-similar consistency", 120.0),
    (5, "self-similar decay rate", 180.0),
    (6, "perturbation decay", 300.0),
    (7, "Picard contraction", 120.0),
    (8, "energy budget", 300.0),
    (9, "scheme orders", 180.0),
];

impl Outcome {
    pub fn new(criterion: u8, checks: Vec<SubCheck>) -> Self {
        let (_, name, budget_secs) = CRITERIA[criterion as usize - 1];
        Self { criterion, name, budget_secs, elapsed_secs: None, checks }
    }

    pub fn id(&self) -> String {
        format!("C{}", self.criterion)
    }

    pub fn within_budget(&self) -> bool {
        self.elapsed_secs.is_none_or(|e| e <= self.budget_secs)
    }

    pub fn passed(&self) -> bool {
        self.within_budget() && self.checks.iter().all(|c| c.passed)
    }

    /// Failed, and not only through documented deviations.
    pub fn unexpected_failure(&self) -> bool {
        !self.within_budget() || self.checks.iter().any(|c| !c.passed && !c.known_failure)
    }

    pub fn detail(&self) -> String {
        let mut parts: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                let mark = match (c.passed, c.known_failure) {
                    (true, _) => "ok",
                    (false, true) => "FAIL (documented)",
                    (false, false) => "FAIL",
                };
                format!("{} {}: {}", c.name, mark, c.detail)
            })
            .collect();
        if !self.within_budget() {
            parts.push(format!("over runtime budget of {} s", self.budget_secs));
        }
        parts.join("; ")
    }

    pub fn entry(&self) -> Value {
        json!({
            "id": self.id(),
            "criterion": self.criterion,
            "name": self.name,
            "passed": self.passed(),
            "detail": self.detail(),
            "checks": self.checks,
        })
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn relative_drift(masses: &[f64]) -> f64 {
    let m0 = masses[0];
    let worst = masses.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max);
    if m0 == 0.0 {
        worst
    } else {
        worst / m0.abs()
    }
}

/// First index with `t ≥ frac · t_end`.
fn tail_start(times: &[f64], frac: f64) -> usize {
    let t_end = *times.last().expect("nonempty trajectory");
    times.iter().position(|t| *t >= frac * t_end).unwrap_or(times.len() - 1)
}

fn bounded_tail(name: &str, values: &[f64], start: usize) -> SubCheck {
    let v0 = values[start];
    let worst = values[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ok = v0.is_finite() && worst.is_finite() && worst <= 2.0 * v0;
    SubCheck::new(name, ok, format!("tail max / tail start = {:.4}", worst / v0))
}

// ---- criterion 1 ----

/// Worst relative mismatch over `samples` seeded draws.
pub fn identity_sampling(samples: usize, seed: u64) -> SubCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let phi = rng.random_range(-2.0..2.0);
        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        match dissipation_quadratic_form(phi, &p, &v) {
            Ok(q) => worst = worst.max(q.relative_mismatch()),
            Err(e) => return SubCheck::error("closed vs matrix form", e),
        }
    }
    SubCheck::new(
        "closed vs matrix form",
        worst <= 1e-12,
        format!("max relative mismatch {worst:.3e} over {samples} samples (seed {seed})"),
    )
}

// ---- criterion 2 ----

pub fn conservation_check(name: &str, masses: &[f64], tol: f64) -> SubCheck {
    let drift = relative_drift(masses);
    SubCheck::new(name, drift <= tol, format!("relative mass drift {drift:.3e} (tolerance {tol:.0e})"))
}

/// Mass drift of the three kinetic solvers over `steps` steps of the given
/// configurations.
pub fn conservation_runs(
    hom: &HomogeneousConfig,
    ss: &SelfSimilarConfig,
    pert: &PerturbationConfig,
    steps: usize,
) -> Vec<SubCheck> {
    let mut out = Vec::new();
    let hom = HomogeneousConfig { t_end: steps as f64 * hom.dt, ..hom.clone() };
    out.push(match run_homogeneous(&hom) {
        Ok(r) => conservation_check("homogeneous", &r.samples.iter().map(|s| s.mass).collect::<Vec<_>>(), 1e-10),
        Err(e) => SubCheck::error("homogeneous", e),
    });
    let ss = SelfSimilarConfig { t_end: steps as f64 * ss.dt, ..ss.clone() };
    out.push(match run_selfsimilar(&ss) {
        Ok(r) => conservation_check("self-similar", &r.samples.iter().map(|s| s.mass).collect::<Vec<_>>(), 1e-10),
        Err(e) => SubCheck::error("self-similar", e),
    });
    let pert = PerturbationConfig { t_end: steps as f64 * pert.dt, ..pert.clone() };
    out.push(match run_perturbation(&pert, |_, _| Ok(())) {
        Ok(r) => conservation_check(
            "perturbation",
            &r.samples.iter().map(|s| s.mass_total).collect::<Vec<_>>(),
            1e-9,
        ),
        Err(e) => SubCheck::error("perturbation", e),
    });
    out
}

// ---- criterion 3 ----

pub fn eval_homogeneous(run: &HomogeneousRun) -> Vec<SubCheck> {
    let s = &run.samples;
    let mut out = Vec::new();
    let inc = run.max_phibar_prime_increase();
    out.push(SubCheck::new(
        "phibar' nonincreasing",
        inc <= 0.0,
        format!("largest sample-to-sample increase {inc:.3e}"),
    ));
    let times: Vec<f64> = s.iter().map(|x| x.t).collect();
    let start = tail_start(&times, 0.6);
    let phibar: Vec<f64> = s[start..].iter().map(|x| x.phibar).collect();
    out.push(match fit_affine(&times[start..], &phibar) {
        Ok(f) => SubCheck::new(
            "tail affine fit",
            f.slope < 0.0 && f.r2 >= 0.999,
            format!("slope {:.6}, r2 {:.6}", f.slope, f.r2),
        ),
        Err(e) => SubCheck::error("tail affine fit", e),
    });
    let last = &s[s.len() - 1];
    let half = &s[tail_start(&times, 0.5)];
    let rel = (last.phibar_prime - half.phibar_prime).abs() / last.phibar_prime.abs();
    out.push(SubCheck::new(
        "phibar' settled",
        rel <= 0.05,
        format!(
            "phibar'(T) = {:.6}, phibar'(T/2) = {:.6}, relative change {rel:.4}",
            last.phibar_prime, half.phibar_prime
        ),
    ));
    out
}

// ---- criterion 4 ----

/// Sup-norm mismatch at `t_end` between the mapped physical run and the
/// direct self-similar run, at resolution level `n`.
pub fn selfsimilar_mismatch(n: usize, t_end: f64) -> CoreResult<f64> {
    let dt = 4e-3 * 128.0 / n as f64;
    let sample_every = usize::MAX / 2;
    let hom = run_homogeneous(&HomogeneousConfig {
        grid: GridSpec { kind: GridKind::Radial3d, n: 2 * n, domain_max: 16.0 },
        dt,
        t_end,
        sample_every,
        ..Default::default()
    })?;
    let ss = run_selfsimilar(&SelfSimilarConfig {
        grid: GridSpec { kind: GridKind::Radial3d, n: 8 * n, domain_max: 64.0 },
        dt,
        t_end,
        sample_every,
        lambdas: vec![1.0],
        ..Default::default()
    })?;
    let mapped = selfsimilar_forward(&hom.final_state.fbar, hom.final_state.phibar, &hom.grid, &ss.grid)?;
    Ok(max_abs_diff(&mapped, &ss.final_state.gbar))
}

pub fn eval_mismatch_ladder(levels: &[usize], errors: &[f64]) -> Vec<SubCheck> {
    errors
        .windows(2)
        .zip(levels.windows(2))
        .map(|(e, n)| {
            let ratio = e[0] / e[1];
            SubCheck::new(
                format!("N {} -> {}", n[0], n[1]),
                ratio >= 3.5,
                format!("mismatch {:.3e} -> {:.3e}, factor {ratio:.3}", e[0], e[1]),
            )
        })
        .collect()
}

// ---- criterion 5 ----

pub fn eval_selfsimilar(run: &SelfSimilarRun) -> Vec<SubCheck> {
    let s = &run.samples;
    let times: Vec<f64> = s.iter().map(|x| x.t).collect();
    let start = tail_start(&times, 0.5);
    let mut out = Vec::new();
    for (i, lambda) in run.lambdas.iter().enumerate() {
        let ratios: Vec<f64> = s.iter().map(|x| x.decay_ratio[i]).collect();
        out.push(bounded_tail(&format!("decay ratio, lambda {lambda}"), &ratios, start));
        let total = s[s.len() - 1].dissipation[i];
        let added = total - s[start].dissipation[i];
        let frac = if total > 0.0 { added / total } else { 0.0 };
        out.push(SubCheck::new(
            format!("dissipation saturation, lambda {lambda}"),
            frac <= 0.10,
            format!("final half adds {:.3}%", 100.0 * frac),
        ));
    }
    out
}

// ---- criteria 6 and 8: monitored perturbation runs ----

/// A perturbation run with energy reports and the tilde ratio at every
/// recorded sample.
pub struct MonitoredRun {
    pub run: PerturbationRun,
    pub reports: Vec<EnergyReport>,
    /// Kinetic tilde energy at `lambda`.
    pub tilde: Vec<f64>,
    /// `tilde / e^{½φ̄(3/2 - λ)}`.
    pub tilde_ratio: Vec<f64>,
    /// Exponents the reports were computed for.
    pub gammas: Vec<f64>,
}

pub fn monitored_perturbation(cfg: &PerturbationConfig, energy: &EnergySettings) -> CoreResult<MonitoredRun> {
    let gammas: Vec<f64> = match cfg.formulation {
        Formulation::Physical => energy.deltas.to_vec(),
        Formulation::SelfSimilar => vec![energy.lambda],
    };
    let lambda = energy.lambda;
    let mut reports = Vec::new();
    let mut tilde = Vec::new();
    let run = run_perturbation(cfg, |state, grids: &PhaseGrid| {
        let r = EnergyReport::compute(state, grids, &gammas, energy.k_max, cfg.formulation, cfg.execution)?;
        tilde.push(match cfg.formulation {
            Formulation::Physical => tilde_energy_from_physical(state, grids, lambda)?,
            Formulation::SelfSimilar => r.gammas[0].energy_f,
        });
        reports.push(r);
        Ok(())
    })?;
    let tilde_ratio = tilde
        .iter()
        .zip(&run.samples)
        .map(|(e, s)| e / (0.5 * s.phibar * (1.5 - lambda)).exp())
        .collect();
    Ok(MonitoredRun { run, reports, tilde, tilde_ratio, gammas })
}

pub fn tc_samples(samples: &[PerturbationSample]) -> Vec<TcSample> {
    samples
        .iter()
        .map(|s| TcSample {
            t: s.t,
            phibar_prime: s.phibar_prime,
            max_field: s.max_field,
            max_field_rate: s.max_field_rate,
        })
        .collect()
}

pub fn eval_decay(samples: &[PerturbationSample], tilde_ratio: &[f64]) -> (Option<f64>, Vec<SubCheck>) {
    let mut out = Vec::new();
    let tc = match detect_tc(&tc_samples(samples)) {
        Ok(Some(tc)) => {
            out.push(SubCheck::new("T_c detected", true, format!("T_c = {tc}")));
            Some(tc)
        }
        Ok(None) => {
            out.push(SubCheck::new("T_c detected", false, "no sample satisfies the monotone-regime conditions"));
            None
        }
        Err(e) => {
            out.push(SubCheck::error("T_c detected", e));
            None
        }
    };
    if let Some(tc) = tc {
        let past: Vec<f64> = samples.iter().filter(|s| s.t >= tc).map(|s| s.linf_weighted).collect();
        let worst = past
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] - 1.0 } else if w[1] > 0.0 { f64::INFINITY } else { 0.0 })
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(SubCheck::new(
            "weighted sup norm nonincreasing past T_c",
            worst <= 1e-3,
            format!("largest relative increase {worst:.3e}"),
        ));
        let (first, last) = (past[0], past[past.len() - 1]);
        let ok = first == 0.0 && last == 0.0 || last <= 0.1 * first;
        out.push(SubCheck::new(
            "weighted sup norm final / at T_c",
            ok,
            format!("{first:.3e} -> {last:.3e}"),
        ));
    }
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    out.push(bounded_tail("tilde ratio, lambda 1", tilde_ratio, tail_start(&times, 0.5)));
    (tc, out)
}

pub fn phi_samples(samples: &[PerturbationSample]) -> Vec<PhiSample> {
    samples
        .iter()
        .map(|s| PhiSample { t: s.t, phi_l2_sq: s.phi_l2 * s.phi_l2, dphi_l2_sq: s.dphi_l2 * s.dphi_l2 })
        .collect()
}

pub fn eval_phi_bound(name: &str, samples: &[PerturbationSample]) -> SubCheck {
    match phi_l2_bound_check(&phi_samples(samples)) {
        Ok(r) => SubCheck::new(
            name,
            r.min_slack >= -1e-8,
            format!("min slack {:.3e} (factor-one form holds: {})", r.min_slack, r.factor_one_holds),
        ),
        Err(e) => SubCheck::error(name, e),
    }
}

pub fn budget_constant(m: &MonitoredRun) -> CoreResult<Option<f64>> {
    Ok(dissipation_budget(&m.reports, &m.gammas)?.c_fit)
}

pub fn eval_budget_refinement(base: Option<f64>, refined: Option<f64>) -> SubCheck {
    match (base, refined) {
        (Some(b), Some(r)) if b.is_finite() && r.is_finite() => {
            let rel = (r / b - 1.0).abs();
            SubCheck::new(
                "C_fit stable under refinement",
                rel <= 0.2,
                format!("C_fit {b:.5} -> {r:.5}, relative change {rel:.4}"),
            )
        }
        _ => SubCheck::new("C_fit stable under refinement", false, format!("C_fit undefined: {base:?} -> {refined:?}")),
    }
}

/// Ratio of both sides of the singular splitting over `φ ∈ [-6, 0]`.
pub fn split_sweep(grid: &MomentumGrid, datum: InitialDatum, d1: f64, d2: f64) -> SubCheck {
    let f = datum.sample(grid);
    let mut ratios = Vec::new();
    for k in 0..=60 {
        let phi = -6.0 + 0.1 * k as f64;
        match singular_split_check(grid, &f, phi, d1, d2) {
            Ok(c) => ratios.push(c.ratio().unwrap_or(f64::NAN)),
            Err(e) => return SubCheck::error("singular split ratio", e),
        }
    }
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    let mut c = SubCheck::new(
        "singular split ratio within 2x",
        spread <= 2.0,
        format!("max/min over phi in [-6, 0] = {spread:.3}"),
    );
    c.known_failure = true;
    c
}

// ---- criterion 7 ----

pub fn eval_picard(report: &PicardReport, zero: Option<(&PicardReport, &HomogeneousRun)>) -> Vec<SubCheck> {
    let mut out = Vec::new();
    let shown: Vec<String> = report.ratios.iter().map(|r| format!("{r:.4}")).collect();
    let ok = report.ratios.len() >= 3 && report.ratios[..3].iter().all(|r| *r < 1.0);
    out.push(SubCheck::new("d_(n+1)/d_n < 1 for n = 1, 2, 3", ok, format!("ratios [{}]", shown.join(", "))));
    if let Some((z, hom)) = zero {
        let drift = z.differences.iter().copied().fold(0.0, f64::max);
        let f_max = z.finals.iter().flat_map(|it| it.f.iter()).fold(0.0, |a: f64, v| a.max(v.abs()));
        let bg = max_abs_diff(&z.background.fbar, &hom.final_state.fbar)
            .max((z.background.phibar - hom.final_state.phibar).abs())
            .max((z.background.phibar_prime - hom.final_state.phibar_prime).abs());
        out.push(SubCheck::new(
            "homogeneous-data iterates",
            drift.max(f_max).max(bg) <= 1e-8,
            format!("max iterate difference {drift:.1e}, max |f| {f_max:.1e}, background mismatch {bg:.3e}"),
        ));
    }
    out
}

/// Zero perturbation over the configured background, and the homogeneous
/// solver on the same momentum line and step.
pub fn picard_zero_data(cfg: &PerturbationConfig, iterates: usize) -> CoreResult<(PicardReport, HomogeneousRun)> {
    let zero = PerturbationConfig { perturbation: PerturbationDatum::zero(), ..cfg.clone() };
    let report = picard_iterate(&zero, iterates)?;
    let hom = run_homogeneous(&HomogeneousConfig {
        grid: cfg.momentum,
        datum: cfg.background,
        phi_in: cfg.phi_in,
        psi_in: cfg.psi_in,
        dt: cfg.dt,
        t_end: cfg.t_end,
        sample_every: cfg.steps(),
        ..Default::default()
    })?;
    Ok((report, hom))
}

// ---- criterion 9 ----

fn travelling_wave_error(n: usize) -> CoreResult<f64> {
    let dx = 2.0 * PI / n as f64;
    let steps = (1.0 / (0.5 * dx)).round() as usize;
    let dt = 1.0 / steps as f64;
    let xs: Vec<f64> = (0..n).map(|j| j as f64 * dx).collect();
    let mut phi: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
    let mut dphi: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
    for _ in 0..steps {
        wave_step(&mut phi, &mut dphi, |p| vec![0.0; p.len()], dt, dx)?;
    }
    let err: f64 = xs.iter().zip(&phi).map(|(x, v)| (v - (x - 1.0).cos()).powi(2)).sum();
    Ok((err * dx).sqrt())
}

fn order_check(name: &str, errors: &[f64], min: f64) -> SubCheck {
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let ok = orders.iter().all(|o| *o >= min);
    let shown: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
    let errs: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
    SubCheck::new(name, ok, format!("errors [{}], orders [{}]", errs.join(", "), shown.join(", ")))
}

pub fn wave_order() -> SubCheck {
    match [32, 64, 128].into_iter().map(travelling_wave_error).collect::<CoreResult<Vec<_>>>() {
        Ok(e) => order_check("wave order vs travelling wave", &e, 1.9),
        Err(e) => SubCheck::error("wave order vs travelling wave", e),
    }
}

/// Weighted pairwise cell average onto the next coarser momentum grid.
fn restrict_p(u: &[f64], w: &[f64]) -> Vec<f64> {
    u.chunks(2)
        .zip(w.chunks(2))
        .map(|(a, b)| (a[0] * b[0] + a[1] * b[1]) / (b[0] + b[1]))
        .collect()
}

fn homogeneous_level(level: u32) -> CoreResult<HomogeneousRun> {
    let c = 1usize << level;
    run_homogeneous(&HomogeneousConfig {
        grid: GridSpec { kind: GridKind::Radial3d, n: 128 * c, domain_max: 8.0 },
        dt: 4e-3 / c as f64,
        t_end: 1.0,
        sample_every: usize::MAX / 2,
        ..Default::default()
    })
}

pub fn homogeneous_convergence() -> Vec<SubCheck> {
    let runs = match (0..3).map(homogeneous_level).collect::<CoreResult<Vec<_>>>() {
        Ok(r) => r,
        Err(e) => return vec![SubCheck::error("homogeneous self-convergence", e)],
    };
    let f: Vec<f64> = (0..2)
        .map(|l| {
            let fine = &runs[l + 1];
            max_abs_diff(&runs[l].final_state.fbar, &restrict_p(&fine.final_state.fbar, &fine.grid.quad_weights))
        })
        .collect();
    let phi: Vec<f64> = (0..2)
        .map(|l| (runs[l].final_state.phibar - runs[l + 1].final_state.phibar).abs())
        .collect();
    vec![
        order_check("homogeneous self-convergence (density)", &f, 1.8),
        order_check("homogeneous self-convergence (potential)", &phi, 1.8),
    ]
}

fn perturbation_level(level: u32) -> CoreResult<PerturbationRun> {
    let c = 1usize << level;
    run_perturbation(
        &PerturbationConfig {
            n_x: 16 * c,
            momentum: GridSpec { kind: GridKind::Line1d, n: 64 * c, domain_max: 8.0 },
            dt: 0.04 / c as f64,
            t_end: 1.0,
            sample_every: usize::MAX / 2,
            ..Default::default()
        },
        |_, _| Ok(()),
    )
}

pub fn perturbation_convergence() -> Vec<SubCheck> {
    let runs = match (0..3).map(perturbation_level).collect::<CoreResult<Vec<_>>>() {
        Ok(r) => r,
        Err(e) => return vec![SubCheck::error("perturbation self-convergence", e)],
    };
    let coarsen = |r: &PerturbationRun| -> Vec<f64> {
        let np = r.grids.n_p();
        (0..r.grids.n_x())
            .step_by(2)
            .flat_map(|j| restrict_p(&r.final_state.f[j * np..(j + 1) * np], &r.grids.momentum.quad_weights))
            .collect()
    };
    let f: Vec<f64> = (0..2).map(|l| max_abs_diff(&runs[l].final_state.f, &coarsen(&runs[l + 1]))).collect();
    let phi: Vec<f64> = (0..2)
        .map(|l| {
            let inj: Vec<f64> = runs[l + 1].final_state.phi.iter().step_by(2).copied().collect();
            max_abs_diff(&runs[l].final_state.phi, &inj)
        })
        .collect();
    vec![
        order_check("perturbation self-convergence (density)", &f, 1.8),
        order_check("perturbation self-convergence (field)", &phi, 1.8),
    ]
}

pub fn synthetic_tc() -> SubCheck {
    let dt = 0.01;
    let samples: Vec<TcSample> = (0..=500)
        .map(|k| {
            let t = k as f64 * dt;
            TcSample { t, phibar_prime: -1.0, max_field: -t, max_field_rate: -1.0 }
        })
        .collect();
    let target = 2f64.ln() / 2.0;
    match detect_tc(&samples) {
        Ok(Some(tc)) => SubCheck::new(
            "T_c on phibar = -t",
            (tc - target).abs() <= dt,
            format!("T_c = {tc}, (ln 2)/2 = {target:.6}"),
        ),
        Ok(None) => SubCheck::new("T_c on phibar = -t", false, "not detected"),
        Err(e) => SubCheck::error("T_c on phibar = -t", e),
    }
}

/// Round trips through the self-similar map for seeded `φ̄` and widths.
pub fn transform_round_trips(count: usize, seed: u64) -> SubCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = match MomentumGrid::radial3d(512, 16.0) {
        Ok(g) => g,
        Err(e) => return SubCheck::error("self-similar round trip", e),
    };
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let phibar = rng.random_range(-0.5..0.5);
        let width: f64 = rng.random_range(0.5..1.5);
        let f = InitialDatum::Gaussian { amplitude: 1.0, width }.sample(&grid);
        let back = selfsimilar_forward(&f, phibar, &grid, &grid)
            .and_then(|g| selfsimilar_inverse(&g, phibar, &grid, &grid));
        match back {
            Ok(b) => worst = worst.max(max_abs_diff(&f, &b) / (grid.cell_width / width).powi(4)),
            Err(e) => return SubCheck::error("self-similar round trip", e),
        }
    }
    SubCheck::new(
        "self-similar round trip",
        worst <= 1.0,
        format!("worst error / (cell width / datum width)^4 = {worst:.3} over {count} trips"),
    )
}

// ---- acceptance drivers ----

fn timed(criterion: u8, body: impl FnOnce() -> Vec<SubCheck>) -> Outcome {
    let start = Instant::now();
    let checks = body();
    let mut out = Outcome::new(criterion, checks);
    out.elapsed_secs = Some(start.elapsed().as_secs_f64());
    out
}

fn or_error<T>(name: &str, r: CoreResult<T>, f: impl FnOnce(T) -> Vec<SubCheck>) -> Vec<SubCheck> {
    match r {
        Ok(v) => f(v),
        Err(e) => vec![SubCheck::error(name, e)],
    }
}

pub fn refined(cfg: &PerturbationConfig) -> PerturbationConfig {
    PerturbationConfig {
        n_x: 2 * cfg.n_x,
        momentum: GridSpec { n: 2 * cfg.momentum.n, ..cfg.momentum },
        dt: 0.5 * cfg.dt,
        sample_every: 2 * cfg.sample_every,
        ..cfg.clone()
    }
}

/// Runs criterion `n` (1 to 9) at its benchmark settings.
pub fn criterion(n: u8) -> Outcome {
    match n {
        1 => timed(1, || vec![identity_sampling(10_000, 0)]),
        2 => timed(2, || {
            let ss = SelfSimilarConfig::default();
            conservation_runs(&HomogeneousConfig::default(), &ss, &PerturbationConfig::default(), 1000)
        }),
        3 => timed(3, || or_error("homogeneous benchmark", run_homogeneous(&HomogeneousConfig::default()), |r| eval_homogeneous(&r))),
        4 => timed(4, || {
            let levels = [128, 256, 512, 1024];
            or_error(
                "self-similar mismatch",
                levels.iter().map(|&n| selfsimilar_mismatch(n, 1.0)).collect::<CoreResult<Vec<_>>>(),
                |e| eval_mismatch_ladder(&levels, &e),
            )
        }),
        5 => timed(5, || or_error("self-similar benchmark", run_selfsimilar(&SelfSimilarConfig::default()), |r| eval_selfsimilar(&r))),
        6 => timed(6, || {
            let energy = EnergySettings { k_max: 0, ..Default::default() };
            or_error("perturbation benchmark", monitored_perturbation(&PerturbationConfig::default(), &energy), |m| {
                eval_decay(&m.run.samples, &m.tilde_ratio).1
            })
        }),
        7 => timed(7, || {
            let cfg = PerturbationConfig { t_end: 0.1, ..Default::default() };
            let report = picard_iterate(&cfg, 5);
            let zero = picard_zero_data(&cfg, 5);
            match (report, zero) {
                (Ok(r), Ok((z, h))) => eval_picard(&r, Some((&z, &h))),
                (Err(e), _) | (_, Err(e)) => vec![SubCheck::error("Picard iteration", e)],
            }
        }),
        8 => timed(8, || {
            let energy = EnergySettings::default();
            let base_cfg = PerturbationConfig::default();
            let mut checks = Vec::new();
            let base = monitored_perturbation(&base_cfg, &energy);
            let fine = monitored_perturbation(&refined(&base_cfg), &energy);
            match (base, fine) {
                (Ok(b), Ok(f)) => {
                    match (budget_constant(&b), budget_constant(&f)) {
                        (Ok(cb), Ok(cf)) => checks.push(eval_budget_refinement(cb, cf)),
                        (Err(e), _) | (_, Err(e)) => checks.push(SubCheck::error("C_fit stable under refinement", e)),
                    }
                    checks.push(eval_phi_bound("Phi L2 bound slack (base)", &b.run.samples));
                    checks.push(eval_phi_bound("Phi L2 bound slack (refined)", &f.run.samples));
                }
                (Err(e), _) | (_, Err(e)) => checks.push(SubCheck::error("perturbation benchmark", e)),
            }
            let grid = GridSpec::default().build();
            checks.push(match grid {
                Ok(g) => split_sweep(&g, InitialDatum::default(), energy.deltas[0], energy.deltas[1]),
                Err(e) => SubCheck::error("singular split ratio within 2x", e),
            });
            checks
        }),
        9 => timed(9, || {
            let mut checks = vec![wave_order()];
            checks.extend(homogeneous_convergence());
            checks.extend(perturbation_convergence());
            checks.push(synthetic_tc());
            checks
        }),
        _ => panic!("no criterion {n}"),
    }
}
