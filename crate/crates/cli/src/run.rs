//! Command dispatch: one solver run, its trajectory table and its summary.

use serde_json::{json, Value};

use vnfp_core::energy::{dissipation_budget, phi_l2_bound_check};
use vnfp_core::homogeneous::{run_homogeneous, GridSpec, HomogeneousConfig};
use vnfp_core::perturbation::{picard_iterate, PerturbationConfig};
use vnfp_core::selfsimilar::{run_selfsimilar, SelfSimilarConfig};
use vnfp_core::{Error as CoreError, GridKind};

use crate::checks::{self, Outcome, SubCheck};
use crate::config::{Command, RunConfig};
use crate::fit::{fit_affine, fit_rate, Abscissa, Fit};
use crate::output::{check_times, num, ErrorRecord, Summary, Table, SCHEMA_VERSION, CODE_VERSION};

pub struct RunOutput {
    pub summary: Summary,
    pub table: Option<Table>,
}

impl RunOutput {
    /// Exit status: module errors always fail, `verify` also fails on any
    /// failed check.
    pub fn success(&self) -> bool {
        self.summary.status == "ok"
    }
}

fn fit_json(fit: Result<Fit, impl std::fmt::Display>) -> Value {
    match fit {
        Ok(f) => json!({ "slope": f.slope, "intercept": f.intercept, "r2": f.r2 }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn label(x: f64) -> String {
    format!("{x}")
}

struct Produced {
    table: Option<Table>,
    results: Value,
    acceptance: Vec<Outcome>,
}

fn homogeneous(cfg: &HomogeneousConfig) -> Result<Produced, CoreError> {
    let run = run_homogeneous(cfg)?;
    let mut table = Table::new(
        ["t", "phibar", "phibar_prime", "mass", "linf_fbar", "min_fbar", "rho"]
            .into_iter()
            .map(String::from)
            .chain((0..5).map(|k| format!("moment_k{k}"))),
    );
    for s in &run.samples {
        table.push_numbers([s.t, s.phibar, s.phibar_prime, s.mass, s.linf_fbar, s.min_fbar, s.rho].into_iter().chain(s.moments));
    }
    let times: Vec<f64> = run.samples.iter().map(|s| s.t).collect();
    let start = times.iter().position(|t| *t >= 0.6 * times[times.len() - 1]).unwrap_or(0);
    let phibar: Vec<f64> = run.samples.iter().map(|s| s.phibar).collect();
    let last = &run.samples[run.samples.len() - 1];
    let masses: Vec<f64> = run.samples.iter().map(|s| s.mass).collect();
    let results = json!({
        "final": { "t": last.t, "phibar": last.phibar, "phibar_prime": last.phibar_prime, "mass": last.mass },
        "max_phibar_prime_increase": run.max_phibar_prime_increase(),
        "tail_phibar_fit_vs_time": fit_json(fit_affine(&times[start..], &phibar[start..])),
    });
    let acceptance = vec![
        Outcome::new(2, vec![checks::conservation_check("homogeneous", &masses, 1e-10)]),
        Outcome::new(3, checks::eval_homogeneous(&run)),
    ];
    Ok(Produced { table: Some(table), results, acceptance })
}

fn selfsimilar(cfg: &SelfSimilarConfig) -> Result<Produced, CoreError> {
    let run = run_selfsimilar(cfg)?;
    let mut header: Vec<String> = ["t", "phibar", "phibar_prime", "mass", "linf_gbar", "min_gbar"].map(String::from).into();
    for prefix in ["decay", "decay_ratio", "dissipation"] {
        header.extend(run.lambdas.iter().map(|l| format!("{prefix}_lambda{}", label(*l))));
    }
    let mut table = Table::new(header);
    for s in &run.samples {
        table.push_numbers(
            [s.t, s.phibar, s.phibar_prime, s.mass, s.linf_gbar, s.min_gbar]
                .into_iter()
                .chain(s.decay.iter().copied())
                .chain(s.decay_ratio.iter().copied())
                .chain(s.dissipation.iter().copied()),
        );
    }
    let times: Vec<f64> = run.samples.iter().map(|s| s.t).collect();
    let start = times.iter().position(|t| *t >= 0.5 * times[times.len() - 1]).unwrap_or(0);
    let phibar: Vec<f64> = run.samples.iter().map(|s| s.phibar).collect();
    let rates: Vec<Value> = run
        .lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let decay: Vec<f64> = run.samples.iter().map(|s| s.decay[i]).collect();
            json!({
                "lambda": l,
                "predicted_slope_vs_phibar": 2.0 * (1.5 - l),
                "tail_fit_vs_phibar": fit_json(fit_rate(&times[start..], &decay[start..], Abscissa::Phibar, &phibar[start..])),
                "final_dissipation": run.samples[run.samples.len() - 1].dissipation[i],
            })
        })
        .collect();
    let last = &run.samples[run.samples.len() - 1];
    let masses: Vec<f64> = run.samples.iter().map(|s| s.mass).collect();
    let results = json!({
        "final": { "t": last.t, "phibar": last.phibar, "phibar_prime": last.phibar_prime, "mass": last.mass },
        "decay": rates,
    });
    let acceptance = vec![
        Outcome::new(2, vec![checks::conservation_check("self-similar", &masses, 1e-10)]),
        Outcome::new(5, checks::eval_selfsimilar(&run)),
    ];
    Ok(Produced { table: Some(table), results, acceptance })
}

fn perturbation(cfg: &PerturbationConfig, rc: &RunConfig) -> Result<Produced, CoreError> {
    let m = checks::monitored_perturbation(cfg, &rc.energy)?;
    let budget = dissipation_budget(&m.reports, &m.gammas)?;
    let bound = phi_l2_bound_check(&checks::phi_samples(&m.run.samples))?;
    let mut header: Vec<String> = [
        "t",
        "phibar",
        "phibar_prime",
        "mass_total",
        "min_total",
        "linf_f",
        "linf_weighted",
        "max_field",
        "max_field_rate",
        "phi_l2",
        "dphi_l2",
        "wave_energy",
    ]
    .map(String::from)
    .into();
    for g in &m.gammas {
        for q in ["energy", "energy_f", "dissipation", "enhanced"] {
            header.push(format!("{q}_gamma{}", label(*g)));
        }
    }
    header.extend(["tilde_energy", "tilde_ratio", "phi_bound_slack", "budget_ratio"].map(String::from));
    let mut table = Table::new(header);
    for (k, s) in m.run.samples.iter().enumerate() {
        let gamma_cols = m.reports[k]
            .gammas
            .iter()
            .flat_map(|g| [g.energy, g.energy_f, g.dissipation, g.enhanced]);
        table.push_numbers(
            [
                s.t,
                s.phibar,
                s.phibar_prime,
                s.mass_total,
                s.min_total,
                s.linf_f,
                s.linf_weighted,
                s.max_field,
                s.max_field_rate,
                s.phi_l2,
                s.dphi_l2,
                s.wave_energy,
            ]
            .into_iter()
            .chain(gamma_cols)
            .chain([m.tilde[k], m.tilde_ratio[k], bound.slack[k], budget.ratios[k]]),
        );
    }
    let (tc, decay) = checks::eval_decay(&m.run.samples, &m.tilde_ratio);
    let times: Vec<f64> = m.run.samples.iter().map(|s| s.t).collect();
    let phibar: Vec<f64> = m.run.samples.iter().map(|s| s.phibar).collect();
    let start = times.iter().position(|t| *t >= 0.5 * times[times.len() - 1]).unwrap_or(0);
    let masses: Vec<f64> = m.run.samples.iter().map(|s| s.mass_total).collect();
    let last = &m.run.samples[m.run.samples.len() - 1];
    let results = json!({
        "formulation": cfg.formulation,
        "gammas": m.gammas,
        "lambda": rc.energy.lambda,
        "k_max": rc.energy.k_max,
        "t_c": tc,
        "c_fit": budget.c_fit,
        "phi_bound": {
            "min_slack": bound.min_slack,
            "min_slack_factor_one": bound.min_slack_factor_one,
            "factor_one_holds": bound.factor_one_holds,
        },
        "tilde_tail_fit_vs_phibar": fit_json(fit_rate(&times[start..], &m.tilde[start..], Abscissa::Phibar, &phibar[start..])),
        "tilde_predicted_slope_vs_phibar": 0.5 * (1.5 - rc.energy.lambda),
        "final": {
            "t": last.t,
            "phibar": last.phibar,
            "phibar_prime": last.phibar_prime,
            "mass_total": last.mass_total,
            "linf_weighted": last.linf_weighted,
        },
    });
    let c_fit_ok = budget.c_fit.is_some_and(f64::is_finite);
    let acceptance = vec![
        Outcome::new(2, vec![checks::conservation_check("perturbation", &masses, 1e-9)]),
        Outcome::new(6, decay),
        Outcome::new(
            8,
            vec![
                SubCheck::new("C_fit finite", c_fit_ok, format!("C_fit = {:?}", budget.c_fit)),
                checks::eval_phi_bound("Phi L2 bound slack", &m.run.samples),
            ],
        ),
    ];
    Ok(Produced { table: Some(table), results, acceptance })
}

fn picard(cfg: &PerturbationConfig, iterates: usize) -> Result<Produced, CoreError> {
    let report = picard_iterate(cfg, iterates)?;
    let (zero, hom) = checks::picard_zero_data(cfg, iterates)?;
    let mut table = Table::new(["n", "difference", "ratio"]);
    for (k, d) in report.differences.iter().enumerate() {
        let ratio = if k == 0 { String::new() } else { num(report.ratios[k - 1]) };
        table.push(vec![(k + 1).to_string(), num(*d), ratio]);
    }
    let results = json!({
        "differences": report.differences,
        "ratios": report.ratios,
        "diverged": report.diverged,
        "zero_data_differences": zero.differences,
    });
    let acceptance = vec![Outcome::new(7, checks::eval_picard(&report, Some((&zero, &hom))))];
    Ok(Produced { table: Some(table), results, acceptance })
}

fn verify(rc: &RunConfig, seed: u64) -> Produced {
    let hom = HomogeneousConfig {
        grid: GridSpec { kind: GridKind::Radial3d, n: 128, domain_max: 8.0 },
        sample_every: 100,
        ..Default::default()
    };
    let ss = SelfSimilarConfig {
        grid: GridSpec { kind: GridKind::Radial3d, n: 512, domain_max: 64.0 },
        sample_every: 100,
        ..Default::default()
    };
    let pert = PerturbationConfig {
        n_x: 16,
        momentum: GridSpec { kind: GridKind::Line1d, n: 96, domain_max: 8.0 },
        dt: 0.02,
        sample_every: 100,
        execution: rc.execution(),
        ..Default::default()
    };
    let identity = checks::identity_sampling(rc.verify_samples, seed);
    let conservation = checks::conservation_runs(&hom, &ss, &pert, 1000);
    let round_trip = checks::transform_round_trips(20, seed);
    let wave = checks::wave_order();
    let tc = checks::synthetic_tc();

    let mut table = Table::new(["check", "passed", "detail"]);
    let all: Vec<&SubCheck> = std::iter::once(&identity)
        .chain(&conservation)
        .chain([&round_trip, &wave, &tc])
        .collect();
    for c in &all {
        table.push(vec![c.name.clone(), c.passed.to_string(), c.detail.clone()]);
    }
    let results = json!({
        "checks": all,
        "all_passed": all.iter().all(|c| c.passed),
    });
    let acceptance = vec![
        Outcome::new(1, vec![identity.clone()]),
        Outcome::new(2, conservation.clone()),
        Outcome::new(9, vec![wave.clone(), tc.clone()]),
    ];
    Produced { table: Some(table), results, acceptance }
}

fn time_column(table: &Table) -> Option<Vec<f64>> {
    (table.header.first().map(String::as_str) == Some("t"))
        .then(|| table.rows.iter().map(|r| r[0].parse().unwrap_or(f64::NAN)).collect())
}

/// Runs the configured command.
pub fn execute(cfg: &RunConfig, seed: u64) -> RunOutput {
    let produced = match cfg.command {
        Command::Homogeneous => homogeneous(&cfg.homogeneous),
        Command::Selfsimilar => selfsimilar(&cfg.selfsimilar),
        Command::Perturbation => perturbation(&cfg.perturbation, cfg),
        Command::Picard => picard(&cfg.perturbation, cfg.picard_iterates),
        Command::Verify => Ok(verify(cfg, seed)),
    };
    let config = serde_json::to_value(cfg).expect("config serializes");
    let mut summary = Summary {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION,
        command: cfg.command.name().to_string(),
        seed,
        status: "ok",
        config,
        error: None,
        results: Value::Null,
        acceptance: Vec::new(),
    };
    match produced {
        Ok(p) => {
            if let Some(Err(e)) = p.table.as_ref().and_then(time_column).map(|t| check_times(&t)) {
                summary.status = "error";
                summary.error = Some(ErrorRecord { kind: "trajectory".into(), message: e, violations: Vec::new() });
            }
            if cfg.command == Command::Verify && p.results["all_passed"] != json!(true) {
                summary.status = "failed";
            }
            summary.results = p.results;
            summary.acceptance = p.acceptance.iter().map(Outcome::entry).collect();
            RunOutput { summary, table: p.table }
        }
        Err(e) => {
            summary.status = "error";
            summary.error = Some(ErrorRecord { kind: "solver".into(), message: e.to_string(), violations: Vec::new() });
            RunOutput { summary, table: None }
        }
    }
}

/// Summary for a configuration that failed to parse.
pub fn config_failure(command: Command, seed: u64, err: &crate::config::ConfigError) -> Summary {
    Summary {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION,
        command: command.name().to_string(),
        seed,
        status: "error",
        config: Value::Null,
        error: Some(ErrorRecord {
            kind: "config".into(),
            message: err.to_string().trim_end().to_string(),
            violations: err.violations.clone(),
        }),
        results: Value::Null,
        acceptance: Vec::new(),
    }
}
