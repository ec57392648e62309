//! Run configuration: TOML text with flat sections and one key per line.
//!
//! Parsing walks the table key by key so every unknown key and range
//! violation is reported at once, each with its `section.key` name.

use std::fmt;

use serde::Serialize;
use toml::{Table, Value};

use vnfp_core::homogeneous::{GridSpec, HomogeneousConfig, InitialDatum};
use vnfp_core::perturbation::{Formulation, PerturbationConfig};
use vnfp_core::selfsimilar::{check_lambda, SelfSimilarConfig};
use vnfp_core::{Error as CoreError, Execution, GridKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Homogeneous,
    Selfsimilar,
    Perturbation,
    Picard,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Homogeneous => "homogeneous",
            Command::Selfsimilar => "selfsimilar",
            Command::Perturbation => "perturbation",
            Command::Picard => "picard",
            Command::Verify => "verify",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [
            Command::Homogeneous,
            Command::Selfsimilar,
            Command::Perturbation,
            Command::Picard,
            Command::Verify,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

/// Weights for the perturbation energy monitors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySettings {
    /// `(δ₁, δ₂)` with `0 < δ₁ < 1/2 < δ₂`.
    pub deltas: [f64; 2],
    /// `λ` of the tilde family.
    pub lambda: f64,
    pub k_max: usize,
}

impl Default for EnergySettings {
    fn default() -> Self {
        Self { deltas: [0.25, 1.0], lambda: 1.0, k_max: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub homogeneous: HomogeneousConfig,
    pub selfsimilar: SelfSimilarConfig,
    pub perturbation: PerturbationConfig,
    pub energy: EnergySettings,
    pub picard_iterates: usize,
    pub verify_samples: usize,
    pub parallel: bool,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let perturbation = match command {
            Command::Picard => PerturbationConfig { t_end: 0.1, ..Default::default() },
            _ => PerturbationConfig::default(),
        };
        Self {
            command,
            homogeneous: HomogeneousConfig::default(),
            selfsimilar: SelfSimilarConfig::default(),
            perturbation,
            energy: EnergySettings::default(),
            picard_iterates: 5,
            verify_samples: 10_000,
            parallel: true,
        }
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.key, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

struct Walker {
    violations: Vec<Violation>,
}

impl Walker {
    fn fail(&mut self, key: &str, message: impl Into<String>) {
        self.violations.push(Violation { key: key.to_string(), message: message.into() });
    }

    fn float(&mut self, key: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.fail(key, format!("expected a number, got {}", v.type_str()));
                None
            }
        }
    }

    fn finite(&mut self, key: &str, v: &Value) -> Option<f64> {
        let x = self.float(key, v)?;
        if x.is_finite() {
            Some(x)
        } else {
            self.fail(key, format!("must be finite, got {x}"));
            None
        }
    }

    fn positive(&mut self, key: &str, v: &Value) -> Option<f64> {
        let x = self.float(key, v)?;
        if x > 0.0 && x.is_finite() {
            Some(x)
        } else {
            self.fail(key, format!("must be finite and > 0, got {x}"));
            None
        }
    }

    fn nonnegative(&mut self, key: &str, v: &Value) -> Option<f64> {
        let x = self.float(key, v)?;
        if x >= 0.0 && x.is_finite() {
            Some(x)
        } else {
            self.fail(key, format!("must be finite and >= 0, got {x}"));
            None
        }
    }

    fn count(&mut self, key: &str, v: &Value, min: i64) -> Option<usize> {
        match v {
            Value::Integer(i) if *i >= min => Some(*i as usize),
            Value::Integer(i) => {
                self.fail(key, format!("must be an integer >= {min}, got {i}"));
                None
            }
            _ => {
                self.fail(key, format!("expected an integer, got {}", v.type_str()));
                None
            }
        }
    }

    fn string<'a>(&mut self, key: &str, v: &'a Value) -> Option<&'a str> {
        match v {
            Value::String(s) => Some(s),
            _ => {
                self.fail(key, format!("expected a string, got {}", v.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, key: &str, v: &Value) -> Option<Vec<f64>> {
        let Value::Array(items) = v else {
            self.fail(key, format!("expected an array of numbers, got {}", v.type_str()));
            return None;
        };
        let out: Option<Vec<f64>> = items.iter().map(|x| self.finite(key, x)).collect();
        if matches!(&out, Some(xs) if xs.is_empty()) {
            self.fail(key, "must not be empty");
            return None;
        }
        out
    }
}

#[derive(Default)]
struct DatumKeys {
    family: Option<String>,
    amplitude: Option<f64>,
    width: Option<f64>,
    value: Option<f64>,
}

fn apply_datum(base: InitialDatum, keys: &DatumKeys, w: &mut Walker) -> InitialDatum {
    let family = keys.family.clone().unwrap_or_else(|| {
        match base {
            InitialDatum::Gaussian { .. } => "gaussian",
            InitialDatum::Constant { .. } => "constant",
            InitialDatum::Zero => "zero",
        }
        .to_string()
    });
    let (amp0, width0) = match base {
        InitialDatum::Gaussian { amplitude, width } => (amplitude, width),
        _ => (1.0, 1.0),
    };
    let value0 = match base {
        InitialDatum::Constant { value } => value,
        _ => 0.0,
    };
    let stray = |w: &mut Walker, key: &str, present: bool| {
        if present {
            w.fail(key, format!("not used by the {family} family"));
        }
    };
    match family.as_str() {
        "gaussian" => {
            stray(w, "datum.value", keys.value.is_some());
            InitialDatum::Gaussian {
                amplitude: keys.amplitude.unwrap_or(amp0),
                width: keys.width.unwrap_or(width0),
            }
        }
        "constant" => {
            stray(w, "datum.amplitude", keys.amplitude.is_some());
            stray(w, "datum.width", keys.width.is_some());
            InitialDatum::Constant { value: keys.value.unwrap_or(value0) }
        }
        "zero" => {
            stray(w, "datum.amplitude", keys.amplitude.is_some());
            stray(w, "datum.width", keys.width.is_some());
            stray(w, "datum.value", keys.value.is_some());
            InitialDatum::Zero
        }
        other => {
            w.fail("datum.family", format!("unknown family {other:?} (gaussian, constant, zero)"));
            base
        }
    }
}

fn core_key(name: &str) -> String {
    match name {
        "dt" | "t_end" | "sample_every" => format!("time.{name}"),
        "phi_in" | "psi_in" => format!("initial.{name}"),
        "amplitude" | "value" => format!("datum.{name}"),
        "f_amplitude" | "phi_amplitude" | "dphi_amplitude" | "mode" => format!("perturbation.{name}"),
        "lambda" => "monitors.lambdas".into(),
        "k_max" | "gamma" => format!("monitors.{name}"),
        other => other.to_string(),
    }
}

fn from_core(e: CoreError, fallback: &str) -> Violation {
    match e {
        CoreError::InvalidParameter { name, reason } => Violation { key: core_key(name), message: reason },
        CoreError::Cfl { dt, dx } => Violation {
            key: "time.dt".into(),
            message: format!("CFL violation: dt = {dt} exceeds dx = {dx}"),
        },
        CoreError::InvalidGrid(m) => Violation { key: "grid".into(), message: m },
        other => Violation { key: fallback.into(), message: other.to_string() },
    }
}

/// Parses and validates a configuration for `command`.
pub fn parse_config(text: &str, command: Command) -> Result<RunConfig, ConfigError> {
    let table: Table = toml::from_str(text).map_err(|e| ConfigError {
        violations: vec![Violation { key: "<syntax>".into(), message: e.to_string() }],
    })?;
    let mut w = Walker { violations: Vec::new() };
    let mut cfg = RunConfig::defaults(command);

    let mut grid: Option<GridSpec> = None;
    let mut grid_kind = None;
    let mut grid_n = None;
    let mut grid_max = None;
    let mut datum = DatumKeys::default();
    let (mut dt, mut t_end, mut sample_every) = (None, None, None);
    let (mut phi_in, mut psi_in) = (None, None);

    for (section, body) in &table {
        if section == "command" {
            if let Some(s) = w.string("command", body) {
                match Command::from_name(s) {
                    Some(c) if c == command => {}
                    Some(c) => w.fail("command", format!("file is for {:?} but {:?} was requested", c.name(), command.name())),
                    None => w.fail("command", format!("unknown command {s:?}")),
                }
            }
            continue;
        }
        let Value::Table(entries) = body else {
            w.fail(section, "expected a [section]");
            continue;
        };
        for (key, v) in entries {
            let full = format!("{section}.{key}");
            match (section.as_str(), key.as_str()) {
                ("grid", "kind") => {
                    if let Some(s) = w.string(&full, v) {
                        match s {
                            "radial3d" => grid_kind = Some(GridKind::Radial3d),
                            "line1d" => grid_kind = Some(GridKind::Line1d),
                            other => w.fail(&full, format!("unknown grid kind {other:?} (radial3d, line1d)")),
                        }
                    }
                }
                ("grid", "n") => grid_n = w.count(&full, v, 3),
                ("grid", "domain_max") => grid_max = w.positive(&full, v),
                ("space", "n_x") => {
                    if let Some(n) = w.count(&full, v, 3) {
                        cfg.perturbation.n_x = n;
                    }
                }
                ("space", "length") => {
                    if let Some(x) = w.positive(&full, v) {
                        cfg.perturbation.length = x;
                    }
                }
                ("time", "dt") => dt = w.positive(&full, v),
                ("time", "t_end") => t_end = w.positive(&full, v),
                ("time", "sample_every") => sample_every = w.count(&full, v, 1),
                ("initial", "phi_in") => phi_in = w.finite(&full, v),
                ("initial", "psi_in") => psi_in = w.finite(&full, v),
                ("datum", "family") => datum.family = w.string(&full, v).map(str::to_string),
                ("datum", "amplitude") => datum.amplitude = w.nonnegative(&full, v),
                ("datum", "width") => datum.width = w.positive(&full, v),
                ("datum", "value") => datum.value = w.nonnegative(&full, v),
                ("perturbation", "formulation") => {
                    if let Some(s) = w.string(&full, v) {
                        match s {
                            "physical" => cfg.perturbation.formulation = Formulation::Physical,
                            "selfsimilar" => cfg.perturbation.formulation = Formulation::SelfSimilar,
                            other => w.fail(&full, format!("unknown formulation {other:?} (physical, selfsimilar)")),
                        }
                    }
                }
                ("perturbation", "f_amplitude") => {
                    if let Some(x) = w.finite(&full, v) {
                        cfg.perturbation.perturbation.f_amplitude = x;
                    }
                }
                ("perturbation", "phi_amplitude") => {
                    if let Some(x) = w.finite(&full, v) {
                        cfg.perturbation.perturbation.phi_amplitude = x;
                    }
                }
                ("perturbation", "dphi_amplitude") => {
                    if let Some(x) = w.finite(&full, v) {
                        cfg.perturbation.perturbation.dphi_amplitude = x;
                    }
                }
                ("perturbation", "mode") => {
                    if let Some(n) = w.count(&full, v, 0) {
                        cfg.perturbation.perturbation.mode = n;
                    }
                }
                ("perturbation", "width") => {
                    if let Some(x) = w.positive(&full, v) {
                        cfg.perturbation.perturbation.width = x;
                    }
                }
                ("monitors", "gamma") => {
                    if let Some(x) = w.finite(&full, v) {
                        cfg.homogeneous.gamma = x;
                    }
                }
                ("monitors", "lambdas") => {
                    if let Some(ls) = w.floats(&full, v) {
                        for l in &ls {
                            if let Err(e) = check_lambda(*l) {
                                w.violations.push(from_core(e, &full));
                            }
                        }
                        cfg.selfsimilar.lambdas = ls;
                    }
                }
                ("monitors", "lambda") => {
                    if let Some(l) = w.finite(&full, v) {
                        if let Err(e) = check_lambda(l) {
                            let mut v = from_core(e, &full);
                            v.key = full.clone();
                            w.violations.push(v);
                        }
                        cfg.energy.lambda = l;
                    }
                }
                ("monitors", "k_max") => {
                    if let Some(k) = w.count(&full, v, 0) {
                        if k > 4 {
                            w.fail(&full, format!("must be at most 4, got {k}"));
                        }
                        cfg.selfsimilar.k_max = k;
                        cfg.energy.k_max = k;
                    }
                }
                ("monitors", "deltas") => {
                    if let Some(ds) = w.floats(&full, v) {
                        if ds.len() != 2 {
                            w.fail(&full, format!("expected [delta_1, delta_2], got {} values", ds.len()));
                        } else if !(ds[0] > 0.0 && ds[0] < 0.5) {
                            w.fail(&full, format!("delta_1 must lie in (0, 1/2), got {}", ds[0]));
                        } else if ds[1] <= 0.5 {
                            w.fail(&full, format!("delta_2 must exceed 1/2, got {}", ds[1]));
                        } else {
                            cfg.energy.deltas = [ds[0], ds[1]];
                        }
                    }
                }
                ("picard", "iterates") => {
                    if let Some(n) = w.count(&full, v, 3) {
                        cfg.picard_iterates = n;
                    }
                }
                ("verify", "samples") => {
                    if let Some(n) = w.count(&full, v, 1) {
                        cfg.verify_samples = n;
                    }
                }
                ("run", "execution") => {
                    if let Some(s) = w.string(&full, v) {
                        match s {
                            "parallel" => cfg.parallel = true,
                            "sequential" => cfg.parallel = false,
                            other => w.fail(&full, format!("unknown execution {other:?} (parallel, sequential)")),
                        }
                    }
                }
                _ => w.fail(&full, "unknown key"),
            }
        }
    }

    // apply the shared keys to the configuration of the requested command
    macro_rules! shared {
        ($c:expr, $grid:ident, $datum:ident) => {{
            let c = $c;
            let mut g = c.$grid;
            if let Some(k) = grid_kind {
                g.kind = k;
            }
            if let Some(n) = grid_n {
                g.n = n;
            }
            if let Some(m) = grid_max {
                g.domain_max = m;
            }
            grid = Some(g);
            c.$grid = g;
            c.$datum = apply_datum(c.$datum, &datum, &mut w);
            if let Some(x) = dt {
                c.dt = x;
            }
            if let Some(x) = t_end {
                c.t_end = x;
            }
            if let Some(x) = sample_every {
                c.sample_every = x;
            }
            if let Some(x) = phi_in {
                c.phi_in = x;
            }
            if let Some(x) = psi_in {
                c.psi_in = x;
            }
        }};
    }
    match command {
        Command::Homogeneous => shared!(&mut cfg.homogeneous, grid, datum),
        Command::Selfsimilar => shared!(&mut cfg.selfsimilar, grid, datum),
        Command::Perturbation | Command::Picard => shared!(&mut cfg.perturbation, momentum, background),
        Command::Verify => {}
    }
    cfg.perturbation.execution = cfg.execution();

    if w.violations.is_empty() {
        let checked = match command {
            Command::Homogeneous => cfg.homogeneous.validate(),
            Command::Selfsimilar => cfg.selfsimilar.validate(),
            Command::Perturbation | Command::Picard => {
                if grid.map(|g| g.kind) == Some(GridKind::Radial3d) {
                    Err(CoreError::InvalidGrid("grid.kind must be line1d for perturbation runs".into()))
                } else {
                    cfg.perturbation.validate()
                }
            }
            Command::Verify => Ok(()),
        };
        if let Err(e) = checked {
            w.violations.push(from_core(e, "<config>"));
        }
    }
    if w.violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { violations: w.violations })
    }
}
