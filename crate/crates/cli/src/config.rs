//! Experiment configuration: TOML with `[params]`, `[sweep]`, `[policies]`,
//! `[sim]`, `[solver]` and `[output]` sections. Every section and key is
//! optional except where a subcommand needs it (`sweep` needs `[sweep]`).

use std::path::Path;

use aoi_core::{Action, PolicySpec, SimConfig, SolverOptions, SystemParams};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub t_u: Option<u32>,
    pub t_u_prime: Option<u32>,
    #[serde(alias = "l")]
    pub bits_per_packet: Option<u32>,
    #[serde(alias = "v")]
    pub cycles_per_bit: Option<u32>,
    #[serde(alias = "f")]
    pub cpu_freq: Option<f64>,
    #[serde(alias = "tau")]
    pub minislot: Option<f64>,
    pub kappa: Option<f64>,
    #[serde(alias = "power")]
    pub tx_power: Option<f64>,
    pub p_s: Option<f64>,
    pub delta_hat: Option<u32>,
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: String,
    pub values: Vec<f64>,
    /// Worker threads; defaults to the available parallelism.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoliciesSection {
    pub kinds: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: Option<u64>,
    pub warmup: Option<u64>,
    pub seed: Option<u64>,
    pub initial_aoi: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: Option<f64>,
    pub reference_state: Option<u32>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub method: Option<String>,
    /// Re-solve with a raised cap for the value-function checks.
    pub uncapped_checks: Option<bool>,
    /// Largest raised chain the uncapped checks may solve.
    pub uncapped_max_states: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub params: ParamsSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub policies: PoliciesSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Dense solves above this size take seconds each.
pub const DEFAULT_UNCAPPED_MAX_STATES: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PolicyIteration,
    ValueIteration,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PolicyIteration => "rpi",
            Method::ValueIteration => "rvi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    SuccessProbability,
    CyclesPerBit,
    Omega,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::SuccessProbability => "p_s",
            SweepVariable::CyclesPerBit => "v",
            SweepVariable::Omega => "omega",
        }
    }

    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "p_s" => Ok(SweepVariable::SuccessProbability),
            "v" | "cycles_per_bit" => Ok(SweepVariable::CyclesPerBit),
            "omega" => Ok(SweepVariable::Omega),
            other => Err(CliError::config(
                "sweep.variable",
                format!("unknown variable {other:?} (p_s, v, omega)"),
            )),
        }
    }

    /// Parameters of the sweep point `value`.
    pub fn apply(self, base: &SystemParams, value: f64) -> Result<SystemParams, CliError> {
        let mut p = base.clone();
        match self {
            SweepVariable::SuccessProbability => {
                if !(value > 0.0 && value <= 1.0) {
                    return Err(CliError::config(
                        "sweep.values",
                        format!("p_s = {value} outside (0, 1]"),
                    ));
                }
                p.p_s = value;
            }
            SweepVariable::CyclesPerBit => {
                if value < 0.0 || value.fract() != 0.0 || value > f64::from(u32::MAX) {
                    return Err(CliError::config(
                        "sweep.values",
                        format!("v = {value} is not a nonnegative integer"),
                    ));
                }
                p.cycles_per_bit = value as u32;
            }
            SweepVariable::Omega => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(CliError::config(
                        "sweep.values",
                        format!("omega = {value} must be >= 0"),
                    ));
                }
                p.omega = value;
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub threads: Option<usize>,
}

/// Policy kinds a sweep evaluates; `Optimal` is solved per sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    Optimal,
    Fixed(PolicySpec),
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Optimal => "optimal",
            PolicyKind::Fixed(spec) => spec.name(),
        }
    }
}

/// Parses `optimal`, `zero_wait_no_computation`, `zero_wait_computation` or
/// `threshold:<omega>:<below>:<at_or_above>` (actions by name).
pub fn parse_policy(s: &str) -> Result<PolicyKind, CliError> {
    let bad = |why: String| CliError::config("policies.kinds", why);
    match s {
        "optimal" => Ok(PolicyKind::Optimal),
        "zero_wait_no_computation" => Ok(PolicyKind::Fixed(PolicySpec::ZeroWaitNoComputation)),
        "zero_wait_computation" => Ok(PolicyKind::Fixed(PolicySpec::ZeroWaitComputation)),
        other => {
            let parts: Vec<&str> = other.split(':').collect();
            if parts.len() != 4 || parts[0] != "threshold" {
                return Err(bad(format!("unknown policy {other:?}")));
            }
            let threshold = parts[1]
                .parse()
                .map_err(|_| bad(format!("bad threshold in {other:?}")))?;
            let action = |t: &str| {
                t.parse::<Action>()
                    .map_err(|_| bad(format!("bad action {t:?} in {other:?}")))
            };
            Ok(PolicyKind::Fixed(PolicySpec::Threshold {
                threshold,
                below: action(parts[2])?,
                at_or_above: action(parts[3])?,
            }))
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub base: SystemParams,
    pub sweep: Option<Sweep>,
    pub policies: Vec<PolicyKind>,
    pub sim: SimConfig,
    pub solver: SolverOptions,
    pub method: Method,
    pub uncapped_checks: bool,
    pub uncapped_max_states: u32,
    pub output_prefix: Option<String>,
}

/// Command-line adjustments applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub delta_hat: Option<u32>,
    pub epsilon: Option<f64>,
    pub out: Option<String>,
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::config("--config", format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config("config", e.to_string()))?;
        for set in &overrides.sets {
            apply_set(&mut table, set)?;
        }
        let file: ConfigFile = ConfigFile::deserialize(toml::Value::Table(table))
            .map_err(|e| CliError::config("config", e.to_string()))?;
        let mut cfg = Self::from_file(file)?;
        if let Some(seed) = overrides.seed {
            cfg.sim.seed = seed;
        }
        if let Some(cap) = overrides.delta_hat {
            cfg.base.delta_hat = cap;
        }
        if let Some(eps) = overrides.epsilon {
            cfg.solver.epsilon = eps;
        }
        if let Some(out) = &overrides.out {
            cfg.output_prefix = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_file(file: ConfigFile) -> Result<Self, CliError> {
        let d = SystemParams::default();
        let p = file.params;
        let base = SystemParams {
            t_u: p.t_u.unwrap_or(d.t_u),
            t_u_prime: p.t_u_prime.unwrap_or(d.t_u_prime),
            bits_per_packet: p.bits_per_packet.unwrap_or(d.bits_per_packet),
            cycles_per_bit: p.cycles_per_bit.unwrap_or(d.cycles_per_bit),
            cpu_freq: p.cpu_freq.unwrap_or(d.cpu_freq),
            minislot: p.minislot.unwrap_or(d.minislot),
            kappa: p.kappa.unwrap_or(d.kappa),
            tx_power: p.tx_power.unwrap_or(d.tx_power),
            p_s: p.p_s.unwrap_or(d.p_s),
            delta_hat: p.delta_hat.unwrap_or(d.delta_hat),
            omega: p.omega.unwrap_or(d.omega),
        };

        let sweep = match file.sweep {
            None => None,
            Some(s) => {
                if s.values.is_empty() {
                    return Err(CliError::config("sweep.values", "empty sweep list".into()));
                }
                if s.threads == Some(0) {
                    return Err(CliError::config("sweep.threads", "must be >= 1".into()));
                }
                Some(Sweep {
                    variable: SweepVariable::parse(&s.variable)?,
                    values: s.values,
                    threads: s.threads,
                })
            }
        };

        let kinds = file.policies.kinds.unwrap_or_else(|| {
            [
                "optimal",
                "zero_wait_no_computation",
                "zero_wait_computation",
            ]
            .map(String::from)
            .to_vec()
        });
        if kinds.is_empty() {
            return Err(CliError::config(
                "policies.kinds",
                "at least one policy is required".into(),
            ));
        }
        let policies = kinds
            .iter()
            .map(|k| parse_policy(k))
            .collect::<Result<Vec<_>, _>>()?;

        let horizon = file.sim.horizon.unwrap_or(1_000_000);
        let sim = SimConfig {
            horizon_minislots: horizon,
            warmup_minislots: file.sim.warmup.unwrap_or(horizon / 10),
            seed: file.sim.seed.unwrap_or(1),
            initial_aoi: file.sim.initial_aoi.unwrap_or(1),
        };

        let defaults = SolverOptions::default();
        let solver = SolverOptions {
            epsilon: file.solver.epsilon.unwrap_or(defaults.epsilon),
            reference_state: file
                .solver
                .reference_state
                .unwrap_or(defaults.reference_state),
            tolerance: file.solver.tolerance.unwrap_or(defaults.tolerance),
            max_iterations: file
                .solver
                .max_iterations
                .unwrap_or(defaults.max_iterations),
        };
        let method = match file.solver.method.as_deref() {
            None | Some("rpi") => Method::PolicyIteration,
            Some("rvi") => Method::ValueIteration,
            Some(other) => {
                return Err(CliError::config(
                    "solver.method",
                    format!("unknown method {other:?} (rpi, rvi)"),
                ))
            }
        };

        Ok(ExperimentConfig {
            base,
            sweep,
            policies,
            sim,
            solver,
            method,
            uncapped_checks: file.solver.uncapped_checks.unwrap_or(true),
            uncapped_max_states: file
                .solver
                .uncapped_max_states
                .unwrap_or(DEFAULT_UNCAPPED_MAX_STATES),
            output_prefix: file.output.prefix,
        })
    }

    fn validate(&self) -> Result<(), CliError> {
        aoi_core::Model::new(self.base.clone()).map_err(|e| match e {
            aoi_core::Error::InvalidParam { field, reason } => {
                CliError::config(&format!("params.{field}"), reason)
            }
            other => CliError::config("params", other.to_string()),
        })?;
        if let Some(sweep) = &self.sweep {
            for &v in &sweep.values {
                let p = sweep.variable.apply(&self.base, v)?;
                aoi_core::Model::new(p).map_err(|e| {
                    CliError::config(
                        "sweep.values",
                        format!("{} = {v}: {e}", sweep.variable.name()),
                    )
                })?;
            }
        }
        if !(self.solver.epsilon > 0.0 && self.solver.epsilon <= 1.0) {
            return Err(CliError::config(
                "solver.epsilon",
                format!("{} outside (0, 1]", self.solver.epsilon),
            ));
        }
        if self.solver.reference_state == 0 || self.solver.reference_state > self.base.delta_hat {
            return Err(CliError::config(
                "solver.reference_state",
                format!("outside 1..={}", self.base.delta_hat),
            ));
        }
        if self.sim.horizon_minislots > 0 && self.sim.warmup_minislots >= self.sim.horizon_minislots
        {
            return Err(CliError::config(
                "sim.warmup",
                "must be below sim.horizon".into(),
            ));
        }
        Ok(())
    }
}

/// `section.key=value`; a bare `key` means `params.key`. The value is parsed
/// as a TOML value, falling back to a string.
fn apply_set(table: &mut toml::Table, set: &str) -> Result<(), CliError> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| CliError::config("--set", format!("expected key=value, got {set:?}")))?;
    let (section, key) = key.trim().split_once('.').unwrap_or(("params", key.trim()));
    let value = format!("x = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::config(
            "--set",
            format!("{section} is not a section"),
        )),
    }
}
