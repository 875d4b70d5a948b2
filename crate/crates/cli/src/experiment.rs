//! Sweep runner: one solve per sweep point, one CSV row per point and policy.

use std::fmt::Write as _;

use aoi_core::{
    simulate, stationary_average_cost, Error, Model, PolicySpec, ReliableCaseAnalysis,
    ReliableChannel, SolverResult, StructureReport, ValueChecks, RNG_ALGORITHM,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, PolicyKind, Sweep};
use crate::format::{g12, g12_opt};
use crate::{solve, uncapped_checks, write_file, CliError};

pub const CSV_HEADER: &str =
    "sweep_var,sweep_value,policy,theta,avg_cost_analytic,avg_cost_sim,stderr,avg_aoi,avg_energy,threshold,n_states,seed";

pub const DEFAULT_PREFIX: &str = "aoi_sweep";

/// One CSV row. Missing numbers print as `NA`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub policy: &'static str,
    pub theta: Option<f64>,
    pub avg_cost_analytic: Option<f64>,
    pub avg_cost_sim: Option<f64>,
    pub stderr: Option<f64>,
    pub avg_aoi: Option<f64>,
    pub avg_energy: Option<f64>,
    pub threshold: Option<u32>,
    pub n_states: u32,
    pub seed: Option<u64>,
}

/// Everything computed at one sweep point.
#[derive(Debug)]
pub struct PointResult {
    pub value: f64,
    pub model: Model,
    pub solved: Result<SolverResult, Error>,
    pub structure: Option<StructureReport>,
    pub uncapped: Option<Result<ValueChecks, String>>,
    pub reliable: Option<ReliableCaseAnalysis>,
    pub rows: Vec<Row>,
}

impl PointResult {
    pub fn converged(&self) -> bool {
        self.solved.is_ok()
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub points: Vec<PointResult>,
}

impl SweepOutcome {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(PointResult::converged)
    }

    pub fn csv(&self, variable: &str) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            for r in &p.rows {
                let _ = writeln!(
                    out,
                    "{variable},{},{},{},{},{},{},{},{},{},{},{}",
                    g12(p.value),
                    r.policy,
                    g12_opt(r.theta),
                    g12_opt(r.avg_cost_analytic),
                    g12_opt(r.avg_cost_sim),
                    g12_opt(r.stderr),
                    g12_opt(r.avg_aoi),
                    g12_opt(r.avg_energy),
                    r.threshold
                        .map_or_else(|| "NA".to_string(), |t| t.to_string()),
                    r.n_states,
                    r.seed.map_or_else(|| "NA".to_string(), |s| s.to_string()),
                );
            }
        }
        out
    }

    /// Optimal action per state at every converged point.
    pub fn policy_table(&self, variable: &str) -> String {
        let mut out = String::from("sweep_var,sweep_value,state,action\n");
        for p in &self.points {
            if let Ok(solved) = &p.solved {
                for (i, a) in solved.policy.actions().iter().enumerate() {
                    let _ = writeln!(out, "{variable},{},{},{}", g12(p.value), i + 1, a.name());
                }
            }
        }
        out
    }

    pub fn structure_text(&self, variable: &str) -> String {
        let mut out = String::new();
        for p in &self.points {
            let _ = writeln!(out, "[{variable} = {}]", g12(p.value));
            match &p.solved {
                Ok(s) => {
                    let _ = writeln!(out, "theta = {}", g12(s.theta));
                    let _ = writeln!(out, "iterations = {}", s.iterations);
                }
                Err(e) => {
                    let _ = writeln!(out, "solver = failed ({e})");
                }
            }
            if let Some(report) = &p.structure {
                out.push_str(&report.to_string());
            }
            match &p.uncapped {
                Some(Ok(c)) => {
                    let _ = writeln!(
                        out,
                        "uncapped monotone_ok = {}  concave_ok = {}  slope_bound_ok = {}",
                        c.monotone_ok, c.concave_ok, c.slope_bound_ok
                    );
                }
                Some(Err(why)) => {
                    let _ = writeln!(out, "uncapped checks {why}");
                }
                None => {}
            }
            if let Some(r) = &p.reliable {
                out.push_str("reliable channel:\n");
                out.push_str(&r.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Solves and evaluates every sweep point on a bounded worker pool. Results
/// come back in sweep order.
pub fn run_sweep(cfg: &ExperimentConfig, sweep: &Sweep) -> Result<SweepOutcome, CliError> {
    let models = sweep
        .values
        .iter()
        .map(|&v| {
            let params = sweep.variable.apply(&cfg.base, v)?;
            Model::new(params).map_err(|e| CliError::config("sweep.values", e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = sweep.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config("sweep.threads", e.to_string()))?;

    let points = pool.install(|| {
        models
            .into_par_iter()
            .zip(sweep.values.par_iter())
            .enumerate()
            .map(|(i, (model, &value))| run_point(cfg, i, value, model))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(SweepOutcome { points })
}

/// Solves one instance and produces one row per configured policy.
/// Simulation run `k` of point `i` uses seed `base + i * n_policies + k`.
pub fn run_point(
    cfg: &ExperimentConfig,
    index: usize,
    value: f64,
    model: Model,
) -> Result<PointResult, CliError> {
    let solved = solve(&model, cfg);
    let cap = model.age_cap();
    let (structure, uncapped) = match &solved {
        Ok(s) => {
            let report =
                StructureReport::analyze(&s.policy, &s.values, &model, cfg.solver.epsilon, false);
            let uncapped = uncapped_checks(&model, cfg);
            (Some(report), uncapped)
        }
        Err(_) => (None, None),
    };
    let reliable = ReliableChannel::new(&model).ok().map(|r| r.analysis());

    let n_policies = cfg.policies.len() as u64;
    let mut rows = Vec::with_capacity(cfg.policies.len());
    for (k, kind) in cfg.policies.iter().enumerate() {
        let theta = solved.as_ref().ok().map(|s| s.theta);
        let (spec, threshold) = match kind {
            PolicyKind::Optimal => match &solved {
                Ok(s) => (
                    PolicySpec::Solved(s.policy.clone()),
                    structure.as_ref().and_then(|r| r.threshold),
                ),
                Err(_) => {
                    rows.push(Row {
                        policy: kind.name(),
                        theta: None,
                        avg_cost_analytic: None,
                        avg_cost_sim: None,
                        stderr: None,
                        avg_aoi: None,
                        avg_energy: None,
                        threshold: None,
                        n_states: cap,
                        seed: None,
                    });
                    continue;
                }
            },
            PolicyKind::Fixed(spec) => {
                let t = match spec {
                    PolicySpec::Threshold { threshold, .. } => *threshold,
                    _ => 1,
                };
                (spec.clone(), Some(t))
            }
        };
        let exact = stationary_average_cost(&spec, &model)?;
        let (sim, seed) = if cfg.sim.horizon_minislots > 0 {
            let run = cfg.sim.substream(index as u64 * n_policies + k as u64);
            let stats = simulate(&spec, &model, &run)
                .map_err(|e| CliError::config("sim", e.to_string()))?;
            (Some(stats), Some(run.seed))
        } else {
            (None, None)
        };
        rows.push(Row {
            policy: kind.name(),
            theta,
            avg_cost_analytic: Some(exact.avg_cost),
            avg_cost_sim: sim.as_ref().map(|s| s.avg_cost),
            stderr: sim.as_ref().map(|s| s.stderr_cost),
            avg_aoi: Some(exact.avg_aoi),
            avg_energy: Some(exact.avg_energy),
            threshold,
            n_states: cap,
            seed,
        });
    }
    Ok(PointResult {
        value,
        model,
        solved,
        structure,
        uncapped,
        reliable,
        rows,
    })
}

/// Deterministic description of the run written next to the CSV.
pub fn metadata(cfg: &ExperimentConfig, sweep: &Sweep) -> String {
    let p = &cfg.base;
    let mut out = String::new();
    let _ = writeln!(out, "rng = {RNG_ALGORITHM}");
    let _ = writeln!(out, "seed = {}", cfg.sim.seed);
    let _ = writeln!(
        out,
        "seed_rule = seed + point_index * n_policies + policy_index"
    );
    let _ = writeln!(out, "horizon = {}", cfg.sim.horizon_minislots);
    let _ = writeln!(out, "warmup = {}", cfg.sim.warmup_minislots);
    let _ = writeln!(out, "initial_aoi = {}", cfg.sim.initial_aoi);
    let _ = writeln!(out, "method = {}", cfg.method.name());
    let _ = writeln!(out, "epsilon = {}", g12(cfg.solver.epsilon));
    let _ = writeln!(out, "reference_state = {}", cfg.solver.reference_state);
    let _ = writeln!(out, "tolerance = {}", g12(cfg.solver.tolerance));
    let _ = writeln!(out, "max_iterations = {}", cfg.solver.max_iterations);
    let _ = writeln!(out, "sweep_var = {}", sweep.variable.name());
    let values: Vec<String> = sweep.values.iter().map(|&v| g12(v)).collect();
    let _ = writeln!(out, "sweep_values = [{}]", values.join(", "));
    let names: Vec<&str> = cfg.policies.iter().map(PolicyKind::name).collect();
    let _ = writeln!(out, "policies = [{}]", names.join(", "));
    let _ = writeln!(
        out,
        "params = t_u={} t_u_prime={} l={} v={} f={} tau={} kappa={} P={} p_s={} delta_hat={} omega={}",
        p.t_u,
        p.t_u_prime,
        p.bits_per_packet,
        p.cycles_per_bit,
        g12(p.cpu_freq),
        g12(p.minislot),
        g12(p.kappa),
        g12(p.tx_power),
        g12(p.p_s),
        p.delta_hat,
        g12(p.omega)
    );
    out
}

/// Runs the sweep and writes `<prefix>.csv`, `<prefix>_policies.csv`,
/// `<prefix>_structure.txt` and `<prefix>_meta.txt`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepOutcome, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("sweep", "missing [sweep] section".into()))?;
    let prefix = cfg
        .output_prefix
        .clone()
        .unwrap_or_else(|| DEFAULT_PREFIX.to_string());
    if let Some(parent) = std::path::Path::new(&prefix).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    let outcome = run_sweep(cfg, sweep)?;
    let var = sweep.variable.name();
    write_file(&format!("{prefix}.csv"), &outcome.csv(var))?;
    write_file(
        &format!("{prefix}_policies.csv"),
        &outcome.policy_table(var),
    )?;
    write_file(
        &format!("{prefix}_structure.txt"),
        &outcome.structure_text(var),
    )?;
    write_file(&format!("{prefix}_meta.txt"), &metadata(cfg, sweep))?;
    Ok(outcome)
}
