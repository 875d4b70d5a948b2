//! Human-readable reports for the single-instance subcommands.

use std::fmt::Write as _;

use aoi_core::{
    simulate, stationary_average_cost, Action, Model, PolicySpec, ReliableChannel, StructureReport,
};

use crate::config::{ExperimentConfig, PolicyKind};
use crate::format::g12;
use crate::{solve, uncapped_checks, CliError};

fn model_of(cfg: &ExperimentConfig) -> Result<Model, CliError> {
    Model::new(cfg.base.clone()).map_err(|e| CliError::config("params", e.to_string()))
}

fn describe_model(out: &mut String, model: &Model) {
    let p = model.params();
    let _ = writeln!(
        out,
        "params: t_u={} t_u_prime={} l={} v={} f={} tau={} kappa={} P={} p_s={} delta_hat={} omega={}",
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
    let _ = writeln!(
        out,
        "T_p = {}  L(transmit) = {}  L(preprocess) = {}  C_p = {}  C_u = {}",
        model.preprocessing_duration(),
        model.action_duration(Action::Transmit),
        model.action_duration(Action::PreprocessTransmit),
        g12(model.compute_energy_per_slot()),
        g12(model.transmit_energy_per_slot()),
    );
}

/// Solves one instance and reports the optimum, its structure and, on a
/// reliable channel, the closed-form cross-check.
pub fn solve_report(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let model = model_of(cfg)?;
    let solved = solve(&model, cfg).map_err(CliError::Solver)?;
    let mut out = String::new();
    describe_model(&mut out, &model);
    let _ = writeln!(out, "method = {}", cfg.method.name());
    let _ = writeln!(out, "theta = {}", g12(solved.theta));
    let _ = writeln!(out, "iterations = {}", solved.iterations);
    let _ = writeln!(out, "residual = {:.3e}", solved.residual);

    let report = StructureReport::analyze(
        &solved.policy,
        &solved.values,
        &model,
        cfg.solver.epsilon,
        false,
    );
    out.push_str("\n[structure]\n");
    out.push_str(&report.to_string());
    if let Some(checks) = uncapped_checks(&model, cfg) {
        match checks {
            Ok(c) => {
                let _ = writeln!(out, "uncapped_monotone_ok = {}", c.monotone_ok);
                let _ = writeln!(out, "uncapped_concave_ok = {}", c.concave_ok);
                let _ = writeln!(out, "uncapped_slope_bound_ok = {}", c.slope_bound_ok);
            }
            Err(why) => {
                let _ = writeln!(out, "uncapped_checks = {why}");
            }
        }
    }
    let actions: Vec<&str> = solved.policy.actions().iter().map(|a| a.name()).collect();
    let _ = writeln!(out, "policy = {}", compress(&actions));

    if let Ok(rc) = ReliableChannel::new(&model) {
        let analysis = rc.analysis();
        out.push_str("\n[reliable channel]\n");
        out.push_str(&analysis.to_string());
        if let Some(j) = analysis.optimal_cost {
            let _ = writeln!(out, "closed_form_delta = {:.3e}", (solved.theta - j).abs());
        }
        if let (Some(t), false) = (report.threshold, analysis.optimal_thresholds.is_empty()) {
            let matched = analysis
                .optimal_thresholds
                .iter()
                .any(|set| set.contains(t));
            let _ = writeln!(out, "solver_threshold = {t}");
            let _ = writeln!(out, "solver_threshold_in_optimal_set = {matched}");
        }
    }
    Ok(out)
}

/// Run-length encoding of a policy: `idle x3, preprocess x197`.
fn compress(actions: &[&str]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < actions.len() {
        let j = actions[i..]
            .iter()
            .take_while(|&&a| a == actions[i])
            .count();
        parts.push(format!("{} x{j}", actions[i]));
        i += j;
    }
    parts.join(", ")
}

/// Closed forms for a reliable channel. Any other `p_s` is a config error.
pub fn analyze_report(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let model = model_of(cfg)?;
    let rc = ReliableChannel::new(&model).map_err(|_| {
        CliError::config(
            "params.p_s",
            format!("analyze needs p_s = 1, got {}", g12(model.p_s())),
        )
    })?;
    let analysis = rc.analysis();
    let mut out = String::new();
    describe_model(&mut out, &model);
    let _ = writeln!(
        out,
        "idle_exclusion_condition = {}",
        rc.idle_exclusion_condition()
    );
    let _ = writeln!(
        out,
        "energy_efficiency_condition = {}",
        rc.energy_efficiency_condition()
    );
    out.push_str(&analysis.to_string());
    if analysis.case2_applicable {
        if let Some(t) = analysis
            .optimal_thresholds
            .first()
            .map(|s| s.representative())
        {
            for w in t.saturating_sub(1)..=(t + 1).min(model.age_cap()) {
                if let Ok(j) = rc.average_cost_case2(w) {
                    let _ = writeln!(out, "J({w}) = {}", g12(j));
                }
            }
        }
    }
    Ok(out)
}

/// Simulates one policy and compares it with the exact stationary average.
pub fn simulate_report(cfg: &ExperimentConfig, policy: &PolicyKind) -> Result<String, CliError> {
    let model = model_of(cfg)?;
    let spec = match policy {
        PolicyKind::Optimal => {
            PolicySpec::Solved(solve(&model, cfg).map_err(CliError::Solver)?.policy)
        }
        PolicyKind::Fixed(s) => s.clone(),
    };
    if cfg.sim.horizon_minislots == 0 {
        return Err(CliError::config(
            "sim.horizon",
            "must be positive for simulate".into(),
        ));
    }
    let stats =
        simulate(&spec, &model, &cfg.sim).map_err(|e| CliError::config("sim", e.to_string()))?;
    let exact = stationary_average_cost(&spec, &model)?;
    let mut out = String::new();
    describe_model(&mut out, &model);
    let _ = writeln!(out, "policy = {}", policy.name());
    let _ = writeln!(out, "seed = {}", cfg.sim.seed);
    let _ = writeln!(
        out,
        "horizon = {}  warmup = {}",
        cfg.sim.horizon_minislots, cfg.sim.warmup_minislots
    );
    let _ = writeln!(out, "avg_cost_sim = {}", g12(stats.avg_cost));
    let _ = writeln!(out, "stderr = {}", g12(stats.stderr_cost));
    let _ = writeln!(out, "avg_aoi_sim = {}", g12(stats.avg_aoi));
    let _ = writeln!(out, "avg_energy_sim = {}", g12(stats.avg_energy));
    let _ = writeln!(
        out,
        "n_updates = {}  n_successes = {}",
        stats.n_updates, stats.n_successes
    );
    let _ = writeln!(out, "avg_cost_analytic = {}", g12(exact.avg_cost));
    let z = if stats.stderr_cost > 0.0 {
        (stats.avg_cost - exact.avg_cost) / stats.stderr_cost
    } else {
        0.0
    };
    let _ = writeln!(out, "z = {z:.3}");
    Ok(out)
}
