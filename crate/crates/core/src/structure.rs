//! Threshold structure of optimal policies and the shape of the relative
//! value function (monotone, concave, slope bounded below).

use std::fmt;

use crate::chain;
use crate::error::{Error, Result};
use crate::model::{Action, Model};
use crate::solver::{structured_relative_policy_iteration, Policy, SolverOptions, UniformizedMdp};

/// Tolerance of every property check.
pub const PROPERTY_TOLERANCE: f64 = 1e-9;

/// The update action with the shorter expected time per delivered update,
/// `L(a) / p_s^{L_u(a)}`. This is the action an optimal policy settles on at
/// large AoI. Equal expected times resolve to [`Action::Transmit`].
pub fn preferred_action(model: &Model) -> Action {
    preferred_of(
        model.expected_delivery_time(Action::Transmit),
        model.expected_delivery_time(Action::PreprocessTransmit),
    )
}

/// The comparison behind [`preferred_action`], on the expected times per
/// delivery of the raw and the preprocessed update.
pub fn preferred_of(raw: f64, processed: f64) -> Action {
    if raw <= processed {
        Action::Transmit
    } else {
        Action::PreprocessTransmit
    }
}

/// Whether both update actions have the same expected time per delivery, in
/// which case either may serve as `a_f`.
pub fn preferred_action_tied(model: &Model) -> bool {
    let raw = model.expected_delivery_time(Action::Transmit);
    let processed = model.expected_delivery_time(Action::PreprocessTransmit);
    (raw - processed).abs() <= 1e-12 * raw.max(processed)
}

/// Lower bound `L(a_f) / (eps p_s^{L_u(a_f)})` on the slope of the relative
/// value function of the uncapped chain.
pub fn slope_lower_bound(model: &Model, epsilon: f64) -> f64 {
    let af = preferred_action(model);
    model.expected_delivery_time(af) / epsilon
}

/// Number of top states excluded from value-function checks:
/// `max(T_u, T_p + T_u')`, the states whose failure branch hits the cap.
pub fn truncation_margin(model: &Model) -> u32 {
    model
        .action_duration(Action::Transmit)
        .max(model.action_duration(Action::PreprocessTransmit))
}

/// Width of the cap's influence on the slope at tolerance `tol`.
///
/// Under `a_f` the slope obeys `d(s) = L/eps + q d(s + L)` with
/// `q = 1 - p_s^{L_u(a_f)}`, so the deficit caused by the cap decays by `q`
/// every `L(a_f)` states going down. Below `cap - width` the deficit is under
/// `tol`. With `p_s = 1` the width is the plain [`truncation_margin`].
/// The width is not clamped to the cap.
pub fn slope_truncation_width(model: &Model, epsilon: f64, tol: f64) -> u32 {
    let af = preferred_action(model);
    let q = 1.0 - model.update_success_probability(af);
    let margin = truncation_margin(model);
    if q <= 0.0 {
        return margin;
    }
    let bound = slope_lower_bound(model, epsilon);
    // Smallest k with bound * q^k < tol.
    let k = ((tol / bound).ln() / q.ln()).ceil().max(0.0);
    let width = f64::from(margin) + k * f64::from(model.action_duration(af));
    width as u32
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: u32,
    pub description: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={}: {}", self.state, self.description)
    }
}

/// Result of scanning a policy for the `a_f`-threshold structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCheck {
    pub preferred: Action,
    /// Smallest checked state at which the policy takes `a_f`.
    pub threshold: Option<u32>,
    pub violations: Vec<Violation>,
}

impl ThresholdCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// States lying in some recurrent class of the policy's chain.
pub fn recurrent_states(policy: &Policy, model: &Model) -> Vec<u32> {
    let mut states: Vec<u32> = chain::closed_classes(model.age_cap(), |s| {
        model
            .transitions_unchecked(s, policy.action(s))
            .into_iter()
            .map(|(t, _)| t)
            .collect()
    })
    .into_iter()
    .flatten()
    .collect();
    states.sort_unstable();
    states
}

/// Checks that once the policy takes `a_f` it keeps taking it at every
/// larger AoI. With `recurrent_only`, transient states are ignored.
///
/// When the two update actions tie in expected time per delivery, the other
/// action is tried as `a_f` if the canonical one shows no clean threshold.
pub fn verify_threshold_structure(
    policy: &Policy,
    model: &Model,
    recurrent_only: bool,
) -> ThresholdCheck {
    let states: Vec<u32> = if recurrent_only {
        recurrent_states(policy, model)
    } else {
        (1..=policy.age_cap()).collect()
    };
    let canonical = scan_threshold(policy, &states, preferred_action(model));
    if preferred_action_tied(model) && (canonical.threshold.is_none() || !canonical.passed()) {
        let other = match canonical.preferred {
            Action::Transmit => Action::PreprocessTransmit,
            _ => Action::Transmit,
        };
        let alt = scan_threshold(policy, &states, other);
        if alt.threshold.is_some() && alt.passed() {
            return alt;
        }
    }
    canonical
}

fn scan_threshold(policy: &Policy, states: &[u32], preferred: Action) -> ThresholdCheck {
    let threshold = states
        .iter()
        .copied()
        .find(|&s| policy.action(s) == preferred);
    let violations = match threshold {
        None => Vec::new(),
        Some(omega) => states
            .iter()
            .copied()
            .filter(|&s| s > omega && policy.action(s) != preferred)
            .map(|s| Violation {
                state: s,
                description: format!(
                    "takes {} above threshold {omega} of {preferred}",
                    policy.action(s)
                ),
            })
            .collect(),
    };
    ThresholdCheck {
        preferred,
        threshold,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueChecks {
    pub monotone_ok: bool,
    pub concave_ok: bool,
    pub slope_bound_ok: bool,
    /// Top states left out of the checks.
    pub excluded_top: u32,
    pub violations: Vec<Violation>,
}

/// Monotonicity, concavity and slope bound of `values` (`values[s-1] = V(s)`)
/// over `1..=cap - truncation_margin`.
pub fn check_value_properties(values: &[f64], model: &Model, epsilon: f64) -> ValueChecks {
    check_value_properties_excluding(values, model, epsilon, truncation_margin(model))
}

/// As [`check_value_properties`], leaving out the top `excluded_top` states.
pub fn check_value_properties_excluding(
    values: &[f64],
    model: &Model,
    epsilon: f64,
    excluded_top: u32,
) -> ValueChecks {
    let tol = PROPERTY_TOLERANCE;
    let last = values.len().saturating_sub(excluded_top as usize);
    let diffs: Vec<f64> = values[..last].windows(2).map(|w| w[1] - w[0]).collect();
    let bound = slope_lower_bound(model, epsilon);
    let mut violations = Vec::new();

    let mut monotone_ok = true;
    let mut slope_bound_ok = true;
    for (i, &d) in diffs.iter().enumerate() {
        let s = i as u32 + 1;
        if d < -tol {
            monotone_ok = false;
            violations.push(Violation {
                state: s,
                description: format!("V(s+1) - V(s) = {d:.6e} < 0"),
            });
        }
        if d < bound - tol {
            if slope_bound_ok {
                violations.push(Violation {
                    state: s,
                    description: format!("slope {d:.9} below bound {bound:.9}"),
                });
            }
            slope_bound_ok = false;
        }
    }
    let mut concave_ok = true;
    for (i, w) in diffs.windows(2).enumerate() {
        if w[1] > w[0] + tol {
            concave_ok = false;
            violations.push(Violation {
                state: i as u32 + 2,
                description: format!("slope rises from {:.9} to {:.9}", w[0], w[1]),
            });
        }
    }
    ValueChecks {
        monotone_ok,
        concave_ok,
        slope_bound_ok,
        excluded_top,
        violations,
    }
}

/// Size of the chain solved by [`check_uncapped_value_properties`]. It grows
/// like `1 / p_s^{L_u(a_f)}`, so callers may want to bound it.
pub fn uncapped_check_states(model: &Model, epsilon: f64) -> u32 {
    model.age_cap().saturating_add(slope_truncation_width(
        model,
        epsilon,
        0.1 * PROPERTY_TOLERANCE,
    ))
}

/// Value-function checks for the uncapped chain over `1..=cap`.
///
/// The cap bends the slope of `V` below it by an amount that shrinks only
/// geometrically, so the instance is re-solved with the cap raised by
/// [`slope_truncation_width`] and the original range is checked on that
/// solution.
pub fn check_uncapped_value_properties(
    model: &Model,
    options: &SolverOptions,
) -> Result<ValueChecks> {
    let width = uncapped_check_states(model, options.epsilon) - model.age_cap();
    let raised = Model::new(crate::model::SystemParams {
        delta_hat: model.age_cap() + width,
        ..model.params().clone()
    })?;
    let solved = structured_relative_policy_iteration(&raised, options)?;
    let mut checks =
        check_value_properties_excluding(&solved.values, &raised, options.epsilon, width);
    checks.excluded_top = 0;
    Ok(checks)
}

/// Whether `Q(s,(0,1)) - Q(s,(1,1))` is monotone on the reliable-channel
/// recurrent range `min(T_u, T_p+T_u')..=cap`: nondecreasing when the raw
/// update is the longer action, nonincreasing when it is the shorter one
/// (the two differ only by `(eps/L(1,1) - eps/L(0,1)) V(s)` plus a constant).
pub fn submodularity_holds(values: &[f64], model: &Model, epsilon: f64) -> Result<bool> {
    if model.p_s() != 1.0 {
        return Err(Error::UnreliableChannel(model.p_s()));
    }
    let mdp = UniformizedMdp::new(model, epsilon)?;
    let start = model
        .action_duration(Action::Transmit)
        .min(model.action_duration(Action::PreprocessTransmit));
    let gaps: Vec<f64> = (start..=model.age_cap())
        .map(|s| {
            mdp.q_value(s, Action::Transmit, values)
                - mdp.q_value(s, Action::PreprocessTransmit, values)
        })
        .collect();
    let increasing = model.action_duration(Action::Transmit)
        >= model.action_duration(Action::PreprocessTransmit);
    Ok(gaps.windows(2).all(|w| {
        if increasing {
            w[0] <= w[1] + PROPERTY_TOLERANCE
        } else {
            w[0] + PROPERTY_TOLERANCE >= w[1]
        }
    }))
}

/// Threshold scan and value-function checks of one solved instance.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub preferred: Action,
    pub threshold: Option<u32>,
    pub monotone_ok: bool,
    pub concave_ok: bool,
    pub slope_bound_ok: bool,
    pub violations: Vec<Violation>,
}

impl StructureReport {
    pub fn new(threshold: ThresholdCheck, values: ValueChecks) -> Self {
        let mut violations = threshold.violations;
        violations.extend(values.violations);
        StructureReport {
            preferred: threshold.preferred,
            threshold: threshold.threshold,
            monotone_ok: values.monotone_ok,
            concave_ok: values.concave_ok,
            slope_bound_ok: values.slope_bound_ok,
            violations,
        }
    }

    /// Analyzes a policy and its relative values.
    pub fn analyze(
        policy: &Policy,
        values: &[f64],
        model: &Model,
        epsilon: f64,
        recurrent_only: bool,
    ) -> Self {
        Self::new(
            verify_threshold_structure(policy, model, recurrent_only),
            check_value_properties(values, model, epsilon),
        )
    }

    pub fn threshold_ok(&self) -> bool {
        !self
            .violations
            .iter()
            .any(|v| v.description.contains("above threshold"))
    }
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "preferred_action = {}", self.preferred)?;
        match self.threshold {
            Some(t) => writeln!(f, "threshold = {t}")?,
            None => writeln!(f, "threshold = none")?,
        }
        writeln!(f, "monotone_ok = {}", self.monotone_ok)?;
        writeln!(f, "concave_ok = {}", self.concave_ok)?;
        writeln!(f, "slope_bound_ok = {}", self.slope_bound_ok)?;
        writeln!(f, "violations = {}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}
