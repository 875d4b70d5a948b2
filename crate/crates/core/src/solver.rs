//! Average-cost solution of the semi-Markov scheduling problem.
//!
//! Epochs have action-dependent lengths, so the problem is first converted to
//! a fixed-step MDP by uniformization: the per-step cost becomes the cost per
//! minislot `R(s,a)/L(a)` and each row keeps its original transitions with
//! weight `eps/L(a)` plus a self-loop of mass `1 - eps/L(a)`. The optimal
//! average cost per minislot is the gain of that MDP for every `eps` in `(0, 1]`.
//!
//! Two solvers are provided:
//! * [`relative_value_iteration`], the plain fixed-point iteration used as an
//!   oracle, and
//! * [`structured_relative_policy_iteration`], policy iteration whose
//!   improvement step copies the preferred update action upwards once it has
//!   been selected, skipping the minimization there.

use nalgebra::{DMatrix, DVector};

use crate::chain;
use crate::error::{Error, Result};
use crate::model::{Action, Model};
use crate::structure::preferred_action;

/// Two actions whose Q-values differ by less than this are tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// A stationary deterministic policy, total on `1..=cap`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    actions: Vec<Action>,
}

impl Policy {
    pub fn constant(cap: u32, a: Action) -> Self {
        Policy {
            actions: vec![a; cap as usize],
        }
    }

    pub fn from_fn<F: FnMut(u32) -> Action>(cap: u32, mut f: F) -> Self {
        Policy {
            actions: (1..=cap).map(&mut f).collect(),
        }
    }

    /// `below` on states `< threshold`, `at_or_above` on states `>= threshold`.
    pub fn threshold(cap: u32, threshold: u32, below: Action, at_or_above: Action) -> Self {
        Self::from_fn(cap, |s| if s < threshold { below } else { at_or_above })
    }

    pub fn from_actions(actions: Vec<Action>) -> Self {
        Policy { actions }
    }

    pub fn age_cap(&self) -> u32 {
        self.actions.len() as u32
    }

    /// Action at AoI `s` (1-based).
    pub fn action(&self, s: u32) -> Action {
        self.actions[s as usize - 1]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Smallest state at which the policy takes `a`.
    pub fn first_state_with(&self, a: Action) -> Option<u32> {
        self.actions
            .iter()
            .position(|&b| b == a)
            .map(|i| i as u32 + 1)
    }
}

/// The uniformized fixed-step MDP.
#[derive(Debug, Clone)]
pub struct UniformizedMdp {
    epsilon: f64,
    cap: u32,
    costs: Vec<[f64; 3]>,
    rows: Vec<[Vec<(u32, f64)>; 3]>,
    energy: [f64; 3],
    duration: [u32; 3],
}

impl UniformizedMdp {
    /// Builds the MDP for `0 < epsilon <= min_a L(a) = 1`.
    pub fn new(model: &Model, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::EpsilonOutOfRange(epsilon));
        }
        let cap = model.age_cap();
        let omega = model.omega();
        let mut costs = Vec::with_capacity(cap as usize);
        let mut rows = Vec::with_capacity(cap as usize);
        for s in 1..=cap {
            let mut cost = [0.0; 3];
            let mut row: [Vec<(u32, f64)>; 3] = Default::default();
            for a in Action::ALL {
                let len = f64::from(model.action_duration(a));
                cost[a.index()] =
                    f64::from(s) + 0.5 * (len - 1.0) + omega * model.energy_cost(a) / len;
                let move_mass = epsilon / len;
                let mut r: Vec<(u32, f64)> = model
                    .transitions_unchecked(s, a)
                    .into_iter()
                    .map(|(t, p)| (t, move_mass * p))
                    .collect();
                let stay = 1.0 - move_mass;
                match r.iter_mut().find(|(t, _)| *t == s) {
                    Some(e) => e.1 += stay,
                    None => r.push((s, stay)),
                }
                r.retain(|&(_, p)| p > 0.0);
                row[a.index()] = r;
            }
            costs.push(cost);
            rows.push(row);
        }
        Ok(UniformizedMdp {
            epsilon,
            cap,
            costs,
            rows,
            energy: Action::ALL.map(|a| model.energy_cost(a)),
            duration: Action::ALL.map(|a| model.action_duration(a)),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn age_cap(&self) -> u32 {
        self.cap
    }

    /// Per-step cost `R(s,a)/L(a)`.
    pub fn cost(&self, s: u32, a: Action) -> f64 {
        self.costs[s as usize - 1][a.index()]
    }

    /// Uniformized transition row; each target appears once.
    pub fn transitions(&self, s: u32, a: Action) -> &[(u32, f64)] {
        &self.rows[s as usize - 1][a.index()]
    }

    /// `Q(s,a) = cost(s,a) + sum_{s'} p(s'|s,a) V(s')` with `values[s-1] = V(s)`.
    pub fn q_value(&self, s: u32, a: Action, values: &[f64]) -> f64 {
        self.cost(s, a)
            + self
                .transitions(s, a)
                .iter()
                .map(|&(t, p)| p * values[t as usize - 1])
                .sum::<f64>()
    }

    /// Minimizing action at `s`. Actions within [`TIE_TOLERANCE`] of the
    /// minimum are tied; ties go to the lowest energy, then the shortest
    /// duration, then the declaration order of [`Action`].
    pub fn greedy_action(&self, s: u32, values: &[f64]) -> (Action, f64) {
        let q = Action::ALL.map(|a| self.q_value(s, a, values));
        let best = q.iter().copied().fold(f64::INFINITY, f64::min);
        let chosen = Action::ALL
            .into_iter()
            .filter(|a| q[a.index()] <= best + TIE_TOLERANCE)
            .min_by(|x, y| {
                self.energy[x.index()]
                    .total_cmp(&self.energy[y.index()])
                    .then(self.duration[x.index()].cmp(&self.duration[y.index()]))
                    .then(x.cmp(y))
            })
            .expect("at least one action attains the minimum");
        (chosen, q[chosen.index()])
    }

    /// Greedy policy with respect to `values`.
    pub fn greedy_policy(&self, values: &[f64]) -> Policy {
        Policy::from_fn(self.cap, |s| self.greedy_action(s, values).0)
    }

    /// `max_s |theta + V(s) - min_a Q(s,a)|`.
    pub fn bellman_residual(&self, theta: f64, values: &[f64]) -> f64 {
        (1..=self.cap)
            .map(|s| {
                let best = Action::ALL
                    .into_iter()
                    .map(|a| self.q_value(s, a, values))
                    .fold(f64::INFINITY, f64::min);
                (theta + values[s as usize - 1] - best).abs()
            })
            .fold(0.0, f64::max)
    }

    fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.age_cap() != self.cap {
            return Err(Error::PolicyLength {
                expected: self.cap as usize,
                got: policy.actions.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub epsilon: f64,
    /// State whose relative value is pinned to zero.
    pub reference_state: u32,
    /// Stopping span for value iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            epsilon: 1.0,
            reference_state: 1,
            tolerance: 1e-10,
            max_iterations: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// Optimal average cost per minislot.
    pub theta: f64,
    /// Relative values, `values[s-1] = V(s)`, with `V(reference) = 0`.
    pub values: Vec<f64>,
    pub policy: Policy,
    pub iterations: usize,
    /// Bellman residual of `(theta, values)`.
    pub residual: f64,
}

impl SolverResult {
    pub fn value(&self, s: u32) -> f64 {
        self.values[s as usize - 1]
    }
}

/// Relative value iteration, one sweep at a time.
///
/// Starting from `V_0 = 0`, each sweep computes `W(s) = min_a Q(s,a; V)`,
/// brackets the gain between `min_s (W-V)(s)` and `max_s (W-V)(s)`, and
/// renormalizes `V <- W - W(reference)`.
#[derive(Debug, Clone)]
pub struct RelativeValueIteration<'a> {
    mdp: &'a UniformizedMdp,
    reference: usize,
    values: Vec<f64>,
    next: Vec<f64>,
    lower: f64,
    upper: f64,
    sweeps: usize,
}

impl<'a> RelativeValueIteration<'a> {
    pub fn new(mdp: &'a UniformizedMdp, reference_state: u32) -> Result<Self> {
        if reference_state == 0 || reference_state > mdp.cap {
            return Err(Error::StateOutOfRange {
                state: reference_state,
                cap: mdp.cap,
            });
        }
        let n = mdp.cap as usize;
        Ok(RelativeValueIteration {
            mdp,
            reference: reference_state as usize - 1,
            values: vec![0.0; n],
            next: vec![0.0; n],
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            sweeps: 0,
        })
    }

    /// Performs one sweep and returns the gain bracket `(lower, upper)`.
    pub fn sweep(&mut self) -> (f64, f64) {
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for s in 1..=self.mdp.cap {
            let i = s as usize - 1;
            let w = Action::ALL
                .into_iter()
                .map(|a| self.mdp.q_value(s, a, &self.values))
                .fold(f64::INFINITY, f64::min);
            let d = w - self.values[i];
            lower = lower.min(d);
            upper = upper.max(d);
            self.next[i] = w;
        }
        let pin = self.next[self.reference];
        for w in &mut self.next {
            *w -= pin;
        }
        std::mem::swap(&mut self.values, &mut self.next);
        self.lower = lower;
        self.upper = upper;
        self.sweeps += 1;
        (lower, upper)
    }

    /// Current (renormalized) values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn span(&self) -> f64 {
        self.upper - self.lower
    }

    /// Midpoint of the current gain bracket.
    pub fn gain_estimate(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }
}

/// Runs [`RelativeValueIteration`] until the gain bracket is narrower than
/// `options.tolerance`.
pub fn relative_value_iteration(model: &Model, options: &SolverOptions) -> Result<SolverResult> {
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::InvalidParam {
            field: "tolerance",
            reason: "must be > 0".into(),
        });
    }
    let mdp = UniformizedMdp::new(model, options.epsilon)?;
    let mut vi = RelativeValueIteration::new(&mdp, options.reference_state)?;
    while vi.sweeps() < options.max_iterations {
        vi.sweep();
        if vi.span() < options.tolerance {
            let theta = vi.gain_estimate();
            let values = vi.values().to_vec();
            let policy = mdp.greedy_policy(&values);
            let residual = mdp.bellman_residual(theta, &values);
            return Ok(SolverResult {
                theta,
                values,
                policy,
                iterations: vi.sweeps(),
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: vi.sweeps(),
        residual: vi.span(),
    })
}

/// Exact gain and relative values of a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub theta: f64,
    pub values: Vec<f64>,
}

/// Solves `theta + V(s) = cost(s, pi(s)) + sum p(s'|s, pi(s)) V(s')` with
/// `V(reference) = 0` by dense LU elimination.
///
/// The policy must be unichain; a policy with several recurrent classes has
/// no single gain and is reported as [`Error::Multichain`].
pub fn policy_evaluation(
    mdp: &UniformizedMdp,
    policy: &Policy,
    reference_state: u32,
) -> Result<Evaluation> {
    mdp.check_policy(policy)?;
    let cap = mdp.cap;
    if reference_state == 0 || reference_state > cap {
        return Err(Error::StateOutOfRange {
            state: reference_state,
            cap,
        });
    }
    let classes = chain::closed_classes(cap, |s| {
        mdp.transitions(s, policy.action(s))
            .iter()
            .map(|&(t, _)| t)
            .collect()
    });
    if classes.len() != 1 {
        return Err(Error::Multichain {
            classes: classes.len(),
        });
    }

    // Unknown j is V(j+1), except that the reference column carries theta.
    let n = cap as usize;
    let r = reference_state as usize - 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in 1..=cap {
        let i = s as usize - 1;
        let act = policy.action(s);
        b[i] = mdp.cost(s, act);
        a[(i, r)] += 1.0;
        if i != r {
            a[(i, i)] += 1.0;
        }
        for &(t, p) in mdp.transitions(s, act) {
            let j = t as usize - 1;
            if j != r {
                a[(i, j)] -= p;
            }
        }
    }
    let x = chain::solve_dense(a, b)?;
    let theta = x[r];
    let mut values: Vec<f64> = x.iter().copied().collect();
    values[r] = 0.0;
    Ok(Evaluation { theta, values })
}

/// One improvement pass. With `structured`, once `preferred` has been chosen
/// at `s - 1` it is copied to `s` without evaluating Q. Incumbent actions are
/// kept unless another action is better by more than the tie tolerance.
fn improve(
    mdp: &UniformizedMdp,
    current: &Policy,
    values: &[f64],
    preferred: Option<Action>,
) -> Policy {
    let mut next = Vec::with_capacity(mdp.cap as usize);
    for s in 1..=mdp.cap {
        if let (Some(af), Some(&prev)) = (preferred, next.last()) {
            if prev == af {
                next.push(af);
                continue;
            }
        }
        let (candidate, q_best) = mdp.greedy_action(s, values);
        let incumbent = current.action(s);
        let keep = mdp.q_value(s, incumbent, values) <= q_best + TIE_TOLERANCE;
        next.push(if keep { incumbent } else { candidate });
    }
    Policy::from_actions(next)
}

/// Policy iteration exploiting the threshold structure of the optimal policy.
///
/// Starts from the all-idle policy and alternates exact evaluation with the
/// structured improvement of [`improve`]. When the structured iteration
/// settles, one unstructured improvement pass confirms optimality on every
/// state; if it finds a strict improvement (possible only where truncation at
/// the AoI cap bends the structure), plain policy iteration continues from
/// there.
pub fn structured_relative_policy_iteration(
    model: &Model,
    options: &SolverOptions,
) -> Result<SolverResult> {
    let mdp = UniformizedMdp::new(model, options.epsilon)?;
    let af = preferred_action(model);
    let mut policy = Policy::constant(mdp.cap, Action::Idle);
    let mut history: Vec<Policy> = Vec::new();
    let mut iterations = 0;
    let mut structured = true;

    loop {
        let eval = policy_evaluation(&mdp, &policy, options.reference_state)?;
        iterations += 1;
        let next = improve(&mdp, &policy, &eval.values, structured.then_some(af));
        if next == policy {
            if structured {
                structured = false;
                let check = improve(&mdp, &policy, &eval.values, None);
                if check == policy {
                    let residual = mdp.bellman_residual(eval.theta, &eval.values);
                    return Ok(SolverResult {
                        theta: eval.theta,
                        values: eval.values,
                        policy,
                        iterations,
                        residual,
                    });
                }
                history.clear();
                history.push(policy);
                policy = check;
                continue;
            }
            let residual = mdp.bellman_residual(eval.theta, &eval.values);
            return Ok(SolverResult {
                theta: eval.theta,
                values: eval.values,
                policy,
                iterations,
                residual,
            });
        }
        if history.contains(&next) || iterations >= options.max_iterations {
            return Err(Error::PolicyCycle(iterations));
        }
        history.push(std::mem::replace(&mut policy, next));
    }
}
