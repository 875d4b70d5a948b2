//! Closed forms for a reliable channel (`p_s = 1`).
//!
//! Every update then succeeds, so after the first update the AoI only ever
//! restarts from `L(a_1)` or `L(a_2)`, the durations of the shorter and longer
//! update actions. Two regimes have closed-form optima:
//!
//! * **case 1**, waiting never pays (`L(a_f)(L(a_f)+1)/2 >= omega C(a_f)`):
//!   the policy switches between the two update actions at a threshold, and
//!   its cost is one of three cycle averages `J1`, `J2`, `J3`;
//! * **case 2**, `a_1` is also the cheaper action per minislot: the policy
//!   idles up to a threshold `Omega` and then takes `a_1`, with cost
//!   `J(Omega) = L(a_1) + (Omega - 1)/2 + omega C(a_1) / Omega`.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Action, Model};
use crate::solver::Policy;
use crate::structure::preferred_action;

/// Relative tolerance below which two cycle costs count as tied.
const COST_TIE: f64 = 1e-12;

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TIE * a.abs().max(b.abs()).max(1.0)
}

/// The three cycle averages of the case-1 switch policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleCosts {
    /// Always `a_1` (`Omega = L(a_1)`).
    pub j1: f64,
    /// Alternating `a_2`, `a_1` (`L(a_1) < Omega <= L(a_2)`).
    pub j2: f64,
    /// Always `a_2` (`Omega > L(a_2)`).
    pub j3: f64,
}

/// A set of optimal thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdSet {
    Exactly(u32),
    /// `above < Omega <= up_to`.
    Interval {
        above: u32,
        up_to: u32,
    },
    /// Every `Omega > above`.
    Above(u32),
}

impl ThresholdSet {
    pub fn contains(&self, omega: u32) -> bool {
        match *self {
            ThresholdSet::Exactly(t) => omega == t,
            ThresholdSet::Interval { above, up_to } => omega > above && omega <= up_to,
            ThresholdSet::Above(t) => omega > t,
        }
    }

    /// Smallest member.
    pub fn representative(&self) -> u32 {
        match *self {
            ThresholdSet::Exactly(t) => t,
            ThresholdSet::Interval { above, .. } | ThresholdSet::Above(above) => above + 1,
        }
    }
}

impl fmt::Display for ThresholdSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ThresholdSet::Exactly(t) => write!(f, "{{{t}}}"),
            ThresholdSet::Interval { above, up_to } => write!(f, "({above}, {up_to}]"),
            ThresholdSet::Above(t) => write!(f, "({t}, inf)"),
        }
    }
}

/// Everything the closed forms say about one reliable-channel instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliableCaseAnalysis {
    pub a_1: Action,
    pub a_2: Action,
    pub case1_applicable: bool,
    pub case2_applicable: bool,
    pub costs: CycleCosts,
    /// Union of optimal threshold sets (case 1) or the single optimum (case 2).
    pub optimal_thresholds: Vec<ThresholdSet>,
    /// Closed-form optimal average cost, when some case applies.
    pub optimal_cost: Option<f64>,
    /// Recurrent epoch-start states of the optimal policy: those of the
    /// switch policy in case 1, `L(a_1)..=Omega*` in case 2.
    pub recurrent_states: Vec<u32>,
}

impl fmt::Display for ReliableCaseAnalysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "a_1 = {}  a_2 = {}", self.a_1, self.a_2)?;
        writeln!(f, "case1_applicable = {}", self.case1_applicable)?;
        writeln!(f, "case2_applicable = {}", self.case2_applicable)?;
        writeln!(
            f,
            "J1 = {:.10}  J2 = {:.10}  J3 = {:.10}",
            self.costs.j1, self.costs.j2, self.costs.j3
        )?;
        let sets: Vec<String> = self
            .optimal_thresholds
            .iter()
            .map(ToString::to_string)
            .collect();
        writeln!(
            f,
            "optimal_threshold = {}",
            if sets.is_empty() {
                "n/a".into()
            } else {
                sets.join(" U ")
            }
        )?;
        match self.optimal_cost {
            Some(j) => writeln!(f, "optimal_cost = {j:.10}")?,
            None => writeln!(f, "optimal_cost = n/a")?,
        }
        writeln!(f, "recurrent_states = {:?}", self.recurrent_states)
    }
}

/// Closed-form analysis bound to a reliable-channel model.
#[derive(Debug, Clone, Copy)]
pub struct ReliableChannel<'a> {
    model: &'a Model,
    a_1: Action,
    a_2: Action,
}

impl<'a> ReliableChannel<'a> {
    /// Fails with [`Error::UnreliableChannel`] unless `p_s = 1`.
    pub fn new(model: &'a Model) -> Result<Self> {
        if model.p_s() != 1.0 {
            return Err(Error::UnreliableChannel(model.p_s()));
        }
        let (lt, lp) = (
            model.action_duration(Action::Transmit),
            model.action_duration(Action::PreprocessTransmit),
        );
        // Equal durations: the cheaper action plays the role of a_1.
        let raw_first = lt < lp
            || (lt == lp
                && model.energy_cost(Action::Transmit)
                    <= model.energy_cost(Action::PreprocessTransmit));
        let (a_1, a_2) = if raw_first {
            (Action::Transmit, Action::PreprocessTransmit)
        } else {
            (Action::PreprocessTransmit, Action::Transmit)
        };
        Ok(ReliableChannel { model, a_1, a_2 })
    }

    pub fn a_1(&self) -> Action {
        self.a_1
    }

    pub fn a_2(&self) -> Action {
        self.a_2
    }

    fn l1(&self) -> u32 {
        self.model.action_duration(self.a_1)
    }

    fn l2(&self) -> u32 {
        self.model.action_duration(self.a_2)
    }

    /// Idling is never optimal on the recurrent range when
    /// `L(a_f)(L(a_f)+1)/2 >= omega C(a_f)`.
    pub fn idle_exclusion_condition(&self) -> bool {
        let af = preferred_action(self.model);
        let len = f64::from(self.model.action_duration(af));
        0.5 * len * (len + 1.0) >= self.model.omega() * self.model.energy_cost(af)
    }

    /// `a_2` is never optimal when `C(a_1)/L(a_1) <= C(a_2)/L(a_2)`.
    pub fn energy_efficiency_condition(&self) -> bool {
        let per_slot = |a| self.model.energy_cost(a) / f64::from(self.model.action_duration(a));
        per_slot(self.a_1) <= per_slot(self.a_2)
    }

    /// `J1`, `J2`, `J3` as renewal-cycle averages. `J2` is the two-epoch
    /// cycle `[R(L1, a_2) + R(L2, a_1)] / (L1 + L2)`.
    pub fn cycle_costs(&self) -> CycleCosts {
        let omega = self.model.omega();
        let (l1, l2) = (f64::from(self.l1()), f64::from(self.l2()));
        let (c1, c2) = (
            self.model.energy_cost(self.a_1),
            self.model.energy_cost(self.a_2),
        );
        CycleCosts {
            j1: 1.5 * l1 + omega * c1 / l1 - 0.5,
            j2: 0.5 * (l1 + l2) - 0.5 + l1 * l2 / (l1 + l2) + omega * (c1 + c2) / (l1 + l2),
            j3: 1.5 * l2 + omega * c2 / l2 - 0.5,
        }
    }

    /// Cost of the case-1 switch policy with threshold `omega_threshold`.
    pub fn average_cost_case1(&self, omega_threshold: u32) -> Result<f64> {
        self.check_threshold(omega_threshold)?;
        let j = self.cycle_costs();
        Ok(if omega_threshold == self.l1() {
            j.j1
        } else if omega_threshold <= self.l2() {
            j.j2
        } else {
            j.j3
        })
    }

    /// Optimal threshold set(s) for case 1; tied minima give a union.
    pub fn optimal_threshold_case1(&self) -> Result<Vec<ThresholdSet>> {
        if !self.idle_exclusion_condition() {
            return Err(Error::NotApplicable(
                "idle is not excluded (case 1 condition fails)",
            ));
        }
        let j = self.cycle_costs();
        let (l1, l2) = (self.l1(), self.l2());
        let best = j.j1.min(j.j2).min(j.j3);
        let mut sets = Vec::new();
        if ties(j.j1, best) {
            sets.push(ThresholdSet::Exactly(l1));
        }
        if ties(j.j2, best) && l2 > l1 {
            sets.push(ThresholdSet::Interval {
                above: l1,
                up_to: l2,
            });
        }
        if ties(j.j3, best) {
            sets.push(ThresholdSet::Above(l2));
        }
        Ok(sets)
    }

    /// Recurrent states of the case-1 switch policy with the given threshold.
    pub fn recurrent_states(&self, omega_threshold: u32) -> Result<Vec<u32>> {
        self.check_threshold(omega_threshold)?;
        let (l1, l2) = (self.l1(), self.l2());
        Ok(if omega_threshold == l1 {
            vec![l1]
        } else if omega_threshold <= l2 {
            vec![l1, l2]
        } else {
            vec![l2]
        })
    }

    /// `J(Omega)` of the case-2 idle-then-`a_1` policy.
    pub fn average_cost_case2(&self, omega_threshold: u32) -> Result<f64> {
        if !self.energy_efficiency_condition() {
            return Err(Error::NotApplicable(
                "a_1 is not the more energy-efficient action (case 2 condition fails)",
            ));
        }
        self.check_threshold(omega_threshold)?;
        Ok(self.idle_cycle_cost(f64::from(omega_threshold)))
    }

    fn idle_cycle_cost(&self, omega_threshold: f64) -> f64 {
        f64::from(self.l1())
            + 0.5 * (omega_threshold - 1.0)
            + self.model.omega() * self.model.energy_cost(self.a_1) / omega_threshold
    }

    /// Integer minimizer of the convex `J(Omega)`: the better of the floor and
    /// ceiling of `sqrt(2 omega C(a_1))`, clamped into `[L(a_1), cap]`; ties go
    /// to the smaller threshold.
    pub fn optimal_threshold_case2(&self) -> Result<u32> {
        if !self.energy_efficiency_condition() {
            return Err(Error::NotApplicable(
                "a_1 is not the more energy-efficient action (case 2 condition fails)",
            ));
        }
        let (lo, hi) = (f64::from(self.l1()), f64::from(self.model.age_cap()));
        let root = (2.0 * self.model.omega() * self.model.energy_cost(self.a_1)).sqrt();
        let floor = root.floor().clamp(lo, hi);
        let ceil = root.ceil().clamp(lo, hi);
        let best = if self.idle_cycle_cost(ceil) < self.idle_cycle_cost(floor) {
            ceil
        } else {
            floor
        };
        Ok(best as u32)
    }

    /// Case-1 switch policy: `a_2` below the threshold, `a_1` from it on.
    pub fn switch_policy(&self, omega_threshold: u32) -> Policy {
        Policy::threshold(self.model.age_cap(), omega_threshold, self.a_2, self.a_1)
    }

    /// Case-2 policy: idle below the threshold, `a_1` from it on.
    pub fn idle_threshold_policy(&self, omega_threshold: u32) -> Policy {
        Policy::threshold(
            self.model.age_cap(),
            omega_threshold,
            Action::Idle,
            self.a_1,
        )
    }

    /// Closed-form summary. Case 2 takes precedence for the reported optimum
    /// when both conditions hold (both then give the same cost).
    pub fn analysis(&self) -> ReliableCaseAnalysis {
        let case1 = self.idle_exclusion_condition();
        let case2 = self.energy_efficiency_condition();
        let costs = self.cycle_costs();
        let (optimal_thresholds, optimal_cost, recurrent_states) = if case2 {
            let t = self.optimal_threshold_case2().expect("case 2 applies");
            let j = self.idle_cycle_cost(f64::from(t));
            (
                vec![ThresholdSet::Exactly(t)],
                Some(j),
                (self.l1()..=t).collect(),
            )
        } else if case1 {
            let sets = self.optimal_threshold_case1().expect("case 1 applies");
            let best = costs.j1.min(costs.j2).min(costs.j3);
            let rec = self
                .recurrent_states(sets[0].representative())
                .expect("threshold >= L(a_1)");
            (sets, Some(best), rec)
        } else {
            (Vec::new(), None, Vec::new())
        };
        ReliableCaseAnalysis {
            a_1: self.a_1,
            a_2: self.a_2,
            case1_applicable: case1,
            case2_applicable: case2,
            costs,
            optimal_thresholds,
            optimal_cost,
            recurrent_states,
        }
    }

    fn check_threshold(&self, omega_threshold: u32) -> Result<()> {
        if omega_threshold < self.l1() {
            return Err(Error::ThresholdTooSmall {
                threshold: omega_threshold,
                min: self.l1(),
            });
        }
        if omega_threshold > self.model.age_cap() {
            return Err(Error::StateOutOfRange {
                state: omega_threshold,
                cap: self.model.age_cap(),
            });
        }
        Ok(())
    }
}
