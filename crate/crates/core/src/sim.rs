//! Minislot-level Monte-Carlo simulation and exact stationary evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::chain::{closed_classes, reachable_from, stationary_distribution};
use crate::error::{Error, Result};
use crate::model::{Action, Model};
use crate::solver::Policy;

/// Identifier of the generator behind [`simulate`], for output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha12 (rand_chacha 0.9, seed_from_u64)";

/// Number of batches used for the batch-means standard error.
pub const BATCHES: u64 = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub horizon_minislots: u64,
    pub warmup_minislots: u64,
    pub seed: u64,
    pub initial_aoi: u32,
}

impl SimConfig {
    /// Horizon with the default 10% warmup, starting from AoI 1.
    pub fn new(horizon_minislots: u64, seed: u64) -> Self {
        SimConfig {
            horizon_minislots,
            warmup_minislots: horizon_minislots / 10,
            seed,
            initial_aoi: 1,
        }
    }

    /// Same run with the seed of substream `run_index`.
    pub fn substream(&self, run_index: u64) -> Self {
        SimConfig {
            seed: self.seed.wrapping_add(run_index),
            ..self.clone()
        }
    }

    fn validate(&self, cap: u32) -> Result<()> {
        if self.warmup_minislots >= self.horizon_minislots {
            return Err(Error::SimConfig(format!(
                "warmup ({}) must be below horizon ({})",
                self.warmup_minislots, self.horizon_minislots
            )));
        }
        if self.horizon_minislots - self.warmup_minislots < BATCHES {
            return Err(Error::SimConfig(format!(
                "need at least {BATCHES} measured minislots"
            )));
        }
        if self.initial_aoi == 0 || self.initial_aoi > cap {
            return Err(Error::SimConfig(format!(
                "initial_aoi {} outside 1..={cap}",
                self.initial_aoi
            )));
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::new(1_000_000, 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub avg_cost: f64,
    pub avg_aoi: f64,
    /// Energy per minislot.
    pub avg_energy: f64,
    pub n_updates: u64,
    pub n_successes: u64,
    /// Batch-means standard error of `avg_cost`.
    pub stderr_cost: f64,
}

/// Which policy to run.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Solved(Policy),
    ZeroWaitNoComputation,
    ZeroWaitComputation,
    Threshold {
        threshold: u32,
        below: Action,
        at_or_above: Action,
    },
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Solved(_) => "optimal",
            PolicySpec::ZeroWaitNoComputation => "zero_wait_no_computation",
            PolicySpec::ZeroWaitComputation => "zero_wait_computation",
            PolicySpec::Threshold { .. } => "threshold",
        }
    }

    /// The explicit state-to-action table on `1..=cap`.
    pub fn resolve(&self, cap: u32) -> Result<Policy> {
        match self {
            PolicySpec::Solved(p) => {
                if p.age_cap() != cap {
                    return Err(Error::PolicyLength {
                        expected: cap as usize,
                        got: p.age_cap() as usize,
                    });
                }
                Ok(p.clone())
            }
            PolicySpec::ZeroWaitNoComputation => Ok(Policy::constant(cap, Action::Transmit)),
            PolicySpec::ZeroWaitComputation => {
                Ok(Policy::constant(cap, Action::PreprocessTransmit))
            }
            PolicySpec::Threshold {
                threshold,
                below,
                at_or_above,
            } => Ok(Policy::threshold(cap, *threshold, *below, *at_or_above)),
        }
    }
}

/// Zero-wait baseline: update in every state, with or without preprocessing.
pub fn zero_wait_policy(compute: bool) -> PolicySpec {
    if compute {
        PolicySpec::ZeroWaitComputation
    } else {
        PolicySpec::ZeroWaitNoComputation
    }
}

/// One decision epoch of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Epoch {
    /// AoI at the start of the epoch.
    pub state: u32,
    pub action: Action,
    /// Whether an update was delivered at the end of the epoch.
    pub delivered: bool,
    /// AoI at the next epoch, capped.
    pub next: u32,
}

/// Epoch-by-epoch sample path of a policy. Each update epoch draws one
/// Bernoulli(`p_s`) outcome per transmission minislot; the update is
/// delivered only if all of them succeed.
pub struct Trajectory<'a> {
    model: &'a Model,
    policy: Policy,
    rng: ChaCha12Rng,
    state: u32,
}

impl<'a> Trajectory<'a> {
    pub fn new(policy: &PolicySpec, model: &'a Model, seed: u64, initial_aoi: u32) -> Result<Self> {
        model.check_state(initial_aoi)?;
        Ok(Trajectory {
            model,
            policy: policy.resolve(model.age_cap())?,
            rng: ChaCha12Rng::seed_from_u64(seed),
            state: initial_aoi,
        })
    }

    pub fn state(&self) -> u32 {
        self.state
    }
}

impl Iterator for Trajectory<'_> {
    type Item = Epoch;

    fn next(&mut self) -> Option<Epoch> {
        let s = self.state;
        let a = self.policy.action(s);
        let len = self.model.action_duration(a);
        let mut delivered = a.is_update();
        for _ in 0..self.model.transmission_duration(a) {
            // Every minislot is drawn, so the stream position depends only
            // on the actions taken.
            if !self.rng.random_bool(self.model.p_s()) {
                delivered = false;
            }
        }
        let next = if delivered {
            len
        } else {
            s.saturating_add(len)
        }
        .min(self.model.age_cap());
        self.state = next;
        Some(Epoch {
            state: s,
            action: a,
            delivered,
            next,
        })
    }
}

/// Runs `policy` minislot by minislot.
///
/// Each decision epoch spends the full `L(a)` minislots. During it the AoI is
/// `s + i - 1` for the `i`-th minislot; the state at the next epoch is capped
/// at the model's age cap. An update succeeds only if every transmission
/// minislot succeeds. Energy accrues `C_p` per preprocessing minislot and
/// `C_u` per transmission minislot.
pub fn simulate(policy: &PolicySpec, model: &Model, config: &SimConfig) -> Result<SimStats> {
    let cap = model.age_cap();
    config.validate(cap)?;
    let trajectory = Trajectory::new(policy, model, config.seed, config.initial_aoi)?;

    let omega = model.omega();
    let t_p = u64::from(model.preprocessing_duration());
    let (c_p, c_u) = (
        model.compute_energy_per_slot(),
        model.transmit_energy_per_slot(),
    );

    let measured = config.horizon_minislots - config.warmup_minislots;
    // AoI sums and minislot counts are integers; accumulating them exactly
    // keeps deterministic runs free of summation drift.
    let mut batches = vec![Tally::default(); BATCHES as usize];
    let (mut n_updates, mut n_successes) = (0u64, 0u64);

    let mut t = 0u64;
    for epoch in trajectory {
        if t >= config.horizon_minislots {
            break;
        }
        let a = epoch.action;
        let len = u64::from(model.action_duration(a));
        let preprocessing = if a == Action::PreprocessTransmit {
            t_p
        } else {
            0
        };
        if a.is_update() && t >= config.warmup_minislots {
            n_updates += 1;
            if epoch.delivered {
                n_successes += 1;
            }
        }
        for i in 0..len {
            let now = t + i;
            if now >= config.horizon_minislots {
                break;
            }
            if now < config.warmup_minislots {
                continue;
            }
            let b = &mut batches[((now - config.warmup_minislots) * BATCHES / measured) as usize];
            b.minislots += 1;
            b.aoi += u64::from(epoch.state) + i;
            if a.is_update() {
                if i < preprocessing {
                    b.computing += 1;
                } else {
                    b.transmitting += 1;
                }
            }
        }
        t += len;
    }

    let total = batches.iter().fold(Tally::default(), |acc, b| acc.merge(b));
    let n = measured as f64;
    let avg_aoi = total.aoi as f64 / n;
    let avg_energy = total.energy(c_p, c_u) / n;
    let means: Vec<f64> = batches
        .iter()
        .map(|b| (b.aoi as f64 + omega * b.energy(c_p, c_u)) / b.minislots as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;

    Ok(SimStats {
        avg_cost: avg_aoi + omega * avg_energy,
        avg_aoi,
        avg_energy,
        n_updates,
        n_successes,
        stderr_cost: (var / BATCHES as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    minislots: u64,
    aoi: u64,
    computing: u64,
    transmitting: u64,
}

impl Tally {
    fn energy(&self, c_p: f64, c_u: f64) -> f64 {
        self.computing as f64 * c_p + self.transmitting as f64 * c_u
    }

    fn merge(self, other: &Tally) -> Tally {
        Tally {
            minislots: self.minislots + other.minislots,
            aoi: self.aoi + other.aoi,
            computing: self.computing + other.computing,
            transmitting: self.transmitting + other.transmitting,
        }
    }
}

/// Exact long-run averages of a stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryStats {
    pub avg_cost: f64,
    pub avg_aoi: f64,
    pub avg_energy: f64,
    /// Recurrent class the averages were computed on.
    pub class: Vec<u32>,
    /// Number of recurrent classes of the embedded chain.
    pub n_classes: usize,
}

/// Renewal-reward evaluation over the embedded chain of decision epochs:
/// `sum mu(s) R(s, pi(s)) / sum mu(s) L(pi(s))`.
///
/// If the chain has several recurrent classes, the one reached from AoI 1 is
/// used (the first such class if several are reachable), and `n_classes`
/// reports the count.
pub fn stationary_average_cost(policy: &PolicySpec, model: &Model) -> Result<StationaryStats> {
    let cap = model.age_cap();
    let policy = policy.resolve(cap)?;
    let succ = |s: u32| -> Vec<u32> {
        model
            .transitions_unchecked(s, policy.action(s))
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .map(|(t, _)| t)
            .collect()
    };
    let classes = closed_classes(cap, succ);
    let reach = reachable_from(cap, 1, succ);
    let class = classes
        .iter()
        .find(|c| reach[c[0] as usize - 1])
        .or(classes.first())
        .cloned()
        .expect("a finite chain has a closed class");

    let mu = stationary_distribution(&class, |s| model.transitions_unchecked(s, policy.action(s)))?;
    let (mut aoi, mut energy, mut time) = (0.0, 0.0, 0.0);
    for (&s, &m) in class.iter().zip(&mu) {
        let a = policy.action(s);
        let len = f64::from(model.action_duration(a));
        aoi += m * 0.5 * (2.0 * f64::from(s) + len - 1.0) * len;
        energy += m * model.energy_cost(a);
        time += m * len;
    }
    let avg_aoi = aoi / time;
    let avg_energy = energy / time;
    Ok(StationaryStats {
        avg_cost: avg_aoi + model.omega() * avg_energy,
        avg_aoi,
        avg_energy,
        class,
        n_classes: classes.len(),
    })
}
