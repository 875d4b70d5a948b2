//! Test-side oracles built straight from the parameters, without going
//! through the library's cost or transition code.
#![allow(dead_code)]

use aoi_core::{Action, Model, Policy, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Durations, transmission lengths and energies recomputed from parameters.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    pub t_p: u32,
    pub len: [u32; 3],
    pub tx: [u32; 3],
    pub energy: [f64; 3],
    pub p_s: f64,
    pub omega: f64,
    pub cap: u32,
}

fn idx(a: Action) -> usize {
    match a {
        Action::Idle => 0,
        Action::Transmit => 1,
        Action::PreprocessTransmit => 2,
    }
}

impl Oracle {
    pub fn new(p: &SystemParams) -> Self {
        let cycles = f64::from(p.t_u) * f64::from(p.bits_per_packet) * f64::from(p.cycles_per_bit);
        let t_p = (cycles / (p.cpu_freq * p.minislot) - 1e-9).ceil().max(0.0) as u32;
        let c_p = p.kappa * p.minislot * p.cpu_freq.powi(3);
        let c_u = p.tx_power * p.minislot;
        Oracle {
            t_p,
            len: [1, p.t_u, t_p + p.t_u_prime],
            tx: [0, p.t_u, p.t_u_prime],
            energy: [
                0.0,
                f64::from(p.t_u) * c_u,
                f64::from(t_p) * c_p + f64::from(p.t_u_prime) * c_u,
            ],
            p_s: p.p_s,
            omega: p.omega,
            cap: p.delta_hat,
        }
    }

    pub fn len(&self, a: Action) -> u32 {
        self.len[idx(a)]
    }

    pub fn energy(&self, a: Action) -> f64 {
        self.energy[idx(a)]
    }

    /// Sum of per-minislot AoI over one epoch starting at `s`.
    pub fn epoch_aoi(&self, s: u32, a: Action) -> f64 {
        (0..self.len(a)).map(|i| f64::from(s + i)).sum()
    }

    /// Next-state distribution, as a dense vector over `1..=cap`.
    pub fn next(&self, s: u32, a: Action) -> Vec<(u32, f64)> {
        let l = self.len(a);
        let grow = (s + l).min(self.cap);
        if a == Action::Idle {
            return vec![(grow, 1.0)];
        }
        let ok = self.p_s.powi(self.tx[idx(a)] as i32);
        vec![(l.min(self.cap), ok), (grow, 1.0 - ok)]
    }
}

/// Long-run cost of a policy under a reliable channel: walk the
/// deterministic chain from AoI 1 until a state repeats and average over the
/// cycle.
pub fn cycle_walk_cost(o: &Oracle, policy: impl Fn(u32) -> Action) -> f64 {
    assert_eq!(o.p_s, 1.0);
    let mut seen = vec![usize::MAX; o.cap as usize + 1];
    let mut path = Vec::new();
    let mut s = 1u32;
    while seen[s as usize] == usize::MAX {
        seen[s as usize] = path.len();
        path.push(s);
        let a = policy(s);
        s = if a == Action::Idle {
            (s + 1).min(o.cap)
        } else {
            o.len(a).min(o.cap)
        };
    }
    let (mut cost, mut time) = (0.0, 0.0);
    for &t in &path[seen[s as usize]..] {
        let a = policy(t);
        cost += o.epoch_aoi(t, a) + o.omega * o.energy(a);
        time += f64::from(o.len(a));
    }
    cost / time
}

/// Best cost over the family "b1 below w1, b2 on [w1, w2), top at or above
/// w2" for every b1, b2 and both choices of the top update action, with
/// `1 <= w1 <= w2 <= cap + 1`.
pub fn exhaustive_threshold_search(o: &Oracle) -> f64 {
    let mut best = f64::INFINITY;
    for top in [Action::Transmit, Action::PreprocessTransmit] {
        for b1 in Action::ALL {
            for b2 in Action::ALL {
                for w1 in 1..=o.cap + 1 {
                    for w2 in w1..=o.cap + 1 {
                        let c = cycle_walk_cost(o, |s| {
                            if s < w1 {
                                b1
                            } else if s < w2 {
                                b2
                            } else {
                                top
                            }
                        });
                        best = best.min(c);
                    }
                }
            }
        }
    }
    best
}

/// Exact long-run cost of a policy by power iteration on the lazy embedded
/// chain `(I + P)/2` started from AoI 1, then the ratio of expected epoch
/// cost to expected duration. Returns `(cost, aoi, energy)`.
pub fn power_iteration_cost(o: &Oracle, policy: &Policy) -> (f64, f64, f64) {
    let n = o.cap as usize;
    let mut mu = vec![0.0; n + 1];
    mu[1] = 1.0;
    for _ in 0..2_000_000 {
        let mut nxt: Vec<f64> = mu.iter().map(|m| 0.5 * m).collect();
        for s in 1..=o.cap {
            let m = mu[s as usize];
            if m == 0.0 {
                continue;
            }
            for (t, p) in o.next(s, policy.action(s)) {
                nxt[t as usize] += 0.5 * m * p;
            }
        }
        let change: f64 = nxt.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
        mu = nxt;
        if change < 1e-15 {
            break;
        }
    }
    let (mut aoi, mut energy, mut time) = (0.0, 0.0, 0.0);
    for s in 1..=o.cap {
        let a = policy.action(s);
        let m = mu[s as usize];
        aoi += m * o.epoch_aoi(s, a);
        energy += m * o.energy(a);
        time += m * f64::from(o.len(a));
    }
    ((aoi + o.omega * energy) / time, aoi / time, energy / time)
}

/// Reference parameter sets.
pub fn general_case(v: u32, p_s: f64, omega: f64) -> SystemParams {
    SystemParams {
        cycles_per_bit: v,
        p_s,
        omega,
        ..SystemParams::default()
    }
}

pub fn switch_case(omega: f64) -> SystemParams {
    SystemParams {
        t_u: 5,
        t_u_prime: 1,
        bits_per_packet: 3,
        cycles_per_bit: 5,
        cpu_freq: 15.0,
        minislot: 1.0,
        kappa: 0.00005,
        tx_power: 3.0,
        p_s: 1.0,
        delta_hat: 200,
        omega,
    }
}

pub fn idle_case(omega: f64) -> SystemParams {
    SystemParams {
        t_u: 6,
        t_u_prime: 2,
        bits_per_packet: 3,
        cycles_per_bit: 5,
        cpu_freq: 45.0,
        minislot: 1.0,
        kappa: 0.00005,
        tx_power: 6.0,
        p_s: 1.0,
        delta_hat: 200,
        omega,
    }
}

/// Small instance with `T_p = 1` and unit per-minislot energies.
pub fn desk(p_s: f64, omega: f64, cap: u32) -> SystemParams {
    SystemParams {
        t_u: 3,
        t_u_prime: 1,
        bits_per_packet: 1,
        cycles_per_bit: 3,
        cpu_freq: 10.0,
        minislot: 1.0,
        kappa: 0.001,
        tx_power: 1.0,
        p_s,
        delta_hat: cap,
        omega,
    }
}

/// Random valid instance.
pub fn random_params(rng: &mut impl Rng, cap: u32) -> SystemParams {
    let t_u = rng.random_range(2..=6);
    SystemParams {
        t_u,
        t_u_prime: rng.random_range(1..=t_u),
        bits_per_packet: rng.random_range(1..=4),
        cycles_per_bit: rng.random_range(0..=16),
        cpu_freq: rng.random_range(10.0..50.0),
        minislot: 1.0,
        kappa: rng.random_range(1e-5..1e-4),
        tx_power: rng.random_range(1.0..8.0),
        p_s: rng.random_range(0.3..=1.0),
        delta_hat: cap,
        omega: rng.random_range(0.0..3.0),
    }
}

pub fn random_instances(seed: u64, n: usize, cap: u32) -> Vec<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Model::new(random_params(&mut rng, cap)).unwrap())
        .collect()
}
