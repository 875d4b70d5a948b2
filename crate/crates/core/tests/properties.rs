//! Property tests over randomly drawn instances.

mod common;

use aoi_core::sim::{Trajectory, BATCHES};
use aoi_core::solver::policy_evaluation;
use aoi_core::structure::{preferred_of, submodularity_holds};
use aoi_core::*;
use proptest::prelude::*;

const CAP: u32 = 120;

fn params() -> impl Strategy<Value = SystemParams> {
    (
        2u32..=6,
        1u32..=6,
        1u32..=4,
        0u32..=16,
        10.0f64..50.0,
        1e-5f64..1e-4,
        1.0f64..8.0,
        0.3f64..=1.0,
        0.0f64..3.0,
    )
        .prop_map(
            |(t_u, tu2, l, v, f, kappa, power, p_s, omega)| SystemParams {
                t_u,
                t_u_prime: tu2.min(t_u),
                bits_per_packet: l,
                cycles_per_bit: v,
                cpu_freq: f,
                minislot: 1.0,
                kappa,
                tx_power: power,
                p_s,
                delta_hat: CAP,
                omega,
            },
        )
}

fn reliable(p: SystemParams) -> SystemParams {
    SystemParams { p_s: 1.0, ..p }
}

fn solve(m: &Model, epsilon: f64, reference_state: u32) -> SolverResult {
    let opts = SolverOptions {
        epsilon,
        reference_state,
        ..SolverOptions::default()
    };
    structured_relative_policy_iteration(m, &opts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transition_rows_are_distributions(p in params(), s in 1u32..=CAP) {
        let m = Model::new(p).unwrap();
        for a in Action::ALL {
            let row = m.transition_distribution(s, a).unwrap();
            prop_assert!(row.iter().all(|&(t, q)| q >= 0.0 && (1..=CAP).contains(&t)));
            let total: f64 = row.iter().map(|&(_, q)| q).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let mut targets: Vec<u32> = row.iter().map(|&(t, _)| t).collect();
            targets.dedup();
            prop_assert_eq!(targets.len(), row.len());
        }
    }

    #[test]
    fn step_cost_increases_with_age(p in params(), s in 1u32..CAP) {
        let m = Model::new(p).unwrap();
        for a in Action::ALL {
            prop_assert!(m.step_cost(s + 1, a).unwrap() > m.step_cost(s, a).unwrap());
        }
    }

    #[test]
    fn idle_is_free_and_deterministic(p in params(), s in 1u32..=CAP) {
        let m = Model::new(p).unwrap();
        prop_assert_eq!(m.energy_cost(Action::Idle), 0.0);
        prop_assert_eq!(m.transition_distribution(s, Action::Idle).unwrap(), vec![((s + 1).min(CAP), 1.0)]);
    }

    #[test]
    fn reliable_updates_reset_to_duration(p in params(), s in 1u32..=CAP) {
        let m = Model::new(reliable(p)).unwrap();
        for a in Action::UPDATES {
            prop_assert_eq!(m.transition_distribution(s, a).unwrap(), vec![(m.action_duration(a), 1.0)]);
        }
    }

    #[test]
    fn preferred_action_depends_on_ratio_only(a in 0.1f64..100.0, b in 0.1f64..100.0, k in 0.01f64..100.0) {
        prop_assert_eq!(preferred_of(a, b), preferred_of(k * a, k * b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_invariants(p in params()) {
        let m = Model::new(p).unwrap();
        let base = solve(&m, 1.0, 1);

        let mdp = UniformizedMdp::new(&m, 1.0).unwrap();
        prop_assert!(mdp.bellman_residual(base.theta, &base.values) <= 1e-9);

        for eps in [0.25, 0.5] {
            prop_assert!((solve(&m, eps, 1).theta - base.theta).abs() <= 1e-8);
        }
        for r in [CAP / 2, CAP] {
            prop_assert!((solve(&m, 1.0, r).theta - base.theta).abs() <= 1e-8);
        }

        let rvi = relative_value_iteration(&m, &SolverOptions::default()).unwrap();
        prop_assert!((rvi.theta - base.theta).abs() <= 1e-8);
        // Policies differ only where the two actions tie.
        for s in 1..=CAP {
            let (a, b) = (base.policy.action(s), rvi.policy.action(s));
            if a != b {
                let gap = (mdp.q_value(s, a, &base.values) - mdp.q_value(s, b, &base.values)).abs();
                prop_assert!(gap <= 1e-9, "s={} {} vs {}: gap {}", s, a, b, gap);
            }
        }

        // The structure is a property of the uncapped chain; when deliveries
        // take longer than a fraction of the cap, truncation can bend it.
        if m.expected_delivery_time(preferred_action(&m)) <= f64::from(CAP) / 4.0 {
            let check = verify_threshold_structure(&base.policy, &m, true);
            prop_assert!(check.passed(), "{:?}", check.violations);
        }
    }

    #[test]
    fn reliable_channel_invariants(p in params()) {
        let m = Model::new(reliable(p)).unwrap();
        let solved = solve(&m, 1.0, 1);
        prop_assert!(submodularity_holds(&solved.values, &m, 1.0).unwrap());

        let rc = ReliableChannel::new(&m).unwrap();
        let l1 = m.action_duration(rc.a_1());
        if rc.energy_efficiency_condition() {
            let omega_star = rc.optimal_threshold_case2().unwrap();
            prop_assert!((solved.theta - rc.average_cost_case2(omega_star).unwrap()).abs() <= 1e-8);

            let exhaustive = (l1..=CAP)
                .min_by(|&a, &b| {
                    rc.average_cost_case2(a).unwrap().total_cmp(&rc.average_cost_case2(b).unwrap())
                })
                .unwrap();
            prop_assert_eq!(omega_star, exhaustive);

            let mdp = UniformizedMdp::new(&m, 1.0).unwrap();
            let upper = (3.0 * (2.0 * m.omega() * m.energy_cost(rc.a_1())).sqrt()).ceil() as u32;
            for w in l1..=upper.clamp(l1, CAP) {
                let e = policy_evaluation(&mdp, &rc.idle_threshold_policy(w), 1).unwrap();
                prop_assert!((e.theta - rc.average_cost_case2(w).unwrap()).abs() <= 1e-8);
            }
        }
        if rc.idle_exclusion_condition() {
            let j = rc.cycle_costs();
            prop_assert!((solved.theta - j.j1.min(j.j2).min(j.j3)).abs() <= 1e-8);

            // On states reachable from L(a_1), only updates, with at most one
            // switch from a_2 to a_1.
            let mut s = l1;
            let mut seen = vec![false; CAP as usize + 1];
            let mut reached = Vec::new();
            while !seen[s as usize] {
                seen[s as usize] = true;
                reached.push(s);
                s = m.action_duration(solved.policy.action(s));
            }
            reached.sort_unstable();
            let acts: Vec<Action> = reached.iter().map(|&s| solved.policy.action(s)).collect();
            prop_assert!(acts.iter().all(|a| a.is_update()), "{:?}", acts);
            let switches = acts.windows(2).filter(|w| w[0] != w[1]).count();
            prop_assert!(switches <= 1);
            if switches == 1 {
                prop_assert_eq!(acts[0], rc.a_2());
            }
        }
    }

    #[test]
    fn simulation_invariants(p in params(), seed in any::<u64>()) {
        let m = Model::new(p).unwrap();
        let cfg = SimConfig::new(20_000, seed);
        for spec in [PolicySpec::ZeroWaitNoComputation, PolicySpec::ZeroWaitComputation] {
            let a = simulate(&spec, &m, &cfg).unwrap();
            prop_assert_eq!(&a, &simulate(&spec, &m, &cfg).unwrap());
            prop_assert!((a.avg_cost - (a.avg_aoi + m.omega() * a.avg_energy)).abs() <= 1e-9);
            let st = stationary_average_cost(&spec, &m).unwrap();
            prop_assert!((st.avg_cost - (st.avg_aoi + m.omega() * st.avg_energy)).abs() <= 1e-9);
            for e in Trajectory::new(&spec, &m, seed, 1).unwrap().take(2_000) {
                prop_assert!(e.state <= CAP && e.next <= CAP);
                if e.delivered {
                    prop_assert_eq!(e.next, m.action_duration(e.action).min(CAP));
                }
            }
        }
    }

    #[test]
    fn minislot_and_epoch_accounting_agree(p in params(), seed in any::<u64>()) {
        let m = Model::new(p).unwrap();
        let spec = PolicySpec::ZeroWaitComputation;
        let (mut cost, mut time) = (0.0, 0u64);
        for e in Trajectory::new(&spec, &m, seed, 1).unwrap().take(500) {
            cost += m.step_cost(e.state, e.action).unwrap();
            time += u64::from(m.action_duration(e.action));
        }
        let cfg = SimConfig { horizon_minislots: time, warmup_minislots: 0, seed, initial_aoi: 1 };
        prop_assume!(time >= BATCHES);
        let st = simulate(&spec, &m, &cfg).unwrap();
        let per_epoch = cost / time as f64;
        prop_assert!((st.avg_cost - per_epoch).abs() <= 1e-9 * per_epoch);
    }
}
