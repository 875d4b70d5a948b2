//! Instances shared by the benchmarks.

use aoi_core::{Model, SystemParams};

/// The general-case setting with the given success probability and cap.
pub fn general(p_s: f64, delta_hat: u32) -> Model {
    Model::new(SystemParams {
        p_s,
        delta_hat,
        ..SystemParams::default()
    })
    .expect("valid parameters")
}

/// A reliable channel in the idle-then-preprocess regime.
pub fn reliable(omega: f64) -> Model {
    Model::new(SystemParams {
        t_u: 6,
        t_u_prime: 2,
        bits_per_packet: 3,
        cycles_per_bit: 5,
        cpu_freq: 45.0,
        tx_power: 6.0,
        p_s: 1.0,
        omega,
        ..SystemParams::default()
    })
    .expect("valid parameters")
}
