//! System parameters and the primitive per-epoch formulas.
//!
//! A decision epoch lasts `L(a)` minislots. The device either idles for one
//! minislot, transmits a raw update (`T_u` minislots), or preprocesses for
//! `T_p` minislots and then transmits the smaller update (`T_u'` minislots).
//! Every packet of an update must get through for the update to count.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default AoI cap, large enough that truncation only touches the top states.
pub const DEFAULT_AGE_CAP: u32 = 200;

/// The three feasible `(a_p, a_u)` control vectors. `(1, 0)` would spend
/// energy without delivering anything and has no variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    /// `(0,0)`: stay silent for one minislot.
    Idle,
    /// `(0,1)`: sample and send the raw update.
    Transmit,
    /// `(1,1)`: sample, preprocess, then send the reduced update.
    PreprocessTransmit,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Idle, Action::Transmit, Action::PreprocessTransmit];
    pub const UPDATES: [Action; 2] = [Action::Transmit, Action::PreprocessTransmit];

    /// The `(a_p, a_u)` pair.
    pub fn pair(self) -> (u8, u8) {
        match self {
            Action::Idle => (0, 0),
            Action::Transmit => (0, 1),
            Action::PreprocessTransmit => (1, 1),
        }
    }

    pub fn is_update(self) -> bool {
        self != Action::Idle
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Action::Idle => 0,
            Action::Transmit => 1,
            Action::PreprocessTransmit => 2,
        }
    }

    /// Short lowercase name used in CSV tables and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Action::Idle => "idle",
            Action::Transmit => "transmit",
            Action::PreprocessTransmit => "preprocess",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, u) = self.pair();
        write!(f, "({p},{u})")
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "idle" | "(0,0)" | "00" => Ok(Action::Idle),
            "transmit" | "(0,1)" | "01" => Ok(Action::Transmit),
            "preprocess" | "preprocess-transmit" | "(1,1)" | "11" => Ok(Action::PreprocessTransmit),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

/// Raw physical and model constants. Validate with [`Model::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Minislots to transmit an unprocessed update (`T_u`).
    pub t_u: u32,
    /// Minislots to transmit a preprocessed update (`T_u'`).
    pub t_u_prime: u32,
    /// Bits per packet (`l`).
    pub bits_per_packet: u32,
    /// CPU cycles per bit of preprocessing (`v`).
    pub cycles_per_bit: u32,
    /// CPU frequency in Hz (`f`).
    pub cpu_freq: f64,
    /// Minislot duration in seconds (`tau`).
    pub minislot: f64,
    /// Effective switched capacitance (`kappa`).
    pub kappa: f64,
    /// Transmit power in watts (`P`).
    pub tx_power: f64,
    /// Per-packet success probability of one minislot (`p_s`).
    pub p_s: f64,
    /// AoI cap (`delta_hat`).
    pub delta_hat: u32,
    /// Energy weight (`omega`).
    pub omega: f64,
}

impl Default for SystemParams {
    /// The general-case setting used throughout the evaluation section:
    /// `T_u=4, T_u'=2, l=3, v=2, f=35, tau=1, kappa=5e-5, P=6, omega=2, p_s=0.8`.
    fn default() -> Self {
        SystemParams {
            t_u: 4,
            t_u_prime: 2,
            bits_per_packet: 3,
            cycles_per_bit: 2,
            cpu_freq: 35.0,
            minislot: 1.0,
            kappa: 0.00005,
            tx_power: 6.0,
            p_s: 0.8,
            delta_hat: DEFAULT_AGE_CAP,
            omega: 2.0,
        }
    }
}

fn positive(field: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            field,
            reason: format!("must be finite and > 0, got {x}"),
        })
    }
}

fn nonzero(field: &'static str, x: u32) -> Result<()> {
    if x > 0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            field,
            reason: "must be >= 1".into(),
        })
    }
}

/// `ceil(num / den)` that snaps quotients within float noise of an integer.
fn ceil_snapped(num: f64, den: f64) -> f64 {
    let q = num / den;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        q.ceil()
    }
}

/// Validated parameters together with the derived quantities
/// `T_p`, `C_p = kappa * tau * f^3` and `C_u = P * tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    params: SystemParams,
    t_p: u32,
    c_p: f64,
    c_u: f64,
}

impl Model {
    pub fn new(params: SystemParams) -> Result<Self> {
        nonzero("t_u", params.t_u)?;
        nonzero("t_u_prime", params.t_u_prime)?;
        nonzero("l", params.bits_per_packet)?;
        positive("f", params.cpu_freq)?;
        positive("tau", params.minislot)?;
        positive("kappa", params.kappa)?;
        positive("P", params.tx_power)?;
        if params.t_u_prime > params.t_u {
            return Err(Error::InvalidParam {
                field: "t_u_prime",
                reason: format!(
                    "preprocessing cannot enlarge the update ({} > T_u = {})",
                    params.t_u_prime, params.t_u
                ),
            });
        }
        if !(params.p_s > 0.0 && params.p_s <= 1.0) {
            return Err(Error::InvalidParam {
                field: "p_s",
                reason: format!("must lie in (0, 1], got {}", params.p_s),
            });
        }
        if !(params.omega.is_finite() && params.omega >= 0.0) {
            return Err(Error::InvalidParam {
                field: "omega",
                reason: format!("must be finite and >= 0, got {}", params.omega),
            });
        }

        let bits = f64::from(params.t_u) * f64::from(params.bits_per_packet);
        let t_p = ceil_snapped(
            bits * f64::from(params.cycles_per_bit),
            params.cpu_freq * params.minislot,
        );
        if t_p > f64::from(u32::MAX / 4) {
            return Err(Error::InvalidParam {
                field: "v",
                reason: format!("preprocessing takes {t_p} minislots"),
            });
        }
        let t_p = t_p as u32;

        let longest_reset = params.t_u.max(t_p + params.t_u_prime);
        if params.delta_hat < longest_reset {
            return Err(Error::InvalidParam {
                field: "delta_hat",
                reason: format!(
                    "cap {} is below the post-update age {longest_reset}",
                    params.delta_hat
                ),
            });
        }

        let c_p = params.kappa * params.minislot * params.cpu_freq.powi(3);
        let c_u = params.tx_power * params.minislot;
        Ok(Model {
            params,
            t_p,
            c_p,
            c_u,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn age_cap(&self) -> u32 {
        self.params.delta_hat
    }

    pub fn omega(&self) -> f64 {
        self.params.omega
    }

    pub fn p_s(&self) -> f64 {
        self.params.p_s
    }

    /// Minislots spent preprocessing one update, `ceil(T_u l v / (f tau))`.
    pub fn preprocessing_duration(&self) -> u32 {
        self.t_p
    }

    /// Computation energy per preprocessing minislot.
    pub fn compute_energy_per_slot(&self) -> f64 {
        self.c_p
    }

    /// Communication energy per transmitting minislot.
    pub fn transmit_energy_per_slot(&self) -> f64 {
        self.c_u
    }

    /// Epoch length `L(a)` in minislots.
    pub fn action_duration(&self, a: Action) -> u32 {
        match a {
            Action::Idle => 1,
            Action::Transmit => self.params.t_u,
            Action::PreprocessTransmit => self.t_p + self.params.t_u_prime,
        }
    }

    /// Minislots of `a` spent on the air, `L_u(a)`.
    pub fn transmission_duration(&self, a: Action) -> u32 {
        match a {
            Action::Idle => 0,
            Action::Transmit => self.params.t_u,
            Action::PreprocessTransmit => self.params.t_u_prime,
        }
    }

    /// Total energy `C(a)` spent over the epoch.
    pub fn energy_cost(&self, a: Action) -> f64 {
        match a {
            Action::Idle => 0.0,
            Action::Transmit => f64::from(self.params.t_u) * self.c_u,
            Action::PreprocessTransmit => {
                f64::from(self.t_p) * self.c_p + f64::from(self.params.t_u_prime) * self.c_u
            }
        }
    }

    /// Probability that every packet of the update is delivered, `p_s^{L_u(a)}`.
    pub fn update_success_probability(&self, a: Action) -> f64 {
        self.params.p_s.powi(self.transmission_duration(a) as i32)
    }

    /// Expected epoch length per delivered update, `L(a) / p_s^{L_u(a)}`.
    pub fn expected_delivery_time(&self, a: Action) -> f64 {
        f64::from(self.action_duration(a)) / self.update_success_probability(a)
    }

    pub fn check_state(&self, s: u32) -> Result<()> {
        if s == 0 || s > self.params.delta_hat {
            Err(Error::StateOutOfRange {
                state: s,
                cap: self.params.delta_hat,
            })
        } else {
            Ok(())
        }
    }

    /// Epoch cost `R(s, a)`: the AoI summed over the `L(a)` minislots of the
    /// epoch (`s, s+1, ..., s+L-1`, uncapped inside the epoch) plus `omega * C(a)`.
    pub fn step_cost(&self, s: u32, a: Action) -> Result<f64> {
        self.check_state(s)?;
        Ok(self.step_cost_unchecked(s, a))
    }

    pub(crate) fn step_cost_unchecked(&self, s: u32, a: Action) -> f64 {
        let len = f64::from(self.action_duration(a));
        0.5 * (2.0 * f64::from(s) + len - 1.0) * len + self.params.omega * self.energy_cost(a)
    }

    /// Next-epoch AoI distribution. Coinciding targets are merged and
    /// zero-probability branches dropped, so each target appears once.
    pub fn transition_distribution(&self, s: u32, a: Action) -> Result<Vec<(u32, f64)>> {
        self.check_state(s)?;
        Ok(self.transitions_unchecked(s, a))
    }

    pub(crate) fn transitions_unchecked(&self, s: u32, a: Action) -> Vec<(u32, f64)> {
        let cap = self.params.delta_hat;
        let len = self.action_duration(a);
        if a == Action::Idle {
            return vec![((s + 1).min(cap), 1.0)];
        }
        let success = self.update_success_probability(a);
        let reset = len.min(cap);
        let grown = s.saturating_add(len).min(cap);
        if reset == grown || success == 1.0 {
            return vec![(reset, if reset == grown { 1.0 } else { success })];
        }
        vec![(reset, success), (grown, 1.0 - success)]
    }
}

/// Physical-layer inputs for the fixed-rate outage test
/// `B log2(1 + gamma P / sigma^2) >= l / tau`.
///
/// The fading law of `gamma` is left to the caller: pass a realized gain to
/// [`LinkBudget::supports_rate`], or a batch of sampled gains to
/// [`success_probability_from_gains`] to estimate `p_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub bandwidth: f64,
    pub gain: f64,
    pub noise_power: f64,
}

impl LinkBudget {
    pub fn new(bandwidth: f64, gain: f64, noise_power: f64) -> Result<Self> {
        positive("B", bandwidth)?;
        positive("gamma", gain)?;
        positive("sigma2", noise_power)?;
        Ok(LinkBudget {
            bandwidth,
            gain,
            noise_power,
        })
    }

    /// Achievable rate in bits per second at transmit power `power`.
    pub fn rate(&self, power: f64) -> f64 {
        self.bandwidth * (1.0 + self.gain * power / self.noise_power).log2()
    }

    /// Whether one packet of `bits` fits into one minislot of `minislot` seconds.
    pub fn supports_rate(&self, bits: u32, minislot: f64, power: f64) -> bool {
        self.rate(power) >= f64::from(bits) / minislot
    }

    /// Smallest channel gain at which the packet still fits.
    pub fn threshold_gain(
        bandwidth: f64,
        noise_power: f64,
        bits: u32,
        minislot: f64,
        power: f64,
    ) -> f64 {
        ((f64::from(bits) / (minislot * bandwidth)).exp2() - 1.0) * noise_power / power
    }
}

/// Fraction of sampled gains that pass the outage test; an estimate of `p_s`.
pub fn success_probability_from_gains(
    bandwidth: f64,
    noise_power: f64,
    gains: &[f64],
    params: &SystemParams,
) -> Result<f64> {
    if gains.is_empty() {
        return Err(Error::InvalidParam {
            field: "gamma",
            reason: "no gain samples".into(),
        });
    }
    let mut ok = 0usize;
    for &g in gains {
        let link = LinkBudget::new(bandwidth, g, noise_power)?;
        if link.supports_rate(params.bits_per_packet, params.minislot, params.tx_power) {
            ok += 1;
        }
    }
    Ok(ok as f64 / gains.len() as f64)
}
