//! Mean-value linear model of the fiber, Charlie's interferometer and his
//! detectors.
//!
//! Charlie sits midway, so each arm spans `L/2`. Only the right-hand
//! detector defines an effective window:
//!
//! * O windows (both vacuum) click on dark counts only;
//! * Z windows (one pulse) send half the arriving intensity to each port;
//! * B windows (two pulses) interfere towards the left port, leaking the
//!   misalignment fraction `e_d` of the total intensity to the right.
//!
//! Counts are means rounded half-up; no sampling noise is added.

use crate::error::{Error, Result};
use crate::model::{ChannelParams, ObservedCounts, ProtocolParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickModel {
    /// One-arm transmittance including detector efficiency.
    pub eta: f64,
    pub p_click_o: f64,
    pub p_click_b: f64,
    pub p_click_z: f64,
}

/// One-arm transmittance `eta_d 10^{-alpha_f (L/2) / 10}`.
pub fn arm_transmittance(chan: &ChannelParams) -> f64 {
    chan.eta_d * 10f64.powf(-chan.alpha_f * 0.5 * chan.distance_km / 10.0)
}

/// `1 - (1 - p_d) e^{-x}`.
fn click_probability(p_d: f64, mean_photons: f64) -> f64 {
    -((-p_d).ln_1p() - mean_photons).exp_m1()
}

pub fn click_probabilities(chan: &ChannelParams, mu: f64) -> Result<ClickModel> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("signal intensity {mu} must be finite and >= 0")));
    }
    let eta = arm_transmittance(chan);
    Ok(ClickModel {
        eta,
        p_click_o: chan.p_d,
        p_click_z: click_probability(chan.p_d, 0.5 * mu * eta),
        p_click_b: click_probability(chan.p_d, 2.0 * mu * eta * chan.e_d),
    })
}

fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

/// Expected effective-window counts over `N` logical windows.
///
/// Alice encodes `v -> 0`, `w -> 1` and Bob the opposite, so every effective
/// O and B window carries a bit error and Z windows carry none.
pub fn simulate_counts(chan: &ChannelParams, proto: &ProtocolParams, mu: f64) -> Result<ObservedCounts> {
    let clicks = click_probabilities(chan, mu)?;
    let (n, p_v, p_w) = (proto.n(), proto.p_v(), proto.p_w);
    let n_o = round_half_up(n * p_v * p_v * clicks.p_click_o);
    let n_b = round_half_up(n * p_w * p_w * clicks.p_click_b);
    let mut n_z = round_half_up(n * 2.0 * p_v * p_w * clicks.p_click_z);
    // rounding can overshoot N by one window when every window clicks
    let cap = proto.n_windows.saturating_sub(n_o + n_b);
    n_z = n_z.min(cap);
    let m_s = n_o + n_b + n_z;
    if m_s == 0 {
        return Err(Error::NoEffectiveWindows);
    }
    let e_z = (n_o + n_b) as f64 / m_s as f64;
    ObservedCounts::new(n_o, n_b, n_z, e_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chan(distance_km: f64) -> ChannelParams {
        ChannelParams::reference(distance_km)
    }

    #[test]
    fn dark_counts_only_without_signal() {
        let m = click_probabilities(&chan(50.0), 0.0).unwrap();
        assert_eq!(m.p_click_o, 1e-9);
        assert!((m.p_click_z - 1e-9).abs() < 1e-24);
        assert!((m.p_click_b - 1e-9).abs() < 1e-24);
    }

    #[test]
    fn perfect_interference_never_reaches_right_port() {
        let c = ChannelParams { p_d: 0.0, e_d: 0.0, ..chan(10.0) };
        assert_eq!(click_probabilities(&c, 0.3).unwrap().p_click_b, 0.0);
    }

    #[test]
    fn single_pulse_click_probability() {
        // eta = 1 at L = 0 with eta_d = 1; mu * eta = 0.02
        let c = ChannelParams { eta_d: 1.0, ..chan(0.0) };
        let m = click_probabilities(&c, 0.02).unwrap();
        let expected = 1.0 - (1.0 - 1e-9) * (-0.01f64).exp();
        assert!((m.p_click_z - expected).abs() < 1e-12 * expected);
        assert!((m.p_click_z - 9.950_166_250_831_946e-3).abs() < 1e-8);
    }

    #[test]
    fn combinatorial_weights() {
        let c = ChannelParams { p_d: 0.01, e_d: 0.0, ..chan(0.0) };
        let p = ProtocolParams { n_windows: 4_000_000, p_w: 0.5, f_ec: 1.16 };
        // mu = 0: every class clicks on dark counts only
        let counts = simulate_counts(&c, &p, 0.0).unwrap();
        assert_eq!(counts.n_o, 10_000);
        assert_eq!(counts.n_b, 10_000);
        assert_eq!(counts.n_z, 20_000);
    }

    #[test]
    fn noiseless_channel_has_no_bit_errors() {
        let c = ChannelParams { p_d: 0.0, e_d: 0.0, ..chan(20.0) };
        let p = ProtocolParams::reference(0.1);
        let counts = simulate_counts(&c, &p, 0.05).unwrap();
        assert_eq!(counts.e_z, 0.0);
        assert_eq!(counts.n_o + counts.n_b, 0);
    }

    #[test]
    fn no_effective_windows() {
        let c = ChannelParams { p_d: 0.0, ..chan(20.0) };
        let p = ProtocolParams::reference(0.1);
        assert_eq!(simulate_counts(&c, &p, 0.0), Err(Error::NoEffectiveWindows));
    }

    #[test]
    fn reference_point_counts() {
        // Recomputed by hand: eta = 0.6 * 10^-1 = 0.06 at 100 km,
        // N p_v^2 p_d = 1e14 * 0.81 * 1e-9 = 81000,
        // N p_w^2 (1 - (1-p_d) e^{-2 mu eta e_d}),
        // N 2 p_v p_w (1 - (1-p_d) e^{-mu eta / 2}).
        let p = ProtocolParams::reference(0.1);
        let counts = simulate_counts(&chan(100.0), &p, 0.05).unwrap();
        let eta = 0.06f64;
        let n = 1e14f64;
        let pb = 1.0 - (1.0 - 1e-9) * (-2.0 * 0.05 * eta * 0.03f64).exp();
        let pz = 1.0 - (1.0 - 1e-9) * (-0.05 * eta / 2.0f64).exp();
        assert_eq!(counts.n_o, 81_000);
        assert!((counts.n_b as f64 - n * 0.01 * pb).abs() <= 1.0);
        assert!((counts.n_z as f64 - n * 0.18 * pz).abs() <= 1.0 + 1e-9 * n * 0.18 * pz);
        let e_z = (counts.n_o + counts.n_b) as f64 / counts.m_s() as f64;
        assert_eq!(counts.e_z, e_z);
    }

    #[test]
    fn doubling_loss_equals_doubling_length() {
        let c = chan(37.0);
        let doubled_loss = ChannelParams { alpha_f: 0.4, ..c };
        let doubled_length = chan(74.0);
        let a = arm_transmittance(&doubled_loss);
        let b = arm_transmittance(&doubled_length);
        assert!((a - b).abs() < 1e-15 * a);
    }

    proptest! {
        #[test]
        fn counts_bounded(
            mu in 0.0f64..5.0, l in 0.0f64..400.0, p_w in 0.01f64..0.99,
            p_d in 0.0f64..0.9, e_d in 0.0f64..0.49, n in 1u64..1_000_000_000_000_000,
        ) {
            let c = ChannelParams { p_d, e_d, ..chan(l) };
            let p = ProtocolParams { n_windows: n, p_w, f_ec: 1.16 };
            if let Ok(counts) = simulate_counts(&c, &p, mu) {
                prop_assert!(counts.m_s() <= n);
                prop_assert!((0.0..=1.0).contains(&counts.e_z));
            }
        }

        #[test]
        fn click_monotonicity(mu in 1e-6f64..2.0, l in 0.0f64..300.0, e_d in 0.0f64..0.4, k in 1.01f64..2.0) {
            let c = ChannelParams { e_d, ..chan(l) };
            let base = click_probabilities(&c, mu).unwrap();
            prop_assert!(click_probabilities(&c, mu * k).unwrap().p_click_z > base.p_click_z);
            let nearer = c.at_distance(l / k);
            if l > 0.0 {
                prop_assert!(click_probabilities(&nearer, mu).unwrap().p_click_z > base.p_click_z);
            }
            let worse = ChannelParams { e_d: e_d + 0.05, ..c };
            prop_assert!(click_probabilities(&worse, mu).unwrap().p_click_b > base.p_click_b);
        }
    }
}
