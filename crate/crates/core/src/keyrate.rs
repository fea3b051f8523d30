//! Phase-flip error estimation and finite-key rates.

use crate::chernoff::{expected_upper, observed_upper};
use crate::error::{Error, Result};
use crate::fidelity::VirtualIntensities;
use crate::model::{EpsilonBudget, FailureProb, ObservedCounts, ProtocolParams, POST_SELECTION_EXPONENT};

const ENTROPY_SLACK: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFlipBound {
    pub c2_bar: f64,
    /// Upper bound on the expected number of phase-flip errors.
    pub n_ph_expected_upper: f64,
    /// Upper bound on the realised number of phase-flip errors.
    pub n_ph_upper: f64,
    /// Upper bound on the phase-flip error rate of untagged bits, in `[0, 1]`.
    pub e_ph_upper: f64,
}

/// `2 sqrt((1 - e^{-mu_A/2})(1 - e^{-mu_B/2}))`.
pub fn c2_bar(vi: VirtualIntensities) -> f64 {
    let a = -(-0.5 * vi.mu_a).exp_m1();
    let b = -(-0.5 * vi.mu_b).exp_m1();
    2.0 * (a * b).sqrt()
}

/// Binary Shannon entropy in bits.
pub fn entropy_binary(x: f64) -> Result<f64> {
    if !(-ENTROPY_SLACK..=1.0 + ENTROPY_SLACK).contains(&x) || x.is_nan() {
        return Err(Error::domain("entropy_binary", format!("{x} outside [0, 1]")));
    }
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    let h = -(x * x.log2() + (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2);
    Ok(h)
}

/// Upper bound on the expected number of phase-flip errors in untagged bits.
///
/// Both `n_O` and `n_B` are first raised to their Chernoff upper
/// expectations, each consuming failure probability `fp`.
pub fn phase_flip_expected_upper(
    counts: &ObservedCounts,
    proto: &ProtocolParams,
    c2: f64,
    fp: FailureProb,
) -> Result<f64> {
    let n_o = expected_upper(counts.n_o as f64, fp)?;
    let n_b = expected_upper(counts.n_b as f64, fp)?;
    Ok(phase_flip_expected_from_bounds(n_o, n_b, proto, c2))
}

/// The six-term phase-flip bound for already-estimated `<n_O>^U`, `<n_B>^U`.
pub fn phase_flip_expected_from_bounds(n_o: f64, n_b: f64, proto: &ProtocolParams, c2: f64) -> f64 {
    let (p_v, p_w, n) = (proto.p_v(), proto.p_w, proto.n());
    let bracket = n_o / (p_v * p_v)
        + n_b / (p_w * p_w)
        + 2.0 * c2 / p_v * (n * n_o).sqrt()
        + 2.0 * c2 / p_w * (n * n_b).sqrt()
        + 2.0 / (p_v * p_w) * (n_o * n_b).sqrt()
        + c2 * c2 * n;
    0.5 * p_v * p_w * bracket
}

/// `min(1, O^U(<N^ph>) / n_Z)`.
pub fn phase_flip_rate_upper(n_ph_expected: f64, n_z: u64, fp: FailureProb) -> Result<f64> {
    if n_z == 0 {
        return Err(Error::NoUntaggedBits);
    }
    let n_ph = observed_upper(n_ph_expected, fp)?;
    Ok((n_ph / n_z as f64).min(1.0))
}

/// Full phase-flip pipeline for one set of counts.
pub fn phase_flip_bound(
    counts: &ObservedCounts,
    proto: &ProtocolParams,
    vi: VirtualIntensities,
    fp: FailureProb,
) -> Result<PhaseFlipBound> {
    if counts.n_z == 0 {
        return Err(Error::NoUntaggedBits);
    }
    let c2 = c2_bar(vi);
    let expected = phase_flip_expected_upper(counts, proto, c2, fp)?;
    let n_ph = observed_upper(expected, fp)?;
    Ok(PhaseFlipBound {
        c2_bar: c2,
        n_ph_expected_upper: expected,
        n_ph_upper: n_ph,
        e_ph_upper: (n_ph / counts.n_z as f64).min(1.0),
    })
}

/// Terms of the collective-attack key length, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyLengthTerms {
    /// `n_Z [1 - H(e_ph)]`.
    pub privacy: f64,
    /// `f M_s H(E_Z)`.
    pub leak_ec: f64,
    /// `log2(2/eps_cor) + 2 log2(1/eps_PA)`.
    pub correctness_pa: f64,
    /// `(d + 3) sqrt(n_Z log2(2/eps_bar))`.
    pub smoothing: f64,
}

impl KeyLengthTerms {
    pub fn raw_length(&self) -> f64 {
        self.privacy - self.leak_ec - self.correctness_pa - self.smoothing
    }
}

pub fn key_length_terms(
    counts: &ObservedCounts,
    proto: &ProtocolParams,
    e_ph: f64,
    eps: &EpsilonBudget,
) -> Result<KeyLengthTerms> {
    let log2 = std::f64::consts::LN_2;
    let n_z = counts.n_z as f64;
    let d = proto.d_dim() as f64;
    // a phase-flip bound at or above 1/2 leaves no secrecy
    let e_ph = e_ph.min(0.5);
    Ok(KeyLengthTerms {
        privacy: n_z * (1.0 - entropy_binary(e_ph)?),
        leak_ec: proto.f_ec * counts.m_s() as f64 * entropy_binary(counts.e_z)?,
        correctness_pa: (log2 - eps.ln_eps_cor) / log2 - 2.0 * eps.ln_eps_pa / log2,
        smoothing: (d + 3.0) * (n_z * (log2 - eps.ln_eps_bar) / log2).sqrt(),
    })
}

/// Collective-attack rate per logical window, clamped at zero.
pub fn r_collective(
    counts: &ObservedCounts,
    proto: &ProtocolParams,
    e_ph: f64,
    eps: &EpsilonBudget,
) -> Result<f64> {
    let terms = key_length_terms(counts, proto, e_ph, eps)?;
    Ok((terms.raw_length() / proto.n()).max(0.0))
}

/// Post-selection penalty `2(d^2 - 1) log2(N + 1) / N`.
pub fn coherent_penalty(proto: &ProtocolParams) -> f64 {
    let n = proto.n();
    2.0 * POST_SELECTION_EXPONENT as f64 * n.ln_1p() / std::f64::consts::LN_2 / n
}

/// Coherent-attack rate per logical window, clamped at zero.
pub fn r_coherent(r_col: f64, proto: &ProtocolParams) -> f64 {
    (r_col - coherent_penalty(proto)).max(0.0)
}
