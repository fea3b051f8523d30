//! Domain types shared by every stage of the key-rate pipeline.
//!
//! Everything here is a plain value object. The only logic is invariant
//! checking and the log-space bookkeeping of the security parameters, whose
//! coherent-attack coefficient involves `(N+1)^63` and cannot be held in an
//! `f64` for realistic block sizes.

use crate::error::{Error, Result};

/// Dimension of the local states shared by Alice and Bob.
pub const LOCAL_DIM: u32 = 8;

/// `d^2 - 1`, the post-selection exponent.
pub const POST_SELECTION_EXPONENT: u32 = LOCAL_DIM * LOCAL_DIM - 1;

/// A vacuum-overlap probability `a = |<0|psi>|^2` carried together with its
/// complement `1 - a` and its logarithm.
///
/// Overlaps close to 1 (e.g. `e^{-1e-8}`) lose almost all relative precision
/// in `1 - a` when stored as a bare `f64`, so values built from an intensity
/// keep the complement exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    value: f64,
    complement: f64,
    ln: f64,
}

impl Overlap {
    /// Overlap given directly as a probability in `[0, 1]`.
    pub fn from_value(value: f64) -> Self {
        Overlap {
            value,
            complement: 1.0 - value,
            ln: value.ln(),
        }
    }

    /// Overlap of a coherent state of intensity `mu` with the vacuum, `e^{-mu}`.
    pub fn from_intensity(mu: f64) -> Self {
        Overlap {
            value: (-mu).exp(),
            complement: -(-mu).exp_m1(),
            ln: -mu,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// `1 - value`, to full relative precision.
    pub fn complement(&self) -> f64 {
        self.complement
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    /// Equivalent intensity `-ln(value)`.
    pub fn intensity(&self) -> f64 {
        -self.ln
    }
}

/// Lower bounds on the source's vacuum overlaps plus side-channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceBounds {
    /// Alice's signal-state vacuum overlap bound `a_0`.
    pub a0: Overlap,
    /// Alice's imperfect-vacuum overlap bound `a_v0`.
    pub av0: Overlap,
    pub b0: Overlap,
    pub bv0: Overlap,
    /// Upper bound on Trojan-horse reflected intensity per logical window.
    pub mu_e: f64,
    /// Correlation length: trailing vacuum physical windows per logical window.
    pub xi: u32,
}

impl SourceBounds {
    /// Symmetric source: `a_0 = b_0 = e^{-mu}`, `a_v0 = b_v0 = e^{-mu_o}`.
    pub fn symmetric(mu: f64, mu_o: f64, mu_e: f64, xi: u32) -> Self {
        let signal = Overlap::from_intensity(mu);
        let vacuum = Overlap::from_intensity(mu_o);
        SourceBounds {
            a0: signal,
            av0: vacuum,
            b0: signal,
            bv0: vacuum,
            mu_e,
            xi,
        }
    }

    /// Copy with both signal bounds replaced by `e^{-mu}`.
    pub fn with_signal_intensity(&self, mu: f64) -> Self {
        let signal = Overlap::from_intensity(mu);
        SourceBounds {
            a0: signal,
            b0: signal,
            ..*self
        }
    }

    /// Physical windows per logical window.
    pub fn windows_per_logical(&self) -> u32 {
        self.xi + 1
    }

    fn check(&self) -> Result<()> {
        for (name, o) in [
            ("a0", self.a0),
            ("av0", self.av0),
            ("b0", self.b0),
            ("bv0", self.bv0),
        ] {
            let v = o.value();
            if !v.is_finite() || !o.complement().is_finite() {
                return Err(Error::invalid(format!("{name} is not finite")));
            }
            if v > 1.0 || o.complement() < 0.0 {
                return Err(Error::invalid(format!("{name} above 1")));
            }
            if v < 0.5 {
                return Err(Error::invalid(format!("{name} below 0.5")));
            }
        }
        if !self.mu_e.is_finite() || self.mu_e < 0.0 {
            return Err(Error::invalid("mu_e must be finite and >= 0"));
        }
        if self.mu_e >= 1.0 {
            return Err(Error::invalid("mu_e must be below 1"));
        }
        Ok(())
    }
}

/// Channel and detector parameters of the linear model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Alice-to-Bob fiber length; Charlie sits in the middle.
    pub distance_km: f64,
    /// Fiber loss in dB/km.
    pub alpha_f: f64,
    pub eta_d: f64,
    /// Dark-count probability per pulse.
    pub p_d: f64,
    /// Misalignment error probability.
    pub e_d: f64,
}

impl ChannelParams {
    /// Reference experimental values: `p_d = 1e-9`, `e_d = 3%`,
    /// `eta_d = 60%`, `alpha_f = 0.2 dB/km`.
    pub fn reference(distance_km: f64) -> Self {
        ChannelParams {
            distance_km,
            alpha_f: 0.2,
            eta_d: 0.6,
            p_d: 1e-9,
            e_d: 0.03,
        }
    }

    pub fn at_distance(&self, distance_km: f64) -> Self {
        ChannelParams {
            distance_km,
            ..*self
        }
    }

    fn check(&self) -> Result<()> {
        let finite = [
            ("distance_km", self.distance_km),
            ("alpha_f", self.alpha_f),
            ("eta_d", self.eta_d),
            ("p_d", self.p_d),
            ("e_d", self.e_d),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} is not finite")));
            }
        }
        if self.distance_km < 0.0 {
            return Err(Error::invalid("distance_km below 0"));
        }
        if self.alpha_f < 0.0 {
            return Err(Error::invalid("alpha_f below 0"));
        }
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(Error::invalid("eta_d outside (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.p_d) {
            return Err(Error::invalid("p_d outside [0, 1)"));
        }
        if !(0.0..0.5).contains(&self.e_d) {
            return Err(Error::invalid("e_d outside [0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Number of logical windows `N`.
    pub n_windows: u64,
    /// Probability of choosing the sending source `w`.
    pub p_w: f64,
    /// Error-correction inefficiency `f`.
    pub f_ec: f64,
}

impl ProtocolParams {
    pub fn reference(p_w: f64) -> Self {
        ProtocolParams {
            n_windows: 100_000_000_000_000,
            p_w,
            f_ec: 1.16,
        }
    }

    /// Probability of the vacuum source `v`.
    pub fn p_v(&self) -> f64 {
        1.0 - self.p_w
    }

    pub fn d_dim(&self) -> u32 {
        LOCAL_DIM
    }

    pub fn n(&self) -> f64 {
        self.n_windows as f64
    }

    pub fn with_send_probability(&self, p_w: f64) -> Self {
        ProtocolParams { p_w, ..*self }
    }

    fn check(&self) -> Result<()> {
        if self.n_windows == 0 {
            return Err(Error::invalid("n_windows must be positive"));
        }
        if !(self.p_w > 0.0 && self.p_w < 1.0) {
            return Err(Error::invalid("p_w outside (0, 1)"));
        }
        if !self.f_ec.is_finite() || self.f_ec < 1.0 {
            return Err(Error::invalid("f_ec below 1"));
        }
        Ok(())
    }
}

/// Post-error-correction observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedCounts {
    pub n_o: u64,
    pub n_b: u64,
    pub n_z: u64,
    /// Bit-flip error rate of the raw key.
    pub e_z: f64,
}

impl ObservedCounts {
    pub fn new(n_o: u64, n_b: u64, n_z: u64, e_z: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&e_z) {
            return Err(Error::invalid("e_z outside [0, 1]"));
        }
        Ok(ObservedCounts { n_o, n_b, n_z, e_z })
    }

    /// Raw key length `M_s`.
    pub fn m_s(&self) -> u64 {
        self.n_o + self.n_b + self.n_z
    }

    pub fn check_against(&self, proto: &ProtocolParams) -> Result<()> {
        if self.m_s() > proto.n_windows {
            return Err(Error::invalid("m_s exceeds n_windows"));
        }
        Ok(())
    }
}

/// Failure probability held as its natural logarithm.
///
/// The per-estimate Chernoff probabilities that come out of a `1e-10`
/// coherent target at `N = 1e14` are around `e^{-2056}`, far below the
/// smallest `f64`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FailureProb {
    ln: f64,
}

impl FailureProb {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain("FailureProb::new", format!("{p} outside (0, 1]")));
        }
        Ok(FailureProb { ln: p.ln() })
    }

    pub fn from_ln(ln: f64) -> Result<Self> {
        if ln.is_nan() || ln > 0.0 || ln == f64::NEG_INFINITY {
            return Err(Error::domain("FailureProb::from_ln", format!("{ln} outside (-inf, 0]")));
        }
        Ok(FailureProb { ln })
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    /// Probability in linear scale; underflows to 0 for tiny values.
    pub fn prob(&self) -> f64 {
        self.ln.exp()
    }
}

/// Security-parameter allocation, all stored as natural logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBudget {
    pub ln_eps_cor: f64,
    pub ln_eps_pa: f64,
    pub ln_eps_bar: f64,
    /// Failure probability of each Chernoff estimate.
    pub ln_eps_chernoff: f64,
}

impl EpsilonBudget {
    /// Equal six-way split of `eps_col = eps_coh / (N+1)^63` over
    /// `eps_cor`, `eps_pa`, `eps_bar` and the three Chernoff estimates.
    pub fn from_coherent_target(eps_coh: f64, n_windows: u64) -> Result<Self> {
        if !(eps_coh > 0.0 && eps_coh < 1.0) {
            return Err(Error::invalid("eps_coh outside (0, 1)"));
        }
        let ln_col = eps_coh.ln() - post_selection_ln_factor(n_windows);
        let share = ln_col - 6f64.ln();
        Ok(EpsilonBudget {
            ln_eps_cor: share,
            ln_eps_pa: share,
            ln_eps_bar: share,
            ln_eps_chernoff: share,
        })
    }

    pub fn from_ln(ln_cor: f64, ln_pa: f64, ln_bar: f64, ln_chernoff: f64) -> Result<Self> {
        let b = EpsilonBudget {
            ln_eps_cor: ln_cor,
            ln_eps_pa: ln_pa,
            ln_eps_bar: ln_bar,
            ln_eps_chernoff: ln_chernoff,
        };
        b.check()?;
        Ok(b)
    }

    /// `ln(eps_cor + eps_bar + eps_pa + 3 eps)`.
    pub fn ln_eps_col(&self) -> f64 {
        log_sum_exp(&[
            self.ln_eps_cor,
            self.ln_eps_bar,
            self.ln_eps_pa,
            3f64.ln() + self.ln_eps_chernoff,
        ])
    }

    /// `ln(eps_col * (N+1)^(d^2-1))`.
    pub fn ln_eps_coh(&self, n_windows: u64) -> f64 {
        self.ln_eps_col() + post_selection_ln_factor(n_windows)
    }

    pub fn chernoff(&self) -> FailureProb {
        FailureProb {
            ln: self.ln_eps_chernoff,
        }
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("eps_cor", self.ln_eps_cor),
            ("eps_pa", self.ln_eps_pa),
            ("eps_bar", self.ln_eps_bar),
            ("eps_chernoff", self.ln_eps_chernoff),
        ] {
            if !v.is_finite() || v >= 0.0 {
                return Err(Error::invalid(format!("{name} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// `(d^2 - 1) ln(N + 1)`.
pub fn post_selection_ln_factor(n_windows: u64) -> f64 {
    POST_SELECTION_EXPONENT as f64 * (n_windows as f64).ln_1p()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Why an evaluated point carries zero rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insecurity {
    /// Finite-size and leakage terms exceed the extractable entropy.
    ZeroRate,
    /// The fidelity lower bound is vacuous; no virtual intensity exists.
    VacuousFidelity,
    /// `e^{-mu}` falls below the 0.5 floor the fidelity bound requires.
    SignalOutOfBounds,
    NoEffectiveWindows,
    NoUntaggedBits,
}

impl Insecurity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Insecurity::ZeroRate => "zero-rate",
            Insecurity::VacuousFidelity => "vacuous-fidelity",
            Insecurity::SignalOutOfBounds => "signal-out-of-bounds",
            Insecurity::NoEffectiveWindows => "no-effective-windows",
            Insecurity::NoUntaggedBits => "no-untagged-bits",
        }
    }
}

/// One optimized (or evaluated) operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub distance_km: f64,
    pub mu: f64,
    pub p_w: f64,
    /// Equivalent virtual intensity `mu_A'`.
    pub mu_a_virtual: f64,
    pub mu_b_virtual: f64,
    /// Bits per logical window, collective attacks.
    pub r_col: f64,
    /// Bits per logical window, coherent attacks.
    pub r_coh: f64,
    /// Bits per physical window, `r_coh / (xi + 1)`.
    pub r_phys: f64,
    pub insecure: Option<Insecurity>,
}

impl RatePoint {
    pub fn is_secure(&self) -> bool {
        self.insecure.is_none()
    }
}

/// A validated set of engine inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configuration {
    pub bounds: SourceBounds,
    pub channel: ChannelParams,
    pub protocol: ProtocolParams,
    pub eps: EpsilonBudget,
}

impl Configuration {
    pub fn new(
        bounds: SourceBounds,
        channel: ChannelParams,
        protocol: ProtocolParams,
        eps: EpsilonBudget,
    ) -> Result<Self> {
        let (bounds, channel, protocol) = validate(bounds, channel, protocol)?;
        eps.check()?;
        Ok(Configuration {
            bounds,
            channel,
            protocol,
            eps,
        })
    }

    /// Reference channel and protocol with the symmetric source at signal
    /// intensity `mu`, vacuum intensity `mu_o` and the six-way `eps` split
    /// of a `1e-10` coherent target.
    pub fn reference(distance_km: f64, mu: f64, p_w: f64, mu_o: f64, mu_e: f64, xi: u32) -> Result<Self> {
        let protocol = ProtocolParams::reference(p_w);
        Configuration::new(
            SourceBounds::symmetric(mu, mu_o, mu_e, xi),
            ChannelParams::reference(distance_km),
            protocol,
            EpsilonBudget::from_coherent_target(1e-10, protocol.n_windows)?,
        )
    }

    pub fn at_distance(&self, distance_km: f64) -> Self {
        Configuration {
            channel: self.channel.at_distance(distance_km),
            ..*self
        }
    }
}

/// Checks every invariant of the three input groups, reporting the first
/// violation.
pub fn validate(
    bounds: SourceBounds,
    chan: ChannelParams,
    proto: ProtocolParams,
) -> Result<(SourceBounds, ChannelParams, ProtocolParams)> {
    bounds.check()?;
    chan.check()?;
    proto.check()?;
    Ok((bounds, chan, proto))
}
