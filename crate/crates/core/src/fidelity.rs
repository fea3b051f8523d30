//! Fidelity lower bounds between the two logical-window states of one party
//! and the equivalent intensities of a perfect coherent-state source.
//!
//! A logical window holds one signal sub-pulse followed by `xi` vacuum
//! sub-pulses. The worst-case overlap between the "send" and "don't send"
//! window states is bounded below by a product of `G` factors: one for the
//! signal slot, one per trailing vacuum slot, and one for the Trojan-horse
//! reflection mode. The virtual intensity `mu'` is defined by
//! `e^{-mu'} = (lower bound)`, so the perfect protocol with intensity `mu'`
//! can be mapped onto the real one.
//!
//! All products are accumulated as logarithms. The regime of interest has
//! overlaps like `e^{-1e-8}`, where `1 - a` must be carried separately.

use crate::error::{Error, Result};
use crate::model::{Overlap, SourceBounds};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualIntensities {
    pub mu_a: f64,
    pub mu_b: f64,
}

/// `G(alpha, beta) = sqrt(alpha beta) - sqrt((1 - alpha)(1 - beta))`.
///
/// Evaluated as `(alpha + beta - 1) / (sqrt(alpha beta) + sqrt((1-alpha)(1-beta)))`,
/// which removes the cancellation between the two roots.
pub fn g_func(alpha: f64, beta: f64) -> Result<f64> {
    for x in [alpha, beta] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain("g_func", format!("argument {x} outside [0, 1]")));
        }
    }
    let (alpha, beta) = (alpha.min(beta), alpha.max(beta));
    // 1 - beta is exact for beta >= 0.5
    let numerator = if beta >= 0.5 {
        alpha - (1.0 - beta)
    } else {
        (alpha + beta) - 1.0
    };
    let denominator = (alpha * beta).sqrt() + ((1.0 - alpha) * (1.0 - beta)).sqrt();
    if denominator == 0.0 {
        return Ok(0.0);
    }
    Ok(numerator / denominator)
}

/// `ln G(alpha, beta)` from overlaps with exact complements, or `None` when
/// `G <= 0`.
fn ln_g(alpha: Overlap, beta: Overlap) -> Option<f64> {
    // G = sqrt(alpha beta) * (1 - r), r = sqrt(c_alpha c_beta / (alpha beta))
    if alpha.value() <= 0.0 || beta.value() <= 0.0 {
        return None;
    }
    let r = ((alpha.complement() / alpha.value()) * (beta.complement() / beta.value())).sqrt();
    if r >= 1.0 {
        return None;
    }
    Some(0.5 * (alpha.ln() + beta.ln()) + (-r).ln_1p())
}

/// Overlap `1 - mu_e` of the Trojan reflection mode with the vacuum.
fn trojan_overlap(mu_e: f64) -> Overlap {
    Overlap::from_intensity(-(-mu_e).ln_1p())
}

fn check_side(v0: Overlap, s0: Overlap, mu_e: f64) -> Result<()> {
    for (name, o) in [("v0", v0), ("s0", s0)] {
        if !(0.5..=1.0).contains(&o.value()) {
            return Err(Error::domain(
                "fidelity_lower_bound",
                format!("{name} = {} outside [0.5, 1]", o.value()),
            ));
        }
    }
    if !(0.0..1.0).contains(&mu_e) {
        return Err(Error::domain("fidelity_lower_bound", format!("mu_e = {mu_e} outside [0, 1)")));
    }
    Ok(())
}

/// Natural log of the fidelity lower bound
/// `[G(s0, v0) G(v0, v0)^xi G(1 - mu_e, 1 - mu_e)]^2`.
///
/// `v0` bounds the vacuum overlap of the imperfect vacuum slot, `s0` that of
/// the signal slot.
pub fn ln_fidelity_lower_bound(v0: Overlap, s0: Overlap, xi: u32, mu_e: f64) -> Result<f64> {
    check_side(v0, s0, mu_e)?;
    let vacuous = |g: Option<f64>| g.ok_or(Error::NoSecureMapping(0.0));
    let signal = vacuous(ln_g(s0, v0))?;
    let trailing = if xi == 0 { 0.0 } else { xi as f64 * vacuous(ln_g(v0, v0))? };
    let trojan = if mu_e == 0.0 {
        0.0
    } else {
        let t = trojan_overlap(mu_e);
        vacuous(ln_g(t, t))?
    };
    Ok(2.0 * (signal + trailing + trojan))
}

/// Lower edge of the fidelity range; see [`ln_fidelity_lower_bound`].
pub fn fidelity_lower_bound(v0: Overlap, s0: Overlap, xi: u32, mu_e: f64) -> Result<f64> {
    ln_fidelity_lower_bound(v0, s0, xi, mu_e).map(f64::exp)
}

/// Equivalent perfect-source intensities `mu_A'`, `mu_B'`.
pub fn virtual_intensities(bounds: &SourceBounds) -> Result<VirtualIntensities> {
    let mu_a = -ln_fidelity_lower_bound(bounds.av0, bounds.a0, bounds.xi, bounds.mu_e)?;
    let mu_b = -ln_fidelity_lower_bound(bounds.bv0, bounds.b0, bounds.xi, bounds.mu_e)?;
    Ok(VirtualIntensities {
        mu_a: mu_a.max(0.0),
        mu_b: mu_b.max(0.0),
    })
}
