//! Chernoff-bound estimators between observed counts and their expectations.
//!
//! Four transcendental equations, each of the form `log LHS(delta) = ln fp`:
//!
//! | estimate          | bound              | log LHS                                   |
//! |-------------------|--------------------|-------------------------------------------|
//! | `E^L(X)`          | `X / (1 + d1)`     | `X/(1+d) * (d - (1+d) ln(1+d))`           |
//! | `E^U(X)`          | `X / (1 - d2)`     | `X/(1-d) * (-d - (1-d) ln(1-d))`          |
//! | `O^U(Y)`          | `(1 + d1') Y`      | `Y * (d - (1+d) ln(1+d))`                 |
//! | `O^L(Y)`          | `(1 - d2') Y`      | `Y * (-d - (1-d) ln(1-d))`                |
//!
//! Every log LHS is zero at `d = 0` and strictly decreasing, so each root is
//! found by bisection after expanding the bracket. The equations in `d2` and
//! `d2'` live on `[0, 1)` and are solved in `v = d / (1 - d)` so that roots
//! close to 1 keep their precision.
//!
//! Failure probabilities are passed as [`FailureProb`] (log scale); the
//! realistic values are far below `f64::MIN_POSITIVE`.

use crate::error::{Error, Result};
use crate::model::FailureProb;

/// Hard cap on bisection steps after bracketing.
pub const MAX_BISECTION_ITERS: usize = 200;
const MAX_EXPANSIONS: usize = 1100;

/// Accepted `|log LHS - ln fp|`, relative to `max(1, |ln fp|)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    ExpectedLower,
    ExpectedUpper,
    ObservedUpper,
    ObservedLower,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::ExpectedLower => "expected_lower",
            Equation::ExpectedUpper => "expected_upper",
            Equation::ObservedUpper => "observed_upper",
            Equation::ObservedLower => "observed_lower",
        }
    }

    /// Equations whose `delta` is confined to `[0, 1)`.
    fn unit_interval(&self) -> bool {
        matches!(self, Equation::ExpectedUpper | Equation::ObservedLower)
    }
}

/// A solved Chernoff estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub delta: f64,
    pub bound: f64,
    /// `log LHS(delta) - ln fp` at the returned root.
    pub log_residual: f64,
}

/// `ln(1 + x) - x`, accurate near zero.
fn ln1p_minus(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // -x^2/2 + x^3/3 - x^4/4 + ...
        let mut term = x * x;
        let mut sum = 0.0;
        let mut k = 2.0;
        let mut sign = -1.0;
        while k < 60.0 {
            let contrib = sign * term / k;
            sum += contrib;
            if contrib.abs() <= f64::EPSILON * 1e-3 * sum.abs() {
                break;
            }
            term *= x;
            sign = -sign;
            k += 1.0;
        }
        sum
    } else {
        x.ln_1p() - x
    }
}

/// Log LHS expressed in the solver variable `t` (`t = delta` on the
/// unbounded equations, `t = delta / (1 - delta)` on the unit-interval ones).
fn log_lhs_in_solver_var(eq: Equation, value: f64, t: f64) -> f64 {
    match eq {
        Equation::ExpectedLower => {
            // d/(1+d) - ln(1+d) = u + ln(1-u), u = d/(1+d)
            if t < 1.0 {
                value * ln1p_minus(-t / (1.0 + t))
            } else {
                value * (t / (1.0 + t) - t.ln_1p())
            }
        }
        Equation::ObservedUpper => {
            // d - (1+d) ln(1+d) = (1+d) [u + ln(1-u)]
            if t < 1.0 {
                value * (1.0 + t) * ln1p_minus(-t / (1.0 + t))
            } else {
                value * (t - (1.0 + t) * t.ln_1p())
            }
        }
        // with 1 - d = 1/(1+v): -d/(1-d) - ln(1-d) = ln(1+v) - v
        Equation::ExpectedUpper => value * ln1p_minus(t),
        Equation::ObservedLower => value * ln1p_minus(t) / (1.0 + t),
    }
}

/// Log of the left-hand side of the defining equation at `delta`.
pub fn log_lhs(eq: Equation, value: f64, delta: f64) -> f64 {
    if eq.unit_interval() {
        if delta >= 1.0 {
            return match eq {
                Equation::ObservedLower => -value,
                _ => f64::NEG_INFINITY,
            };
        }
        log_lhs_in_solver_var(eq, value, delta / (1.0 - delta))
    } else {
        log_lhs_in_solver_var(eq, value, delta)
    }
}

fn check_inputs(eq: Equation, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::domain(eq.name(), format!("value {value} must be finite and >= 0")));
    }
    Ok(())
}

/// Root of `log_lhs_in_solver_var(eq, value, t) = target` for `t >= 0`.
fn bisect_root(eq: Equation, value: f64, target: f64) -> Result<(f64, f64)> {
    let f = |t: f64| log_lhs_in_solver_var(eq, value, t) - target;

    // f(0) = -target >= 0 and f decreases without bound.
    let mut lo = 0.0;
    let mut hi = (2.0 * target.abs() / value).sqrt().max(f64::MIN_POSITIVE);
    let mut f_hi = f(hi);
    let mut expansions = 0;
    while f_hi > 0.0 {
        lo = hi;
        hi *= 2.0;
        f_hi = f(hi);
        expansions += 1;
        if !hi.is_finite() && eq == Equation::ExpectedLower {
            // E^L = X / (1 + d1) underflows to zero
            return Ok((f64::INFINITY, 0.0));
        }
        if expansions > MAX_EXPANSIONS || !hi.is_finite() {
            return Err(Error::NonConvergence {
                equation: eq.name(),
                residual: f_hi,
            });
        }
    }
    if f_hi == 0.0 {
        return Ok((hi, 0.0));
    }
    let mut f_lo = f(lo);

    for _ in 0..MAX_BISECTION_ITERS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok((mid, 0.0));
        }
        if f_mid > 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let (t, r) = if f_lo.abs() <= f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    if r.abs() > RESIDUAL_TOLERANCE * target.abs().max(1.0) || !r.is_finite() {
        return Err(Error::NonConvergence {
            equation: eq.name(),
            residual: r,
        });
    }
    Ok((t, r))
}

/// Solves one of the four Chernoff equations for `value` at failure
/// probability `fp`.
///
/// Degenerate inputs: `E^L(0) = 0`, `E^U(0) = -ln fp`, `O^U(0) = O^L(0) = 0`.
/// `O^L(Y)` is 0 when `Y <= -ln fp`, where no `d2' < 1` exists.
pub fn solve(eq: Equation, value: f64, fp: FailureProb) -> Result<Estimate> {
    check_inputs(eq, value)?;
    let target = fp.ln();

    if target == 0.0 {
        return Ok(Estimate {
            delta: 0.0,
            bound: value,
            log_residual: 0.0,
        });
    }
    if value == 0.0 {
        let (delta, bound) = match eq {
            Equation::ExpectedLower => (f64::INFINITY, 0.0),
            Equation::ExpectedUpper => (1.0, -target),
            Equation::ObservedUpper | Equation::ObservedLower => {
                log::warn!("{}: zero expected value, equation is degenerate", eq.name());
                (0.0, 0.0)
            }
        };
        return Ok(Estimate {
            delta,
            bound,
            log_residual: 0.0,
        });
    }
    if eq == Equation::ObservedLower && -value >= target {
        return Ok(Estimate {
            delta: 1.0,
            bound: 0.0,
            log_residual: -value - target,
        });
    }

    let (t, log_residual) = bisect_root(eq, value, target)?;
    let (delta, bound) = match eq {
        Equation::ExpectedLower => (t, value / (1.0 + t)),
        Equation::ObservedUpper => (t, value * (1.0 + t)),
        Equation::ExpectedUpper => (t / (1.0 + t), value * (1.0 + t)),
        Equation::ObservedLower => (t / (1.0 + t), value / (1.0 + t)),
    };
    Ok(Estimate {
        delta,
        bound,
        log_residual,
    })
}

/// Lower bound `E^L` on the expectation behind observation `x`.
pub fn expected_lower(x: f64, fp: FailureProb) -> Result<f64> {
    solve(Equation::ExpectedLower, x, fp).map(|e| e.bound)
}

/// Upper bound `E^U` on the expectation behind observation `x`.
pub fn expected_upper(x: f64, fp: FailureProb) -> Result<f64> {
    solve(Equation::ExpectedUpper, x, fp).map(|e| e.bound)
}

/// Upper bound `O^U` on the realised value of expectation `y`.
pub fn observed_upper(y: f64, fp: FailureProb) -> Result<f64> {
    solve(Equation::ObservedUpper, y, fp).map(|e| e.bound)
}

/// Lower bound `O^L` on the realised value of expectation `y`.
pub fn observed_lower(y: f64, fp: FailureProb) -> Result<f64> {
    solve(Equation::ObservedLower, y, fp).map(|e| e.bound)
}
