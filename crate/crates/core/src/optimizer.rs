//! Rate evaluation, `(mu, p_w)` optimisation, distance sweeps and the
//! maximum-secure-distance search.

use rayon::prelude::*;

use crate::channel::simulate_counts;
use crate::error::{Error, Result};
use crate::fidelity::{virtual_intensities, VirtualIntensities};
use crate::keyrate::{key_length_terms, phase_flip_bound, r_coherent, KeyLengthTerms, PhaseFlipBound};
use crate::model::{Configuration, Insecurity, ObservedCounts, RatePoint};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// A 1-D search grid. `steps == 1` pins the coordinate to `min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Grid { min, max, steps }
    }

    pub fn fixed(value: f64) -> Self {
        Grid {
            min: value,
            max: value,
            steps: 1,
        }
    }

    fn linear(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.steps)
            .map(|i| self.min + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }

    fn logarithmic(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let (lo, hi) = (self.min.ln(), self.max.ln());
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| match i {
                0 => self.min,
                i if i == last => self.max,
                i => (lo + (hi - lo) * i as f64 / last as f64).exp(),
            })
            .collect()
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid(format!("{name} grid is empty")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::invalid(format!("{name} grid bounds not finite")));
        }
        if self.steps == 1 {
            if self.min > self.max {
                return Err(Error::invalid(format!("{name} grid min above max")));
            }
        } else if self.min >= self.max {
            return Err(Error::invalid(format!("{name} grid needs min < max")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub distances_km: Vec<f64>,
    /// Signal intensity, searched on a log scale.
    pub mu_grid: Grid,
    /// Send probability, searched linearly.
    pub pw_grid: Grid,
    /// Rounds of coordinate-wise golden-section refinement.
    pub refine_iters: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            distances_km: Vec::new(),
            mu_grid: Grid::new(1e-4, 1.0, 40),
            pw_grid: Grid::new(0.01, 0.6, 30),
            refine_iters: 3,
        }
    }
}

impl SweepSpec {
    pub fn check(&self) -> Result<()> {
        self.mu_grid.check("mu")?;
        self.pw_grid.check("p_w")?;
        if self.mu_grid.min <= 0.0 {
            return Err(Error::invalid("mu grid must be positive"));
        }
        if self.pw_grid.min <= 0.0 || self.pw_grid.max >= 1.0 {
            return Err(Error::invalid("p_w grid must lie inside (0, 1)"));
        }
        if self.distances_km.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("distances must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Intermediate quantities of one pipeline evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineDetail {
    pub counts: Option<ObservedCounts>,
    pub virtual_intensities: Option<VirtualIntensities>,
    pub phase_flip: Option<PhaseFlipBound>,
    pub terms: Option<KeyLengthTerms>,
}

/// Runs the full chain for the configuration's distance and `p_w` with
/// `a_0 = b_0 = e^{-mu}`.
pub fn evaluate_point_detailed(cfg: &Configuration, mu: f64) -> Result<(RatePoint, PipelineDetail)> {
    let mut detail = PipelineDetail {
        counts: None,
        virtual_intensities: None,
        phase_flip: None,
        terms: None,
    };
    let mut point = RatePoint {
        distance_km: cfg.channel.distance_km,
        mu,
        p_w: cfg.protocol.p_w,
        mu_a_virtual: f64::NAN,
        mu_b_virtual: f64::NAN,
        r_col: 0.0,
        r_coh: 0.0,
        r_phys: 0.0,
        insecure: None,
    };

    let bounds = cfg.bounds.with_signal_intensity(mu);
    if bounds.a0.value() < 0.5 || bounds.b0.value() < 0.5 {
        point.insecure = Some(Insecurity::SignalOutOfBounds);
        return Ok((point, detail));
    }
    match virtual_intensities(&bounds) {
        Ok(vi) => {
            point.mu_a_virtual = vi.mu_a;
            point.mu_b_virtual = vi.mu_b;
            detail.virtual_intensities = Some(vi);
        }
        Err(Error::NoSecureMapping(_)) => {
            point.insecure = Some(Insecurity::VacuousFidelity);
            return Ok((point, detail));
        }
        Err(e) => return Err(e),
    }

    let counts = match simulate_counts(&cfg.channel, &cfg.protocol, mu) {
        Ok(c) => c,
        Err(Error::NoEffectiveWindows) => {
            point.insecure = Some(Insecurity::NoEffectiveWindows);
            return Ok((point, detail));
        }
        Err(e) => return Err(e),
    };
    detail.counts = Some(counts);

    let fp = cfg.eps.chernoff();
    let phase = match phase_flip_bound(&counts, &cfg.protocol, detail.virtual_intensities.unwrap(), fp) {
        Ok(p) => p,
        Err(Error::NoUntaggedBits) => {
            point.insecure = Some(Insecurity::NoUntaggedBits);
            return Ok((point, detail));
        }
        Err(e) => return Err(e),
    };
    detail.phase_flip = Some(phase);

    let terms = key_length_terms(&counts, &cfg.protocol, phase.e_ph_upper, &cfg.eps)?;
    detail.terms = Some(terms);

    point.r_col = (terms.raw_length() / cfg.protocol.n()).max(0.0);
    point.r_coh = r_coherent(point.r_col, &cfg.protocol);
    point.r_phys = point.r_coh / cfg.bounds.windows_per_logical() as f64;
    if point.r_coh <= 0.0 {
        point.insecure = Some(Insecurity::ZeroRate);
    }
    Ok((point, detail))
}

pub fn evaluate_point(cfg: &Configuration, mu: f64) -> Result<RatePoint> {
    evaluate_point_detailed(cfg, mu).map(|(p, _)| p)
}

/// Result of a 2-D maximisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub mu: f64,
    pub p_w: f64,
    pub value: f64,
}

struct Best {
    mu: f64,
    p_w: f64,
    value: f64,
}

impl Best {
    fn offer(&mut self, mu: f64, p_w: f64, value: f64) {
        if value > self.value {
            *self = Best { mu, p_w, value };
        }
    }
}

/// Golden-section maximisation of `f` on `[a, b]`; stops once the bracket is
/// narrower than `tol`. Every evaluation is reported through `f`.
fn golden_section<F: FnMut(f64) -> Result<f64>>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> Result<()> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut guard = 0;
    while (b - a).abs() > tol && guard < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        guard += 1;
    }
    Ok(())
}

/// Relative argument tolerance of the golden-section refinement.
pub const REFINE_TOLERANCE: f64 = 1e-4;

/// Maximises `objective(mu, p_w)`: a coarse grid (log-spaced in `mu`,
/// evaluated in parallel) followed by `refine_iters` rounds of golden-section
/// refinement along each coordinate within one grid cell of the incumbent.
///
/// The returned optimum is never worse than any grid sample; ties go to the
/// earliest sample, so the result is deterministic.
pub fn maximize<F>(mu_grid: Grid, pw_grid: Grid, refine_iters: usize, objective: F) -> Result<Optimum>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let mus = mu_grid.logarithmic();
    let pws = pw_grid.linear();
    let cells: Vec<(usize, usize)> = (0..mus.len())
        .flat_map(|i| (0..pws.len()).map(move |j| (i, j)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| objective(mus[i], pws[j]))
        .collect::<Result<Vec<f64>>>()?;

    let mut best_idx = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best_idx] {
            best_idx = k;
        }
    }
    let (bi, bj) = cells[best_idx];
    let mut best = Best {
        mu: mus[bi],
        p_w: pws[bj],
        value: values[best_idx],
    };
    if best.value <= 0.0 {
        return Ok(Optimum {
            mu: best.mu,
            p_w: best.p_w,
            value: best.value,
        });
    }

    let neighbours = |grid: &[f64], x: f64| -> (f64, f64) {
        let k = grid.partition_point(|g| *g < x).min(grid.len() - 1);
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(grid.len() - 1)];
        (lo.min(x), hi.max(x))
    };

    for _ in 0..refine_iters {
        if mus.len() > 1 {
            let (lo, hi) = neighbours(&mus, best.mu);
            let p_w = best.p_w;
            golden_section(lo.ln(), hi.ln(), REFINE_TOLERANCE, |s| {
                let mu = s.exp();
                let v = objective(mu, p_w)?;
                best.offer(mu, p_w, v);
                Ok(v)
            })?;
        }
        if pws.len() > 1 {
            let (lo, hi) = neighbours(&pws, best.p_w);
            let mu = best.mu;
            golden_section(lo, hi, REFINE_TOLERANCE * hi.abs(), |p_w| {
                let v = objective(mu, p_w)?;
                best.offer(mu, p_w, v);
                Ok(v)
            })?;
        }
    }
    Ok(Optimum {
        mu: best.mu,
        p_w: best.p_w,
        value: best.value,
    })
}

/// Best coherent-attack rate at distance `distance_km` over the spec's grids.
///
/// When no sample is secure the returned point carries zero rate and an
/// [`Insecurity`] flag.
pub fn optimize_point(spec: &SweepSpec, cfg: &Configuration, distance_km: f64) -> Result<RatePoint> {
    spec.check()?;
    let at = cfg.at_distance(distance_km);
    let objective = |mu: f64, p_w: f64| {
        let c = Configuration {
            protocol: at.protocol.with_send_probability(p_w),
            ..at
        };
        evaluate_point(&c, mu).map(|p| p.r_coh)
    };
    let opt = maximize(spec.mu_grid, spec.pw_grid, spec.refine_iters, objective)?;
    let c = Configuration {
        protocol: at.protocol.with_send_probability(opt.p_w),
        ..at
    };
    let mut point = evaluate_point(&c, opt.mu)?;
    if point.r_coh <= 0.0 && point.insecure.is_none() {
        point.insecure = Some(Insecurity::ZeroRate);
    }
    Ok(point)
}

/// Optimised rate at every distance, in input order.
pub fn sweep(spec: &SweepSpec, cfg: &Configuration) -> Result<Vec<RatePoint>> {
    spec.check()?;
    spec.distances_km
        .par_iter()
        .map(|&d| optimize_point(spec, cfg, d))
        .collect()
}

/// Largest distance with positive optimised coherent rate, to within
/// `resolution_km`.
pub fn max_distance(spec: &SweepSpec, cfg: &Configuration, resolution_km: f64) -> Result<f64> {
    max_distance_by(resolution_km, |d| optimize_point(spec, cfg, d).map(|p| p.r_coh))
}

/// Upper search limit for [`max_distance_by`].
pub const MAX_SEARCH_KM: f64 = 100_000.0;

/// Bisection for the largest `L` with `rate(L) > 0`, assuming the rate
/// vanishes beyond some finite distance. Returns the last secure distance
/// found, within `resolution_km` of the cutoff.
pub fn max_distance_by<F>(resolution_km: f64, rate: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(resolution_km > 0.0 && resolution_km.is_finite()) {
        return Err(Error::invalid("resolution_km must be positive"));
    }
    if rate(0.0)? <= 0.0 {
        return Err(Error::NoSecureDistance);
    }
    let mut lo = 0.0;
    let mut hi = 100.0;
    while rate(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_SEARCH_KM {
            return Err(Error::invalid(format!("rate still positive beyond {MAX_SEARCH_KM} km")));
        }
    }
    while hi - lo > resolution_km {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
