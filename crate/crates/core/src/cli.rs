//! Configuration file handling and the `rate`, `sweep` and `maxdist`
//! commands.
//!
//! The configuration is a flat `key = value` text file; `#` starts a
//! comment. Keys not listed in [`RunConfig::dump`] are rejected. Values may
//! be `auto` where noted, meaning "optimise" (`mu`, `p_w`) or "derive from
//! `eps_coh`" (the `ln_eps_*` overrides).

use std::fmt::Write as _;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ChannelParams, Configuration, EpsilonBudget, Overlap, ProtocolParams, SourceBounds};
use crate::optimizer::{
    evaluate_point_detailed, max_distance, optimize_point, sweep, Grid, PipelineDetail, SweepSpec,
};

/// Header of the tabular sweep output.
pub const SWEEP_COLUMNS: &str = "distance_km,mu_opt,pw_opt,mu_a_virtual,r_col,r_coh,r_phys";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
}

/// Every tunable of a run. Defaults are the reference experimental values
/// with `xi = 1`, `mu_o = 1e-8` and no Trojan light.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mu_o_a: f64,
    pub mu_o_b: f64,
    pub mu_e: f64,
    pub xi: u32,

    pub distance_km: f64,
    pub alpha_f: f64,
    pub eta_d: f64,
    pub p_d: f64,
    pub e_d: f64,

    pub n_windows: u64,
    pub f_ec: f64,
    /// Fixed signal intensity; `None` optimises it.
    pub mu: Option<f64>,
    /// Fixed send probability; `None` optimises it.
    pub p_w: Option<f64>,

    pub eps_coh: f64,
    /// Explicit `(ln eps_cor, ln eps_pa, ln eps_bar, ln eps_chernoff)`.
    pub ln_eps: Option<[f64; 4]>,

    pub mu_grid: Grid,
    pub pw_grid: Grid,
    pub refine_iters: usize,

    pub distance_min_km: f64,
    pub distance_max_km: f64,
    pub distance_step_km: f64,
    pub resolution_km: f64,

    pub out: Option<String>,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        let chan = ChannelParams::reference(50.0);
        let spec = SweepSpec::default();
        RunConfig {
            mu_o_a: 1e-8,
            mu_o_b: 1e-8,
            mu_e: 0.0,
            xi: 1,
            distance_km: chan.distance_km,
            alpha_f: chan.alpha_f,
            eta_d: chan.eta_d,
            p_d: chan.p_d,
            e_d: chan.e_d,
            n_windows: 100_000_000_000_000,
            f_ec: 1.16,
            mu: None,
            p_w: None,
            eps_coh: 1e-10,
            ln_eps: None,
            mu_grid: spec.mu_grid,
            pw_grid: spec.pw_grid,
            refine_iters: spec.refine_iters,
            distance_min_km: 0.0,
            distance_max_km: 500.0,
            distance_step_km: 5.0,
            resolution_km: 1.0,
            out: None,
            format: OutputFormat::Text,
        }
    }
}

/// Formats to 12 significant digits, then prints the shortest string that
/// round-trips that rounded value.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded = round_sig(x);
    let a = rounded.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn round_sig(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::config(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::config(key, "must be finite"));
    }
    Ok(x)
}

fn parse_int<T: TryFrom<u64>>(key: &str, v: &str) -> Result<T> {
    let n = match v.parse::<u64>() {
        Ok(n) => n,
        Err(_) => {
            let x = parse_f64(key, v)?;
            if x < 0.0 || x.fract() != 0.0 || x >= u64::MAX as f64 {
                return Err(Error::config(key, format!("`{v}` is not a non-negative integer")));
            }
            x as u64
        }
    };
    T::try_from(n).map_err(|_| Error::config(key, format!("`{v}` is out of range")))
}

fn parse_auto(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_f64(key, v).map(Some)
    }
}

/// Stand-in signal intensity; the optimiser replaces it per point.
const PLACEHOLDER_MU: f64 = 0.05;

const LN_EPS_KEYS: [&str; 4] = ["ln_eps_cor", "ln_eps_pa", "ln_eps_bar", "ln_eps_chernoff"];

impl RunConfig {
    /// Parses a configuration file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        let mut ln_eps: [Option<f64>; 4] = [None; 4];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "duplicate key"));
            }
            if let Some(i) = LN_EPS_KEYS.iter().position(|k| *k == key) {
                ln_eps[i] = parse_auto(key, value)?;
                continue;
            }
            cfg.set(key, value)?;
        }
        cfg.ln_eps = match ln_eps {
            [None, None, None, None] => None,
            [Some(a), Some(b), Some(c), Some(d)] => Some([a, b, c, d]),
            _ => return Err(Error::config("ln_eps_cor", "set all four ln_eps_* keys or none")),
        };
        Ok(cfg)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "mu_o" => {
                self.mu_o_a = parse_f64(key, v)?;
                self.mu_o_b = self.mu_o_a;
            }
            "mu_o_a" => self.mu_o_a = parse_f64(key, v)?,
            "mu_o_b" => self.mu_o_b = parse_f64(key, v)?,
            "mu_e" => self.mu_e = parse_f64(key, v)?,
            "xi" => self.xi = parse_int(key, v)?,
            "distance_km" => self.distance_km = parse_f64(key, v)?,
            "alpha_f" => self.alpha_f = parse_f64(key, v)?,
            "eta_d" => self.eta_d = parse_f64(key, v)?,
            "p_d" => self.p_d = parse_f64(key, v)?,
            "e_d" => self.e_d = parse_f64(key, v)?,
            "n_windows" => self.n_windows = parse_int(key, v)?,
            "f_ec" => self.f_ec = parse_f64(key, v)?,
            "mu" => self.mu = parse_auto(key, v)?,
            "p_w" => self.p_w = parse_auto(key, v)?,
            "eps_coh" => self.eps_coh = parse_f64(key, v)?,
            "mu_min" => self.mu_grid.min = parse_f64(key, v)?,
            "mu_max" => self.mu_grid.max = parse_f64(key, v)?,
            "mu_steps" => self.mu_grid.steps = parse_int(key, v)?,
            "pw_min" => self.pw_grid.min = parse_f64(key, v)?,
            "pw_max" => self.pw_grid.max = parse_f64(key, v)?,
            "pw_steps" => self.pw_grid.steps = parse_int(key, v)?,
            "refine_iters" => self.refine_iters = parse_int(key, v)?,
            "distance_min_km" => self.distance_min_km = parse_f64(key, v)?,
            "distance_max_km" => self.distance_max_km = parse_f64(key, v)?,
            "distance_step_km" => self.distance_step_km = parse_f64(key, v)?,
            "resolution_km" => self.resolution_km = parse_f64(key, v)?,
            "out" => self.out = if v == "-" || v.is_empty() { None } else { Some(v.to_string()) },
            "format" => {
                self.format = match v {
                    "text" => OutputFormat::Text,
                    "json" => OutputFormat::Json,
                    _ => return Err(Error::config(key, format!("`{v}` is not `text` or `json`"))),
                }
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    fn parameter_lines(&self) -> Vec<(&'static str, String)> {
        let auto = |x: Option<f64>| x.map(fmt_num).unwrap_or_else(|| "auto".into());
        let mut lines = vec![
            ("mu_o_a", fmt_num(self.mu_o_a)),
            ("mu_o_b", fmt_num(self.mu_o_b)),
            ("mu_e", fmt_num(self.mu_e)),
            ("xi", self.xi.to_string()),
            ("distance_km", fmt_num(self.distance_km)),
            ("alpha_f", fmt_num(self.alpha_f)),
            ("eta_d", fmt_num(self.eta_d)),
            ("p_d", fmt_num(self.p_d)),
            ("e_d", fmt_num(self.e_d)),
            ("n_windows", self.n_windows.to_string()),
            ("f_ec", fmt_num(self.f_ec)),
            ("mu", auto(self.mu)),
            ("p_w", auto(self.p_w)),
            ("eps_coh", fmt_num(self.eps_coh)),
        ];
        for (i, key) in LN_EPS_KEYS.iter().enumerate() {
            lines.push((key, auto(self.ln_eps.map(|e| e[i]))));
        }
        lines.extend([
            ("mu_min", fmt_num(self.mu_grid.min)),
            ("mu_max", fmt_num(self.mu_grid.max)),
            ("mu_steps", self.mu_grid.steps.to_string()),
            ("pw_min", fmt_num(self.pw_grid.min)),
            ("pw_max", fmt_num(self.pw_grid.max)),
            ("pw_steps", self.pw_grid.steps.to_string()),
            ("refine_iters", self.refine_iters.to_string()),
            ("distance_min_km", fmt_num(self.distance_min_km)),
            ("distance_max_km", fmt_num(self.distance_max_km)),
            ("distance_step_km", fmt_num(self.distance_step_km)),
            ("resolution_km", fmt_num(self.resolution_km)),
        ]);
        lines
    }

    /// Fully resolved configuration in the input format.
    pub fn dump(&self) -> String {
        let mut s = String::from("# scs-qkd effective configuration\n");
        for (k, v) in self.parameter_lines() {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "out = {}", self.out.as_deref().unwrap_or("-"));
        let format = match self.format {
            OutputFormat::Text => "text",
            OutputFormat::Json => "json",
        };
        let _ = writeln!(s, "format = {format}");
        s
    }

    /// SHA-256 over the numerical parameters (output settings excluded).
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.parameter_lines() {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    /// Validated engine configuration. The signal intensity and `p_w` are
    /// placeholders when set to `auto`.
    pub fn configuration(&self) -> Result<Configuration> {
        let bounds = SourceBounds {
            a0: Overlap::from_intensity(PLACEHOLDER_MU),
            av0: Overlap::from_intensity(self.mu_o_a),
            b0: Overlap::from_intensity(PLACEHOLDER_MU),
            bv0: Overlap::from_intensity(self.mu_o_b),
            mu_e: self.mu_e,
            xi: self.xi,
        };
        for (name, v) in [("mu_o_a", self.mu_o_a), ("mu_o_b", self.mu_o_b)] {
            if v < 0.0 {
                return Err(Error::invalid(format!("{name} below 0")));
            }
        }
        let channel = ChannelParams {
            distance_km: self.distance_km,
            alpha_f: self.alpha_f,
            eta_d: self.eta_d,
            p_d: self.p_d,
            e_d: self.e_d,
        };
        let protocol = ProtocolParams {
            n_windows: self.n_windows,
            p_w: self.p_w.unwrap_or(0.1),
            f_ec: self.f_ec,
        };
        let eps = match self.ln_eps {
            Some([a, b, c, d]) => EpsilonBudget::from_ln(a, b, c, d)?,
            None => EpsilonBudget::from_coherent_target(self.eps_coh, self.n_windows)?,
        };
        Configuration::new(bounds, channel, protocol, eps)
    }

    /// Distance grid for `sweep`; empty when `max < min`.
    pub fn distances(&self) -> Result<Vec<f64>> {
        if !(self.distance_step_km > 0.0) {
            return Err(Error::invalid("distance_step_km must be positive"));
        }
        let span = self.distance_max_km - self.distance_min_km;
        if span < 0.0 {
            return Ok(Vec::new());
        }
        let count = (span / self.distance_step_km + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|i| self.distance_min_km + i as f64 * self.distance_step_km)
            .collect())
    }

    /// Optimiser grids, with `mu`/`p_w` pinned when fixed.
    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let spec = SweepSpec {
            distances_km: self.distances()?,
            mu_grid: self.mu.map(Grid::fixed).unwrap_or(self.mu_grid),
            pw_grid: self.p_w.map(Grid::fixed).unwrap_or(self.pw_grid),
            refine_iters: self.refine_iters,
        };
        spec.check()?;
        Ok(spec)
    }
}

/// One reported quantity.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Num(x) => fmt_num(*x),
            Field::Int(n) => n.to_string(),
            Field::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Field::Num(x) => serde_json::Number::from_f64(round_sig(*x))
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Field::Int(n) => Value::from(*n),
            Field::Text(s) => Value::from(s.clone()),
        }
    }
}

/// Outcome of `rate`: the report fields and whether the point is secure.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub fields: Vec<(&'static str, Field)>,
    pub secure: bool,
}

impl RateReport {
    pub fn human(&self) -> String {
        let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut s = String::new();
        for (k, v) in &self.fields {
            let _ = writeln!(s, "{k:<width$}  {}", v.render());
        }
        s
    }

    pub fn json(&self) -> String {
        let map: Map<String, Value> = self
            .fields
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_json()))
            .collect();
        let mut s = serde_json::to_string_pretty(&Value::Object(map)).unwrap_or_default();
        s.push('\n');
        s
    }
}

/// Evaluates (or optimises) the configured operating point.
pub fn cmd_rate(cfg: &RunConfig) -> Result<RateReport> {
    let base = cfg.configuration()?;
    let spec = cfg.sweep_spec()?;
    let (mu, p_w) = match (cfg.mu, cfg.p_w) {
        (Some(mu), Some(p_w)) => (mu, p_w),
        _ => {
            let best = optimize_point(&spec, &base, cfg.distance_km)?;
            (best.mu, best.p_w)
        }
    };
    let at = Configuration {
        protocol: base.protocol.with_send_probability(p_w),
        ..base
    };
    let (point, detail) = evaluate_point_detailed(&at, mu)?;
    let PipelineDetail {
        counts,
        phase_flip,
        terms,
        ..
    } = detail;

    let mut fields = vec![
        ("distance_km", Field::Num(point.distance_km)),
        ("mu", Field::Num(point.mu)),
        ("p_w", Field::Num(point.p_w)),
        ("xi", Field::Int(cfg.xi as u64)),
        ("mu_a_virtual", Field::Num(point.mu_a_virtual)),
        ("mu_b_virtual", Field::Num(point.mu_b_virtual)),
    ];
    let nan = f64::NAN;
    let c = counts;
    fields.extend([
        ("n_o", c.map(|c| Field::Int(c.n_o)).unwrap_or(Field::Num(nan))),
        ("n_b", c.map(|c| Field::Int(c.n_b)).unwrap_or(Field::Num(nan))),
        ("n_z", c.map(|c| Field::Int(c.n_z)).unwrap_or(Field::Num(nan))),
        ("m_s", c.map(|c| Field::Int(c.m_s())).unwrap_or(Field::Num(nan))),
        ("e_z", Field::Num(c.map(|c| c.e_z).unwrap_or(nan))),
        ("c2_bar", Field::Num(phase_flip.map(|p| p.c2_bar).unwrap_or(nan))),
        (
            "n_ph_expected_upper",
            Field::Num(phase_flip.map(|p| p.n_ph_expected_upper).unwrap_or(nan)),
        ),
        ("n_ph_upper", Field::Num(phase_flip.map(|p| p.n_ph_upper).unwrap_or(nan))),
        ("e_ph_upper", Field::Num(phase_flip.map(|p| p.e_ph_upper).unwrap_or(nan))),
        ("leak_ec", Field::Num(terms.map(|t| t.leak_ec).unwrap_or(nan))),
        ("privacy_bits", Field::Num(terms.map(|t| t.privacy).unwrap_or(nan))),
        ("correctness_pa_bits", Field::Num(terms.map(|t| t.correctness_pa).unwrap_or(nan))),
        ("smoothing_bits", Field::Num(terms.map(|t| t.smoothing).unwrap_or(nan))),
        ("ln_eps_cor", Field::Num(at.eps.ln_eps_cor)),
        ("ln_eps_pa", Field::Num(at.eps.ln_eps_pa)),
        ("ln_eps_bar", Field::Num(at.eps.ln_eps_bar)),
        ("ln_eps_chernoff", Field::Num(at.eps.ln_eps_chernoff)),
        ("ln_eps_col", Field::Num(at.eps.ln_eps_col())),
        ("ln_eps_coh", Field::Num(at.eps.ln_eps_coh(at.protocol.n_windows))),
        ("r_col", Field::Num(point.r_col)),
        ("r_coh", Field::Num(point.r_coh)),
        ("r_phys", Field::Num(point.r_phys)),
        (
            "status",
            Field::Text(point.insecure.map(|i| i.as_str()).unwrap_or("secure").to_string()),
        ),
    ]);
    Ok(RateReport {
        fields,
        secure: point.is_secure(),
    })
}

/// Runs the distance sweep and renders the CSV table.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<String> {
    let base = cfg.configuration()?;
    let spec = cfg.sweep_spec()?;
    let points = sweep(&spec, &base)?;
    let mut s = String::new();
    let _ = writeln!(s, "# scs-qkd sweep config_hash={}", cfg.config_hash());
    let _ = writeln!(s, "{SWEEP_COLUMNS}");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_num(p.distance_km),
            fmt_num(p.mu),
            fmt_num(p.p_w),
            fmt_num(p.mu_a_virtual),
            fmt_num(p.r_col),
            fmt_num(p.r_coh),
            fmt_num(p.r_phys)
        );
    }
    Ok(s)
}

/// Maximum secure distance at the configured resolution.
pub fn cmd_maxdist(cfg: &RunConfig) -> Result<f64> {
    if !(cfg.resolution_km > 0.0) {
        return Err(Error::config("resolution_km", "must be positive"));
    }
    let base = cfg.configuration()?;
    let spec = cfg.sweep_spec()?;
    max_distance(&spec, &base, cfg.resolution_km)
}
