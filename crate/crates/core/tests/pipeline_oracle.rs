//! End-to-end check of single operating points against a from-scratch
//! recomputation that shares no code with the library: textbook formulas,
//! plain bisection on the unreduced Chernoff equations.

use scs_qkd::optimizer::evaluate_point_detailed;
use scs_qkd::Configuration;

const LN2: f64 = std::f64::consts::LN_2;

fn g(a: f64, b: f64) -> f64 {
    (a * b).sqrt() - ((1.0 - a) * (1.0 - b)).sqrt()
}

fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Root of a decreasing `f` on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

/// `X (1 + d)` with `[e^{-d} / (1-d)^{1-d}]^{X/(1-d)} = fp`.
fn expected_upper(x: f64, ln_fp: f64) -> f64 {
    let d = bisect(
        |d| x / (1.0 - d) * (-d - (1.0 - d) * (1.0 - d).ln()) - ln_fp,
        0.0,
        1.0 - 1e-15,
    );
    x / (1.0 - d)
}

/// `Y (1 + d)` with `[e^{d} / (1+d)^{1+d}]^{Y} = fp`.
fn observed_upper(y: f64, ln_fp: f64) -> f64 {
    let d = bisect(|d| y * (d - (1.0 + d) * (1.0 + d).ln()) - ln_fp, 0.0, 1e3);
    y * (1.0 + d)
}

struct Point {
    distance: f64,
    mu: f64,
    p_w: f64,
    mu_o: f64,
    mu_e: f64,
    xi: u32,
}

struct Expect {
    mu_virtual: f64,
    e_ph: f64,
    r_col: f64,
    r_phys: f64,
}

fn recompute(p: &Point) -> Expect {
    // Reference channel and protocol, written out longhand
    let (eta_d, alpha, p_d, e_d, f, n) = (0.6, 0.2, 1e-9, 0.03, 1.16, 1e14);
    let eta = eta_d * 10f64.powf(-alpha * p.distance / 20.0);
    let (p_w, p_v) = (p.p_w, 1.0 - p.p_w);
    let round = |x: f64| (x + 0.5).floor();
    let n_o = round(n * p_v * p_v * p_d);
    let n_b = round(n * p_w * p_w * (1.0 - (1.0 - p_d) * (-2.0 * p.mu * eta * e_d).exp()));
    let n_z = round(n * 2.0 * p_v * p_w * (1.0 - (1.0 - p_d) * (-p.mu * eta / 2.0).exp()));
    let m_s = n_o + n_b + n_z;
    let e_z = (n_o + n_b) / m_s;

    let s0 = (-p.mu).exp();
    let v0 = (-p.mu_o).exp();
    let t = 1.0 - p.mu_e;
    let fid = (g(s0, v0) * g(v0, v0).powi(p.xi as i32) * g(t, t)).powi(2);
    let mu_v = -fid.ln();
    let c2 = 2.0 * (1.0 - (-mu_v / 2.0).exp());

    // eps_coh = 1e-10 split six ways after removing (N+1)^63
    let ln_eps = (1e-10f64).ln() - 63.0 * (n + 1.0).ln() - 6f64.ln();
    let n_o_u = expected_upper(n_o, ln_eps);
    let n_b_u = expected_upper(n_b, ln_eps);
    let nph = 0.5
        * p_v
        * p_w
        * (n_o_u / (p_v * p_v)
            + n_b_u / (p_w * p_w)
            + 2.0 * c2 / p_v * (n * n_o_u).sqrt()
            + 2.0 * c2 / p_w * (n * n_b_u).sqrt()
            + 2.0 / (p_v * p_w) * (n_o_u * n_b_u).sqrt()
            + c2 * c2 * n);
    let e_ph = (observed_upper(nph, ln_eps) / n_z).min(1.0);

    let log2_inv_eps = -ln_eps / LN2;
    let len = n_z * (1.0 - h(e_ph.min(0.5)))
        - f * m_s * h(e_z)
        - (1.0 + log2_inv_eps)
        - 2.0 * log2_inv_eps
        - 11.0 * (n_z * (1.0 + log2_inv_eps)).sqrt();
    let r_col = (len / n).max(0.0);
    let r_coh = (r_col - 126.0 * (n + 1.0).log2() / n).max(0.0);
    Expect {
        mu_virtual: mu_v,
        e_ph,
        r_col,
        r_phys: r_coh / (p.xi as f64 + 1.0),
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[test]
fn fixed_points_match_longhand_recomputation() {
    let points = [
        Point { distance: 50.0, mu: 0.02, p_w: 0.2, mu_o: 1e-8, mu_e: 0.0, xi: 1 },
        Point { distance: 100.0, mu: 0.01, p_w: 0.15, mu_o: 1e-6, mu_e: 1e-5, xi: 1 },
        Point { distance: 0.0, mu: 0.1, p_w: 0.3, mu_o: 0.0, mu_e: 0.0, xi: 0 },
        Point { distance: 180.0, mu: 0.0008, p_w: 0.22, mu_o: 1e-8, mu_e: 1e-6, xi: 2 },
    ];
    for p in &points {
        let want = recompute(p);
        let cfg = Configuration::reference(p.distance, p.mu, p.p_w, p.mu_o, p.mu_e, p.xi).unwrap();
        let (got, detail) = evaluate_point_detailed(&cfg, p.mu).unwrap();
        let e_ph = detail.phase_flip.unwrap().e_ph_upper;
        let at = format!("L={} mu={}", p.distance, p.mu);
        assert!(close(got.mu_a_virtual, want.mu_virtual, 1e-9), "{at}: mu' {} vs {}", got.mu_a_virtual, want.mu_virtual);
        assert!(close(e_ph, want.e_ph, 1e-8), "{at}: e_ph {e_ph} vs {}", want.e_ph);
        assert!(close(got.r_col, want.r_col, 1e-8), "{at}: r_col {} vs {}", got.r_col, want.r_col);
        assert!(close(got.r_phys, want.r_phys, 1e-8), "{at}: r_phys {} vs {}", got.r_phys, want.r_phys);
        assert!(want.r_phys > 0.0, "{at}: oracle point should be secure");
    }
}
