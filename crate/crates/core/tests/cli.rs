use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scs-qkd"))
        .args(args)
        .env("SCS_QKD_THREADS", "2")
        .output()
        .expect("spawn scs-qkd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

#[test]
fn rate_at_50_km_matches_golden() {
    let o = run(&["rate", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("rate_50km.json"));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["r_phys"].as_f64().unwrap() > 0.0);
    assert_eq!(v["status"], "secure");
}

#[test]
fn human_and_json_reports_agree() {
    let human = stdout(&run(&["rate", "--distance", "120", "--mu-e", "1e-6"]));
    let json: Value = serde_json::from_str(&stdout(&run(&["rate", "--distance", "120", "--mu-e", "1e-6", "--json"]))).unwrap();
    let obj = json.as_object().unwrap();
    let lines: Vec<_> = human.lines().collect();
    assert_eq!(lines.len(), obj.len());
    for (line, (key, value)) in lines.iter().zip(obj) {
        let (k, v) = line.split_once(char::is_whitespace).unwrap();
        assert_eq!(k, key);
        let v = v.trim();
        match value {
            Value::String(s) => assert_eq!(v, s),
            Value::Number(n) => assert_eq!(v.parse::<f64>().unwrap(), n.as_f64().unwrap(), "{key}"),
            other => panic!("{key}: unexpected {other}"),
        }
    }
    for key in ["mu_a_virtual", "mu_b_virtual", "c2_bar", "e_ph_upper", "leak_ec", "ln_eps_chernoff", "ln_eps_coh"] {
        assert!(obj.contains_key(key), "missing {key}");
    }
}

#[test]
fn fixed_operating_point() {
    let o = run(&["rate", "--mu", "0.02", "--pw", "0.2", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mu"], 0.02);
    assert_eq!(v["p_w"], 0.2);
}

#[test]
fn far_distance_is_insecure() {
    let o = run(&["rate", "--distance", "10000"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("r_phys"));
}

#[test]
fn malformed_config_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "xi = 1\np_dark = 1e-9\n");
    let o = run(&["rate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p_dark"));

    let cfg = write(dir.path(), "bad2.cfg", "e_d = three percent\n");
    let o = run(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("e_d"));

    let o = run(&["rate", "--config", "/no/such/file.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_parameter_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.cfg", "p_d = 1.5\n");
    assert_eq!(run(&["rate", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn maxdist_default_golden() {
    let o = run(&["maxdist", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("maxdist_default.json"));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["max_distance_km"].as_f64().unwrap() > 100.0);
}

#[test]
fn maxdist_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let saturated = write(dir.path(), "sat.cfg", "p_d = 0.5\n");
    assert_eq!(run(&["maxdist", "--config", &saturated]).status.code(), Some(3));
    let zero = write(dir.path(), "zero.cfg", "resolution_km = 0\n");
    assert_eq!(run(&["maxdist", "--config", &zero]).status.code(), Some(1));
}

#[test]
fn emitted_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = stdout(&run(&["sweep", "--mu-o", "1e-6", "--xi", "0", "--n-windows", "1000000000000", "--emit-config"]));
    assert!(first.contains("mu_o_a = 1e-6"));
    assert!(first.contains("n_windows = 1000000000000"));
    let path = write(dir.path(), "eff.cfg", &first);
    let second = stdout(&run(&["sweep", "--config", &path, "--emit-config"]));
    assert_eq!(first, second);
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "distance_km = 80\nxi = 0\n");
    let dump = stdout(&run(&["rate", "--config", &cfg, "--distance", "20", "--emit-config"]));
    assert!(dump.contains("distance_km = 20\n"));
    assert!(dump.contains("xi = 0\n"));
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", "distance_max_km = 300\ndistance_step_km = 10\n");
    let out = dir.path().join("s.csv");
    let o = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let table = std::fs::read_to_string(&out).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("# scs-qkd sweep config_hash="));
    assert_eq!(lines.next().unwrap(), "distance_km,mu_opt,pw_opt,mu_a_virtual,r_col,r_coh,r_phys");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 31);
    assert!(rows.windows(2).all(|w| w[1][6] <= w[0][6]));
    assert!(rows.iter().all(|r| r[6] == r[5] / 2.0 || (r[6] - r[5] / 2.0).abs() <= 1e-11 * r[5]));
    assert!(rows.last().unwrap()[6] == 0.0);
}

#[test]
fn empty_range_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.cfg", "distance_min_km = 100\ndistance_max_km = 50\n");
    let o = run(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn unwritable_output_path() {
    let o = run(&["sweep", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn figure_layouts() {
    // vacuum-error curves plus the uncorrelated baseline, then Trojan curves
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 7] = [
        &["--mu-o", "1e-10"],
        &["--mu-o", "1e-8"],
        &["--mu-o", "1e-6"],
        &["--xi", "0"],
        &["--mu-e", "0"],
        &["--mu-e", "1e-6"],
        &["--mu-e", "1e-4"],
    ];
    let cfg = write(dir.path(), "fig.cfg", "distance_step_km = 10\n");
    let mut last_rates = Vec::new();
    for (i, extra) in runs.iter().enumerate() {
        let out = dir.path().join(format!("curve{i}.csv"));
        let mut args = vec!["sweep", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(run(&args).status.code(), Some(0));
        let table = std::fs::read_to_string(&out).unwrap();
        assert_eq!(table.lines().count(), 2 + 51);
        let at_100: f64 = table.lines().nth(2 + 10).unwrap().rsplit(',').next().unwrap().parse().unwrap();
        last_rates.push(at_100);
    }
    // uncorrelated baseline doubles the per-physical-window rate
    assert!((last_rates[3] / last_rates[1] - 2.0).abs() < 0.1);
    // more Trojan light, less key
    assert!(last_rates[4] >= last_rates[5] && last_rates[5] >= last_rates[6]);
}
