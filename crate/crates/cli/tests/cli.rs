use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nls_bnf_core::algebra::text::{format_polynomial, parse_classified, parse_polynomial};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nls-bnf"));
    c.env_remove("NLSBNF_CONFIG_DIR");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    let o = bin().args(args).arg("--out").arg(out).output().expect("binary runs");
    if !o.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&o.stderr));
    }
    o
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn coefficients(doc: &Value) -> Vec<(i64, f64)> {
    doc["potential"]["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["n"][0].as_i64().unwrap(), e["v"].as_f64().unwrap()))
        .collect()
}

#[test]
fn sample_potential_is_byte_identical_on_rerun() {
    let dir = TempDir::new().unwrap();
    let args = ["sample-potential", "--seed", "42", "--set", "global.K=6"];
    assert_eq!(code(&run(&args, dir.path())), 0);
    let first = fs::read(dir.path().join("potential.json")).unwrap();
    assert_eq!(code(&run(&args, dir.path())), 0);
    assert_eq!(first, fs::read(dir.path().join("potential.json")).unwrap());
    let other = TempDir::new().unwrap();
    run(&["sample-potential", "--seed", "43", "--set", "global.K=6"], other.path());
    assert_ne!(
        coefficients(&json(&dir.path().join("potential.json"))),
        coefficients(&json(&other.path().join("potential.json")))
    );
}

#[test]
fn zero_amplitude_gives_zero_potential() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(&["sample-potential", "--set", "potential.R=0"], dir.path())), 0);
    let c = coefficients(&json(&dir.path().join("potential.json")));
    assert!(!c.is_empty());
    assert!(c.iter().all(|(_, v)| *v == 0.0));
}

#[test]
fn potential_file_has_nine_mirrored_entries() {
    let dir = TempDir::new().unwrap();
    let args = ["sample-potential", "--set", "global.K=4", "--set", "global.d=1", "--set", "potential.R=1", "--set", "potential.m=2"];
    assert_eq!(code(&run(&args, dir.path())), 0);
    let doc = json(&dir.path().join("potential.json"));
    let c = coefficients(&doc);
    assert_eq!(c.iter().map(|x| x.0).collect::<Vec<_>>(), (-4..=4).collect::<Vec<_>>());
    for (n, v) in &c {
        let mirror = c.iter().find(|x| x.0 == -n).unwrap().1;
        assert_eq!(*v, mirror);
    }
    assert_eq!(doc["config"]["global"]["K"], 4);
}

/// Brute-force swap classes `{k, p}` of momentum-conserving tuples with
/// `L <= r_max` indices per side, `|n| <= k` in one dimension.
fn brute_force_classes(r_max: usize, k: i32) -> (usize, usize) {
    fn sides(len: usize, k: i32) -> Vec<Vec<i32>> {
        if len == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for rest in sides(len - 1, k) {
            for x in -k..=k {
                let mut v = rest.clone();
                v.push(x);
                out.push(v);
            }
        }
        out
    }
    let mut classes = BTreeSet::new();
    for len in 1..=r_max {
        let all = sides(len, k);
        for a in &all {
            for b in &all {
                if a.iter().sum::<i32>() != b.iter().sum::<i32>() {
                    continue;
                }
                let (mut a, mut b) = (a.clone(), b.clone());
                a.sort();
                b.sort();
                classes.insert(if a <= b { (a, b) } else { (b, a) });
            }
        }
    }
    let resonant = classes.iter().filter(|(a, b)| a == b).count();
    (classes.len() - resonant, resonant)
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn divisor_scan_counts_match_brute_force() {
    for (r_max, k) in [(1usize, 2i32), (2, 2), (2, 3)] {
        let dir = TempDir::new().unwrap();
        let args = [
            "divisor-scan",
            "--set", &format!("divisor.r_max={r_max}"),
            "--set", &format!("divisor.k_max={k}"),
            "--set", &format!("global.K={k}"),
            "--set", "divisor.trials=0",
        ];
        assert_eq!(code(&run(&args, dir.path())), 0);
        let (nonres, res) = brute_force_classes(r_max, k);
        let s = json(&dir.path().join("divisor_summary.json"));
        assert_eq!(s["tuples"]["nonresonant"], nonres, "r_max {r_max} K {k}");
        assert_eq!(s["tuples"]["resonant"], res, "r_max {r_max} K {k}");
        assert_eq!(csv_rows(&dir.path().join("divisor_records.csv")), nonres);
    }
}

#[test]
fn divisor_scan_monte_carlo_within_gamma() {
    let dir = TempDir::new().unwrap();
    let args = ["divisor-scan", "--set", "divisor.trials=400", "--set", "divisor.gamma=0.2"];
    assert_eq!(code(&run(&args, dir.path())), 0);
    let s = json(&dir.path().join("divisor_summary.json"));
    let mc = &s["monte_carlo"];
    assert!(mc["fraction"].as_f64().unwrap() <= 0.2);
    assert!(mc["wilson_high"].as_f64().unwrap() >= mc["fraction"].as_f64().unwrap());
    assert_eq!(mc["resonant_nonzero"], 0);
    assert_eq!(s["verdict"], "pass");
    let header = fs::read_to_string(dir.path().join("divisor_records.csv")).unwrap();
    assert!(header.starts_with("tuple,omega_scaled,envelope,pass\n"));
}

#[test]
fn resonant_filter_writes_empty_csv() {
    let dir = TempDir::new().unwrap();
    let args = ["divisor-scan", "--set", "divisor.filter=resonant", "--set", "divisor.trials=0"];
    assert_eq!(code(&run(&args, dir.path())), 0);
    assert_eq!(csv_rows(&dir.path().join("divisor_records.csv")), 0);
}

#[test]
fn enumeration_blowup_is_refused() {
    let dir = TempDir::new().unwrap();
    let args = ["divisor-scan", "--set", "divisor.enumeration_limit=10"];
    let o = run(&args, dir.path());
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("enumeration too large"));
}

#[test]
fn resonant_only_input_passes_through_unchanged() {
    let dir = TempDir::new().unwrap();
    let input = "(1.5,0.0)  I:[(1)]  q:[|]\n(0.25,0.0)  I:[(1),(2)]  q:[|]\n(-0.125,0.0)  I:[(0),(0),(3)]  q:[|]\n";
    let path = dir.path().join("h0.txt");
    fs::write(&path, input).unwrap();
    let args = ["normal-form", "--set", &format!("normal_form.input={:?}", path.display().to_string())];
    assert_eq!(code(&run(&args, dir.path())), 0);
    let (untagged, tagged) = parse_classified(&fs::read_to_string(dir.path().join("hamiltonian.txt")).unwrap()).unwrap();
    assert!(tagged.is_empty());
    assert_eq!(format_polynomial(&untagged), format_polynomial(&parse_polynomial(input).unwrap()));
    let rep = json(&dir.path().join("normal_form_report.json"));
    assert_eq!(rep["report"]["steps"].as_array().unwrap().len(), 0);
}

#[test]
fn toy_normal_form_report() {
    let dir = TempDir::new().unwrap();
    let args = ["normal-form", "--set", "global.K=8", "--set", "normal_form.A=6"];
    assert_eq!(code(&run(&args, dir.path())), 0);
    let rep = json(&dir.path().join("normal_form_report.json"));
    let r = &rep["report"];
    assert!(r["max_residual_relative"].as_f64().unwrap() <= 1e-12);
    assert_eq!(rep["verdict"], "pass");
    assert_eq!(r["mode"], "empirical");
    let totals = r["routing_totals"].as_array().unwrap();
    assert!(!totals.is_empty());
    assert!(totals.iter().all(|t| t["conformant"] == true && t["count"].as_u64().unwrap() > 0));
    for step in r["steps"].as_array().unwrap() {
        assert!(!step["routing"].as_array().unwrap().is_empty());
    }
    assert_eq!(rep["config"]["normal_form"]["A"], 6);
}

#[test]
fn uncertified_schedule_needs_empirical_flag() {
    let dir = TempDir::new().unwrap();
    let args = ["normal-form", "--set", "normal_form.empirical=false"];
    assert_eq!(code(&run(&args, dir.path())), 4);
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let idx = rd.headers().unwrap().iter().position(|h| h == name).unwrap();
    rd.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn linear_run_passes_with_zero_drift() {
    let dir = TempDir::new().unwrap();
    let args = ["simulate", "--set", "simulate.cubic_coeff=0", "--set", "simulate.T=20", "--set", "global.K=16"];
    assert_eq!(code(&run(&args, dir.path())), 0);
    let v = json(&dir.path().join("verdict.json"));
    assert_eq!(v["verdict"], "pass");
    let hs0 = v["initial_hs"].as_f64().unwrap();
    assert!(v["final_drift"].as_f64().unwrap() <= 1e-12 * hs0 * hs0);
}

#[test]
fn plane_wave_keeps_hs_column_constant() {
    let dir = TempDir::new().unwrap();
    let args = [
        "simulate", "--set", "simulate.initial=plane-wave", "--set", "simulate.plane_wave_mode=[3]",
        "--set", "simulate.T=20", "--set", "global.K=8",
    ];
    assert_eq!(code(&run(&args, dir.path())), 0);
    let hs = column(&dir.path().join("trajectory.csv"), "hs_norm");
    assert!(hs.len() > 10);
    assert!(hs.iter().all(|h| (h - hs[0]).abs() <= 1e-12 * hs[0]));
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = ["simulate", "--set", "simulate.T=5", "--set", "global.K=16", "--seed", "9"];
    assert_eq!(code(&run(&args, dir.path())), 0);
    let a = fs::read(dir.path().join("trajectory.csv")).unwrap();
    let va = fs::read(dir.path().join("verdict.json")).unwrap();
    assert_eq!(code(&run(&args, dir.path())), 0);
    assert_eq!(a, fs::read(dir.path().join("trajectory.csv")).unwrap());
    assert_eq!(va, fs::read(dir.path().join("verdict.json")).unwrap());
}

#[test]
fn norm_growth_is_a_failed_verdict() {
    let dir = TempDir::new().unwrap();
    let args = [
        "simulate", "--set", "global.eps=1", "--set", "global.K=16", "--set", "simulate.s=1",
        "--set", "simulate.T=5", "--set", "simulate.dt=0.001", "--set", "simulate.cubic_coeff=-1000",
    ];
    assert_eq!(code(&run(&args, dir.path())), 2);
    let v = json(&dir.path().join("verdict.json"));
    assert_eq!(v["verdict"], "fail");
    assert!(v["sup_ratio"].as_f64().unwrap() > 2.0);
}

#[test]
fn ensemble_writes_per_run_directories() {
    let dir = TempDir::new().unwrap();
    let args = ["simulate", "--set", "simulate.ensemble=20", "--set", "simulate.T=20", "--set", "global.K=16"];
    assert_eq!(code(&run(&args, dir.path())), 0);
    let e = json(&dir.path().join("ensemble.json"));
    let runs = e["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 20);
    assert_eq!(e["pass_fraction"].as_f64().unwrap(), 1.0);
    let median = e["drift_median"].as_f64().unwrap();
    assert_eq!(e["drift_threshold"].as_f64().unwrap(), 10.0 * median);
    for (i, r) in runs.iter().enumerate() {
        assert_eq!(r["seed"].as_u64().unwrap(), 1 + i as u64);
        let sub = dir.path().join(format!("run_{i}"));
        assert!(sub.join("trajectory.csv").is_file());
        assert_eq!(json(&sub.join("verdict.json"))["index"], i);
    }
}

#[test]
fn config_file_round_trips_and_defaults_come_from_env_dir() {
    let dir = TempDir::new().unwrap();
    let printed = bin()
        .args(["simulate", "--print-config", "--set", "global.K=12", "--set", "simulate.dt=0.005"])
        .output()
        .unwrap();
    assert_eq!(code(&printed), 0);
    let text = String::from_utf8(printed.stdout).unwrap();
    let path = dir.path().join("cfg.toml");
    fs::write(&path, &text).unwrap();
    let again = bin().args(["simulate", "--print-config", "--config"]).arg(&path).output().unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);

    let cfg_dir = dir.path().join("defaults");
    fs::create_dir(&cfg_dir).unwrap();
    fs::write(cfg_dir.join("sample-potential.toml"), "[global]\nK = 3\n").unwrap();
    let out = dir.path().join("p");
    let o = bin()
        .env("NLSBNF_CONFIG_DIR", &cfg_dir)
        .args(["sample-potential", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(coefficients(&json(&out.join("potential.json"))).len(), 7);
}

#[test]
fn bad_config_exits_with_four() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(&["sample-potential", "--set", "global.nope=1"], dir.path())), 4);
    assert_eq!(code(&run(&["sample-potential", "--set", "global.eps=-1"], dir.path())), 4);
    assert_eq!(code(&run(&["simulate", "--set", "global.K=2"], dir.path())), 4);
}
