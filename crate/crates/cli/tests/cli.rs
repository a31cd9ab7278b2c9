use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geotherm::verify::{parse_report_csv, spatial_rates};
use geotherm_cli::{ExperimentConfig, Overrides};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geotherm"))
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const REFERENCE_DET: &str = r#"{
  "version": 1,
  "experiment": "det_convergence",
  "params": { "pr": 1.0, "ra": 1.0, "c_a": 1.0, "l": 1.0, "k_f": 1.0, "k_p": 1.0, "gamma": 1e5 },
  "levels": [4, 8, 16, 32],
  "dt": 0.001,
  "t_final": 0.5,
  "conductivity": { "kind": "constant", "k": 2.21 }
}"#;

#[test]
fn reference_config_is_accepted_and_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "det.json", REFERENCE_DET);
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = String::from_utf8(o.stdout).unwrap();
    let parsed = ExperimentConfig::parse(&echo).unwrap();
    let resolved = ExperimentConfig::parse(REFERENCE_DET)
        .unwrap()
        .resolve(&Overrides::default());
    assert_eq!(parsed, resolved);
    assert_eq!(parsed.resolve(&Overrides::default()), parsed);
    assert_eq!(parsed.dt, Some(0.001));
    assert_eq!(parsed.levels.as_deref(), Some(&[4, 8, 16, 32][..]));
}

#[test]
fn validate_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"version":1,"experiment":"stoch_convergence","levels":[8,4],"dt":0.003,"t_final":0.5,"samples":0}"#,
    );
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("3 violation(s)"), "{err}");
    assert!(err.contains("not a positive integer"), "{err}");
    assert!(err.contains("J must be at least 1"), "{err}");
    assert!(err.contains("not strictly refining"), "{err}");
}

#[test]
fn malformed_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"version":1,"experiment":"penalty_study","gamma_list":[1e5]}"#,
            "at least two gamma",
        ),
        (
            r#"{"version":1,"experiment":"det_convergence","typo":1}"#,
            "unknown field",
        ),
        (
            r#"{"version":2,"experiment":"single_run"}"#,
            "version must be 1",
        ),
        (
            r#"{"version":1,"experiment":"temporal_convergence","dt_list":[0.1,0.05]}"#,
            "three step sizes",
        ),
        (
            r#"{"version":1,"experiment":"stoch_convergence","conductivity":{"kind":"kl_field","a0":3,"sigma":0.1,"n_f":2,"l_c":0.5}}"#,
            "no exact solution",
        ),
    ];
    for (i, (json, needle)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), json);
        let o = run(&["validate", cfg.to_str().unwrap()]);
        assert!(!o.status.success(), "case {i} accepted");
        assert!(stderr(&o).contains(needle), "case {i}: {}", stderr(&o));
    }
    let o = run(&[
        "validate",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}

fn bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().is_some_and(|x| x == "csv")).then(|| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
        })
        .collect();
    out.sort();
    out
}

const SMALL_STOCH: &str = r#"{
  "version": 1,
  "experiment": "stoch_convergence",
  "levels": [2, 4, 8],
  "dt": 0.01,
  "t_final": 0.02,
  "samples": 3,
  "base_seed": 11,
  "conductivity": { "kind": "affine_uniform", "sigma": 0.1 }
}"#;

#[test]
fn reruns_are_byte_identical_and_rates_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", SMALL_STOCH);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = run(&[
            "run",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ba = bodies(&a);
    assert_eq!(ba.len(), 5);
    assert_eq!(ba, bodies(&b));
    assert_eq!(
        fs::read(a.join("summary.txt")).unwrap(),
        fs::read(b.join("summary.txt")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("metadata.json")).unwrap(),
        fs::read(b.join("metadata.json")).unwrap()
    );

    // a rerun into the same directory reuses the stored sample records
    let o = run(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(bodies(&a), ba);

    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "12",
    ]);
    assert!(o.status.success());
    assert_ne!(bodies(&c), ba);
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(c.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["base_seed"], 12);
    assert_eq!(meta["samples"], 3);

    for file in ["stoch_convergence_l2.csv", "stoch_convergence_energy.csv"] {
        let table = parse_report_csv(&fs::read_to_string(a.join(file)).unwrap()).unwrap();
        let h: Vec<f64> = table.iter().map(|r| r.0).collect();
        for f in 0..4 {
            let e: Vec<f64> = table.iter().map(|r| r.1[f]).collect();
            let rates = spatial_rates(&h, &e).unwrap();
            assert!(table[0].2[f].is_none());
            for (row, r) in table[1..].iter().zip(rates) {
                assert_eq!(row.2[f], Some(r), "{file} field {f}");
            }
        }
    }
}

#[test]
fn temporal_ratios_match_their_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.json",
        r#"{"version":1,"experiment":"temporal_convergence","levels":[4],"dt_list":[0.04,0.02,0.01,0.005],"t_final":0.04}"#,
    );
    let out = dir.path().join("o");
    let o = run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table =
        parse_report_csv(&fs::read_to_string(out.join("temporal_convergence_l2.csv")).unwrap())
            .unwrap();
    assert_eq!(table.len(), 3);
    for w in table.windows(2) {
        for f in 0..4 {
            assert_eq!(w[1].2[f], Some(w[0].1[f] / w[1].1[f]));
        }
    }
    let orders = fs::read_to_string(out.join("temporal_orders.csv")).unwrap();
    let row: Vec<f64> = orders
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(row[1], table[1].2[0].unwrap().log2());
}

#[test]
fn penalty_and_single_runs_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.json",
        r#"{"version":1,"experiment":"penalty_study","levels":[2],"dt":0.01,"t_final":0.02,"gamma_list":[0,1,1e5]}"#,
    );
    let out = dir.path().join("p");
    let o = run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("penalty_study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().nth(3).unwrap().split(',').count(), 9);

    let cfg = write_config(
        dir.path(),
        "k.json",
        r#"{"version":1,"experiment":"single_run","levels":[2],"dt":0.01,"t_final":0.03,"base_seed":5,
            "conductivity":{"kind":"kl_field","a0":3.0,"sigma":0.5,"n_f":3,"l_c":0.25}}"#,
    );
    let out = dir.path().join("k");
    let o = run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let diag = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().count(), 5);
    assert!(!out.join("errors.csv").exists());
}
