use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn fdi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdi"))
        .args(args)
        .current_dir(dir)
        .env_remove("FDI_SEED")
        .output()
        .expect("run fdi")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert_eq!(
        o.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fsm_mb_prints_the_case_study_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(fdi(dir.path(), &["fsm", "mb"]));
    let rows: Vec<&str> = out
        .lines()
        .filter(|l| l.starts_with("Drift") && l.contains('\t'))
        .collect();
    assert_eq!(rows.len(), 2, "{out}");
    assert!(rows[0].ends_with("1\t1"), "{out}");
    assert!(rows[1].ends_with("0\t1"), "{out}");
}

#[test]
fn fsm_analyze_reports_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(fdi(dir.path(), &["fsm", "analyze", path(&fixture("example_fsm.tsv"))]));
    assert!(out.contains("Fault_0: detectable, isolable"), "{out}");
    assert!(out.contains("Fault_1: detectable, not isolable"), "{out}");
}

#[test]
fn residual_verdicts_for_each_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases = [
        ("case_study.toml", "no fault detected"),
        ("r0_down.toml", "isolated: Drift in R0; R0 ≈ 5.0e3 Ω"),
        ("cap_up.toml", "isolated: Drift in C; τ ≈ 4.0 s"),
    ];
    for (cfg, want) in cases {
        let cfg = fixture(cfg);
        ok(fdi(d, &["--config", path(&cfg), "simulate", "-o", "run.csv"]));
        let out = ok(fdi(
            d,
            &["--config", path(&cfg), "residuals", "run.csv", "-o", "res.csv"],
        ));
        assert!(out.lines().any(|l| l == want), "{want:?} not in\n{out}");
        assert!(d.join("res.csv").exists());
    }
}

#[test]
fn simulate_computed_writes_the_model_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(fdi(
        d,
        &[
            "--config",
            path(&fixture("r0_down.toml")),
            "simulate",
            "-o",
            "r0.csv",
            "--computed",
        ],
    ));
    let measured = std::fs::read_to_string(d.join("r0.csv")).unwrap();
    let computed = std::fs::read_to_string(d.join("r0.computed.csv")).unwrap();
    assert!(measured.starts_with("t,v0,v1,v2,s1"));
    assert_eq!(measured.lines().count(), computed.lines().count());
    assert_ne!(measured, computed);
}

#[test]
fn dsep_human_and_machine_output() {
    let dir = tempfile::tempdir().unwrap();
    let dag = fixture("rrc_indicators.dag");
    let out = ok(fdi(dir.path(), &["dsep", path(&dag), "--x", "S1", "--y", "R0"]));
    assert!(out.contains("d-separated"), "{out}");
    assert!(out.contains("d_separated = true"), "{out}");
    let out = ok(fdi(
        dir.path(),
        &[
            "dsep",
            path(&dag),
            "--x",
            "S1",
            "--y",
            "R0",
            "--given",
            "V1",
            "--format",
            "machine",
        ],
    ));
    assert_eq!(out.trim(), "d_separated = false");
}

#[test]
fn assess_levels() {
    let dir = tempfile::tempdir().unwrap();
    let mb = ok(fdi(dir.path(), &["assess", "--pipeline", "mb"]));
    assert!(mb.contains("Understanding"), "{mb}");
    let eb = ok(fdi(dir.path(), &["assess", "--pipeline", "eb"]));
    assert!(eb.contains("Monitoring"), "{eb}");
    assert!(eb.contains("Identify"), "{eb}");
}

#[test]
fn seed_flag_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_fdi"));
        c.args(args).current_dir(dir.path()).env_remove("FDI_SEED");
        if let Some(v) = env {
            c.env("FDI_SEED", v);
        }
        ok(c.output().unwrap())
    };
    let sim = ["simulate", "--scenario", "healthy", "--sigma", "0.02"];
    let flag: Vec<&str> = ["--seed", "5"].iter().chain(&sim).copied().collect();
    let a = run(Some("5"), &sim);
    let b = run(Some("9"), &flag);
    let c = run(Some("9"), &sim);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn exit_code_one_for_config_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("empty.tsv"), "").unwrap();
    assert_eq!(fdi(d, &["fsm", "analyze", "empty.tsv"]).status.code(), Some(1));
    std::fs::write(d.join("bad.toml"), "[circuit]\nresistance = 3\n").unwrap();
    assert_eq!(fdi(d, &["--config", "bad.toml", "fsm", "mb"]).status.code(), Some(1));
    std::fs::write(d.join("neg.toml"), "[circuit]\nr0 = -1.0\n").unwrap();
    assert_eq!(fdi(d, &["--config", "neg.toml", "fsm", "mb"]).status.code(), Some(1));
    assert_eq!(fdi(d, &["simulate", "--scenario", "nope"]).status.code(), Some(1));
}

#[test]
fn exit_code_two_for_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(fdi(d, &["fsm", "analyze", "missing.tsv"]).status.code(), Some(2));
    assert_eq!(
        fdi(d, &["--config", "missing.toml", "fsm", "mb"]).status.code(),
        Some(2)
    );
}

#[test]
fn exit_code_three_for_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dag = fixture("rrc_indicators.dag");
    let o = fdi(d, &["dsep", path(&dag), "--x", "S1", "--y", "Nowhere"]);
    assert_eq!(o.status.code(), Some(3));

    // a labeled healthy run is a one-class dataset
    ok(fdi(
        d,
        &["simulate", "--scenario", "healthy", "--sigma", "0.02", "-o", "h.csv"],
    ));
    let o = fdi(d, &["train", "h.csv", "-o", "m.txt"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("class"));
}

#[test]
fn figure_reproduction_runs_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let start = Instant::now();
    for (cfg, stem) in [
        ("case_study.toml", "healthy"),
        ("r0_down.toml", "r0"),
        ("cap_up.toml", "cap"),
    ] {
        let cfg = fixture(cfg);
        let csv = format!("{stem}.csv");
        let res = format!("{stem}_res.csv");
        ok(fdi(d, &["--config", path(&cfg), "simulate", "-o", &csv, "--computed"]));
        ok(fdi(d, &["--config", path(&cfg), "residuals", &csv, "-o", &res]));
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "{:?}", start.elapsed());
}
