use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ac_action::minimizer::{initial_path, InitialPathKind};
use ac_action::potential::optimal_profile;
use ac_action::{Boundary, Epsilon, Grid, SpaceTimePath, SURFACE_TENSION};
use ac_action_cli::container;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ac-action"));
    c.env_remove("AC_ACTION_THREADS").arg("--quiet");
    c
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, value: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV as floats; empty cells become NaN.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, prefix: &str) -> Vec<f64> {
    let (header, rows) = csv_rows(path);
    let i = header.iter().position(|h| h.starts_with(prefix)).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate_config(out: &Path) -> Value {
    json!({
        "schema_version": 1,
        "grid": {"extents": [1.0], "counts": [101], "bc": "neumann"},
        "eps": 0.05,
        "time": {"t_end": 0.05, "record_every": 5},
        "initial": {"kind": "front", "center": 0.4},
        "flow": {"dt": 0.0005},
        "output": out,
    })
}

#[test]
fn constant_state_has_zero_energy_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simulate_config(&dir.path().join("out"));
    cfg["initial"] = json!({"kind": "constant", "value": 1.0});
    let o = run(&["--config", s(&write_config(dir.path(), &cfg)), "simulate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let energies = column(&dir.path().join("out/energy.csv"), "energy");
    assert_eq!(energies.len(), 21);
    assert!(energies.iter().all(|&e| e == 0.0), "{energies:?}");
    for f in ["path.bin", "interface.csv", "metadata.json", "final.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn csv_headers_carry_units() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "--config",
        s(&write_config(dir.path(), &simulate_config(&out))),
        "simulate",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[
        "diagnose",
        s(&out.join("path.bin")),
        "--eps",
        "0.05",
        "--output",
        s(&dir.path().join("diag")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in [
        "out/energy.csv",
        "out/interface.csv",
        "out/final.csv",
        "diag/gap.csv",
        "diag/summary.csv",
        "diag/multiplicity.csv",
    ] {
        let (header, _) = csv_rows(&dir.path().join(f));
        assert!(
            header.iter().all(|h| h.contains(" [") && h.ends_with(']')),
            "{f}: {header:?}"
        );
    }
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simulate_config(&dir.path().join("out"));
    cfg["flow"]["dt"] = json!("fast");
    let o = run(&["--config", s(&write_config(dir.path(), &cfg)), "simulate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("flow.dt"), "{}", stderr(&o));

    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{\"schema_version\": 1, \"eps\": }").unwrap();
    let o = run(&["--config", s(&p), "simulate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("eps"), "{}", stderr(&o));

    let mut cfg = simulate_config(&dir.path().join("out"));
    cfg["grid"]["spacing"] = json!(0.1);
    let o = run(&["--config", s(&write_config(dir.path(), &cfg)), "simulate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("spacing"), "{}", stderr(&o));
}

#[test]
fn config_for_another_command_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simulate_config(&dir.path().join("out"));
    cfg["command"] = json!("minimize");
    let o = run(&["--config", s(&write_config(dir.path(), &cfg)), "simulate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("command"));
}

#[test]
fn unstable_step_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simulate_config(&dir.path().join("out"));
    cfg["initial"] = json!({"kind": "constant", "value": 3.0});
    cfg["flow"]["dt"] = json!(0.05);
    cfg["time"]["t_end"] = json!(1.0);
    let o = run(&["--config", s(&write_config(dir.path(), &cfg)), "simulate"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("iterate"), "{}", stderr(&o));
}

fn switching_config(out: &Path, max_iterations: usize) -> Value {
    json!({
        "schema_version": 1,
        "grid": {"extents": [1.0], "counts": [21], "bc": "neumann"},
        "eps": 0.1,
        "time": {"t_end": 2.0, "slices": 16},
        "path": {"kind": "boundary_front", "switching": true},
        "minimizer": {"max_iterations": max_iterations, "gradient_tolerance": 1e-6},
        "output": out,
    })
}

#[test]
fn zero_iteration_budget_returns_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "--config",
        s(&write_config(dir.path(), &switching_config(&out, 0))),
        "minimize",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["termination"], "max_iterations");
    assert_eq!(report["iterations"], 0);
    let written = container::read_path(&out.join("path.bin")).unwrap();
    let g = Grid::line(0.0, 1.0, 21, Boundary::Neumann).unwrap();
    let times: Vec<f64> = (0..=16).map(|i| 2.0 * i as f64 / 16.0).collect();
    let start = initial_path(InitialPathKind::BoundaryFront, &g, times, Epsilon::new(0.1).unwrap()).unwrap();
    assert_eq!(written, start);
}

#[test]
fn switching_requires_plus_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = switching_config(&dir.path().join("out"), 10);
    cfg["path"]["end"] = json!(0.5);
    let o = run(&["--config", s(&write_config(dir.path(), &cfg)), "minimize"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("switching"), "{}", stderr(&o));
}

#[test]
fn minimize_reports_oracle_and_descends() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "--config",
        s(&write_config(dir.path(), &switching_config(&out, 100_000))),
        "minimize",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let action: Value = serde_json::from_str(&std::fs::read_to_string(out.join("action.json")).unwrap()).unwrap();
    let initial = action["initial"]["total"].as_f64().unwrap();
    let fin = action["final"]["total"].as_f64().unwrap();
    assert!(fin < initial);
    assert!(action["reduced_oracle"]["breakdown"]["total"].as_f64().unwrap() > 0.0);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["termination"], "converged");
}

#[test]
fn unreadable_container_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "diagnose",
        s(&dir.path().join("missing.bin")),
        "--eps",
        "0.1",
        "--output",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"{\"dim\": 1}\nabc").unwrap();
    let o = run(&["diagnose", s(&junk), "--eps", "0.1", "--output", s(dir.path())]);
    assert_eq!(code(&o), 2);
    let o = run(&["diagnose", s(&junk), "--output", s(dir.path())]);
    assert_eq!(code(&o), 2, "missing eps");
}

fn diagnose(dir: &Path, path: &SpaceTimePath, eps: f64) -> PathBuf {
    let file = dir.join("input.bin");
    container::write_path(&file, path).unwrap();
    let out = dir.join("diag");
    let o = run(&["diagnose", s(&file), "--eps", &eps.to_string(), "--output", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn traveling_front_velocity_column() {
    let dir = tempfile::tempdir().unwrap();
    let (e, v) = (0.02, 0.5);
    let g = Grid::line(-1.0, 3.0, 1201, Boundary::Neumann).unwrap();
    let p = SpaceTimePath::from_fn(g, 1.0, 50, |t, x, _| optimal_profile((x - v * t) / e)).unwrap();
    let out = diagnose(dir.path(), &p, e);
    let vel = column(&out.join("summary.csv"), "velocity");
    assert_eq!(vel.len(), 50);
    // the +1 phase lies ahead of the front and is consumed
    for w in vel {
        assert!((w - v).abs() < 0.02 * v, "{w}");
    }
}

#[test]
fn collapsing_pair_flagged_as_multiplicity_two() {
    let dir = tempfile::tempdir().unwrap();
    let e = 0.02;
    let g = Grid::line(-1.0, 2.0, 3001, Boundary::Neumann).unwrap();
    // a +1 slab that narrows from width 0.6 to 3ε; glued profiles
    let p = SpaceTimePath::from_fn(g, 1.0, 4, |t, x, _| {
        let half = 0.3 + (1.5 * e - 0.3) * t;
        optimal_profile((x + half) / e).min(optimal_profile((half - x) / e))
    })
    .unwrap();
    let out = diagnose(dir.path(), &p, e);
    let m = column(&out.join("multiplicity.csv"), "max_multiplicity");
    let flag = column(&out.join("multiplicity.csv"), "hidden_boundary");
    assert!((m[0] - 1.0).abs() < 0.05, "{m:?}");
    assert_eq!(flag[0], 0.0);
    assert!((m[4] - 2.0).abs() < 0.1, "{m:?}");
    assert_eq!(flag[4], 1.0);
    let track: Value = serde_json::from_str(&std::fs::read_to_string(out.join("interface.json")).unwrap()).unwrap();
    assert_eq!(track["snapshots"][4]["tubes"][0]["ambiguous"], true);
}

#[test]
fn flow_path_has_vanishing_gap_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = json!({
        "schema_version": 1,
        "grid": {"extents": [1.0, 1.0], "counts": [41, 41], "bc": "neumann"},
        "eps": 0.05,
        "time": {"t_end": 0.02, "record_every": 1},
        "initial": {"kind": "circle", "center": [0.5, 0.5], "radius": 0.3},
        "flow": {"dt": 0.0005},
        "output": out,
    });
    let o = run(&["--config", s(&write_config(dir.path(), &cfg)), "simulate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[
        "diagnose",
        s(&out.join("path.bin")),
        "--eps",
        "0.05",
        "--output",
        s(&dir.path().join("diag")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = dir.path().join("diag/gap.csv");
    let lhs = column(&csv, "lhs_rate");
    let gap = column(&csv, "gap_rate");
    assert_eq!(gap.len(), 40);
    for (l, g) in lhs.iter().zip(&gap) {
        assert!(*l > 0.1, "{l}");
        assert!(*g >= -1e-12 && *g < 5e-3 * l, "gap {g} at rate {l}");
    }
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn hidden_boundary_preset_difference() {
    let o = run(&["reduced", s(&preset("hidden_boundary.json"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    let (x1, x2, t1, t2) = (0.3, 0.8, 0.0, 1.0);
    let c0 = SURFACE_TENSION;
    let expected = 8.0 * c0 - 2.0 * c0 * (x2 - x1) * (x2 - x1) / (t2 - t1);
    let d = v["difference"].as_f64().unwrap();
    assert!((d - expected).abs() < 1e-12, "{d} vs {expected}");
    assert!((v["u"]["nucleation"].as_f64().unwrap() - 8.0 * c0).abs() < 1e-12);
}

#[test]
fn mcf_circle_preset_costs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reduced", s(&preset("mcf_circle.json")), "--output", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout_json(&o)["total"].as_f64().unwrap().abs() < 1e-10);
    assert!(dir.path().join("reduced.json").exists());
}

#[test]
fn evolution_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ev.json");
    std::fs::write(&p, r#"{"t_start": 0, "t_end": 1, "fronts": [{"shape": {"kind": "sphere"}, "times": [0, 1], "positions": [0, 0]}]}"#).unwrap();
    let o = run(&["reduced", s(&p)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("fronts[0]"), "{}", stderr(&o));
    std::fs::write(
        &p,
        r#"{"t_start": 0, "t_end": 1, "fronts": [
            {"shape": {"kind": "point_1d"}, "times": [0, 1], "positions": [0, 0]},
            {"shape": {"kind": "circle_2d", "center": [0, 0]}, "times": [0, 1], "positions": [1, 1]}]}"#,
    )
    .unwrap();
    let o = run(&["reduced", s(&p)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("mixes"), "{}", stderr(&o));
}

#[test]
fn compare_rejects_a_pair_document() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::line(0.0, 1.0, 41, Boundary::Neumann).unwrap();
    let p = SpaceTimePath::from_fn(g, 1.0, 4, |_, x, _| optimal_profile((x - 0.5) / 0.1)).unwrap();
    let file = dir.path().join("p.bin");
    container::write_path(&file, &p).unwrap();
    let o = run(&["compare", s(&file), s(&preset("hidden_boundary.json")), "--eps", "0.1"]);
    assert_eq!(code(&o), 2);
    let o = run(&["compare", s(&file), "--eps", "0.1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["extracted"], true);
    assert_eq!(v["reduced"]["total"].as_f64().unwrap(), 0.0);
    let diffuse = v["diffuse"]["total"].as_f64().unwrap();
    assert!((0.0..0.05 * SURFACE_TENSION).contains(&diffuse), "{diffuse}");
    assert_eq!(v["interfaces"].as_array().unwrap().len(), 5);
}

#[test]
fn shrinking_circle_preset_follows_mean_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--config",
        s(&preset("shrinking_circle.json")),
        "--output",
        s(dir.path()),
        "simulate",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = dir.path().join("interface.csv");
    let t = column(&csv, "t");
    let r = column(&csv, "radius");
    assert_eq!(t.len(), 11);
    for (t, r) in t.iter().zip(&r) {
        let expected = 0.09 - 2.0 * t;
        assert!(
            (r * r / expected - 1.0).abs() < 0.05,
            "t {t}: r² {} vs {expected}",
            r * r
        );
    }
    assert!(r.last().unwrap() <= &0.1501);
}

fn digest_dir(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .iter()
        .map(|f| {
            let hash = Sha256::digest(std::fs::read(f).unwrap());
            let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
            (f.file_name().unwrap().to_string_lossy().into_owned(), hex)
        })
        .collect()
}

#[test]
fn stochastic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("stochastic_1d.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(code(&run(&["--config", s(&cfg), "--output", s(&a), "simulate"])), 0);
    let o = bin()
        .env("AC_ACTION_THREADS", "3")
        .args(["--config", s(&cfg), "--output", s(&b), "simulate"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(digest_dir(&a), digest_dir(&b));
    assert_eq!(
        code(&run(&[
            "--config",
            s(&cfg),
            "--output",
            s(&c),
            "--seed",
            "8",
            "simulate"
        ])),
        0
    );
    let (da, dc) = (digest_dir(&a), digest_dir(&c));
    let path_hash = |d: &[(String, String)]| d.iter().find(|(n, _)| n == "path.bin").unwrap().1.clone();
    assert_ne!(path_hash(&da), path_hash(&dc), "a different seed changes the path");
}

#[test]
fn zero_threads_rejected() {
    let o = run(&["--threads", "0", "reduced", s(&preset("mcf_circle.json"))]);
    assert_eq!(code(&o), 2);
}
