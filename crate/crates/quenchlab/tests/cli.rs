use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use quenchlab::output::{RunSummary, SUMMARY};

const CANONICAL: &str = r#"
[problem]
p = 3.0
beta = 0.5
domain = { kind = "dirichlet", half_length = 1.0 }
source = { kind = "zero" }
initial = { kind = "cosine", peak = 1.0 }

[regularization]
epsilon = 0.0125
eta = 1.25e-5

[grid]
n_cells = 100

[stepping]
t_end = 0.75
stop_on_quench = true

[experiment]
kind = "quench"

[verify]
randomized_ordering = true

[bounds]
times = [0.1, 0.5]
"#;

fn quenchlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quenchlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value_after(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("{key} in {text}"));
    let rest = line.rsplit('=').next().unwrap().trim();
    rest.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn bounds_prints_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let text = CANONICAL
        .replace(r#"{ kind = "dirichlet", half_length = 1.0 }"#, r#"{ kind = "cauchy", radius = 4.0 }"#)
        .replace(r#"{ kind = "cosine", peak = 1.0 }"#, r#"{ kind = "bump", radius = 1.0, peak = 1.0 }"#);
    let cfg = write_config(dir.path(), "b.toml", &text);
    let out = dir.path().join("o");
    let o = quenchlab(&["bounds", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!((value_after(&s, "gamma") - 1.2).abs() < 1e-9);
    assert!((value_after(&s, "lambda") - 4.0).abs() < 1e-9);
    assert!((value_after(&s, "sigma") - 1.2018746419).abs() < 1e-9);
    assert!((value_after(&s, "m0") - 1.8320335292).abs() < 1e-9);
    assert!((value_after(&s, "T_sup") - 2.0 / 3.0).abs() < 1e-9);
    // f = 0: t^{-1/p} M^{(1+beta)/p} + 1
    let b = value_after(&s, "bracket_sup(t = 0.1)");
    assert!((b - (0.1f64.powf(-1.0 / 3.0) + 1.0)).abs() < 1e-9, "{b}");
    assert!(out.join("bounds.json").exists());
}

#[test]
fn missing_beta_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &CANONICAL.replace("beta = 0.5\n", ""));
    let o = quenchlab(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem.beta"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_bad_overrides_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &CANONICAL.replace("[grid]\n", "[grid]\ncells = 3\n"));
    assert_eq!(quenchlab(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "d.toml", CANONICAL);
    let o = quenchlab(&["run", "--config", cfg.to_str().unwrap(), "--override", "problem.p=1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem.p"), "{}", stderr(&o));
    assert_eq!(quenchlab(&["run"]).status.code(), Some(2));
}

#[test]
fn run_writes_deterministic_files_that_verify_rechecks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "q.toml", CANONICAL);
    let out = dir.path().join("run");
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "7"];
    let o = quenchlab(&args);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    for f in ["snapshots.csv", "ledger.csv", "summary.json", "verify.json", "timing.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let first = fs::read(out.join(SUMMARY)).unwrap();
    let o = quenchlab(&args);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(first, fs::read(out.join(SUMMARY)).unwrap(), "summary is byte-identical");

    let summary: RunSummary = serde_json::from_slice(&first).unwrap();
    let again = serde_json::to_string_pretty(&summary).unwrap() + "\n";
    assert_eq!(again.as_bytes(), &first[..], "summary round-trips");
    assert_eq!(summary.config.seed, 7);
    let tq = summary.quench_time.unwrap();
    assert!(tq <= 2.0 / 3.0 + 1e-2, "{tq}");
    assert!(summary.verification.get("ordering").unwrap().passed);
    assert!(summary.files.iter().all(|f| out.join(f).exists()));

    let snaps = fs::read_to_string(out.join("snapshots.csv")).unwrap();
    assert!(snaps.starts_with("t,x,u\n"));
    let ledger = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("t,mass,absorbed_singular,absorbed_source,boundary_outflux"));

    let o = quenchlab(&["verify", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("quench_bound"));
    let o = quenchlab(&["verify", "--out", out.to_str().unwrap(), "--override", "verify.quench_slack=-1.0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn verify_rejects_a_damaged_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "q.toml", CANONICAL);
    let out = dir.path().join("run");
    quenchlab(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    fs::write(out.join("snapshots.csv"), "t,x,u\n0,0,abc\n").unwrap();
    assert_eq!(quenchlab(&["verify", "--out", out.to_str().unwrap()]).status.code(), Some(2));
    fs::remove_file(out.join("summary.json")).unwrap();
    assert_eq!(quenchlab(&["verify", "--out", out.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn propagation_keeps_support_inside_m0() {
    let dir = tempfile::tempdir().unwrap();
    let text = CANONICAL
        .replace(r#"{ kind = "dirichlet", half_length = 1.0 }"#, r#"{ kind = "cauchy", radius = 3.0 }"#)
        .replace(r#"{ kind = "cosine", peak = 1.0 }"#, r#"{ kind = "bump", radius = 1.0, peak = 1.0 }"#)
        .replace("n_cells = 100", "n_cells = 600")
        .replace("epsilon = 0.0125\neta = 1.25e-5", "epsilon = 1e-3\neta = 1e-6")
        .replace("kind = \"quench\"", "kind = \"propagation\"");
    let cfg = write_config(dir.path(), "p.toml", &text);
    let out = dir.path().join("run");
    let o = quenchlab(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let summary: RunSummary = serde_json::from_slice(&fs::read(out.join(SUMMARY)).unwrap()).unwrap();
    let support = summary.verification.get("support_containment").unwrap();
    assert!(support.passed);
    assert!(support.details["max_radius"] <= summary.bounds.support_radius_m0.unwrap());
}

#[test]
fn nonexistence_reports_first_negative_time() {
    let dir = tempfile::tempdir().unwrap();
    let text = CANONICAL
        .replace(r#"{ kind = "zero" }"#, r#"{ kind = "constant", c = 0.1 }"#)
        .replace("peak = 1.0", "peak = 0.5")
        .replace("kind = \"quench\"", "kind = \"nonexistence\"");
    let cfg = write_config(dir.path(), "n.toml", &text);
    let out = dir.path().join("run");
    let o = quenchlab(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let summary: RunSummary = serde_json::from_slice(&fs::read(out.join(SUMMARY)).unwrap()).unwrap();
    let probe = &summary.diagnostics["probe"];
    let tq = probe["quench_time"].as_f64().unwrap();
    let tn = probe["first_negative_time"].as_f64().unwrap();
    assert!(tn > tq);
    assert!(probe["steps_after_quench"].as_u64().unwrap() <= 10);
}

fn sweep_rows(text: &str) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", text);
    let out = dir.path().join("sweep");
    let o = quenchlab(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    fs::read_to_string(out.join("sweep.csv")).unwrap().lines().map(String::from).collect()
}

#[test]
fn sweep_two_by_two_gives_four_rows() {
    let text = format!("{CANONICAL}\n[sweep]\nbeta = [0.3, 0.5]\npeak = [0.5, 1.0]\n");
    let rows = sweep_rows(&text);
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("p,beta,peak,status"));
    assert!(rows[1..].iter().all(|r| r.contains(",ok,")));
    let tq = |r: &str| r.split(',').nth(5).unwrap().parse::<f64>().unwrap();
    // larger data quench later at fixed (p, beta)
    assert!(tq(&rows[1]) <= tq(&rows[2]));
    assert!(tq(&rows[3]) <= tq(&rows[4]));
}

#[test]
fn empty_sweep_writes_header_only() {
    let text = format!("{CANONICAL}\n[sweep]\np = []\n");
    let rows = sweep_rows(&text);
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("p,beta,peak"));
}
