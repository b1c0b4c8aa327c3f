use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

const PHASE: &str = r#"task = "dtc-phase-diagram"
[model]
delta = 10.0
drive = 2000.0
kappa = 15.0
n_phonon = 200
g = 2e-3
[integration]
rtol = 1e-8
atol = 1e-8
[schedule]
delta1 = 40.0
t1 = "auto"
t2 = 200.0
n_periods = 10
[phase_diagram]
axes = "detunings"
axis1 = { start = 27.0, stop = 90.0, count = 3 }
axis2 = { start = 1.5, stop = 22.5, count = 3 }
"#;

const STEADY: &str = r#"task = "steady"
[model]
delta = 20.0
drive = 2000.0
kappa = 10.0
n_phonon = 200
g_over_gc = 1.2
"#;

fn optodtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optodtc"))
        .args(args)
        .env_remove("OPTODTC_WORKERS")
        .output()
        .unwrap()
}

fn with_config(task: &str, toml: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = out.join("config.toml");
    std::fs::write(&cfg, toml).unwrap();
    let mut args = vec![task, "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    optodtc(&args)
}

#[test]
fn informational_tasks() {
    let o = optodtc(&["schema"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("dtc-run"));
    let o = optodtc(&["presets"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 11);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(optodtc(&["no-such-task"]).status.code(), Some(2));
    assert_eq!(optodtc(&["steady"]).status.code(), Some(2));
    assert_eq!(optodtc(&["steady", "--preset", "fig99"]).status.code(), Some(2));
    assert_eq!(optodtc(&["steady", "--preset", "fig4"]).status.code(), Some(2));
    let o = with_config("dtc-run", STEADY, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let bad = STEADY.replace("kappa = 10.0", "kappa = -1.0");
    assert_eq!(with_config("steady", &bad, dir.path(), &[]).status.code(), Some(2));
    let o = with_config("steady", STEADY, dir.path(), &["--workers", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn steady_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config("steady", STEADY, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("g_c = "));
    let csv = std::fs::read_to_string(dir.path().join("steady.csv")).unwrap();
    assert!(csv.lines().count() >= 2);
    let meta: String = std::fs::read_to_string(dir.path().join("metadata.json")).unwrap();
    assert!(meta.contains("\"task\": \"steady\"") || meta.contains("\"task\":\"steady\""));
}

#[test]
fn dry_run_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config("steady", STEADY, dir.path(), &["--dry-run"]);
    assert_eq!(o.status.code(), Some(0));
    let resolved = String::from_utf8(o.stdout).unwrap();
    let again = tempfile::tempdir().unwrap();
    let o = with_config("steady", &resolved, again.path(), &["--dry-run"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), resolved);
    assert!(!dir.path().join("steady.csv").exists());
}

#[test]
fn phase_diagram_is_independent_of_workers() {
    let one = tempfile::tempdir().unwrap();
    let three = tempfile::tempdir().unwrap();
    assert_eq!(with_config("dtc-phase-diagram", PHASE, one.path(), &["--workers", "1"]).status.code(), Some(0));
    assert_eq!(with_config("dtc-phase-diagram", PHASE, three.path(), &["--workers", "3"]).status.code(), Some(0));
    let a = std::fs::read(one.path().join("phase_diagram.csv")).unwrap();
    let b = std::fs::read(three.path().join("phase_diagram.csv")).unwrap();
    assert_eq!(a, b);
    // A point without a flip is reported in its row; the rest still run.
    let text = String::from_utf8(a).unwrap();
    let rows: Vec<_> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",ok")).count(), 8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unknown_keys_are_rejected(key in "[a-z][a-z_]{0,11}", section in 0usize..3) {
        let known = ["task", "model", "delta", "drive", "kappa", "n_phonon", "g", "g_over_gc",
            "omega_m", "gamma", "g1_over_g", "g2_over_g", "integration", "output", "workers"];
        prop_assume!(!known.contains(&key.as_str()));
        let toml = match section {
            0 => STEADY.replacen('\n', &format!("\n{key} = 1\n"), 1),
            1 => format!("{STEADY}{key} = 1\n"),
            _ => format!("{STEADY}[{key}]\nx = 1\n"),
        };
        let dir = tempfile::tempdir().unwrap();
        let o = with_config("steady", &toml, dir.path(), &["--dry-run"]);
        prop_assert_eq!(o.status.code(), Some(2), "{}", toml);
    }
}
