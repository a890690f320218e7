use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BS_MODEL: &str = r#"
[model]
kind = "hulley_mcwalter"
x0 = 100.0
s0 = 100.0
horizon = 1.0
mu_u = 0.10
mu_s = 0.08
r = 0.02
sigma_u = 0.30
sigma_s = 0.25
rho = 0.8
"#;

const MERTON_MODEL: &str = r#"
[model]
kind = "levy"
x0 = 100.0
s0 = 100.0
horizon = 1.0
drift = [0.03, 0.05]
sigma_x = 0.25
sigma_s = 0.20
correlation = 0.6
jumps = { intensity = 0.8, mean = [-0.05, -0.08], covariance = [[0.02, 0.01], [0.01, 0.03]] }
"#;

fn fshedge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fshedge")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(dir: &Path, command: &str, text: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir, text);
    let out = dir.join("out");
    let mut args = vec![command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (fshedge(&args), out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stock_claim_replicates_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{MERTON_MODEL}\n[[payoff.terms]]\nkind = \"stock\"\n[validation]\nn_paths = 5000\nn_steps = 20\ntests = [\"replication\", \"residual\"]\n"
    );
    let (o, out) = run(dir.path(), "check", &text, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["summary.json", "hedge_surface.csv", "sim_report.json", "checks.log"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = json(&out.join("sim_report.json"));
    assert!(report["max_abs_residual"].as_f64().unwrap() <= 1e-8);
    let summary = json(&out.join("summary.json"));
    assert!((summary["h0_fourier"].as_f64().unwrap() - 100.0).abs() < 1e-8);
    let log = std::fs::read_to_string(out.join("checks.log")).unwrap();
    assert!(log.contains("PASS replication"), "{log}");
}

#[test]
fn vanishing_structure_condition_exits_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[model]
kind = "levy"
x0 = 100.0
s0 = 100.0
horizon = 1.0
drift = [0.0, 0.05]
sigma_x = 0.2
sigma_s = 0.0
[[payoff.terms]]
kind = "call"
on = "x"
strike = 100.0
"#;
    let (o, out) = run(dir.path(), "price", text, &[]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(msg.contains("item 1") && msg.contains("structure condition"), "{msg}");
    assert!(!out.exists());
}

#[test]
fn unknown_keys_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BS_MODEL}\nstrikes = 3\n[[payoff.terms]]\nkind = \"call\"\nstrike = 100.0\n");
    let (o, out) = run(dir.path(), "price", &text, &[]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("strikes") && msg.contains("line"), "{msg}");
    assert!(!out.exists());
}

#[test]
fn pde_route_rejects_jumps() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("route = \"pde\"\n{MERTON_MODEL}\n[[payoff.terms]]\nkind = \"call\"\nstrike = 100.0\n");
    let (o, out) = run(dir.path(), "price", &text, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("route"));
    assert!(!out.exists());
}

#[test]
fn missing_config_exits_2() {
    assert_eq!(fshedge(&["price"]).status.code(), Some(2));
}

#[test]
fn trivial_claims_agree_across_routes() {
    for (kind, expect) in [("constant", 1.0), ("stock", 100.0)] {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "route = \"both\"\n{BS_MODEL}\n[[payoff.terms]]\nkind = \"{kind}\"\n[pde]\nnx = 61\nns = 61\n[compare]\nmc_paths = 2000\npoints = [[100.0, 100.0]]\n"
        );
        let (o, out) = run(dir.path(), "compare", &text, &[]);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", stderr(&o));
        let row = &json(&out.join("summary.json"))["compare"][0];
        assert!((row["y_fourier"].as_f64().unwrap() - expect).abs() < 1e-9 * expect, "{kind}: {row}");
        // central differences in log s: error within Δη²/6 relative, Δη = 12·0.25/60
        let d_eta: f64 = 12.0 * 0.25 / 60.0;
        let pde_tol = if kind == "constant" { 1e-12 } else { d_eta * d_eta / 6.0 };
        assert!((row["y_pde"].as_f64().unwrap() - expect).abs() <= pde_tol * expect, "{kind}: {row}");
        // the driftless S is sampled exactly; the constant has zero variance
        if kind == "constant" {
            assert_eq!(row["y_mc"].as_f64().unwrap(), 1.0);
        } else {
            let se = row["mc_stderr"].as_f64().unwrap();
            assert!((row["y_mc"].as_f64().unwrap() - 100.0).abs() < 3.0 * se);
        }
    }
}

#[test]
fn bundled_basis_risk_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/hulley_mcwalter.toml");
    let out = dir.path().join("out");
    let o = fshedge(&["check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = std::fs::read_to_string(out.join("checks.log")).unwrap();
    assert!(!log.contains("FAIL"), "{log}");
    assert!(log.contains("PASS routes at (100.0000, 100.0000)"), "{log}");
    let summary = json(&out.join("summary.json"));
    let (f, p) = (
        summary["h0_fourier"].as_f64().unwrap(),
        summary["pde"]["h0"].as_f64().unwrap(),
    );
    assert!((f - p).abs() <= 1e-2, "{f} {p}");
}

#[test]
fn reruns_are_byte_identical_modulo_timestamp() {
    let text = format!(
        "{MERTON_MODEL}\n[[payoff.terms]]\nkind = \"call\"\non = \"x\"\nstrike = 100.0\n[validation]\nn_paths = 4000\nn_steps = 25\nseed = 3\ntests = [\"residual\", \"martingale\", \"baselines\"]\n"
    );
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    for threads in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let (o, out) = run(dir.path(), "simulate", &text, &["--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        reports.push(std::fs::read(out.join("sim_report.json")).unwrap());
        let mut s = json(&out.join("summary.json"));
        s.as_object_mut().unwrap().remove("timestamp");
        summaries.push(s);
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BS_MODEL}\n[[payoff.terms]]\nkind = \"call\"\non = \"x\"\nstrike = 100.0\n[validation]\nn_paths = 2000\nn_steps = 10\nseed = 3\n"
    );
    let (o, out) = run(dir.path(), "simulate", &text, &["--seed", "41"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&out.join("sim_report.json"))["seed"].as_u64(), Some(41));
}

#[test]
fn failed_checks_exit_4_and_are_logged() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BS_MODEL}\n[[payoff.terms]]\nkind = \"call\"\non = \"x\"\nstrike = 100.0\n[validation]\nn_paths = 2000\nn_steps = 10\ntests = [\"orthogonality\"]\n[tolerances]\northogonality_corr = 1e-12\n"
    );
    let (o, out) = run(dir.path(), "check", &text, &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let log = std::fs::read_to_string(out.join("checks.log")).unwrap();
    assert!(log.contains("FAIL orthogonality"), "{log}");
}

#[test]
fn surface_and_pde_dumps_are_plot_ready() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BS_MODEL}\n[[payoff.terms]]\nkind = \"put\"\nstrike = 90.0\n[surface]\nt = [0.0, 0.5]\nx = [100.0]\ns = [80.0, 90.0, 100.0]\n[pde]\nnx = 41\nns = 41\nsnapshots = 3\n"
    );
    let (o, out) = run(dir.path(), "hedge-surface", &text, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("hedge_surface.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x,s,y,z"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);

    let (o, out) = run(dir.path(), "pde", &text, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("pde_solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 41 * 41);
}
