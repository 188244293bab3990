//! End-to-end checks of the `fbsde` binary: exit codes, artifact sets,
//! schema validity of the emitted JSON and determinism of the CSVs.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fbsde"))
}

fn tmp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("fbsde-cli-test-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn smoke_pipeline_writes_expected_files() {
    let out = tmp_dir("smoke");
    let status = bin()
        .args([
            "pipeline",
            "--problem",
            "heat",
            "--levels",
            "4,8",
            "--checks",
            "residual",
            "--grid",
            "6,101,50",
            "--paths",
            "200",
            "--steps",
            "32",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "field_4.csv",
        "field_8.csv",
        "ensemble_4.csv",
        "ensemble_8.csv",
        "report_4.json",
        "report_8.json",
        "convergence.json",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
}

#[test]
fn reports_validate_against_shipped_schema() {
    let out = tmp_dir("schema");
    let status = bin()
        .args([
            "pipeline",
            "--problem",
            "linear-ode",
            "--levels",
            "4,8",
            "--checks",
            "all",
            "--grid",
            "4,41,40",
            "--paths",
            "200",
            "--steps",
            "32",
            "--jobs",
            "2",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["report_4.json", "report_8.json"] {
        let value: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join(name)).unwrap()).unwrap();
        fbsde_cli::report::validate_report_json(&value).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("convergence.json")).unwrap()).unwrap();
    fbsde_cli::report::validate_convergence_json(&value).unwrap();
}

#[test]
fn malformed_config_exits_2_naming_the_key() {
    let dir = tmp_dir("badcfg");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "levels = 4 8\nseed = 1\n").unwrap(); // no problem key
    let output = bin()
        .args(["pipeline", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("problem"), "stderr: {stderr}");
}

#[test]
fn unknown_problem_exits_2_listing_catalog() {
    let output = bin()
        .args(["describe", "--problem", "warp"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("heat") && stderr.contains("sign-drift"));
}

#[test]
fn describe_prints_constants_and_bound() {
    let output = bin()
        .args(["describe", "--problem", "linear-ode"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("R = k3·exp(T·k2)"));
    assert!(stdout.contains("2.718281828459045"));
}

#[test]
fn custom_problem_config_runs() {
    let dir = tmp_dir("custom");
    let cfg = dir.join("run.cfg");
    fs::write(
        &cfg,
        "problem = custom\n\
         name = step-drift\n\
         d = 1\nl = 1\nhorizon = 1.0\nsigma = 1.0\nlambda = 1.0\n\
         k1 = 1.0\nk3 = 0.5\nflag_b1 = true\n\
         b.family = piecewise\nb.arg = x1\nb.breaks = 0.0\nb.values = -0.5 0.5\n\
         g.family = zero\n\
         h.family = piecewise\nh.arg = x1\nh.breaks = 0.0\nh.values = -0.5 0.5\n\
         levels = 4 8\nchecks = residual\npaths = 100\nsteps = 16\n\
         grid.half_width = 4\ngrid.nx = 41\ngrid.nt = 20\n",
    )
    .unwrap();
    let out = dir.join("out");
    let status = bin()
        .args(["pipeline", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report_4.json")).unwrap()).unwrap();
    assert_eq!(report["problem"], "step-drift");
    assert_eq!(report["invariants"]["r_bound_ok"], true);
}

#[test]
fn solve_and_simulate_subcommands() {
    let out = tmp_dir("subcmds");
    let status = bin()
        .args([
            "solve",
            "--problem",
            "heat",
            "--moll-level",
            "8",
            "--grid",
            "4,41,20",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("field_8.csv").exists());
    let first = fs::read_to_string(out.join("field_8.csv")).unwrap();
    assert!(first.starts_with("t,x1,v1,w11\n"));

    let status = bin()
        .args([
            "simulate",
            "--problem",
            "heat",
            "--moll-level",
            "8",
            "--grid",
            "4,41,20",
            "--paths",
            "50",
            "--steps",
            "16",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("ensemble_8.csv").exists());
}

#[test]
fn output_root_env_prefixes_relative_out() {
    let root = tmp_dir("envroot");
    let status = bin()
        .args([
            "solve",
            "--problem",
            "heat",
            "--moll-level",
            "4",
            "--grid",
            "4,41,20",
            "--out",
            "nested/run",
        ])
        .env("FBSDE_OUTPUT_ROOT", &root)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(root.join("nested/run/field_4.csv").exists());
}

#[test]
fn verify_subcommand_reports_cauchy() {
    let out = tmp_dir("verify");
    let output = bin()
        .args([
            "verify",
            "--problem",
            "linear-ode",
            "--check",
            "cauchy",
            "--levels",
            "8,16",
            "--grid",
            "4,41,40",
            "--paths",
            "100",
            "--steps",
            "32",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("cauchy pass"), "stdout: {stdout}");
}

#[test]
fn sign_drift_all_checks_reports_cauchy_pass() {
    // the flagship run: all checks over a level ladder must report that the
    // finest gap beats the coarsest on every metric
    let out = tmp_dir("flagship");
    let output = bin()
        .args([
            "pipeline",
            "--problem",
            "sign-drift",
            "--levels",
            "4,8,16,32",
            "--checks",
            "all",
            "--grid",
            "6,201,100",
            "--paths",
            "2000",
            "--steps",
            "128",
            "--seed",
            "7",
            "--jobs",
            "2",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let conv: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(conv["cauchy_pass"], true, "convergence: {conv}");
    assert_eq!(conv["terminal_decreasing"], true);
    let pairs = conv["cauchy"]["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 3);
    for metric in ["v_sup_gap", "w_sup_gap", "y_h2_gap", "z_stoch_int_gap"] {
        let first = pairs[0][metric].as_f64().unwrap();
        let last = pairs[2][metric].as_f64().unwrap();
        assert!(last < first, "{metric}: {last} !< {first}");
    }
}

/// Two identical runs must produce bitwise-identical CSVs.
fn assert_identical_csvs(a: &Path, b: &Path) {
    let mut names: Vec<String> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let fa = fs::read(a.join(&name)).unwrap();
        let fb = fs::read(b.join(&name)).unwrap();
        assert!(fa == fb, "{name} differs between identical runs");
    }
}

#[test]
fn csv_outputs_are_deterministic() {
    let out1 = tmp_dir("det1");
    let out2 = tmp_dir("det2");
    for out in [&out1, &out2] {
        let status = bin()
            .args([
                "pipeline",
                "--problem",
                "coupled-lip",
                "--levels",
                "4,8",
                "--checks",
                "residual",
                "--grid",
                "4,41,20",
                "--paths",
                "100",
                "--steps",
                "16",
                "--seed",
                "1234",
                "--jobs",
                "2",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_identical_csvs(&out1, &out2);
}
