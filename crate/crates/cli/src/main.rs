//! `fbsde` — solver and verification pipeline for fully coupled
//! forward-backward SDEs with measurable coefficients.
//!
//! ```text
//! fbsde describe --problem heat
//! fbsde solve    --problem heat --moll-level 8 --out out/
//! fbsde simulate --problem heat --moll-level 8 --paths 2000 --seed 42 --out out/
//! fbsde verify   --problem sign-drift --check girsanov --moll-level 8
//! fbsde pipeline --problem sign-drift --levels 4,8,16,32 --checks all --out out/
//! fbsde pipeline --config run.cfg
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;

use fbsde::mollifier::mollify_set;
use fbsde::pde::{check_apriori, solve_decoupling_field};
use fbsde::simulate::{reconstruct_yz, simulate_forward, SimConfig};

use fbsde_cli::config::{resolve_config, CheckKind, RunConfig};
use fbsde_cli::pipeline::run_pipeline;
use fbsde_cli::text::{aligned, describe_problem};
use fbsde_cli::CliError;

const USAGE: &str = "usage: fbsde <describe|solve|simulate|verify|pipeline> [flags]

common flags:
  --problem NAME         built-in problem (heat, sign-drift, linear-ode, coupled-lip)
  --config FILE          key = value config file; flags override file keys
  --levels 4,8,16,32     mollification levels (pipeline, verify --check cauchy)
  --moll-level N         single level (solve, simulate, verify)
  --moll-quad-order Q    kernel quadrature order (default 16)
  --grid L,Nx,Nt         PDE box half-width, nodes per axis, time steps
  --deltas 0.2,0.1,...   terminal-layer offsets (strictly decreasing)
  --paths M --steps N --seed S --x0 0.0 --start 0.0
  --checks LIST          girsanov|residual|cauchy|sobolev|malliavin|all
  --out DIR              output directory (FBSDE_OUTPUT_ROOT prefixes relative paths)
  --jobs J               parallel levels in the pipeline (default 1)
";

fn parse_flags(args: &[String]) -> Result<BTreeMap<String, String>, CliError> {
    let mut flags = BTreeMap::new();
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        let Some(name) = arg.strip_prefix("--") else {
            return Err(CliError::Usage(format!(
                "unexpected argument '{arg}'\n{USAGE}"
            )));
        };
        if let Some((key, value)) = name.split_once('=') {
            flags.insert(key.to_string(), value.to_string());
            i += 1;
        } else {
            let value = args
                .get(i + 1)
                .ok_or_else(|| CliError::Usage(format!("flag --{name} needs a value")))?;
            flags.insert(name.to_string(), value.clone());
            i += 2;
        }
    }
    Ok(flags)
}

fn load_config(flags: &BTreeMap<String, String>) -> Result<RunConfig, CliError> {
    let file_text = match flags.get("config") {
        Some(path) => Some(
            fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config file '{path}': {e}")))?,
        ),
        None => None,
    };
    resolve_config(file_text.as_deref(), flags)
}

fn single_level(cfg: &RunConfig, flags: &BTreeMap<String, String>) -> Result<u32, CliError> {
    match flags.get("moll-level") {
        Some(s) => s
            .parse()
            .map_err(|_| CliError::Config(format!("bad --moll-level '{s}'"))),
        None => Ok(*cfg.levels.first().unwrap_or(&8)),
    }
}

fn cmd_describe(flags: &BTreeMap<String, String>) -> Result<(), CliError> {
    let cfg = load_config(flags)?;
    let problem = cfg.build_problem()?;
    print!("{}", describe_problem(&problem));
    Ok(())
}

fn cmd_solve(flags: &BTreeMap<String, String>) -> Result<(), CliError> {
    let cfg = load_config(flags)?;
    let level = single_level(&cfg, flags)?;
    let problem = cfg.build_problem()?;
    cfg.grid
        .validate(problem.spec.horizon)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mc = mollify_set(
        &problem.coeffs,
        &problem.spec,
        level,
        cfg.moll_quad_order,
        Some(cfg.grid.half_width),
    );
    let field = solve_decoupling_field(&mc, &problem.spec, &cfg.grid)?;
    let apriori = check_apriori(&field, &problem.spec, &cfg.grid, 2.0);
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(format!("field_{level}.csv"));
    let mut out = std::io::BufWriter::new(fs::File::create(&path)?);
    field.export_csv(&mut out)?;
    print!(
        "{}",
        aligned(&[
            ("level".into(), level.to_string()),
            ("sup |v|".into(), format!("{:.6e}", apriori.sup_v)),
            ("R bound".into(), format!("{:.6e}", apriori.r_bound)),
            (
                "holder alpha".into(),
                format!("{:.4}", apriori.holder_alpha)
            ),
            ("field csv".into(), path.display().to_string()),
        ])
    );
    if apriori.sup_v > problem.spec.r_bound * (1.0 + 1e-6) {
        return Err(CliError::Invariant(format!(
            "sup |v| = {} exceeds R (1+1e-6) = {}",
            apriori.sup_v,
            problem.spec.r_bound * (1.0 + 1e-6)
        )));
    }
    Ok(())
}

fn cmd_simulate(flags: &BTreeMap<String, String>) -> Result<(), CliError> {
    let cfg = load_config(flags)?;
    let level = single_level(&cfg, flags)?;
    let problem = cfg.build_problem()?;
    cfg.grid
        .validate(problem.spec.horizon)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mc = mollify_set(
        &problem.coeffs,
        &problem.spec,
        level,
        cfg.moll_quad_order,
        Some(cfg.grid.half_width),
    );
    let field = solve_decoupling_field(&mc, &problem.spec, &cfg.grid)?;
    let sim_cfg = SimConfig {
        paths: cfg.paths,
        steps: cfg.steps,
        seed: cfg.seed,
        x0: cfg.resolved_x0(problem.spec.d),
        start: cfg.start,
    };
    let mut ens = simulate_forward(&field, &mc, &problem.spec, &sim_cfg)?;
    reconstruct_yz(&mut ens, &field);
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(format!("ensemble_{level}.csv"));
    let mut out = std::io::BufWriter::new(fs::File::create(&path)?);
    ens.export_summary_csv(&mut out)?;
    print!(
        "{}",
        aligned(&[
            ("level".into(), level.to_string()),
            ("paths".into(), cfg.paths.to_string()),
            ("steps".into(), cfg.steps.to_string()),
            ("drift sup".into(), format!("{:.6e}", ens.drift_sup)),
            ("exit fraction".into(), format!("{:.4e}", ens.exit_fraction)),
            ("ensemble csv".into(), path.display().to_string()),
        ])
    );
    Ok(())
}

fn cmd_verify(flags: &BTreeMap<String, String>) -> Result<(), CliError> {
    let mut cfg = load_config(flags)?;
    // verify defaults to the requested checks only
    if let Some(s) = flags.get("check") {
        cfg.checks = CheckKind::parse(s)?;
    }
    let outcome = run_pipeline(&cfg)?;
    let mut rows: Vec<(String, String)> = Vec::new();
    rows.push(("problem".into(), cfg.problem_name().to_string()));
    rows.push(("levels".into(), format!("{:?}", cfg.levels)));
    for report in &outcome.reports {
        let n = report.level;
        rows.push((
            format!("[n={n}] sup|v| / R"),
            format!(
                "{:.4e} / {:.4e}",
                report.apriori.sup_v, report.apriori.r_bound
            ),
        ));
        if let Some(residuals) = &report.checks.residual {
            if let Some(first) = residuals.first() {
                rows.push((
                    format!("[n={n}] residual (δ={})", first.delta),
                    format!("{:.4e}", first.value),
                ));
            }
        }
        if let Some(mismatch) = report.checks.terminal_mismatch {
            rows.push((
                format!("[n={n}] terminal mismatch"),
                format!("{mismatch:.4e}"),
            ));
        }
        if let Some(g) = &report.checks.girsanov {
            rows.push((
                format!("[n={n}] girsanov max|z| / ESS"),
                format!("{:.2} / {:.0}", g.max_abs_z(), g.ess),
            ));
            if let Some(ks) = &g.ks {
                rows.push((
                    format!("[n={n}] girsanov KS / critical"),
                    format!("{:.4} / {:.4} ({})", ks.statistic, ks.critical, ks.pass),
                ));
            }
        }
        if let Some(s) = &report.checks.sobolev {
            rows.push((
                format!("[n={n}] weighted flow norm"),
                format!("{:.4e}", s.weighted_norm_x),
            ));
        }
        if let Some(m) = &report.checks.malliavin {
            if let Some(lvl) = m.per_level.first() {
                rows.push((format!("[n={n}] sup E|D X|²"), format!("{:.4e}", lvl.sup_x)));
            }
        }
    }
    for file in &outcome.files {
        if file.extension().and_then(|e| e.to_str()) == Some("json") {
            rows.push(("report".into(), file.display().to_string()));
        }
    }
    if let Some(pass) = outcome.convergence.cauchy_pass {
        rows.push(("cauchy pass".into(), pass.to_string()));
    }
    if let Some(dec) = outcome.convergence.terminal_decreasing {
        rows.push(("terminal decreasing".into(), dec.to_string()));
    }
    print!("{}", aligned(&rows));
    if !outcome.hard_failures.is_empty() {
        return Err(CliError::Invariant(outcome.hard_failures.join("; ")));
    }
    Ok(())
}

fn cmd_pipeline(flags: &BTreeMap<String, String>) -> Result<(), CliError> {
    let cfg = load_config(flags)?;
    let outcome = run_pipeline(&cfg)?;
    println!(
        "wrote {} files to {}",
        outcome.files.len(),
        cfg.out_dir.display()
    );
    if !outcome.hard_failures.is_empty() {
        return Err(CliError::Invariant(outcome.hard_failures.join("; ")));
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        return Err(CliError::Usage(USAGE.to_string()));
    };
    let flags = parse_flags(&args[1..])?;
    match command.as_str() {
        "describe" => cmd_describe(&flags),
        "solve" => cmd_solve(&flags),
        "simulate" => cmd_simulate(&flags),
        "verify" => cmd_verify(&flags),
        "pipeline" => cmd_pipeline(&flags),
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            Ok(())
        }
        other => Err(CliError::Usage(format!(
            "unknown command '{other}'\n{USAGE}"
        ))),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
