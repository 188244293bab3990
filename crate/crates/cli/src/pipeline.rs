//! Pipeline orchestration: per mollification level, smooth the coefficients,
//! solve the decoupling field, run the a-priori diagnostics, simulate,
//! reconstruct `(Y, Z)`, run the requested checks and write the artifacts
//! (`field_<n>.csv`, `ensemble_<n>.csv`, `report_<n>.json`); then the
//! cross-level `convergence.json`.
//!
//! Levels run in parallel up to the `--jobs` limit; every file is per-level
//! disjoint and deterministic for a fixed config and seed. The run fails
//! (exit 1) iff a hard invariant breaks: the maximum-principle bound
//! `sup|v| ≤ R`, bitwise terminal exactness, or the weight-martingale
//! property of the Girsanov check.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use fbsde::coefficients::{validate_growth, Problem};
use fbsde::mollifier::{mollify_set, MollifiedCoefficients};
use fbsde::pde::{check_apriori, solve_decoupling_field, DecouplingField};
use fbsde::simulate::{
    compactness_statistics, reconstruct_yz, simulate_forward, simulate_malliavin,
    MalliavinEnsemble, PathEnsemble, SimConfig,
};
use fbsde::verify::regularity::{malliavin_regularity_summary, RegLevel, RegularityFlags};
use fbsde::verify::{
    bsde_residual, cauchy_convergence, girsanov_law_check, sobolev_flow_check, terminal_match,
    CauchyLevel,
};

use crate::config::{CheckKind, RunConfig};
use crate::report::{
    config_hash, ChecksReport, ConvergenceFile, InvariantFlags, LevelReport, LevelValue,
    ResidualEntry, SimSummary, SCHEMA_VERSION,
};
use crate::CliError;

/// Fraction of path-time points allowed outside the box before a warning.
const EXIT_WARN_FRACTION: f64 = 0.01;

pub struct LevelOutcome {
    pub level: u32,
    pub report: LevelReport,
    pub field: DecouplingField,
    pub ens: PathEnsemble,
    pub mall: Option<MalliavinEnsemble>,
}

pub struct PipelineOutcome {
    pub files: Vec<PathBuf>,
    pub hard_failures: Vec<String>,
    pub reports: Vec<LevelReport>,
    pub convergence: ConvergenceFile,
}

fn run_level(
    cfg: &RunConfig,
    problem: &Problem,
    level: u32,
    hash: &str,
) -> Result<LevelOutcome, CliError> {
    let spec = &problem.spec;
    let mc: MollifiedCoefficients = mollify_set(
        &problem.coeffs,
        spec,
        level,
        cfg.moll_quad_order,
        Some(cfg.grid.half_width),
    );
    let field = solve_decoupling_field(&mc, spec, &cfg.grid)?;
    let apriori = check_apriori(&field, spec, &cfg.grid, 2.0);

    // hard invariant: maximum principle
    let r_bound_ok = apriori.sup_v <= spec.r_bound * (1.0 + 1e-6);
    // hard invariant: terminal layer equals h_n bitwise
    let terminal_exact_ok = {
        let mut coord = vec![0.0; spec.d];
        let mut hv = vec![0.0; spec.l];
        let nt = cfg.grid.nt;
        let mut ok = true;
        for j in 0..field.node_count() {
            field.node_coord(j, &mut coord);
            (mc.h_n)(&coord, &mut hv);
            for (c, value) in hv.iter().enumerate() {
                if field.v[[nt, j, c]].to_bits() != value.to_bits() {
                    ok = false;
                }
            }
        }
        ok
    };

    let validation = validate_growth(&mc.as_coefficient_set(), spec, 2000, cfg.seed);

    let x0 = cfg.resolved_x0(spec.d);
    let sim_cfg = SimConfig {
        paths: cfg.paths,
        steps: cfg.steps,
        seed: cfg.seed,
        x0: x0.clone(),
        start: cfg.start,
    };
    let mut ens = simulate_forward(&field, &mc, spec, &sim_cfg)?;
    reconstruct_yz(&mut ens, &field);
    let exit_warning = ens.exit_fraction > EXIT_WARN_FRACTION;
    if exit_warning {
        eprintln!(
            "warning: level {level}: {:.2}% of path-time points left the grid box",
            100.0 * ens.exit_fraction
        );
    }

    let mut checks = ChecksReport {
        residual: None,
        terminal_mismatch: None,
        girsanov: None,
        sobolev: None,
        malliavin: None,
    };
    let mut weight_martingale_ok = None;

    if cfg.checks.contains(&CheckKind::Residual) {
        let g = &mc.g_n;
        let mut entries = vec![ResidualEntry {
            delta: 0.0,
            value: bsde_residual(&ens, |t, x, y, z, out: &mut [f64]| g(t, x, y, z, out), 0.0),
        }];
        for &delta in &cfg.grid.deltas {
            entries.push(ResidualEntry {
                delta,
                value: bsde_residual(
                    &ens,
                    |t, x, y, z, out: &mut [f64]| g(t, x, y, z, out),
                    delta,
                ),
            });
        }
        checks.residual = Some(entries);
        // against the problem's own terminal: for a Lipschitz h this is pure
        // interpolation error, for a measurable one it decreases in the level
        let h = &problem.coeffs.h;
        checks.terminal_mismatch =
            Some(terminal_match(&ens, |x: &[f64], out: &mut [f64]| h(x, out)));
    }

    if cfg.checks.contains(&CheckKind::Girsanov) {
        let report = girsanov_law_check(
            &mc,
            &field,
            spec,
            &x0,
            spec.horizon / 2.0,
            cfg.paths,
            cfg.steps,
            cfg.seed,
        )?;
        weight_martingale_ok = Some(report.martingale_ok);
        checks.girsanov = Some(report);
    }

    if cfg.checks.contains(&CheckKind::Sobolev) {
        let span = (cfg.grid.half_width / 3.0).min(2.0);
        let points: Vec<Vec<f64>> = if spec.d == 1 {
            (0..9)
                .map(|i| vec![-span + i as f64 * span / 4.0])
                .collect()
        } else {
            let mut pts = Vec::new();
            for i in 0..5 {
                for j in 0..5 {
                    pts.push(vec![
                        -span + i as f64 * span / 2.0,
                        -span + j as f64 * span / 2.0,
                    ]);
                }
            }
            pts
        };
        let cell = (span / 4.0).powi(spec.d as i32);
        let bump = (2.0 * cfg.grid.dx()).max(0.05);
        let report = sobolev_flow_check(
            &mc,
            &field,
            spec,
            cfg.start,
            spec.horizon / 2.0,
            &points,
            cell,
            bump,
            (cfg.paths / 4).max(64),
            cfg.steps.min(128),
            cfg.seed,
            &|x: &[f64]| (-x.iter().map(|c| c * c).sum::<f64>()).exp(),
            "exp(-|x|^2)",
            2.0,
            (spec.l == 1).then_some(span),
        )?;
        checks.sobolev = Some(report);
    }

    let mall = if cfg.checks.contains(&CheckKind::Malliavin) {
        let t = spec.horizon;
        let s_grid: Vec<f64> = (0..5).map(|i| cfg.start + i as f64 * t / 10.0).collect();
        let mall_paths = (cfg.paths / 4).clamp(64, 4000);
        let mall_cfg = SimConfig {
            paths: mall_paths,
            steps: cfg.steps.min(128),
            seed: cfg.seed,
            x0: x0.clone(),
            start: cfg.start,
        };
        let mut mall_ens = simulate_forward(&field, &mc, spec, &mall_cfg)?;
        reconstruct_yz(&mut mall_ens, &field);
        let mall = simulate_malliavin(&mall_ens, &mc, &field, spec, &s_grid)?;
        let flags = RegularityFlags {
            b1: problem.coeffs.flag_b1,
            b2: problem.coeffs.flag_b2,
            g_no_z: problem.coeffs.flag_g_no_z,
            g_no_x: problem.coeffs.flag_g_no_x,
        };
        let delta = cfg.grid.deltas.last().copied().unwrap_or(0.1);
        let summary = malliavin_regularity_summary(
            &[RegLevel {
                level,
                mall: &mall,
                ens: &mall_ens,
                field: &field,
            }],
            flags,
            delta,
        );
        checks.malliavin = Some(summary);
        Some(mall)
    } else {
        None
    };

    let report = LevelReport {
        schema_version: SCHEMA_VERSION,
        config_hash: hash.to_string(),
        problem: problem.name.clone(),
        level,
        grid: cfg.grid.clone(),
        sim: SimSummary {
            paths: cfg.paths,
            steps: cfg.steps,
            seed: cfg.seed,
            x0,
            start: cfg.start,
        },
        moll_quad_order: cfg.moll_quad_order,
        apriori,
        validation,
        invariants: InvariantFlags {
            r_bound_ok,
            terminal_exact_ok,
            weight_martingale_ok,
        },
        exit_fraction: ens.exit_fraction,
        exit_warning,
        drift_sup: ens.drift_sup,
        checks,
    };

    Ok(LevelOutcome {
        level,
        report,
        field,
        ens,
        mall,
    })
}

/// Runs the full pipeline and writes all artifacts under `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome, CliError> {
    let problem = cfg.build_problem()?;
    cfg.grid
        .validate(problem.spec.horizon)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let hash = config_hash(&cfg.canonical_string());
    fs::create_dir_all(&cfg.out_dir)?;

    // levels in parallel up to --jobs, results slotted by index
    let outcomes: Vec<Option<Result<LevelOutcome, CliError>>> = {
        let slots: Mutex<Vec<Option<Result<LevelOutcome, CliError>>>> =
            Mutex::new((0..cfg.levels.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = cfg.jobs.min(cfg.levels.len()).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::SeqCst);
                    if idx >= cfg.levels.len() {
                        break;
                    }
                    let result = run_level(cfg, &problem, cfg.levels[idx], &hash);
                    slots.lock().unwrap()[idx] = Some(result);
                });
            }
        });
        slots.into_inner().unwrap()
    };

    let mut levels: Vec<LevelOutcome> = Vec::with_capacity(cfg.levels.len());
    for slot in outcomes {
        levels.push(slot.expect("worker filled every slot")?);
    }

    let mut files = Vec::new();
    let mut hard_failures = Vec::new();
    for outcome in &levels {
        let n = outcome.level;
        let field_path = cfg.out_dir.join(format!("field_{n}.csv"));
        let mut fh = std::io::BufWriter::new(fs::File::create(&field_path)?);
        outcome.field.export_csv(&mut fh)?;
        fh.flush()?;
        files.push(field_path);

        let ens_path = cfg.out_dir.join(format!("ensemble_{n}.csv"));
        let mut eh = std::io::BufWriter::new(fs::File::create(&ens_path)?);
        outcome.ens.export_summary_csv(&mut eh)?;
        eh.flush()?;
        files.push(ens_path);

        let report_path = cfg.out_dir.join(format!("report_{n}.json"));
        let json = serde_json::to_string_pretty(&outcome.report).map_err(CliError::Json)?;
        fs::write(&report_path, json)?;
        files.push(report_path);

        for failure in outcome.report.invariants.hard_failures() {
            hard_failures.push(format!("level {n}: {failure}"));
        }
    }

    // cross-level convergence report
    let delta = cfg.grid.deltas.last().copied().unwrap_or(0.05);
    let t_list = vec![problem.spec.horizon / 2.0];
    let cauchy = if cfg.levels.len() >= 2 && cfg.checks.contains(&CheckKind::Cauchy) {
        let cl: Vec<CauchyLevel> = levels
            .iter()
            .map(|o| CauchyLevel {
                level: o.level,
                field: &o.field,
                ens: &o.ens,
            })
            .collect();
        Some(cauchy_convergence(&cl, delta, &t_list)?)
    } else {
        None
    };
    let cauchy_pass = cauchy.as_ref().map(|c| c.last_pair_tighter_than_first());

    let terminal_mismatch_per_level: Vec<LevelValue> = levels
        .iter()
        .filter_map(|o| {
            o.report.checks.terminal_mismatch.map(|value| LevelValue {
                level: o.level,
                value,
            })
        })
        .collect();
    let terminal_decreasing = (terminal_mismatch_per_level.len() >= 2).then(|| {
        let first = terminal_mismatch_per_level.first().unwrap().value;
        let last = terminal_mismatch_per_level.last().unwrap().value;
        last <= first
    });

    let mall_levels: Vec<(u32, &MalliavinEnsemble)> = levels
        .iter()
        .filter_map(|o| o.mall.as_ref().map(|m| (o.level, m)))
        .collect();
    let compactness = if mall_levels.len() >= 2 {
        compactness_statistics(&mall_levels).ok()
    } else {
        None
    };
    let malliavin_sup_ratio = {
        let sups: Vec<f64> = levels
            .iter()
            .filter_map(|o| {
                o.report
                    .checks
                    .malliavin
                    .as_ref()
                    .and_then(|m| m.per_level.first())
                    .map(|p| p.sup_x)
            })
            .collect();
        if sups.len() >= 2 {
            let max = sups.iter().cloned().fold(f64::MIN, f64::max);
            let min = sups.iter().cloned().fold(f64::MAX, f64::min);
            (min > 0.0).then(|| max / min)
        } else {
            None
        }
    };

    let convergence = ConvergenceFile {
        schema_version: SCHEMA_VERSION,
        config_hash: hash.clone(),
        problem: problem.name.clone(),
        levels: cfg.levels.clone(),
        delta,
        t_list,
        cauchy,
        cauchy_pass,
        terminal_mismatch_per_level,
        terminal_decreasing,
        compactness,
        malliavin_sup_ratio,
    };
    let conv_path = cfg.out_dir.join("convergence.json");
    fs::write(
        &conv_path,
        serde_json::to_string_pretty(&convergence).map_err(CliError::Json)?,
    )?;
    files.push(conv_path);

    Ok(PipelineOutcome {
        files,
        hard_failures,
        reports: levels.into_iter().map(|o| o.report).collect(),
        convergence,
    })
}
