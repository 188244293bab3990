//! Forward simulation: Euler–Maruyama for the decoupled SDE
//!
//! ```text
//! X_{i+1} = X_i + b̃_n(t_i, X_i) Δt + σ ΔW_i,
//! b̃_n(t, x) = b_n(t, x, v_n(t, x), w_n(t, x) σ),
//! ```
//!
//! reconstruction of the backward pair through the decoupling identities
//! `Y = v_n(t, X_t)`, `Z = w_n(t, X_t) σ`, and pathwise integration of the
//! first-variation equation for the Malliavin derivative
//!
//! ```text
//! D_s X_{i+1} = D_s X_i + ∂_x b̃_n(t_i, X_i) · D_s X_i Δt,   D_s X_s = σ.
//! ```
//!
//! Noise is counter-based (see [`crate::rng`]): ensembles are bitwise
//! reproducible for a fixed seed regardless of worker count, and experiments
//! at different mollification levels couple through common random numbers.
//! Paths leaving the PDE box use constant extrapolation of `v, w`; the exit
//! fraction is recorded.

use ndarray::{Array3, Array4, Array5};
use rayon::prelude::*;
use thiserror::Error;

use crate::coefficients::GrowthSpec;
use crate::linalg::norm;
use crate::mollifier::MollifiedCoefficients;
use crate::pde::DecouplingField;
use crate::rng::standard_normal;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("field/problem mismatch: {0}")]
    FieldMismatch(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("non-finite drift at t = {t}, x = {x:?}")]
    NonFiniteDrift { t: f64, x: Vec<f64> },
    #[error("drift bound violated: |b̃| = {value} exceeds {bound} at t = {t}")]
    DriftBoundExceeded { value: f64, bound: f64, t: f64 },
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub start: f64,
}

impl SimConfig {
    pub fn new(paths: usize, steps: usize, seed: u64, x0: Vec<f64>) -> Self {
        Self {
            paths,
            steps,
            seed,
            x0,
            start: 0.0,
        }
    }
}

/// Forward paths with their Brownian increments and the reconstructed
/// backward pair.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub d: usize,
    pub l: usize,
    pub start: f64,
    pub horizon: f64,
    pub seed: u64,
    pub x0: Vec<f64>,
    /// `steps + 1` times on `[start, horizon]`.
    pub times: Vec<f64>,
    /// `[paths, steps, d]`.
    pub dw: Array3<f64>,
    /// `[paths, steps+1, d]`.
    pub x: Array3<f64>,
    /// `[paths, steps+1, l]`; filled by [`reconstruct_yz`].
    pub y: Array3<f64>,
    /// `[paths, steps+1, l, d]`; filled by [`reconstruct_yz`].
    pub z: Array4<f64>,
    /// Fraction of `(path, time)` points outside the PDE box.
    pub exit_fraction: f64,
    /// Per-time exit fractions.
    pub exit_at: Vec<f64>,
    /// Largest observed `|b̃_n|`.
    pub drift_sup: f64,
    pub box_halfwidth: f64,
}

impl PathEnsemble {
    pub fn paths(&self) -> usize {
        self.x.shape()[0]
    }

    pub fn steps(&self) -> usize {
        self.x.shape()[1] - 1
    }

    pub fn dt(&self) -> f64 {
        (self.horizon - self.start) / self.steps() as f64
    }

    /// Index of the last time ≤ `t` (+ tolerance).
    pub fn index_at(&self, t: f64) -> usize {
        let mut idx = 0;
        for (i, &ti) in self.times.iter().enumerate() {
            if ti <= t + 1e-12 {
                idx = i;
            }
        }
        idx
    }

    /// Per-time summary CSV: mean/variance of `X`, `Y`, `Z` plus exit fraction.
    pub fn export_summary_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "t")?;
        for k in 0..self.d {
            write!(out, ",mean_x{0},var_x{0}", k + 1)?;
        }
        for c in 0..self.l {
            write!(out, ",mean_y{0},var_y{0}", c + 1)?;
        }
        for c in 0..self.l {
            for k in 0..self.d {
                write!(out, ",mean_z{c1}{k1},var_z{c1}{k1}", c1 = c + 1, k1 = k + 1)?;
            }
        }
        writeln!(out, ",exit_fraction")?;
        let m = self.paths() as f64;
        for (i, &t) in self.times.iter().enumerate() {
            write!(out, "{t:.17e}")?;
            let stats = |vals: &mut dyn Iterator<Item = f64>| -> (f64, f64) {
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for v in vals {
                    sum += v;
                    sumsq += v * v;
                }
                let mean = sum / m;
                (mean, (sumsq / m - mean * mean).max(0.0))
            };
            for k in 0..self.d {
                let (mean, var) = stats(&mut (0..self.paths()).map(|p| self.x[[p, i, k]]));
                write!(out, ",{mean:.17e},{var:.17e}")?;
            }
            for c in 0..self.l {
                let (mean, var) = stats(&mut (0..self.paths()).map(|p| self.y[[p, i, c]]));
                write!(out, ",{mean:.17e},{var:.17e}")?;
            }
            for c in 0..self.l {
                for k in 0..self.d {
                    let (mean, var) = stats(&mut (0..self.paths()).map(|p| self.z[[p, i, c, k]]));
                    write!(out, ",{mean:.17e},{var:.17e}")?;
                }
            }
            writeln!(out, ",{:.17e}", self.exit_at[i])?;
        }
        Ok(())
    }
}

/// Evaluator for the decoupled drift `b̃_n` with the uniform bound check.
///
/// The bound is `k₁(1 + R)` when the coefficients are bounded in `z`, and
/// `k₁(1 + R + ‖w‖_∞ ‖σ‖)` under a Lipschitz terminal; every evaluation is
/// asserted against it.
pub struct DriftEvaluator<'a> {
    mc: &'a MollifiedCoefficients,
    field: &'a DecouplingField,
    bound: f64,
}

/// Scratch buffers for one drift evaluation; one per worker.
pub struct DriftScratch {
    y: Vec<f64>,
    w: Vec<f64>,
    z: Vec<f64>,
}

impl<'a> DriftEvaluator<'a> {
    pub fn new(
        mc: &'a MollifiedCoefficients,
        field: &'a DecouplingField,
        spec: &GrowthSpec,
    ) -> Self {
        let bound = if mc.flag_b1 {
            spec.k1 * (1.0 + spec.r_bound)
        } else {
            spec.k1 * (1.0 + spec.r_bound + field.sup_w() * spec.sigma.spectral_norm())
        };
        Self { mc, field, bound }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn scratch(&self) -> DriftScratch {
        let (d, l) = (self.field.d, self.field.l);
        DriftScratch {
            y: vec![0.0; l],
            w: vec![0.0; l * d],
            z: vec![0.0; l * d],
        }
    }

    /// Evaluates `b̃_n(t, x)` into `out`; returns `|b̃_n|`.
    pub fn eval(
        &self,
        t: f64,
        x: &[f64],
        scratch: &mut DriftScratch,
        out: &mut [f64],
    ) -> Result<f64, SimError> {
        let (d, l) = (self.field.d, self.field.l);
        self.field.value(t, x, &mut scratch.y);
        self.field.gradient_value(t, x, &mut scratch.w);
        for c in 0..l {
            for kp in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += scratch.w[c * d + k] * self.field.sigma.at(k, kp);
                }
                scratch.z[c * d + kp] = s;
            }
        }
        (self.mc.b_n)(t, x, &scratch.y, &scratch.z, out);
        let value = norm(out);
        if !value.is_finite() {
            return Err(SimError::NonFiniteDrift { t, x: x.to_vec() });
        }
        if value > self.bound * (1.0 + 1e-9) + 1e-12 {
            return Err(SimError::DriftBoundExceeded {
                value,
                bound: self.bound,
                t,
            });
        }
        Ok(value)
    }
}

struct PathResult {
    dw: Vec<f64>,
    x: Vec<f64>,
    drift_sup: f64,
}

/// Euler–Maruyama simulation of the forward SDE under the level-`n` drift.
///
/// Reproducible: identical `(seed, paths, steps)` give bitwise-identical
/// ensembles; growing `paths` leaves earlier paths untouched.
pub fn simulate_forward(
    field: &DecouplingField,
    mc: &MollifiedCoefficients,
    spec: &GrowthSpec,
    cfg: &SimConfig,
) -> Result<PathEnsemble, SimError> {
    if field.d != spec.d || field.l != spec.l {
        return Err(SimError::FieldMismatch(format!(
            "field dims ({}, {}) vs problem dims ({}, {})",
            field.d, field.l, spec.d, spec.l
        )));
    }
    if (field.horizon - spec.horizon).abs() > 1e-12 {
        return Err(SimError::FieldMismatch(
            "field horizon differs from problem horizon".into(),
        ));
    }
    if cfg.paths == 0 || cfg.steps == 0 {
        return Err(SimError::InvalidConfig(
            "paths and steps must be ≥ 1".into(),
        ));
    }
    if cfg.x0.len() != spec.d {
        return Err(SimError::InvalidConfig(format!(
            "x0 has {} components, problem needs {}",
            cfg.x0.len(),
            spec.d
        )));
    }
    if !(0.0..spec.horizon).contains(&cfg.start) {
        return Err(SimError::InvalidConfig(
            "start time must lie in [0, T)".into(),
        ));
    }

    let (d, l) = (spec.d, spec.l);
    let n = cfg.steps;
    let m = cfg.paths;
    let dt = (spec.horizon - cfg.start) / n as f64;
    let sqrt_dt = dt.sqrt();
    let times: Vec<f64> = (0..=n).map(|i| cfg.start + i as f64 * dt).collect();
    let drift = DriftEvaluator::new(mc, field, spec);

    let results: Vec<Result<PathResult, SimError>> = (0..m)
        .into_par_iter()
        .map(|path| {
            let mut scratch = drift.scratch();
            let mut dw = vec![0.0; n * d];
            let mut xs = vec![0.0; (n + 1) * d];
            let mut bvec = vec![0.0; d];
            let mut noise = vec![0.0; d];
            xs[..d].copy_from_slice(&cfg.x0);
            let mut sup = 0.0f64;
            for i in 0..n {
                for k in 0..d {
                    dw[i * d + k] =
                        sqrt_dt * standard_normal(cfg.seed, path as u64, i as u64, k as u64);
                }
                let (head, tail) = xs.split_at_mut((i + 1) * d);
                let xi = &head[i * d..];
                let bnorm = drift.eval(times[i], xi, &mut scratch, &mut bvec)?;
                sup = sup.max(bnorm);
                field.sigma.apply(&dw[i * d..(i + 1) * d], &mut noise);
                for k in 0..d {
                    tail[k] = xi[k] + bvec[k] * dt + noise[k];
                }
            }
            Ok(PathResult {
                dw,
                x: xs,
                drift_sup: sup,
            })
        })
        .collect();

    let mut dw = Array3::zeros((m, n, d));
    let mut x = Array3::zeros((m, n + 1, d));
    let mut drift_sup = 0.0f64;
    for (path, res) in results.into_iter().enumerate() {
        let pr = res?;
        for i in 0..n {
            for k in 0..d {
                dw[[path, i, k]] = pr.dw[i * d + k];
            }
        }
        for i in 0..=n {
            for k in 0..d {
                x[[path, i, k]] = pr.x[i * d + k];
            }
        }
        drift_sup = drift_sup.max(pr.drift_sup);
    }

    // exit statistics against the PDE box
    let box_l = field.grid.half_width;
    let mut exit_at = vec![0.0; n + 1];
    for i in 0..=n {
        let mut count = 0usize;
        for p in 0..m {
            let outside = (0..d).any(|k| x[[p, i, k]].abs() > box_l);
            if outside {
                count += 1;
            }
        }
        exit_at[i] = count as f64 / m as f64;
    }
    let exit_fraction = exit_at.iter().sum::<f64>() / (n + 1) as f64;

    Ok(PathEnsemble {
        d,
        l,
        start: cfg.start,
        horizon: spec.horizon,
        seed: cfg.seed,
        x0: cfg.x0.clone(),
        times,
        dw,
        x,
        y: Array3::zeros((m, n + 1, l)),
        z: Array4::zeros((m, n + 1, l, d)),
        exit_fraction,
        exit_at,
        drift_sup,
        box_halfwidth: box_l,
    })
}

/// Fills `Y = v(t_i, X_i)` and `Z = w(t_i, X_i) σ` from the field.
/// Idempotent.
pub fn reconstruct_yz(ens: &mut PathEnsemble, field: &DecouplingField) {
    let (d, l) = (ens.d, ens.l);
    let m = ens.paths();
    let n = ens.steps();
    let mut yv = vec![0.0; l];
    let mut wv = vec![0.0; l * d];
    let mut xv = vec![0.0; d];
    for p in 0..m {
        for i in 0..=n {
            for k in 0..d {
                xv[k] = ens.x[[p, i, k]];
            }
            let t = ens.times[i];
            field.value(t, &xv, &mut yv);
            field.gradient_value(t, &xv, &mut wv);
            for c in 0..l {
                ens.y[[p, i, c]] = yv[c];
                for kp in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += wv[c * d + k] * field.sigma.at(k, kp);
                    }
                    ens.z[[p, i, c, kp]] = s;
                }
            }
        }
    }
}

/// Pathwise Malliavin derivatives `D_{s_j} X_{t_i}` on a sub-grid of
/// differentiation times.
#[derive(Debug, Clone)]
pub struct MalliavinEnsemble {
    pub d: usize,
    /// Differentiation times snapped onto the simulation grid.
    pub s_times: Vec<f64>,
    pub s_indices: Vec<usize>,
    /// `[paths, s_count, steps+1, d, d]`; zero for `t < s`, `σ` at `t = s`.
    pub derivative: Array5<f64>,
}

impl MalliavinEnsemble {
    /// `E ‖D_{s_j} X_{t_i}‖²` (squared Frobenius norm averaged over paths).
    pub fn mean_sq_norm(&self, s_idx: usize, t_idx: usize) -> f64 {
        let m = self.derivative.shape()[0];
        let d = self.d;
        let mut acc = 0.0;
        for p in 0..m {
            for a in 0..d {
                for b in 0..d {
                    let v = self.derivative[[p, s_idx, t_idx, a, b]];
                    acc += v * v;
                }
            }
        }
        acc / m as f64
    }

    /// Sup over the `(s, t)` grid (with `t ≥ s`) of `E ‖D_s X_t‖²`.
    pub fn sup_mean_sq(&self) -> f64 {
        let nt = self.derivative.shape()[2];
        let mut sup = 0.0f64;
        for (sj, &si) in self.s_indices.iter().enumerate() {
            for ti in si..nt {
                sup = sup.max(self.mean_sq_norm(sj, ti));
            }
        }
        sup
    }
}

/// Integrates the first-variation equation along each simulated path, with
/// `∂_x b̃_n` by central finite differences of the drift with step `Δx`.
pub fn simulate_malliavin(
    ens: &PathEnsemble,
    mc: &MollifiedCoefficients,
    field: &DecouplingField,
    spec: &GrowthSpec,
    s_grid: &[f64],
) -> Result<MalliavinEnsemble, SimError> {
    let d = ens.d;
    let m = ens.paths();
    let n = ens.steps();
    let dt = ens.dt();
    let dx = field.grid.dx();
    let drift = DriftEvaluator::new(mc, field, spec);

    let mut s_indices: Vec<usize> = s_grid
        .iter()
        .map(|&s| {
            ens.times
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - s).abs().total_cmp(&(b.1 - s).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect();
    s_indices.dedup();
    let s_times: Vec<f64> = s_indices.iter().map(|&i| ens.times[i]).collect();
    let ns = s_indices.len();

    let rows: Vec<Result<Vec<f64>, SimError>> = (0..m)
        .into_par_iter()
        .map(|p| {
            let mut out = vec![0.0; ns * (n + 1) * d * d];
            let mut scratch = drift.scratch();
            let mut xv = vec![0.0; d];
            let mut xp = vec![0.0; d];
            let mut xm = vec![0.0; d];
            let mut bp = vec![0.0; d];
            let mut bm = vec![0.0; d];
            let mut jac = vec![0.0; d * d];
            let mut prod = vec![0.0; d * d];
            let idx =
                |sj: usize, i: usize, a: usize, b: usize| ((sj * (n + 1) + i) * d + a) * d + b;
            for (sj, &si) in s_indices.iter().enumerate() {
                for a in 0..d {
                    for bcol in 0..d {
                        out[idx(sj, si, a, bcol)] = field.sigma.at(a, bcol);
                    }
                }
            }
            for i in 0..n {
                let t = ens.times[i];
                for k in 0..d {
                    xv[k] = ens.x[[p, i, k]];
                }
                // Jacobian of the drift at (t, X_i)
                for k in 0..d {
                    xp.copy_from_slice(&xv);
                    xm.copy_from_slice(&xv);
                    xp[k] += dx;
                    xm[k] -= dx;
                    drift.eval(t, &xp, &mut scratch, &mut bp)?;
                    drift.eval(t, &xm, &mut scratch, &mut bm)?;
                    for row in 0..d {
                        jac[row * d + k] = (bp[row] - bm[row]) / (2.0 * dx);
                    }
                }
                for (sj, &si) in s_indices.iter().enumerate() {
                    if i < si {
                        continue;
                    }
                    for a in 0..d {
                        for bcol in 0..d {
                            let mut s = 0.0;
                            for q in 0..d {
                                s += jac[a * d + q] * out[idx(sj, i, q, bcol)];
                            }
                            prod[a * d + bcol] = s;
                        }
                    }
                    for a in 0..d {
                        for bcol in 0..d {
                            out[idx(sj, i + 1, a, bcol)] =
                                out[idx(sj, i, a, bcol)] + dt * prod[a * d + bcol];
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect();

    let mut derivative = Array5::zeros((m, ns, n + 1, d, d));
    for (p, row) in rows.into_iter().enumerate() {
        let flat = row?;
        let idx = |sj: usize, i: usize, a: usize, b: usize| ((sj * (n + 1) + i) * d + a) * d + b;
        for sj in 0..ns {
            for i in 0..=n {
                for a in 0..d {
                    for b in 0..d {
                        derivative[[p, sj, i, a, b]] = flat[idx(sj, i, a, b)];
                    }
                }
            }
        }
    }

    Ok(MalliavinEnsemble {
        d,
        s_times,
        s_indices,
        derivative,
    })
}

/// Fit of the time modulus `E‖D_{t'}X_r − D_tX_r‖²` against `|t − t'|` for
/// one mollification level.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CompactnessFit {
    pub level: u32,
    pub alpha_hat: f64,
    pub intercept: f64,
    pub degenerate_zero_modulus: bool,
    pub pairs: usize,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CompactnessReport {
    pub per_level: Vec<CompactnessFit>,
    pub max_alpha_hat: f64,
    pub max_intercept: f64,
}

#[derive(Debug, Error)]
pub enum CompactnessError {
    #[error("degenerate fit: fewer than 3 distinct time lags (got {0})")]
    TooFewLags(usize),
}

/// Fits, per level, the modulus of the Malliavin derivative in its
/// differentiation time at the terminal evaluation time `r = T`, on log-log
/// axes. A level whose modulus vanishes identically (zero drift gradient) is
/// flagged degenerate and excluded from the fit.
pub fn compactness_statistics(
    levels: &[(u32, &MalliavinEnsemble)],
) -> Result<CompactnessReport, CompactnessError> {
    let mut per_level = Vec::with_capacity(levels.len());
    for &(level, mall) in levels {
        let ns = mall.s_times.len();
        let r_idx = mall.derivative.shape()[2] - 1;
        let m = mall.derivative.shape()[0];
        let d = mall.d;
        let mut lags: Vec<f64> = Vec::new();
        let mut moduli: Vec<f64> = Vec::new();
        for j in 0..ns {
            for j2 in (j + 1)..ns {
                let lag = (mall.s_times[j2] - mall.s_times[j]).abs();
                if lag <= 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for p in 0..m {
                    for a in 0..d {
                        for b in 0..d {
                            let diff = mall.derivative[[p, j2, r_idx, a, b]]
                                - mall.derivative[[p, j, r_idx, a, b]];
                            acc += diff * diff;
                        }
                    }
                }
                lags.push(lag);
                moduli.push(acc / m as f64);
            }
        }
        let mut distinct = lags.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if distinct.len() < 3 {
            return Err(CompactnessError::TooFewLags(distinct.len()));
        }
        let usable: Vec<(f64, f64)> = lags
            .iter()
            .zip(&moduli)
            .filter(|(_, &v)| v > 1e-28)
            .map(|(&l, &v)| (l.ln(), v.ln()))
            .collect();
        if usable.len() < 3 {
            per_level.push(CompactnessFit {
                level,
                alpha_hat: 0.0,
                intercept: 0.0,
                degenerate_zero_modulus: true,
                pairs: lags.len(),
            });
            continue;
        }
        let n = usable.len() as f64;
        let sx: f64 = usable.iter().map(|p| p.0).sum();
        let sy: f64 = usable.iter().map(|p| p.1).sum();
        let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = ((sy - slope * sx) / n).exp();
        per_level.push(CompactnessFit {
            level,
            alpha_hat: slope,
            intercept,
            degenerate_zero_modulus: false,
            pairs: usable.len(),
        });
    }
    let max_alpha_hat = per_level
        .iter()
        .map(|f| f.alpha_hat)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_intercept = per_level.iter().map(|f| f.intercept).fold(0.0f64, f64::max);
    Ok(CompactnessReport {
        per_level,
        max_alpha_hat,
        max_intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{builtin_problem, ArgMask, CoefficientSet};
    use crate::mollifier::mollify_set;
    use crate::pde::{solve_decoupling_field, GridSpec};
    use std::sync::Arc;

    fn heat_setup() -> (
        crate::coefficients::Problem,
        MollifiedCoefficients,
        DecouplingField,
    ) {
        let p = builtin_problem("heat").unwrap();
        let mc = mollify_set(&p.coeffs, &p.spec, 8, 8, None);
        let grid = GridSpec::new(6.0, 121, 50, vec![0.2, 0.1]);
        let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        (p, mc, field)
    }

    #[test]
    fn driftless_terminal_is_gaussian() {
        let (p, mc, field) = heat_setup();
        let cfg = SimConfig::new(20_000, 64, 11, vec![0.0]);
        let ens = simulate_forward(&field, &mc, &p.spec, &cfg).unwrap();
        let m = ens.paths() as f64;
        let n = ens.steps();
        let mean: f64 = (0..ens.paths()).map(|p| ens.x[[p, n, 0]]).sum::<f64>() / m;
        let var: f64 = (0..ens.paths())
            .map(|p| ens.x[[p, n, 0]].powi(2))
            .sum::<f64>()
            / m
            - mean * mean;
        assert!(mean.abs() < 4.0 / m.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0f64 / m).sqrt(), "var {var}");
        assert_eq!(ens.drift_sup, 0.0);
    }

    #[test]
    fn constant_drift_shifts_the_mean() {
        // custom problem: b ≡ 1 (no argument dependence), g ≡ 0, h ≡ 0
        let coeffs = CoefficientSet {
            b: Arc::new(|_t, _x, _y, _z, out: &mut [f64]| out[0] = 1.0),
            g: Arc::new(|_t, _x, _y, _z, out: &mut [f64]| out.fill(0.0)),
            h: Arc::new(|_x, out: &mut [f64]| out[0] = 0.0),
            b_args: ArgMask::NONE,
            g_args: ArgMask::NONE,
            flag_b1: true,
            flag_b2: true,
            flag_g_no_z: true,
            flag_g_no_x: true,
            lipschitz_h: Some(0.0),
        };
        let spec = crate::coefficients::GrowthSpec::new(
            1,
            1,
            1.0,
            crate::linalg::SquareMat::scalar(1.0),
            1.0,
            1.0,
            0.0,
            0.0,
        )
        .unwrap();
        let mc = mollify_set(&coeffs, &spec, 4, 8, None);
        let grid = GridSpec::new(6.0, 121, 50, vec![0.2, 0.1]);
        let field = solve_decoupling_field(&mc, &spec, &grid).unwrap();
        let cfg = SimConfig::new(20_000, 64, 5, vec![0.0]);
        let ens = simulate_forward(&field, &mc, &spec, &cfg).unwrap();
        let m = ens.paths() as f64;
        let n = ens.steps();
        let mean: f64 = (0..ens.paths()).map(|p| ens.x[[p, n, 0]]).sum::<f64>() / m;
        assert!((mean - 1.0).abs() < 4.0 / m.sqrt(), "E[X_T] = {mean}");
    }

    #[test]
    fn simulation_is_bitwise_reproducible() {
        let (p, mc, field) = heat_setup();
        let cfg = SimConfig::new(64, 32, 1234, vec![0.3]);
        let a = simulate_forward(&field, &mc, &p.spec, &cfg).unwrap();
        let b = simulate_forward(&field, &mc, &p.spec, &cfg).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.dw, b.dw);
    }

    #[test]
    fn growing_path_count_keeps_early_paths() {
        let (p, mc, field) = heat_setup();
        let small =
            simulate_forward(&field, &mc, &p.spec, &SimConfig::new(8, 16, 7, vec![0.0])).unwrap();
        let big =
            simulate_forward(&field, &mc, &p.spec, &SimConfig::new(32, 16, 7, vec![0.0])).unwrap();
        for path in 0..8 {
            for i in 0..=16 {
                assert_eq!(
                    small.x[[path, i, 0]].to_bits(),
                    big.x[[path, i, 0]].to_bits()
                );
            }
        }
    }

    #[test]
    fn increment_moments_are_sane() {
        let (p, mc, field) = heat_setup();
        let cfg = SimConfig::new(2000, 32, 3, vec![0.0]);
        let ens = simulate_forward(&field, &mc, &p.spec, &cfg).unwrap();
        let dt = ens.dt();
        let count = (ens.paths() * ens.steps()) as f64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for p in 0..ens.paths() {
            for i in 0..ens.steps() {
                sum += ens.dw[[p, i, 0]];
                sumsq += ens.dw[[p, i, 0]].powi(2);
            }
        }
        let mean = sum / count;
        let var = sumsq / count - mean * mean;
        assert!(mean.abs() < 4.0 * (dt / count).sqrt(), "mean {mean}");
        assert!((var - dt).abs() < 0.1 * dt, "var {var} vs dt {dt}");
    }

    #[test]
    fn reconstruct_constant_field() {
        let p = builtin_problem("linear-ode").unwrap();
        let mut coeffs = p.coeffs.clone();
        coeffs.g = Arc::new(|_t, _x, _y, _z, out: &mut [f64]| out.fill(0.0));
        coeffs.g_args = ArgMask::NONE;
        let mc = mollify_set(&coeffs, &p.spec, 4, 8, None);
        let grid = GridSpec::new(4.0, 81, 20, vec![0.2]);
        let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        let mut ens =
            simulate_forward(&field, &mc, &p.spec, &SimConfig::new(50, 16, 2, vec![0.0])).unwrap();
        reconstruct_yz(&mut ens, &field);
        for path in 0..ens.paths() {
            for i in 0..=ens.steps() {
                assert!((ens.y[[path, i, 0]] - 1.0).abs() < 1e-12);
                assert!(ens.z[[path, i, 0, 0]].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reconstructed_y_respects_r_bound() {
        let p = builtin_problem("coupled-lip").unwrap();
        let mc = mollify_set(&p.coeffs, &p.spec, 8, 12, None);
        let grid = GridSpec::new(6.0, 121, 50, vec![0.2, 0.1]);
        let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        let mut ens = simulate_forward(
            &field,
            &mc,
            &p.spec,
            &SimConfig::new(500, 64, 17, vec![0.2]),
        )
        .unwrap();
        reconstruct_yz(&mut ens, &field);
        let sup_y = ens.y.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        assert!(sup_y <= p.spec.r_bound * (1.0 + 1e-6), "sup |Y| = {sup_y}");
    }

    #[test]
    fn malliavin_zero_drift_is_sigma() {
        let (p, mc, field) = heat_setup();
        let ens =
            simulate_forward(&field, &mc, &p.spec, &SimConfig::new(20, 32, 9, vec![0.0])).unwrap();
        let mall = simulate_malliavin(&ens, &mc, &field, &p.spec, &[0.0, 0.25, 0.5]).unwrap();
        for path in 0..20 {
            for (sj, &si) in mall.s_indices.iter().enumerate() {
                for i in si..=ens.steps() {
                    assert_eq!(mall.derivative[[path, sj, i, 0, 0]], 1.0);
                }
                if si > 0 {
                    assert_eq!(mall.derivative[[path, sj, si - 1, 0, 0]], 0.0);
                }
            }
        }
    }

    #[test]
    fn malliavin_linear_drift_matches_exponential() {
        // b(y) = a·y against the linear field v(t, x) = x gives drift a·x,
        // whose variational equation has solution e^{a(t−s)}
        let a = 0.5;
        let coeffs = CoefficientSet {
            b: Arc::new(move |_t, _x, y, _z, out: &mut [f64]| out[0] = a * y[0]),
            g: Arc::new(|_t, _x, _y, _z, out: &mut [f64]| out.fill(0.0)),
            h: Arc::new(|x, out: &mut [f64]| out[0] = x[0]),
            b_args: ArgMask::only_y(),
            g_args: ArgMask::NONE,
            flag_b1: false,
            flag_b2: true,
            flag_g_no_z: true,
            flag_g_no_x: true,
            lipschitz_h: Some(1.0),
        };
        let spec = crate::coefficients::GrowthSpec::new(
            1,
            1,
            1.0,
            crate::linalg::SquareMat::scalar(1.0),
            1.0,
            a,
            0.0,
            8.0,
        )
        .unwrap();
        let mc = mollify_set(&coeffs, &spec, 64, 8, None);
        // hand-build a linear field v(t, x) = x so b̃(t, x) = a·x
        let grid = GridSpec::new(6.0, 241, 32, vec![0.2]);
        let mut field = solve_decoupling_field(&mc, &spec, &grid).unwrap();
        for layer in 0..=grid.nt {
            for j in 0..field.node_count() {
                let mut coord = [0.0];
                field.node_coord(j, &mut coord);
                field.v[[layer, j, 0]] = coord[0];
            }
        }
        crate::pde::gradient(&mut field);
        let n = 64;
        let ens =
            simulate_forward(&field, &mc, &spec, &SimConfig::new(40, n, 21, vec![0.0])).unwrap();
        let mall = simulate_malliavin(&ens, &mc, &field, &spec, &[0.0]).unwrap();
        let dt = ens.dt();
        for path in 0..5 {
            for i in [16, 32, 64] {
                let t = ens.times[i];
                let expect = (a * t).exp();
                let got = mall.derivative[[path, 0, i, 0, 0]];
                let rel = (got - expect).abs() / expect;
                assert!(rel <= 2.0 * a * dt, "t={t}: {got} vs {expect} (rel {rel})");
            }
        }
    }

    #[test]
    fn compactness_zero_drift_flags_degenerate() {
        let (p, mc, field) = heat_setup();
        let ens =
            simulate_forward(&field, &mc, &p.spec, &SimConfig::new(30, 32, 13, vec![0.0])).unwrap();
        let mall = simulate_malliavin(&ens, &mc, &field, &p.spec, &[0.0, 0.2, 0.4, 0.6]).unwrap();
        let report = compactness_statistics(&[(8, &mall)]).unwrap();
        assert!(report.per_level[0].degenerate_zero_modulus);
    }

    #[test]
    fn compactness_too_few_lags_errors() {
        let (p, mc, field) = heat_setup();
        let ens =
            simulate_forward(&field, &mc, &p.spec, &SimConfig::new(10, 32, 13, vec![0.0])).unwrap();
        let mall = simulate_malliavin(&ens, &mc, &field, &p.spec, &[0.0, 0.5]).unwrap();
        assert!(matches!(
            compactness_statistics(&[(8, &mall)]),
            Err(CompactnessError::TooFewLags(_))
        ));
    }
}
