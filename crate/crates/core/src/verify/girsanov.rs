//! Law identity of the simulated forward process by change of measure.
//!
//! Driftless paths `B = x₀ + σW` reweighted by the discrete stochastic
//! exponential of `∫ u_n(r, B_r)·dW_r − ½∫ |u_n|² dr`, with
//! `u_n = σ*(σσ*)⁻¹ b̃_n`, have (in discrete time, exactly) the law of the
//! Euler chain of `X^n` driven by the same increments. Weighted moments of
//! `B_t` are compared against direct moments of `X^n_t`, with delta-method
//! standard errors, plus a weighted two-sample Kolmogorov–Smirnov comparison
//! in dimension one. The empirical weight mean doubles as a martingale check
//! of the stochastic exponential.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{effective_sample_size, ks_critical_value, weighted_two_sample_ks};
use super::VerifyError;
use crate::coefficients::GrowthSpec;
use crate::mollifier::MollifiedCoefficients;
use crate::pde::DecouplingField;
use crate::rng::standard_normal;
use crate::simulate::{simulate_forward, DriftEvaluator, SimConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsCheck {
    pub statistic: f64,
    pub critical: f64,
    pub alpha: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GirsanovReport {
    pub t_requested: f64,
    /// Comparison time snapped onto the simulation grid.
    pub t_used: f64,
    pub paths: usize,
    pub seed: u64,
    pub weighted_mean: Vec<f64>,
    pub weighted_second: Vec<f64>,
    pub direct_mean: Vec<f64>,
    pub direct_second: Vec<f64>,
    pub z_mean: Vec<f64>,
    pub z_second: Vec<f64>,
    pub ess: f64,
    pub weight_mean: f64,
    pub weight_mean_se: f64,
    /// Weight mean within 5 standard errors of 1.
    pub martingale_ok: bool,
    /// Present in dimension one.
    pub ks: Option<KsCheck>,
    /// False when the importance weights degenerate (ESS < 100).
    pub reliable: bool,
}

impl GirsanovReport {
    pub fn max_abs_z(&self) -> f64 {
        self.z_mean
            .iter()
            .chain(self.z_second.iter())
            .fold(0.0f64, |m, &z| m.max(z.abs()))
    }
}

/// Delta-method standard error of the self-normalized weighted mean.
fn weighted_mean_se(values: &[f64], weights: &[f64], mean: f64) -> f64 {
    let m = values.len() as f64;
    let wbar: f64 = weights.iter().sum::<f64>() / m;
    let var: f64 = values
        .iter()
        .zip(weights)
        .map(|(&v, &w)| {
            let inf = w * (v - mean) / wbar;
            inf * inf
        })
        .sum::<f64>()
        / m;
    (var / m).sqrt()
}

fn plain_mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean: f64 = values.iter().sum::<f64>() / m;
    let var: f64 = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m;
    (mean, (var / m).sqrt())
}

/// Simulates `X^n` and reweighted driftless paths with the same seed and
/// compares the laws at time `t`.
#[allow(clippy::too_many_arguments)]
pub fn girsanov_law_check(
    mc: &MollifiedCoefficients,
    field: &DecouplingField,
    spec: &GrowthSpec,
    x0: &[f64],
    t: f64,
    paths: usize,
    steps: usize,
    seed: u64,
) -> Result<GirsanovReport, VerifyError> {
    let d = spec.d;
    let cfg = SimConfig::new(paths, steps, seed, x0.to_vec());
    let ens = simulate_forward(field, mc, spec, &cfg)?;
    let it = ens.index_at(t);
    let t_used = ens.times[it];
    let dt = ens.dt();
    let sqrt_dt = dt.sqrt();

    // u_n = σ*(σσ*)⁻¹ b̃_n; the drift evaluator enforces boundedness of b̃
    let gram_inv = spec
        .sigma
        .gram()
        .inverse()
        .expect("σσ* is positive definite by construction");
    let projector = spec.sigma.transpose().matmul(&gram_inv);
    let drift = DriftEvaluator::new(mc, field, spec);

    // driftless paths under the same increments; paths are independent, so
    // the reweighting loop is partitioned by path index
    let m = paths;
    let rows: Vec<Result<(Vec<f64>, f64), VerifyError>> = (0..m)
        .into_par_iter()
        .map(|p| {
            let mut scratch = drift.scratch();
            let mut bvec = vec![0.0; d];
            let mut uvec = vec![0.0; d];
            let mut dw = vec![0.0; d];
            let mut noise = vec![0.0; d];
            let mut bx = x0.to_vec();
            let mut logw = 0.0;
            for i in 0..it {
                drift.eval(ens.times[i], &bx, &mut scratch, &mut bvec)?;
                projector.apply(&bvec, &mut uvec);
                for k in 0..d {
                    dw[k] = sqrt_dt * standard_normal(seed, p as u64, i as u64, k as u64);
                }
                let mut u_dot_dw = 0.0;
                let mut u_sq = 0.0;
                for k in 0..d {
                    u_dot_dw += uvec[k] * dw[k];
                    u_sq += uvec[k] * uvec[k];
                }
                logw += u_dot_dw - 0.5 * u_sq * dt;
                spec.sigma.apply(&dw, &mut noise);
                for k in 0..d {
                    bx[k] += noise[k];
                }
            }
            Ok((bx, logw))
        })
        .collect();
    let mut b_at_t = Vec::with_capacity(m);
    let mut log_weights = Vec::with_capacity(m);
    for row in rows {
        let (bx, logw) = row?;
        b_at_t.push(bx);
        log_weights.push(logw);
    }
    let weights: Vec<f64> = log_weights.iter().map(|lw| lw.exp()).collect();
    let weight_sum: f64 = weights.iter().sum();
    let (weight_mean, weight_mean_se) = plain_mean_se(&weights);
    let martingale_ok = (weight_mean - 1.0).abs() <= 5.0 * weight_mean_se.max(1e-300);
    let ess = effective_sample_size(&weights);

    let mut weighted_mean = vec![0.0; d];
    let mut weighted_second = vec![0.0; d];
    let mut direct_mean = vec![0.0; d];
    let mut direct_second = vec![0.0; d];
    let mut z_mean = vec![0.0; d];
    let mut z_second = vec![0.0; d];
    for k in 0..d {
        let b_vals: Vec<f64> = (0..m).map(|p| b_at_t[p][k]).collect();
        let b_sq: Vec<f64> = b_vals.iter().map(|v| v * v).collect();
        let x_vals: Vec<f64> = (0..m).map(|p| ens.x[[p, it, k]]).collect();
        let x_sq: Vec<f64> = x_vals.iter().map(|v| v * v).collect();

        let wm = b_vals.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>() / weight_sum;
        let wm2 = b_sq.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>() / weight_sum;
        let (dm, dm_se) = plain_mean_se(&x_vals);
        let (dm2, dm2_se) = plain_mean_se(&x_sq);
        let wm_se = weighted_mean_se(&b_vals, &weights, wm);
        let wm2_se = weighted_mean_se(&b_sq, &weights, wm2);

        weighted_mean[k] = wm;
        weighted_second[k] = wm2;
        direct_mean[k] = dm;
        direct_second[k] = dm2;
        let denom1 = (wm_se * wm_se + dm_se * dm_se).sqrt();
        let denom2 = (wm2_se * wm2_se + dm2_se * dm2_se).sqrt();
        z_mean[k] = if denom1 > 0.0 {
            (wm - dm) / denom1
        } else {
            0.0
        };
        z_second[k] = if denom2 > 0.0 {
            (wm2 - dm2) / denom2
        } else {
            0.0
        };
    }

    let ks = if d == 1 {
        let weighted: Vec<(f64, f64)> = (0..m).map(|p| (b_at_t[p][0], weights[p])).collect();
        let plain: Vec<f64> = (0..m).map(|p| ens.x[[p, it, 0]]).collect();
        let statistic = weighted_two_sample_ks(&weighted, &plain);
        let alpha = 1e-3;
        let critical = ks_critical_value(alpha, ess.max(1.0), m as f64);
        Some(KsCheck {
            statistic,
            critical,
            alpha,
            pass: statistic <= critical,
        })
    } else {
        None
    };

    Ok(GirsanovReport {
        t_requested: t,
        t_used,
        paths,
        seed,
        weighted_mean,
        weighted_second,
        direct_mean,
        direct_second,
        z_mean,
        z_second,
        ess,
        weight_mean,
        weight_mean_se,
        martingale_ok,
        ks,
        reliable: ess >= 100.0,
    })
}
