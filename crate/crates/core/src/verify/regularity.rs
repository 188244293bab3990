//! Regularity diagnostics: Sobolev differentiability of the flow
//! `x ↦ X^{s,x}_t` (and of `Y` when the backward component is scalar) and
//! summaries of the Malliavin derivative tables.
//!
//! Flow derivatives are central differences over a bump in the initial
//! point, with common random numbers across the bumped runs, so a zero drift
//! yields the identity matrix exactly. The weighted Sobolev norm is the
//! discrete sum `Σ (|X̄|^p + |∂X̄|^p) ρ(x) Δx` over the declared x-grid; the
//! `Y` norm uses exponent 1 and weight 1 over a bounded window and is only
//! defined for `l = 1`.

use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::coefficients::GrowthSpec;
use crate::linalg::norm;
use crate::mollifier::MollifiedCoefficients;
use crate::pde::DecouplingField;
use crate::simulate::{simulate_forward, MalliavinEnsemble, PathEnsemble, SimConfig};

/// Flow-derivative estimate at one grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowRow {
    pub x: Vec<f64>,
    /// `E X^{s,x}_t` per component.
    pub mean_x: Vec<f64>,
    /// `E ∂X^{s,x}_t/∂x`, row-major `d×d`.
    pub mean_flow: Vec<f64>,
    pub flow_frobenius: f64,
    /// `E ∂Y/∂x` (scalar backward component only).
    pub mean_flow_y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub s: f64,
    pub t: f64,
    pub bump: f64,
    pub p: f64,
    pub rho_description: String,
    pub rows: Vec<FlowRow>,
    /// `Σ (|E X|^p + |E ∂X|^p) ρ(x) Δcell` over the grid.
    pub weighted_norm_x: f64,
    /// `Σ (|E Y| + |E ∂Y|) Δcell` over the bounded window (`l = 1` only).
    pub y_norm: Option<f64>,
    pub y_window_halfwidth: Option<f64>,
    /// Attached by the caller when Malliavin tables are available.
    pub malliavin_sup: Option<f64>,
}

/// Central-difference flow derivatives of `x ↦ X^{s,x}_t` over an x-grid,
/// with the weighted Sobolev norm estimate.
///
/// `points` are initial positions inside the PDE box, `cell_volume` the
/// volume element of the grid they form. The same seed drives every run, so
/// bumped paths are coupled pathwise.
#[allow(clippy::too_many_arguments)]
pub fn sobolev_flow_check(
    mc: &MollifiedCoefficients,
    field: &DecouplingField,
    spec: &GrowthSpec,
    s: f64,
    t: f64,
    points: &[Vec<f64>],
    cell_volume: f64,
    bump: f64,
    paths: usize,
    steps: usize,
    seed: u64,
    rho: &dyn Fn(&[f64]) -> f64,
    rho_description: &str,
    p_exp: f64,
    y_window_halfwidth: Option<f64>,
) -> Result<RegularityReport, VerifyError> {
    let d = spec.d;
    let dx = field.grid.dx();
    if bump < 2.0 * dx {
        return Err(VerifyError::Mismatched(format!(
            "bump {bump} must be at least two grid spacings (2Δx = {})",
            2.0 * dx
        )));
    }
    let want_y = y_window_halfwidth.is_some();
    if want_y && spec.l != 1 {
        return Err(VerifyError::YSobolevNeedsScalar(spec.l));
    }

    let run = |x0: Vec<f64>| -> Result<PathEnsemble, VerifyError> {
        let mut cfg = SimConfig::new(paths, steps, seed, x0);
        cfg.start = s;
        Ok(simulate_forward(field, mc, spec, &cfg)?)
    };

    let mut rows = Vec::with_capacity(points.len());
    let mut weighted_norm_x = 0.0;
    let mut y_norm_acc = 0.0;
    for x in points {
        let base = run(x.clone())?;
        let it = base.index_at(t);
        let mut mean_x = vec![0.0; d];
        for k in 0..d {
            mean_x[k] = (0..paths).map(|pp| base.x[[pp, it, k]]).sum::<f64>() / paths as f64;
        }
        let mut mean_flow = vec![0.0; d * d];
        let mut mean_flow_y = vec![0.0; d];
        let mut mean_y = 0.0;
        let mut yv = vec![0.0; spec.l];
        if want_y {
            let mut xv = vec![0.0; d];
            for pp in 0..paths {
                for k in 0..d {
                    xv[k] = base.x[[pp, it, k]];
                }
                field.value(base.times[it], &xv, &mut yv);
                mean_y += yv[0];
            }
            mean_y /= paths as f64;
        }
        for axis in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[axis] += bump;
            xm[axis] -= bump;
            let plus = run(xp)?;
            let minus = run(xm)?;
            for row in 0..d {
                let mut acc = 0.0;
                for pp in 0..paths {
                    acc += (plus.x[[pp, it, row]] - minus.x[[pp, it, row]]) / (2.0 * bump);
                }
                mean_flow[row * d + axis] = acc / paths as f64;
            }
            if want_y {
                let mut acc = 0.0;
                let mut xv = vec![0.0; d];
                let mut yp = vec![0.0; 1];
                let mut ym = vec![0.0; 1];
                for pp in 0..paths {
                    for k in 0..d {
                        xv[k] = plus.x[[pp, it, k]];
                    }
                    field.value(plus.times[it], &xv, &mut yp);
                    for k in 0..d {
                        xv[k] = minus.x[[pp, it, k]];
                    }
                    field.value(minus.times[it], &xv, &mut ym);
                    acc += (yp[0] - ym[0]) / (2.0 * bump);
                }
                mean_flow_y[axis] = acc / paths as f64;
            }
        }
        let flow_frobenius = norm(&mean_flow);
        weighted_norm_x +=
            (norm(&mean_x).powf(p_exp) + flow_frobenius.powf(p_exp)) * rho(x) * cell_volume;
        if let Some(u_half) = y_window_halfwidth {
            if x.iter().all(|&c| c.abs() <= u_half) {
                y_norm_acc += (mean_y.abs() + norm(&mean_flow_y)) * cell_volume;
            }
        }
        rows.push(FlowRow {
            x: x.clone(),
            mean_x,
            mean_flow,
            flow_frobenius,
            mean_flow_y: want_y.then(|| mean_flow_y.clone()),
        });
    }

    Ok(RegularityReport {
        s,
        t,
        bump,
        p: p_exp,
        rho_description: rho_description.to_string(),
        rows,
        weighted_norm_x,
        y_norm: want_y.then_some(y_norm_acc),
        y_window_halfwidth,
        malliavin_sup: None,
    })
}

/// Flags controlling which differentiability claims apply.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegularityFlags {
    pub b1: bool,
    pub b2: bool,
    /// Driver independent of `z` (and Lipschitz).
    pub g_no_z: bool,
    /// Driver independent of `x` (and C¹/Lipschitz).
    pub g_no_x: bool,
}

/// One level's inputs for the Malliavin summary.
pub struct RegLevel<'a> {
    pub level: u32,
    pub mall: &'a MalliavinEnsemble,
    pub ens: &'a PathEnsemble,
    pub field: &'a DecouplingField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MallLevelSummary {
    pub level: u32,
    /// `sup_{s,t} E‖D_s X_t‖²`.
    pub sup_x: f64,
    /// `sup E‖D_s Y_t‖²` over the applicable time range.
    pub sup_y: f64,
    /// Populated only when the `Z` claim applies.
    pub sup_z: Option<f64>,
    /// `E‖D_{s_j} X_{t_i}‖²` on the sub-grid, rows = differentiation times.
    pub x_table: Vec<Vec<f64>>,
    pub t_subgrid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MalliavinSummary {
    pub delta: f64,
    /// Human-readable list of the differentiability claims that apply.
    pub claims: Vec<String>,
    pub y_time_cutoff: f64,
    pub per_level: Vec<MallLevelSummary>,
}

/// Tabulates Malliavin bounds per level and records which differentiability
/// claims the declared structure supports: boundedness in `z` gives `X` on
/// `[0,T]` and `Y` away from the terminal time; a Lipschitz terminal gives
/// `(X, Y)` on `[0,T]`; adding a driver independent of `x` or `z` extends to
/// `Z`.
pub fn malliavin_regularity_summary(
    levels: &[RegLevel<'_>],
    flags: RegularityFlags,
    delta: f64,
) -> MalliavinSummary {
    let mut claims = Vec::new();
    if flags.b2 {
        claims.push("X and Y Malliavin differentiable for all t in [0, T]".to_string());
    } else if flags.b1 {
        claims.push("X Malliavin differentiable for all t in [0, T]".to_string());
        claims.push(format!(
            "Y Malliavin differentiable for t in [0, T − δ], δ = {delta}"
        ));
    }
    let z_claim = flags.b2 && (flags.g_no_z || flags.g_no_x);
    if z_claim {
        claims.push("Z Malliavin differentiable for all t in [0, T]".to_string());
    }

    let mut per_level = Vec::with_capacity(levels.len());
    for lv in levels {
        let mall = lv.mall;
        let ens = lv.ens;
        let field = lv.field;
        let d = ens.d;
        let l = ens.l;
        let m = ens.paths();
        let n = ens.steps();
        let horizon = ens.horizon;
        let y_cutoff = if flags.b2 { horizon } else { horizon - delta };
        let dx = field.grid.dx();

        // subsample the time axis for the table
        let sub: Vec<usize> = {
            let step = (n / 8).max(1);
            let mut v: Vec<usize> = (0..=n).step_by(step).collect();
            if v.last() != Some(&n) {
                v.push(n);
            }
            v
        };
        let t_subgrid: Vec<f64> = sub.iter().map(|&i| ens.times[i]).collect();

        let mut x_table = vec![vec![0.0; sub.len()]; mall.s_times.len()];
        for (sj, &si) in mall.s_indices.iter().enumerate() {
            for (col, &ti) in sub.iter().enumerate() {
                x_table[sj][col] = if ti >= si {
                    mall.mean_sq_norm(sj, ti)
                } else {
                    0.0
                };
            }
        }
        let sup_x = mall.sup_mean_sq();

        // D_s Y_t = w(t, X_t) · D_s X_t, on the applicable range
        let mut sup_y = 0.0f64;
        let mut wv = vec![0.0; l * d];
        let mut xv = vec![0.0; d];
        for (sj, &si) in mall.s_indices.iter().enumerate() {
            for &ti in &sub {
                if ti < si || ens.times[ti] > y_cutoff + 1e-12 {
                    continue;
                }
                let mut acc = 0.0;
                for pp in 0..m {
                    for k in 0..d {
                        xv[k] = ens.x[[pp, ti, k]];
                    }
                    field.gradient_value(ens.times[ti], &xv, &mut wv);
                    for c in 0..l {
                        for bcol in 0..d {
                            let mut s = 0.0;
                            for q in 0..d {
                                s += wv[c * d + q] * mall.derivative[[pp, sj, ti, q, bcol]];
                            }
                            acc += s * s;
                        }
                    }
                }
                sup_y = sup_y.max(acc / m as f64);
            }
        }

        // D_s Z_t ≈ (∂_x w)(t, X_t) · D_s X_t · σ by finite differences of w
        let sup_z = z_claim.then(|| {
            let mut sup = 0.0f64;
            let mut xp = vec![0.0; d];
            let mut xm = vec![0.0; d];
            let mut wp = vec![0.0; l * d];
            let mut wm = vec![0.0; l * d];
            let mut dzdx = vec![0.0; l * d * d]; // ∂_q w[c][k]
            for (sj, &si) in mall.s_indices.iter().enumerate() {
                for &ti in &sub {
                    if ti < si {
                        continue;
                    }
                    let mut acc = 0.0;
                    for pp in 0..m {
                        for k in 0..d {
                            xv[k] = ens.x[[pp, ti, k]];
                        }
                        for q in 0..d {
                            xp.copy_from_slice(&xv);
                            xm.copy_from_slice(&xv);
                            xp[q] += dx;
                            xm[q] -= dx;
                            field.gradient_value(ens.times[ti], &xp, &mut wp);
                            field.gradient_value(ens.times[ti], &xm, &mut wm);
                            for c in 0..l {
                                for k in 0..d {
                                    dzdx[(c * d + k) * d + q] =
                                        (wp[c * d + k] - wm[c * d + k]) / (2.0 * dx);
                                }
                            }
                        }
                        // contract: D_s(w σ)[c][kp][b] = Σ_k Σ_q ∂_q w[c][k] DX[q][b] σ[k][kp]
                        for c in 0..l {
                            for kp in 0..d {
                                for b in 0..d {
                                    let mut s = 0.0;
                                    for k in 0..d {
                                        for q in 0..d {
                                            s += dzdx[(c * d + k) * d + q]
                                                * mall.derivative[[pp, sj, ti, q, b]]
                                                * field.sigma.at(k, kp);
                                        }
                                    }
                                    acc += s * s;
                                }
                            }
                        }
                    }
                    sup = sup.max(acc / m as f64);
                }
            }
            sup
        });

        per_level.push(MallLevelSummary {
            level: lv.level,
            sup_x,
            sup_y,
            sup_z,
            x_table,
            t_subgrid,
        });
    }

    MalliavinSummary {
        delta,
        claims,
        y_time_cutoff: if flags.b2 {
            levels.first().map(|lv| lv.ens.horizon).unwrap_or(0.0)
        } else {
            levels
                .first()
                .map(|lv| lv.ens.horizon - delta)
                .unwrap_or(0.0)
        },
        per_level,
    }
}
