//! Cauchy diagnostics across mollification levels.
//!
//! The constructive route extracts limits of `v_n`, `D_x v_n`, `X^n`, `Y^n`,
//! `Z^n`; numerically we witness the corresponding Cauchy property between
//! consecutive levels coupled through common random numbers: sup-gaps of the
//! fields away from the terminal layer, `L²` gaps of the paths, an `H²` gap
//! of `Y` on `[0, T−δ]` and the gap of the stochastic integrals `∫ Z dW`.

use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::pde::DecouplingField;
use crate::simulate::PathEnsemble;

/// One mollification level: its solved field and a simulated ensemble that
/// shares seed, path count and step count with every other level.
pub struct CauchyLevel<'a> {
    pub level: u32,
    pub field: &'a DecouplingField,
    pub ens: &'a PathEnsemble,
}

/// Gaps between two consecutive levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelGap {
    pub level_lo: u32,
    pub level_hi: u32,
    /// `sup |v_lo − v_hi|` over `[0, T−δ] ×` box.
    pub v_sup_gap: f64,
    /// `sup |D_x v_lo − D_x v_hi|` over `[0, T−δ] ×` box.
    pub w_sup_gap: f64,
    /// `‖X_lo − X_hi‖_{L²}` at each requested time.
    pub x_l2: Vec<TimedGap>,
    /// `(E ∫_0^{T−δ} |ΔY|² dt)^{1/2}`.
    pub y_h2_gap: f64,
    /// `(E |Σ_{t_i ≤ T−δ} ΔZ_i ΔW_i|²)^{1/2}`.
    pub z_stoch_int_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimedGap {
    pub t: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub delta: f64,
    pub pairs: Vec<LevelGap>,
}

impl ConvergenceReport {
    /// True when every reported metric is smaller for the last pair than for
    /// the first (the empirical Cauchy acceptance).
    pub fn last_pair_tighter_than_first(&self) -> bool {
        if self.pairs.len() < 2 {
            return false;
        }
        let first = &self.pairs[0];
        let last = &self.pairs[self.pairs.len() - 1];
        let x_ok = first
            .x_l2
            .iter()
            .zip(&last.x_l2)
            .all(|(a, b)| b.gap < a.gap || (a.gap == 0.0 && b.gap == 0.0));
        last.v_sup_gap < first.v_sup_gap.max(f64::MIN_POSITIVE)
            && last.w_sup_gap <= first.w_sup_gap
            && x_ok
            && last.y_h2_gap < first.y_h2_gap.max(f64::MIN_POSITIVE)
            && last.z_stoch_int_gap <= first.z_stoch_int_gap
    }
}

fn ensure_compatible(levels: &[CauchyLevel<'_>]) -> Result<(), VerifyError> {
    if levels.len() < 2 {
        return Err(VerifyError::TooFewLevels(levels.len()));
    }
    let first = &levels[0];
    for lv in &levels[1..] {
        let f = lv.field;
        let g = first.field;
        if f.grid.nx != g.grid.nx
            || f.grid.nt != g.grid.nt
            || (f.grid.half_width - g.grid.half_width).abs() > 1e-12
            || (f.horizon - g.horizon).abs() > 1e-12
            || f.d != g.d
            || f.l != g.l
        {
            return Err(VerifyError::Mismatched("fields use different grids".into()));
        }
        let e = lv.ens;
        let h = first.ens;
        if e.seed != h.seed
            || e.paths() != h.paths()
            || e.steps() != h.steps()
            || (e.start - h.start).abs() > 1e-12
            || e.x0 != h.x0
        {
            return Err(VerifyError::Mismatched(
                "ensembles must share seed, paths, steps, start and x0".into(),
            ));
        }
    }
    Ok(())
}

/// Fills a [`ConvergenceReport`] with consecutive-level gaps.
pub fn cauchy_convergence(
    levels: &[CauchyLevel<'_>],
    delta: f64,
    t_list: &[f64],
) -> Result<ConvergenceReport, VerifyError> {
    ensure_compatible(levels)?;
    let mut pairs = Vec::with_capacity(levels.len() - 1);
    for pair in levels.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let fa = lo.field;
        let fb = hi.field;
        let t_cut = fa.horizon - delta;

        let mut v_sup_gap = 0.0f64;
        let mut w_sup_gap = 0.0f64;
        for (i, &t) in fa.times.iter().enumerate() {
            if t > t_cut + 1e-12 {
                break;
            }
            for j in 0..fa.node_count() {
                for c in 0..fa.l {
                    v_sup_gap = v_sup_gap.max((fa.v[[i, j, c]] - fb.v[[i, j, c]]).abs());
                    for k in 0..fa.d {
                        w_sup_gap = w_sup_gap.max((fa.w[[i, j, c, k]] - fb.w[[i, j, c, k]]).abs());
                    }
                }
            }
        }

        let ea = lo.ens;
        let eb = hi.ens;
        let m = ea.paths();
        let x_l2 = t_list
            .iter()
            .map(|&t| {
                let idx = ea.index_at(t);
                let mut acc = 0.0;
                for p in 0..m {
                    for k in 0..ea.d {
                        let diff = ea.x[[p, idx, k]] - eb.x[[p, idx, k]];
                        acc += diff * diff;
                    }
                }
                TimedGap {
                    t: ea.times[idx],
                    gap: (acc / m as f64).sqrt(),
                }
            })
            .collect();

        let cutoff = ea.index_at(ea.horizon - delta);
        let dt = ea.dt();
        let mut y_acc = 0.0;
        let mut z_acc = 0.0;
        for p in 0..m {
            let mut z_int = vec![0.0; ea.l];
            for i in 0..=cutoff {
                for c in 0..ea.l {
                    let dy = ea.y[[p, i, c]] - eb.y[[p, i, c]];
                    y_acc += dy * dy * dt;
                }
                if i < cutoff {
                    for c in 0..ea.l {
                        for k in 0..ea.d {
                            z_int[c] +=
                                (ea.z[[p, i, c, k]] - eb.z[[p, i, c, k]]) * ea.dw[[p, i, k]];
                        }
                    }
                }
            }
            z_acc += z_int.iter().map(|v| v * v).sum::<f64>();
        }

        pairs.push(LevelGap {
            level_lo: lo.level,
            level_hi: hi.level,
            v_sup_gap,
            w_sup_gap,
            x_l2,
            y_h2_gap: (y_acc / m as f64).sqrt(),
            z_stoch_int_gap: (z_acc / m as f64).sqrt(),
        });
    }
    Ok(ConvergenceReport { delta, pairs })
}
