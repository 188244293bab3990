//! Discrete BSDE residual and terminal matching.
//!
//! With left-point Riemann/Itô sums over `[s, T−δ]`, the reconstructed pair
//! must satisfy
//!
//! ```text
//! Y_s ≈ Y_{T−δ} + Σ g(t_i, X_i, Y_i, Z_i) Δt − Σ Z_i ΔW_i
//! ```
//!
//! and at the terminal time `Y_T = h(X_T)`, exactly under a Lipschitz
//! terminal (up to interpolation error), and in the limit of the
//! mollification level for a merely measurable one.

use crate::simulate::PathEnsemble;

/// Root-mean-square residual of the backward equation at the start time over
/// `[s, T−δ]`. The driver source is a callable `(t, x, y, z, out)` — raw or
/// mollified, the caller decides.
pub fn bsde_residual<G>(ens: &PathEnsemble, driver: G, delta: f64) -> f64
where
    G: Fn(f64, &[f64], &[f64], &[f64], &mut [f64]),
{
    let (d, l) = (ens.d, ens.l);
    let m = ens.paths();
    let cutoff = ens.index_at(ens.horizon - delta);
    let dt = ens.dt();
    let mut xv = vec![0.0; d];
    let mut yv = vec![0.0; l];
    let mut zv = vec![0.0; l * d];
    let mut gv = vec![0.0; l];
    let mut acc = 0.0;
    for p in 0..m {
        let mut resid = vec![0.0; l];
        for c in 0..l {
            resid[c] = ens.y[[p, 0, c]] - ens.y[[p, cutoff, c]];
        }
        for i in 0..cutoff {
            for k in 0..d {
                xv[k] = ens.x[[p, i, k]];
            }
            for c in 0..l {
                yv[c] = ens.y[[p, i, c]];
                for k in 0..d {
                    zv[c * d + k] = ens.z[[p, i, c, k]];
                }
            }
            driver(ens.times[i], &xv, &yv, &zv, &mut gv);
            for c in 0..l {
                let mut z_dw = 0.0;
                for k in 0..d {
                    z_dw += ens.z[[p, i, c, k]] * ens.dw[[p, i, k]];
                }
                resid[c] += -gv[c] * dt + z_dw;
            }
        }
        acc += resid.iter().map(|r| r * r).sum::<f64>();
    }
    (acc / m as f64).sqrt()
}

/// `(E |Y_T − h(X_T)|²)^{1/2}`.
pub fn terminal_match<H>(ens: &PathEnsemble, terminal: H) -> f64
where
    H: Fn(&[f64], &mut [f64]),
{
    let (d, l) = (ens.d, ens.l);
    let m = ens.paths();
    let n = ens.steps();
    let mut xv = vec![0.0; d];
    let mut hv = vec![0.0; l];
    let mut acc = 0.0;
    for p in 0..m {
        for k in 0..d {
            xv[k] = ens.x[[p, n, k]];
        }
        terminal(&xv, &mut hv);
        for c in 0..l {
            let diff = ens.y[[p, n, c]] - hv[c];
            acc += diff * diff;
        }
    }
    (acc / m as f64).sqrt()
}
