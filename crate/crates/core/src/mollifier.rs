//! Mollification: smoothing of measurable coefficients by convolution with a
//! compactly supported bump kernel of bandwidth `1/n`.
//!
//! The kernel at level `n` is the standard bump
//!
//! ```text
//! φ(u) ∝ exp(−1 / (1 − |u|²))   on |u| < 1,   rescaled to radius 1/n,
//! ```
//!
//! discretized by a Gauss–Legendre tensor rule over the support cube and
//! masked to the ball. The discrete weights are renormalized to unit mass, so
//! convolution against a constant is exact and (by node symmetry) convolution
//! against a linear function is exact as well.
//!
//! Because the discrete kernel is a convex combination of point evaluations,
//! mollified coefficients inherit sup-bounds (`‖h_n‖_∞ ≤ k₃`) and Lipschitz
//! constants of the originals, and smoothing a coefficient in an argument it
//! does not read is the identity. Coefficients therefore declare their live
//! argument blocks ([`ArgMask`]) and the convolution runs jointly over
//! exactly those; the time argument is clamped to `[0, T]` before evaluation.
//!
//! Compact support in `x` is realized by a smooth cutoff equal to 1 on the
//! computational box and vanishing outside twice the box.

use std::sync::Arc;

use crate::coefficients::{ArgMask, CoeffFn, CoefficientSet, GrowthSpec, TerminalFn};
use crate::quad::gauss_legendre;

/// Discrete mollification kernel: quadrature nodes inside the ball of radius
/// `1/n` with positive weights of unit total mass.
#[derive(Debug, Clone)]
pub struct MollifierKernel {
    pub level: u32,
    pub dim: usize,
    pub radius: f64,
    pub quad_order: usize,
    /// Flat node storage, `dim` coordinates per node.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub const DEFAULT_QUAD_ORDER: usize = 16;

/// Builds the level-`n` kernel in `dim` dimensions with a tensor
/// Gauss–Legendre rule of `quad_order` nodes per axis.
pub fn make_kernel(level: u32, dim: usize, quad_order: usize) -> MollifierKernel {
    assert!(level >= 1, "mollification level must be ≥ 1");
    assert!(dim >= 1, "kernel dimension must be ≥ 1");
    assert!(quad_order >= 2, "quadrature order must be ≥ 2");
    let count_estimate = (quad_order as f64).powi(dim as i32);
    assert!(
        count_estimate <= 5e7,
        "tensor rule with {quad_order}^{dim} nodes is too large; lower the quadrature order"
    );

    let radius = 1.0 / level as f64;
    let (gl_nodes, gl_weights) = gauss_legendre(quad_order);

    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut index = vec![0usize; dim];
    loop {
        let mut r2 = 0.0;
        let mut w = 1.0;
        for k in 0..dim {
            let u = gl_nodes[index[k]];
            r2 += u * u;
            w *= gl_weights[index[k]];
        }
        if r2 < 1.0 {
            let density = (-1.0 / (1.0 - r2)).exp();
            let weight = w * density;
            if weight > 0.0 {
                for k in 0..dim {
                    nodes.push(radius * gl_nodes[index[k]]);
                }
                weights.push(weight);
            }
        }
        // odometer over the tensor grid
        let mut k = 0;
        loop {
            index[k] += 1;
            if index[k] < quad_order {
                break;
            }
            index[k] = 0;
            k += 1;
            if k == dim {
                let total: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w /= total;
                }
                return MollifierKernel {
                    level,
                    dim,
                    radius,
                    quad_order,
                    nodes,
                    weights,
                };
            }
        }
    }
}

impl MollifierKernel {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Total mass of the discrete kernel (1 up to rounding, by construction).
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// First moment `Σ w_i u_i`; vanishes by symmetry of the rule.
    pub fn first_moment(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.len() {
            let u = self.node(i);
            for k in 0..self.dim {
                m[k] += self.weights[i] * u[k];
            }
        }
        m
    }
}

/// Mollifies a scalar function of `dim` free arguments (all of them smoothed).
/// The standalone version used for diagnostics; coefficient sets go through
/// [`mollify_set`].
pub fn mollify_scalar<F>(f: F, kernel: &MollifierKernel) -> impl Fn(&[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let kernel = kernel.clone();
    move |u: &[f64]| {
        assert_eq!(
            u.len(),
            kernel.dim,
            "argument dimension must match the kernel"
        );
        let mut shifted = vec![0.0; kernel.dim];
        let mut acc = 0.0;
        for i in 0..kernel.len() {
            let a = kernel.node(i);
            for k in 0..kernel.dim {
                shifted[k] = u[k] - a[k];
            }
            acc += kernel.weight(i) * f(&shifted);
        }
        acc
    }
}

/// Max of `|f_n − f|` over a regular grid on the box `[lo, hi]^dim` with
/// `per_axis` samples per axis. Witnesses (non-)uniform convergence of the
/// mollified sequence.
pub fn uniform_gap(
    f: &dyn Fn(&[f64]) -> f64,
    f_n: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    per_axis: usize,
) -> f64 {
    assert_eq!(lo.len(), hi.len());
    assert!(per_axis >= 2);
    let dim = lo.len();
    let mut point = vec![0.0; dim];
    let mut index = vec![0usize; dim];
    let mut gap = 0.0f64;
    loop {
        for k in 0..dim {
            let s = index[k] as f64 / (per_axis - 1) as f64;
            point[k] = lo[k] + s * (hi[k] - lo[k]);
        }
        gap = gap.max((f_n(&point) - f(&point)).abs());
        let mut k = 0;
        loop {
            index[k] += 1;
            if index[k] < per_axis {
                break;
            }
            index[k] = 0;
            k += 1;
            if k == dim {
                return gap;
            }
        }
    }
}

/// Smooth cutoff: 1 on `[−box_l, box_l]` per component, 0 outside twice the
/// box, C-infinity in between.
pub fn smooth_cutoff(x: &[f64], box_l: f64) -> f64 {
    fn ramp(s: f64) -> f64 {
        // C∞ step: 0 for s ≤ 0, 1 for s ≥ 1
        if s <= 0.0 {
            0.0
        } else if s >= 1.0 {
            1.0
        } else {
            let a = (-1.0 / s).exp();
            let b = (-1.0 / (1.0 - s)).exp();
            a / (a + b)
        }
    }
    let mut chi = 1.0;
    for &xi in x {
        chi *= ramp((2.0 * box_l - xi.abs()) / box_l);
    }
    chi
}

/// Smoothed coefficient triple at one mollification level. Immutable after
/// construction and safe to evaluate concurrently.
#[derive(Clone)]
pub struct MollifiedCoefficients {
    pub level: u32,
    pub b_n: CoeffFn,
    pub g_n: CoeffFn,
    pub h_n: TerminalFn,
    pub smoothed_b: ArgMask,
    pub smoothed_g: ArgMask,
    /// Whether the terminal was smoothed in `x` (it is unless constant).
    pub smoothed_h: bool,
    pub cutoff_halfwidth: Option<f64>,
    pub flag_b1: bool,
    pub flag_b2: bool,
    pub flag_g_no_z: bool,
    pub flag_g_no_x: bool,
    pub lipschitz_h: Option<f64>,
}

impl std::fmt::Debug for MollifiedCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MollifiedCoefficients")
            .field("level", &self.level)
            .field("smoothed_b", &self.smoothed_b)
            .field("smoothed_g", &self.smoothed_g)
            .field("smoothed_h", &self.smoothed_h)
            .field("cutoff_halfwidth", &self.cutoff_halfwidth)
            .finish_non_exhaustive()
    }
}

impl MollifiedCoefficients {
    /// Repackages the smoothed callables as a [`CoefficientSet`] carrying the
    /// source flags, so growth validation runs unchanged on the mollified
    /// triple.
    pub fn as_coefficient_set(&self) -> CoefficientSet {
        CoefficientSet {
            b: self.b_n.clone(),
            g: self.g_n.clone(),
            h: self.h_n.clone(),
            b_args: self.smoothed_b,
            g_args: self.smoothed_g,
            flag_b1: self.flag_b1,
            flag_b2: self.flag_b2,
            flag_g_no_z: self.flag_g_no_z,
            flag_g_no_x: self.flag_g_no_x,
            lipschitz_h: self.lipschitz_h,
        }
    }
}

/// Convolves the masked argument blocks of a vector-valued coefficient with
/// the kernel. The time coordinate is clamped to `[0, horizon]` before every
/// source evaluation; an empty mask returns the coefficient unchanged.
pub fn mollify_coeff(
    f: &CoeffFn,
    mask: ArgMask,
    kernel: &MollifierKernel,
    d: usize,
    l: usize,
    horizon: f64,
) -> CoeffFn {
    if mask.active_dims(d, l) == 0 {
        return f.clone();
    }
    assert_eq!(
        kernel.dim,
        mask.active_dims(d, l),
        "kernel dimension must equal the number of masked scalar arguments"
    );
    let f = f.clone();
    let kernel = kernel.clone();
    Arc::new(
        move |t: f64, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]| {
            let mut xs = x.to_vec();
            let mut ys = y.to_vec();
            let mut zs = z.to_vec();
            let mut tmp = vec![0.0; out.len()];
            out.fill(0.0);
            for i in 0..kernel.len() {
                let a = kernel.node(i);
                let mut off = 0;
                let ts = if mask.t {
                    off += 1;
                    (t - a[0]).clamp(0.0, horizon)
                } else {
                    t
                };
                if mask.x {
                    for k in 0..d {
                        xs[k] = x[k] - a[off + k];
                    }
                    off += d;
                }
                if mask.y {
                    for k in 0..l {
                        ys[k] = y[k] - a[off + k];
                    }
                    off += l;
                }
                if mask.z {
                    for k in 0..l * d {
                        zs[k] = z[k] - a[off + k];
                    }
                }
                f(ts, &xs, &ys, &zs, &mut tmp);
                let c = kernel.weight(i);
                for (o, v) in out.iter_mut().zip(&tmp) {
                    *o += c * v;
                }
            }
        },
    )
}

fn mollify_terminal(h: &TerminalFn, kernel: &MollifierKernel, d: usize) -> TerminalFn {
    assert_eq!(kernel.dim, d);
    let h = h.clone();
    let kernel = kernel.clone();
    Arc::new(move |x: &[f64], out: &mut [f64]| {
        let mut xs = x.to_vec();
        let mut tmp = vec![0.0; out.len()];
        out.fill(0.0);
        for i in 0..kernel.len() {
            let a = kernel.node(i);
            for k in 0..d {
                xs[k] = x[k] - a[k];
            }
            h(&xs, &mut tmp);
            let c = kernel.weight(i);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o += c * v;
            }
        }
    })
}

fn apply_cutoff_coeff(f: &CoeffFn, box_l: f64) -> CoeffFn {
    let f = f.clone();
    Arc::new(move |t, x, y, z, out: &mut [f64]| {
        f(t, x, y, z, out);
        let chi = smooth_cutoff(x, box_l);
        for v in out.iter_mut() {
            *v *= chi;
        }
    })
}

fn apply_cutoff_terminal(h: &TerminalFn, box_l: f64) -> TerminalFn {
    let h = h.clone();
    Arc::new(move |x, out: &mut [f64]| {
        h(x, out);
        let chi = smooth_cutoff(x, box_l);
        for v in out.iter_mut() {
            *v *= chi;
        }
    })
}

/// Produces the level-`n` smoothed triple `(b_n, g_n, h_n)`.
///
/// Each coefficient is convolved jointly over its declared argument blocks;
/// blocks the coefficient does not read are skipped, which is exact. With
/// `cutoff_halfwidth = Some(L)` the smoothed coefficients are multiplied by a
/// smooth cutoff supported in twice the computational box, realizing compact
/// support in `x`.
pub fn mollify_set(
    coeffs: &CoefficientSet,
    spec: &GrowthSpec,
    level: u32,
    quad_order: usize,
    cutoff_halfwidth: Option<f64>,
) -> MollifiedCoefficients {
    let (d, l) = (spec.d, spec.l);
    let kernel_for = |mask: ArgMask| -> Option<MollifierKernel> {
        let dims = mask.active_dims(d, l);
        (dims > 0).then(|| make_kernel(level, dims, quad_order))
    };

    let mut b_n = match kernel_for(coeffs.b_args) {
        Some(k) => mollify_coeff(&coeffs.b, coeffs.b_args, &k, d, l, spec.horizon),
        None => coeffs.b.clone(),
    };
    let mut g_n = match kernel_for(coeffs.g_args) {
        Some(k) => mollify_coeff(&coeffs.g, coeffs.g_args, &k, d, l, spec.horizon),
        None => coeffs.g.clone(),
    };
    let h_kernel = make_kernel(level, d, quad_order);
    let mut h_n = mollify_terminal(&coeffs.h, &h_kernel, d);

    if let Some(box_l) = cutoff_halfwidth {
        b_n = apply_cutoff_coeff(&b_n, box_l);
        g_n = apply_cutoff_coeff(&g_n, box_l);
        h_n = apply_cutoff_terminal(&h_n, box_l);
    }

    MollifiedCoefficients {
        level,
        b_n,
        g_n,
        h_n,
        smoothed_b: coeffs.b_args,
        smoothed_g: coeffs.g_args,
        smoothed_h: true,
        cutoff_halfwidth,
        flag_b1: coeffs.flag_b1,
        flag_b2: coeffs.flag_b2,
        flag_g_no_z: coeffs.flag_g_no_z,
        flag_g_no_x: coeffs.flag_g_no_x,
        lipschitz_h: coeffs.lipschitz_h,
    }
}
