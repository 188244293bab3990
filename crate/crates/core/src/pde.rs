//! Backward solver for the quasilinear decoupling-field PDE
//!
//! ```text
//! ∂_t v + b_n(t, x, v, D_x v σ)·D_x v + ½ trace(σσ* D_xx v)
//!       + g_n(t, x, v, D_x v σ) = 0,        v(T, ·) = h_n
//! ```
//!
//! on the truncated box `[−L, L]^d` with homogeneous Neumann boundary.
//!
//! Scheme: semi-implicit (IMEX) backward stepping. The diffusion term is
//! implicit (one tridiagonal solve per axis per backward component), the
//! transport and source terms are explicit with `v` and `D_x v` lagged from
//! the previous (later-time) layer. Transport uses monotone upwind
//! differences, so together with the Neumann M-matrix diffusion step the
//! discrete maximum principle holds and `sup |v_n| ≤ R` is inherited exactly
//! from `|h_n| ≤ k₃` and the driver's growth.
//!
//! The stored gradient `w = D_x v` uses central differences at interior nodes
//! and one-sided differences at the boundary. Fields interpolate
//! multilinearly in `x` and piecewise-constant-left in `t`.

use std::io::{self, Write};

use ndarray::{Array3, Array4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::GrowthSpec;
use crate::linalg::{solve_tridiagonal, SquareMat};
use crate::mollifier::MollifiedCoefficients;
use crate::rng::Stream;

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("singular linear system at time layer {layer}; check grid and σ")]
    SingularSystem { layer: usize },
    #[error("non-finite values detected at time layer {layer}")]
    NonFinite { layer: usize },
}

/// Space-time grid for the PDE solve plus the terminal-layer offsets
/// `δ¹ > δ² > … > 0` used by interior-gradient diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub nx: usize,
    pub nt: usize,
    pub deltas: Vec<f64>,
}

pub const DEFAULT_DELTAS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

impl GridSpec {
    pub fn new(half_width: f64, nx: usize, nt: usize, deltas: Vec<f64>) -> Self {
        Self {
            half_width,
            nx,
            nt,
            deltas,
        }
    }

    /// Desk-scale default: `L = 6`, `Nx = 401`, `Nt = 200`.
    pub fn desk_default() -> Self {
        Self::new(6.0, 401, 200, DEFAULT_DELTAS.to_vec())
    }

    pub fn validate(&self, horizon: f64) -> Result<(), PdeError> {
        if self.nx < 3 || self.nx.is_multiple_of(2) {
            return Err(PdeError::InvalidGrid(format!(
                "nx must be an odd integer ≥ 3 (center node at the origin), got {}",
                self.nx
            )));
        }
        if self.nt < 1 {
            return Err(PdeError::InvalidGrid("nt must be ≥ 1".into()));
        }
        if !(self.half_width > 0.0) {
            return Err(PdeError::InvalidGrid("half width must be positive".into()));
        }
        for w in self.deltas.windows(2) {
            if w[1] >= w[0] {
                return Err(PdeError::InvalidGrid(
                    "terminal offsets must be strictly decreasing".into(),
                ));
            }
        }
        if let (Some(&first), Some(&last)) = (self.deltas.first(), self.deltas.last()) {
            if first >= horizon || last <= 0.0 {
                return Err(PdeError::InvalidGrid(
                    "terminal offsets must lie strictly inside (0, T)".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.nx - 1) as f64
    }
}

/// Grid values of the decoupling field `v_n` and its spatial gradient
/// `w_n = D_x v_n`.
///
/// Interpolation contract: multilinear in `x` (constant extrapolation outside
/// the box), piecewise-constant-left in `t`.
#[derive(Debug, Clone)]
pub struct DecouplingField {
    pub d: usize,
    pub l: usize,
    pub horizon: f64,
    pub sigma: SquareMat,
    pub grid: GridSpec,
    pub times: Vec<f64>,
    /// Axis nodes, shared by every coordinate direction.
    pub xs: Vec<f64>,
    /// `[nt+1, nodes, l]`, layer `nt` is the terminal layer.
    pub v: Array3<f64>,
    /// `[nt+1, nodes, l, d]`.
    pub w: Array4<f64>,
}

impl DecouplingField {
    pub fn node_count(&self) -> usize {
        self.grid.nx.pow(self.d as u32)
    }

    /// Cartesian coordinates of flat node `j` (row-major over axes).
    pub fn node_coord(&self, j: usize, out: &mut [f64]) {
        let nx = self.grid.nx;
        let mut rest = j;
        for k in 0..self.d {
            out[k] = self.xs[rest % nx];
            rest /= nx;
        }
    }

    /// Piecewise-constant-left layer lookup. The small index shift keeps
    /// queries at grid times (computed as `i·Δt` elsewhere) on their own
    /// layer despite rounding.
    pub fn layer_of(&self, t: f64) -> usize {
        if t >= self.horizon {
            return self.grid.nt;
        }
        let dt = self.horizon / self.grid.nt as f64;
        ((t / dt + 1e-9).floor() as usize).min(self.grid.nt)
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        x.iter().all(|&c| c.abs() <= self.grid.half_width)
    }

    /// Multilinear interpolation weights: per axis `(node index, fraction)`
    /// with the query clamped into the box.
    fn locate(&self, xi: f64) -> (usize, f64) {
        let l = self.grid.half_width;
        let dx = self.grid.dx();
        let clamped = xi.clamp(-l, l);
        let s = (clamped + l) / dx;
        let j = (s.floor() as usize).min(self.grid.nx - 2);
        (j, (s - j as f64).clamp(0.0, 1.0))
    }

    /// `v(t, x)` into `out` (length `l`).
    pub fn value(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let layer = self.layer_of(t);
        self.interp_layer_v(layer, x, out);
    }

    fn interp_layer_v(&self, layer: usize, x: &[f64], out: &mut [f64]) {
        match self.d {
            1 => {
                let (j, f) = self.locate(x[0]);
                for c in 0..self.l {
                    out[c] = (1.0 - f) * self.v[[layer, j, c]] + f * self.v[[layer, j + 1, c]];
                }
            }
            2 => {
                let (jx, fx) = self.locate(x[0]);
                let (jy, fy) = self.locate(x[1]);
                let nx = self.grid.nx;
                for c in 0..self.l {
                    let v00 = self.v[[layer, jy * nx + jx, c]];
                    let v10 = self.v[[layer, jy * nx + jx + 1, c]];
                    let v01 = self.v[[layer, (jy + 1) * nx + jx, c]];
                    let v11 = self.v[[layer, (jy + 1) * nx + jx + 1, c]];
                    out[c] = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10)
                        + fy * ((1.0 - fx) * v01 + fx * v11);
                }
            }
            _ => unreachable!("d ≤ 2 enforced at problem construction"),
        }
    }

    /// `w(t, x) = D_x v(t, x)` into `out` (row-major `l×d`).
    pub fn gradient_value(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let layer = self.layer_of(t);
        match self.d {
            1 => {
                let (j, f) = self.locate(x[0]);
                for c in 0..self.l {
                    out[c] =
                        (1.0 - f) * self.w[[layer, j, c, 0]] + f * self.w[[layer, j + 1, c, 0]];
                }
            }
            2 => {
                let (jx, fx) = self.locate(x[0]);
                let (jy, fy) = self.locate(x[1]);
                let nx = self.grid.nx;
                for c in 0..self.l {
                    for k in 0..2 {
                        let w00 = self.w[[layer, jy * nx + jx, c, k]];
                        let w10 = self.w[[layer, jy * nx + jx + 1, c, k]];
                        let w01 = self.w[[layer, (jy + 1) * nx + jx, c, k]];
                        let w11 = self.w[[layer, (jy + 1) * nx + jx + 1, c, k]];
                        out[c * 2 + k] = (1.0 - fy) * ((1.0 - fx) * w00 + fx * w10)
                            + fy * ((1.0 - fx) * w01 + fx * w11);
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn sup_v(&self) -> f64 {
        self.v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// Max Frobenius norm of `w` over layers with `times ≤ t_max`.
    pub fn sup_w_upto(&self, t_max: f64) -> f64 {
        let mut sup = 0.0f64;
        for (i, &t) in self.times.iter().enumerate() {
            if t > t_max + 1e-12 {
                break;
            }
            for j in 0..self.node_count() {
                let mut s = 0.0;
                for c in 0..self.l {
                    for k in 0..self.d {
                        let val = self.w[[i, j, c, k]];
                        s += val * val;
                    }
                }
                sup = sup.max(s.sqrt());
            }
        }
        sup
    }

    pub fn sup_w(&self) -> f64 {
        self.sup_w_upto(self.horizon)
    }

    /// Binary-free CSV export with columns `t, x…, v…, w…`.
    pub fn export_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "t")?;
        for k in 0..self.d {
            write!(out, ",x{}", k + 1)?;
        }
        for c in 0..self.l {
            write!(out, ",v{}", c + 1)?;
        }
        for c in 0..self.l {
            for k in 0..self.d {
                write!(out, ",w{}{}", c + 1, k + 1)?;
            }
        }
        writeln!(out)?;
        let mut coord = vec![0.0; self.d];
        for (i, &t) in self.times.iter().enumerate() {
            for j in 0..self.node_count() {
                self.node_coord(j, &mut coord);
                write!(out, "{t:.17e}")?;
                for &c in &coord {
                    write!(out, ",{c:.17e}")?;
                }
                for c in 0..self.l {
                    write!(out, ",{:.17e}", self.v[[i, j, c]])?;
                }
                for c in 0..self.l {
                    for k in 0..self.d {
                        write!(out, ",{:.17e}", self.w[[i, j, c, k]])?;
                    }
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Central differences at interior nodes, one-sided at the boundary,
/// written into the layer `layer` of `w`.
fn gradient_layer(field: &mut DecouplingField, layer: usize) {
    let nx = field.grid.nx;
    let dx = field.grid.dx();
    let nodes = field.node_count();
    let stride = |axis: usize| nx.pow(axis as u32);
    for j in 0..nodes {
        for k in 0..field.d {
            let along = (j / stride(k)) % nx;
            for c in 0..field.l {
                let grad = if along == 0 {
                    (field.v[[layer, j + stride(k), c]] - field.v[[layer, j, c]]) / dx
                } else if along == nx - 1 {
                    (field.v[[layer, j, c]] - field.v[[layer, j - stride(k), c]]) / dx
                } else {
                    (field.v[[layer, j + stride(k), c]] - field.v[[layer, j - stride(k), c]])
                        / (2.0 * dx)
                };
                field.w[[layer, j, c, k]] = grad;
            }
        }
    }
}

/// Recomputes the stored gradient of every layer from `v`.
pub fn gradient(field: &mut DecouplingField) {
    for layer in 0..=field.grid.nt {
        gradient_layer(field, layer);
    }
}

/// Monotone upwind transport difference along axis `k` with a Neumann
/// (zero-slope) ghost at the boundary.
#[inline]
#[allow(clippy::too_many_arguments)]
fn upwind(
    v: &Array3<f64>,
    layer: usize,
    j: usize,
    c: usize,
    axis_pos: usize,
    stride: usize,
    nx: usize,
    dx: f64,
    velocity: f64,
) -> f64 {
    if velocity > 0.0 {
        if axis_pos == nx - 1 {
            0.0
        } else {
            velocity * (v[[layer, j + stride, c]] - v[[layer, j, c]]) / dx
        }
    } else if velocity < 0.0 {
        if axis_pos == 0 {
            0.0
        } else {
            velocity * (v[[layer, j, c]] - v[[layer, j - stride, c]]) / dx
        }
    } else {
        0.0
    }
}

/// Solves the decoupling-field PDE backward in time.
pub fn solve_decoupling_field(
    mc: &MollifiedCoefficients,
    spec: &GrowthSpec,
    grid: &GridSpec,
) -> Result<DecouplingField, PdeError> {
    grid.validate(spec.horizon)?;
    let (d, l) = (spec.d, spec.l);
    let nx = grid.nx;
    let nt = grid.nt;
    let nodes = nx.pow(d as u32);
    let dx = grid.dx();
    let dt = spec.horizon / nt as f64;

    let gram = spec.sigma.gram();
    // positive-definiteness beyond the ellipticity check at construction
    if gram.min_eigenvalue_sym() <= 0.0 {
        return Err(PdeError::SingularSystem { layer: nt });
    }
    let diff = |k: usize| 0.5 * gram.at(k, k);

    let times: Vec<f64> = (0..=nt).map(|i| i as f64 * dt).collect();
    let xs: Vec<f64> = (0..nx).map(|j| -grid.half_width + j as f64 * dx).collect();

    let mut field = DecouplingField {
        d,
        l,
        horizon: spec.horizon,
        sigma: spec.sigma.clone(),
        grid: grid.clone(),
        times,
        xs,
        v: Array3::zeros((nt + 1, nodes, l)),
        w: Array4::zeros((nt + 1, nodes, l, d)),
    };

    // terminal layer: v(T, ·) = h_n sampled on the grid, exactly
    {
        let mut coord = vec![0.0; d];
        let mut hv = vec![0.0; l];
        for j in 0..nodes {
            field.node_coord(j, &mut coord);
            (mc.h_n)(&coord, &mut hv);
            for c in 0..l {
                field.v[[nt, j, c]] = hv[c];
            }
        }
    }
    gradient_layer(&mut field, nt);

    // tridiagonal factors (I − Δt·½(σσ*)_kk·D_xx) with Neumann reflection rows
    let mut factors: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::with_capacity(d);
    for k in 0..d {
        let r = dt * diff(k) / (dx * dx);
        let mut lower = vec![-r; nx];
        let mut diag = vec![1.0 + 2.0 * r; nx];
        let mut upper = vec![-r; nx];
        upper[0] = -2.0 * r;
        lower[nx - 1] = -2.0 * r;
        lower[0] = 0.0;
        upper[nx - 1] = 0.0;
        diag[0] = 1.0 + 2.0 * r;
        diag[nx - 1] = 1.0 + 2.0 * r;
        factors.push((lower, diag, upper));
    }

    let mut coord = vec![0.0; d];
    let mut yv = vec![0.0; l];
    let mut zv = vec![0.0; l * d];
    let mut bv = vec![0.0; d];
    let mut gv = vec![0.0; l];
    let mut rhs = vec![0.0; nodes * l];
    let mut line = vec![0.0; nx];
    let mut scratch: Vec<f64> = Vec::new();

    for layer in (0..nt).rev() {
        let t_lag = field.times[layer + 1];
        // explicit transport + source with v, D_x v lagged from layer+1
        for j in 0..nodes {
            field.node_coord(j, &mut coord);
            for c in 0..l {
                yv[c] = field.v[[layer + 1, j, c]];
            }
            // z = w σ
            for c in 0..l {
                for kp in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += field.w[[layer + 1, j, c, k]] * spec.sigma.at(k, kp);
                    }
                    zv[c * d + kp] = s;
                }
            }
            (mc.b_n)(t_lag, &coord, &yv, &zv, &mut bv);
            (mc.g_n)(t_lag, &coord, &yv, &zv, &mut gv);
            if bv.iter().chain(gv.iter()).any(|x| !x.is_finite()) {
                return Err(PdeError::NonFinite { layer });
            }
            for c in 0..l {
                let mut transport = 0.0;
                for k in 0..d {
                    let stride = nx.pow(k as u32);
                    let along = (j / stride) % nx;
                    transport += upwind(&field.v, layer + 1, j, c, along, stride, nx, dx, bv[k]);
                }
                let mut explicit = transport + gv[c];
                if d == 2 {
                    // explicit mixed diffusion (σσ*)₁₂ ∂_xy v, reflected at ∂box
                    let a12 = gram.at(0, 1);
                    if a12 != 0.0 {
                        let ix = j % nx;
                        let iy = j / nx;
                        let xp = (ix + 1).min(nx - 1);
                        let xm = ix.saturating_sub(1);
                        let yp = (iy + 1).min(nx - 1);
                        let ym = iy.saturating_sub(1);
                        let vpp = field.v[[layer + 1, yp * nx + xp, c]];
                        let vpm = field.v[[layer + 1, ym * nx + xp, c]];
                        let vmp = field.v[[layer + 1, yp * nx + xm, c]];
                        let vmm = field.v[[layer + 1, ym * nx + xm, c]];
                        explicit += a12 * (vpp - vpm - vmp + vmm) / (4.0 * dx * dx);
                    }
                }
                rhs[j * l + c] = field.v[[layer + 1, j, c]] + dt * explicit;
            }
        }

        // implicit diffusion: one tridiagonal sweep per axis per component
        for c in 0..l {
            for (axis, (lower, diag, upper)) in factors.iter().enumerate() {
                let stride = nx.pow(axis as u32);
                let lines = nodes / nx;
                for line_idx in 0..lines {
                    // base index of this grid line along `axis`
                    let block = line_idx / stride;
                    let offset = line_idx % stride;
                    let base = block * stride * nx + offset;
                    for p in 0..nx {
                        line[p] = rhs[(base + p * stride) * l + c];
                    }
                    if !solve_tridiagonal(lower, diag, upper, &mut line, &mut scratch) {
                        return Err(PdeError::SingularSystem { layer });
                    }
                    for p in 0..nx {
                        rhs[(base + p * stride) * l + c] = line[p];
                    }
                }
            }
        }

        let mut non_finite = false;
        for j in 0..nodes {
            for c in 0..l {
                let val = rhs[j * l + c];
                if !val.is_finite() {
                    non_finite = true;
                }
                field.v[[layer, j, c]] = val;
            }
        }
        if non_finite {
            return Err(PdeError::NonFinite { layer });
        }
        gradient_layer(&mut field, layer);
    }

    Ok(field)
}

/// Interior gradient bound at one terminal offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaBound {
    pub delta: f64,
    pub sup_grad: f64,
}

/// A-priori diagnostics for one solved field: sup bound, interior gradient
/// bounds per terminal offset, empirical parabolic-Hölder fit and a local
/// discrete Sobolev integral.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AprioriReport {
    pub sup_v: f64,
    pub r_bound: f64,
    pub grad_bound_per_delta: Vec<DeltaBound>,
    /// Least-squares exponent of `|Δv|` against the parabolic distance
    /// `|x−x'| + |t−t'|^{1/2}` on log-log axes.
    pub holder_alpha: f64,
    pub holder_c: f64,
    pub holder_pairs: usize,
    /// `∫_0^{T−δ} ∫_𝒪 |D_x v|^p + |D_xx v|^p dx dt` over the box
    /// `𝒪 = [−L/2, L/2]^d` with `δ` the largest configured offset.
    pub sobolev_local: f64,
    pub sobolev_delta: f64,
    pub sobolev_box_halfwidth: f64,
    pub p: f64,
}

/// Computes the a-priori diagnostics. Always produces a report; pass/fail is
/// the caller's decision.
pub fn check_apriori(
    field: &DecouplingField,
    spec: &GrowthSpec,
    grid: &GridSpec,
    p: f64,
) -> AprioriReport {
    assert!(p >= 2.0, "Sobolev exponent must be ≥ 2");
    let sup_v = field.sup_v();

    let grad_bound_per_delta = grid
        .deltas
        .iter()
        .map(|&delta| DeltaBound {
            delta,
            sup_grad: field.sup_w_upto(spec.horizon - delta),
        })
        .collect();

    // Hölder fit on ~10³ random node pairs with parabolic distance in [Δx, L/2]
    let dx = grid.dx();
    let mut stream = Stream::new(0xA11CE, 1);
    let nodes = field.node_count();
    let mut logs: Vec<(f64, f64)> = Vec::new();
    let mut coord_a = vec![0.0; field.d];
    let mut coord_b = vec![0.0; field.d];
    let mut attempts = 0;
    while logs.len() < 1000 && attempts < 40_000 {
        attempts += 1;
        let (ia, ja) = (stream.index(grid.nt + 1), stream.index(nodes));
        let (ib, jb) = (stream.index(grid.nt + 1), stream.index(nodes));
        field.node_coord(ja, &mut coord_a);
        field.node_coord(jb, &mut coord_b);
        let space: f64 = coord_a
            .iter()
            .zip(&coord_b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let dist = space + (field.times[ia] - field.times[ib]).abs().sqrt();
        if dist < dx || dist > grid.half_width / 2.0 {
            continue;
        }
        let mut dv = 0.0f64;
        for c in 0..field.l {
            dv = dv.max((field.v[[ia, ja, c]] - field.v[[ib, jb, c]]).abs());
        }
        if dv < 1e-14 {
            continue;
        }
        logs.push((dist.ln(), dv.ln()));
    }
    let (holder_alpha, holder_c) = if logs.len() >= 8 {
        let n = logs.len() as f64;
        let sx: f64 = logs.iter().map(|p| p.0).sum();
        let sy: f64 = logs.iter().map(|p| p.1).sum();
        let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-12 {
            (0.0, 0.0)
        } else {
            let slope = (n * sxy - sx * sy) / denom;
            let intercept = (sy - slope * sx) / n;
            (slope, intercept.exp())
        }
    } else {
        (0.0, 0.0)
    };

    // discrete Sobolev integral over [0, T−δ¹] × [−L/2, L/2]^d
    let sobolev_delta = grid.deltas.first().copied().unwrap_or(0.0);
    let t_cut = spec.horizon - sobolev_delta;
    let box_half = grid.half_width / 2.0;
    let dt = spec.horizon / grid.nt as f64;
    let nx = grid.nx;
    let mut sobolev = 0.0;
    let mut coord = vec![0.0; field.d];
    for (i, &t) in field.times.iter().enumerate() {
        if t > t_cut + 1e-12 {
            break;
        }
        for j in 0..nodes {
            field.node_coord(j, &mut coord);
            if coord.iter().any(|&c| c.abs() > box_half) {
                continue;
            }
            for c in 0..field.l {
                let mut grad2 = 0.0;
                let mut hess2 = 0.0;
                for k in 0..field.d {
                    let g = field.w[[i, j, c, k]];
                    grad2 += g * g;
                    let stride = nx.pow(k as u32);
                    let along = (j / stride) % nx;
                    if along > 0 && along < nx - 1 {
                        let h = (field.v[[i, j + stride, c]] - 2.0 * field.v[[i, j, c]]
                            + field.v[[i, j - stride, c]])
                            / (dx * dx);
                        hess2 += h * h;
                    }
                }
                sobolev +=
                    (grad2.sqrt().powf(p) + hess2.sqrt().powf(p)) * dx.powi(field.d as i32) * dt;
            }
        }
    }

    AprioriReport {
        sup_v,
        r_bound: spec.r_bound,
        grad_bound_per_delta,
        holder_alpha,
        holder_c,
        holder_pairs: logs.len(),
        sobolev_local: sobolev,
        sobolev_delta,
        sobolev_box_halfwidth: box_half,
        p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin_problem;
    use crate::mollifier::mollify_set;

    fn small_grid() -> GridSpec {
        GridSpec::new(4.0, 81, 40, vec![0.2, 0.1])
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(6.0, 400, 100, vec![]).validate(1.0).is_err()); // even nx
        assert!(GridSpec::new(6.0, 401, 0, vec![]).validate(1.0).is_err());
        assert!(GridSpec::new(6.0, 401, 10, vec![0.1, 0.2])
            .validate(1.0)
            .is_err()); // increasing
        assert!(GridSpec::new(6.0, 401, 10, vec![1.5])
            .validate(1.0)
            .is_err()); // δ ≥ T
        assert!(GridSpec::desk_default().validate(1.0).is_ok());
    }

    #[test]
    fn constant_terminal_gives_constant_field() {
        // b ≡ 0, g ≡ 0, h ≡ c solves the PDE exactly
        let p = builtin_problem("linear-ode").unwrap();
        let mut coeffs = p.coeffs.clone();
        coeffs.g = std::sync::Arc::new(|_t, _x, _y, _z, out: &mut [f64]| out.fill(0.0));
        coeffs.g_args = crate::coefficients::ArgMask::NONE;
        let mc = mollify_set(&coeffs, &p.spec, 4, 8, None);
        let field = solve_decoupling_field(&mc, &p.spec, &small_grid()).unwrap();
        for layer in 0..=field.grid.nt {
            for j in 0..field.node_count() {
                assert!(
                    (field.v[[layer, j, 0]] - 1.0).abs() < 1e-12,
                    "layer {layer} node {j}: {}",
                    field.v[[layer, j, 0]]
                );
            }
        }
    }

    #[test]
    fn terminal_layer_is_hn_bitwise() {
        let p = builtin_problem("heat").unwrap();
        let mc = mollify_set(&p.coeffs, &p.spec, 8, 8, None);
        let grid = small_grid();
        let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        let mut coord = [0.0];
        let mut hv = [0.0];
        for j in 0..field.node_count() {
            field.node_coord(j, &mut coord);
            (mc.h_n)(&coord, &mut hv);
            assert_eq!(field.v[[grid.nt, j, 0]].to_bits(), hv[0].to_bits());
        }
    }

    #[test]
    fn linear_ode_matches_closed_form() {
        let p = builtin_problem("linear-ode").unwrap();
        let mc = mollify_set(&p.coeffs, &p.spec, 8, 16, None);
        let grid = GridSpec::new(4.0, 41, 200, vec![0.2, 0.1]);
        let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        let expect = (-1.0f64).exp();
        for j in 0..field.node_count() {
            assert!(
                (field.v[[0, j, 0]] - expect).abs() <= 2e-3,
                "node {j}: {} vs {expect}",
                field.v[[0, j, 0]]
            );
        }
    }

    #[test]
    fn gradient_exact_for_linear_and_quadratic() {
        let p = builtin_problem("heat").unwrap();
        let mc = mollify_set(&p.coeffs, &p.spec, 8, 8, None);
        let grid = small_grid();
        let mut field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        let nodes = field.node_count();
        let mut coord = [0.0];
        // overwrite a layer with x and x²; central differences are exact on both
        for j in 0..nodes {
            field.node_coord(j, &mut coord);
            field.v[[0, j, 0]] = coord[0];
            field.v[[1, j, 0]] = coord[0] * coord[0];
        }
        gradient(&mut field);
        for j in 1..nodes - 1 {
            field.node_coord(j, &mut coord);
            assert!((field.w[[0, j, 0, 0]] - 1.0).abs() < 1e-12);
            assert!((field.w[[1, j, 0, 0]] - 2.0 * coord[0]).abs() < 1e-11);
        }
    }

    #[test]
    fn apriori_constant_field() {
        let p = builtin_problem("linear-ode").unwrap();
        let mut coeffs = p.coeffs.clone();
        coeffs.g = std::sync::Arc::new(|_t, _x, _y, _z, out: &mut [f64]| out.fill(0.0));
        coeffs.g_args = crate::coefficients::ArgMask::NONE;
        let mc = mollify_set(&coeffs, &p.spec, 4, 8, None);
        let grid = small_grid();
        let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        let report = check_apriori(&field, &p.spec, &grid, 2.0);
        assert!((report.sup_v - 1.0).abs() < 1e-12);
        for b in &report.grad_bound_per_delta {
            assert!(b.sup_grad < 1e-12);
        }
        assert!(report.sobolev_local < 1e-20);
        assert_eq!(report.holder_pairs, 0);
    }

    #[test]
    fn maximum_principle_on_heat() {
        let p = builtin_problem("heat").unwrap();
        let mc = mollify_set(&p.coeffs, &p.spec, 4, 16, None);
        let field = solve_decoupling_field(&mc, &p.spec, &small_grid()).unwrap();
        assert!(field.sup_v() <= p.spec.r_bound * (1.0 + 1e-6));
    }

    #[test]
    fn interp_constant_left_in_time() {
        let p = builtin_problem("heat").unwrap();
        let mc = mollify_set(&p.coeffs, &p.spec, 8, 8, None);
        let grid = GridSpec::new(4.0, 81, 10, vec![0.2]);
        let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        let mut a = [0.0];
        let mut b = [0.0];
        // any t in [t_3, t_4) reads layer 3
        field.value(0.3, &[0.5], &mut a);
        field.value(0.3999, &[0.5], &mut b);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        field.value(field.horizon, &[0.5], &mut a);
        let mut hv = [0.0];
        // beyond-the-box query clamps to the box edge
        field.value(field.horizon, &[100.0], &mut b);
        (mc.h_n)(&[4.0], &mut hv);
        assert!((b[0] - hv[0]).abs() < 1e-12);
        assert!(a[0].is_finite());
    }

    #[test]
    fn two_dimensional_constant_and_driftless_solve() {
        use crate::coefficients::{ArgMask, CoefficientSet, GrowthSpec};
        use std::sync::Arc;
        let spec = GrowthSpec::new(
            2,
            1,
            1.0,
            SquareMat::new(2, vec![1.0, 0.0, 0.3, 1.0]),
            0.5,
            0.0,
            0.0,
            1.0,
        )
        .unwrap();
        let coeffs = CoefficientSet {
            b: Arc::new(|_t, _x, _y, _z, out: &mut [f64]| out.fill(0.0)),
            g: Arc::new(|_t, _x, _y, _z, out: &mut [f64]| out.fill(0.0)),
            h: Arc::new(|x, out: &mut [f64]| out[0] = (x[0] + 0.5 * x[1]).tanh()),
            b_args: ArgMask::NONE,
            g_args: ArgMask::NONE,
            flag_b1: true,
            flag_b2: true,
            flag_g_no_z: true,
            flag_g_no_x: true,
            lipschitz_h: Some(1.2),
        };
        let mc = mollify_set(&coeffs, &spec, 4, 8, None);
        let grid = GridSpec::new(3.0, 31, 20, vec![0.2]);
        let field = solve_decoupling_field(&mc, &spec, &grid).unwrap();
        assert!(field.sup_v() <= 1.0 + 1e-9);
        let mut out = [0.0];
        field.value(0.0, &[0.0, 0.0], &mut out);
        assert!(
            out[0].abs() < 0.2,
            "centered value should stay near 0, got {}",
            out[0]
        );
    }
}
