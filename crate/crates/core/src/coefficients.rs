//! Problem instances: growth constants, coefficient callables and the
//! built-in test catalog.
//!
//! A problem is the data of the coupled system
//!
//! ```text
//! dX = b(t, X, Y, Z) dt + σ dW,      X_0 = x
//! dY = −g(t, X, Y, Z) dt + Z dW,     Y_T = h(X_T)
//! ```
//!
//! where `b : [0,T]×ℝ^d×ℝ^l×ℝ^{l×d} → ℝ^d`, `g : … → ℝ^l`, `h : ℝ^d → ℝ^l`
//! are Borel measurable, with linear growth in `(y, z)` controlled by the
//! constants `k₁, k₂` and terminal bound `k₃`. The maximum-principle bound
//! for the decoupling field is `R = k₃ e^{T k₂}`.
//!
//! Coefficients are host-level callables plus a metadata record; there is no
//! coefficient DSL. All callables must be pure functions of their arguments
//! (they are evaluated concurrently from many workers).

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm, SquareMat};
use crate::quad::gaussian_expectation;
use crate::rng::halton;

/// Drift/driver callable `(t, x, y, z, out)`; `z` is row-major `l×d`.
pub type CoeffFn = Arc<dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// Terminal callable `(x, out)`.
pub type TerminalFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Closed-form field callable `(t, x, out)`.
pub type FieldFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("forward dimension d = {0} not supported at desk scale; use d ∈ {{1, 2}}")]
    UnsupportedDimension(usize),
    #[error("backward dimension l must be ≥ 1")]
    ZeroBackwardDimension,
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("sigma must have {expected} entries (d×d), got {got}")]
    SigmaShape { expected: usize, got: usize },
    #[error("ellipticity constant λ must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("ellipticity violated: min eigenvalue of σσ* is {min_eig}, below λ = {lambda}")]
    EllipticityViolated { min_eig: f64, lambda: f64 },
    #[error("growth constants k₁, k₂, k₃ must be nonnegative")]
    NegativeGrowthConstant,
    #[error("problem not admissible: needs boundedness in z (B1) or a Lipschitz terminal (B2)")]
    NotAdmissible,
    #[error("unknown problem '{name}'; available: {available}")]
    UnknownProblem { name: String, available: String },
}

/// Which argument blocks of a coefficient are live. Used both as metadata
/// ("this drift only reads x and y") and as the smoothing mask for
/// mollification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgMask {
    pub t: bool,
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

impl ArgMask {
    pub const ALL: ArgMask = ArgMask {
        t: true,
        x: true,
        y: true,
        z: true,
    };
    pub const NONE: ArgMask = ArgMask {
        t: false,
        x: false,
        y: false,
        z: false,
    };

    pub fn only_x() -> Self {
        ArgMask {
            t: false,
            x: true,
            y: false,
            z: false,
        }
    }
    pub fn only_y() -> Self {
        ArgMask {
            t: false,
            x: false,
            y: true,
            z: false,
        }
    }
    pub fn only_z() -> Self {
        ArgMask {
            t: false,
            x: false,
            y: false,
            z: true,
        }
    }
    pub fn xy() -> Self {
        ArgMask {
            t: false,
            x: true,
            y: true,
            z: false,
        }
    }

    /// Number of scalar dimensions covered by the mask.
    pub fn active_dims(&self, d: usize, l: usize) -> usize {
        (self.t as usize)
            + (self.x as usize) * d
            + (self.y as usize) * l
            + (self.z as usize) * l * d
    }
}

/// Dimensions, horizon, diffusion matrix and growth constants of a problem,
/// together with the derived maximum-principle bound `R = k₃ e^{T k₂}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthSpec {
    pub d: usize,
    pub l: usize,
    pub horizon: f64,
    pub sigma: SquareMat,
    pub lambda: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub r_bound: f64,
}

/// `R = k₃ e^{T k₂}`: uniform bound on the decoupling field.
pub fn bound_r(k2: f64, k3: f64, horizon: f64) -> f64 {
    k3 * (horizon * k2).exp()
}

impl GrowthSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        l: usize,
        horizon: f64,
        sigma: SquareMat,
        lambda: f64,
        k1: f64,
        k2: f64,
        k3: f64,
    ) -> Result<Self, CoefficientError> {
        if d == 0 || d > 2 {
            return Err(CoefficientError::UnsupportedDimension(d));
        }
        if l == 0 {
            return Err(CoefficientError::ZeroBackwardDimension);
        }
        if !(horizon > 0.0) {
            return Err(CoefficientError::NonPositiveHorizon(horizon));
        }
        if sigma.n != d || sigma.data.len() != d * d {
            return Err(CoefficientError::SigmaShape {
                expected: d * d,
                got: sigma.data.len(),
            });
        }
        if !(lambda > 0.0) {
            return Err(CoefficientError::NonPositiveLambda(lambda));
        }
        let min_eig = sigma.gram().min_eigenvalue_sym();
        if min_eig < lambda - 1e-10 {
            return Err(CoefficientError::EllipticityViolated { min_eig, lambda });
        }
        if k1 < 0.0 || k2 < 0.0 || k3 < 0.0 {
            return Err(CoefficientError::NegativeGrowthConstant);
        }
        let r_bound = bound_r(k2, k3, horizon);
        Ok(Self {
            d,
            l,
            horizon,
            sigma,
            lambda,
            k1,
            k2,
            k3,
            r_bound,
        })
    }

    pub fn bound_r(&self) -> f64 {
        bound_r(self.k2, self.k3, self.horizon)
    }

    /// `σσ*`.
    pub fn diffusion_gram(&self) -> SquareMat {
        self.sigma.gram()
    }

    /// `z` dimension as a flat slice, row-major `l×d`.
    pub fn z_len(&self) -> usize {
        self.l * self.d
    }
}

/// Evaluable coefficient triple with structural flags.
///
/// `flag_b1`: `b` and `g` are bounded in `z` with `|b| + |g| ≤ C(1 + |y|)`.
/// `flag_b2`: `h` is Lipschitz with constant at most `k₃`.
/// `flag_g_no_z`: the driver does not read `z` and is Lipschitz in `(x, y)`.
/// `flag_g_no_x`: the driver does not read `x` and is C¹/Lipschitz in `(y, z)`.
///
/// At least one of `flag_b1`, `flag_b2` must hold for the pipeline to accept
/// the problem.
#[derive(Clone)]
pub struct CoefficientSet {
    pub b: CoeffFn,
    pub g: CoeffFn,
    pub h: TerminalFn,
    pub b_args: ArgMask,
    pub g_args: ArgMask,
    pub flag_b1: bool,
    pub flag_b2: bool,
    pub flag_g_no_z: bool,
    pub flag_g_no_x: bool,
    pub lipschitz_h: Option<f64>,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("b_args", &self.b_args)
            .field("g_args", &self.g_args)
            .field("flag_b1", &self.flag_b1)
            .field("flag_b2", &self.flag_b2)
            .field("flag_g_no_z", &self.flag_g_no_z)
            .field("flag_g_no_x", &self.flag_g_no_x)
            .field("lipschitz_h", &self.lipschitz_h)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    /// Theorem hypothesis: at least one of B1/B2 must be declared.
    pub fn admissible(&self) -> Result<(), CoefficientError> {
        if self.flag_b1 || self.flag_b2 {
            Ok(())
        } else {
            Err(CoefficientError::NotAdmissible)
        }
    }
}

/// Optional closed-form decoupling field used as an oracle in tests.
#[derive(Clone)]
pub struct ClosedFormOracle {
    pub v_exact: FieldFn,
    /// Spatial gradient `(t, x) ↦ D_x v`, row-major `l×d`.
    pub grad_exact: Option<FieldFn>,
    pub description: String,
}

impl ClosedFormOracle {
    /// Max gap `|v(T, x) − h(x)|` over the given points; must vanish (≤ 1e-12).
    pub fn terminal_gap(&self, h: &TerminalFn, horizon: f64, points: &[Vec<f64>], l: usize) -> f64 {
        let mut vb = vec![0.0; l];
        let mut hb = vec![0.0; l];
        let mut gap = 0.0f64;
        for x in points {
            (self.v_exact)(horizon, x, &mut vb);
            (h)(x, &mut hb);
            for c in 0..l {
                gap = gap.max((vb[c] - hb[c]).abs());
            }
        }
        gap
    }
}

/// A named problem from the catalog.
pub struct Problem {
    pub name: String,
    pub description: String,
    pub coeffs: CoefficientSet,
    pub spec: GrowthSpec,
    pub oracle: Option<ClosedFormOracle>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("spec", &self.spec)
            .field("coeffs", &self.coeffs)
            .field("has_oracle", &self.oracle.is_some())
            .finish()
    }
}

/// Sample point witnessing a growth-bound ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthWitness {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub ratio: f64,
}

/// Outcome of sampled growth validation. Never an error: violations are
/// reported with the witnessing sample point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub budget: usize,
    pub box_halfwidth: f64,
    pub max_ratio_b: f64,
    pub max_ratio_g: f64,
    pub max_ratio_h: f64,
    pub witness_b: Option<GrowthWitness>,
    pub witness_g: Option<GrowthWitness>,
    pub witness_h: Option<GrowthWitness>,
}

const RATIO_TOL: f64 = 1.0 + 1e-9;

fn growth_ratio(value_norm: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        if value_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        value_norm / denom
    }
}

/// Samples `(t, x, y, z)` quasi-randomly (Halton lattice) over
/// `[0,T] × [−L,L]^{d+l+l·d}` and reports the worst ratios
/// `|b| / (k₁(1+|y|+|z|))`, `|g| / (k₂(1+|y|+|z|))`, `|h| / k₃`.
///
/// Passes iff every ratio stays ≤ 1 + 1e-9. Discontinuities are fine: the
/// check is pointwise on the sample set, which is the best a merely
/// measurable coefficient admits.
pub fn validate_growth(
    coeffs: &CoefficientSet,
    spec: &GrowthSpec,
    budget: usize,
    seed: u64,
) -> ValidationReport {
    validate_growth_on(coeffs, spec, budget, seed, 10.0)
}

/// Same as [`validate_growth`] on a caller-declared box `[−L, L]`.
pub fn validate_growth_on(
    coeffs: &CoefficientSet,
    spec: &GrowthSpec,
    budget: usize,
    seed: u64,
    box_halfwidth: f64,
) -> ValidationReport {
    assert!(budget >= 1, "sampling budget must be ≥ 1");
    let (d, l) = (spec.d, spec.l);
    let dim = 1 + d + l + l * d;
    let mut unit = vec![0.0; dim];
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; l];
    let mut z = vec![0.0; l * d];
    let mut bv = vec![0.0; d];
    let mut gv = vec![0.0; l];
    let mut hv = vec![0.0; l];

    let mut max_b = 0.0f64;
    let mut max_g = 0.0f64;
    let mut max_h = 0.0f64;
    let mut wit_b: Option<GrowthWitness> = None;
    let mut wit_g: Option<GrowthWitness> = None;
    let mut wit_h: Option<GrowthWitness> = None;

    // deterministic offset so different seeds explore different lattice slices
    let offset = seed % 65_536;
    for i in 0..budget {
        halton(offset + i as u64, dim, &mut unit);
        let t = unit[0] * spec.horizon;
        for k in 0..d {
            x[k] = (2.0 * unit[1 + k] - 1.0) * box_halfwidth;
        }
        for k in 0..l {
            y[k] = (2.0 * unit[1 + d + k] - 1.0) * box_halfwidth;
        }
        for k in 0..l * d {
            z[k] = (2.0 * unit[1 + d + l + k] - 1.0) * box_halfwidth;
        }
        let denom_yz = 1.0 + norm(&y) + norm(&z);

        (coeffs.b)(t, &x, &y, &z, &mut bv);
        let rb = growth_ratio(norm(&bv), spec.k1 * denom_yz);
        if rb > max_b {
            max_b = rb;
            wit_b = Some(GrowthWitness {
                t,
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                ratio: rb,
            });
        }

        (coeffs.g)(t, &x, &y, &z, &mut gv);
        let rg = growth_ratio(norm(&gv), spec.k2 * denom_yz);
        if rg > max_g {
            max_g = rg;
            wit_g = Some(GrowthWitness {
                t,
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                ratio: rg,
            });
        }

        (coeffs.h)(&x, &mut hv);
        let rh = growth_ratio(norm(&hv), spec.k3);
        if rh > max_h {
            max_h = rh;
            wit_h = Some(GrowthWitness {
                t,
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                ratio: rh,
            });
        }
    }

    let pass = max_b <= RATIO_TOL && max_g <= RATIO_TOL && max_h <= RATIO_TOL;
    ValidationReport {
        pass,
        budget,
        box_halfwidth,
        max_ratio_b: max_b,
        max_ratio_g: max_g,
        max_ratio_h: max_h,
        witness_b: if max_b > RATIO_TOL { wit_b } else { None },
        witness_g: if max_g > RATIO_TOL { wit_g } else { None },
        witness_h: if max_h > RATIO_TOL { wit_h } else { None },
    }
}

/// `sign` with the Borel choice `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub const CATALOG: [&str; 4] = ["heat", "sign-drift", "linear-ode", "coupled-lip"];

/// Builds a catalog problem. All catalog instances use `d = l = 1`, `σ = 1`,
/// `T = 1` and pass [`validate_growth`] with their declared constants.
pub fn builtin_problem(name: &str) -> Result<Problem, CoefficientError> {
    match name {
        "heat" => Ok(heat_problem()),
        "sign-drift" => Ok(sign_drift_problem()),
        "linear-ode" => Ok(linear_ode_problem()),
        "coupled-lip" => Ok(coupled_lip_problem()),
        other => Err(CoefficientError::UnknownProblem {
            name: other.to_string(),
            available: CATALOG.join(", "),
        }),
    }
}

fn zero_coeff() -> CoeffFn {
    Arc::new(|_t, _x, _y, _z, out| out.fill(0.0))
}

/// `b ≡ 0`, `g ≡ 0`, `h = tanh`: the decoupled heat equation. Oracle:
/// Gaussian smoothing of `tanh` with variance `T − t`, by adaptive quadrature.
fn heat_problem() -> Problem {
    let horizon = 1.0;
    let spec = GrowthSpec::new(1, 1, horizon, SquareMat::scalar(1.0), 1.0, 0.0, 0.0, 1.0).unwrap();
    let coeffs = CoefficientSet {
        b: zero_coeff(),
        g: zero_coeff(),
        h: Arc::new(|x, out| out[0] = x[0].tanh()),
        b_args: ArgMask::NONE,
        g_args: ArgMask::NONE,
        flag_b1: true,
        flag_b2: true,
        flag_g_no_z: true,
        flag_g_no_x: true,
        lipschitz_h: Some(1.0),
    };
    let oracle = ClosedFormOracle {
        v_exact: Arc::new(move |t, x, out| {
            let var = (horizon - t).max(0.0);
            let x0 = x[0];
            out[0] = gaussian_expectation(&|u| (x0 + u).tanh(), var.sqrt(), 1e-11);
        }),
        grad_exact: Some(Arc::new(move |t, x, out| {
            let var = (horizon - t).max(0.0);
            let x0 = x[0];
            out[0] = gaussian_expectation(
                &|u| {
                    let c = (x0 + u).cosh();
                    1.0 / (c * c)
                },
                var.sqrt(),
                1e-11,
            );
        })),
        description: "Gaussian convolution of tanh with variance T − t (adaptive quadrature)"
            .to_string(),
    };
    Problem {
        name: "heat".to_string(),
        description: "decoupled heat equation with smooth terminal tanh(x)".to_string(),
        coeffs,
        spec,
        oracle: Some(oracle),
    }
}

/// Discontinuous drift `b = sign(x)·(1 + min(|y|, R))/(1 + R)` (capped so the
/// k₁ bound survives mollification), `g ≡ 0`, indicator terminal. The
/// indicator takes its right-continuous version, `h(0) = 1`.
fn sign_drift_problem() -> Problem {
    let spec = GrowthSpec::new(1, 1, 1.0, SquareMat::scalar(1.0), 1.0, 1.0, 0.0, 1.0).unwrap();
    let r = spec.r_bound; // = 1
    let coeffs = CoefficientSet {
        b: Arc::new(move |_t, x, y, _z, out| {
            out[0] = sign(x[0]) * (1.0 + y[0].abs().min(r)) / (1.0 + r);
        }),
        g: zero_coeff(),
        h: Arc::new(|x, out| out[0] = if x[0] >= 0.0 { 1.0 } else { 0.0 }),
        b_args: ArgMask::xy(),
        g_args: ArgMask::NONE,
        flag_b1: true,
        flag_b2: false,
        flag_g_no_z: true,
        flag_g_no_x: true,
        lipschitz_h: None,
    };
    Problem {
        name: "sign-drift".to_string(),
        description: "measurable-in-x drift coupled through y, discontinuous terminal indicator"
            .to_string(),
        coeffs,
        spec,
        oracle: None,
    }
}

/// `b ≡ 0`, `g = −λy`, `h ≡ c`: spatially constant, the backward equation is
/// the linear ODE `v' = λ v`, so `v(t, x) = c e^{−λ(T−t)}`.
fn linear_ode_problem() -> Problem {
    let horizon = 1.0;
    let decay = 1.0;
    let terminal = 1.0;
    let spec = GrowthSpec::new(
        1,
        1,
        horizon,
        SquareMat::scalar(1.0),
        1.0,
        0.0,
        decay,
        terminal,
    )
    .unwrap();
    let coeffs = CoefficientSet {
        b: zero_coeff(),
        g: Arc::new(move |_t, _x, y, _z, out| out[0] = -decay * y[0]),
        h: Arc::new(move |_x, out| out[0] = terminal),
        b_args: ArgMask::NONE,
        g_args: ArgMask::only_y(),
        flag_b1: true,
        flag_b2: true,
        flag_g_no_z: true,
        flag_g_no_x: true,
        lipschitz_h: Some(0.0),
    };
    let oracle = ClosedFormOracle {
        v_exact: Arc::new(move |t, _x, out| {
            out[0] = terminal * (-decay * (horizon - t)).exp();
        }),
        grad_exact: Some(Arc::new(|_t, _x, out| out[0] = 0.0)),
        description: "closed-form backward ODE solution c·exp(−λ(T−t))".to_string(),
    };
    Problem {
        name: "linear-ode".to_string(),
        description: "pure driver decay, spatially constant field".to_string(),
        coeffs,
        spec,
        oracle: Some(oracle),
    }
}

/// Fully coupled Lipschitz problem: `b = arctan(y)`, `g = cos(z₁)`,
/// `h = clamp(x, −1, 1)`.
fn coupled_lip_problem() -> Problem {
    let spec = GrowthSpec::new(1, 1, 1.0, SquareMat::scalar(1.0), 1.0, 1.0, 1.0, 1.0).unwrap();
    let coeffs = CoefficientSet {
        b: Arc::new(|_t, _x, y, _z, out| out[0] = y[0].atan()),
        g: Arc::new(|_t, _x, _y, z, out| out[0] = z[0].cos()),
        h: Arc::new(|x, out| out[0] = x[0].clamp(-1.0, 1.0)),
        b_args: ArgMask::only_y(),
        g_args: ArgMask::only_z(),
        flag_b1: true,
        flag_b2: true,
        flag_g_no_z: false,
        flag_g_no_x: true,
        lipschitz_h: Some(1.0),
    };
    Problem {
        name: "coupled-lip".to_string(),
        description: "full (y, z) coupling with Lipschitz terminal".to_string(),
        coeffs,
        spec,
        oracle: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(k1: f64, k2: f64, k3: f64) -> GrowthSpec {
        GrowthSpec::new(1, 1, 1.0, SquareMat::scalar(1.0), 1.0, k1, k2, k3).unwrap()
    }

    #[test]
    fn bound_r_examples() {
        assert_eq!(bound_r(0.0, 2.0, 1.0), 2.0);
        assert_eq!(bound_r(5.0, 0.0, 1.0), 0.0);
        // cross-check exp by a plain Taylor series
        let mut taylor = 0.0;
        let mut term = 1.0;
        for k in 1..30 {
            taylor += term;
            term /= k as f64;
        }
        assert!((bound_r(1.0, 1.0, 1.0) - taylor).abs() < 1e-12);
        assert!((bound_r(1.0, 1.0, 1.0) - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn growth_spec_rejects_bad_input() {
        assert!(matches!(
            GrowthSpec::new(3, 1, 1.0, SquareMat::identity(3), 1.0, 0.0, 0.0, 1.0),
            Err(CoefficientError::UnsupportedDimension(3))
        ));
        assert!(matches!(
            GrowthSpec::new(1, 1, 1.0, SquareMat::scalar(0.5), 1.0, 0.0, 0.0, 1.0),
            Err(CoefficientError::EllipticityViolated { .. })
        ));
        assert!(GrowthSpec::new(1, 1, 1.0, SquareMat::scalar(1.0), 1.0, 0.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn validate_growth_zero_coefficients_pass() {
        let coeffs = CoefficientSet {
            b: zero_coeff(),
            g: zero_coeff(),
            h: Arc::new(|_x, out| out[0] = 0.0),
            b_args: ArgMask::NONE,
            g_args: ArgMask::NONE,
            flag_b1: true,
            flag_b2: true,
            flag_g_no_z: true,
            flag_g_no_x: true,
            lipschitz_h: Some(0.0),
        };
        let report = validate_growth(&coeffs, &spec_with(0.5, 0.25, 0.0), 500, 1);
        assert!(report.pass);
        assert_eq!(report.max_ratio_b, 0.0);
        assert_eq!(report.max_ratio_g, 0.0);
        assert_eq!(report.max_ratio_h, 0.0);
    }

    #[test]
    fn validate_growth_sign_terminal_passes_with_unit_bound() {
        let mut coeffs = builtin_problem("heat").unwrap().coeffs;
        coeffs.h = Arc::new(|x, out| out[0] = sign(x[0]));
        let report = validate_growth(&coeffs, &spec_with(0.0, 0.0, 1.0), 500, 1);
        assert!(report.pass, "ratio_h = {}", report.max_ratio_h);
    }

    #[test]
    fn validate_growth_flags_violation_with_witness() {
        let mut coeffs = builtin_problem("heat").unwrap().coeffs;
        coeffs.h = Arc::new(|x, out| out[0] = 2.0 * sign(x[0]));
        let report = validate_growth(&coeffs, &spec_with(0.0, 0.0, 1.0), 500, 1);
        assert!(!report.pass);
        assert!((report.max_ratio_h - 2.0).abs() < 1e-12);
        let w = report.witness_h.expect("violation must carry a witness");
        assert!(w.x[0] != 0.0);
        assert!((w.ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn catalog_problems_validate_with_declared_constants() {
        for name in CATALOG {
            let p = builtin_problem(name).unwrap();
            p.coeffs.admissible().unwrap();
            let report = validate_growth(&p.coeffs, &p.spec, 2000, 7);
            assert!(
                report.pass,
                "{name}: ratios b={} g={} h={}",
                report.max_ratio_b, report.max_ratio_g, report.max_ratio_h
            );
        }
    }

    #[test]
    fn catalog_ellipticity() {
        for name in CATALOG {
            let p = builtin_problem(name).unwrap();
            let min_eig = p.spec.diffusion_gram().min_eigenvalue_sym();
            assert!(min_eig >= p.spec.lambda - 1e-10, "{name}");
        }
    }

    #[test]
    fn unknown_problem_lists_catalog() {
        let err = builtin_problem("nope").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nope") && msg.contains("heat") && msg.contains("coupled-lip"));
    }

    #[test]
    fn linear_ode_oracle_matches_backward_integrator() {
        // independent check of c·e^{−λ(T−t)} by RK4 on v' = λ v backwards
        let p = builtin_problem("linear-ode").unwrap();
        let oracle = p.oracle.as_ref().unwrap();
        let (decay, horizon) = (1.0, 1.0);
        let steps = 400;
        let dt = horizon / steps as f64;
        let mut v = 1.0; // terminal c
        for _ in 0..steps {
            // integrating dv/ds = −λ v in s = T − t
            let f = |val: f64| -decay * val;
            let k1 = f(v);
            let k2 = f(v + 0.5 * dt * k1);
            let k3 = f(v + 0.5 * dt * k2);
            let k4 = f(v + dt * k3);
            v += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let mut out = [0.0];
        (oracle.v_exact)(0.0, &[0.3], &mut out);
        assert!((out[0] - v).abs() < 1e-10, "oracle {} vs rk4 {v}", out[0]);
        assert!((out[0] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn heat_oracle_terminal_is_exact() {
        let p = builtin_problem("heat").unwrap();
        let oracle = p.oracle.as_ref().unwrap();
        let mut vb = [0.0];
        let mut hb = [0.0];
        for &x in &[-2.0, -0.3, 0.0, 0.3, 1.7] {
            (oracle.v_exact)(1.0, &[x], &mut vb);
            (p.coeffs.h)(&[x], &mut hb);
            assert!((vb[0] - hb[0]).abs() <= 1e-12);
        }
        // spec example: v(T, 0.3) = tanh(0.3)
        (oracle.v_exact)(1.0, &[0.3], &mut vb);
        assert!((vb[0] - 0.3f64.tanh()).abs() <= 1e-12);
    }

    #[test]
    fn heat_oracle_midpoint_plausible() {
        // at x = 0 symmetry forces v = 0; far out it saturates to ±1
        let p = builtin_problem("heat").unwrap();
        let oracle = p.oracle.as_ref().unwrap();
        let mut vb = [0.0];
        (oracle.v_exact)(0.0, &[0.0], &mut vb);
        assert!(vb[0].abs() < 1e-10);
        (oracle.v_exact)(0.0, &[8.0], &mut vb);
        assert!((vb[0] - 1.0).abs() < 1e-5);
        // gradient at origin: E[sech²(W_1)] < 1 and positive
        let mut gb = [0.0];
        (oracle.grad_exact.as_ref().unwrap())(0.0, &[0.0], &mut gb);
        assert!(gb[0] > 0.3 && gb[0] < 1.0);
    }
}
