//! Numerical solver and verification harness for fully coupled
//! forward-backward stochastic differential equations (FBSDEs)
//!
//! ```text
//! X_t = x + ∫ b(u, X_u, Y_u, Z_u) du + ∫ σ dW_u
//! Y_t = h(X_T) + ∫_t^T g(u, X_u, Y_u, Z_u) du − ∫_t^T Z_u dW_u
//! ```
//!
//! with coefficients `b`, `g`, `h` that are merely measurable (possibly
//! discontinuous) in `(t, x)` and uniformly continuous in `(y, z)`.
//!
//! The pipeline mirrors the constructive solution route:
//!
//! 1. [`mollifier`] — smooth the coefficients by convolution with a compactly
//!    supported bump kernel of bandwidth `1/n`;
//! 2. [`pde`] — solve the quasilinear decoupling-field PDE backward in time,
//!    giving `v_n` and its spatial gradient `w_n = D_x v_n`;
//! 3. [`simulate`] — run the forward SDE with drift
//!    `b̃_n(t, x) = b_n(t, x, v_n(t, x), w_n(t, x)σ)`, reconstruct
//!    `Y = v_n(t, X_t)`, `Z = w_n(t, X_t)σ`, and integrate the first-variation
//!    (Malliavin derivative) equation along each path;
//! 4. [`verify`] — check maximum-principle bounds, Girsanov law identities,
//!    BSDE residuals, terminal matching, Cauchy convergence across
//!    mollification levels, and Sobolev/Malliavin regularity diagnostics.
//!
//! Problem instances (growth constants, coefficient callables, built-in test
//! catalog) live in [`coefficients`].
//!
//! ```
//! use fbsde::{builtin_problem, mollify_set, solve_decoupling_field};
//! use fbsde::{reconstruct_yz, simulate_forward, GridSpec, SimConfig};
//!
//! let problem = builtin_problem("sign-drift")?;
//! let grid = GridSpec::new(4.0, 81, 40, vec![0.2, 0.1]);
//! let smoothed = mollify_set(&problem.coeffs, &problem.spec, 8, 12, Some(grid.half_width));
//! let field = solve_decoupling_field(&smoothed, &problem.spec, &grid)?;
//! assert!(field.sup_v() <= problem.spec.r_bound * (1.0 + 1e-6));
//!
//! let mut paths = simulate_forward(
//!     &field,
//!     &smoothed,
//!     &problem.spec,
//!     &SimConfig::new(200, 64, 42, vec![0.0]),
//! )?;
//! reconstruct_yz(&mut paths, &field);
//! let mismatch = fbsde::verify::terminal_match(&paths, |x: &[f64], out: &mut [f64]| {
//!     (problem.coeffs.h)(x, out)
//! });
//! assert!(mismatch < 0.2);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// index loops mirror the tensor math; `!(x > 0)` deliberately rejects NaN
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod linalg;
pub mod mollifier;
pub mod pde;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod verify;

pub use coefficients::{builtin_problem, CoefficientSet, GrowthSpec, Problem};
pub use mollifier::{make_kernel, mollify_set, MollifiedCoefficients, MollifierKernel};
pub use pde::{check_apriori, solve_decoupling_field, DecouplingField, GridSpec};
pub use simulate::{reconstruct_yz, simulate_forward, PathEnsemble, SimConfig};
