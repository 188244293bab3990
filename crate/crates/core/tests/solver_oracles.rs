//! Oracle-backed solver checks: the smoothed heat problem against its
//! Gaussian-convolution quadrature oracle, grid-refinement behavior, the
//! interior-gradient dichotomy between Lipschitz and discontinuous terminals,
//! and residual refinement under Itô-sum refinement.

use fbsde::coefficients::builtin_problem;
use fbsde::mollifier::mollify_set;
use fbsde::pde::{check_apriori, solve_decoupling_field, GridSpec};
use fbsde::simulate::{reconstruct_yz, simulate_forward, SimConfig};
use fbsde::verify::{bsde_residual, terminal_match};

fn heat_error_against_oracle(nx: usize, nt: usize) -> (f64, f64) {
    let p = builtin_problem("heat").unwrap();
    let oracle = p.oracle.as_ref().unwrap();
    let mc = mollify_set(&p.coeffs, &p.spec, 32, 16, None);
    let grid = GridSpec::new(6.0, nx, nt, vec![0.2, 0.1]);
    let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
    let mut v_err = 0.0f64;
    let mut w_err = 0.0f64;
    let mut coord = [0.0];
    let mut vb = [0.0];
    let mut gb = [0.0];
    for j in 0..field.node_count() {
        field.node_coord(j, &mut coord);
        (oracle.v_exact)(0.0, &coord, &mut vb);
        v_err = v_err.max((field.v[[0, j, 0]] - vb[0]).abs());
        if coord[0].abs() <= 3.0 {
            (oracle.grad_exact.as_ref().unwrap())(0.0, &coord, &mut gb);
            w_err = w_err.max((field.w[[0, j, 0, 0]] - gb[0]).abs());
        }
    }
    (v_err, w_err)
}

#[test]
fn oracles_agree_with_their_terminal_condition() {
    // v_exact(T, x) must reproduce h(x) wherever an oracle is declared
    for name in ["heat", "linear-ode"] {
        let p = builtin_problem(name).unwrap();
        let oracle = p.oracle.as_ref().unwrap();
        let points: Vec<Vec<f64>> = (-20..=20).map(|i| vec![i as f64 * 0.25]).collect();
        let gap = oracle.terminal_gap(&p.coeffs.h, p.spec.horizon, &points, p.spec.l);
        assert!(gap <= 1e-12, "{name}: oracle terminal gap {gap}");
    }
}

#[test]
fn heat_solution_and_gradient_match_quadrature_oracle() {
    let (v_err, w_err) = heat_error_against_oracle(201, 100);
    assert!(v_err <= 2e-2, "value error {v_err}");
    assert!(w_err <= 5e-2, "gradient error {w_err}");
}

#[test]
fn heat_refinement_reduces_error() {
    // halving Δt and Δx must shrink the oracle error by ≥ 1.5×
    let (coarse, _) = heat_error_against_oracle(101, 50);
    let (fine, _) = heat_error_against_oracle(201, 100);
    assert!(
        coarse / fine >= 1.5,
        "refinement factor {} (coarse {coarse}, fine {fine})",
        coarse / fine
    );
}

#[test]
fn lipschitz_terminal_keeps_gradient_bounded_to_the_terminal_layer() {
    // under a Lipschitz terminal the gradient bound holds with δ = 0
    let p = builtin_problem("heat").unwrap();
    let mc = mollify_set(&p.coeffs, &p.spec, 16, 16, None);
    let grid = GridSpec::new(6.0, 201, 100, vec![0.2, 0.1]);
    let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
    let sup_grad = field.sup_w();
    // tanh is 1-Lipschitz and heat flow contracts the gradient
    assert!(sup_grad <= 1.0 + 5e-2, "sup |D_x v| = {sup_grad}");
}

#[test]
fn discontinuous_terminal_gradient_needs_interior_offset() {
    // sign-drift: the interior bound is stable across levels, while the
    // terminal-layer gradient grows with the spatial resolution
    let p = builtin_problem("sign-drift").unwrap();
    let mut interior: Vec<f64> = Vec::new();
    for level in [4, 8, 16, 32] {
        let mc = mollify_set(&p.coeffs, &p.spec, level, 12, None);
        let grid = GridSpec::new(6.0, 201, 100, vec![0.2, 0.1]);
        let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        let report = check_apriori(&field, &p.spec, &grid, 2.0);
        let at_delta = report
            .grad_bound_per_delta
            .iter()
            .find(|b| (b.delta - 0.1).abs() < 1e-12)
            .unwrap()
            .sup_grad;
        assert!(at_delta.is_finite() && at_delta > 0.0);
        interior.push(at_delta);
    }
    let max = interior.iter().cloned().fold(f64::MIN, f64::max);
    let min = interior.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        max / min <= 2.0,
        "interior gradient bounds vary more than 2×: {interior:?}"
    );

    // terminal layer at a fixed level: finer grids see a steeper sampled jump
    let mut terminal_grad = Vec::new();
    for nx in [51, 101, 201] {
        let mc = mollify_set(&p.coeffs, &p.spec, 32, 12, None);
        let grid = GridSpec::new(6.0, nx, 50, vec![0.2, 0.1]);
        let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
        terminal_grad.push(field.sup_w());
    }
    assert!(
        terminal_grad[0] < terminal_grad[1] && terminal_grad[1] < terminal_grad[2],
        "terminal gradient should grow with Nx: {terminal_grad:?}"
    );
}

#[test]
fn coupled_lip_residual_refines_with_more_steps() {
    let p = builtin_problem("coupled-lip").unwrap();
    let mc = mollify_set(&p.coeffs, &p.spec, 8, 12, None);
    let grid = GridSpec::new(6.0, 201, 100, vec![0.2, 0.1, 0.05]);
    let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
    let mut residuals = Vec::new();
    for steps in [64, 256] {
        let mut ens = simulate_forward(
            &field,
            &mc,
            &p.spec,
            &SimConfig::new(4000, steps, 11, vec![0.0]),
        )
        .unwrap();
        reconstruct_yz(&mut ens, &field);
        let g = &mc.g_n;
        residuals.push(bsde_residual(
            &ens,
            |t, x, y, z, out: &mut [f64]| g(t, x, y, z, out),
            0.05,
        ));
    }
    assert!(
        residuals[1] < residuals[0] * 1.1,
        "residual should not grow under Itô-sum refinement: {residuals:?}"
    );
}

#[test]
fn lipschitz_terminal_match_is_interpolation_small() {
    let p = builtin_problem("coupled-lip").unwrap();
    let mc = mollify_set(&p.coeffs, &p.spec, 16, 12, None);
    let grid = GridSpec::new(6.0, 201, 100, vec![0.2, 0.1]);
    let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();
    let mut ens = simulate_forward(
        &field,
        &mc,
        &p.spec,
        &SimConfig::new(2000, 128, 3, vec![0.0]),
    )
    .unwrap();
    reconstruct_yz(&mut ens, &field);
    let h = &mc.h_n;
    let gap = terminal_match(&ens, |x: &[f64], out: &mut [f64]| h(x, out));
    let dx = grid.dx();
    assert!(
        gap <= 2.0 * 1.0 * dx,
        "terminal mismatch {gap} vs 2k₃Δx = {}",
        2.0 * dx
    );
}

#[test]
fn stored_gradient_is_consistent_and_offset_restrictions_agree() {
    // the stored w must equal a fresh central-difference pass over v, and the
    // gradient restricted to [0, T−δ¹] must agree with the restriction to
    // [0, T−δ²] on the overlap (both derive from the same field)
    let p = builtin_problem("heat").unwrap();
    let mc = mollify_set(&p.coeffs, &p.spec, 8, 8, None);
    let grid = GridSpec::new(4.0, 81, 40, vec![0.2, 0.1]);
    let field = solve_decoupling_field(&mc, &p.spec, &grid).unwrap();

    let mut recomputed = field.clone();
    fbsde::pde::gradient(&mut recomputed);
    for (a, b) in field.w.iter().zip(recomputed.w.iter()) {
        assert!((a - b).abs() <= 1e-12);
    }

    // piecewise-in-δ readout: the same (t, x) queried under either offset band
    let overlap_t = p.spec.horizon - 0.2 - 1e-3;
    let mut wa = [0.0];
    let mut wb = [0.0];
    field.gradient_value(overlap_t, &[0.7], &mut wa);
    recomputed.gradient_value(overlap_t, &[0.7], &mut wb);
    assert_eq!(wa[0].to_bits(), wb[0].to_bits());
}
