//! Quadrature building blocks: Gauss–Legendre rules (kernel construction)
//! and adaptive Simpson integration (closed-form oracles).

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence. Exact for polynomials of degree
/// `2·order − 1`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be ≥ 1");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Mean of `g(x)` under a centered Gaussian with standard deviation `sd`,
/// by adaptive quadrature over ±10 standard deviations.
pub fn gaussian_expectation(g: &dyn Fn(f64) -> f64, sd: f64, tol: f64) -> f64 {
    if sd == 0.0 {
        return g(0.0);
    }
    let density = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    adaptive_simpson(&|u| g(sd * u) * density(u), -10.0, 10.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (nodes, weights) = gauss_legendre(5);
        // degree 9 is exact for a 5-point rule
        let approx: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * (x.powi(9) + 3.0 * x.powi(4) - x))
            .sum();
        // ∫_{-1}^{1} x^9 + 3x^4 − x dx = 6/5
        assert!((approx - 1.2).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for order in [1, 2, 8, 16, 31] {
            let (_, w) = gauss_legendre(order);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12, "order {order}");
        }
    }

    #[test]
    fn simpson_matches_closed_form() {
        let val = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert!((val - (std::f64::consts::E - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn gaussian_expectation_of_square_is_variance() {
        let v = gaussian_expectation(&|x| x * x, 0.7, 1e-11);
        assert!((v - 0.49).abs() < 1e-9);
    }
}
