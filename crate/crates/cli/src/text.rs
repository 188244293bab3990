//! Human-readable output: aligned key/value tables and the problem
//! description (constants, flags, derived bound, applicable
//! differentiability claims).

use fbsde::coefficients::Problem;

/// Renders rows as two aligned columns.
pub fn aligned(rows: &[(String, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        out.push_str(&format!("{k:<width$}  {v}\n"));
    }
    out
}

/// Text summary of a problem: growth constants, flags, the bound
/// `R = k₃ e^{T k₂}` and which regularity claims apply.
pub fn describe_problem(problem: &Problem) -> String {
    let spec = &problem.spec;
    let c = &problem.coeffs;
    let mut rows = vec![
        ("problem".to_string(), problem.name.clone()),
        ("description".to_string(), problem.description.clone()),
        ("d, l".to_string(), format!("{}, {}", spec.d, spec.l)),
        ("horizon T".to_string(), format!("{}", spec.horizon)),
        ("sigma".to_string(), format!("{:?}", spec.sigma.data)),
        ("lambda".to_string(), format!("{}", spec.lambda)),
        (
            "k1, k2, k3".to_string(),
            format!("{}, {}, {}", spec.k1, spec.k2, spec.k3),
        ),
        (
            "R = k3·exp(T·k2)".to_string(),
            format!("{}", spec.bound_r()),
        ),
        (
            "flags".to_string(),
            format!(
                "B1={} B2={} g-no-z={} g-no-x={}",
                c.flag_b1, c.flag_b2, c.flag_g_no_z, c.flag_g_no_x
            ),
        ),
        (
            "lipschitz h".to_string(),
            c.lipschitz_h
                .map(|v| v.to_string())
                .unwrap_or_else(|| "n/a".to_string()),
        ),
        (
            "oracle".to_string(),
            problem
                .oracle
                .as_ref()
                .map(|o| o.description.clone())
                .unwrap_or_else(|| "none".to_string()),
        ),
    ];

    let mut claims = Vec::new();
    if c.flag_b2 {
        claims.push("Malliavin: X, Y differentiable on [0, T]".to_string());
    } else if c.flag_b1 {
        claims.push("Malliavin: X differentiable on [0, T], Y on [0, T-delta]".to_string());
    }
    if c.flag_b2 && (c.flag_g_no_z || c.flag_g_no_x) {
        claims.push("Malliavin: Z differentiable on [0, T]".to_string());
    }
    if c.flag_b1 || c.flag_b2 {
        claims.push("Sobolev: x -> X_t in weighted W^1_p for all t".to_string());
    }
    if spec.l == 1 {
        if c.flag_b2 {
            claims.push("Sobolev: x -> Y_t in W^1_1(U) for all t".to_string());
        } else {
            claims.push("Sobolev: x -> Y_t in W^1_1(U) on [0, T-delta]".to_string());
        }
    }
    for (i, claim) in claims.iter().enumerate() {
        rows.push((format!("claim {}", i + 1), claim.clone()));
    }
    aligned(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fbsde::coefficients::builtin_problem;

    #[test]
    fn describe_heat_lists_constants_and_flags() {
        let text = describe_problem(&builtin_problem("heat").unwrap());
        assert!(text.contains("k1, k2, k3"));
        assert!(text.contains("0, 0, 1"));
        assert!(text.contains("R = k3·exp(T·k2)"));
        assert!(text.contains('1'));
        assert!(text.contains("B1=true B2=true"));
        assert!(text.contains("g-no-z=true g-no-x=true"));
    }

    #[test]
    fn describe_linear_ode_prints_r() {
        let text = describe_problem(&builtin_problem("linear-ode").unwrap());
        // R = 1·e^{1·1} = e
        assert!(text.contains("2.718281828459045"));
    }

    #[test]
    fn aligned_pads_keys() {
        let s = aligned(&[("a".into(), "1".into()), ("long".into(), "2".into())]);
        assert!(s.contains("a     1") || s.contains("a    1"));
    }
}
