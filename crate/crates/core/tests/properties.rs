use proptest::prelude::*;

use corbin::{
    conditional_variance_line, max_correlation, multinomial_draw, regression_line,
    solve_cell_probs, theoretical_moments, RngStream, TargetSpec,
};

fn marginal() -> impl Strategy<Value = f64> {
    0.001f64..0.999
}

/// Feasible `(n, pi1, pi2, r)` with `r` spread over `[0, bound]`.
fn feasible_spec() -> impl Strategy<Value = TargetSpec> {
    (1u32..60, marginal(), marginal(), 0.0f64..=1.0).prop_map(|(n, a, b, t)| {
        let bound = max_correlation(a, b).unwrap();
        TargetSpec::new(n, a, b, t * bound).unwrap()
    })
}

proptest! {
    #[test]
    fn solver_round_trips(spec in feasible_spec()) {
        let cells = solve_cell_probs(&spec).unwrap();
        let m = theoretical_moments(spec.n, &cells).unwrap();
        let n = f64::from(spec.n);
        prop_assert!((m.rho - spec.r).abs() < 1e-12, "{} vs {}", m.rho, spec.r);
        prop_assert!((m.mean1 - n * spec.pi1).abs() < 1e-12 * n.max(1.0));
        prop_assert!((m.mean2 - n * spec.pi2).abs() < 1e-12 * n.max(1.0));
        prop_assert!((cells.pi1() - spec.pi1).abs() < 1e-12);
        prop_assert!((cells.pi2() - spec.pi2).abs() < 1e-12);
        prop_assert!((m.rho - m.cov / (m.var1 * m.var2).sqrt()).abs() < 1e-12);
        prop_assert!(cells.as_array().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn bound_symmetries(a in marginal(), b in marginal()) {
        let t = max_correlation(a, b).unwrap();
        prop_assert_eq!(t, max_correlation(b, a).unwrap());
        prop_assert!((t - max_correlation(1.0 - a, 1.0 - b).unwrap()).abs() < 1e-12);
        prop_assert!(t > 0.0 && t <= 1.0);
    }

    #[test]
    fn bound_matches_ratio_form(b in 0.01f64..0.99, beta in 0.01f64..5.0) {
        let a = beta * b;
        prop_assume!(a > 0.0 && a < 1.0);
        // with pi1 = beta * pi2 the bound is sqrt(beta (1 - pi2) / (1 - beta pi2))
        // for beta < 1 and its reciprocal form for beta > 1
        let expected = if beta <= 1.0 {
            (beta * (1.0 - b) / (1.0 - beta * b)).sqrt()
        } else {
            ((1.0 - beta * b) / (beta * (1.0 - b))).sqrt()
        };
        prop_assert!((max_correlation(a, b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn at_bound_smaller_cell_vanishes(a in marginal(), b in marginal(), n in 1u32..20) {
        let bound = max_correlation(a, b).unwrap();
        let cells = solve_cell_probs(&TargetSpec::new(n, a, b, bound).unwrap()).unwrap();
        prop_assert!(cells.p1.min(cells.p2).abs() <= 1e-12);
        prop_assert!(TargetSpec::new(n, a, b, bound * (1.0 + 1e-9) + 1e-12).is_err());
    }

    #[test]
    fn lines_stay_in_range(spec in feasible_spec()) {
        let cells = solve_cell_probs(&spec).unwrap();
        let line = regression_line(spec.n, &cells).unwrap();
        let var = conditional_variance_line(spec.n, &cells).unwrap();
        prop_assert!((0.0..=1.0).contains(&line.alpha));
        prop_assert!((0.0..=1.0).contains(&line.beta));
        prop_assert!(var.gamma >= 0.0);
        let n = f64::from(spec.n);
        for y in 0..=spec.n {
            let m = line.intercept + line.slope * f64::from(y);
            prop_assert!(m >= -1e-12 && m <= n + 1e-12, "y={} m={}", y, m);
            prop_assert!(var.gamma + var.delta * f64::from(y) >= -1e-12);
        }
    }

    #[test]
    fn draws_conserve_trials(spec in feasible_spec(), seed in any::<u64>()) {
        let cells = solve_cell_probs(&spec).unwrap();
        let mut stream = RngStream::new(seed, 0);
        for _ in 0..20 {
            let d = multinomial_draw(&mut stream, spec.n, &cells).unwrap();
            prop_assert_eq!(d.total(), spec.n);
            let p = d.pair();
            prop_assert!(p.y1 <= spec.n && p.y2 <= spec.n);
            prop_assert_eq!(p.y1 + p.y2, spec.n - d.x4 + d.x3);
        }
    }
}

#[test]
fn bound_is_monotone_in_ratio() {
    for &b in &[0.1, 0.3, 0.45, 0.6, 0.85] {
        // beta < 1: increasing; beta > 1 (while beta * b < 1): decreasing
        let below: Vec<f64> = (1..=60).map(|i| f64::from(i) / 61.0).collect();
        let upper = 1.0 / b;
        let above: Vec<f64> = (1..=60).map(|i| 1.0 + (upper - 1.0) * f64::from(i) / 61.0).collect();
        let bound = |beta: f64| max_correlation(beta * b, b).unwrap();
        for w in below.windows(2) {
            assert!(bound(w[1]) > bound(w[0]), "b={b} beta={:?}", w);
        }
        for w in above.windows(2) {
            assert!(bound(w[1]) < bound(w[0]), "b={b} beta={:?}", w);
        }
    }
}
