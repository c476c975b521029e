mod common;

use common::{ex, model_problem, periodic_domain};
use picard_lod::expr::{parse_expression, Arity, Bindings, Var};
use picard_lod::funcspace::{graded_norm, interpolate_adaptive, SepFunc};
use picard_lod::graded_core::{verdict_of, Verdict, VerdictRule};
use picard_lod::linear_series::{
    classify_convergence, example_catalog, increment_bound_at, picard_closed_form, radii_from_series,
    series_solution, GrowthClass, LinearProblem, CATALOG_NAMES,
};
use picard_lod::picard_pde::{apply_p, initial_polynomial, residual};
use proptest::prelude::*;

const AN1: GrowthClass = GrowthClass::Analytic { c: 1.0, scale: 1.0 };

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn analytic_verdict_is_monotone_in_tbar(t1 in 0.05f64..2.0, t2 in 0.05f64..2.0, d in 1usize..=3, l in 1u32..=3) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let p = model_problem(d, l, hi, "1/(1+x^2)");
        let v_lo = classify_convergence(&p, &vec![AN1; d], lo, 60).unwrap().verdict;
        let v_hi = classify_convergence(&p, &vec![AN1; d], hi, 60).unwrap().verdict;
        if v_hi == Verdict::Converged {
            prop_assert_eq!(v_lo, Verdict::Converged);
        }
        if v_lo == Verdict::Diverging {
            prop_assert_ne!(v_hi, Verdict::Converged);
        }
    }

    #[test]
    fn increment_bound_dominates_numeric_increments(freq in 1u32..=3, l in 1u32..=2, tbar in 0.05f64..0.9) {
        let p = model_problem(1, l, tbar, &format!("sin({freq}*x)"));
        let growth = [GrowthClass::Exponential { c: freq as f64, scale: 1.0 }];
        let cp = p.to_cauchy().unwrap();
        let i0 = initial_polynomial(&cp).unwrap();
        let inc = apply_p(&cp, &i0).unwrap().sub(&i0).unwrap();
        for idx in 0..=(8 - l as usize) {
            let numeric = graded_norm(&inc, idx).unwrap();
            let bound = increment_bound_at(&p, &growth, idx).unwrap();
            prop_assert!(numeric <= bound * (1.0 + 1e-9) + 1e-12, "idx {}: {} > {}", idx, numeric, bound);
        }
    }

    #[test]
    fn exponential_class_has_finite_radii(d in 1usize..=3, l in 1u32..=3, tbar in 0.05f64..0.7, k in 0usize..4) {
        let p = model_problem(d, l, tbar, "sin(x)");
        let r = radii_from_series(&p, &vec![GrowthClass::Exponential { c: 1.0, scale: 1.0 }; d], k).unwrap();
        prop_assert!(!r.is_infinite());
        prop_assert!(r.value().is_finite() && r.value() > 0.0);
    }

    #[test]
    fn geometric_terms_converge(ratio in 0.01f64..0.9, c in -5.0f64..5.0) {
        let len = (16.0 * std::f64::consts::LN_10 / -ratio.ln()).ceil() as usize + 12;
        let logs: Vec<f64> = (0..len).map(|n| c + n as f64 * ratio.ln()).collect();
        prop_assert_eq!(verdict_of(&logs, &VerdictRule::default()).0, Verdict::Converged);
        let grow: Vec<f64> = (0..40).map(|n| c + (1..=n).map(|i| (i as f64).ln()).sum::<f64>() + n as f64 * ratio.max(0.2).ln()).collect();
        prop_assert_eq!(verdict_of(&grow, &VerdictRule::default()).0, Verdict::Diverging);
    }

    #[test]
    fn polynomial_parse_matches_direct_evaluation(a in -3.0f64..3.0, b in -3.0f64..3.0, x in -2.0f64..2.0, t in -1.0f64..1.0) {
        let e = parse_expression(&format!("{a}*x^3 - {b}*t*x + exp(t)"), &Arity::space_time(1)).unwrap();
        let v = e.eval(&Bindings::new().with(Var::T, t).with(Var::X(0), x)).unwrap();
        let direct = a * x.powi(3) - b * t * x + t.exp();
        prop_assert!((v - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn closed_form_equals_iterates(
        d in 1usize..=3,
        l in 1u32..=2,
        g_pick in 0usize..3,
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
        tbar in 0.2f64..0.8,
    ) {
        let gamma = g_pick % d;
        let dom = picard_lod::funcspace::Domain::new(0.0, tbar, tbar, vec![[-1.0, 1.0]]).unwrap();
        let y0 = (0..d).map(|j| vec![ex(&format!("{a}*x^3 + {b}*x + {j}"))]).collect();
        let q = vec![ex(&format!("{b}*x^2"))];
        let qb = LinearProblem::measure_q_bound(&q, &dom).unwrap();
        let lp = LinearProblem::new(dom, d, gamma, vec![l], vec![vec![ex(&format!("1 + {a}*t"))]], q, qb, y0).unwrap();
        let cp = lp.to_cauchy().unwrap();
        let mut y = initial_polynomial(&cp).unwrap();
        for n in 0..=4 {
            if n > 0 {
                y = apply_p(&cp, &y).unwrap();
            }
            let dev = picard_closed_form(&lp, n).unwrap().max_coeff_diff(&y).unwrap();
            prop_assert!(dev <= 1e-10, "n = {}: {}", n, dev);
        }
    }

    #[test]
    fn catalog_series_solve_their_equations(pick in 0usize..6, tbar in 0.05f64..0.5) {
        let c = example_catalog(CATALOG_NAMES[pick], tbar).unwrap();
        let s = series_solution(&c.problem, 20, Some(&c.growth)).unwrap();
        let r = residual(&c.problem.to_cauchy().unwrap(), &s.solution).unwrap();
        prop_assert!(r.pde_residual <= 1e-7, "{}: {}", c.name, r.pde_residual);
        prop_assert!(r.ic_residuals.iter().all(|v| *v <= 1e-7));
    }

    #[test]
    fn sepfunc_json_round_trips(a in -2.0f64..2.0, tbar in 0.1f64..1.0) {
        let f = interpolate_adaptive(&[ex(&format!("{a}*t*sin(x) + x^2"))], &periodic_domain(tbar), 0).unwrap();
        let back = SepFunc::from_json(&f.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.max_coeff_diff(&f).unwrap(), 0.0);
    }
}
