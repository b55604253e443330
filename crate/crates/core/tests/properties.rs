use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use proptest::prelude::*;

use intineq::sdp::{self, eliminate_equalities, export_sdpa, read_sdpa};
use intineq::{
    build_inner_sdp, parse_problem, solve_inner, solve_outer, sweep, AffineMatrix, ConicProgram, InnerOptions,
    LegendrePoly, LinExpr, Mode, Relaxation, Status,
};

const TOL: f64 = 1e-8;

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, len)
}

fn poly(len: usize) -> impl Strategy<Value = LegendrePoly> {
    coeffs(len).prop_map(LegendrePoly::new)
}

fn fmt(c: &[f64]) -> String {
    format!("{c:?}")
}

/// Third-order functional with mixed orders and a parameter-dependent coefficient.
fn unbalanced(c0: &[f64], c1: &[f64], c2: &[f64], domain: (f64, f64)) -> String {
    format!(
        r#"{{
        "parameters": ["g"], "cost": [1], "domain": [{}, {}],
        "variables": [{{"name": "u", "k": 3, "l": 3}}, {{"name": "v", "k": 2, "l": 2}}],
        "terms": [
            {{"coeff": {{"const": {}}}, "factors": [{{"var": "u", "deriv": 0}}, {{"var": "u", "deriv": 3}}]}},
            {{"coeff": {{"params": {{"g": {}}}}}, "factors": [{{"var": "v", "deriv": 0}}, {{"var": "u", "deriv": 2}}]}},
            {{"coeff": {{"const": {}}}, "factors": [{{"var": "u", "deriv": 1}}, {{"var": "v", "deriv": 2}}]}},
            {{"coeff": {{"const": [1]}}, "factors": [{{"var": "v", "deriv": 1}}, {{"var": "v", "deriv": 1}}]}}
        ]
    }}"#,
        domain.0,
        domain.1,
        fmt(c0),
        fmt(c1),
        fmt(c2)
    )
}

/// `∫ a(x) (u')² − γ u²` with Dirichlet conditions, maximizing γ.
fn wirtinger(a: &[f64]) -> String {
    format!(
        r#"{{
        "parameters": ["g"], "cost": [-1],
        "variables": [{{"name": "u", "k": 1, "l": 1}}],
        "terms": [
            {{"coeff": {{"const": {}}}, "factors": [{{"var": "u", "deriv": 1}}, {{"var": "u", "deriv": 1}}]}},
            {{"coeff": {{"params": {{"g": [-1]}}}}, "factors": [{{"var": "u", "deriv": 0}}, {{"var": "u", "deriv": 0}}]}}
        ],
        "bcs": [{{"u:0:-1": 1}}, {{"u:0:1": 1}}]
    }}"#,
        fmt(a)
    )
}

/// Coefficient that stays in `[1, 2]` on `[−1, 1]`.
fn positive_coeff() -> impl Strategy<Value = Vec<f64>> {
    (-0.3..0.3f64, -0.3..0.3f64).prop_map(|(b, c)| vec![1.5, b, c])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_and_derivative_agree_with_pointwise_values(p in poly(7), q in poly(5), x in -1.0..1.0f64) {
        let pq = p.mul(&q);
        prop_assert!((pq.eval(x) - p.eval(x) * q.eval(x)).abs() < 1e-12);
        let h = 1e-5;
        let fd = (p.eval((x + h).min(1.0)) - p.eval((x - h).max(-1.0))) / ((x + h).min(1.0) - (x - h).max(-1.0));
        prop_assert!((p.derivative().eval(x) - fd).abs() < 1e-6 * (1.0 + p.coeffs().iter().map(|c| c.abs()).sum::<f64>() * 50.0));
    }

    #[test]
    fn monomial_conversion_round_trips(p in poly(9)) {
        let back = LegendrePoly::from_monomial(&p.to_monomial());
        for n in 0..9 {
            prop_assert!((back.coeff(n) - p.coeff(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn integration_by_parts_keeps_the_value(
        c0 in coeffs(3), c1 in coeffs(2), c2 in coeffs(4), wu in poly(10), wv in poly(10), g in -2.0..2.0f64,
    ) {
        let p = parse_problem(&unbalanced(&c0, &c1, &c2, (-1.0, 1.0))).unwrap();
        let ibp = p.integrate_by_parts().unwrap();
        let w = [wu, wv];
        let a = p.inequalities[0].functional_value(&[g], &w);
        let b = ibp.inequalities[0].functional_value(&[g], &w);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn rescaling_keeps_the_value(
        c0 in coeffs(3), c1 in coeffs(2), c2 in coeffs(4), wu in poly(8), wv in poly(8), g in -2.0..2.0f64,
        lo in -3.0..0.0f64, len in 0.5..4.0f64,
    ) {
        let (a, b) = (lo, lo + len);
        let p = parse_problem(&unbalanced(&c0, &c1, &c2, (a, b))).unwrap();
        let r = p.rescale_domain();
        // w on [a, b] is the pullback of a polynomial on [−1, 1]
        let half = (b - a) / 2.0;
        let mid = (a + b) / 2.0;
        let w = [wu, wv];
        let direct = {
            let ineq = &p.inequalities[0];
            let quad = GaussLegendre::new(NonZeroUsize::new(16).unwrap());
            let nth = |q: &LegendrePoly, d: usize| (0..d).fold(q.clone(), |acc, _| acc.derivative());
            ineq.terms.iter().map(|t| {
                let fa = nth(&w[t.a.var], t.a.deriv);
                let fb = nth(&w[t.b.var], t.b.deriv);
                let sa = half.powi(-(t.a.deriv as i32));
                let sb = half.powi(-(t.b.deriv as i32));
                quad.integrate(a, b, |x| {
                    let s = (x - mid) / half;
                    t.coeff.eval(x, &[g]) * sa * fa.eval(s) * sb * fb.eval(s)
                })
            }).sum::<f64>()
        };
        let mapped = r.inequalities[0].functional_value(&[g], &w);
        prop_assert!((direct - mapped).abs() <= 1e-9 * direct.abs().max(1.0), "{direct} vs {mapped}");
    }

    #[test]
    fn sdpa_round_trip_is_exact(
        entries in prop::collection::vec((0usize..3, 0usize..3, -10.0..10.0f64), 1..12),
        cost in coeffs(2),
    ) {
        let mut prog = ConicProgram::new();
        prog.add_var("a");
        prog.add_var("b");
        prog.objective = cost;
        let mut m = AffineMatrix::zeros(3);
        for (k, (i, j, v)) in entries.iter().enumerate() {
            m.add_sym([None, Some(0), Some(1)][k % 3], *i, *j, *v);
        }
        prog.add_psd(m);
        let mut e = LinExpr::var(0);
        e.add_term(1, -0.25);
        prog.add_ineq(e);
        let text = export_sdpa(&prog).unwrap();
        let back = read_sdpa(&text).unwrap();
        prop_assert_eq!(export_sdpa(&back).unwrap(), text);
        prop_assert!(back.psd_blocks == prog.psd_blocks);
    }
}

proptest! {
    // every case here runs interior-point solves
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn outer_below_inner_and_outer_monotone(a in positive_coeff(), n in 4usize..9) {
        let p = parse_problem(&wirtinger(&a)).unwrap();
        let o1 = solve_outer(&p, n, TOL).unwrap();
        let o2 = solve_outer(&p, n + 2, TOL).unwrap();
        let i = solve_inner(&p, &InnerOptions::new(n), TOL).unwrap();
        prop_assert_eq!(o1.status, Status::Optimal);
        prop_assert!(o2.bound >= o1.bound - 1e-6, "{} then {}", o1.bound, o2.bound);
        if i.status == Status::Optimal {
            prop_assert!(o2.bound <= i.bound + 1e-6, "outer {} inner {}", o2.bound, i.bound);
        }
    }

    #[test]
    fn scaling_the_cost_scales_the_bound(a in positive_coeff(), s in 0.1..10.0f64) {
        let mut p = parse_problem(&wirtinger(&a)).unwrap();
        let r1 = solve_outer(&p, 8, TOL).unwrap();
        p.cost = vec![-s];
        let r2 = solve_outer(&p, 8, TOL).unwrap();
        prop_assert!((r2.bound - s * r1.bound).abs() <= 1e-6 * r2.bound.abs().max(1.0));
        prop_assert!((r2.gamma[0] - r1.gamma[0]).abs() <= 1e-6 * r1.gamma[0].abs().max(1.0));
    }

    #[test]
    fn slacks_dominate_coefficient_magnitudes(a in positive_coeff(), n in 5usize..9) {
        let p = parse_problem(&wirtinger(&a)).unwrap();
        let (prog, asm) = build_inner_sdp(&p, &InnerOptions::new(n)).unwrap();
        let out = sdp::solve(&prog, TOL).unwrap();
        prop_assume!(out.status == Status::Optimal);
        prop_assert!(asm.iter().any(|a| !a.abs_lifts.is_empty()));
        for lift in asm.iter().flat_map(|a| &a.abs_lifts) {
            let (f, t) = lift;
            prop_assert!(out.x[*t] >= f.eval(&out.x).abs() - 1e-9);
        }
    }

    #[test]
    fn certified_bound_holds_on_random_test_functions(a in positive_coeff(), n in 4usize..8, w in coeffs(14)) {
        let p = parse_problem(&wirtinger(&a)).unwrap();
        let r = solve_inner(&p, &InnerOptions::new(n), 1e-10).unwrap();
        prop_assume!(r.status == Status::Optimal);
        // (1 − x²) q(x) meets the Dirichlet conditions
        let bubble = LegendrePoly::new(vec![2.0 / 3.0, 0.0, -2.0 / 3.0]);
        let u = bubble.mul(&LegendrePoly::new(w));
        let f = p.inequalities[0].functional_value(&r.gamma, std::slice::from_ref(&u));
        let norm = u.mul(&u).integral();
        prop_assert!(f >= -1e-6 * norm, "F = {f}, ‖w‖² = {norm}");
    }
}

#[test]
fn omega_blocks_have_the_documented_sizes() {
    let doc = r#"{
        "parameters": ["g"], "cost": [1],
        "variables": [{"name": "u", "k": 1, "l": 1}, {"name": "v", "k": 1, "l": 1}],
        "terms": [
            {"coeff": {"const": [1, 0.2, 0.1]}, "factors": [{"var": "u", "deriv": 1}, {"var": "v", "deriv": 1}]},
            {"coeff": {"const": [2, 0, 0.3]}, "factors": [{"var": "u", "deriv": 1}, {"var": "u", "deriv": 1}]},
            {"coeff": {"const": [1]}, "factors": [{"var": "v", "deriv": 1}, {"var": "v", "deriv": 1}]},
            {"coeff": {"params": {"g": [-1]}}, "factors": [{"var": "u", "deriv": 0}, {"var": "u", "deriv": 0}]}
        ]
    }"#;
    let p = parse_problem(doc).unwrap();
    let (_, asm) = build_inner_sdp(&p, &InnerOptions::new(8)).unwrap();
    let d = asm[0].d_f;
    assert_eq!(d, 2);
    // a pair of distinct variables gets 4 d_F, a single variable 2 d_F
    let mut dims = asm[0].omega_dims.clone();
    dims.sort();
    assert_eq!(dims, vec![2 * d, 4 * d]);
}

#[test]
fn sweep_over_four_directions_of_a_box() {
    // γ₁² ≤ 1 and γ₂² ≤ 1 as two integral inequalities with constant integrands
    let doc = r#"{
        "parameters": ["a", "b"], "cost": [0, 0],
        "inequalities": [
            {"variables": [{"name": "u", "k": 0, "l": 0}],
             "terms": [{"coeff": {"const": [1], "params": {"a": [1]}}, "factors": [{"var": "u", "deriv": 0}, {"var": "u", "deriv": 0}]}]},
            {"variables": [{"name": "u", "k": 0, "l": 0}],
             "terms": [{"coeff": {"const": [1], "params": {"a": [-1]}}, "factors": [{"var": "u", "deriv": 0}, {"var": "u", "deriv": 0}]}]},
            {"variables": [{"name": "u", "k": 0, "l": 0}],
             "terms": [{"coeff": {"const": [1], "params": {"b": [1]}}, "factors": [{"var": "u", "deriv": 0}, {"var": "u", "deriv": 0}]}]},
            {"variables": [{"name": "u", "k": 0, "l": 0}],
             "terms": [{"coeff": {"const": [1], "params": {"b": [-1]}}, "factors": [{"var": "u", "deriv": 0}, {"var": "u", "deriv": 0}]}]}
        ]
    }"#;
    let p = parse_problem(doc).unwrap();
    for mode in [Mode::Inner, Mode::Outer] {
        let s = sweep(&p, 4, &Relaxation::new(mode, 2)).unwrap();
        assert_eq!(s.directions.len(), 4);
        for pt in &s.support_points {
            assert_eq!(pt.status, Status::Optimal, "{mode:?} θ={}", pt.theta);
            assert!((pt.support - 1.0).abs() < 1e-6, "{mode:?} θ={} support {}", pt.theta, pt.support);
        }
    }
}

#[test]
fn exported_relaxations_reimport_identically() {
    let p = parse_problem(&wirtinger(&[1.5, 0.1, -0.2])).unwrap();
    let (prog, _) = build_inner_sdp(&p, &InnerOptions::new(6)).unwrap();
    let (flat, _) = eliminate_equalities(&prog).unwrap();
    let text = export_sdpa(&flat).unwrap();
    assert_eq!(export_sdpa(&read_sdpa(&text).unwrap()).unwrap(), text);
}
