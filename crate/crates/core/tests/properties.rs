use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use projmetric::acceptance::{derivative_property, random_expr, random_expr_env, round_trip_property};
use projmetric::geometry::{christoffel, levi_civita_residual, pullback, CoordinateMap};
use projmetric::liouville::{lin1_residual, mobility_matrix};
use projmetric::{parse, scalar_curvature, simplify, Domain, Expr, Metric2, ParamEnv, ProjectiveConnection};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

/// `E = exp(a x + b y)`, `F = c x y`, `G = 2 + x^2 + d y^2` on the unit square.
fn sample_metric(a: f64, b: f64, c: f64, d: f64) -> Metric2 {
    let env = ParamEnv::new().with("a", a).with("b", b).with("c", c).with("d", d);
    Metric2::new(
        parse("exp(a*x + b*y)").unwrap(),
        parse("c*x*y").unwrap(),
        parse("2 + x^2 + d*y^2").unwrap(),
        env,
        Domain::rect(-1.0, 1.0, -1.0, 1.0),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn derivative_matches_central_difference(seed in any::<u64>()) {
        let (done, failures) = derivative_property(4, seed);
        prop_assert!(done > 0);
        prop_assert!(failures.is_empty(), "{:?}", failures);
    }

    #[test]
    fn printing_then_parsing_preserves_values(seed in any::<u64>()) {
        let (_, failures) = round_trip_property(4, seed);
        prop_assert!(failures.is_empty(), "{:?}", failures);
    }

    #[test]
    fn simplify_preserves_values(seed in any::<u64>(), x in -1.5..1.5f64, y in -1.5..1.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expr(&mut rng, 5);
        let s = simplify(&e);
        let env = random_expr_env();
        // Cancellation may enlarge the domain, so only points where `e` is finite count.
        if let Ok(v) = e.eval((x, y), &env) {
            if v.is_finite() && v.abs() < 1e8 {
                let w = s.eval((x, y), &env);
                prop_assert!(
                    matches!(w, Ok(w) if (w - v).abs() <= 1e-9 * (1.0 + v.abs())),
                    "{} -> {}: {} vs {:?}", e, s, v, w
                );
            }
        }
    }

    #[test]
    fn levi_civita_connection_is_metric(a in -1.0..1.0f64, b in -1.0..1.0f64, c in -0.3..0.3f64, d in 0.5..2.0f64) {
        let g = sample_metric(a, b, c, d);
        let res = levi_civita_residual(&g, &christoffel(&g), &g.samples(20)).unwrap();
        prop_assert!(res < 1e-10, "residual {}", res);
    }

    #[test]
    fn mobility_matrix_solves_the_linear_system(a in -1.0..1.0f64, b in -1.0..1.0f64, c in -0.3..0.3f64, d in 0.5..2.0f64) {
        let g = sample_metric(a, b, c, d);
        let pc = ProjectiveConnection::of_metric(&g);
        let rep = lin1_residual(&pc, &mobility_matrix(&g), &g.samples(20)).unwrap();
        prop_assert!(rep.max_abs < 1e-9, "residual {}", rep.max_abs);
    }

    #[test]
    fn curvature_is_invariant_under_translation(
        a in -1.0..1.0f64, b in -1.0..1.0f64, c in -0.3..0.3f64, d in 0.5..2.0f64,
        sx in -0.2..0.2f64, sy in -0.2..0.2f64, px in -0.7..0.7f64, py in -0.7..0.7f64,
    ) {
        let g = sample_metric(a, b, c, d);
        let map = CoordinateMap::new(
            Expr::x() + Expr::constant(sx),
            Expr::y() + Expr::constant(sy),
        );
        let h = pullback(&g, &map, Domain::rect(-0.8, 0.8, -0.8, 0.8)).unwrap();
        let r = scalar_curvature(&g).eval((px + sx, py + sy), &g.env).unwrap();
        let rh = scalar_curvature(&h).eval((px, py), &h.env).unwrap();
        prop_assert!((r - rh).abs() <= 1e-9 * (1.0 + r.abs()), "{} vs {}", r, rh);
    }
}
