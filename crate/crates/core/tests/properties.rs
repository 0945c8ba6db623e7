use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use robin_bubble::bubble_energy::{constants, energy, ConstantField};
use robin_bubble::critical::{bisect, reduced_model};
use robin_bubble::domain::{Domain, Harmonic};
use robin_bubble::field_solver::{NeumannSolver, SolverOptions};
use robin_bubble::kernels::{bubble_w, diag_limit, gamma_minus_phi, yukawa_phi, BubbleParams, Point3};
use robin_bubble::robin::RobinEvaluator;

fn ball_evaluator() -> &'static RobinEvaluator {
    static EV: OnceLock<RobinEvaluator> = OnceLock::new();
    EV.get_or_init(|| {
        RobinEvaluator::new(1.2, &Domain::unit_ball(), SolverOptions { n: 1600, ..SolverOptions::default() }).unwrap()
    })
}

fn point_in_ball(max_radius: f64) -> impl Strategy<Value = Point3> {
    (0.0..max_radius, -1.0f64..1.0, 0.0..2.0 * PI).prop_map(|(r, c, phi)| {
        let s = (1.0 - c * c).sqrt();
        Point3::new(s * phi.cos(), s * phi.sin(), c) * r
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn yukawa_decreases_in_distance_and_lambda(lambda in 0.01f64..20.0, r in 0.01f64..3.0, f in 1.01f64..2.0) {
        let o = Point3::zeros();
        let phi = |l: f64, r: f64| yukawa_phi(l, &o, &Point3::new(r, 0.0, 0.0)).unwrap();
        prop_assert!(phi(lambda, r * f) < phi(lambda, r));
        prop_assert!(phi(lambda * f, r) < phi(lambda, r));
    }

    #[test]
    fn regular_difference_is_lipschitz_at_zero(lambda in 0.01f64..20.0, k in 2i32..=6) {
        let r = 10f64.powi(-k);
        prop_assert!((gamma_minus_phi(lambda, r) - diag_limit(lambda)).abs() <= lambda * r);
    }

    #[test]
    fn bubble_solves_its_equation(p in point_in_ball(1.0), mu in 0.2f64..2.0) {
        let b = BubbleParams::new(Point3::zeros(), mu).unwrap();
        let h = 1e-3 * mu;
        let w0 = bubble_w(&b, &p);
        let lap: f64 = (0..3)
            .map(|i| {
                let mut e = Point3::zeros();
                e[i] = h;
                bubble_w(&b, &(p + e)) + bubble_w(&b, &(p - e)) - 2.0 * w0
            })
            .sum::<f64>()
            / (h * h);
        prop_assert!((-lap - w0.powi(5)).abs() <= 1e-5 * w0.powi(5).max(1.0 / mu.powf(2.5)));
    }

    #[test]
    fn constant_field_energy(lambda in 0.1f64..5.0, c in -2.0f64..2.0) {
        let ball = Domain::unit_ball();
        let q = ball.volume_quadrature(&Point3::zeros(), 0.5, 1).unwrap();
        let e = energy(lambda, &ConstantField(c), &q);
        let exact = (0.5 * lambda * c * c - c.powi(6) / 6.0) * ball.volume();
        prop_assert!((e - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
    }

    #[test]
    fn reduced_model_peaks_at_one(lambda in 0.5f64..5.0, g in 1e-4f64..0.1, big in 0.0f64..2.0) {
        prop_assert!(reduced_model(lambda, g, big) <= reduced_model(lambda, g, 1.0));
        prop_assert_eq!(constants().model(lambda, g, 0.0), constants().a0);
    }

    #[test]
    fn bisection_bracket_holds(root in -5.0f64..5.0, slope in 0.1f64..10.0) {
        let f = |x: f64| slope * (x - root) + (x - root).powi(3);
        let b = bisect(|x| Ok(f(x)), -10.0, 10.0, 1e-9).unwrap();
        prop_assert!(f(b.lo) < 0.0 && f(b.hi) > 0.0);
        prop_assert!((b.root - root).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn divergence_theorem_on_star_domains(c in -0.15f64..0.15, n in 400usize..1200) {
        let d = Domain::star(Point3::zeros(), vec![Harmonic { degree: 0, order: 0, coefficient: 1.0 }, Harmonic { degree: 2, order: 0, coefficient: c }]).unwrap();
        let s = d.boundary_sample(n).unwrap();
        let flux: f64 = s.points.iter().zip(&s.normals).zip(&s.weights).map(|((p, nu), w)| w * p.dot(nu)).sum();
        prop_assert!((flux - 3.0 * d.volume()).abs() <= 1e-3 * 3.0 * d.volume());
    }

    #[test]
    fn green_function_is_symmetric(x in point_in_ball(0.8), y in point_in_ball(0.8)) {
        prop_assume!((x - y).norm() > 0.05);
        let ev = ball_evaluator();
        prop_assert!((ev.green(&x, &y).unwrap() - ev.green(&y, &x).unwrap()).abs() <= 1e-6);
    }

    #[test]
    fn robin_function_increases_with_lambda(x in point_in_ball(0.8)) {
        prop_assert!(ball_evaluator().dg_dlambda(&x).unwrap() > 0.0);
    }

    #[test]
    fn solver_fields_satisfy_the_equation(a in -1.0f64..1.0, b in -1.0f64..1.0, x in point_in_ball(0.7)) {
        let solver = NeumannSolver::new(1.2, &Domain::unit_ball(), SolverOptions::default()).unwrap();
        let sol = solver.solve(|p, nu| a * nu.x + b * p.dot(nu) * p.z);
        let u = &sol.field;
        let h = 1e-3;
        let u0 = u.eval(&x);
        let lap: f64 = (0..3)
            .map(|i| {
                let mut e = Point3::zeros();
                e[i] = h;
                u.eval(&(x + e)) + u.eval(&(x - e)) - 2.0 * u0
            })
            .sum::<f64>()
            / (h * h);
        let scale = solver.collocation().points.iter().map(|p| u.eval(&(p * 0.9)).abs()).fold(u0.abs(), f64::max);
        prop_assert!((-lap + 1.2 * u0).abs() <= 1e-6 * scale.max(1e-12));
    }
}
