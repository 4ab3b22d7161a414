use std::sync::Arc;

use adaptive_apg::data::{gen_lasso, gen_matrix_completion};
use adaptive_apg::estimators::{hat_mu, Estimate};
use adaptive_apg::problems::{gram_lipschitz, Logistic};
use adaptive_apg::solvers::{pgd, SolverConfig};
use adaptive_apg::verification::{finite_diff_grad, random_spectral};
use adaptive_apg::{CompositeProblem, Penalty, Point};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn point(seed: u64, n: usize, scale: f64) -> Point {
    let mut r = adaptive_apg::rng::seeded(seed);
    adaptive_apg::rng::gaussian_vector(&mut r, n) * scale
}

fn logistic(seed: u64) -> CompositeProblem {
    let mut r = adaptive_apg::rng::seeded(seed);
    let x = DMatrix::from_fn(40, 8, |_, _| adaptive_apg::rng::gaussian(&mut r));
    let labels = DVector::from_fn(40, |i, _| if i % 3 == 0 { -1.0 } else { 1.0 });
    let ridge = 0.1;
    let l = gram_lipschitz(&x, 0.25).unwrap() + 2.0 * ridge;
    CompositeProblem::new(
        "logit",
        Arc::new(Logistic::new(x, labels, ridge).unwrap()),
        Penalty::Zero,
        l,
    )
    .unwrap()
}

/// `h(y) <= h(x) + <grad h(x), y - x> + L/2 ||y - x||^2`
fn descent_gap(p: &CompositeProblem, x: &Point, y: &Point) -> f64 {
    let h = p.smooth();
    let d = y - x;
    let upper = h.value(x) + h.gradient(x).dot(&d) + 0.5 * p.lipschitz() * d.norm_squared();
    upper - h.value(y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn descent_lemma_least_squares(sx in any::<u64>(), sy in any::<u64>(), scale in 0.01f64..10.0) {
        let p = gen_lasso(30, 20, 5, 0.1, 0.0, 7).unwrap();
        let (x, y) = (point(sx, 20, scale), point(sy, 20, scale));
        prop_assert!(descent_gap(&p, &x, &y) >= -1e-9 * (1.0 + p.smooth().value(&y).abs()));
    }

    #[test]
    fn descent_lemma_logistic(sx in any::<u64>(), sy in any::<u64>(), scale in 0.01f64..5.0) {
        let p = logistic(3);
        let (x, y) = (point(sx, 8, scale), point(sy, 8, scale));
        prop_assert!(descent_gap(&p, &x, &y) >= -1e-9 * (1.0 + p.smooth().value(&y).abs()));
    }

    #[test]
    fn descent_lemma_observed_squares(sx in any::<u64>(), sy in any::<u64>()) {
        let p = gen_matrix_completion(8, 2, 30, 0.01, 5).unwrap();
        let (x, y) = (point(sx, 64, 1.0), point(sy, 64, 1.0));
        prop_assert!(descent_gap(&p, &x, &y) >= -1e-9 * (1.0 + p.smooth().value(&y).abs()));
    }

    #[test]
    fn strong_convexity_lower_model(seed in 0u64..50, sx in any::<u64>(), sy in any::<u64>()) {
        let (_, p) = random_spectral(10, 0.5, 20.0, seed, true).unwrap();
        let (x, y) = (point(sx, 10, 2.0), point(sy, 10, 2.0));
        let h = p.smooth();
        let d = &y - &x;
        let lower = h.value(&x) + h.gradient(&x).dot(&d) + 0.25 * d.norm_squared();
        prop_assert!(h.value(&y) >= lower - 1e-9 * (1.0 + lower.abs()));
    }

    #[test]
    fn estimate_lies_between_mu_and_l(seed in 0u64..50, sy in any::<u64>()) {
        let (_, p) = random_spectral(12, 1.0, 50.0, seed, true).unwrap();
        let y = point(sy, 12, 3.0);
        if let Estimate::Value(m) = hat_mu(&p, &y, 0.0).unwrap() {
            prop_assert!((1.0 - 1e-10..=50.0 + 1e-10).contains(&m), "mu_hat = {m}");
        }
    }

    #[test]
    fn prox_step_decreases_objective(sy in any::<u64>(), lambda in 0.0f64..1.0) {
        let p = gen_lasso(30, 50, 5, 0.1, lambda, 11).unwrap();
        let y = point(sy, 50, 1.0);
        let step = p.prox_step(&y).unwrap();
        let g = &step.reduced_gradient;
        // f(T_L(y)) <= f(y) - ||g_L(y)||^2 / (2L)
        let bound = p.value(&y) - g.norm_squared() / (2.0 * p.lipschitz());
        prop_assert!(p.value(&step.point) <= bound + 1e-9 * (1.0 + bound.abs()));
    }
}

#[test]
fn gradients_agree_with_finite_differences() {
    let problems = [
        gen_lasso(30, 20, 5, 0.1, 0.0, 7).unwrap(),
        logistic(3),
        gen_matrix_completion(8, 2, 30, 0.01, 5).unwrap(),
        random_spectral(10, 0.5, 20.0, 4, true).unwrap().1,
    ];
    for p in &problems {
        let x = point(99, p.dim(), 0.7);
        let exact = p.smooth().gradient(&x);
        let approx = finite_diff_grad(p.smooth(), &x, 1e-6);
        let err = (&exact - &approx).norm() / (1.0 + exact.norm());
        assert!(err < 1e-6, "{}: relative error {err:e}", p.name());
    }
}

#[test]
fn gradient_descent_is_monotone_on_lasso() {
    let p = gen_lasso(40, 80, 8, 0.05, 0.2, 2).unwrap();
    let t = pgd(
        &p,
        &Point::zeros(80),
        &SolverConfig::default().with_max_iters(300),
    )
    .unwrap();
    assert!(t.records.windows(2).all(|w| w[1].f_y <= w[0].f_y + 1e-12));
}
