//! Independent reference computations for closed-form operators.

use nalgebra::DMatrix;

use crate::problems::Point;
use crate::rng;

/// Minimiser of a unimodal scalar function on `[a, b]` by golden-section
/// search, to interval width `tol`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `argmin_x (x - v)^2 / 2 + t |x|` for a scalar `v`, by golden section on
/// the optimality residual `dist(0, x - v + t sign(x))`. The residual is
/// unimodal and grows linearly away from the minimiser, so the search
/// resolves it to the interval width rather than to `sqrt(eps)`.
pub fn l1_prox_scalar_oracle(v: f64, t: f64) -> f64 {
    let residual = |x: f64| {
        if x == 0.0 {
            (v.abs() - t).max(0.0)
        } else {
            (x - v + t * x.signum()).abs()
        }
    };
    let width = v.abs() + t + 1.0;
    golden_section(residual, -width, width, 1e-14 * width)
}

const FACTOR_MAX_SWEEPS: usize = 200_000;

/// Optimal value of `min_X ||X - V||_F^2 / 2 + t ||X||_*` without an SVD.
///
/// Uses the variational form `||X||_* = min_{X = A B^T} (||A||^2 + ||B||^2) / 2`
/// with full-rank factors and alternates exact ridge solves
/// `A = V B (B^T B + t I)^-1`, `B = V^T A (A^T A + t I)^-1` from a random
/// start. The returned value is the factored objective, an upper bound that
/// decreases monotonically to the optimum.
pub fn nuclear_prox_objective_oracle(
    v: &Point,
    rows: usize,
    cols: usize,
    t: f64,
    seed: u64,
) -> f64 {
    let vm = DMatrix::from_column_slice(rows, cols, v.as_slice());
    let r = rows.min(cols);
    let mut g = rng::seeded(seed);
    let mut a = DMatrix::from_fn(rows, r, |_, _| rng::gaussian(&mut g));
    let mut b = DMatrix::from_fn(cols, r, |_, _| rng::gaussian(&mut g));
    let ridge = DMatrix::<f64>::identity(r, r) * t;
    let objective = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        0.5 * (&vm - a * b.transpose()).norm_squared()
            + 0.5 * t * (a.norm_squared() + b.norm_squared())
    };
    let mut value = objective(&a, &b);
    for _ in 0..FACTOR_MAX_SWEEPS {
        let gram_b = b.tr_mul(&b) + &ridge;
        a = (&vm * &b)
            * gram_b
                .try_inverse()
                .expect("ridge system is positive definite");
        let gram_a = a.tr_mul(&a) + &ridge;
        b = (vm.tr_mul(&a))
            * gram_a
                .try_inverse()
                .expect("ridge system is positive definite");
        let next = objective(&a, &b);
        let done = value - next <= 1e-17 * (1.0 + next.abs());
        value = next;
        if done {
            break;
        }
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let x = golden_section(|x| (x - 1.3).powi(2), -5.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-10);
    }

    #[test]
    fn scalar_l1_oracle_soft_thresholds() {
        assert!((l1_prox_scalar_oracle(3.0, 1.0) - 2.0).abs() < 1e-10);
        assert!(l1_prox_scalar_oracle(0.4, 1.0).abs() < 1e-10);
    }

    #[test]
    fn factored_oracle_on_diagonal_matrix() {
        // diag(3, 1) with t = 2: optimum diag(1, 0), value 0.5 (4 + 1) + 2 * 1 = 4.5
        let v = Point::from_vec(vec![3.0, 0.0, 0.0, 1.0]);
        let val = nuclear_prox_objective_oracle(&v, 2, 2, 2.0, 1);
        assert!((val - 4.5).abs() < 1e-9, "{val}");
    }
}
