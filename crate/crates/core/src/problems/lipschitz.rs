use nalgebra::DMatrix;

use super::Point;
use crate::error::{Error, Result};
use crate::rng;

/// Multiplier applied to estimated smoothness constants.
pub const LIPSCHITZ_SAFETY: f64 = 1.01;
pub const POWER_TOL: f64 = 1e-6;
pub const POWER_MAX_ITERS: usize = 100_000;

const POWER_SEED: u64 = 0x5eed_1a7e;

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
///
/// Stops when the Rayleigh quotient changes by at most `tol` relative.
pub fn power_iteration<F>(apply: F, dim: usize, tol: f64, max_iters: usize) -> Result<f64>
where
    F: Fn(&Point) -> Point,
{
    if dim == 0 {
        return Err(Error::invalid("power iteration on an empty operator"));
    }
    let mut r = rng::seeded(POWER_SEED);
    let mut v = rng::gaussian_vector(&mut r, dim);
    v /= v.norm();
    let mut rayleigh = 0.0;
    for _ in 0..max_iters {
        let w = apply(&v);
        let next = v.dot(&w);
        let norm = w.norm();
        if !norm.is_finite() {
            return Err(Error::Numerical(
                "power iteration produced a non-finite vector".into(),
            ));
        }
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w / norm;
        if (next - rayleigh).abs() <= tol * next.abs() {
            return Ok(next);
        }
        rayleigh = next;
    }
    Err(Error::Numerical(format!(
        "power iteration stagnated after {max_iters} iterations (last estimate {rayleigh})"
    )))
}

/// Smoothness estimate for a quadratic-like oracle: top eigenvalue of
/// `apply` times [`LIPSCHITZ_SAFETY`].
pub fn estimate_lipschitz<F>(apply: F, dim: usize) -> Result<f64>
where
    F: Fn(&Point) -> Point,
{
    Ok(power_iteration(apply, dim, POWER_TOL, POWER_MAX_ITERS)? * LIPSCHITZ_SAFETY)
}

/// `||X||_op^2 * curvature * LIPSCHITZ_SAFETY`, via the smaller Gram matrix side.
pub fn gram_lipschitz(x: &DMatrix<f64>, curvature: f64) -> Result<f64> {
    let top = if x.ncols() <= x.nrows() {
        power_iteration(
            |v| x.tr_mul(&(x * v)),
            x.ncols(),
            POWER_TOL,
            POWER_MAX_ITERS,
        )?
    } else {
        power_iteration(|v| x * x.tr_mul(v), x.nrows(), POWER_TOL, POWER_MAX_ITERS)?
    };
    Ok(top * curvature * LIPSCHITZ_SAFETY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn identity_gives_safety_factor() {
        let l = estimate_lipschitz(|v| v.clone(), 3).unwrap();
        assert!((l - 1.01).abs() < 1e-12);
    }

    #[test]
    fn diagonal_spectrum() {
        let d = DVector::from_vec(vec![1.0, 100.0]);
        let top = power_iteration(|v| d.component_mul(v), 2, POWER_TOL, POWER_MAX_ITERS).unwrap();
        assert!((top - 100.0).abs() < 1e-4);
        let l = estimate_lipschitz(|v| d.component_mul(v), 2).unwrap();
        assert!((l - 101.0).abs() < 1e-2);
    }

    #[test]
    fn matches_dense_eigensolver() {
        let mut r = rng::seeded(3);
        for (m, n) in [(40, 15), (20, 50)] {
            let x = DMatrix::from_fn(m, n, |_, _| rng::gaussian(&mut r));
            let gram = x.tr_mul(&x);
            let exact = gram.symmetric_eigen().eigenvalues.max();
            let est = gram_lipschitz(&x, 1.0).unwrap() / LIPSCHITZ_SAFETY;
            assert!(((est - exact) / exact).abs() < 1e-4, "{est} vs {exact}");
        }
    }

    #[test]
    fn stagnation_is_an_error() {
        let d = DVector::from_vec(vec![1.0, 0.999]);
        let res = power_iteration(|v| d.component_mul(v), 2, 1e-14, 50);
        assert!(res.is_err());
    }
}
