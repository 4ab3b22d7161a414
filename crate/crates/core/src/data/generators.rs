use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::problems::{
    gram_lipschitz, CompositeProblem, LeastSquares, ObservedSquares, Penalty, Point,
};
use crate::rng;
use crate::verification::random_spectral;

/// Quadratic with eigenvalues `mu`, `L` and log-uniform interior values, a
/// Gaussian minimizer and `f* = 0`. Exact `mu`, `L`, `f*`, `x*` are set.
pub fn gen_spectral_instance(n: usize, mu: f64, l: f64, seed: u64) -> Result<CompositeProblem> {
    Ok(random_spectral(n, mu, l, seed, false)?.1)
}

/// Observed entries `(row, col, value)` of a `d x d` matrix, pairs unique.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub d: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

/// Observations of `Y = U V^T` (`U`, `V` Gaussian `d x rank`) on `n_obs`
/// entries sampled without replacement, as
/// `sum_Omega (X_ij - Y_ij)^2 + lambda ||X||_*` (smoothness constant 2).
pub fn gen_matrix_completion(
    d: usize,
    rank: usize,
    n_obs: usize,
    lambda: f64,
    seed: u64,
) -> Result<CompositeProblem> {
    let obs = gen_observations(d, rank, n_obs, seed)?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    let smooth = ObservedSquares::new(d, d, &obs.entries)?;
    let problem = CompositeProblem::new(
        format!("matrix-completion-d{d}-r{rank}-n{n_obs}"),
        Arc::new(smooth),
        Penalty::Nuclear {
            weight: lambda,
            rows: d,
            cols: d,
        },
        2.0,
    )?;
    if rank == 0 {
        return problem.with_f_star(0.0)?.with_x_star(Point::zeros(d * d));
    }
    Ok(problem)
}

pub fn gen_observations(d: usize, rank: usize, n_obs: usize, seed: u64) -> Result<ObservationSet> {
    if d == 0 {
        return Err(Error::invalid("matrix dimension must be positive"));
    }
    if n_obs > d * d {
        return Err(Error::invalid(format!(
            "{n_obs} observations requested from a {d}x{d} matrix"
        )));
    }
    let mut r = rng::seeded(seed);
    let u = DMatrix::from_fn(d, rank, |_, _| rng::gaussian(&mut r));
    let v = DMatrix::from_fn(d, rank, |_, _| rng::gaussian(&mut r));
    let y = &u * v.transpose();
    let mut flat = index::sample(&mut r, d * d, n_obs).into_vec();
    flat.sort_unstable();
    let entries = flat
        .into_iter()
        .map(|f| {
            let (i, j) = (f % d, f / d);
            (i, j, y[(i, j)])
        })
        .collect();
    Ok(ObservationSet { d, entries })
}

/// `||A x - b||^2 / 2 + lambda ||x||_1` with `A` having i.i.d. `N(0, 1/m)`
/// entries, `b = A x_true + noise_sd * N(0, 1)` and `x_true` Gaussian on a
/// random support of size `sparsity`.
pub fn gen_lasso(
    m: usize,
    n: usize,
    sparsity: usize,
    noise_sd: f64,
    lambda: f64,
    seed: u64,
) -> Result<CompositeProblem> {
    if sparsity > n {
        return Err(Error::invalid(format!(
            "sparsity {sparsity} exceeds dimension {n}"
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::invalid("design dimensions must be positive"));
    }
    let mut r = rng::seeded(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let a = DMatrix::from_fn(m, n, |_, _| scale * rng::gaussian(&mut r));
    let mut x_true = Point::zeros(n);
    for j in index::sample(&mut r, n, sparsity) {
        x_true[j] = rng::gaussian(&mut r);
    }
    let noise = DVector::from_fn(m, |_, _| noise_sd * rng::gaussian(&mut r));
    let b = &a * &x_true + noise;
    let l = gram_lipschitz(&a, 1.0)?;
    let penalty = if lambda > 0.0 {
        Penalty::L1 { weight: lambda }
    } else {
        Penalty::Zero
    };
    CompositeProblem::new(
        format!("lasso-{m}x{n}-s{sparsity}"),
        Arc::new(LeastSquares::new(a, b)?),
        penalty,
        l,
    )
}

/// Planted coefficients of [`gen_lasso`] for the same arguments.
pub fn planted_lasso_solution(m: usize, n: usize, sparsity: usize, seed: u64) -> Point {
    let mut r = rng::seeded(seed);
    for _ in 0..m * n {
        rng::gaussian(&mut r);
    }
    let mut x_true = Point::zeros(n);
    for j in index::sample(&mut r, n, sparsity) {
        x_true[j] = rng::gaussian(&mut r);
    }
    x_true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{prox_nuclear, LIPSCHITZ_SAFETY};

    #[test]
    fn spectral_generator_is_deterministic() {
        let a = gen_spectral_instance(50, 1.0, 100.0, 5).unwrap();
        let b = gen_spectral_instance(50, 1.0, 100.0, 5).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(a.mu(), Some(1.0));
        assert_eq!(a.lipschitz(), 100.0);
        let one = gen_spectral_instance(1, 2.0, 2.0, 5).unwrap();
        assert_eq!((one.mu(), one.lipschitz()), (Some(2.0), 2.0));
    }

    #[test]
    fn matrix_completion_shapes() {
        let p = gen_matrix_completion(30, 5, 200, 0.01, 1).unwrap();
        assert_eq!(p.dim(), 900);
        assert_eq!(p.lipschitz(), 2.0);
        let obs = gen_observations(30, 5, 200, 1).unwrap();
        let mut pairs: Vec<_> = obs.entries.iter().map(|e| (e.0, e.1)).collect();
        pairs.dedup();
        assert_eq!(pairs.len(), 200);
        assert!(gen_matrix_completion(3, 1, 10, 0.1, 1).is_err());
    }

    #[test]
    fn rank_zero_has_zero_solution() {
        let p = gen_matrix_completion(6, 0, 20, 0.1, 1).unwrap();
        assert_eq!(p.f_star(), Some(0.0));
        assert_eq!(p.x_star(), Some(&Point::zeros(36)));
    }

    #[test]
    fn fully_observed_optimum_is_shrinkage() {
        // sum (X - Y)^2 + lambda ||X||_* is minimised by shrinking the
        // singular values of Y by lambda / 2.
        let (d, lambda) = (6, 0.5);
        let p = gen_matrix_completion(d, 2, d * d, lambda, 3).unwrap();
        let obs = gen_observations(d, 2, d * d, 3).unwrap();
        let mut y = Point::zeros(d * d);
        for (i, j, v) in &obs.entries {
            y[i + j * d] = *v;
        }
        let x = prox_nuclear(&y, d, d, lambda / 2.0).unwrap();
        let step = p.prox_step(&x).unwrap();
        assert!(step.reduced_gradient.norm() < 1e-10);
    }

    #[test]
    fn noiseless_least_squares_recovers_planted_solution() {
        let p = gen_lasso(80, 20, 5, 0.0, 0.0, 9).unwrap();
        let x = planted_lasso_solution(80, 20, 5, 9);
        assert!(p.value(&x).abs() < 1e-20);
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 5);
    }

    #[test]
    fn lasso_lipschitz_matches_eigensolver() {
        let p = gen_lasso(100, 200, 20, 0.01, 0.1, 2).unwrap();
        let again = gen_lasso(100, 200, 20, 0.01, 0.1, 2).unwrap();
        assert_eq!(p.content_hash(), again.content_hash());
        let mut r = rng::seeded(2);
        let a = DMatrix::from_fn(100, 200, |_, _| 0.1 * rng::gaussian(&mut r));
        let top = (&a * a.transpose()).symmetric_eigen().eigenvalues.max();
        assert!(((p.lipschitz() / LIPSCHITZ_SAFETY - top) / top).abs() < 1e-4);
    }
}
