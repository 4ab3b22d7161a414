use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use sha2::Sha256;

use crate::error::{Error, Result};
use crate::problems::{hash_slice, CompositeProblem, Penalty, Point, SmoothFunction};
use crate::rng;

/// `h(x) = f* + (x - x*)^T Q diag(lambda) Q^T (x - x*) / 2`.
///
/// Eigenvalues are kept sorted ascending, so `lambda_1 = mu` and
/// `lambda_n = L`. `Q` is the identity unless a basis seed was given.
#[derive(Debug, Clone)]
pub struct SpectralQuadratic {
    eigenvalues: DVector<f64>,
    basis: Option<DMatrix<f64>>,
    x_star: Point,
    f_star: f64,
}

impl SpectralQuadratic {
    pub fn new(
        eigenvalues: &[f64],
        x_star: Point,
        f_star: f64,
        basis_seed: Option<u64>,
    ) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("at least one eigenvalue is required"));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(format!(
                "eigenvalues must be positive, got {bad}"
            )));
        }
        if x_star.len() != eigenvalues.len() {
            return Err(Error::invalid("x* and eigenvalues differ in length"));
        }
        if !f_star.is_finite() {
            return Err(Error::invalid("f* must be finite"));
        }
        let mut sorted = eigenvalues.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let basis = basis_seed.map(|seed| {
            let mut r = rng::seeded(seed);
            let g = DMatrix::from_fn(n, n, |_, _| rng::gaussian(&mut r));
            g.qr().q()
        });
        Ok(Self {
            eigenvalues: DVector::from_vec(sorted),
            basis,
            x_star,
            f_star,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn mu(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lipschitz(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Second smallest eigenvalue (counted with multiplicity).
    pub fn lambda2(&self) -> Option<f64> {
        (self.eigenvalues.len() > 1).then(|| self.eigenvalues[1])
    }

    pub fn x_star(&self) -> &Point {
        &self.x_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn has_identity_basis(&self) -> bool {
        self.basis.is_none()
    }

    /// Coordinates of `x - x*` in the eigenbasis.
    pub fn eigen_coordinates(&self, x: &Point) -> Point {
        let d = x - &self.x_star;
        match &self.basis {
            Some(q) => q.tr_mul(&d),
            None => d,
        }
    }

    /// Squared norm of the component of `y - x*` on the eigenspace of `mu`.
    pub fn omega1_sq(&self, y: &Point) -> f64 {
        let c = self.eigen_coordinates(y);
        let mu = self.mu();
        c.iter()
            .zip(self.eigenvalues.iter())
            .filter(|(_, l)| **l == mu)
            .map(|(ci, _)| ci * ci)
            .sum()
    }

    fn to_original_coordinates(&self, c: Point) -> Point {
        match &self.basis {
            Some(q) => q * c,
            None => c,
        }
    }
}

impl SmoothFunction for SpectralQuadratic {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn value(&self, x: &Point) -> f64 {
        let c = self.eigen_coordinates(x);
        let quad: f64 = c
            .iter()
            .zip(self.eigenvalues.iter())
            .map(|(ci, l)| l * ci * ci)
            .sum();
        self.f_star + 0.5 * quad
    }

    fn gradient(&self, x: &Point) -> Point {
        let c = self.eigen_coordinates(x);
        self.to_original_coordinates(c.component_mul(&self.eigenvalues))
    }

    fn fingerprint(&self, hasher: &mut Sha256) {
        hash_slice(hasher, self.eigenvalues.as_slice());
        hash_slice(hasher, self.x_star.as_slice());
        hash_slice(hasher, &[self.f_star]);
        if let Some(q) = &self.basis {
            hash_slice(hasher, q.as_slice());
        }
    }
}

/// Builds a spectral quadratic and the matching problem with exact `mu`, `L`,
/// `f*` and `x*`. A `seed` draws a random orthonormal basis; `None` keeps
/// the identity.
pub fn make_spectral(
    eigenvalues: &[f64],
    x_star: Point,
    f_star: f64,
    seed: Option<u64>,
) -> Result<(SpectralQuadratic, CompositeProblem)> {
    let q = SpectralQuadratic::new(eigenvalues, x_star, f_star, seed)?;
    let problem = CompositeProblem::new(
        format!("spectral-{}", eigenvalues.len()),
        Arc::new(q.clone()),
        Penalty::Zero,
        q.lipschitz(),
    )?
    .with_mu(q.mu())?
    .with_f_star(q.f_star())?
    .with_x_star(q.x_star().clone())?;
    Ok((q, problem))
}

/// Spectral instance with eigenvalues `mu`, `L` and `n - 2` log-uniform
/// interior values, a Gaussian `x*` and `f* = 0`, all drawn from `seed`.
/// `rotate` adds a random orthonormal basis.
pub fn random_spectral(
    n: usize,
    mu: f64,
    l: f64,
    seed: u64,
    rotate: bool,
) -> Result<(SpectralQuadratic, CompositeProblem)> {
    if !(mu > 0.0 && mu <= l && l.is_finite()) {
        return Err(Error::invalid(format!(
            "need 0 < mu <= L, got mu = {mu}, L = {l}"
        )));
    }
    let eigenvalues = match n {
        0 => return Err(Error::invalid("dimension must be positive")),
        1 if mu != l => {
            return Err(Error::invalid("a one-dimensional instance needs mu = L"));
        }
        1 => vec![l],
        _ => {
            let mut r = rng::seeded(seed);
            let (lo, hi) = (mu.ln(), l.ln());
            let mut eigs = vec![mu];
            eigs.extend((0..n - 2).map(|_| {
                let u = rng::uniform(&mut r);
                (lo + u * (hi - lo)).exp()
            }));
            eigs.push(l);
            eigs
        }
    };
    let mut r = rng::seeded(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let x_star = rng::gaussian_vector(&mut r, n);
    let basis_seed = rotate.then(|| seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(1));
    make_spectral(&eigenvalues, x_star, 0.0, basis_seed)
}

/// `(||y0 - x*||^2 / omega_1^2) (lambda_2 - mu) (lambda_2 / mu) ((1 - lambda_2/L) / (1 - mu/L))^(2k)`,
/// the stated upper bound on `mu_hat(y_k) - mu` along gradient descent with step `1/L`.
pub fn gd_estimator_bound_rhs(q: &SpectralQuadratic, y0: &Point, k: usize) -> Result<f64> {
    let mu = q.mu();
    let l = q.lipschitz();
    let lambda2 = q
        .lambda2()
        .ok_or_else(|| Error::Precondition("degenerate instance: only one eigenvalue".into()))?;
    if lambda2 == mu {
        return Err(Error::Precondition(
            "degenerate instance: second eigenvalue equals mu".into(),
        ));
    }
    let omega1_sq = q.omega1_sq(y0);
    if omega1_sq == 0.0 {
        return Err(Error::Precondition(
            "degenerate instance: y0 - x* has no component on the mu eigenspace".into(),
        ));
    }
    if mu == l {
        return Err(Error::Precondition("degenerate instance: mu = L".into()));
    }
    let dist_sq = (y0 - q.x_star()).norm_squared();
    let ratio = (1.0 - lambda2 / l) / (1.0 - mu / l);
    Ok(dist_sq / omega1_sq * (lambda2 - mu) * (lambda2 / mu) * ratio.powi(2 * k as i32))
}
