//! Composite objectives `f = h + psi`.
//!
//! `h` is an L-smooth function exposed through [`SmoothFunction`]; `psi` is a
//! [`Penalty`] with a closed-form proximal operator. [`CompositeProblem`]
//! bundles both with the smoothness constant and whatever ground truth is
//! known (strong convexity, optimal value, minimizer) and provides the
//! gradient mapping `T_alpha` and reduced gradient `g_alpha`.

mod lipschitz;
mod losses;
mod prox;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use lipschitz::{
    estimate_lipschitz, gram_lipschitz, power_iteration, LIPSCHITZ_SAFETY, POWER_MAX_ITERS,
    POWER_TOL,
};
pub use losses::{DualSvm, LeastSquares, Logistic, ObservedSquares, Quadratic};
pub use prox::{prox_box, prox_l1, prox_nuclear, Penalty};

/// Dense iterate. Matrix-valued problems store `rows x cols` entries in
/// column-major order; the shape lives on the [`Penalty::Nuclear`] variant.
pub type Point = DVector<f64>;

/// Value and gradient oracle for the smooth part `h`.
pub trait SmoothFunction: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Point) -> f64;

    fn gradient(&self, x: &Point) -> Point;

    fn value_and_gradient(&self, x: &Point) -> (f64, Point) {
        (self.value(x), self.gradient(x))
    }

    /// Feeds every parameter that defines the function into `hasher`.
    fn fingerprint(&self, hasher: &mut Sha256);
}

/// Result of one proximal gradient step at a point `y` with curvature `alpha`.
#[derive(Debug, Clone)]
pub struct ProxStep {
    /// `T_alpha(y)`
    pub point: Point,
    /// `g_alpha(y) = alpha (y - T_alpha(y))`
    pub reduced_gradient: Point,
}

#[derive(Clone)]
pub struct CompositeProblem {
    name: String,
    smooth: Arc<dyn SmoothFunction>,
    penalty: Penalty,
    lipschitz: f64,
    mu: Option<f64>,
    f_star: Option<f64>,
    x_star: Option<Point>,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("penalty", &self.penalty)
            .field("lipschitz", &self.lipschitz)
            .field("mu", &self.mu)
            .field("f_star", &self.f_star)
            .field("has_x_star", &self.x_star.is_some())
            .finish()
    }
}

impl CompositeProblem {
    pub fn new(
        name: impl Into<String>,
        smooth: Arc<dyn SmoothFunction>,
        penalty: Penalty,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::invalid(format!(
                "smoothness constant must be positive and finite, got {lipschitz}"
            )));
        }
        penalty.check_dim(smooth.dim())?;
        Ok(Self {
            name: name.into(),
            smooth,
            penalty,
            lipschitz,
            mu: None,
            f_star: None,
            x_star: None,
        })
    }

    /// Records the true strong-convexity constant of `h`.
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= self.lipschitz * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "strong convexity {mu} must lie in (0, L = {}]",
                self.lipschitz
            )));
        }
        self.mu = Some(mu);
        Ok(self)
    }

    pub fn with_f_star(mut self, f_star: f64) -> Result<Self> {
        if !f_star.is_finite() {
            return Err(Error::invalid("optimal value must be finite"));
        }
        self.f_star = Some(f_star);
        self.check_ground_truth()?;
        Ok(self)
    }

    pub fn with_x_star(mut self, x_star: Point) -> Result<Self> {
        if x_star.len() != self.dim() {
            return Err(Error::invalid(format!(
                "minimizer has dimension {}, problem has {}",
                x_star.len(),
                self.dim()
            )));
        }
        self.x_star = Some(x_star);
        self.check_ground_truth()?;
        Ok(self)
    }

    fn check_ground_truth(&self) -> Result<()> {
        if let (Some(f_star), Some(x_star)) = (self.f_star, &self.x_star) {
            let at_opt = self.value(x_star);
            if (at_opt - f_star).abs() > 1e-8 * (1.0 + f_star.abs()) {
                return Err(Error::invalid(format!(
                    "f(x*) = {at_opt} disagrees with f* = {f_star}"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    pub fn x_star(&self) -> Option<&Point> {
        self.x_star.as_ref()
    }

    pub fn smooth(&self) -> &dyn SmoothFunction {
        self.smooth.as_ref()
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    /// `h(x) + psi(x)`, `+inf` outside the domain of `psi`.
    pub fn value(&self, x: &Point) -> f64 {
        let psi = self.penalty.value(x);
        if psi == f64::INFINITY {
            return f64::INFINITY;
        }
        self.smooth.value(x) + psi
    }

    /// `T_alpha(y) = prox_{psi/alpha}(y - grad h(y) / alpha)`.
    pub fn gradient_map(&self, y: &Point, alpha: f64) -> Result<Point> {
        Ok(self.prox_step_with(y, alpha)?.point)
    }

    /// `g_alpha(y) = alpha (y - T_alpha(y))`; equals `grad h(y)` when `psi = 0`.
    pub fn reduced_gradient(&self, y: &Point, alpha: f64) -> Result<Point> {
        Ok(self.prox_step_with(y, alpha)?.reduced_gradient)
    }

    /// Gradient mapping and reduced gradient at curvature `L`.
    pub fn prox_step(&self, y: &Point) -> Result<ProxStep> {
        self.prox_step_with(y, self.lipschitz)
    }

    pub fn prox_step_with(&self, y: &Point, alpha: f64) -> Result<ProxStep> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "curvature must be positive, got {alpha}"
            )));
        }
        let grad = self.smooth.gradient(y);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "gradient",
                iteration: None,
            });
        }
        if self.penalty == Penalty::Zero {
            let point = y - &grad / alpha;
            return Ok(ProxStep {
                point,
                reduced_gradient: grad,
            });
        }
        let forward = y - &grad / alpha;
        let point = self.penalty.prox(&forward, alpha)?;
        let reduced_gradient = (y - &point) * alpha;
        Ok(ProxStep {
            point,
            reduced_gradient,
        })
    }

    /// SHA-256 over the smooth oracle, penalty and smoothness constant.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name.as_bytes());
        hasher.update((self.dim() as u64).to_le_bytes());
        hasher.update(self.lipschitz.to_le_bytes());
        self.penalty.fingerprint(&mut hasher);
        self.smooth.fingerprint(&mut hasher);
        hex::encode(hasher.finalize())
    }
}

pub(crate) fn hash_slice(hasher: &mut Sha256, values: &[f64]) {
    hasher.update((values.len() as u64).to_le_bytes());
    for v in values {
        hasher.update(v.to_le_bytes());
    }
}
