//! Online strong-convexity estimation from a known optimal value.
//!
//! The raw estimate at a point `y` is `||g_L(y)||^2 / (2 (f(y) - f*))`, the
//! strong-convexity constant that would make the Polyak-type inequality
//! `f(y) - f* <= ||g||^2 / (2 mu)` tight. Solvers feed raw estimates through
//! [`MuEstimatorState`], which keeps the running minimum capped at `mu0`.

use crate::error::{Error, Result};
use crate::problems::{CompositeProblem, Point};

/// Relative size of the gap below which the estimate is not computed.
pub const DEGENERACY_SCALE: f64 = 1e-14;

/// `1e-14 (1 + |f*|)`: gaps at or below this are treated as converged.
pub fn degeneracy_threshold(f_star: f64) -> f64 {
    DEGENERACY_SCALE * (1.0 + f_star.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    Value(f64),
    /// The iterate is already at reference precision.
    Converged,
}

impl Estimate {
    pub fn value(self) -> Option<f64> {
        match self {
            Estimate::Value(v) => Some(v),
            Estimate::Converged => None,
        }
    }
}

/// Raw estimate from a precomputed gap `f(y) - f*` and `||g_L(y)||^2`.
pub fn hat_mu_from_parts(gap: f64, grad_map_norm_sq: f64, f_star: f64) -> Estimate {
    if gap <= degeneracy_threshold(f_star) || grad_map_norm_sq == 0.0 {
        return Estimate::Converged;
    }
    Estimate::Value(grad_map_norm_sq / (2.0 * gap))
}

/// `||g_L(y)||^2 / (2 (f(y) - f*))` using the problem's smoothness constant.
pub fn hat_mu(problem: &CompositeProblem, y: &Point, f_star: f64) -> Result<Estimate> {
    let step = problem.prox_step(y)?;
    let gap = problem.value(y) - f_star;
    if !gap.is_finite() {
        return Err(Error::NonFinite {
            quantity: "objective",
            iteration: None,
        });
    }
    Ok(hat_mu_from_parts(
        gap,
        step.reduced_gradient.norm_squared(),
        f_star,
    ))
}

/// Local strong convexity along the segment to the minimizer:
///
/// `2 (f* - f(T_L(x)) - g_L(x)^T (x* - x) - ||g_L(x)||^2 / (2L)) / ||x - x*||^2`.
pub fn mu_local(
    problem: &CompositeProblem,
    x: &Point,
    x_star: &Point,
    f_star: f64,
) -> Result<Estimate> {
    let diff = x_star - x;
    let dist_sq = diff.norm_squared();
    if dist_sq <= degeneracy_threshold(f_star) {
        return Ok(Estimate::Converged);
    }
    let step = problem.prox_step(x)?;
    let g = &step.reduced_gradient;
    let numerator = f_star
        - problem.value(&step.point)
        - g.dot(&diff)
        - g.norm_squared() / (2.0 * problem.lipschitz());
    Ok(Estimate::Value(2.0 * numerator / dist_sq))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSample {
    pub index: usize,
    pub raw: f64,
    pub running: f64,
}

/// Running minimum of raw estimates, started at `mu0`.
#[derive(Debug, Clone)]
pub struct MuEstimatorState {
    mu0: f64,
    current_min: f64,
    history: Vec<MuSample>,
}

impl MuEstimatorState {
    pub fn new(mu0: f64) -> Result<Self> {
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(Error::invalid(format!("mu0 must be positive, got {mu0}")));
        }
        Ok(Self {
            mu0,
            current_min: mu0,
            history: Vec::new(),
        })
    }

    /// Folds a raw estimate into the running minimum and returns it.
    pub fn update(&mut self, raw: f64) -> Result<f64> {
        if !(raw > 0.0) {
            return Err(Error::invalid(format!(
                "raw estimate must be positive, got {raw}"
            )));
        }
        self.current_min = self.current_min.min(raw);
        self.history.push(MuSample {
            index: self.history.len(),
            raw,
            running: self.current_min,
        });
        Ok(self.current_min)
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn current(&self) -> f64 {
        self.current_min
    }

    pub fn history(&self) -> &[MuSample] {
        &self.history
    }
}
