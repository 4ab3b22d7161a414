//! Accelerated gradient in estimate-sequence form.
//!
//! The lower model `phi_k(x) = m_k(x) + (a_0 mu_0 / 2) ||x - x0||^2` is a
//! quadratic with identity Hessian scaled by `S_k = sum_i a_i mu_i`, so it is
//! stored as `phi_k(x) = phi_k* + (S_k / 2) ||x - v_k||^2`. Each step adds
//! `a_{k+1} (l_L(x, x_{k+1}) + (mu_{k+1} / 2) ||x - x_{k+1}||^2)` where
//! `l_L(x, z) = f(T_L(z)) + g_L(z)^T (x - z) + ||g_L(z)||^2 / (2L)`.
//!
//! Model values are kept as excesses over `A_k f_ref` (`f_ref = f*` when
//! known) so the certified inequalities can be evaluated on gap-sized numbers.
//! Weights are homogeneous in the update, so they are renormalised when they
//! grow large; `weight_scale` carries the factor.

use super::{MuInput, Run, SolverConfig, StopReason, Trace};
use crate::error::{Error, Result};
use crate::estimators::{hat_mu_from_parts, Estimate, MuEstimatorState};
use crate::problems::{CompositeProblem, Point};

/// Upper clamp on `kappa_k = mu_{k+1} / L` so that `1 - sqrt(kappa)` stays positive.
pub const KAPPA_CEILING: f64 = 1.0 - 1e-9;

const RESCALE_ABOVE: f64 = 1e150;

#[derive(Debug, Clone)]
pub struct EstimateSequenceState {
    total_weight: f64,
    last_weight: f64,
    curvature: f64,
    center: Point,
    reference: f64,
    phi_excess: f64,
    x_star: Option<Point>,
    model_excess_at_opt: Option<f64>,
    log_scale: f64,
}

impl EstimateSequenceState {
    /// `A_0 = a_0 = 1`, `v_0 = x0`, `S_0 = a_0 mu0`, `m_0 = a_0 f_ref`.
    pub fn new(x0: &Point, mu0: f64, reference: f64, x_star: Option<Point>) -> Result<Self> {
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(Error::invalid(format!("mu0 must be positive, got {mu0}")));
        }
        Ok(Self {
            total_weight: 1.0,
            last_weight: 1.0,
            curvature: mu0,
            center: x0.clone(),
            reference,
            phi_excess: 0.0,
            model_excess_at_opt: x_star.as_ref().map(|_| 0.0),
            x_star,
            log_scale: 0.0,
        })
    }

    /// Common factor dividing every stored weight.
    pub fn weight_scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn unscale(&self, v: f64) -> f64 {
        if self.log_scale == 0.0 {
            v
        } else {
            v * self.weight_scale()
        }
    }

    /// `A_k`
    pub fn total_weight(&self) -> f64 {
        self.unscale(self.total_weight)
    }

    /// `a_k`
    pub fn last_weight(&self) -> f64 {
        self.unscale(self.last_weight)
    }

    /// `S_k = a_0 mu_0 + sum_{i>=1} a_i mu_i`
    pub fn curvature(&self) -> f64 {
        self.unscale(self.curvature)
    }

    /// `v_k = argmin phi_k`
    pub fn center(&self) -> &Point {
        &self.center
    }

    /// `min phi_k - A_k f_ref`
    pub fn phi_excess(&self) -> f64 {
        self.unscale(self.phi_excess)
    }

    /// `min phi_k`
    pub fn phi_star(&self) -> f64 {
        self.phi_excess() + self.total_weight() * self.reference
    }

    /// `m_k(x*) - A_k f_ref`
    pub fn model_excess_at_opt(&self) -> Option<f64> {
        self.model_excess_at_opt.map(|m| self.unscale(m))
    }

    /// `m_k(x*)`
    pub fn model_at_opt(&self) -> Option<f64> {
        self.model_excess_at_opt()
            .map(|m| m + self.total_weight() * self.reference)
    }

    fn renormalise(&mut self) {
        if self.total_weight > RESCALE_ABOVE {
            let f = self.total_weight;
            self.total_weight = 1.0;
            self.last_weight /= f;
            self.curvature /= f;
            self.phi_excess /= f;
            if let Some(m) = self.model_excess_at_opt.as_mut() {
                *m /= f;
            }
            self.log_scale += f.ln();
        }
    }
}

/// Adds `a_next (l(x) + (mu_next / 2) ||x - x_next||^2)` to the model, where
/// `l(x) = model_const + g^T (x - x_next)`. `a_next` is in the state's
/// current weight scale.
pub fn es_update(
    state: &EstimateSequenceState,
    a_next: f64,
    mu_next: f64,
    x_next: &Point,
    g: &Point,
    model_const: f64,
) -> Result<EstimateSequenceState> {
    if !(a_next > 0.0 && a_next.is_finite()) {
        return Err(Error::invalid(format!(
            "weight increment must be positive, got {a_next}"
        )));
    }
    if !(mu_next > 0.0) {
        return Err(Error::invalid(format!(
            "mu must be positive, got {mu_next}"
        )));
    }
    let s = state.curvature;
    let added = a_next * mu_next;
    let s_next = s + added;
    let center = (&state.center * s + x_next * added - g * a_next) / s_next;

    let offset = model_const - state.reference;
    let to_new = &center - x_next;
    let phi_excess = state.phi_excess
        + a_next * offset
        + 0.5 * s * (&center - &state.center).norm_squared()
        + 0.5 * added * to_new.norm_squared()
        + a_next * g.dot(&to_new);

    let model_excess_at_opt = match (&state.x_star, state.model_excess_at_opt) {
        (Some(xs), Some(m)) => {
            let d = xs - x_next;
            Some(m + a_next * (offset + g.dot(&d) + 0.5 * mu_next * d.norm_squared()))
        }
        _ => None,
    };

    let mut next = EstimateSequenceState {
        total_weight: state.total_weight + a_next,
        last_weight: a_next,
        curvature: s_next,
        center,
        reference: state.reference,
        phi_excess,
        x_star: state.x_star.clone(),
        model_excess_at_opt,
        log_scale: state.log_scale,
    };
    next.renormalise();
    Ok(next)
}

enum MuSchedule {
    Constant(f64),
    Sequence(std::sync::Arc<[f64]>),
    Online(MuEstimatorState),
}

fn es_loop(
    name: &'static str,
    problem: &CompositeProblem,
    x0: &Point,
    config: &SolverConfig,
    mut schedule: MuSchedule,
) -> Result<Trace> {
    let l = problem.lipschitz();
    let mu_cap = KAPPA_CEILING * l;
    let f_star = problem.f_star();
    if matches!(schedule, MuSchedule::Online(_)) && f_star.is_none() {
        return Err(Error::Precondition("online estimation requires f*".into()));
    }
    let mu0 = match &schedule {
        MuSchedule::Constant(mu) => *mu,
        MuSchedule::Sequence(values) => values[0],
        MuSchedule::Online(est) => est.mu0(),
    };
    let mut mu_prev = mu0.min(mu_cap);
    let mut state = EstimateSequenceState::new(
        x0,
        mu_prev,
        f_star.unwrap_or(0.0),
        problem.x_star().cloned(),
    )?;
    let mut run = Run::new(name, problem, config, f_star, x0)?;
    if let Some(log) = run.log_mut() {
        log.x.push(x0.clone());
        log.weights.push(1.0);
        log.mu.push(mu_prev);
        log.phi_excess.push(state.phi_excess());
        if let Some(m) = state.model_excess_at_opt() {
            log.model_excess_at_opt.push(m);
        }
    }

    let mut y = x0.clone();
    let mut cached = Some(run.f0());
    for k in 0.. {
        let eval = run.evaluate(k, &y, cached.take())?;
        let mut rec = run.record(k, &eval);
        rec.a_total = Some(state.total_weight());

        let mu_next = match &mut schedule {
            MuSchedule::Constant(mu) => Some(*mu),
            MuSchedule::Sequence(values) => {
                let idx = (k + 1).min(values.len() - 1);
                Some(values[idx].min(mu_prev))
            }
            MuSchedule::Online(est) => {
                let fs = f_star.expect("checked above");
                match hat_mu_from_parts(eval.f - fs, eval.gmap_norm_sq, fs) {
                    Estimate::Converged => None,
                    Estimate::Value(raw) => {
                        rec.mu_hat = Some(raw);
                        Some(est.update(raw)?.min(mu_prev))
                    }
                }
            }
        };
        let Some(mu_next) = mu_next.map(|m| m.min(mu_cap)) else {
            run.push(rec);
            if let Some(log) = run.log_mut() {
                log.y.push(y.clone());
            }
            return Ok(run.finish(y, StopReason::Converged, Vec::new()));
        };
        rec.mu_k = Some(mu_next);
        run.push(rec);
        if let Some(log) = run.log_mut() {
            log.y.push(y.clone());
        }
        if let Some(reason) = run.stop_after(k, &eval) {
            return Ok(run.finish(y, reason, Vec::new()));
        }

        let root = (mu_next / l).sqrt();
        let a_next = root / (1.0 - root) * state.total_weight;
        let tau = a_next / (state.total_weight + a_next);
        let x_next = (state.center() * tau + &y) / (1.0 + tau);
        let step = problem
            .prox_step(&x_next)
            .map_err(|e| e.at_iteration(k + 1))?;
        let f_next = run.objective(k + 1, &step.point)?;
        let g = &step.reduced_gradient;
        let model_const = f_next + g.norm_squared() / (2.0 * l);
        state = es_update(&state, a_next, mu_next, &x_next, g, model_const)?;
        if !state.total_weight().is_finite() && !state.total_weight.is_finite() {
            return Err(Error::Numerical(
                "estimate-sequence weights overflowed".into(),
            ));
        }
        if let Some(log) = run.log_mut() {
            log.x.push(x_next);
            log.weights.push(state.last_weight());
            log.mu.push(mu_next);
            log.phi_excess.push(state.phi_excess());
            if let Some(m) = state.model_excess_at_opt() {
                log.model_excess_at_opt.push(m);
            }
        }
        mu_prev = mu_next;
        y = step.point;
        cached = Some(f_next);
    }
    unreachable!()
}

/// Estimate-sequence form of APG with a fixed strong-convexity constant.
/// Produces the same `y_k` as [`super::apg_known_mu`] up to rounding.
pub fn apg_estimate_sequence(
    problem: &CompositeProblem,
    x0: &Point,
    mu: f64,
    config: &SolverConfig,
) -> Result<Trace> {
    let l = problem.lipschitz();
    if !(mu > 0.0 && mu <= l) {
        return Err(Error::invalid(format!(
            "mu = {mu} must lie in (0, L = {l}]"
        )));
    }
    es_loop("apg-es", problem, x0, config, MuSchedule::Constant(mu))
}

/// Estimate-sequence APG driven by a non-increasing sequence `mu_k`, either
/// supplied ([`MuInput::Sequence`], [`MuInput::Known`]) or estimated online
/// ([`MuInput::Online`], requires `f*`). The sequence actually used is the
/// running minimum of the supplied values.
pub fn adapt_apg(problem: &CompositeProblem, x0: &Point, config: &SolverConfig) -> Result<Trace> {
    let schedule = match &config.mu_input {
        MuInput::Known(mu) => {
            if !(*mu > 0.0) {
                return Err(Error::invalid(format!("mu must be positive, got {mu}")));
            }
            MuSchedule::Constant(*mu)
        }
        MuInput::Sequence(values) => {
            if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::invalid("mu sequence must be non-empty and positive"));
            }
            MuSchedule::Sequence(values.clone())
        }
        MuInput::Online => {
            let mu0 = config.mu0.unwrap_or(problem.lipschitz() / 2.0);
            MuSchedule::Online(MuEstimatorState::new(mu0)?)
        }
        MuInput::None => {
            return Err(Error::invalid(
                "adapt_apg needs a mu sequence or the online estimator",
            ))
        }
    };
    es_loop("adapt-apg", problem, x0, config, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Penalty, Quadratic};
    use crate::rng;
    use nalgebra::{DMatrix, DVector};
    use std::sync::Arc;

    #[test]
    fn update_of_unit_model() {
        let s = EstimateSequenceState::new(&Point::zeros(3), 1.0, 0.0, None).unwrap();
        let e1 = Point::from_vec(vec![1.0, 0.0, 0.0]);
        let next = es_update(&s, 1.0, 1.0, &e1, &Point::zeros(3), 0.0).unwrap();
        assert_eq!(next.center(), &(e1 / 2.0));
        assert_eq!(next.curvature(), 2.0);
        assert_eq!(next.total_weight(), 2.0);
    }

    #[test]
    fn update_at_center_with_zero_slope_keeps_center() {
        let v = Point::from_vec(vec![0.3, -1.2]);
        let s = EstimateSequenceState::new(&v, 0.7, 0.0, None).unwrap();
        let next = es_update(&s, 2.5, 0.4, &v, &Point::zeros(2), 1.0).unwrap();
        assert!((next.center() - &v).norm() < 1e-15);
    }

    #[test]
    fn update_rejects_nonpositive_inputs() {
        let s = EstimateSequenceState::new(&Point::zeros(2), 1.0, 0.0, None).unwrap();
        let z = Point::zeros(2);
        assert!(es_update(&s, 0.0, 1.0, &z, &z, 0.0).is_err());
        assert!(es_update(&s, 1.0, 0.0, &z, &z, 0.0).is_err());
    }

    /// Builds the model term by term as an explicit quadratic
    /// `x^T H x / 2 + b^T x + c` and minimises it with a dense solve.
    #[test]
    fn update_matches_explicit_model_accumulation() {
        let n = 4;
        let mut r = rng::seeded(21);
        let x0 = rng::gaussian_vector(&mut r, n);
        let x_star = rng::gaussian_vector(&mut r, n);
        let (mu0, f_ref) = (0.8, 0.37);
        let mut state = EstimateSequenceState::new(&x0, mu0, f_ref, Some(x_star.clone())).unwrap();

        // phi_0 = f_ref + (mu0 / 2) ||x - x0||^2 ; m_0 = f_ref
        let mut h = DMatrix::identity(n, n) * mu0;
        let mut b = -&x0 * mu0;
        let mut c = f_ref + 0.5 * mu0 * x0.norm_squared();
        let mut m_at_opt = f_ref;

        for _ in 0..6 {
            let a = 0.2 + rng::gaussian(&mut r).abs();
            let mu = 0.1 + rng::gaussian(&mut r).abs();
            let xk = rng::gaussian_vector(&mut r, n);
            let g = rng::gaussian_vector(&mut r, n);
            let k = rng::gaussian(&mut r);
            state = es_update(&state, a, mu, &xk, &g, k).unwrap();

            // a (k + g^T (x - xk) + (mu / 2) ||x - xk||^2)
            h += DMatrix::identity(n, n) * (a * mu);
            b += &g * a - &xk * (a * mu);
            c += a * (k - g.dot(&xk) + 0.5 * mu * xk.norm_squared());
            let d = &x_star - &xk;
            m_at_opt += a * (k + g.dot(&d) + 0.5 * mu * d.norm_squared());

            let argmin = h.clone().lu().solve(&(-&b)).unwrap();
            let min_value = 0.5 * argmin.dot(&(&h * &argmin)) + b.dot(&argmin) + c;
            assert!((state.center() - &argmin).norm() < 1e-10);
            assert!((state.phi_star() - min_value).abs() < 1e-9 * (1.0 + min_value.abs()));
            assert!(
                (state.model_at_opt().unwrap() - m_at_opt).abs() < 1e-9 * (1.0 + m_at_opt.abs())
            );
        }
    }

    #[test]
    fn renormalisation_preserves_the_model() {
        let mut state = EstimateSequenceState::new(&Point::zeros(2), 1.0, 0.0, None).unwrap();
        let x = Point::from_vec(vec![1.0, 0.5]);
        let g = Point::from_vec(vec![0.1, -0.2]);
        for _ in 0..5 {
            let a = state.total_weight * 1e40;
            state = es_update(&state, a, 0.5, &x, &g, 0.25).unwrap();
        }
        assert!(state.log_scale > 0.0);
        assert!(state.total_weight <= RESCALE_ABOVE);
        assert!(state.total_weight() > 1e199);
        // the minimiser approaches the last anchor point shifted by the slope
        let target = &x - &g / 0.5;
        assert!((state.center() - &target).norm() < 1e-12);
    }

    fn diag_problem(diag: &[f64], x_star: &Point) -> CompositeProblem {
        let l = diag.iter().cloned().fold(0.0, f64::max);
        let mu = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let q = Quadratic::diagonal(DVector::from_row_slice(diag), x_star.clone(), 0.0);
        CompositeProblem::new("diag", Arc::new(q), Penalty::Zero, l)
            .unwrap()
            .with_mu(mu)
            .unwrap()
            .with_f_star(0.0)
            .unwrap()
            .with_x_star(x_star.clone())
            .unwrap()
    }

    #[test]
    fn first_coefficients_for_quarter_kappa() {
        let p = diag_problem(&[1.0, 4.0], &Point::zeros(2));
        let cfg = SolverConfig::default().with_max_iters(1).keeping_iterates();
        let t = apg_estimate_sequence(&p, &Point::from_vec(vec![1.0, 1.0]), 1.0, &cfg).unwrap();
        let log = t.iterates.unwrap();
        assert_eq!(log.weights[1], 1.0);
        assert_eq!(t.records[1].a_total, Some(2.0));
        // tau_0 = a_1 / A_1 = 0.5
        assert_eq!(log.weights[1] / t.records[1].a_total.unwrap(), 0.5);
    }

    #[test]
    fn constant_kappa_gives_geometric_weights() {
        let p = diag_problem(&[1.0, 3.0, 100.0], &Point::from_vec(vec![1.0, -1.0, 0.5]));
        let cfg = SolverConfig::default().with_max_iters(200);
        let t = apg_estimate_sequence(&p, &Point::zeros(3), 1.0, &cfg).unwrap();
        for r in &t.records {
            let expected = 0.9f64.powi(-(r.k as i32));
            assert!((r.a_total.unwrap() / expected - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_sequence_reproduces_fixed_mu_run() {
        let xs = Point::from_vec(vec![1.0, -1.0, 0.5]);
        let p = diag_problem(&[1.0, 3.0, 100.0], &xs);
        let x0 = Point::zeros(3);
        let cfg = SolverConfig::default().with_max_iters(50);
        let fixed = apg_estimate_sequence(&p, &x0, 1.0, &cfg).unwrap();
        let seq = adapt_apg(
            &p,
            &x0,
            &cfg.clone()
                .with_mu_input(MuInput::Sequence(vec![1.0].into())),
        )
        .unwrap();
        assert_eq!(fixed.records.len(), seq.records.len());
        for (a, b) in fixed.records.iter().zip(&seq.records) {
            assert_eq!(a.f_y, b.f_y);
            assert_eq!(a.a_total, b.a_total);
        }
    }

    #[test]
    fn online_mode_requires_f_star() {
        let q = Quadratic::diagonal(DVector::from_element(2, 1.0), Point::zeros(2), 0.0);
        let p = CompositeProblem::new("q", Arc::new(q), Penalty::Zero, 1.0).unwrap();
        let cfg = SolverConfig::default().with_mu_input(MuInput::Online);
        assert!(matches!(
            adapt_apg(&p, &Point::zeros(2), &cfg),
            Err(Error::Precondition(_))
        ));
        assert!(adapt_apg(&p, &Point::zeros(2), &SolverConfig::default()).is_err());
    }

    #[test]
    fn used_sequence_is_running_min() {
        let p = diag_problem(&[1.0, 10.0], &Point::zeros(2));
        let seq: Arc<[f64]> = vec![5.0, 2.0, 3.0, 1.5, 4.0, 1.2].into();
        let cfg = SolverConfig::default()
            .with_max_iters(8)
            .keeping_iterates()
            .with_mu_input(MuInput::Sequence(seq));
        let t = adapt_apg(&p, &Point::from_vec(vec![1.0, 1.0]), &cfg).unwrap();
        let used = t.iterates.unwrap().mu;
        assert_eq!(&used[..7], &[5.0, 2.0, 2.0, 1.5, 1.5, 1.2, 1.2]);
    }
}
