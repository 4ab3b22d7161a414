use super::{
    Eval, IterationRecord, MomentumRule, RestartEvent, Run, SolverConfig, StopReason, Trace,
};
use crate::error::{Error, Result};
use crate::estimators::{hat_mu_from_parts, Estimate, MuEstimatorState};
use crate::problems::{CompositeProblem, Point};

/// `(1 - sqrt(mu / L)) / (1 + sqrt(mu / L))`
pub fn momentum_from_mu(mu: f64, lipschitz: f64) -> f64 {
    let s = (mu / lipschitz).sqrt();
    (1.0 - s) / (1.0 + s)
}

pub fn next_t(t: f64, rule: MomentumRule) -> f64 {
    match rule {
        MomentumRule::AsListed => (1.0 + (1.0 + t * t).sqrt()) / 2.0,
        MomentumRule::Classical => (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0,
    }
}

enum Step {
    Extrapolate(f64),
    Stop(StopReason),
}

/// Two-sequence scheme `x_{k+1} = y_k + beta_k (y_k - y_{k-1})`,
/// `y_{k+1} = T_L(x_{k+1})`, with `y_{-1} = y_0 = x0`. `beta` fills the
/// solver-specific record fields and returns the momentum for step `k`.
fn extrapolated_loop<F>(mut run: Run<'_>, x0: &Point, mut beta: F) -> Result<Trace>
where
    F: FnMut(usize, &Eval, &mut IterationRecord) -> Result<Step>,
{
    let mut y = x0.clone();
    let mut y_prev = x0.clone();
    let mut cached = Some(run.f0());
    if let Some(log) = run.log_mut() {
        log.x.push(x0.clone());
    }
    for k in 0.. {
        let eval = run.evaluate(k, &y, cached.take())?;
        let mut rec = run.record(k, &eval);
        let control = beta(k, &eval, &mut rec)?;
        run.push(rec);
        if let Some(log) = run.log_mut() {
            log.y.push(y.clone());
        }
        let b = match control {
            Step::Stop(reason) => return Ok(run.finish(y, reason, Vec::new())),
            Step::Extrapolate(b) => b,
        };
        if let Some(reason) = run.stop_after(k, &eval) {
            return Ok(run.finish(y, reason, Vec::new()));
        }
        let x = if b == 0.0 {
            y.clone()
        } else {
            &y + (&y - &y_prev) * b
        };
        let next = if b == 0.0 {
            eval.step.point
        } else {
            run.problem()
                .prox_step(&x)
                .map_err(|e| e.at_iteration(k))?
                .point
        };
        if let Some(log) = run.log_mut() {
            log.x.push(x);
        }
        y_prev = std::mem::replace(&mut y, next);
    }
    unreachable!()
}

/// Proximal gradient descent `y_{k+1} = T_L(y_k)`.
pub fn pgd(problem: &CompositeProblem, x0: &Point, config: &SolverConfig) -> Result<Trace> {
    let run = Run::new("pgd", problem, config, problem.f_star(), x0)?;
    extrapolated_loop(run, x0, |_, _, _| Ok(Step::Extrapolate(0.0)))
}

/// Accelerated proximal gradient with a known strong-convexity constant.
pub fn apg_known_mu(
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
    let beta = momentum_from_mu(mu, l);
    let run = Run::new("apg-mu", problem, config, problem.f_star(), x0)?;
    extrapolated_loop(run, x0, |_, _, rec| {
        rec.mu_k = Some(mu);
        Ok(Step::Extrapolate(beta))
    })
}

/// FISTA-style momentum `beta_k = (t_k - 1) / t_{k+1}`, `t_0 = 1`.
pub fn fista(problem: &CompositeProblem, x0: &Point, config: &SolverConfig) -> Result<Trace> {
    let rule = config.momentum_rule;
    let run = Run::new("fista", problem, config, problem.f_star(), x0)?;
    let mut t = 1.0;
    extrapolated_loop(run, x0, |_, _, _| {
        let t_next = next_t(t, rule);
        let beta = (t - 1.0) / t_next;
        t = t_next;
        Ok(Step::Extrapolate(beta))
    })
}

/// Momentum recomputed each step from the running-min estimate
/// `mu_k = min(mu0, min_i ||g_L(y_i)||^2 / (2 (f(y_i) - f*)))`.
pub fn adapt_apg_v2(
    problem: &CompositeProblem,
    x0: &Point,
    f_star: f64,
    config: &SolverConfig,
) -> Result<Trace> {
    let l = problem.lipschitz();
    let mut estimator = MuEstimatorState::new(config.mu0.unwrap_or(l / 2.0))?;
    let run = Run::new("adapt-apg-v2", problem, config, Some(f_star), x0)?;
    extrapolated_loop(run, x0, |_, eval, rec| {
        let gap = eval.f - f_star;
        match hat_mu_from_parts(gap, eval.gmap_norm_sq, f_star) {
            Estimate::Converged => Ok(Step::Stop(StopReason::Converged)),
            Estimate::Value(raw) => {
                let mu = estimator.update(raw)?;
                rec.mu_hat = Some(raw);
                rec.mu_k = Some(mu);
                Ok(Step::Extrapolate(momentum_from_mu(mu.min(l), l)))
            }
        }
    })
}

/// FISTA with restarts on a geometrically shrinking gap threshold:
/// whenever `f(y_{k+1}) - f* <= eps`, reset `t <- 1`, drop the momentum and
/// set `eps <- exp(-gamma) eps`.
pub fn apg_restart(
    problem: &CompositeProblem,
    x0: &Point,
    f_star: f64,
    gamma: f64,
    config: &SolverConfig,
) -> Result<Trace> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let decay = (-gamma).exp();
    let rule = config.momentum_rule;
    let mut run = Run::new("restart", problem, config, Some(f_star), x0)?;
    let mut epsilon = run.f0() - f_star;
    let mut restarts = Vec::new();
    let mut t = 1.0;
    let mut y = x0.clone();
    let mut y_prev = x0.clone();
    let mut cached = Some(run.f0());
    let mut restarted = false;
    if let Some(log) = run.log_mut() {
        log.x.push(x0.clone());
    }
    for k in 0.. {
        let eval = run.evaluate(k, &y, cached.take())?;
        let mut rec = run.record(k, &eval);
        rec.restarted = restarted;
        run.push(rec);
        if let Some(log) = run.log_mut() {
            log.y.push(y.clone());
        }
        if let Some(reason) = run.stop_after(k, &eval) {
            return Ok(run.finish(y, reason, restarts));
        }
        let t_next = next_t(t, rule);
        let beta = (t - 1.0) / t_next;
        let x = &y + (&y - &y_prev) * beta;
        let next = run
            .problem()
            .prox_step(&x)
            .map_err(|e| e.at_iteration(k))?
            .point;
        let f_next = run.objective(k + 1, &next)?;
        let gap_next = f_next - f_star;
        if let Some(log) = run.log_mut() {
            log.x.push(x);
        }
        restarted = gap_next <= epsilon;
        if restarted {
            restarts.push(RestartEvent {
                k: k + 1,
                epsilon,
                gap: gap_next,
            });
            t = 1.0;
            epsilon *= decay;
            y_prev = next.clone();
        } else {
            t = t_next;
            y_prev = y;
        }
        y = next;
        cached = Some(f_next);
    }
    unreachable!()
}
