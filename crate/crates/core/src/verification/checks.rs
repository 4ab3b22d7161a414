use super::{invariant_slack, slack, CheckReport, SpectralQuadratic};
use crate::error::{Error, Result};
use crate::estimators::{hat_mu_from_parts, Estimate};
use crate::problems::{CompositeProblem, Penalty, Point};
use crate::solvers::{IterateLog, Trace};
use crate::verification::gd_estimator_bound_rhs;

const EPS: f64 = f64::EPSILON;

struct Truth<'a> {
    mu: f64,
    f_star: f64,
    x_star: &'a Point,
}

fn truth<'a>(problem: &'a CompositeProblem, check: &str) -> Result<Truth<'a>> {
    let missing = |what: &str| Error::Precondition(format!("{check} needs the exact {what}"));
    Ok(Truth {
        mu: problem.mu().ok_or_else(|| missing("strong convexity"))?,
        f_star: problem.f_star().ok_or_else(|| missing("optimal value"))?,
        x_star: problem.x_star().ok_or_else(|| missing("minimizer"))?,
    })
}

fn f_star_of(problem: &CompositeProblem, check: &str) -> Result<f64> {
    problem
        .f_star()
        .ok_or_else(|| Error::Precondition(format!("{check} needs the exact optimal value")))
}

/// Iterate log with model weights, checked to cover every record.
fn weighted_log<'a>(trace: &'a Trace, check: &str) -> Result<&'a IterateLog> {
    let log = trace.iterates.as_ref().ok_or_else(|| {
        Error::Precondition(format!("{check} needs a trace with recorded iterates"))
    })?;
    let n = trace.records.len();
    if log.weights.len() < n || log.mu.len() < n || log.x.len() < n {
        return Err(Error::Precondition(format!(
            "{check} needs x-iterates, weights and mu values for every iteration"
        )));
    }
    if trace.records.iter().enumerate().any(|(i, r)| r.k != i) {
        return Err(Error::Precondition(format!(
            "{check} needs an unthinned trace"
        )));
    }
    Ok(log)
}

fn a_total(trace: &Trace, k: usize, check: &str) -> Result<f64> {
    trace.records[k]
        .a_total
        .ok_or_else(|| Error::Precondition(format!("{check} needs the weights A_k in the trace")))
}

/// `f(y_k) - f* <= (f(x0) - f* + (mu/2)||x0 - x*||^2) (1 - sqrt(mu/L))^k`
/// for a run with the exact strong-convexity constant.
pub fn check_known_mu_rate(
    trace: &Trace,
    problem: &CompositeProblem,
    x0: &Point,
) -> Result<CheckReport> {
    let t = truth(problem, "known-mu-rate")?;
    let q = 1.0 - (t.mu / problem.lipschitz()).sqrt();
    let start = problem.value(x0) - t.f_star + 0.5 * t.mu * (x0 - t.x_star).norm_squared();
    let s = slack(t.f_star);
    let mut report = CheckReport::new();
    for r in &trace.records {
        let rhs = start * q.powi(r.k as i32);
        report.push_le("known-mu-rate", r.k, r.f_y - t.f_star, rhs, s);
    }
    Ok(report)
}

/// For a run driven by a non-increasing sequence `mu_i >= mu`:
///
/// `f(y_k) - f* <= (f(x0) - f* + (a_0 mu/2)||x0 - x*||^2) / A_k
///                 + sum_{i<=k} a_i (mu_i - mu) ||x_i - x*||^2 / (2 A_k)`
///
/// and `A_k = prod_{i=1..k} (1 - sqrt(mu_i/L))^-1` to `1e-10` relative.
pub fn check_adaptive_rate(trace: &Trace, problem: &CompositeProblem) -> Result<CheckReport> {
    let t = truth(problem, "adaptive-rate")?;
    let log = weighted_log(trace, "adaptive-rate")?;
    let l = problem.lipschitz();
    let x0 = &log.x[0];
    let base =
        problem.value(x0) - t.f_star + 0.5 * log.weights[0] * t.mu * (x0 - t.x_star).norm_squared();
    let s = slack(t.f_star);
    let mut report = CheckReport::new();
    let mut err = 0.0;
    let mut product = 1.0;
    for (k, r) in trace.records.iter().enumerate() {
        err += log.weights[k] * (log.mu[k] - t.mu) * (&log.x[k] - t.x_star).norm_squared();
        if k > 0 {
            product /= 1.0 - (log.mu[k] / l).sqrt();
        }
        let a = a_total(trace, k, "adaptive-rate")?;
        report.push_le(
            "adaptive-rate",
            k,
            r.f_y - t.f_star,
            (base + 0.5 * err) / a,
            s,
        );
        report.push_le("weight-product", k, (a / product - 1.0).abs(), 1e-10, 0.0);
    }
    Ok(report)
}

/// Estimate-sequence invariants with the model kept in excess form:
///
/// * upper: `A_k (f(y_k) - f*) <= f(x0) - f* + min phi_k - A_k f*`
/// * lower (needs `x*`, `mu`): `m_k(x*) - A_k f* <= sum_{i=1..k} a_i (mu_i - mu) ||x_i - x*||^2 / 2`
///
/// Both are checked after dividing by `A_k`, with slack `1e-8 (1 + |f*|)`.
pub fn check_model_invariants(trace: &Trace, problem: &CompositeProblem) -> Result<CheckReport> {
    let f_star = f_star_of(problem, "model-invariants")?;
    let log = weighted_log(trace, "model-invariants")?;
    let n = trace.records.len();
    if log.phi_excess.len() < n {
        return Err(Error::Precondition(
            "model-invariants needs the model minima".into(),
        ));
    }
    let f0 = problem.value(&log.x[0]);
    let s = invariant_slack(f_star);
    let mut report = CheckReport::new();
    let lower = match (problem.x_star(), problem.mu()) {
        (Some(xs), Some(mu)) if log.model_excess_at_opt.len() >= n => Some((xs, mu)),
        _ => {
            report.skip("model-lower: needs x*, mu and the model value at x*");
            None
        }
    };
    let mut err = 0.0;
    for (k, r) in trace.records.iter().enumerate() {
        let a = a_total(trace, k, "model-invariants")?;
        report.push_le(
            "model-upper",
            k,
            r.f_y - f_star,
            (f0 - f_star + log.phi_excess[k]) / a,
            s,
        );
        if let Some((xs, mu)) = lower {
            if k > 0 {
                err += log.weights[k] * (log.mu[k] - mu) * (&log.x[k] - xs).norm_squared();
            }
            report.push_le(
                "model-lower",
                k,
                log.model_excess_at_opt[k] / a,
                0.5 * err / a,
                s,
            );
        }
    }
    Ok(report)
}

/// `mu (1 - sqrt(mu0/L)) / (3 sqrt(mu0/L))`, the largest admissible `C` in
/// `mu_k - mu <= C / (k+1)^2`.
pub fn decay_cap(mu: f64, mu0: f64, l: f64) -> f64 {
    let r = (mu0 / l).sqrt();
    mu * (1.0 - r) / (3.0 * r)
}

/// `max_{k>=1} (mu_k - mu) (k+1)^2` for a sequence that must be
/// non-increasing and bounded below by `mu` (up to rounding).
pub fn empirical_decay_constant(sequence: &[f64], mu: f64) -> Result<f64> {
    let mut c: f64 = 0.0;
    for (k, w) in sequence.iter().enumerate() {
        if *w < mu * (1.0 - 4.0 * EPS) {
            return Err(Error::Precondition(format!(
                "mu_{k} = {w} is below the strong convexity {mu}"
            )));
        }
        if k > 0 {
            if *w > sequence[k - 1] {
                return Err(Error::Precondition(format!(
                    "mu sequence increases at k = {k}"
                )));
            }
            let excess = (w - mu - 4.0 * EPS * w).max(0.0);
            c = c.max(excess * ((k + 1) as f64).powi(2));
        }
    }
    Ok(c)
}

fn require_decay_cap(log: &IterateLog, n: usize, mu: f64, l: f64, check: &str) -> Result<f64> {
    let mu0 = log.mu[0];
    let c = empirical_decay_constant(&log.mu[..n], mu)?;
    let cap = decay_cap(mu, mu0, l);
    if c > cap {
        return Err(Error::Config(format!(
            "{check}: mu sequence decays with C = {c:e}, above the admissible {cap:e}"
        )));
    }
    Ok(mu0)
}

/// For sequences with `0 <= mu_k - mu <= C/(k+1)^2` and `C` under
/// [`decay_cap`]: `f(y_k) - f* <= 5 C_0 / (2 A_k)` with
/// `C_0 = max((mu_0 - mu)||x0 - x*||^2, 2(f(x0) - f*) + mu ||x0 - x*||^2)`,
/// and `A_k >= (1 - sqrt(mu/L))^-k`.
///
/// Returns a configuration error when the sequence violates the cap.
pub fn check_robust_rate(trace: &Trace, problem: &CompositeProblem) -> Result<CheckReport> {
    let t = truth(problem, "robust-rate")?;
    let log = weighted_log(trace, "robust-rate")?;
    let l = problem.lipschitz();
    let mu0 = require_decay_cap(log, trace.records.len(), t.mu, l, "robust-rate")?;
    let x0 = &log.x[0];
    let d0 = (x0 - t.x_star).norm_squared();
    let c0 = ((mu0 - t.mu) * d0).max(2.0 * (problem.value(x0) - t.f_star) + t.mu * d0);
    let q = 1.0 - (t.mu / l).sqrt();
    let s = slack(t.f_star);
    let mut report = CheckReport::new();
    for (k, r) in trace.records.iter().enumerate() {
        let a = a_total(trace, k, "robust-rate")?;
        report.push_le("robust-rate", k, r.f_y - t.f_star, 2.5 * c0 / a, s);
        if k > 0 {
            let floor = q.powi(-(k as i32));
            report.push_ge("robust-weight-growth", k, a, floor, slack(floor));
        }
    }
    Ok(report)
}

/// `a_{k+1} / A_k <= sqrt(mu0/L) / (1 - sqrt(mu0/L))`, up to rounding.
pub fn check_weight_ratio(trace: &Trace, problem: &CompositeProblem) -> Result<CheckReport> {
    let log = weighted_log(trace, "weight-ratio")?;
    let r = (log.mu[0] / problem.lipschitz()).sqrt();
    let c1 = r / (1.0 - r);
    let mut report = CheckReport::new();
    for k in 1..trace.records.len() {
        let ratio = log.weights[k] / a_total(trace, k - 1, "weight-ratio")?;
        report.push_le("weight-ratio", k, ratio, c1, 16.0 * EPS * c1);
    }
    Ok(report)
}

/// `||x_{k+1} - x*||^2 <= (2(f(x0) - f*) + (a_0 mu/2)||x0 - x*||^2) / (A_k mu)
///                        + sum_{i<=k} (a_i/A_k) ((mu_i - mu)/mu) ||x_i - x*||^2`.
pub fn check_iterate_distance(trace: &Trace, problem: &CompositeProblem) -> Result<CheckReport> {
    let t = truth(problem, "iterate-distance")?;
    let log = weighted_log(trace, "iterate-distance")?;
    let x0 = &log.x[0];
    let base = 2.0 * (problem.value(x0) - t.f_star)
        + 0.5 * log.weights[0] * t.mu * (x0 - t.x_star).norm_squared();
    let mut report = CheckReport::new();
    let mut err = 0.0;
    let n = trace.records.len().min(log.x.len());
    for k in 0..n.saturating_sub(1) {
        err += log.weights[k] * (log.mu[k] - t.mu) * (&log.x[k] - t.x_star).norm_squared();
        let a = a_total(trace, k, "iterate-distance")?;
        let rhs = (base + err) / (a * t.mu);
        let lhs = (&log.x[k + 1] - t.x_star).norm_squared();
        report.push_le("iterate-distance", k + 1, lhs, rhs, slack(rhs));
    }
    Ok(report)
}

/// `a_k (mu_k - mu) ||x_k - x*||^2 <= C_0 / (k+1)^2` with
/// `C_0 = max(a_0 (mu_0 - mu)||x0 - x*||^2, 2(f(x0) - f*) + a_0 mu ||x0 - x*||^2)`,
/// under the same decay hypothesis as [`check_robust_rate`].
pub fn check_summable_error(trace: &Trace, problem: &CompositeProblem) -> Result<CheckReport> {
    let t = truth(problem, "summable-error")?;
    let log = weighted_log(trace, "summable-error")?;
    let n = trace.records.len();
    let mu0 = require_decay_cap(log, n, t.mu, problem.lipschitz(), "summable-error")?;
    let x0 = &log.x[0];
    let a0 = log.weights[0];
    let d0 = (x0 - t.x_star).norm_squared();
    let c0 = (a0 * (mu0 - t.mu) * d0).max(2.0 * (problem.value(x0) - t.f_star) + a0 * t.mu * d0);
    let mut report = CheckReport::new();
    for k in 0..n {
        let lhs = log.weights[k] * (log.mu[k] - t.mu) * (&log.x[k] - t.x_star).norm_squared();
        let rhs = c0 / ((k + 1) as f64).powi(2);
        report.push_le("summable-error", k, lhs, rhs, slack(rhs));
    }
    Ok(report)
}

fn recorded_estimates(trace: &Trace, f_star: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
    trace.records.iter().filter_map(move |r| {
        match hat_mu_from_parts(r.f_y - f_star, r.gmap_norm * r.gmap_norm, f_star) {
            Estimate::Value(v) => Some((r.k, v)),
            Estimate::Converged => None,
        }
    })
}

/// `mu <= mu_hat(y_k) <= L` within `1e-10`, with `mu_hat` recomputed from
/// the recorded gap and reduced-gradient norm. The lower side is checked
/// only without a penalty, where it is guaranteed.
pub fn check_estimator_envelope(trace: &Trace, problem: &CompositeProblem) -> Result<CheckReport> {
    let f_star = f_star_of(problem, "estimator-envelope")?;
    let l = problem.lipschitz();
    let lower = match (problem.mu(), problem.penalty()) {
        (Some(mu), Penalty::Zero) => Some(mu),
        _ => None,
    };
    let mut report = CheckReport::new();
    if lower.is_none() {
        report.skip("estimator-lower: needs mu and a problem without penalty");
    }
    for (k, est) in recorded_estimates(trace, f_star) {
        report.push_le("estimator-upper", k, est, l, 1e-10);
        if let Some(mu) = lower {
            report.push_ge("estimator-lower", k, est, mu, 1e-10);
        }
    }
    Ok(report)
}

/// `mu_hat(y_k) - mu <= gd_estimator_bound_rhs(q, y0, k)` along a gradient
/// descent trace on the identity-basis quadratic `q`.
pub fn check_estimator_decay(
    trace: &Trace,
    q: &SpectralQuadratic,
    y0: &Point,
) -> Result<CheckReport> {
    if !q.has_identity_basis() {
        return Err(Error::Precondition(
            "estimator-decay needs an identity-basis instance".into(),
        ));
    }
    if trace.solver != "pgd" {
        return Err(Error::Precondition(format!(
            "estimator-decay needs a gradient descent trace, got {}",
            trace.solver
        )));
    }
    let mu = q.mu();
    let mut report = CheckReport::new();
    for (k, est) in recorded_estimates(trace, q.f_star()) {
        let rhs = gd_estimator_bound_rhs(q, y0, k)?;
        report.push_le("estimator-decay", k, est - mu, rhs, slack(mu));
    }
    Ok(report)
}

/// `mu_0 = mu0`, then `mu_k = min(mu0, mu + C/(k+1)^2)` with `C` = [`decay_cap`].
pub fn synthetic_mu_sequence(mu: f64, mu0: f64, l: f64, length: usize) -> Result<Vec<f64>> {
    if !(mu > 0.0 && mu <= mu0 && mu0 <= l) {
        return Err(Error::invalid(format!(
            "need 0 < mu <= mu0 <= L, got mu = {mu}, mu0 = {mu0}, L = {l}"
        )));
    }
    let c = decay_cap(mu, mu0, l);
    Ok((0..length)
        .map(|k| {
            if k == 0 {
                mu0
            } else {
                mu0.min(mu + c / ((k + 1) as f64).powi(2))
            }
        })
        .collect())
}

/// Inflation used by the checker self-tests. Large enough that even the
/// loosest bound, the weight ratio near `mu`, is exceeded.
pub const CORRUPTION_FACTOR: f64 = 1e3;

/// Copy of `trace` with every quantity the checkers bound inflated by
/// `factor`: gaps, reduced-gradient norms, weights `a_k` (k >= 1) and the
/// distances `x_k - x*` (k >= 1). A sound checker must flag it.
pub fn corrupt_trace(trace: &Trace, problem: &CompositeProblem, factor: f64) -> Trace {
    let mut bad = trace.clone();
    let f_star = problem.f_star();
    for r in &mut bad.records {
        if let Some(fs) = f_star {
            let gap = r.f_y - fs;
            r.f_y = fs + factor * gap;
            r.gap = r.gap.map(|_| factor * gap);
        }
        r.gmap_norm *= factor;
    }
    if let Some(log) = bad.iterates.as_mut() {
        for w in log.weights.iter_mut().skip(1) {
            *w *= factor;
        }
        if let Some(xs) = problem.x_star() {
            for x in log.x.iter_mut().skip(1) {
                *x = xs + (&*x - xs) * factor;
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::solvers::{adapt_apg, apg_estimate_sequence, apg_known_mu, MuInput, SolverConfig};
    use crate::verification::{make_spectral, random_spectral};

    fn instance() -> (SpectralQuadratic, CompositeProblem, Point) {
        let (q, p) = random_spectral(30, 1.0, 100.0, 4, false).unwrap();
        let mut r = rng::seeded(40);
        let x0 = rng::gaussian_vector(&mut r, 30);
        (q, p, x0)
    }

    #[test]
    fn decay_constant_arithmetic() {
        let c = decay_cap(1.0, 2.0, 4.0);
        assert!((c - 0.138_071_187_457_698).abs() < 1e-12);
        let seq = synthetic_mu_sequence(1.0, 2.0, 4.0, 10_000).unwrap();
        assert_eq!(seq[0], 2.0);
        assert!(seq.windows(2).all(|w| w[1] <= w[0]));
        assert!((seq[9_999] - 1.0) < 1e-8);
        assert!(empirical_decay_constant(&seq, 1.0).unwrap() <= c);
        assert!(synthetic_mu_sequence(2.0, 1.0, 4.0, 3).is_err());
        assert!(synthetic_mu_sequence(1.0, 5.0, 4.0, 3).is_err());
    }

    #[test]
    fn known_mu_rate_first_row_and_halving_envelope() {
        let xs = Point::zeros(2);
        let (_, p) = make_spectral(&[1.0, 4.0], xs, 0.0, None).unwrap();
        let x0 = Point::from_vec(vec![1.0, 1.0]);
        let t = apg_known_mu(&p, &x0, 1.0, &SolverConfig::default().with_max_iters(20)).unwrap();
        let report = check_known_mu_rate(&t, &p, &x0).unwrap();
        assert!(report.is_clean());
        let first = &report.rows[0];
        assert_eq!(first.lhs, 2.5);
        assert_eq!(first.rhs, 3.5);
        assert_eq!(report.rows[3].rhs, 3.5 / 8.0);
    }

    #[test]
    fn missing_ground_truth_is_a_precondition_error() {
        let (_, p, x0) = instance();
        let t = apg_known_mu(&p, &x0, 1.0, &SolverConfig::default().with_max_iters(5)).unwrap();
        assert!(matches!(
            check_adaptive_rate(&t, &p),
            Err(Error::Precondition(_))
        ));
        let q = crate::problems::Quadratic::diagonal(
            nalgebra::DVector::from_element(30, 1.0),
            Point::zeros(30),
            0.0,
        );
        let bare = CompositeProblem::new("q", std::sync::Arc::new(q), Penalty::Zero, 1.0).unwrap();
        assert!(matches!(
            check_known_mu_rate(&t, &bare, &x0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn constant_mu_run_satisfies_model_and_rate_checks() {
        let (_, p, x0) = instance();
        let cfg = SolverConfig::default()
            .with_max_iters(300)
            .keeping_iterates();
        let t = apg_estimate_sequence(&p, &x0, 1.0, &cfg).unwrap();
        for report in [
            check_model_invariants(&t, &p).unwrap(),
            check_adaptive_rate(&t, &p).unwrap(),
            check_known_mu_rate(&t, &p, &x0).unwrap(),
        ] {
            assert!(report.is_clean(), "{}", report.summary());
        }
    }

    fn capped_run(mu_scale: f64) -> (Trace, CompositeProblem) {
        let (_, p, x0) = instance();
        let l = p.lipschitz();
        let mut seq = synthetic_mu_sequence(1.0, l / 2.0, l, 301).unwrap();
        for v in seq.iter_mut().skip(1) {
            *v = (l / 2.0).min(1.0 + (*v - 1.0) * mu_scale);
        }
        let cfg = SolverConfig::default()
            .with_max_iters(300)
            .keeping_iterates()
            .with_mu_input(MuInput::Sequence(seq.into()));
        (adapt_apg(&p, &x0, &cfg).unwrap(), p)
    }

    #[test]
    fn capped_sequence_passes_robust_checks() {
        let (t, p) = capped_run(1.0);
        for report in [
            check_robust_rate(&t, &p).unwrap(),
            check_adaptive_rate(&t, &p).unwrap(),
            check_weight_ratio(&t, &p).unwrap(),
            check_summable_error(&t, &p).unwrap(),
            check_model_invariants(&t, &p).unwrap(),
        ] {
            assert!(report.is_clean(), "{}", report.summary());
        }
    }

    #[test]
    fn sequence_above_cap_is_refused() {
        let (t, p) = capped_run(100.0);
        assert!(matches!(check_robust_rate(&t, &p), Err(Error::Config(_))));
        assert!(matches!(
            check_summable_error(&t, &p),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn checkers_flag_corrupted_traces() {
        let (t, p) = capped_run(1.0);
        let bad = corrupt_trace(&t, &p, CORRUPTION_FACTOR);
        let x0 = &t.iterates.as_ref().unwrap().x[0];
        for report in [
            check_known_mu_rate(&bad, &p, x0).unwrap(),
            check_adaptive_rate(&bad, &p).unwrap(),
            check_robust_rate(&bad, &p).unwrap(),
            check_weight_ratio(&bad, &p).unwrap(),
            check_iterate_distance(&bad, &p).unwrap(),
            check_summable_error(&bad, &p).unwrap(),
            check_model_invariants(&bad, &p).unwrap(),
            check_estimator_envelope(&bad, &p).unwrap(),
        ] {
            assert!(report.violation_count() > 0, "{}", report.summary());
        }
    }
}
