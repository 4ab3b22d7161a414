use std::str::FromStr;

use super::{
    check_adaptive_rate, check_estimator_decay, check_estimator_envelope, check_iterate_distance,
    check_known_mu_rate, check_model_invariants, check_robust_rate, check_summable_error,
    check_weight_ratio, corrupt_trace, random_spectral, synthetic_mu_sequence, CheckReport,
    CORRUPTION_FACTOR,
};
use crate::data;
use crate::error::{Error, Result};
use crate::exec::{map_batch, Execution};
use crate::experiment::compute_reference;
use crate::problems::{CompositeProblem, Point};
use crate::rng;
use crate::solvers::{
    adapt_apg, apg_estimate_sequence, apg_known_mu, pgd, MuInput, SolverConfig, Trace,
};

/// Size of the default spectral instances.
const DIM: usize = 50;
const MU: f64 = 1.0;
const L: f64 = 100.0;
const ESTIMATOR_INSTANCES: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Battery {
    /// Solver bounds on spectral quadratics, with corrupted-trace self-tests.
    Spectral,
    /// Estimator decay bound along gradient descent on 30 random quadratics.
    Estimator,
    /// Envelope checks on a composite problem without a known minimizer.
    Composite,
    All,
}

impl FromStr for Battery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Battery::Spectral),
            "estimator" => Ok(Battery::Estimator),
            "composite" => Ok(Battery::Composite),
            "all" => Ok(Battery::All),
            other => Err(Error::Config(format!(
                "unknown battery {other:?} (spectral, estimator, composite, all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Job {
    KnownMu,
    EstimateSequence,
    CappedSequence,
    Online,
    RotatedEnvelope,
    Estimator(u64),
    Composite,
}

fn jobs(battery: Battery) -> Vec<Job> {
    let spectral = [
        Job::KnownMu,
        Job::EstimateSequence,
        Job::CappedSequence,
        Job::Online,
        Job::RotatedEnvelope,
    ];
    let estimator = (0..ESTIMATOR_INSTANCES).map(Job::Estimator);
    match battery {
        Battery::Spectral => spectral.to_vec(),
        Battery::Estimator => estimator.collect(),
        Battery::Composite => vec![Job::Composite],
        Battery::All => spectral
            .into_iter()
            .chain(estimator)
            .chain([Job::Composite])
            .collect(),
    }
}

/// Runs every check of `battery`; instances are derived from `seed`.
pub fn run_battery(battery: Battery, seed: u64, execution: Execution) -> Result<CheckReport> {
    let results = map_batch(jobs(battery), execution, |job| run_job(job, seed));
    let mut report = CheckReport::new();
    for r in results {
        report.merge(r?);
    }
    Ok(report)
}

fn start_point(n: usize, seed: u64) -> Point {
    rng::gaussian_vector(&mut rng::seeded(seed ^ 0x5151_5151), n)
}

/// Appends `check` on the trace, then requires the same check to flag a
/// corrupted copy.
fn with_self_test(
    report: &mut CheckReport,
    name: &str,
    trace: &Trace,
    problem: &CompositeProblem,
    check: impl Fn(&Trace) -> Result<CheckReport>,
) -> Result<()> {
    report.merge(check(trace)?);
    let caught = check(&corrupt_trace(trace, problem, CORRUPTION_FACTOR))?.violation_count();
    report.push_ge(&format!("self-test/{name}"), 0, caught as f64, 1.0, 0.0);
    Ok(())
}

fn run_job(job: Job, seed: u64) -> Result<CheckReport> {
    let mut report = CheckReport::new();
    let cfg = |iters: usize| {
        SolverConfig::default()
            .with_max_iters(iters)
            .keeping_iterates()
    };
    match job {
        Job::KnownMu => {
            let (_, p) = random_spectral(DIM, MU, L, seed, false)?;
            let x0 = start_point(DIM, seed);
            let t = apg_known_mu(&p, &x0, MU, &cfg(500))?;
            with_self_test(&mut report, "known-mu-rate", &t, &p, |t| {
                check_known_mu_rate(t, &p, &x0)
            })?;
            Ok(report.scoped("apg-mu"))
        }
        Job::EstimateSequence => {
            let (_, p) = random_spectral(DIM, MU, L, seed, false)?;
            let x0 = start_point(DIM, seed);
            let t = apg_estimate_sequence(&p, &x0, MU, &cfg(500))?;
            with_self_test(&mut report, "known-mu-rate", &t, &p, |t| {
                check_known_mu_rate(t, &p, &x0)
            })?;
            with_self_test(&mut report, "model-invariants", &t, &p, |t| {
                check_model_invariants(t, &p)
            })?;
            with_self_test(&mut report, "adaptive-rate", &t, &p, |t| {
                check_adaptive_rate(t, &p)
            })?;
            Ok(report.scoped("apg-es"))
        }
        Job::CappedSequence => {
            let (_, p) = random_spectral(DIM, MU, L, seed, false)?;
            let x0 = start_point(DIM, seed);
            let seq = synthetic_mu_sequence(MU, L / 2.0, L, 301)?;
            let t = adapt_apg(
                &p,
                &x0,
                &cfg(300).with_mu_input(MuInput::Sequence(seq.into())),
            )?;
            with_self_test(&mut report, "adaptive-rate", &t, &p, |t| {
                check_adaptive_rate(t, &p)
            })?;
            with_self_test(&mut report, "robust-rate", &t, &p, |t| {
                check_robust_rate(t, &p)
            })?;
            with_self_test(&mut report, "model-invariants", &t, &p, |t| {
                check_model_invariants(t, &p)
            })?;
            with_self_test(&mut report, "weight-ratio", &t, &p, |t| {
                check_weight_ratio(t, &p)
            })?;
            with_self_test(&mut report, "iterate-distance", &t, &p, |t| {
                check_iterate_distance(t, &p)
            })?;
            with_self_test(&mut report, "summable-error", &t, &p, |t| {
                check_summable_error(t, &p)
            })?;
            Ok(report.scoped("capped-sequence"))
        }
        Job::Online => {
            let (_, p) = random_spectral(DIM, MU, L, seed, false)?;
            let x0 = start_point(DIM, seed);
            let t = adapt_apg(&p, &x0, &cfg(300).with_mu_input(MuInput::Online))?;
            with_self_test(&mut report, "adaptive-rate", &t, &p, |t| {
                check_adaptive_rate(t, &p)
            })?;
            with_self_test(&mut report, "model-invariants", &t, &p, |t| {
                check_model_invariants(t, &p)
            })?;
            with_self_test(&mut report, "weight-ratio", &t, &p, |t| {
                check_weight_ratio(t, &p)
            })?;
            with_self_test(&mut report, "estimator-envelope", &t, &p, |t| {
                check_estimator_envelope(t, &p)
            })?;
            Ok(report.scoped("adapt-apg"))
        }
        Job::RotatedEnvelope => {
            let (_, p) = random_spectral(20, MU, L, seed.wrapping_add(7), true)?;
            let x0 = start_point(20, seed);
            let t = pgd(&p, &x0, &cfg(200))?;
            with_self_test(&mut report, "estimator-envelope", &t, &p, |t| {
                check_estimator_envelope(t, &p)
            })?;
            Ok(report.scoped("rotated-pgd"))
        }
        Job::Estimator(i) => {
            let instance_seed = seed.wrapping_mul(1000).wrapping_add(i);
            let (q, p) = random_spectral(DIM, MU, L, instance_seed, false)?;
            let y0 = start_point(DIM, instance_seed);
            let t = pgd(&p, &y0, &cfg(200))?;
            report.merge(check_estimator_envelope(&t, &p)?);
            with_self_test(&mut report, "estimator-decay", &t, &p, |t| {
                check_estimator_decay(t, &q, &y0)
            })?;
            Ok(report.scoped(&format!("gd-{i:02}")))
        }
        Job::Composite => {
            let mut p = data::gen_lasso(60, 120, 10, 0.01, 0.1, seed)?;
            let reference = compute_reference(&p, 1e-9)?;
            p = p.with_f_star(reference.f_star)?;
            let x0 = Point::zeros(p.dim());
            let t = adapt_apg(&p, &x0, &cfg(2000).with_mu_input(MuInput::Online))?;
            with_self_test(&mut report, "estimator-envelope", &t, &p, |t| {
                check_estimator_envelope(t, &p)
            })?;
            for skipped in [
                "known-mu-rate",
                "adaptive-rate",
                "robust-rate",
                "iterate-distance",
                "summable-error",
            ] {
                report.skip(format!("{skipped}: no exact mu or x*"));
            }
            Ok(report.scoped("lasso"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_names_parse() {
        assert_eq!("all".parse::<Battery>().unwrap(), Battery::All);
        assert!("nope".parse::<Battery>().is_err());
        assert_eq!(jobs(Battery::Estimator).len(), 30);
    }

    #[test]
    fn spectral_battery_is_clean() {
        let report = run_battery(Battery::Spectral, 1, Execution::Parallel).unwrap();
        assert!(report.is_clean(), "{}", report.summary());
        assert!(report.rows.iter().any(|r| r.check.contains("self-test")));
    }
}
