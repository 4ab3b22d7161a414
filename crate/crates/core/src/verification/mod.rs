//! Ground-truth instances and executable convergence-bound checks.
//!
//! Each checker reads a solver [`Trace`](crate::solvers::Trace) (with
//! iterates kept where the bound involves them) plus the problem's exact
//! `mu`, `f*`, `x*`, and emits one [`CheckRow`] per iteration and
//! inequality. A row fails only when `lhs` exceeds `rhs` by more than its
//! slack. Checkers are pure functions of their inputs.

mod battery;
mod checks;
pub mod oracles;
mod spectral;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::problems::{Point, SmoothFunction};

pub use battery::{run_battery, Battery};
pub use checks::{
    check_adaptive_rate, check_estimator_decay, check_estimator_envelope, check_iterate_distance,
    check_known_mu_rate, check_model_invariants, check_robust_rate, check_summable_error,
    check_weight_ratio, corrupt_trace, decay_cap, empirical_decay_constant, synthetic_mu_sequence,
    CORRUPTION_FACTOR,
};
pub use spectral::{gd_estimator_bound_rhs, make_spectral, random_spectral, SpectralQuadratic};

/// Absolute slack `1e-9 (1 + |reference|)` for bound checks.
pub fn slack(reference: f64) -> f64 {
    1e-9 * (1.0 + reference.abs())
}

/// Slack `1e-8 (1 + |f*|)` for the estimate-sequence model invariants.
pub fn invariant_slack(f_star: f64) -> f64 {
    1e-8 * (1.0 + f_star.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
    /// Checks not run, with the reason.
    pub skipped: Vec<String>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `lhs <= rhs + slack`.
    pub fn push_le(&mut self, check: &str, k: usize, lhs: f64, rhs: f64, slack: f64) {
        let pass = lhs <= rhs + slack;
        self.rows.push(CheckRow {
            check: check.to_string(),
            k,
            lhs,
            rhs,
            slack,
            pass,
        });
    }

    /// Records `lhs >= rhs - slack`.
    pub fn push_ge(&mut self, check: &str, k: usize, lhs: f64, rhs: f64, slack: f64) {
        let pass = lhs >= rhs - slack;
        self.rows.push(CheckRow {
            check: check.to_string(),
            k,
            lhs,
            rhs,
            slack,
            pass,
        });
    }

    pub fn skip(&mut self, what: impl Into<String>) {
        self.skipped.push(what.into());
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.rows.extend(other.rows);
        self.skipped.extend(other.skipped);
    }

    /// Prefixes every check name, e.g. with the instance it ran on.
    pub fn scoped(mut self, prefix: &str) -> Self {
        for row in &mut self.rows {
            row.check = format!("{prefix}/{}", row.check);
        }
        for s in &mut self.skipped {
            *s = format!("{prefix}/{s}");
        }
        self
    }

    pub fn violations(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn violation_count(&self) -> usize {
        self.violations().count()
    }

    pub fn is_clean(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,k,lhs,rhs,slack,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:e},{}",
                r.check, r.k, r.lhs, r.rhs, r.slack, r.pass
            );
        }
        out
    }

    /// One line per check name with row and violation counts, then skips.
    pub fn summary(&self) -> String {
        let mut groups: BTreeMap<&str, (usize, usize, Option<usize>)> = BTreeMap::new();
        for r in &self.rows {
            let e = groups.entry(&r.check).or_insert((0, 0, None));
            e.0 += 1;
            if !r.pass {
                e.1 += 1;
                e.2.get_or_insert(r.k);
            }
        }
        let mut out = String::new();
        for (name, (rows, bad, first)) in &groups {
            let status = if *bad == 0 { "ok" } else { "FAIL" };
            let _ = write!(out, "{status:4} {name}: {rows} rows, {bad} violations");
            if let Some(k) = first {
                let _ = write!(out, " (first at k={k})");
            }
            out.push('\n');
        }
        for s in &self.skipped {
            let _ = writeln!(out, "skip {s}");
        }
        let _ = writeln!(
            out,
            "total: {} rows, {} violations, {} skipped",
            self.rows.len(),
            self.violation_count(),
            self.skipped.len()
        );
        out
    }
}

/// Central-difference gradient with step `h` per coordinate.
pub fn finite_diff_grad(f: &dyn SmoothFunction, x: &Point, h: f64) -> Point {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    Point::from_fn(x.len(), |i, _| {
        let xi = x[i];
        probe[i] = xi + h;
        let up = f.value(&probe);
        probe[i] = xi - h;
        let down = f.value(&probe);
        probe[i] = xi;
        (up - down) / (2.0 * h)
    })
}
