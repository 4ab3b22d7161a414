//! Iteration schemes sharing one trace contract.
//!
//! Every solver evaluates `f(y_k)` and `g_L(y_k)` at each iterate, emits an
//! [`IterationRecord`], then checks the stopping rules: gap tolerance (needs
//! `f*`), iteration cap, or a converged signal from the online estimator.
//!
//! Momentum family (two sequences `x`, `y`): [`pgd`], [`apg_known_mu`],
//! [`fista`], [`apg_restart`], [`adapt_apg_v2`].
//! Estimate-sequence family (explicit quadratic lower model):
//! [`apg_estimate_sequence`], [`adapt_apg`].

mod estimate_sequence;
mod momentum;

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::problems::{CompositeProblem, Point, ProxStep};

pub use estimate_sequence::{
    adapt_apg, apg_estimate_sequence, es_update, EstimateSequenceState, KAPPA_CEILING,
};
pub use momentum::{adapt_apg_v2, apg_known_mu, apg_restart, fista, momentum_from_mu, next_t, pgd};

/// Factor over the initial gap beyond which a run is declared divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Source of the strong-convexity values used by [`adapt_apg`].
#[derive(Debug, Clone, Default)]
pub enum MuInput {
    Known(f64),
    /// `mu_0, mu_1, ...`; the last value is held beyond the end.
    Sequence(Arc<[f64]>),
    /// Running-min estimate from the known optimal value.
    Online,
    #[default]
    None,
}

/// Update rule for the FISTA extrapolation parameter `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentumRule {
    /// `t' = (1 + sqrt(1 + t^2)) / 2`
    #[default]
    AsListed,
    /// `t' = (1 + sqrt(1 + 4 t^2)) / 2`
    Classical,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `f(y_k) - f* <= gap_tol`; requires a known `f*`.
    pub gap_tol: Option<f64>,
    /// Stop once `||g_L(y_k)|| <= gmap_tol`.
    pub gmap_tol: Option<f64>,
    /// Keep every n-th record (and always the last one). Bound checkers
    /// need the default of 1.
    pub record_every: usize,
    pub mu_input: MuInput,
    /// Initial cap for online estimates; defaults to `L / 2`.
    pub mu0: Option<f64>,
    pub momentum_rule: MomentumRule,
    /// Keep `x_k`, `y_k` and model weights for the bound checkers.
    pub keep_iterates: bool,
    /// Fill `wall_ns` in records.
    pub timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            gap_tol: None,
            gmap_tol: None,
            record_every: 1,
            mu_input: MuInput::None,
            mu0: None,
            momentum_rule: MomentumRule::AsListed,
            keep_iterates: false,
            timing: false,
        }
    }
}

impl SolverConfig {
    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_gap_tol(mut self, tol: f64) -> Self {
        self.gap_tol = Some(tol);
        self
    }

    pub fn with_gmap_tol(mut self, tol: f64) -> Self {
        self.gmap_tol = Some(tol);
        self
    }

    pub fn with_mu_input(mut self, input: MuInput) -> Self {
        self.mu_input = input;
        self
    }

    pub fn keeping_iterates(mut self) -> Self {
        self.keep_iterates = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        if let Some(tol) = self.gap_tol {
            if !(tol > 0.0) {
                return Err(Error::invalid(format!(
                    "gap_tol must be positive, got {tol}"
                )));
            }
        }
        if let Some(tol) = self.gmap_tol {
            if !(tol > 0.0) {
                return Err(Error::invalid(format!(
                    "gmap_tol must be positive, got {tol}"
                )));
            }
        }
        if let Some(mu0) = self.mu0 {
            if !(mu0 > 0.0) {
                return Err(Error::invalid(format!("mu0 must be positive, got {mu0}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub f_y: f64,
    /// `f(y_k) - f*` when `f*` is known (unclamped).
    pub gap: Option<f64>,
    /// Raw strong-convexity estimate computed at `y_k`.
    pub mu_hat: Option<f64>,
    /// Strong-convexity value used for the step taken from `y_k`.
    pub mu_k: Option<f64>,
    /// Estimate-sequence weight `A_k`.
    pub a_total: Option<f64>,
    /// `||g_L(y_k)||`
    pub gmap_norm: f64,
    pub restarted: bool,
    pub wall_ns: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartEvent {
    /// Index of the iterate that triggered the restart.
    pub k: usize,
    /// Threshold in force when the restart fired.
    pub epsilon: f64,
    pub gap: f64,
}

/// Iterates and model quantities kept for the bound checkers.
#[derive(Debug, Clone, Default)]
pub struct IterateLog {
    /// `x_0 = x0, x_1, ...` (extrapolated points)
    pub x: Vec<Point>,
    /// `y_0 = x0, y_1, ...`
    pub y: Vec<Point>,
    /// `a_0, a_1, ...` (estimate-sequence solvers only)
    pub weights: Vec<f64>,
    /// `mu_0, mu_1, ...` used in the model (estimate-sequence solvers only)
    pub mu: Vec<f64>,
    /// `min phi_k - A_k f*`
    pub phi_excess: Vec<f64>,
    /// `m_k(x*) - A_k f*`, when `x*` is known
    pub model_excess_at_opt: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    GapTolerance,
    /// `||g_L(y_k)||` fell below the configured tolerance.
    GradientTolerance,
    /// The online estimator found the gap at reference precision.
    Converged,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub solver: String,
    pub records: Vec<IterationRecord>,
    pub restarts: Vec<RestartEvent>,
    pub iterates: Option<IterateLog>,
    pub final_point: Point,
    pub stop: StopReason,
    /// Smallest objective value seen at any `y_k`, recorded or not.
    pub best_f: f64,
}

impl Trace {
    /// Iterations performed (the last record index).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    /// First `k` with `f(y_k) - f* <= tol`.
    pub fn first_k_below(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.gap.is_some_and(|g| g <= tol))
            .map(|r| r.k)
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.gap).collect()
    }
}

/// Named solver with its per-solver parameters, for batch runs.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverKind {
    Pgd,
    Fista,
    /// Uses the problem's `mu` when `None`.
    ApgKnownMu(Option<f64>),
    ApgEstimateSequence(Option<f64>),
    AdaptApg,
    AdaptApgV2,
    Restart {
        gamma: f64,
    },
}

impl SolverKind {
    pub fn name(&self) -> String {
        match self {
            SolverKind::Pgd => "pgd".into(),
            SolverKind::Fista => "fista".into(),
            SolverKind::ApgKnownMu(_) => "apg-mu".into(),
            SolverKind::ApgEstimateSequence(_) => "apg-es".into(),
            SolverKind::AdaptApg => "adapt-apg".into(),
            SolverKind::AdaptApgV2 => "adapt-apg-v2".into(),
            SolverKind::Restart { gamma } => format!("restart-g{gamma}"),
        }
    }

    /// Parses `pgd`, `fista`, `apg-mu[:mu]`, `apg-es[:mu]`, `adapt-apg`,
    /// `adapt-apg-v2`, `restart:gamma`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (spec.trim(), None),
        };
        let number = |a: Option<&str>| -> Result<Option<f64>> {
            a.map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number {s:?} in solver {spec:?}")))
            })
            .transpose()
        };
        Ok(match head {
            "pgd" => SolverKind::Pgd,
            "fista" | "apg" => SolverKind::Fista,
            "apg-mu" => SolverKind::ApgKnownMu(number(arg)?),
            "apg-es" => SolverKind::ApgEstimateSequence(number(arg)?),
            "adapt-apg" => SolverKind::AdaptApg,
            "adapt-apg-v2" => SolverKind::AdaptApgV2,
            "restart" => SolverKind::Restart {
                gamma: number(arg)?.ok_or_else(|| {
                    Error::Config("restart needs a gamma: restart:<gamma>".into())
                })?,
            },
            other => return Err(Error::Config(format!("unknown solver {other:?}"))),
        })
    }

    pub fn requires_f_star(&self) -> bool {
        matches!(
            self,
            SolverKind::AdaptApg | SolverKind::AdaptApgV2 | SolverKind::Restart { .. }
        )
    }

    pub fn run(
        &self,
        problem: &CompositeProblem,
        x0: &Point,
        config: &SolverConfig,
    ) -> Result<Trace> {
        let known_mu = |mu: Option<f64>| {
            mu.or(problem.mu()).ok_or_else(|| {
                Error::Precondition(format!("{} needs a strong-convexity value", self.name()))
            })
        };
        let f_star = || {
            problem
                .f_star()
                .ok_or_else(|| Error::Precondition(format!("{} needs f*", self.name())))
        };
        match *self {
            SolverKind::Pgd => pgd(problem, x0, config),
            SolverKind::Fista => fista(problem, x0, config),
            SolverKind::ApgKnownMu(mu) => apg_known_mu(problem, x0, known_mu(mu)?, config),
            SolverKind::ApgEstimateSequence(mu) => {
                apg_estimate_sequence(problem, x0, known_mu(mu)?, config)
            }
            SolverKind::AdaptApg => {
                if matches!(config.mu_input, MuInput::None) {
                    let cfg = config.clone().with_mu_input(MuInput::Online);
                    adapt_apg(problem, x0, &cfg)
                } else {
                    adapt_apg(problem, x0, config)
                }
            }
            SolverKind::AdaptApgV2 => adapt_apg_v2(problem, x0, f_star()?, config),
            SolverKind::Restart { gamma } => apg_restart(problem, x0, f_star()?, gamma, config),
        }
    }
}

/// Evaluation of one iterate `y_k`.
pub(crate) struct Eval {
    pub f: f64,
    pub gap: Option<f64>,
    pub step: ProxStep,
    pub gmap_norm_sq: f64,
}

/// Bookkeeping shared by all solvers: evaluation, divergence guard,
/// records and stopping rules.
pub(crate) struct Run<'a> {
    solver: &'static str,
    problem: &'a CompositeProblem,
    config: &'a SolverConfig,
    f_star: Option<f64>,
    f0: f64,
    blowup: f64,
    start: Instant,
    records: Vec<IterationRecord>,
    /// Latest record skipped by thinning, appended on finish.
    pending: Option<IterationRecord>,
    best_f: f64,
    pub log: Option<IterateLog>,
}

impl<'a> Run<'a> {
    pub fn new(
        solver: &'static str,
        problem: &'a CompositeProblem,
        config: &'a SolverConfig,
        f_star: Option<f64>,
        x0: &Point,
    ) -> Result<Self> {
        config.validate()?;
        if x0.len() != problem.dim() {
            return Err(Error::invalid(format!(
                "start point has dimension {}, problem has {}",
                x0.len(),
                problem.dim()
            )));
        }
        if config.gap_tol.is_some() && f_star.is_none() {
            return Err(Error::Precondition("gap_tol requires a known f*".into()));
        }
        let f0 = problem.value(x0);
        if !f0.is_finite() {
            return Err(Error::invalid(format!(
                "start point has f(x0) = {f0}; it must lie in the domain of the penalty"
            )));
        }
        let scale = match f_star {
            Some(fs) if f0 - fs > 0.0 => f0 - fs,
            _ => 1.0 + f0.abs(),
        };
        Ok(Self {
            solver,
            problem,
            config,
            f_star,
            f0,
            blowup: f0 + DIVERGENCE_FACTOR * scale,
            start: Instant::now(),
            records: Vec::new(),
            pending: None,
            best_f: f0,
            log: config.keep_iterates.then(IterateLog::default),
        })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn problem(&self) -> &CompositeProblem {
        self.problem
    }

    fn wall_ns(&self) -> Option<u64> {
        self.config
            .timing
            .then(|| self.start.elapsed().as_nanos() as u64)
    }

    fn diverged(&self, k: usize, f: f64) -> Error {
        Error::Diverged {
            solver: self.solver.to_string(),
            record: Box::new(IterationRecord {
                k,
                f_y: f,
                gap: self.f_star.map(|fs| f - fs),
                mu_hat: None,
                mu_k: None,
                a_total: None,
                gmap_norm: f64::NAN,
                restarted: false,
                wall_ns: self.wall_ns(),
            }),
        }
    }

    /// Objective at a freshly produced iterate, with the divergence guard.
    pub fn objective(&self, k: usize, y: &Point) -> Result<f64> {
        let f = self.problem.value(y);
        if !f.is_finite() || f > self.blowup {
            return Err(self.diverged(k, f));
        }
        Ok(f)
    }

    pub fn evaluate(&self, k: usize, y: &Point, cached_f: Option<f64>) -> Result<Eval> {
        let f = match cached_f {
            Some(f) => f,
            None => self.objective(k, y)?,
        };
        let step = self.problem.prox_step(y).map_err(|e| e.at_iteration(k))?;
        let gmap_norm_sq = step.reduced_gradient.norm_squared();
        Ok(Eval {
            f,
            gap: self.f_star.map(|fs| f - fs),
            step,
            gmap_norm_sq,
        })
    }

    /// Record skeleton for iterate `k`; solvers fill the optional fields.
    pub fn record(&self, k: usize, eval: &Eval) -> IterationRecord {
        IterationRecord {
            k,
            f_y: eval.f,
            gap: eval.gap,
            mu_hat: None,
            mu_k: None,
            a_total: None,
            gmap_norm: eval.gmap_norm_sq.sqrt(),
            restarted: false,
            wall_ns: self.wall_ns(),
        }
    }

    pub fn push(&mut self, record: IterationRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.k < record.k));
        self.best_f = self.best_f.min(record.f_y);
        if record.k.is_multiple_of(self.config.record_every) {
            self.pending = None;
            self.records.push(record);
        } else {
            self.pending = Some(record);
        }
    }

    pub fn stop_after(&self, k: usize, eval: &Eval) -> Option<StopReason> {
        if let (Some(tol), Some(gap)) = (self.config.gap_tol, eval.gap) {
            if gap <= tol {
                return Some(StopReason::GapTolerance);
            }
        }
        if let Some(tol) = self.config.gmap_tol {
            if eval.gmap_norm_sq.sqrt() <= tol {
                return Some(StopReason::GradientTolerance);
            }
        }
        (k >= self.config.max_iters).then_some(StopReason::MaxIters)
    }

    pub fn log_mut(&mut self) -> Option<&mut IterateLog> {
        self.log.as_mut()
    }

    pub fn finish(
        mut self,
        final_point: Point,
        stop: StopReason,
        restarts: Vec<RestartEvent>,
    ) -> Trace {
        if let Some(last) = self.pending.take() {
            self.records.push(last);
        }
        Trace {
            solver: self.solver.to_string(),
            records: self.records,
            restarts,
            iterates: self.log,
            final_point,
            stop,
            best_f: self.best_f,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_names_round_trip() {
        for spec in [
            "pgd",
            "fista",
            "apg-mu",
            "apg-es",
            "adapt-apg",
            "adapt-apg-v2",
        ] {
            assert_eq!(SolverKind::parse(spec).unwrap().name(), spec);
        }
        assert_eq!(
            SolverKind::parse("restart:2").unwrap(),
            SolverKind::Restart { gamma: 2.0 }
        );
        assert_eq!(
            SolverKind::parse("apg-mu:0.5").unwrap(),
            SolverKind::ApgKnownMu(Some(0.5))
        );
        assert!(SolverKind::parse("restart").is_err());
        assert!(SolverKind::parse("newton").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig::default()
            .with_max_iters(0)
            .validate()
            .is_err());
        assert!(SolverConfig::default()
            .with_gap_tol(0.0)
            .validate()
            .is_err());
    }
}
