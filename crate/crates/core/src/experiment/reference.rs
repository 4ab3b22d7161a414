use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::problems::{CompositeProblem, Point};
use crate::solvers::{apg_known_mu, fista, MomentumRule, SolverConfig, StopReason};

/// Iteration cap of a reference run.
pub const REFERENCE_MAX_ITERS: usize = 1_000_000;

const HEADER: &str = "hash,f_star,cert,solver,iters,timestamp";

/// Best objective value found by a long run, with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRecord {
    /// [`CompositeProblem::content_hash`] of the problem solved.
    pub hash: String,
    pub f_star: f64,
    /// Final `||g_L(y)||`.
    pub cert: f64,
    pub solver: String,
    pub iters: usize,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl ReferenceRecord {
    pub fn to_text(&self) -> String {
        format!(
            "{HEADER}\n{},{},{},{},{},{}\n",
            self.hash, self.f_star, self.cert, self.solver, self.iters, self.timestamp
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line, message: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(err(1, "missing reference header"));
        }
        let row = lines
            .next()
            .ok_or_else(|| err(2, "missing reference row"))?;
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 6 {
            return Err(err(2, "expected 6 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(2, "bad number"));
        let int = |s: &str| s.parse::<u64>().map_err(|_| err(2, "bad integer"));
        Ok(Self {
            hash: fields[0].to_string(),
            f_star: num(fields[1])?,
            cert: num(fields[2])?,
            solver: fields[3].to_string(),
            iters: int(fields[4])? as usize,
            timestamp: int(fields[5])?,
        })
    }
}

/// Runs APG with the known `mu` (or classical FISTA when `mu` is unknown)
/// from the origin until `||g_L(y_k)|| <= tol`, and takes the smallest
/// objective value seen as `f*`.
pub fn compute_reference(problem: &CompositeProblem, tol: f64) -> Result<ReferenceRecord> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "reference tolerance must be positive, got {tol}"
        )));
    }
    let mut config = SolverConfig::default()
        .with_max_iters(REFERENCE_MAX_ITERS)
        .with_gmap_tol(tol);
    config.record_every = REFERENCE_MAX_ITERS;
    config.momentum_rule = MomentumRule::Classical;
    let x0 = start_point(problem)?;
    let (trace, solver) = match problem.mu() {
        Some(mu) => (apg_known_mu(problem, &x0, mu, &config)?, "apg-mu"),
        None => (fista(problem, &x0, &config)?, "fista-classical"),
    };
    let last = trace
        .records
        .last()
        .expect("a run records at least one iterate");
    if trace.stop != StopReason::GradientTolerance {
        return Err(Error::Reference(format!(
            "{solver} reached {} iterations with ||g_L|| = {:e} > {tol:e}",
            last.k, last.gmap_norm
        )));
    }
    Ok(ReferenceRecord {
        hash: problem.content_hash(),
        f_star: trace.best_f,
        cert: last.gmap_norm,
        solver: solver.to_string(),
        iters: last.k,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    })
}

/// Origin, or the closest point of the box when the penalty is a box.
pub fn start_point(problem: &CompositeProblem) -> Result<Point> {
    let zero = Point::zeros(problem.dim());
    problem.penalty().prox(&zero, 1.0)
}

/// One reference file per problem hash under `<out_dir>/refs/`.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(out_dir: &Path) -> Self {
        Self {
            dir: out_dir.join("refs"),
        }
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(hash)
    }

    pub fn load(&self, hash: &str) -> Result<Option<ReferenceRecord>> {
        let path = self.path_for(hash);
        if !path.is_file() {
            return Ok(None);
        }
        let record = ReferenceRecord::parse(&std::fs::read_to_string(&path)?, &path)?;
        if record.hash != hash {
            return Err(Error::Reference(format!(
                "{} holds a record for another problem",
                path.display()
            )));
        }
        Ok(Some(record))
    }

    /// Cached record when its certificate meets `tol`, otherwise a fresh
    /// run that is then stored. The flag tells whether the cache was hit.
    pub fn get_or_compute(
        &self,
        problem: &CompositeProblem,
        tol: f64,
    ) -> Result<(ReferenceRecord, bool)> {
        let hash = problem.content_hash();
        if let Some(record) = self.load(&hash)? {
            if record.cert <= tol {
                return Ok((record, true));
            }
        }
        let record = compute_reference(problem, tol)?;
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(self.path_for(&hash), record.to_text())?;
        Ok((record, false))
    }
}
