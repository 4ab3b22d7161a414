use std::fmt::Write as _;
use std::path::PathBuf;

use super::{start_point, ExperimentConfig, ReferenceCache};
use crate::data::{preset, PresetOptions};
use crate::error::{Error, Result};
use crate::exec::map_batch;
use crate::solvers::{IterationRecord, SolverConfig, SolverKind, StopReason, Trace};

/// Gap levels reported in the summary.
pub const THRESHOLDS: [f64; 3] = [1e-4, 1e-8, 1e-12];

pub const TRACE_HEADER: &str = "k,f,gap,mu_hat,mu_running,A_k,gmap_norm,restarted,wall_ns";

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Finished(StopReason),
    Diverged { k: usize },
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub solver: String,
    pub status: RunStatus,
    pub iterations: Option<usize>,
    pub final_gap: Option<f64>,
    /// First `k` with gap at or below each of [`THRESHOLDS`].
    pub first_below: [Option<usize>; 3],
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub f_star: f64,
    pub reference_hit: Option<bool>,
    pub files: Vec<PathBuf>,
    pub summary: Vec<SummaryRow>,
    pub traces: Vec<Option<Trace>>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trace CSV with the gap clamped at zero.
pub fn trace_csv(trace: &Trace) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            r.f_y,
            opt(r.gap.map(|g| g.max(0.0))),
            opt(r.mu_hat),
            opt(r.mu_k),
            opt(r.a_total),
            r.gmap_norm,
            u8::from(r.restarted),
            r.wall_ns.map(|w| w.to_string()).unwrap_or_default(),
        );
    }
    out
}

/// Unclamped gaps, `k,gap_raw`.
pub fn raw_gap_csv(trace: &Trace) -> String {
    let mut out = String::from("k,gap_raw\n");
    for r in &trace.records {
        let _ = writeln!(out, "{},{}", r.k, opt(r.gap));
    }
    out
}

fn first_below(records: &[IterationRecord], tol: f64) -> Option<usize> {
    records
        .iter()
        .find(|r| r.gap.is_some_and(|g| g <= tol))
        .map(|r| r.k)
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("solver,status,iterations,final_gap,k_1e-4,k_1e-8,k_1e-12\n");
    for r in rows {
        let status = match &r.status {
            RunStatus::Finished(reason) => format!("{reason:?}"),
            RunStatus::Diverged { k } => format!("diverged@{k}"),
            RunStatus::Failed(msg) => format!("failed: {}", msg.replace(',', ";")),
        };
        let ks: Vec<String> = r
            .first_below
            .iter()
            .map(|k| k.map(|k| k.to_string()).unwrap_or_default())
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.solver,
            status,
            r.iterations.map(|k| k.to_string()).unwrap_or_default(),
            opt(r.final_gap),
            ks.join(",")
        );
    }
    out
}

/// Builds the preset, obtains `f*` (ground truth or cached reference), runs
/// every solver from the same start point and writes one trace CSV per
/// solver, raw-gap sidecars and `summary.csv` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let kinds = config.validate()?;
    let name = config.preset.as_deref().expect("validated");
    let built = preset(
        name,
        &PresetOptions {
            data_dir: config.data_dir.clone(),
            synthetic_fallback: config.synthetic_fallback,
            standardize: config.standardize,
            seed: config.seed,
        },
    )?;
    let mut problem = built.problem;
    std::fs::create_dir_all(&config.out_dir)?;

    let (f_star, reference_hit) = match problem.f_star() {
        Some(fs) => (fs, None),
        None => {
            let cache = ReferenceCache::new(&config.out_dir);
            let (record, hit) = cache.get_or_compute(&problem, config.reference_tol)?;
            problem = problem.with_f_star(record.f_star)?;
            (record.f_star, Some(hit))
        }
    };

    let solver_config = SolverConfig {
        max_iters: config.max_iters,
        gap_tol: config.gap_tol,
        record_every: config.record_every,
        momentum_rule: config.momentum,
        timing: config.record_time,
        ..SolverConfig::default()
    };
    let x0 = start_point(&problem)?;
    let results = map_batch(kinds.clone(), config.execution, |kind: SolverKind| {
        kind.run(&problem, &x0, &solver_config)
    });

    let mut files = Vec::new();
    let mut summary = Vec::new();
    let mut traces = Vec::new();
    for (kind, result) in kinds.iter().zip(results) {
        let solver = kind.name();
        match result {
            Ok(trace) => {
                let path = config.out_dir.join(format!("{solver}.csv"));
                std::fs::write(&path, trace_csv(&trace))?;
                files.push(path);
                let raw = config.out_dir.join(format!("{solver}_raw.csv"));
                std::fs::write(&raw, raw_gap_csv(&trace))?;
                files.push(raw);
                summary.push(SummaryRow {
                    solver,
                    status: RunStatus::Finished(trace.stop),
                    iterations: Some(trace.iterations()),
                    final_gap: trace.records.last().and_then(|r| r.gap),
                    first_below: THRESHOLDS.map(|t| first_below(&trace.records, t)),
                });
                traces.push(Some(trace));
            }
            Err(Error::Diverged { record, .. }) => {
                summary.push(SummaryRow {
                    solver,
                    status: RunStatus::Diverged { k: record.k },
                    iterations: Some(record.k),
                    final_gap: record.gap,
                    first_below: [None; 3],
                });
                traces.push(None);
            }
            Err(e) => {
                summary.push(SummaryRow {
                    solver,
                    status: RunStatus::Failed(e.to_string()),
                    iterations: None,
                    final_gap: None,
                    first_below: [None; 3],
                });
                traces.push(None);
            }
        }
    }
    let path = config.out_dir.join("summary.csv");
    std::fs::write(&path, summary_csv(&summary))?;
    files.push(path);

    let mut meta = String::new();
    for (k, v) in &built.metadata {
        let _ = writeln!(meta, "{k} = {v}");
    }
    let _ = writeln!(meta, "problem_hash = {}", problem.content_hash());
    let _ = writeln!(meta, "f_star = {f_star}");
    let _ = writeln!(meta, "lipschitz = {}", problem.lipschitz());
    let _ = writeln!(meta, "mu = {}", opt(problem.mu()));
    let meta_path = config.out_dir.join("metadata.txt");
    std::fs::write(&meta_path, meta)?;
    files.push(meta_path);

    Ok(ExperimentOutcome {
        f_star,
        reference_hit,
        files,
        summary,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &std::path::Path, solvers: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::parse(&format!(
            "preset = spectral\nsolvers = {solvers}\nmax_iters = 200\n"
        ))
        .unwrap();
        cfg.out_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn single_solver_writes_one_trace() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config(dir.path(), "fista")).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("fista.csv")).unwrap();
        assert!(csv.starts_with(TRACE_HEADER));
        assert_eq!(csv.lines().count(), 202);
        assert_eq!(out.summary.len(), 1);
        assert!(dir.path().join("fista_raw.csv").is_file());
    }

    #[test]
    fn summary_thresholds_agree_with_csv() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config(dir.path(), "apg-mu, adapt-apg")).unwrap();
        for row in &out.summary {
            let csv =
                std::fs::read_to_string(dir.path().join(format!("{}.csv", row.solver))).unwrap();
            let gaps: Vec<(usize, f64)> = csv
                .lines()
                .skip(1)
                .map(|l| {
                    let f: Vec<&str> = l.split(',').collect();
                    (f[0].parse().unwrap(), f[2].parse().unwrap())
                })
                .collect();
            for (t, k) in THRESHOLDS.iter().zip(row.first_below) {
                assert_eq!(gaps.iter().find(|(_, g)| g <= t).map(|(k, _)| *k), k);
            }
        }
    }
}
