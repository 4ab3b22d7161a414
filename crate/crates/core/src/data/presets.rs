use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{gen_lasso, gen_matrix_completion, gen_spectral_instance, load_libsvm, DesignMatrix};
use crate::error::{Error, Result};
use crate::problems::{gram_lipschitz, CompositeProblem, DualSvm, LeastSquares, Logistic, Penalty};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Musk,
    Madelon,
    Sonar,
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Musk => "musk",
            Dataset::Madelon => "madelon",
            Dataset::Sonar => "sonar",
        }
    }

    /// `(rows, cols)` of the public dataset, reused by the synthetic stand-in.
    pub fn shape(self) -> (usize, usize) {
        match self {
            Dataset::Musk => (6598, 166),
            Dataset::Madelon => (2000, 500),
            Dataset::Sonar => (208, 60),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `||X w - y||^2 / 2`
    LeastSquares,
    /// Logistic loss plus `lambda ||w||^2`.
    Logistic,
    /// Least squares plus `lambda ||w||_1`.
    Lasso,
    /// Dual hinge-loss SVM with box `[0, 1]`.
    Svm,
}

/// Loss family and regularization of a dataset preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetSpec {
    pub dataset: Dataset,
    pub loss: Loss,
    /// `lambda` for logistic and lasso, `C` for the SVM, unused for least squares.
    pub weight: f64,
}

const DATASET_PRESETS: &[(&str, PresetSpec)] = &[
    ("musk-ls", spec(Dataset::Musk, Loss::LeastSquares, 0.0)),
    ("musk-logit", spec(Dataset::Musk, Loss::Logistic, 100.0)),
    ("musk-lasso", spec(Dataset::Musk, Loss::Lasso, 100.0)),
    ("musk-svm", spec(Dataset::Musk, Loss::Svm, 1.0)),
    (
        "madelon-ls",
        spec(Dataset::Madelon, Loss::LeastSquares, 0.0),
    ),
    (
        "madelon-logit",
        spec(Dataset::Madelon, Loss::Logistic, 1000.0),
    ),
    ("madelon-lasso", spec(Dataset::Madelon, Loss::Lasso, 800.0)),
    ("madelon-svm", spec(Dataset::Madelon, Loss::Svm, 1.0)),
    ("sonar-ls", spec(Dataset::Sonar, Loss::LeastSquares, 0.0)),
    ("sonar-logit", spec(Dataset::Sonar, Loss::Logistic, 0.004)),
    ("sonar-lasso", spec(Dataset::Sonar, Loss::Lasso, 1.0)),
    ("sonar-svm", spec(Dataset::Sonar, Loss::Svm, 1.0)),
];

const fn spec(dataset: Dataset, loss: Loss, weight: f64) -> PresetSpec {
    PresetSpec {
        dataset,
        loss,
        weight,
    }
}

/// Generated presets: `(name, description)`.
pub const GENERATED_PRESETS: &[(&str, &str)] = &[
    (
        "matrix-completion",
        "30x30 rank-5 matrix, 200 observed entries, nuclear weight 0.01",
    ),
    (
        "synthetic-lasso",
        "100x200 Gaussian design, 40-sparse planted vector, l1 weight 0.3",
    ),
    (
        "spectral",
        "50-dim quadratic, mu = 1, L = 100, exact ground truth",
    ),
];

pub const SYNTHETIC_LASSO: (usize, usize, usize, f64, f64) = (100, 200, 40, 0.05, 0.3);
pub const MATRIX_COMPLETION: (usize, usize, usize, f64) = (30, 5, 200, 0.01);

pub fn preset_spec(name: &str) -> Result<PresetSpec> {
    DATASET_PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))
}

/// Every preset name with a one-line description.
pub fn preset_catalog() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = DATASET_PRESETS
        .iter()
        .map(|(n, s)| {
            let what = match s.loss {
                Loss::LeastSquares => "least squares".to_string(),
                Loss::Logistic => format!("logistic, ridge {}", s.weight),
                Loss::Lasso => format!("lasso, l1 weight {}", s.weight),
                Loss::Svm => format!("dual SVM, C = {}", s.weight),
            };
            let (m, n_) = s.dataset.shape();
            (
                n.to_string(),
                format!("{} ({m}x{n_}), {what}", s.dataset.name()),
            )
        })
        .collect();
    out.extend(
        GENERATED_PRESETS
            .iter()
            .map(|(n, d)| (n.to_string(), d.to_string())),
    );
    out
}

#[derive(Debug, Clone)]
pub struct PresetOptions {
    pub data_dir: Option<PathBuf>,
    pub synthetic_fallback: bool,
    pub standardize: bool,
    pub seed: u64,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            data_dir: None,
            synthetic_fallback: false,
            standardize: true,
            seed: 0,
        }
    }
}

/// A configured problem plus `key = value` notes on how it was built.
#[derive(Debug, Clone)]
pub struct PresetProblem {
    pub problem: CompositeProblem,
    pub metadata: Vec<(String, String)>,
}

pub fn preset(name: &str, options: &PresetOptions) -> Result<PresetProblem> {
    let seed = options.seed;
    let mut metadata = vec![
        ("preset".to_string(), name.to_string()),
        ("rng".to_string(), rng::RNG_ALGORITHM.to_string()),
        ("seed".to_string(), seed.to_string()),
    ];
    let problem = match name {
        "matrix-completion" => {
            let (d, rank, n_obs, lambda) = MATRIX_COMPLETION;
            gen_matrix_completion(d, rank, n_obs, lambda, seed)?
        }
        "synthetic-lasso" => {
            let (m, n, s, noise, lambda) = SYNTHETIC_LASSO;
            gen_lasso(m, n, s, noise, lambda, seed)?
        }
        "spectral" => gen_spectral_instance(50, 1.0, 100.0, seed)?,
        _ => {
            let spec = preset_spec(name)?;
            let (design, source) = load_or_synthesize(spec.dataset, options)?;
            metadata.push(("source".into(), source));
            let x = if options.standardize {
                design.standardized()?
            } else {
                design.to_dense()
            };
            metadata.push(("features".into(), feature_note(options.standardize).into()));
            metadata.push(("labels".into(), "unchanged".into()));
            metadata.push(("weight".into(), spec.weight.to_string()));
            build(name, spec, x, design.label_vector())?
        }
    };
    Ok(PresetProblem { problem, metadata })
}

fn feature_note(standardize: bool) -> &'static str {
    if standardize {
        "standardized (zero mean, unit variance)"
    } else {
        "raw"
    }
}

fn build(
    name: &str,
    spec: PresetSpec,
    x: DMatrix<f64>,
    y: DVector<f64>,
) -> Result<CompositeProblem> {
    let w = spec.weight;
    match spec.loss {
        Loss::LeastSquares | Loss::Lasso => {
            let l = gram_lipschitz(&x, 1.0)?;
            let gram = x.tr_mul(&x);
            let mu = gram.symmetric_eigen().eigenvalues.min();
            let penalty = if spec.loss == Loss::Lasso {
                Penalty::L1 { weight: w }
            } else {
                Penalty::Zero
            };
            let p = CompositeProblem::new(name, Arc::new(LeastSquares::new(x, y)?), penalty, l)?;
            if mu > 1e-12 * l {
                p.with_mu(mu)
            } else {
                Ok(p)
            }
        }
        Loss::Logistic => {
            let l = gram_lipschitz(&x, 0.25)? + 2.0 * w;
            let p =
                CompositeProblem::new(name, Arc::new(Logistic::new(x, y, w)?), Penalty::Zero, l)?;
            if w > 0.0 {
                p.with_mu(2.0 * w)
            } else {
                Ok(p)
            }
        }
        Loss::Svm => {
            let svm = DualSvm::new(&x, &y, w)?;
            let l = gram_lipschitz(svm.signed_design(), 1.0 / w)?;
            CompositeProblem::new(name, Arc::new(svm), Penalty::Box { lo: 0.0, hi: 1.0 }, l)
        }
    }
}

fn dataset_file(dir: &Path, dataset: Dataset) -> Option<PathBuf> {
    let base = dataset.name();
    [
        base.to_string(),
        format!("{base}.libsvm"),
        format!("{base}.txt"),
        format!("{base}_scale"),
    ]
    .into_iter()
    .map(|f| dir.join(f))
    .find(|p| p.is_file())
}

fn load_or_synthesize(dataset: Dataset, options: &PresetOptions) -> Result<(DesignMatrix, String)> {
    if let Some(path) = options
        .data_dir
        .as_deref()
        .and_then(|d| dataset_file(d, dataset))
    {
        let design = load_libsvm(&path)?;
        return Ok((design, path.display().to_string()));
    }
    if !options.synthetic_fallback {
        return Err(Error::Config(format!(
            "dataset {} not found{}; pass --synthetic-fallback to use a generated stand-in",
            dataset.name(),
            options
                .data_dir
                .as_deref()
                .map(|d| format!(" in {}", d.display()))
                .unwrap_or_default()
        )));
    }
    let (m, n) = dataset.shape();
    Ok((
        synthetic_design(m, n, options.seed ^ dataset as u64)?,
        format!("synthetic {m}x{n} (latent-factor Gaussian)"),
    ))
}

/// Correlated features `X = Z W + 0.1 E` with `n / 5` latent factors and
/// labels `sign(X beta + noise)`.
fn synthetic_design(m: usize, n: usize, seed: u64) -> Result<DesignMatrix> {
    let mut r = rng::seeded(seed);
    let k = (n / 5).max(1);
    let z = DMatrix::from_fn(m, k, |_, _| rng::gaussian(&mut r));
    let w = DMatrix::from_fn(k, n, |_, _| rng::gaussian(&mut r));
    let e = DMatrix::from_fn(m, n, |_, _| 0.1 * rng::gaussian(&mut r));
    let x = z * w + e;
    let beta = rng::gaussian_vector(&mut r, n);
    let scores = &x * beta;
    let labels = scores
        .iter()
        .map(|s| {
            if s + rng::gaussian(&mut r) * 0.1 * s.abs().max(1.0) >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    DesignMatrix::dense(x, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_weights() {
        assert_eq!(preset_spec("madelon-lasso").unwrap().weight, 800.0);
        assert_eq!(preset_spec("sonar-logit").unwrap().weight, 0.004);
        let svm = preset_spec("musk-svm").unwrap();
        assert_eq!((svm.loss, svm.weight), (Loss::Svm, 1.0));
        assert!(preset_spec("iris-ls").is_err());
    }

    #[test]
    fn missing_dataset_needs_fallback() {
        let opts = PresetOptions::default();
        assert!(matches!(
            preset("sonar-lasso", &opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn synthetic_sonar_presets() {
        let opts = PresetOptions {
            synthetic_fallback: true,
            ..PresetOptions::default()
        };
        let svm = preset("sonar-svm", &opts).unwrap();
        assert_eq!(svm.problem.dim(), 208);
        assert_eq!(svm.problem.penalty(), &Penalty::Box { lo: 0.0, hi: 1.0 });
        assert!(svm.problem.f_star().is_none());
        let logit = preset("sonar-logit", &opts).unwrap();
        assert_eq!(logit.problem.dim(), 60);
        assert_eq!(logit.problem.mu(), Some(0.008));
        assert!(logit.metadata.iter().any(|(k, _)| k == "source"));
        let again = preset("sonar-logit", &opts).unwrap();
        assert_eq!(logit.problem.content_hash(), again.problem.content_hash());
    }

    #[test]
    fn loads_dataset_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("sonar.libsvm"),
            "1 1:0.5 2:1\n-1 1:1 2:-0.5\n1 1:-1 2:0.25\n-1 2:2\n",
        )
        .unwrap();
        let opts = PresetOptions {
            data_dir: Some(dir.path().to_path_buf()),
            ..PresetOptions::default()
        };
        let p = preset("sonar-ls", &opts).unwrap();
        assert_eq!(p.problem.dim(), 2);
        assert!(p.metadata.iter().any(|(_, v)| v.ends_with("sonar.libsvm")));
    }
}
