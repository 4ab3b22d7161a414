//! Datasets and synthetic instances.
//!
//! LIBSVM files are parsed into a [`DesignMatrix`]; experiment presets build
//! least-squares, logistic, lasso and dual-SVM problems from them, falling
//! back to generated designs of the same shape on request. Generators for
//! spectral quadratics, matrix completion and lasso are deterministic in
//! their seed.

mod generators;
mod libsvm;
mod presets;

pub use generators::{
    gen_lasso, gen_matrix_completion, gen_observations, gen_spectral_instance,
    planted_lasso_solution, ObservationSet,
};
pub use libsvm::{load_libsvm, parse_libsvm, DesignMatrix, Storage, MAX_DENSE_COLS};
pub use presets::{
    preset, preset_catalog, preset_spec, Dataset, Loss, PresetOptions, PresetProblem, PresetSpec,
    GENERATED_PRESETS, MATRIX_COMPLETION, SYNTHETIC_LASSO,
};
