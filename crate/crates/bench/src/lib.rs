//! Shared fixtures for the benchmarks.

use kerrsync::evolve::LindbladModel;
use kerrsync::experiment::{coupled_effective_model, ExperimentConfig};
use kerrsync::models::{build_displaced_model, compute_displacements, DisplacedTerms};
use kerrsync::qspace::FockSpace;

/// Coupled effective pair at `J = −6` with the given per-mode truncation.
pub fn pair(dim: usize, delta: f64) -> (ExperimentConfig, LindbladModel) {
    let cfg = ExperimentConfig::from_toml_str(&format!(
        "name = \"bench\"\ntier = \"effective\"\ndims = [{dim}, {dim}]\n\
         [sweep]\nname = \"delta_hat\"\nstart = 0.0\nstop = 0.0\npoints = 1\n"
    ))
    .expect("fixture config");
    let m = coupled_effective_model(&cfg, -6.0, delta).expect("fixture model");
    (cfg, m)
}

/// One stabilized oscillator with its two dissipators, displaced frame.
pub fn oscillator(dims: &[usize]) -> LindbladModel {
    let cfg = ExperimentConfig::from_toml_str(
        "name = \"bench\"\ntier = \"full\"\n[sweep]\nname = \"delta_a\"\nstart = 2000.0\nstop = 2000.0\npoints = 1\n",
    )
    .expect("fixture config");
    let p = cfg.oscillator.device(2000.0, 1).expect("device");
    let f = compute_displacements(&p).expect("frame");
    let space = FockSpace::new(dims).expect("space");
    build_displaced_model(&p, &f, DisplacedTerms::all(), &space).expect("model")
}
