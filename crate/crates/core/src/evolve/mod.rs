//! Master-equation integration, steady states and homodyne trajectories.

mod expm;
mod model;
mod record;
pub mod rng;
mod sector;
mod sme;
mod steady;
mod unravel;

use rayon::prelude::*;

pub use expm::{expm_dense, Krylov};
pub use model::LindbladModel;
pub use record::{EnsembleManifest, TrajectoryRecord};
pub use sector::SectorSolver;
pub use sme::{
    internal_step, sme_homodyne_trajectory, sme_homodyne_trajectory_with, MeasuredChannel, SmeSystem, StepControl,
};
pub use steady::{steady_state_direct, DirectSolver, SteadyMethod, SteadyState, DIRECT_NNZ_CAP, DIRECT_RESIDUAL_TOL};
pub use unravel::{
    steady_state_trajectory_average, steady_state_trajectory_average_with, PureSystem, PureTrajectory,
    TrajectoryAverage,
};

use crate::qspace::DensityMatrix;
use crate::{Error, Result};

/// Integrate the master equation from `rho0` and return the state at every
/// point of the uniform grid `t_grid` (the first entry is `rho0` itself).
pub fn evolve_me(model: &LindbladModel, rho0: &DensityMatrix, t_grid: &[f64]) -> Result<Vec<DensityMatrix>> {
    evolve_me_with(model, rho0, t_grid, &Krylov::default())
}

pub fn evolve_me_with(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    krylov: &Krylov,
) -> Result<Vec<DensityMatrix>> {
    record::check_uniform_grid(t_grid)?;
    if rho0.space() != model.space() {
        return Err(Error::ShapeMismatch("initial state on a different space".into()));
    }
    let l = model.liouvillian();
    let norm = l.norm_inf();
    let mut v = rho0.to_vec();
    let mut out = Vec::with_capacity(t_grid.len());
    if t_grid.is_empty() {
        return Ok(out);
    }
    out.push(rho0.clone());
    for w in t_grid.windows(2) {
        v = krylov.expv(l.matrix(), norm, w[1] - w[0], &v)?;
        out.push(DensityMatrix::from_vec(model.space(), &v)?);
    }
    Ok(out)
}

/// Run `n` independent jobs in parallel; results come back in index order
/// regardless of scheduling.
pub fn run_ensemble<T, F>(n: usize, job: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(job).collect()
}

/// Keep successful results, failing if fewer than `min_success · n`
/// succeeded.
pub fn collect_successes<T>(results: Vec<Result<T>>, min_success: f64) -> Result<Vec<T>> {
    let total = results.len();
    let ok: Vec<T> = results.into_iter().filter_map(|r| r.ok()).collect();
    if (ok.len() as f64) < min_success * total as f64 {
        return Err(Error::FailureRate {
            succeeded: ok.len(),
            total,
            required: min_success,
        });
    }
    Ok(ok)
}
