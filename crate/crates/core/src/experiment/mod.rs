//! Experiment orchestration: configuration, detuning optimization, sweeps,
//! convergence checks and result files.

mod check;
mod config;
mod homodyne;
mod optimize;
mod output;
mod stabilize;
mod sync;

pub use check::{convergence_check, CheckEntry, CheckReport, CheckTarget, CHECK_TOLERANCE};
pub use config::{
    apply_override, CouplingSettings, ExperimentConfig, OscillatorOverrides, SolverChoice, SolverSettings,
    StabilizeSettings, SweepAxis, Tier, TrajectorySettings,
};
pub use homodyne::{run_homodyne_experiment, HomodynePoint, HomodyneSummary};
pub use optimize::{optimize_detunings, Optimum, OptimumSummary};
pub use output::{sha256_hex, Manifest, ResultDir, SeedInfo};
pub use stabilize::{run_stabilize, StabilizePoint, StabilizeSummary};
pub use sync::{
    common_frequency, coupled_effective_model, coupled_effective_model_rotating, coupled_point, find_peaks,
    run_sync_sweep, Flagged, Markers, Peaks, SyncCurve, SyncPoint, SyncSummary,
};

use crate::evolve::{
    steady_state_direct, steady_state_trajectory_average_with, LindbladModel, SectorSolver, SteadyState, StepControl,
    TrajectoryAverage,
};
use crate::models::{
    build_displaced_model, build_effective_model, compute_displacements, DisplacedTerms, EffectiveKerrParams,
    OscillatorParams,
};
use crate::qspace::{DensityMatrix, FockSpace};
use crate::{Error, Result};

/// Solve for the steady state with the configured method. `weights` are
/// the charge weights for the sector solver; without them `Auto` goes
/// straight to the direct solver.
pub fn solve_steady(
    model: &LindbladModel,
    weights: Option<&[i64]>,
    solver: &SolverSettings,
    traj: &TrajectorySettings,
) -> Result<SteadyState> {
    let sector = |w: &[i64]| {
        let mut s = SectorSolver::new(w.to_vec());
        s.tol = solver.tol;
        s.restart = solver.restart;
        s.max_iter = solver.max_iter;
        s.solve(model)
    };
    match solver.method {
        SolverChoice::Direct => steady_state_direct(model),
        SolverChoice::Sector => {
            let w = weights.ok_or_else(|| Error::Config("sector solver needs charge weights for this model".into()))?;
            sector(w)
        }
        SolverChoice::Auto => match weights {
            Some(w) => sector(w).or_else(|e| {
                log::debug!("sector solver failed ({e}); falling back to direct");
                steady_state_direct(model)
            }),
            None => steady_state_direct(model),
        },
        SolverChoice::TrajectoryAverage => {
            let mut opts = TrajectoryAverage::new(traj.n_traj, traj.t_burn, traj.t_avg, traj.seed);
            opts.control = StepControl {
                rate_factor: solver.rate_factor,
                dt_max: None,
            };
            opts.min_success = traj.min_success;
            steady_state_trajectory_average_with(model, &opts)
        }
    }
}

/// Steady state of the Kerr mode of one stabilized oscillator.
pub fn oscillator_state(
    p: &OscillatorParams,
    tier: Tier,
    dims: &[usize],
    n0: usize,
    solver: &SolverSettings,
    traj: &TrajectorySettings,
) -> Result<DensityMatrix> {
    let frame = compute_displacements(p)?;
    match tier {
        Tier::Effective => {
            let e = EffectiveKerrParams::from_frame(p, &frame, n0)?;
            let space = FockSpace::new(&dims[..1])?;
            let m = build_effective_model(&e, &space)?;
            Ok(solve_steady(&m, None, solver, traj)?.rho)
        }
        Tier::Full | Tier::Displaced => {
            if dims.len() != 3 {
                return Err(Error::Config(format!(
                    "a single oscillator needs 3 truncation dims, got {}",
                    dims.len()
                )));
            }
            let terms = if tier == Tier::Full {
                DisplacedTerms::all()
            } else {
                DisplacedTerms::rwa()
            };
            let space = FockSpace::new(dims)?;
            let m = build_displaced_model(p, &frame, terms, &space)?;
            solve_steady(&m, Some(&[1, 1, -1]), solver, traj)?
                .rho
                .partial_trace(&[0])
        }
    }
}

/// Fraction check shared by all sweeps.
fn require_success(ok: usize, total: usize, min_success: f64) -> Result<()> {
    if (ok as f64) < min_success * total as f64 {
        return Err(Error::FailureRate {
            succeeded: ok,
            total,
            required: min_success,
        });
    }
    Ok(())
}
