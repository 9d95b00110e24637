use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Tier};
use super::homodyne::measured_model;
use super::sync::coupled_point;
use super::{oscillator_state, solve_steady};
use crate::evolve::rng::trajectory_seed;
use crate::evolve::{
    collect_successes, run_ensemble, sme_homodyne_trajectory_with, MeasuredChannel, SmeSystem, StepControl,
};
use crate::measures::fock_fidelity;
use crate::qspace::destroy;
use crate::{Error, Result};

/// Scalars must move by less than this fraction under refinement.
pub const CHECK_TOLERANCE: f64 = 0.01;

/// What the check reruns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckTarget {
    Stabilize,
    Sync,
    Homodyne,
}

impl CheckTarget {
    /// Guess from the sweep axis: `delta_a` sweeps are stabilization runs.
    pub fn infer(config: &ExperimentConfig) -> Self {
        if config.sweep.name == "delta_a" {
            CheckTarget::Stabilize
        } else {
            CheckTarget::Sync
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub observable: String,
    pub refinement: String,
    pub delta: f64,
    pub base: f64,
    pub refined: f64,
    /// `|refined − base|` over the largest `|base|` of that observable.
    pub rel_change: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub target: CheckTarget,
    pub dims: Vec<usize>,
    pub refined_dims: Vec<usize>,
    pub entries: Vec<CheckEntry>,
    /// Largest relative change under the truncation refinement.
    pub max_rel_change: f64,
    pub passed: bool,
}

/// Sweep points that get rechecked: both ends and the middle.
fn check_points(config: &ExperimentConfig) -> Vec<f64> {
    let xs = config.sweep.values();
    let mut v = vec![xs[0], xs[xs.len() / 2], xs[xs.len() - 1]];
    v.dedup();
    v
}

fn scaled(entries: &mut [CheckEntry]) {
    let mut names: Vec<String> = entries.iter().map(|e| e.observable.clone()).collect();
    names.dedup();
    for n in names {
        let scale = entries
            .iter()
            .filter(|e| e.observable == n)
            .map(|e| e.base.abs())
            .fold(1e-12, f64::max);
        for e in entries.iter_mut().filter(|e| e.observable == n) {
            e.rel_change = (e.refined - e.base).abs() / scale;
            e.passed = e.rel_change < CHECK_TOLERANCE;
        }
    }
}

fn entry(observable: &str, refinement: &str, delta: f64, base: f64, refined: f64) -> CheckEntry {
    CheckEntry {
        observable: observable.into(),
        refinement: refinement.into(),
        delta,
        base,
        refined,
        rel_change: f64::NAN,
        passed: false,
    }
}

/// Rerun the configured observables with every truncation dimension + 1
/// (and, for homodyne runs, half the internal SME step) and report the
/// largest relative change.
pub fn convergence_check(config: &ExperimentConfig, target: CheckTarget) -> Result<CheckReport> {
    let mut refined_cfg = config.clone();
    let (dims, mut entries) = match target {
        CheckTarget::Stabilize => {
            let dims = config.oscillator_dims();
            let fine: Vec<usize> = dims.iter().map(|d| d + 1).collect();
            let n0 = config.stabilize.n0;
            let mut entries = Vec::new();
            for x in check_points(config) {
                let p = config.oscillator.device(x, n0)?;
                let f = |d: &[usize]| -> Result<f64> {
                    let rho = oscillator_state(&p, config.tier, d, n0, &config.solver, &config.trajectories)?;
                    fock_fidelity(&rho, n0)
                };
                entries.push(entry("fidelity", "dims+1", x, f(&dims)?, f(&fine)?));
            }
            (dims, entries)
        }
        CheckTarget::Sync | CheckTarget::Homodyne => {
            let dims = config.pair_dims();
            refined_cfg.dims = dims.iter().map(|d| d + 1).collect();
            let mut entries = Vec::new();
            for x in check_points(config) {
                let (_, a) = coupled_point(config, config.coupling.j, x)?;
                let (_, b) = coupled_point(&refined_cfg, config.coupling.j, x)?;
                entries.push(entry("S", "dims+1", x, a.s, b.s));
                entries.push(entry("E_N", "dims+1", x, a.e_n, b.e_n));
            }
            (dims, entries)
        }
    };
    scaled(&mut entries);
    if target == CheckTarget::Homodyne {
        entries.push(sme_step_check(config)?);
    }
    // statistical entries are judged by their error bars, not by this
    let max_rel_change = entries
        .iter()
        .filter(|e| e.refinement == "dims+1")
        .map(|e| e.rel_change)
        .fold(0.0, f64::max);
    let passed = entries.iter().all(|e| e.passed);
    Ok(CheckReport {
        target,
        refined_dims: dims.iter().map(|d| d + 1).collect(),
        dims,
        entries,
        max_rel_change,
        passed,
    })
}

/// Equal-time conditioned correlation `κ²𝔼[⟨X₁⟩⟨X₂⟩]` at the middle sweep
/// point with the internal step and with half of it. Passes when the two
/// ensemble means agree within three combined standard errors.
fn sme_step_check(config: &ExperimentConfig) -> Result<CheckEntry> {
    if config.tier != Tier::Effective {
        return Err(Error::Config("homodyne runs use the effective tier".into()));
    }
    let t = &config.trajectories;
    let xs = config.sweep.values();
    let x = xs[xs.len() / 2];
    let model = measured_model(config, x)?;
    let ss = solve_steady(&model, Some(&[1, 1]), &config.solver, t)?;
    let space = model.space().clone();
    let (_, e) = config.effective_oscillator()?;
    let rate = config.coupling.measured_rate.unwrap_or(e.kappa_a);
    let ch = [
        MeasuredChannel {
            rate,
            op: destroy(&space, 0)?,
            phase: config.coupling.lo_phases[0],
        },
        MeasuredChannel {
            rate,
            op: destroy(&space, 1)?,
            phase: config.coupling.lo_phases[1],
        },
    ];
    let sys = SmeSystem::new(&model, &ch)?;
    let n = ((t.t_avg / t.dt_out).round() as usize).max(2);
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * t.dt_out).collect();
    let n_traj = t.n_traj.clamp(1, 200);
    let run = |rate_factor: f64| -> Result<(f64, f64)> {
        let control = StepControl {
            rate_factor,
            dt_max: None,
        };
        let res = run_ensemble(n_traj, |i| {
            sme_homodyne_trajectory_with(&sys, &ss.rho, &grid, trajectory_seed(t.seed, i), i, &control, |_, _| {})
        });
        let recs = collect_successes(res, t.min_success)?;
        let vals: Vec<f64> = recs
            .iter()
            .map(|r| {
                rate * rate
                    * r.x_expect[0]
                        .iter()
                        .zip(&r.x_expect[1])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                    / n as f64
            })
            .collect();
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        Ok((mean, (var / m).sqrt()))
    };
    let (a, sa) = run(config.solver.rate_factor)?;
    let (b, sb) = run(2.0 * config.solver.rate_factor)?;
    let bound = 3.0 * sa.hypot(sb);
    let mut en = entry("xx_conditioned", "dt/2", x, a, b);
    en.rel_change = (b - a).abs() / a.abs().max(1e-12);
    en.passed = (b - a).abs() <= bound.max(1e-12 * a.abs());
    Ok(en)
}
