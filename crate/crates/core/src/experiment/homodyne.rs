use std::io::BufWriter;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Tier};
use super::output::{Csv, Field, ResultDir, SeedInfo};
use super::sync::{common_frequency, coupled_effective_model_rotating, observables};
use super::{require_success, solve_steady};
use crate::evolve::rng::trajectory_seed;
use crate::evolve::{
    collect_successes, internal_step, run_ensemble, sme_homodyne_trajectory_with, LindbladModel, MeasuredChannel,
    SmeSystem, StepControl, TrajectoryRecord,
};
use crate::measures::{cross_correlation, ensemble_xcorr, pearson, two_time_xcorr, EnsembleXCorr, XCorrResult};
use crate::qspace::destroy;
use crate::{Error, Result};

/// Individual-trajectory curves kept per point for plotting.
const SHOWN_TRAJECTORIES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodynePoint {
    pub index: usize,
    pub delta: f64,
    /// Synchronization measure of the steady state the ensemble starts in.
    pub s: f64,
    /// `max_τ |𝔼[C_τ(J₁, J₂)]|` from the noisy currents.
    pub max_current: f64,
    /// `max_τ κ₁κ₂|𝔼[C_τ(⟨X₁⟩, ⟨X₂⟩)]|`; the headline curve.
    pub max_conditioned: f64,
    /// Same maximum from the two-time correlation of the steady state.
    pub max_two_time: f64,
    pub argmax_tau: f64,
    /// `max_τ |current − conditioned|`
    pub gap: f64,
    /// Largest standard error of the current curve.
    pub current_stderr: f64,
    pub succeeded: usize,
    pub internal_dt: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneSummary {
    pub name: String,
    pub j: f64,
    pub dims: Vec<usize>,
    pub rates: (f64, f64),
    pub lo_frequency: f64,
    pub n_traj: usize,
    pub dt_out: f64,
    pub samples: usize,
    pub tau_max: f64,
    pub points: Vec<HomodynePoint>,
    /// Pearson correlation of each max-xcorr curve with `S`.
    pub pearson_conditioned: f64,
    pub pearson_current: f64,
    pub pearson_two_time: f64,
    /// Conditioned max-xcorr at the point nearest zero detuning over its
    /// largest value.
    pub dip_ratio: f64,
    pub succeeded: usize,
    pub total: usize,
}

struct PointData {
    point: HomodynePoint,
    xcorr: Option<(EnsembleXCorr, XCorrResult, Vec<XCorrResult>)>,
    records: Vec<TrajectoryRecord>,
}

/// Per-point master seed; trajectory `i` of point `p` then uses
/// `trajectory_seed(point_seed(master, p), i)`.
fn point_seed(master: u64, point: usize) -> u64 {
    trajectory_seed(master, point as u64)
}

/// Local-oscillator frequency of both channels.
pub(crate) fn lo_frequency(config: &ExperimentConfig) -> Result<f64> {
    match config.coupling.lo_frequency {
        Some(w) => Ok(w),
        None => common_frequency(config, config.coupling.j),
    }
}

/// The pair as seen by the homodyne detectors: in the frame of the local
/// oscillator, so `⟨X_i⟩` oscillates at the offset from the LO rather than
/// at the (much larger) detuning from the drives.
pub(crate) fn measured_model(config: &ExperimentConfig, delta: f64) -> Result<LindbladModel> {
    coupled_effective_model_rotating(config, config.coupling.j, delta, lo_frequency(config)?)
}

fn run_point(config: &ExperimentConfig, index: usize, delta: f64, keep_records: bool) -> Result<PointData> {
    let c = &config.coupling;
    let t = &config.trajectories;
    let model = measured_model(config, delta)?;
    let ss = solve_steady(&model, Some(&[1, 1]), &config.solver, t)?;
    let obs = observables(&ss.rho, c.j, delta)?;
    let space = model.space().clone();
    let (_, e) = config.effective_oscillator()?;
    let rate = c.measured_rate.unwrap_or(e.kappa_a);
    let channels = [
        MeasuredChannel {
            rate,
            op: destroy(&space, 0)?,
            phase: c.lo_phases[0],
        },
        MeasuredChannel {
            rate,
            op: destroy(&space, 1)?,
            phase: c.lo_phases[1],
        },
    ];
    let sys = SmeSystem::new(&model, &channels)?;
    let control = StepControl {
        rate_factor: config.solver.rate_factor,
        dt_max: None,
    };
    let n = (t.t_avg / t.dt_out).round() as usize;
    if n < 2 {
        return Err(Error::Config("record needs at least two samples".into()));
    }
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * t.dt_out).collect();
    let master = point_seed(t.seed, index);
    let results = run_ensemble(t.n_traj, |i| {
        sme_homodyne_trajectory_with(&sys, &ss.rho, &grid, trajectory_seed(master, i), i, &control, |_, _| {})
    });
    let records = collect_successes(results, t.min_success)?;
    let ex = ensemble_xcorr(&records, (rate, rate), t.tau_max)?;
    let lags = (t.tau_max / t.dt_out + 1e-9).floor() as usize;
    let qrt = two_time_xcorr(&model, &ss.rho, (&channels[0], &channels[1]), t.dt_out, n, lags)?;
    let shown = records
        .iter()
        .take(SHOWN_TRAJECTORIES)
        .map(|r| {
            let mut x = cross_correlation(&r.x_expect[0], &r.x_expect[1], t.dt_out, t.tau_max)?;
            x.values.iter_mut().for_each(|v| *v *= rate * rate);
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    let point = HomodynePoint {
        index,
        delta,
        s: obs.s,
        max_current: ex.max_current,
        max_conditioned: ex.max_conditioned,
        max_two_time: qrt.max_abs,
        argmax_tau: ex.argmax_tau,
        gap: ex.gap,
        current_stderr: ex.current_stderr.iter().cloned().fold(0.0, f64::max),
        succeeded: records.len(),
        internal_dt: internal_step(&sys, t.dt_out, &control),
        error: None,
    };
    log::info!(
        "Δ̂ = {delta}: S = {:.4}, max xcorr {:.4e} (two-time {:.4e})",
        point.s,
        point.max_conditioned,
        point.max_two_time
    );
    Ok(PointData {
        point,
        xcorr: Some((ex, qrt, shown)),
        records: if keep_records { records } else { Vec::new() },
    })
}

/// Homodyne cross-correlation of the two oscillators versus detuning. Each
/// trajectory starts in the steady state, so the records are stationary
/// from the first sample. Points run one after another; trajectories of a
/// point run in parallel.
pub fn run_homodyne_experiment(config: &ExperimentConfig) -> Result<HomodyneSummary> {
    if config.tier != Tier::Effective {
        return Err(Error::Config("homodyne runs use the effective tier".into()));
    }
    let t = &config.trajectories;
    if t.n_traj == 0 {
        return Err(Error::Config("n_traj must be ≥ 1".into()));
    }
    let xs = config.sweep.values();
    let mut out = ResultDir::create(config)?;
    let mut points = Vec::with_capacity(xs.len());
    let mut csv = Csv::new(&[
        "delta",
        "s",
        "max_conditioned",
        "max_current",
        "max_two_time",
        "argmax_tau",
        "gap",
        "current_stderr",
        "succeeded",
        "status",
    ]);
    for (i, &x) in xs.iter().enumerate() {
        let data = run_point(config, i, x, t.archive).unwrap_or_else(|e| {
            log::warn!("Δ̂ = {x} failed: {e}");
            PointData {
                point: HomodynePoint {
                    index: i,
                    delta: x,
                    s: f64::NAN,
                    max_current: f64::NAN,
                    max_conditioned: f64::NAN,
                    max_two_time: f64::NAN,
                    argmax_tau: f64::NAN,
                    gap: f64::NAN,
                    current_stderr: f64::NAN,
                    succeeded: 0,
                    internal_dt: f64::NAN,
                    error: Some(e.to_string()),
                },
                xcorr: None,
                records: Vec::new(),
            }
        });
        if let Some((ex, qrt, shown)) = &data.xcorr {
            let mut header = vec!["tau", "current", "current_stderr", "conditioned", "two_time"];
            let names: Vec<String> = (0..shown.len()).map(|k| format!("traj_{k}")).collect();
            header.extend(names.iter().map(|s| s.as_str()));
            let mut c = Csv::new(&header);
            for k in 0..ex.taus.len() {
                let mut row = vec![
                    Field::F(ex.taus[k]),
                    Field::F(ex.current[k]),
                    Field::F(ex.current_stderr[k]),
                    Field::F(ex.conditioned[k]),
                    Field::F(qrt.values[k]),
                ];
                row.extend(shown.iter().map(|s| Field::F(s.values[k])));
                c.row(&row);
            }
            out.write(&format!("xcorr_{i}.csv"), &c.into_bytes())?;
        }
        if t.archive && !data.records.is_empty() {
            let name = format!("traj_{i}.bin");
            let path = out.path().join(&name);
            let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(f);
            for r in &data.records {
                r.write_binary(&mut w).map_err(|e| Error::io(&path, e))?;
            }
            drop(w);
            out.register(&name);
        }
        let p = &data.point;
        csv.row(&[
            Field::F(p.delta),
            Field::F(p.s),
            Field::F(p.max_conditioned),
            Field::F(p.max_current),
            Field::F(p.max_two_time),
            Field::F(p.argmax_tau),
            Field::F(p.gap),
            Field::F(p.current_stderr),
            Field::U(p.succeeded),
            Field::S(if p.error.is_none() { "ok" } else { "failed" }),
        ]);
        points.push(data.point);
    }
    out.write("sweep.csv", &csv.into_bytes())?;

    let good: Vec<&HomodynePoint> = points.iter().filter(|p| p.error.is_none()).collect();
    let col = |f: fn(&HomodynePoint) -> f64| good.iter().map(|p| f(p)).collect::<Vec<f64>>();
    let s = col(|p| p.s);
    let cond = col(|p| p.max_conditioned);
    let dip_ratio = match good.iter().min_by(|a, b| a.delta.abs().total_cmp(&b.delta.abs())) {
        Some(z) => z.max_conditioned / cond.iter().cloned().fold(f64::MIN_POSITIVE, f64::max),
        None => f64::NAN,
    };
    let (_, e) = config.effective_oscillator()?;
    let rate = config.coupling.measured_rate.unwrap_or(e.kappa_a);
    let summary = HomodyneSummary {
        name: config.name.clone(),
        j: config.coupling.j,
        dims: config.pair_dims(),
        rates: (rate, rate),
        lo_frequency: lo_frequency(config)?,
        n_traj: t.n_traj,
        dt_out: t.dt_out,
        samples: (t.t_avg / t.dt_out).round() as usize,
        tau_max: t.tau_max,
        pearson_conditioned: pearson(&cond, &s),
        pearson_current: pearson(&col(|p| p.max_current), &s),
        pearson_two_time: pearson(&col(|p| p.max_two_time), &s),
        dip_ratio,
        succeeded: good.len(),
        total: points.len(),
        points,
    };
    out.write_json("summary.json", &summary)?;
    out.finish(
        config,
        "homodyne",
        SeedInfo {
            master_seed: Some(t.seed),
            rule: "trajectory i of point p uses trajectory_seed(trajectory_seed(master, p), i)".into(),
        },
    )?;
    require_success(summary.succeeded, summary.total, t.min_success)?;
    Ok(summary)
}
