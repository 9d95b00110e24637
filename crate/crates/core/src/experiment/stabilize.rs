use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Tier};
use super::optimize::{optimize_detunings, OptimumSummary};
use super::output::{Csv, Field, ResultDir, SeedInfo};
use super::require_success;
use crate::measures::{photon_distribution, wigner};
use crate::models::compute_displacements;
use crate::qspace::DensityMatrix;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizePoint {
    pub index: usize,
    pub delta_a: f64,
    /// Renormalized Kerr detuning at the optimum.
    pub delta_a_hat: Option<f64>,
    pub optimum: Option<OptimumSummary>,
    pub photon_distribution: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizeSummary {
    pub name: String,
    pub tier: Tier,
    pub dims: Vec<usize>,
    pub n0: usize,
    pub points: Vec<StabilizePoint>,
    /// Sweep indices with a `wigner_<i>.csv`.
    pub wigner_points: Vec<usize>,
    pub fidelity_min: f64,
    pub fidelity_max: f64,
    pub succeeded: usize,
}

/// Fidelity of the target Fock state versus `Δ^a`, with the linear
/// detunings optimized at every point.
pub fn run_stabilize(config: &ExperimentConfig) -> Result<StabilizeSummary> {
    let st = &config.stabilize;
    let dims = config.oscillator_dims();
    let xs = config.sweep.values();
    let results: Vec<(StabilizePoint, Option<DensityMatrix>)> = xs
        .par_iter()
        .enumerate()
        .map(|(i, &da)| {
            let run = || -> Result<(StabilizePoint, DensityMatrix)> {
                let p = config.oscillator.device(da, st.n0)?;
                let opt = optimize_detunings(&p, config.tier, &dims, st, &config.solver, &config.trajectories)?;
                let mut q = p.clone();
                q.delta_c = opt.delta_c;
                q.delta_d = opt.delta_d;
                let frame = compute_displacements(&q)?;
                log::info!("Δa = {da}: F = {:.4} after {} evaluations", opt.fidelity, opt.evals);
                Ok((
                    StabilizePoint {
                        index: i,
                        delta_a: da,
                        delta_a_hat: Some(frame.delta_a_hat),
                        optimum: Some(opt.summary()),
                        photon_distribution: photon_distribution(&opt.rho)?,
                        error: None,
                    },
                    opt.rho,
                ))
            };
            match run() {
                Ok((pt, rho)) => (pt, Some(rho)),
                Err(e) => {
                    log::warn!("Δa = {da} failed: {e}");
                    (
                        StabilizePoint {
                            index: i,
                            delta_a: da,
                            delta_a_hat: None,
                            optimum: None,
                            photon_distribution: Vec::new(),
                            error: Some(e.to_string()),
                        },
                        None,
                    )
                }
            }
        })
        .collect();

    let mut out = ResultDir::create(config)?;
    let mut csv = Csv::new(&[
        "delta_a",
        "delta_a_hat",
        "delta_c",
        "delta_d",
        "seed_delta_c",
        "seed_delta_d",
        "fidelity",
        "seed_fidelity",
        "evals",
        "status",
    ]);
    for (pt, _) in &results {
        let o = pt.optimum.as_ref();
        let f = |g: fn(&OptimumSummary) -> f64| Field::F(o.map(g).unwrap_or(f64::NAN));
        csv.row(&[
            Field::F(pt.delta_a),
            Field::F(pt.delta_a_hat.unwrap_or(f64::NAN)),
            f(|o| o.delta_c),
            f(|o| o.delta_d),
            f(|o| o.seed_delta_c),
            f(|o| o.seed_delta_d),
            f(|o| o.fidelity),
            f(|o| o.seed_fidelity),
            Field::U(o.map(|o| o.evals).unwrap_or(0)),
            Field::S(if pt.error.is_none() { "ok" } else { "failed" }),
        ]);
    }
    out.write("sweep.csv", &csv.into_bytes())?;

    let wigner_points: Vec<usize> = if st.wigner_points.is_empty() {
        vec![xs.len() / 2]
    } else {
        st.wigner_points.iter().copied().filter(|&i| i < xs.len()).collect()
    };
    let grid: Vec<f64> = (0..st.wigner_grid)
        .map(|k| -st.wigner_extent + 2.0 * st.wigner_extent * k as f64 / (st.wigner_grid - 1) as f64)
        .collect();
    let mut with_wigner = Vec::new();
    for &i in &wigner_points {
        let Some(rho) = &results[i].1 else { continue };
        let w = wigner(rho, &grid, &grid)?;
        let mut c = Csv::new(&["x", "p", "w"]);
        for (r, &p) in grid.iter().enumerate() {
            for (col, &x) in grid.iter().enumerate() {
                c.row(&[Field::F(x), Field::F(p), Field::F(w[(r, col)])]);
            }
        }
        out.write(&format!("wigner_{i}.csv"), &c.into_bytes())?;
        with_wigner.push(i);
    }

    let fids: Vec<f64> = results
        .iter()
        .filter_map(|(p, _)| p.optimum.as_ref().map(|o| o.fidelity))
        .collect();
    let summary = StabilizeSummary {
        name: config.name.clone(),
        tier: config.tier,
        dims,
        n0: st.n0,
        succeeded: fids.len(),
        fidelity_min: fids.iter().cloned().fold(f64::INFINITY, f64::min),
        fidelity_max: fids.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        points: results.into_iter().map(|(p, _)| p).collect(),
        wigner_points: with_wigner,
    };
    out.write_json("summary.json", &summary)?;
    out.finish(config, "stabilize", SeedInfo::none())?;
    require_success(summary.succeeded, xs.len(), config.trajectories.min_success)?;
    Ok(summary)
}
