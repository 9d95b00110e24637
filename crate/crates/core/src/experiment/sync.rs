use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Tier};
use super::output::{Csv, Field, ResultDir, SeedInfo};
use super::{require_success, solve_steady};
use crate::evolve::{steady_state_trajectory_average_with, LindbladModel, StepControl, TrajectoryAverage};
use crate::measures::{hinton_export, log_negativity, relative_phase_distribution, sync_from_phase};
use crate::models::{
    build_coupled_effective_model, build_displaced_pair_model, compute_displacements, CircuitParams, DisplacedTerms,
    EffectiveCoupling,
};
use crate::qspace::{DensityMatrix, FockSpace};
use crate::{Error, Result};

/// Observables of the two-oscillator steady state at one detuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncPoint {
    pub j: f64,
    /// Detuning between the oscillators: `Δ̂₁ − Δ̂₂` for the effective tier,
    /// the bare `Δ₁^a − Δ₂^a` otherwise.
    pub delta: f64,
    pub s: f64,
    /// `S/|J|`; NaN at `J = 0`.
    pub s_over_abs_j: f64,
    pub e_n: f64,
    /// `⟨1,1|ρ|1,1⟩`
    pub p11: f64,
    /// `|⟨1,1|ρ|0,2⟩|`
    pub c11_02: f64,
    /// `|⟨1,1|ρ|2,0⟩|`
    pub c11_20: f64,
    pub error: Option<String>,
}

/// The largest `S` on each side of zero detuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peaks {
    pub minus: (f64, f64),
    pub plus: (f64, f64),
    pub spacing: f64,
    /// `S` at the grid point closest to zero detuning.
    pub s_zero: f64,
    pub delta_zero: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncCurve {
    pub j: f64,
    pub points: Vec<SyncPoint>,
    pub peaks: Option<Peaks>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub index: usize,
    pub j: f64,
    pub delta: f64,
    pub label: String,
    pub s: f64,
    pub e_n: f64,
}

/// Where the `|1,1⟩ ↔ |2,0⟩` (`+`) and `|1,1⟩ ↔ |0,2⟩` (`−`) resonances sit
/// without coupling (`±2K`) and after the splitting by `J` (`±(2K ± J)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Markers {
    pub two_k: f64,
    pub split: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncSummary {
    pub name: String,
    pub tier: Tier,
    pub dims: Vec<usize>,
    pub axis: String,
    pub k: f64,
    pub markers: Markers,
    pub curves: Vec<SyncCurve>,
    pub flagged: Vec<Flagged>,
    pub succeeded: usize,
    pub total: usize,
}

/// Largest `S` for negative and for positive detuning.
pub fn find_peaks(xs: &[f64], s: &[f64]) -> Option<Peaks> {
    let best = |f: &dyn Fn(f64) -> bool| {
        xs.iter()
            .zip(s)
            .filter(|(x, v)| f(**x) && v.is_finite())
            .fold(None, |acc: Option<(f64, f64)>, (&x, &v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((x, v)),
            })
    };
    let minus = best(&|x| x < 0.0)?;
    let plus = best(&|x| x > 0.0)?;
    let (iz, _) = xs.iter().enumerate().min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
    Some(Peaks {
        minus,
        plus,
        spacing: plus.0 - minus.0,
        s_zero: s[iz],
        delta_zero: xs[iz],
    })
}

pub(crate) fn observables(rho: &DensityMatrix, j: f64, delta: f64) -> Result<SyncPoint> {
    let space = rho.space();
    let dims = space.dims();
    if dims.len() != 2 || dims[0] < 3 || dims[1] < 3 {
        return Err(Error::InvalidSpace("need two modes with at least 3 levels".into()));
    }
    let pd = relative_phase_distribution(rho)?;
    let s = sync_from_phase(&pd);
    let (i11, i02, i20) = (space.index(&[1, 1]), space.index(&[0, 2]), space.index(&[2, 0]));
    Ok(SyncPoint {
        j,
        delta,
        s,
        s_over_abs_j: if j == 0.0 { f64::NAN } else { s / j.abs() },
        e_n: log_negativity(rho, (dims[0], dims[1]))?,
        p11: rho.get(i11, i11).re,
        c11_02: rho.get(i11, i02).norm(),
        c11_20: rho.get(i11, i20).norm(),
        error: None,
    })
}

/// Two effective oscillators at `Δ̂₁,₂ = Δ̂ ± delta/2` around the operating
/// point, coupled with strength `j`. Collapse channel 0 is the loss of
/// `a₁`.
pub fn coupled_effective_model(config: &ExperimentConfig, j: f64, delta: f64) -> Result<LindbladModel> {
    coupled_effective_model_rotating(config, j, delta, 0.0)
}

/// Frequency both oscillators share at the operating point: `Δ̂` plus the
/// coupling shift `J|α|²`. Homodyne detection demodulates at this
/// frequency unless `coupling.lo_frequency` overrides it.
pub fn common_frequency(config: &ExperimentConfig, j: f64) -> Result<f64> {
    let (_, e) = config.effective_oscillator()?;
    Ok(e.delta_hat + j * e.alpha.norm_sqr())
}

/// The coupled effective model seen from a frame rotating at `omega`
/// relative to the drives, i.e. with `ω(n₁ + n₂)` removed from the
/// Hamiltonian. Without squeezing the model conserves `n₁ + n₂` up to
/// the dissipators, so this changes the time dependence of coherences but
/// not the steady state.
pub fn coupled_effective_model_rotating(
    config: &ExperimentConfig,
    j: f64,
    delta: f64,
    omega: f64,
) -> Result<LindbladModel> {
    let dims = config.pair_dims();
    if dims.len() != 2 {
        return Err(Error::Config(format!(
            "coupled effective model needs 2 dims, got {}",
            dims.len()
        )));
    }
    let (_, e) = config.effective_oscillator()?;
    let (mut e1, mut e2) = (e.clone(), e.clone());
    e1.delta_hat = e.delta_hat + 0.5 * delta;
    e2.delta_hat = e.delta_hat - 0.5 * delta;
    if omega != 0.0 {
        if e.squeezing {
            return Err(Error::Config("a rotating frame needs the squeezing term off".into()));
        }
        e1.delta_hat -= omega;
        e2.delta_hat -= omega;
    }
    let mut coupling = EffectiveCoupling::new(j, e.alpha, e.alpha);
    coupling.cross_kerr = config.coupling.cross_kerr;
    let space = FockSpace::with_cap(&dims, config.dim_cap)?;
    build_coupled_effective_model(&e1, &e2, &coupling, &space)
}

/// Steady state of the two Kerr modes at coupling `j` and detuning `delta`,
/// with its observables.
pub fn coupled_point(config: &ExperimentConfig, j: f64, delta: f64) -> Result<(DensityMatrix, SyncPoint)> {
    let c = &config.coupling;
    let dims = config.pair_dims();
    let rho = match config.tier {
        Tier::Effective => {
            let m = coupled_effective_model(config, j, delta)?;
            solve_steady(&m, Some(&[1, 1]), &config.solver, &config.trajectories)?.rho
        }
        Tier::Full | Tier::Displaced => {
            if dims.len() != 6 {
                return Err(Error::Config(format!(
                    "coupled circuit needs 6 dims, got {}",
                    dims.len()
                )));
            }
            // Δ₂^a is swept with Δ₁^a fixed
            let p1 = config.oscillator.device(c.operating_delta_a, c.n0)?;
            let p2 = config.oscillator.device(c.operating_delta_a - delta, c.n0)?;
            let frames = [compute_displacements(&p1)?, compute_displacements(&p2)?];
            let cp = CircuitParams { osc: [p1, p2], j };
            let terms = if config.tier == Tier::Full {
                DisplacedTerms::all()
            } else {
                DisplacedTerms::rwa()
            };
            let space = FockSpace::with_cap(&dims, config.dim_cap)?;
            let m = build_displaced_pair_model(&cp, &frames, terms, &space)?;
            let t = &config.trajectories;
            let mut opts = TrajectoryAverage::new(t.n_traj, t.t_burn, t.t_avg, t.seed);
            opts.keep = Some(vec![0, 3]);
            opts.min_success = t.min_success;
            opts.control = StepControl {
                rate_factor: config.solver.rate_factor,
                dt_max: None,
            };
            steady_state_trajectory_average_with(&m, &opts)?.rho
        }
    };
    let pt = observables(&rho, j, delta)?;
    Ok((rho, pt))
}

/// Synchronization measure, negativity and Hinton data versus detuning for
/// every configured coupling.
pub fn run_sync_sweep(config: &ExperimentConfig) -> Result<SyncSummary> {
    let c = &config.coupling;
    let xs = config.sweep.values();
    let mut js = c.j_values.clone();
    if !js.contains(&c.j) {
        js.push(c.j);
    }
    let k = config.oscillator.device(c.operating_delta_a, c.n0)?.k;

    let mut curves = Vec::new();
    let mut hinton_states: Vec<Option<DensityMatrix>> = Vec::new();
    let (mut ok, mut total) = (0, 0);
    for &j in &js {
        let res: Vec<(SyncPoint, Option<DensityMatrix>)> = xs
            .par_iter()
            .map(|&x| match coupled_point(config, j, x) {
                Ok((rho, pt)) => (pt, Some(rho)),
                Err(e) => {
                    log::warn!("J = {j}, Δ = {x} failed: {e}");
                    (
                        SyncPoint {
                            j,
                            delta: x,
                            s: f64::NAN,
                            s_over_abs_j: f64::NAN,
                            e_n: f64::NAN,
                            p11: f64::NAN,
                            c11_02: f64::NAN,
                            c11_20: f64::NAN,
                            error: Some(e.to_string()),
                        },
                        None,
                    )
                }
            })
            .collect();
        total += res.len();
        ok += res.iter().filter(|r| r.1.is_some()).count();
        let (points, states): (Vec<SyncPoint>, Vec<Option<DensityMatrix>>) = res.into_iter().unzip();
        let s: Vec<f64> = points.iter().map(|p| p.s).collect();
        let peaks = find_peaks(&xs, &s);
        if j == c.j {
            hinton_states = states;
        }
        curves.push(SyncCurve { j, points, peaks });
    }

    let mut out = ResultDir::create(config)?;
    let mut csv = Csv::new(&[
        "j",
        "delta",
        "s",
        "s_over_abs_j",
        "e_n",
        "p11",
        "c11_02",
        "c11_20",
        "status",
    ]);
    for cv in &curves {
        for p in &cv.points {
            csv.row(&[
                Field::F(p.j),
                Field::F(p.delta),
                Field::F(p.s),
                Field::F(p.s_over_abs_j),
                Field::F(p.e_n),
                Field::F(p.p11),
                Field::F(p.c11_02),
                Field::F(p.c11_20),
                Field::S(if p.error.is_none() { "ok" } else { "failed" }),
            ]);
        }
    }
    out.write("sweep.csv", &csv.into_bytes())?;

    // flagged points of the Hinton coupling: zero detuning, both peaks and
    // any extra requested detunings
    let curve = curves.iter().find(|cv| cv.j == c.j).expect("hinton coupling swept");
    let mut flags: Vec<(f64, String, Option<DensityMatrix>)> = Vec::new();
    if let Some(pk) = &curve.peaks {
        let at = |x: f64| xs.iter().position(|&v| v == x).and_then(|i| hinton_states[i].clone());
        flags.push((pk.minus.0, "peak_minus".into(), at(pk.minus.0)));
        flags.push((pk.delta_zero, "zero".into(), at(pk.delta_zero)));
        flags.push((pk.plus.0, "peak_plus".into(), at(pk.plus.0)));
    }
    for &x in &c.flag_points {
        let rho = match xs.iter().position(|&v| v == x) {
            Some(i) => hinton_states[i].clone(),
            None => coupled_point(config, c.j, x).ok().map(|r| r.0),
        };
        flags.push((x, "requested".into(), rho));
    }
    let mut flagged = Vec::new();
    for (x, label, rho) in flags {
        let Some(rho) = rho else { continue };
        let i = flagged.len();
        let pd = relative_phase_distribution(&rho)?;
        let mut pc = Csv::new(&["phi", "p"]);
        for (phi, v) in pd.phis.iter().zip(&pd.values) {
            pc.row(&[Field::F(*phi), Field::F(*v)]);
        }
        out.write(&format!("pphi_{i}.csv"), &pc.into_bytes())?;
        let name = format!("hinton_{i}.csv");
        hinton_export(&rho, &out.path().join(&name))?;
        out.register(&name);
        let obs = observables(&rho, c.j, x)?;
        flagged.push(Flagged {
            index: i,
            j: c.j,
            delta: x,
            label,
            s: obs.s,
            e_n: obs.e_n,
        });
    }

    let two_k = 2.0 * k;
    let aj = c.j.abs();
    let summary = SyncSummary {
        name: config.name.clone(),
        tier: config.tier,
        dims: config.pair_dims(),
        axis: if config.tier == Tier::Effective {
            "delta_hat"
        } else {
            "delta"
        }
        .into(),
        k,
        markers: Markers {
            two_k,
            split: vec![-two_k - aj, -two_k + aj, two_k - aj, two_k + aj],
        },
        curves,
        flagged,
        succeeded: ok,
        total,
    };
    out.write_json("summary.json", &summary)?;
    let seeds = if config.tier == Tier::Effective {
        SeedInfo::none()
    } else {
        SeedInfo {
            master_seed: Some(config.trajectories.seed),
            rule: "trajectory i uses trajectory_seed(master, i) at every sweep point".into(),
        }
    };
    out.finish(config, "sync-sweep", seeds)?;
    require_success(ok, total, config.trajectories.min_success)?;
    Ok(summary)
}
