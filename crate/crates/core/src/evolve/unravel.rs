//! Pure-state diffusive unraveling of a Lindblad model
//!
//! `dψ = [G + Σ xᵢcᵢ − ½Σ xᵢ²]ψ dt + Σ (cᵢ − xᵢ)ψ dWᵢ`, with `cᵢ` the
//! rate-weighted collapse operators, `G = −iH − ½Σ cᵢ†cᵢ` and
//! `xᵢ = Re⟨cᵢ⟩`. The ensemble average of `|ψ⟩⟨ψ|` follows the master
//! equation. The diagonal of `G` is integrated exactly (Strang splitting).

use faer::Mat;
use rayon::prelude::*;

use super::rng::{trajectory_seed, NoiseSource};
use super::sme::StepControl;
use super::steady::{repair, SteadyMethod, SteadyState};
use super::LindbladModel;
use crate::qspace::{CscMatrix, DensityMatrix, FockSpace};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Precomputed operators of the unraveling.
pub struct PureSystem {
    d: usize,
    gdiag: Vec<C64>,
    goff: CscMatrix,
    cs: Vec<CscMatrix>,
    rate_scale: f64,
}

impl PureSystem {
    pub fn new(model: &LindbladModel) -> Self {
        let d = model.space().dim();
        let mut cdc = CscMatrix::zeros(d, d);
        let mut cs = Vec::new();
        for (rate, c) in model.collapses() {
            if *rate > 0.0 {
                let sc = c.matrix().scale(C64::new(rate.sqrt(), 0.0));
                cdc = cdc.add(&sc.adjoint().matmul(&sc));
                cs.push(sc);
            }
        }
        let g = model
            .hamiltonian()
            .matrix()
            .axpby(C64::new(0.0, -1.0), &cdc, C64::new(-0.5, 0.0));
        let gdiag = g.diagonal();
        let goff = g.without_diagonal();
        let crate_max = cs.iter().map(|c| c.norm_inf().powi(2)).fold(0.0, f64::max);
        let rate_scale = goff.norm_inf().max(crate_max);
        PureSystem {
            d,
            gdiag,
            goff,
            cs,
            rate_scale,
        }
    }

    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    pub fn n_noise(&self) -> usize {
        self.cs.len()
    }
}

/// One pure-state trajectory.
pub struct PureTrajectory<'a> {
    sys: &'a PureSystem,
    pub psi: Vec<C64>,
    half: Vec<C64>,
    scratch: Vec<C64>,
    cpsi: Vec<Vec<C64>>,
    x: Vec<f64>,
    dw: Vec<f64>,
    noise: NoiseSource,
    dt: f64,
}

impl<'a> PureTrajectory<'a> {
    pub fn new(sys: &'a PureSystem, psi0: &[C64], dt: f64, seed: u64) -> Result<Self> {
        if psi0.len() != sys.d {
            return Err(Error::ShapeMismatch("initial state dimension".into()));
        }
        let nc = sys.cs.len();
        let mut t = PureTrajectory {
            sys,
            psi: psi0.to_vec(),
            half: sys.gdiag.iter().map(|g| (g * (0.5 * dt)).exp()).collect(),
            scratch: vec![ZERO; sys.d],
            cpsi: vec![vec![ZERO; sys.d]; nc],
            x: vec![0.0; nc],
            dw: vec![0.0; nc],
            noise: NoiseSource::new(seed, nc),
            dt,
        };
        t.normalize()?;
        Ok(t)
    }

    fn normalize(&mut self) -> Result<()> {
        let n2: f64 = self.psi.iter().map(|z| z.norm_sqr()).sum();
        if !(n2 > 1e-12) || !n2.is_finite() {
            return Err(Error::Solver(format!("state norm collapsed to {n2:e}")));
        }
        let inv = 1.0 / n2.sqrt();
        self.psi.iter_mut().for_each(|z| *z *= inv);
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        let sys = self.sys;
        let dt = self.dt;
        self.psi.iter_mut().zip(&self.half).for_each(|(p, h)| *p *= h);
        self.noise.increments(dt, &mut self.dw);
        for (i, c) in sys.cs.iter().enumerate() {
            c.mul_vec_into(&self.psi, &mut self.cpsi[i]);
            let e: C64 = self.psi.iter().zip(&self.cpsi[i]).map(|(p, q)| p.conj() * q).sum();
            self.x[i] = e.re;
        }
        sys.goff.mul_vec_into(&self.psi, &mut self.scratch);
        let drift_diag: f64 = -0.5 * self.x.iter().map(|x| x * x).sum::<f64>() * dt;
        let shift: f64 = self.x.iter().zip(&self.dw).map(|(x, w)| x * w).sum();
        for k in 0..sys.d {
            let mut inc = self.scratch[k] * dt + self.psi[k] * (drift_diag - shift);
            for i in 0..sys.cs.len() {
                inc += self.cpsi[i][k] * (self.x[i] * dt + self.dw[i]);
            }
            self.psi[k] += inc;
        }
        self.psi.iter_mut().zip(&self.half).for_each(|(p, h)| *p *= h);
        self.normalize()
    }
}

/// Settings of [`steady_state_trajectory_average_with`].
#[derive(Clone, Debug)]
pub struct TrajectoryAverage {
    pub n_traj: usize,
    pub t_burn: f64,
    pub t_avg: f64,
    pub seed: u64,
    /// Modes of the reduced state to accumulate; `None` keeps all.
    pub keep: Option<Vec<usize>>,
    /// Accumulate `|ψ⟩⟨ψ|` every this many internal steps.
    pub sample_every: usize,
    pub control: StepControl,
    /// Minimum fraction of trajectories that must succeed.
    pub min_success: f64,
    /// Initial pure state; defaults to the vacuum.
    pub psi0: Option<Vec<C64>>,
}

impl TrajectoryAverage {
    pub fn new(n_traj: usize, t_burn: f64, t_avg: f64, seed: u64) -> Self {
        TrajectoryAverage {
            n_traj,
            t_burn,
            t_avg,
            seed,
            keep: None,
            sample_every: 10,
            control: StepControl::default(),
            min_success: 0.9,
            psi0: None,
        }
    }
}

/// Maps a full index to `(kept index, traced index)`.
fn split_indices(space: &FockSpace, keep: &[usize]) -> Result<(FockSpace, usize, Vec<(usize, usize)>)> {
    let kept = space.subspace(keep)?;
    let rest: Vec<usize> = (0..space.n_modes()).filter(|m| !keep.contains(m)).collect();
    let rest_dims: Vec<usize> = rest.iter().map(|&m| space.dims()[m]).collect();
    let rest_dim: usize = rest_dims.iter().product();
    let map = (0..space.dim())
        .map(|idx| {
            let occ = space.occupations(idx);
            let ko: Vec<usize> = keep.iter().map(|&m| occ[m]).collect();
            let mut r = 0;
            for (j, &m) in rest.iter().enumerate() {
                r = r * rest_dims[j] + occ[m];
            }
            (kept.index(&ko), r)
        })
        .collect();
    Ok((kept, rest_dim, map))
}

/// Time average of one trajectory's (reduced) state after the burn-in.
fn average_one(
    sys: &PureSystem,
    opts: &TrajectoryAverage,
    psi0: &[C64],
    dt: f64,
    seed: u64,
    split: &(usize, usize, &[(usize, usize)]),
) -> Result<Mat<C64>> {
    let (kd, rd, map) = *split;
    let mut tr = PureTrajectory::new(sys, psi0, dt, seed)?;
    let burn = (opts.t_burn / dt).ceil() as usize;
    let avg = ((opts.t_avg / dt).ceil() as usize).max(1);
    for _ in 0..burn {
        tr.step()?;
    }
    let mut acc = Mat::<C64>::zeros(kd, kd);
    let mut m = Mat::<C64>::zeros(kd, rd);
    let mut samples = 0usize;
    let every = opts.sample_every.max(1);
    for s in 0..avg {
        tr.step()?;
        if s % every != 0 {
            continue;
        }
        for (idx, &(ki, ri)) in map.iter().enumerate() {
            m[(ki, ri)] = tr.psi[idx];
        }
        // acc += M M†
        for j in 0..kd {
            for i in 0..kd {
                let mut z = ZERO;
                for r in 0..rd {
                    z += m[(i, r)] * m[(j, r)].conj();
                }
                acc[(i, j)] += z;
            }
        }
        samples += 1;
    }
    let inv = C64::new(1.0 / samples as f64, 0.0);
    Ok(Mat::from_fn(kd, kd, |i, j| acc[(i, j)] * inv))
}

/// Steady state as the trajectory average of long-time temporal averages.
pub fn steady_state_trajectory_average_with(model: &LindbladModel, opts: &TrajectoryAverage) -> Result<SteadyState> {
    if opts.n_traj == 0 {
        return Err(Error::InvalidParams("n_traj must be ≥ 1".into()));
    }
    if !(opts.t_burn >= 0.0) || !(opts.t_avg > 0.0) {
        return Err(Error::InvalidParams("need t_burn ≥ 0 and t_avg > 0".into()));
    }
    let space = model.space();
    let keep: Vec<usize> = opts.keep.clone().unwrap_or_else(|| (0..space.n_modes()).collect());
    let (kept, rd, map) = split_indices(space, &keep)?;
    let sys = PureSystem::new(model);
    let dt = 1.0 / opts.control.substeps(1.0, sys.rate_scale) as f64;
    let mut psi0 = opts.psi0.clone().unwrap_or_else(|| {
        let mut v = vec![ZERO; space.dim()];
        v[0] = C64::new(1.0, 0.0);
        v
    });
    if psi0.len() != space.dim() {
        return Err(Error::ShapeMismatch("initial state dimension".into()));
    }
    let n2: f64 = psi0.iter().map(|z| z.norm_sqr()).sum();
    psi0.iter_mut().for_each(|z| *z /= n2.sqrt());
    let split = (kept.dim(), rd, &map[..]);

    let results: Vec<Result<Mat<C64>>> = (0..opts.n_traj as u64)
        .into_par_iter()
        .map(|i| average_one(&sys, opts, &psi0, dt, trajectory_seed(opts.seed, i), &split))
        .collect();
    let ok: Vec<&Mat<C64>> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let need = (opts.min_success * opts.n_traj as f64).ceil() as usize;
    if ok.len() < need {
        return Err(Error::FailureRate {
            succeeded: ok.len(),
            total: opts.n_traj,
            required: opts.min_success,
        });
    }
    let kd = kept.dim();
    let mut sum = Mat::<C64>::zeros(kd, kd);
    for m in &ok {
        sum = &sum + *m;
    }
    let (rho, clip) = repair(sum)?;
    let rho = DensityMatrix::new_unchecked(&kept, rho)?;
    let residual = if keep.len() == space.n_modes() && keep.iter().enumerate().all(|(i, &m)| i == m) {
        let l = model.liouvillian();
        let r = l
            .matrix()
            .mul_vec(&rho.to_vec())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        r / l.norm_inf()
    } else {
        f64::NAN
    };
    Ok(SteadyState {
        rho,
        residual,
        method: SteadyMethod::TrajectoryAverage,
        clip,
    })
}

/// Trajectory-average steady state of the full space starting from vacuum.
pub fn steady_state_trajectory_average(
    model: &LindbladModel,
    n_traj: usize,
    t_burn: f64,
    t_avg: f64,
    seed: u64,
) -> Result<SteadyState> {
    steady_state_trajectory_average_with(model, &TrajectoryAverage::new(n_traj, t_burn, t_avg, seed))
}
