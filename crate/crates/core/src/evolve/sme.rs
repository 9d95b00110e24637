//! Homodyne stochastic master equation
//!
//! `dρ = 𝓛ρ dt + Σᵢ √κᵢ 𝓗[cᵢ]ρ dWᵢ`, `Jᵢ dt = κᵢ⟨Xᵢ⟩ dt + √κᵢ dWᵢ`
//!
//! with `cᵢ = aᵢ e^{−iφᵢ}`, `Xᵢ = cᵢ + cᵢ†` and
//! `𝓗[c]ρ = cρ + ρc† − tr(cρ + ρc†)ρ`.
//!
//! The stepper is a Strang splitting: the diagonal of `𝓛` (free rotation
//! and diagonal decay) is applied exactly for half a step on either side of
//! a second-order Taylor step for the off-diagonal part plus an
//! Euler–Maruyama step for the measurement back-action. The state is Hermitized and its trace renormalized after
//! every step.

use serde::{Deserialize, Serialize};

use super::record::{check_uniform_grid, TrajectoryRecord};
use super::rng::NoiseSource;
use super::LindbladModel;
use crate::qspace::{CscMatrix, DensityMatrix, Operator};
use crate::{Error, Result, C64};

/// A monitored loss channel.
#[derive(Clone, Debug)]
pub struct MeasuredChannel {
    /// Measurement rate `κᵢ`; at most the rate of the matching collapse
    /// channel of the model.
    pub rate: f64,
    pub op: Operator,
    /// Local-oscillator phase; `0` measures `a + a†`.
    pub phase: f64,
}

/// Integration settings shared by the stochastic integrators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Internal step is at most `1 / (rate_factor · rate scale)`.
    pub rate_factor: f64,
    /// Optional hard upper bound on the internal step.
    pub dt_max: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rate_factor: 50.0,
            dt_max: None,
        }
    }
}

impl StepControl {
    /// Number of internal steps per output interval `dt_out`.
    pub fn substeps(&self, dt_out: f64, rate_scale: f64) -> usize {
        let mut dt = if rate_scale > 0.0 {
            1.0 / (self.rate_factor * rate_scale)
        } else {
            dt_out
        };
        if let Some(m) = self.dt_max {
            dt = dt.min(m);
        }
        ((dt_out / dt).ceil() as usize).max(1)
    }
}

/// Abort threshold on the trace before renormalization.
const TRACE_FLOOR: f64 = 1e-6;

/// Precomputed superoperators of one SME.
pub struct SmeSystem {
    d: usize,
    diag: Vec<C64>,
    off: CscMatrix,
    /// `vec(cρ + ρc†) = M vec(ρ)` per measured channel.
    meas: Vec<CscMatrix>,
    rates: Vec<f64>,
    rate_scale: f64,
}

impl SmeSystem {
    pub fn new(model: &LindbladModel, channels: &[MeasuredChannel]) -> Result<Self> {
        let space = model.space();
        let d = space.dim();
        for ch in channels {
            if ch.op.space() != space {
                return Err(Error::ShapeMismatch("measured operator on a different space".into()));
            }
            if !(ch.rate >= 0.0) {
                return Err(Error::NegativeRate(ch.rate));
            }
            let k = model.find_channel(&ch.op).ok_or_else(|| {
                Error::InvalidParams("measured channel is not a collapse channel of the model".into())
            })?;
            let model_rate = model.collapses()[k].0;
            if ch.rate > model_rate * (1.0 + 1e-12) {
                return Err(Error::InvalidParams(format!(
                    "measurement rate {} exceeds channel loss {model_rate}",
                    ch.rate
                )));
            }
        }
        let l = model.liouvillian();
        let lm = l.matrix();
        let diag = lm.diagonal();
        let off = lm.without_diagonal();
        let id = CscMatrix::identity(d);
        let meas: Vec<CscMatrix> = channels
            .iter()
            .map(|ch| {
                let c = ch.op.matrix().scale(C64::from_polar(1.0, -ch.phase));
                id.kron(&c).add(&c.conj().kron(&id))
            })
            .collect();
        let rates: Vec<f64> = channels.iter().map(|c| c.rate).collect();
        let kmax = rates.iter().cloned().fold(0.0, f64::max);
        let rate_scale = off.norm_inf().max(kmax);
        Ok(SmeSystem {
            d,
            diag,
            off,
            meas,
            rates,
            rate_scale,
        })
    }

    /// Rate that sets the internal step.
    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    fn trace(&self, v: &[C64]) -> C64 {
        (0..self.d).map(|k| v[k * (self.d + 1)]).sum()
    }
}

/// State of one running SME trajectory.
struct SmeState<'a> {
    sys: &'a SmeSystem,
    rho: Vec<C64>,
    half: Vec<C64>,
    scratch: Vec<C64>,
    scratch2: Vec<C64>,
    mvec: Vec<Vec<C64>>,
    x: Vec<f64>,
    max_renorm: f64,
}

impl<'a> SmeState<'a> {
    fn new(sys: &'a SmeSystem, rho0: Vec<C64>, dt: f64) -> Self {
        let n = rho0.len();
        SmeState {
            sys,
            half: sys.diag.iter().map(|l| (l * (0.5 * dt)).exp()).collect(),
            rho: rho0,
            scratch: vec![C64::new(0.0, 0.0); n],
            scratch2: vec![C64::new(0.0, 0.0); n],
            mvec: vec![vec![C64::new(0.0, 0.0); n]; sys.meas.len()],
            x: vec![0.0; sys.meas.len()],
            max_renorm: 0.0,
        }
    }

    /// `⟨Xᵢ⟩` of the current state for every channel.
    fn expectations(&mut self) -> &[f64] {
        for (i, m) in self.sys.meas.iter().enumerate() {
            m.mul_vec_into(&self.rho, &mut self.mvec[i]);
            self.x[i] = self.sys.trace(&self.mvec[i]).re;
        }
        &self.x
    }

    /// One internal step with the supplied Wiener increments `dw` (already
    /// scaled by `√dt`). Leaves the Itô-point `⟨X⟩` in `self.x`.
    fn step(&mut self, dt: f64, dw: &[f64]) -> Result<()> {
        let sys = self.sys;
        self.rho.iter_mut().zip(&self.half).for_each(|(r, h)| *r *= h);
        // Itô: back-action and current use the state at the start of the
        // stochastic sub-step.
        for (i, m) in sys.meas.iter().enumerate() {
            m.mul_vec_into(&self.rho, &mut self.mvec[i]);
            self.x[i] = sys.trace(&self.mvec[i]).re;
        }
        // second-order Taylor step of the off-diagonal drift, so the split
        // drift is second order and only the noise term is Euler–Maruyama
        sys.off.mul_vec_into(&self.rho, &mut self.scratch);
        sys.off.mul_vec_into(&self.scratch, &mut self.scratch2);
        let dtc = C64::new(dt, 0.0);
        let dt2 = C64::new(0.5 * dt * dt, 0.0);
        for k in 0..self.rho.len() {
            let mut inc = self.scratch[k] * dtc + self.scratch2[k] * dt2;
            for i in 0..sys.meas.len() {
                if sys.rates[i] > 0.0 {
                    let h = self.mvec[i][k] - self.x[i] * self.rho[k];
                    inc += h * (sys.rates[i].sqrt() * dw[i]);
                }
            }
            self.rho[k] += inc;
        }
        self.rho.iter_mut().zip(&self.half).for_each(|(r, h)| *r *= h);
        self.normalize()
    }

    fn normalize(&mut self) -> Result<()> {
        let d = self.sys.d;
        // Hermitize
        for j in 0..d {
            for i in 0..j {
                let a = self.rho[i + j * d];
                let b = self.rho[j + i * d];
                let m = 0.5 * (a + b.conj());
                self.rho[i + j * d] = m;
                self.rho[j + i * d] = m.conj();
            }
            self.rho[j * (d + 1)].im = 0.0;
        }
        let tr = self.sys.trace(&self.rho).re;
        if !(tr > TRACE_FLOOR) || !tr.is_finite() {
            return Err(Error::Solver(format!("trace collapsed to {tr:e}")));
        }
        self.max_renorm = self.max_renorm.max((tr - 1.0).abs());
        let inv = 1.0 / tr;
        self.rho.iter_mut().for_each(|r| *r *= inv);
        Ok(())
    }
}

/// Run one homodyne trajectory on the uniform grid `t_grid`.
///
/// `observer(k, vec ρ)` is called with the conditioned state at every grid
/// point; use it to accumulate ensemble statistics.
#[allow(clippy::too_many_arguments)]
pub fn sme_homodyne_trajectory_with(
    sys: &SmeSystem,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    seed: u64,
    index: u64,
    control: &StepControl,
    mut observer: impl FnMut(usize, &[C64]),
) -> Result<TrajectoryRecord> {
    check_uniform_grid(t_grid)?;
    if rho0.dim() != sys.d {
        return Err(Error::ShapeMismatch("initial state dimension".into()));
    }
    let n = t_grid.len();
    let nc = sys.meas.len();
    let dt_out = if n >= 2 { t_grid[1] - t_grid[0] } else { 1.0 };
    let sub = control.substeps(dt_out, sys.rate_scale);
    let dt = dt_out / sub as f64;
    let mut st = SmeState::new(sys, rho0.to_vec(), dt);
    let mut noise = NoiseSource::new(seed, nc);
    let mut rec = TrajectoryRecord {
        times: t_grid.to_vec(),
        currents: vec![Vec::with_capacity(n); nc],
        x_expect: vec![Vec::with_capacity(n); nc],
        seed,
        index,
        max_renorm: 0.0,
    };
    let mut dw = vec![0.0; nc];
    let mut acc = vec![0.0; nc];
    for k in 0..n {
        observer(k, &st.rho);
        let x0 = st.expectations().to_vec();
        for i in 0..nc {
            rec.x_expect[i].push(x0[i]);
        }
        acc.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..sub {
            noise.increments(dt, &mut dw);
            st.step(dt, &dw).map_err(|e| Error::Trajectory {
                index: index as usize,
                reason: e.to_string(),
            })?;
            for i in 0..nc {
                let r = sys.rates[i];
                acc[i] += r * st.x[i] * dt + r.sqrt() * dw[i];
            }
        }
        for i in 0..nc {
            rec.currents[i].push(acc[i] / dt_out);
        }
    }
    rec.max_renorm = st.max_renorm;
    Ok(rec)
}

/// Homodyne trajectory with default step control and no observer.
pub fn sme_homodyne_trajectory(
    model: &LindbladModel,
    channels: &[MeasuredChannel],
    rho0: &DensityMatrix,
    t_grid: &[f64],
    seed: u64,
) -> Result<TrajectoryRecord> {
    let sys = SmeSystem::new(model, channels)?;
    sme_homodyne_trajectory_with(&sys, rho0, t_grid, seed, 0, &StepControl::default(), |_, _| {})
}

/// Internal step used for output spacing `dt_out`.
pub fn internal_step(sys: &SmeSystem, dt_out: f64, control: &StepControl) -> f64 {
    dt_out / control.substeps(dt_out, sys.rate_scale) as f64
}
