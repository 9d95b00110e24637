//! Derivative-free search for the linear-resonator detunings that maximize
//! the Fock-state fidelity: a coarse grid around the sideband seed followed
//! by a Nelder–Mead simplex inside a box.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{SolverSettings, StabilizeSettings, Tier, TrajectorySettings};
use super::oscillator_state;
use crate::measures::fock_fidelity;
use crate::models::OscillatorParams;
use crate::qspace::DensityMatrix;
use crate::Result;

/// Outcome of [`optimize_detunings`].
#[derive(Clone, Debug)]
pub struct Optimum {
    pub delta_c: f64,
    pub delta_d: f64,
    pub fidelity: f64,
    pub seed_delta_c: f64,
    pub seed_delta_d: f64,
    pub seed_fidelity: f64,
    /// Steady-state evaluations spent.
    pub evals: usize,
    /// Reduced state of the Kerr mode at the optimum.
    pub rho: DensityMatrix,
    pub warning: Option<String>,
}

/// Summary of an optimization that serializes without the state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimumSummary {
    pub delta_c: f64,
    pub delta_d: f64,
    pub fidelity: f64,
    pub seed_delta_c: f64,
    pub seed_delta_d: f64,
    pub seed_fidelity: f64,
    pub evals: usize,
    pub warning: Option<String>,
}

impl Optimum {
    pub fn summary(&self) -> OptimumSummary {
        OptimumSummary {
            delta_c: self.delta_c,
            delta_d: self.delta_d,
            fidelity: self.fidelity,
            seed_delta_c: self.seed_delta_c,
            seed_delta_d: self.seed_delta_d,
            seed_fidelity: self.seed_fidelity,
            evals: self.evals,
            warning: self.warning.clone(),
        }
    }
}

/// Memoized objective with an evaluation budget. Failed solves count as
/// fidelity −1 so the search moves away from them.
struct Objective<'a> {
    eval: Box<dyn Fn(f64, f64) -> Result<(f64, DensityMatrix)> + 'a>,
    cache: BTreeMap<(u64, u64), f64>,
    best: Option<(f64, f64, f64, DensityMatrix)>,
    evals: usize,
    budget: usize,
}

impl Objective<'_> {
    fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }

    fn value(&mut self, x: f64, y: f64) -> f64 {
        let key = (x.to_bits(), y.to_bits());
        if let Some(&v) = self.cache.get(&key) {
            return v;
        }
        if self.exhausted() {
            return f64::NEG_INFINITY;
        }
        self.evals += 1;
        let v = match (self.eval)(x, y) {
            Ok((f, rho)) => {
                if self.best.as_ref().is_none_or(|b| f > b.2) {
                    self.best = Some((x, y, f, rho));
                }
                f
            }
            Err(e) => {
                log::debug!("evaluation at ({x}, {y}) failed: {e}");
                -1.0
            }
        };
        self.cache.insert(key, v);
        v
    }
}

/// Maximize `⟨n₀|ρ_a|n₀⟩` over `(Δ^c, Δ^d)` starting from the detunings
/// already in `p` (normally the sideband seed). Search is confined to
/// `seed ± bound` and uses at most `max_evals` steady states.
pub fn optimize_detunings(
    p: &OscillatorParams,
    tier: Tier,
    dims: &[usize],
    settings: &StabilizeSettings,
    solver: &SolverSettings,
    traj: &TrajectorySettings,
) -> Result<Optimum> {
    let n0 = settings.n0;
    let (sc, sd) = (p.delta_c, p.delta_d);
    let eval = move |dc: f64, dd: f64| -> Result<(f64, DensityMatrix)> {
        let mut q = p.clone();
        q.delta_c = dc;
        q.delta_d = dd;
        let rho = oscillator_state(&q, tier, dims, n0, solver, traj)?;
        Ok((fock_fidelity(&rho, n0)?, rho))
    };
    let mut obj = Objective {
        eval: Box::new(eval),
        cache: BTreeMap::new(),
        best: None,
        evals: 0,
        budget: settings.max_evals.min(200),
    };
    // a failing seed is a hard error
    let (seed_f, seed_rho) = (obj.eval)(sc, sd)?;
    obj.evals = 1;
    obj.cache.insert((sc.to_bits(), sd.to_bits()), seed_f);
    obj.best = Some((sc, sd, seed_f, seed_rho.clone()));
    let lo = (sc - settings.bound, sd - settings.bound);
    let hi = (sc + settings.bound, sd + settings.bound);
    let clamp = |x: f64, y: f64| (x.clamp(lo.0, hi.0), y.clamp(lo.1, hi.1));

    if settings.optimize {
        // coarse grid
        let g = settings.grid as i64;
        let half = (g - 1) / 2;
        for i in 0..g {
            for j in 0..g {
                let (x, y) = clamp(
                    sc + (i - half) as f64 * settings.grid_step,
                    sd + (j - half) as f64 * settings.grid_step,
                );
                obj.value(x, y);
            }
        }
        // simplex from the best grid point
        let (bx, by) = obj.best.as_ref().map(|b| (b.0, b.1)).unwrap_or((sc, sd));
        let step = 0.5 * settings.grid_step.max(settings.resolution);
        nelder_mead(&mut obj, [bx, by], step, settings.resolution, &clamp);
    }

    let evals = obj.evals;
    let (bx, by, bf, rho) = obj.best.expect("seed evaluated");
    let mut warning = None;
    let (dc, dd, f, rho) = if bf - seed_f < -0.01 {
        warning = Some(format!(
            "optimizer did not improve on the seed ({bf:.4} vs {seed_f:.4})"
        ));
        (sc, sd, seed_f, seed_rho)
    } else {
        (bx, by, bf, rho)
    };
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(Optimum {
        delta_c: dc,
        delta_d: dd,
        fidelity: f,
        seed_delta_c: sc,
        seed_delta_d: sd,
        seed_fidelity: seed_f,
        evals,
        rho,
        warning,
    })
}

/// Maximizing Nelder–Mead on two variables with box clamping.
fn nelder_mead(
    obj: &mut Objective,
    start: [f64; 2],
    step: f64,
    resolution: f64,
    clamp: &dyn Fn(f64, f64) -> (f64, f64),
) {
    let mk = |x: f64, y: f64| {
        let (x, y) = clamp(x, y);
        [x, y]
    };
    let mut s: Vec<([f64; 2], f64)> = [
        mk(start[0], start[1]),
        mk(start[0] + step, start[1]),
        mk(start[0], start[1] + step),
    ]
    .into_iter()
    .map(|v| (v, obj.value(v[0], v[1])))
    .collect();
    while !obj.exhausted() {
        // best first; ties broken by coordinates for determinism
        s.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then(a.0[0].total_cmp(&b.0[0]))
                .then(a.0[1].total_cmp(&b.0[1]))
        });
        let extent = s
            .iter()
            .flat_map(|a| s.iter().map(move |b| (a.0[0] - b.0[0]).hypot(a.0[1] - b.0[1])))
            .fold(0.0, f64::max);
        if extent < resolution {
            break;
        }
        let c = [(s[0].0[0] + s[1].0[0]) / 2.0, (s[0].0[1] + s[1].0[1]) / 2.0];
        let w = s[2].0;
        let at = |t: f64| mk(c[0] + t * (w[0] - c[0]), c[1] + t * (w[1] - c[1]));
        let r = at(-1.0);
        let fr = obj.value(r[0], r[1]);
        if fr > s[0].1 {
            let e = at(-2.0);
            let fe = obj.value(e[0], e[1]);
            s[2] = if fe > fr { (e, fe) } else { (r, fr) };
        } else if fr > s[1].1 {
            s[2] = (r, fr);
        } else {
            let (k, fk) = if fr > s[2].1 {
                let k = at(-0.5);
                (k, obj.value(k[0], k[1]))
            } else {
                let k = at(0.5);
                (k, obj.value(k[0], k[1]))
            };
            if fk > s[2].1.max(fr) {
                s[2] = (k, fk);
            } else {
                // shrink towards the best vertex
                let b = s[0].0;
                for v in s.iter_mut().skip(1) {
                    let p = mk((v.0[0] + b[0]) / 2.0, (v.0[1] + b[1]) / 2.0);
                    *v = (p, obj.value(p[0], p[1]));
                }
            }
        }
    }
}
