use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::LindbladModel;
use crate::qspace::{CscMatrix, DensityMatrix};
use crate::{Error, Result, C64};

/// How a steady state was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyMethod {
    Direct,
    /// Charge-sector preconditioned GMRES.
    Sector,
    LongTime,
    TrajectoryAverage,
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `‖𝓛ρ‖∞ / ‖𝓛‖∞`.
    pub residual: f64,
    pub method: SteadyMethod,
    /// Total weight of negative eigenvalues removed by positivity repair.
    pub clip: f64,
}

/// Largest Liouvillian (in stored nonzeros) the direct solver accepts.
pub const DIRECT_NNZ_CAP: usize = 4_000_000;

/// Relative residual the direct solver must reach.
pub const DIRECT_RESIDUAL_TOL: f64 = 1e-10;

/// Sparse direct steady-state solver. The symbolic factorization is cached
/// and reused while the sparsity pattern of the Liouvillian is unchanged,
/// which is the common case when only parameter values change.
#[derive(Default)]
pub struct DirectSolver {
    cache: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, model: &LindbladModel) -> Result<SteadyState> {
        let space = model.space();
        let d = space.dim();
        let l = model.liouvillian();
        let lm = l.matrix();
        if lm.nnz() > DIRECT_NNZ_CAP {
            return Err(Error::DimensionCap {
                dim: lm.nnz(),
                cap: DIRECT_NNZ_CAP,
            });
        }
        let l_norm = lm.norm_inf();
        if l_norm == 0.0 {
            return Err(Error::DegenerateSteadyState("Liouvillian is identically zero".into()));
        }

        // Replace row 0 by the trace functional, scaled to the operator norm
        // so the system stays well balanced.
        let n = d * d;
        let mut trip: Vec<(usize, usize, C64)> = lm.iter().filter(|&(r, _, _)| r != 0).collect();
        trip.extend((0..d).map(|k| (0, k * (d + 1), C64::new(l_norm, 0.0))));
        let a = CscMatrix::from_triplets(n, n, &trip);
        let mut b = vec![C64::new(0.0, 0.0); n];
        b[0] = C64::new(l_norm, 0.0);

        let x = self.factor_and_solve(&a, &b)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSteadyState(
                "factorization produced non-finite values".into(),
            ));
        }
        finish_steady_state(model, lm, l_norm, &x, SteadyMethod::Direct)
    }

    fn factor_and_solve(&mut self, a: &CscMatrix, b: &[C64]) -> Result<Vec<C64>> {
        let n = a.nrows();
        let sym = SymbolicSparseColMat::new_checked(n, n, a.col_ptr().to_vec(), None, a.row_idx().to_vec());
        let mat = SparseColMat::new(sym, a.values().to_vec());
        let reuse = matches!(&self.cache, Some((cp, ri, _)) if cp == a.col_ptr() && ri == a.row_idx());
        if !reuse {
            let symlu = SymbolicLu::try_new(mat.symbolic())
                .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
            self.cache = Some((a.col_ptr().to_vec(), a.row_idx().to_vec(), symlu));
        }
        let symlu = &self.cache.as_ref().expect("cache filled above").2;
        let lu = Lu::try_new_with_symbolic(symlu.clone(), mat.as_ref())
            .map_err(|e| Error::DegenerateSteadyState(format!("numeric factorization failed: {e:?}")))?;
        let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
        let mut x = lu.solve(&rhs);
        // one step of iterative refinement
        let ax = a.mul_vec(&(0..n).map(|i| x[(i, 0)]).collect::<Vec<_>>());
        let r = Mat::from_fn(n, 1, |i, _| b[i] - ax[i]);
        let dx = lu.solve(&r);
        x = &x + &dx;
        Ok((0..n).map(|i| x[(i, 0)]).collect())
    }
}

/// Check a raw trace-one solution, repair positivity and verify the final
/// residual.
pub(crate) fn finish_steady_state(
    model: &LindbladModel,
    lm: &CscMatrix,
    l_norm: f64,
    x: &[C64],
    method: SteadyMethod,
) -> Result<SteadyState> {
    let space = model.space();
    let d = space.dim();
    let raw = Mat::from_fn(d, d, |i, j| x[i + j * d]);
    let raw_residual = residual(lm, x) / l_norm;
    let max_entry = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if raw_residual > 1e-6 || max_entry > 1.0 + 1e-6 {
        return Err(Error::DegenerateSteadyState(format!(
            "no unique trace-one solution (residual {raw_residual:.2e}, max entry {max_entry:.2e})"
        )));
    }
    let (rho, clip) = repair(raw)?;
    if clip > 1e-6 {
        return Err(Error::DegenerateSteadyState(format!(
            "solution has negative weight {clip:.2e}"
        )));
    }
    let rho = DensityMatrix::new_unchecked(space, rho)?;
    let res = residual(lm, &rho.to_vec()) / l_norm;
    if !(res < DIRECT_RESIDUAL_TOL) {
        return Err(Error::Solver(format!(
            "steady-state residual {res:.2e} exceeds {DIRECT_RESIDUAL_TOL:e}"
        )));
    }
    Ok(SteadyState {
        rho,
        residual: res,
        method,
        clip,
    })
}

fn residual(l: &CscMatrix, x: &[C64]) -> f64 {
    l.mul_vec(x).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Hermitize, clip negative eigenvalues and renormalize. Returns the
/// repaired matrix and the clipped weight.
pub(crate) fn repair(raw: Mat<C64>) -> Result<(Mat<C64>, f64)> {
    let d = raw.nrows();
    let h = Mat::from_fn(d, d, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)].conj()));
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let min = (0..d).map(|k| s[k].re).fold(f64::INFINITY, f64::min);
    let (mut out, clip) = if min < 0.0 {
        let u = evd.U();
        let clip: f64 = (0..d).map(|k| (-s[k].re).max(0.0)).sum();
        let w: Vec<f64> = (0..d).map(|k| s[k].re.max(0.0)).collect();
        let m = Mat::from_fn(d, d, |i, j| (0..d).map(|k| u[(i, k)] * w[k] * u[(j, k)].conj()).sum());
        (m, clip)
    } else {
        (h, 0.0)
    };
    let tr: f64 = (0..d).map(|k| out[(k, k)].re).sum();
    if !(tr > 0.0) {
        return Err(Error::DegenerateSteadyState("non-positive trace after repair".into()));
    }
    let inv = 1.0 / tr;
    out = Mat::from_fn(d, d, |i, j| out[(i, j)] * inv);
    for i in 0..d {
        out[(i, i)].im = 0.0;
    }
    Ok((out, clip))
}

/// Solve `𝓛ρ = 0` with a trace-normalization row. See [`DirectSolver`].
pub fn steady_state_direct(model: &LindbladModel) -> Result<SteadyState> {
    DirectSolver::new().solve(model)
}
