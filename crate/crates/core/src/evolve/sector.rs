//! Steady states of models with an approximate U(1) charge
//!
//! With per-mode integer weights `w`, a basis state carries the charge
//! `q = Σ wₘnₘ` and a coherence `|i⟩⟨j|` the order `s = q(i) − q(j)`. The
//! part of the Liouvillian that preserves `s` is block diagonal; its blocks
//! are factored separately and used as a preconditioner for restarted GMRES
//! on the full system. When the charge is exactly conserved GMRES stops
//! after the initial guess.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use std::collections::BTreeMap;

use super::steady::{finish_steady_state, SteadyMethod, SteadyState};
use super::LindbladModel;
use crate::qspace::CscMatrix;
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Block-preconditioned iterative steady-state solver.
#[derive(Clone, Debug)]
pub struct SectorSolver {
    /// Charge weight of each mode.
    pub weights: Vec<i64>,
    pub restart: usize,
    pub max_iter: usize,
    /// Target of `‖b − Ax‖₂ / ‖b‖₂`.
    pub tol: f64,
}

impl SectorSolver {
    pub fn new(weights: Vec<i64>) -> Self {
        SectorSolver {
            weights,
            restart: 60,
            max_iter: 2000,
            tol: 1e-14,
        }
    }

    pub fn solve(&self, model: &LindbladModel) -> Result<SteadyState> {
        let space = model.space();
        if self.weights.len() != space.n_modes() {
            return Err(Error::ShapeMismatch(format!(
                "{} charge weights for {} modes",
                self.weights.len(),
                space.n_modes()
            )));
        }
        let d = space.dim();
        let n = d * d;
        let q: Vec<i64> = (0..d)
            .map(|i| {
                space
                    .occupations(i)
                    .iter()
                    .zip(&self.weights)
                    .map(|(&k, &w)| k as i64 * w)
                    .sum()
            })
            .collect();
        let order = |v: usize| q[v % d] - q[v / d];

        let l = model.liouvillian();
        let lm = l.matrix();
        let l_norm = lm.norm_inf();
        if l_norm == 0.0 {
            return Err(Error::DegenerateSteadyState("Liouvillian is identically zero".into()));
        }
        let mut trip: Vec<(usize, usize, C64)> = lm.iter().filter(|&(r, _, _)| r != 0).collect();
        trip.extend((0..d).map(|k| (0, k * (d + 1), C64::new(l_norm, 0.0))));
        let a = CscMatrix::from_triplets(n, n, &trip);

        // group superkets by coherence order
        let mut sectors: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            sectors.entry(order(v)).or_default().push(v);
        }
        let mut local = vec![0usize; n];
        for members in sectors.values() {
            for (k, &v) in members.iter().enumerate() {
                local[v] = k;
            }
        }
        let mut blocks: BTreeMap<i64, Vec<(usize, usize, C64)>> = BTreeMap::new();
        let mut coupling = Vec::new();
        for (r, c, v) in a.iter() {
            let s = order(c);
            if order(r) == s {
                blocks.entry(s).or_default().push((local[r], local[c], v));
            } else {
                coupling.push((r, c, v));
            }
        }
        let mut factors = Vec::with_capacity(sectors.len());
        for (s, members) in &sectors {
            let m = members.len();
            let t = blocks.remove(s).unwrap_or_default();
            let blk = CscMatrix::from_triplets(m, m, &t);
            let lu = Lu::try_new_with_symbolic(
                faer::sparse::linalg::solvers::SymbolicLu::try_new(blk.to_faer().symbolic())
                    .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?,
                blk.to_faer().as_ref(),
            )
            .map_err(|e| Error::DegenerateSteadyState(format!("sector {s} is singular: {e:?}")))?;
            factors.push((members.clone(), lu));
        }
        let precond = |y: &[C64]| -> Vec<C64> {
            let mut x = vec![ZERO; n];
            for (members, lu) in &factors {
                let rhs = Mat::from_fn(members.len(), 1, |k, _| y[members[k]]);
                let sol = lu.solve(&rhs);
                for (k, &v) in members.iter().enumerate() {
                    x[v] = sol[(k, 0)];
                }
            }
            x
        };

        let mut b = vec![ZERO; n];
        b[0] = C64::new(l_norm, 0.0);
        let x = if coupling.is_empty() {
            precond(&b)
        } else {
            gmres(&a, &b, &precond, self.restart, self.max_iter, self.tol)?
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSteadyState(
                "iteration produced non-finite values".into(),
            ));
        }
        finish_steady_state(model, lm, l_norm, &x, SteadyMethod::Sector)
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Right-preconditioned restarted GMRES with modified Gram–Schmidt.
/// The initial guess is `M⁻¹b`.
fn gmres(
    a: &CscMatrix,
    b: &[C64],
    precond: &dyn Fn(&[C64]) -> Vec<C64>,
    restart: usize,
    max_iter: usize,
    tol: f64,
) -> Result<Vec<C64>> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = precond(b);
    let mut ax = vec![ZERO; n];
    let mut iters = 0;
    loop {
        a.mul_vec_into(&x, &mut ax);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        if beta <= tol * bnorm {
            return Ok(x);
        }
        if iters >= max_iter {
            return Err(Error::Solver(format!(
                "GMRES stalled at relative residual {:.2e} after {iters} iterations",
                beta / bnorm
            )));
        }
        let m = restart.min(max_iter - iters).max(1);
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = vec![vec![ZERO; m]; m + 1];
        let (mut cs, mut sn) = (vec![ZERO; m], vec![ZERO; m]);
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut zs: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut k_used = 0;
        for k in 0..m {
            let z = precond(&v[k]);
            let mut w = a.mul_vec(&z);
            zs.push(z);
            for i in 0..=k {
                let hik = dot(&v[i], &w);
                h[i][k] = hik;
                w.iter_mut().zip(&v[i]).for_each(|(wj, vj)| *wj -= hik * vj);
            }
            let hn = norm2(&w);
            h[k + 1][k] = C64::new(hn, 0.0);
            // apply previous rotations
            for i in 0..k {
                let t = cs[i].conj() * h[i][k] + sn[i].conj() * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (p, qv) = (h[k][k], h[k + 1][k]);
            let den = (p.norm_sqr() + qv.norm_sqr()).sqrt();
            if den == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = p / den;
            sn[k] = qv / den;
            h[k][k] = C64::new(den, 0.0);
            h[k + 1][k] = ZERO;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            iters += 1;
            if g[k + 1].norm() <= 0.1 * tol * bnorm || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|z| z / hn).collect());
        }
        // back substitution
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&zs[j]).for_each(|(xi, zi)| *xi += yj * zi);
        }
        if k_used == 0 {
            return Err(Error::Solver("GMRES breakdown".into()));
        }
    }
}
