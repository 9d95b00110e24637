//! Matrix exponentials: dense scaling-and-squaring for small matrices and
//! an adaptive Krylov (Arnoldi) propagator for `exp(tA)v` with sparse `A`.

use faer::Mat;

use crate::qspace::CscMatrix;
use crate::{Error, Result, C64};

fn norm1(a: &Mat<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense `exp(A)` by scaling to `‖A‖₁ ≤ ½`, a degree-18 Taylor series and
/// repeated squaring. Intended for matrices up to a few hundred rows.
pub fn expm_dense(a: &Mat<C64>) -> Mat<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm of a non-square matrix");
    let norm = norm1(a);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = C64::new(0.5f64.powi(s), 0.0);
    let b = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let mut sum = Mat::<C64>::identity(n, n);
    let mut term = Mat::<C64>::identity(n, n);
    for k in 1..=18 {
        term = &term * &b;
        let inv = C64::new(1.0 / k as f64, 0.0);
        term = Mat::from_fn(n, n, |i, j| term[(i, j)] * inv);
        sum = &sum + &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn round_step(t: f64) -> f64 {
    // two significant digits, as in Expokit
    let s = 10f64.powf(t.log10().floor() - 1.0);
    (t / s).ceil() * s
}

/// Adaptive Krylov propagator for `w = exp(tA) v`.
#[derive(Clone, Debug)]
pub struct Krylov {
    /// Subspace dimension.
    pub m: usize,
    /// Local error tolerance per unit time.
    pub tol: f64,
    pub max_reject: usize,
}

impl Default for Krylov {
    fn default() -> Self {
        Krylov {
            m: 30,
            tol: 1e-12,
            max_reject: 20,
        }
    }
}

impl Krylov {
    /// Propagate `v` by `exp(tA)`; `t ≥ 0`. `a_norm` is `‖A‖∞`, passed in so
    /// repeated calls do not recompute it.
    pub fn expv(&self, a: &CscMatrix, a_norm: f64, t: f64, v: &[C64]) -> Result<Vec<C64>> {
        let n = v.len();
        let mut w = v.to_vec();
        let mut beta = norm2(v);
        if beta == 0.0 || t == 0.0 || a_norm == 0.0 {
            return Ok(w);
        }
        let m = self.m.min(n).max(1);
        // happy breakdown threshold, relative to the operator scale
        let btol = 1e-13 * a_norm;
        let (gamma, delta) = (0.9, 1.2);
        let mut xm = 1.0 / m as f64;
        let fact = (((m + 1) as f64) / std::f64::consts::E).powi(m as i32 + 1)
            * (2.0 * std::f64::consts::PI * (m + 1) as f64).sqrt();
        let mut t_new = (1.0 / a_norm) * ((fact * self.tol) / (4.0 * beta * a_norm)).powf(xm);
        t_new = round_step(t_new);
        let mut t_now = 0.0;
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        let mut p = vec![C64::new(0.0, 0.0); n];

        while t_now < t {
            let mut t_step = (t - t_now).min(t_new);
            basis.clear();
            basis.push(w.iter().map(|x| x / beta).collect());
            let mut h = Mat::<C64>::zeros(m + 2, m + 2);
            let mut mb = m;
            let mut k1 = 2usize;
            for j in 0..m {
                a.mul_vec_into(&basis[j], &mut p);
                for (i, vi) in basis.iter().enumerate() {
                    let hij = dot(vi, &p);
                    h[(i, j)] = hij;
                    p.iter_mut().zip(vi).for_each(|(pk, vk)| *pk -= hij * vk);
                }
                let s = norm2(&p);
                if s < btol {
                    k1 = 0;
                    mb = j + 1;
                    t_step = t - t_now;
                    break;
                }
                h[(j + 1, j)] = C64::new(s, 0.0);
                basis.push(p.iter().map(|x| x / s).collect());
            }
            let mut avnorm = 0.0;
            if k1 != 0 {
                h[(m + 1, m)] = C64::new(1.0, 0.0);
                a.mul_vec_into(&basis[m], &mut p);
                avnorm = norm2(&p);
            }

            let mut rejects = 0;
            let (f, err_loc) = loop {
                let mx = mb + k1;
                let sub = Mat::from_fn(mx, mx, |i, j| h[(i, j)] * t_step);
                let f = expm_dense(&sub);
                if k1 == 0 {
                    break (f, btol);
                }
                let phi1 = (beta * f[(m, 0)]).norm();
                let phi2 = (beta * f[(m + 1, 0)] * avnorm).norm();
                let err = if phi1 > 10.0 * phi2 {
                    xm = 1.0 / m as f64;
                    phi2
                } else if phi1 > phi2 {
                    xm = 1.0 / m as f64;
                    phi1 * phi2 / (phi1 - phi2)
                } else {
                    xm = 1.0 / (m as f64 - 1.0).max(1.0);
                    phi1
                };
                if err <= delta * t_step * self.tol {
                    break (f, err);
                }
                rejects += 1;
                if rejects > self.max_reject {
                    return Err(Error::StepRejected {
                        t: t_now,
                        retries: rejects,
                    });
                }
                t_step = round_step(gamma * t_step * (t_step * self.tol / err).powf(xm));
            };

            let mx = mb + k1.saturating_sub(1);
            w.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            for (k, vk) in basis.iter().take(mx).enumerate() {
                let c = beta * f[(k, 0)];
                w.iter_mut().zip(vk).for_each(|(wi, vi)| *wi += c * vi);
            }
            beta = norm2(&w);
            t_now += t_step;
            let err_loc = err_loc.max(f64::MIN_POSITIVE);
            t_new = round_step(gamma * t_step * (t_step * self.tol / err_loc).powf(xm));
            if beta == 0.0 {
                break;
            }
        }
        Ok(w)
    }
}
