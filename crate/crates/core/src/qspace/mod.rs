//! Truncated Fock-space operator algebra.
//!
//! Modes are ordered as given in [`FockSpace::dims`]; the first mode is the
//! most significant factor of the tensor product, so basis index
//! `i = n_0 * (d_1 * d_2 * ...) + n_1 * (d_2 * ...) + ...`.
//!
//! Density matrices are vectorized by **column stacking**: element
//! `rho[(i, j)]` sits at position `i + j * D`. With that convention
//! `vec(A rho B) = (B^T ⊗ A) vec(rho)`, and every superoperator in this crate
//! is assembled from that identity.

mod sparse;

use std::ops::{Add, Mul, Neg, Sub};

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

pub use sparse::CscMatrix;

use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerances attached to [`DensityMatrix`] validation.
pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Product of truncated bosonic modes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    dims: Vec<usize>,
}

impl FockSpace {
    /// Default hard cap on the total Hilbert dimension.
    pub const DEFAULT_MAX_DIM: usize = 20_000;

    pub fn new(dims: &[usize]) -> Result<Self> {
        Self::with_cap(dims, Self::DEFAULT_MAX_DIM)
    }

    pub fn with_cap(dims: &[usize], cap: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("at least one mode is required".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidSpace(format!("mode dimension {d} < 2")));
        }
        let mut total: usize = 1;
        for &d in dims {
            total = total.checked_mul(d).unwrap_or(usize::MAX);
            if total > cap {
                return Err(Error::DimensionCap { dim: total, cap });
            }
        }
        Ok(FockSpace { dims: dims.to_vec() })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    /// Total Hilbert dimension.
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            Err(Error::ModeOutOfRange {
                mode,
                n_modes: self.dims.len(),
            })
        } else {
            Ok(())
        }
    }

    fn stride(&self, mode: usize) -> usize {
        self.dims[mode + 1..].iter().product()
    }

    /// Basis index of an occupation-number tuple.
    pub fn index(&self, occupations: &[usize]) -> usize {
        assert_eq!(occupations.len(), self.dims.len(), "occupation tuple length");
        occupations.iter().zip(&self.dims).fold(0, |acc, (&n, &d)| {
            assert!(n < d, "occupation {n} outside truncation {d}");
            acc * d + n
        })
    }

    /// Occupation numbers of a basis index.
    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.dims.len()];
        for (k, &d) in self.dims.iter().enumerate().rev() {
            occ[k] = index % d;
            index /= d;
        }
        occ
    }

    /// Space made of a subset of the modes, in the given order.
    pub fn subspace(&self, modes: &[usize]) -> Result<FockSpace> {
        for &m in modes {
            self.check_mode(m)?;
        }
        let dims: Vec<usize> = modes.iter().map(|&m| self.dims[m]).collect();
        FockSpace::with_cap(&dims, usize::MAX)
    }

    /// Embed a single-mode matrix acting on `mode` into the full space.
    fn embed(&self, mode: usize, local: &CscMatrix) -> CscMatrix {
        let left: usize = self.dims[..mode].iter().product();
        let right = self.stride(mode);
        let mut m = CscMatrix::identity(left).kron(local);
        if right > 1 {
            m = m.kron(&CscMatrix::identity(right));
        }
        m
    }
}

/// Sparse operator on a [`FockSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: FockSpace,
    mat: CscMatrix,
}

impl Operator {
    pub fn new(space: &FockSpace, mat: CscMatrix) -> Result<Self> {
        let d = space.dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "operator is {}x{}, space dimension is {d}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Operator {
            space: space.clone(),
            mat,
        })
    }

    pub fn zero(space: &FockSpace) -> Self {
        let d = space.dim();
        Operator {
            space: space.clone(),
            mat: CscMatrix::zeros(d, d),
        }
    }

    pub fn identity(space: &FockSpace) -> Self {
        Operator {
            space: space.clone(),
            mat: CscMatrix::identity(space.dim()),
        }
    }

    pub fn from_dense(space: &FockSpace, dense: &Mat<C64>) -> Result<Self> {
        Self::new(space, CscMatrix::from_dense(dense))
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn dag(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            mat: self.mat.adjoint(),
        }
    }

    pub fn to_dense(&self) -> Mat<C64> {
        self.mat.to_dense()
    }

    /// `max |A - A†|` over all elements.
    pub fn hermitian_deviation(&self) -> f64 {
        self.mat.max_abs_diff(&self.mat.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        self.mat.mul_vec(psi)
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator {
            space: self.space.clone(),
            mat: self.mat.scale(s),
        }
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        let mut dims = self.space.dims.clone();
        dims.extend_from_slice(&other.space.dims);
        Operator {
            space: FockSpace { dims },
            mat: self.mat.kron(&other.mat),
        }
    }

    /// Sum of operators with complex weights.
    pub fn linear_combination(space: &FockSpace, terms: &[(C64, &Operator)]) -> Operator {
        let d = space.dim();
        let mats: Vec<(C64, &CscMatrix)> = terms
            .iter()
            .map(|(c, op)| {
                assert_eq!(&op.space, space, "operator space mismatch");
                (*c, &op.mat)
            })
            .collect();
        Operator {
            space: space.clone(),
            mat: CscMatrix::linear_combination(d, d, &mats),
        }
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expect_pure(&self, psi: &[C64]) -> C64 {
        let a_psi = self.apply(psi);
        psi.iter().zip(&a_psi).map(|(p, q)| p.conj() * q).sum()
    }

    fn check_same_space(&self, other: &Operator) {
        assert_eq!(self.space, other.space, "operator space mismatch");
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.check_same_space(rhs);
        Operator {
            space: self.space.clone(),
            mat: self.mat.add(&rhs.mat),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.check_same_space(rhs);
        Operator {
            space: self.space.clone(),
            mat: self.mat.sub(&rhs.mat),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.check_same_space(rhs);
        Operator {
            space: self.space.clone(),
            mat: self.mat.matmul(&rhs.mat),
        }
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-ONE)
    }
}

/// Lowering operator of `mode`, embedded in the full space.
pub fn destroy(space: &FockSpace, mode: usize) -> Result<Operator> {
    space.check_mode(mode)?;
    let d = space.dims[mode];
    let t: Vec<_> = (1..d).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))).collect();
    let local = CscMatrix::from_triplets(d, d, &t);
    Operator::new(space, space.embed(mode, &local))
}

/// Raising operator of `mode`.
pub fn create(space: &FockSpace, mode: usize) -> Result<Operator> {
    Ok(destroy(space, mode)?.dag())
}

/// `a†a` of `mode`.
pub fn number(space: &FockSpace, mode: usize) -> Result<Operator> {
    space.check_mode(mode)?;
    let d = space.dims[mode];
    let diag: Vec<C64> = (0..d).map(|n| C64::new(n as f64, 0.0)).collect();
    Operator::new(space, space.embed(mode, &CscMatrix::from_diagonal(&diag)))
}

/// `|to⟩⟨from|` acting on `mode`.
pub fn transition(space: &FockSpace, mode: usize, to: usize, from: usize) -> Result<Operator> {
    space.check_mode(mode)?;
    let d = space.dims[mode];
    if to >= d || from >= d {
        return Err(Error::ShapeMismatch(format!(
            "transition |{to}⟩⟨{from}| outside truncation {d}"
        )));
    }
    let local = CscMatrix::from_triplets(d, d, &[(to, from, ONE)]);
    Operator::new(space, space.embed(mode, &local))
}

/// Dense density matrix on a [`FockSpace`].
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: FockSpace,
    data: Mat<C64>,
}

impl DensityMatrix {
    /// Wrap a matrix after checking trace, Hermiticity and positivity.
    pub fn new(space: &FockSpace, data: Mat<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, data)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Wrap a matrix checking only its shape.
    pub fn new_unchecked(space: &FockSpace, data: Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "density matrix is {}x{}, space dimension is {d}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(DensityMatrix {
            space: space.clone(),
            data,
        })
    }

    pub fn pure(space: &FockSpace, psi: &[C64]) -> Result<Self> {
        if psi.len() != space.dim() {
            return Err(Error::ShapeMismatch("state vector length".into()));
        }
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let d = psi.len();
        let data = Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / norm);
        Self::new(space, data)
    }

    /// Projector on a Fock basis state given by its occupation numbers.
    pub fn basis(space: &FockSpace, occupations: &[usize]) -> Result<Self> {
        let mut psi = vec![ZERO; space.dim()];
        psi[space.index(occupations)] = ONE;
        Self::pure(space, &psi)
    }

    /// Build from a column-stacked vector.
    pub fn from_vec(space: &FockSpace, v: &[C64]) -> Result<Self> {
        let d = space.dim();
        if v.len() != d * d {
            return Err(Error::ShapeMismatch("vectorized density matrix length".into()));
        }
        Self::new_unchecked(space, Mat::from_fn(d, d, |i, j| v[i + j * d]))
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn data(&self) -> &Mat<C64> {
        &self.data
    }

    pub fn into_data(self) -> Mat<C64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[(i, j)]
    }

    /// Column-stacked copy.
    pub fn to_vec(&self) -> Vec<C64> {
        let d = self.dim();
        let mut v = Vec::with_capacity(d * d);
        for j in 0..d {
            for i in 0..d {
                v.push(self.data[(i, j)]);
            }
        }
        v
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.data[(i, i)]).sum()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let d = self.dim();
        let mut dev = 0.0f64;
        for j in 0..d {
            for i in 0..=j {
                dev = dev.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.data)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let h = self.hermitian_deviation();
        if h > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("Hermiticity deviation {h:e}")));
        }
        let min = self.min_eigenvalue()?;
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `Tr(A ρ)`.
    pub fn expect(&self, op: &Operator) -> C64 {
        assert_eq!(op.space(), &self.space, "operator space mismatch");
        // Tr(Aρ) = Σ_{ik} A_ik ρ_ki
        op.matrix().iter().map(|(i, k, v)| v * self.data[(k, i)]).sum()
    }

    /// `(ρ + ρ†)/2` rescaled to unit trace.
    pub fn hermitize(&mut self) {
        let d = self.dim();
        for j in 0..d {
            for i in 0..j {
                let m = (self.data[(i, j)] + self.data[(j, i)].conj()) * 0.5;
                self.data[(i, j)] = m;
                self.data[(j, i)] = m.conj();
            }
            self.data[(j, j)] = C64::new(self.data[(j, j)].re, 0.0);
        }
        let tr = self.trace().re;
        if tr != 0.0 {
            self.data = &self.data * faer::Scale(C64::new(1.0 / tr, 0.0));
        }
    }

    /// Reduced state on the listed modes (kept in the given order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let sub = self.space.subspace(keep)?;
        let mut seen = vec![false; self.space.n_modes()];
        for &k in keep {
            if seen[k] {
                return Err(Error::InvalidSpace(format!("mode {k} listed twice")));
            }
            seen[k] = true;
        }
        let traced: Vec<usize> = (0..self.space.n_modes()).filter(|m| !seen[*m]).collect();
        let traced_space = if traced.is_empty() {
            None
        } else {
            Some(self.space.subspace(&traced)?)
        };
        let ds = sub.dim();
        let dt = traced_space.as_ref().map_or(1, |s| s.dim());
        let n = self.space.n_modes();
        let mut out = Mat::<C64>::zeros(ds, ds);
        let mut occ = vec![0usize; n];
        let full_index = |occ: &mut Vec<usize>, kept: &[usize], env: &[usize]| {
            for (slot, &m) in keep.iter().enumerate() {
                occ[m] = kept[slot];
            }
            for (slot, &m) in traced.iter().enumerate() {
                occ[m] = env[slot];
            }
            self.space.index(occ)
        };
        let kept_occ: Vec<Vec<usize>> = (0..ds).map(|i| sub.occupations(i)).collect();
        let env_occ: Vec<Vec<usize>> = match &traced_space {
            Some(s) => (0..dt).map(|i| s.occupations(i)).collect(),
            None => vec![vec![]],
        };
        for e in &env_occ {
            let idx: Vec<usize> = kept_occ.iter().map(|k| full_index(&mut occ, k, e)).collect();
            for j in 0..ds {
                for i in 0..ds {
                    out[(i, j)] += self.data[(idx[i], idx[j])];
                }
            }
        }
        DensityMatrix::new_unchecked(&sub, out)
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::ShapeMismatch("trace distance between different spaces".into()));
        }
        let diff = &self.data - &other.data;
        let ev = hermitian_eigenvalues(&diff)?;
        Ok(0.5 * ev.iter().map(|l| l.abs()).sum::<f64>())
    }
}

/// Eigenvalues of the Hermitian part of a square matrix, ascending.
pub fn hermitian_eigenvalues(m: &Mat<C64>) -> Result<Vec<f64>> {
    let h = hermitian_part(m);
    h.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("Hermitian eigensolver: {e:?}")))
}

pub(crate) fn hermitian_part(m: &Mat<C64>) -> Mat<C64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Sparse matrix acting on column-stacked density matrices.
#[derive(Clone, Debug)]
pub struct Superoperator {
    space: FockSpace,
    mat: CscMatrix,
}

impl Superoperator {
    pub fn new(space: &FockSpace, mat: CscMatrix) -> Result<Self> {
        let d2 = space.dim() * space.dim();
        if mat.nrows() != d2 || mat.ncols() != d2 {
            return Err(Error::ShapeMismatch(format!(
                "superoperator is {}x{}, expected {d2}x{d2}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Superoperator {
            space: space.clone(),
            mat,
        })
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.mat
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        self.mat.mul_vec(v)
    }

    /// Apply to a density matrix (no validation on the output, which is
    /// generally traceless).
    pub fn apply(&self, rho: &DensityMatrix) -> Mat<C64> {
        assert_eq!(rho.space(), &self.space, "superoperator space mismatch");
        let out = self.mat.mul_vec(&rho.to_vec());
        let d = self.space.dim();
        Mat::from_fn(d, d, |i, j| out[i + j * d])
    }

    pub fn norm_inf(&self) -> f64 {
        self.mat.norm_inf()
    }
}

impl Add for &Superoperator {
    type Output = Superoperator;
    fn add(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.space, rhs.space, "superoperator space mismatch");
        Superoperator {
            space: self.space.clone(),
            mat: self.mat.add(&rhs.mat),
        }
    }
}

/// Matrix form of `D[c]ρ = cρc† − ½{c†c, ρ}`.
pub fn dissipator(c: &Operator) -> Result<Superoperator> {
    let d = c.dim();
    if c.mat.nrows() != c.mat.ncols() {
        return Err(Error::ShapeMismatch("collapse operator must be square".into()));
    }
    let id = CscMatrix::identity(d);
    let cdc = c.mat.adjoint().matmul(&c.mat);
    let sandwich = c.mat.conj().kron(&c.mat);
    let left = id.kron(&cdc);
    let right = cdc.transpose().kron(&id);
    let mat = CscMatrix::linear_combination(
        d * d,
        d * d,
        &[
            (ONE, &sandwich),
            (C64::new(-0.5, 0.0), &left),
            (C64::new(-0.5, 0.0), &right),
        ],
    );
    Superoperator::new(&c.space, mat)
}

/// Superoperator `−i[H, ·]`.
pub fn hamiltonian_generator(h: &Operator) -> Superoperator {
    let d = h.dim();
    let id = CscMatrix::identity(d);
    let left = id.kron(&h.mat);
    let right = h.mat.transpose().kron(&id);
    let mat = CscMatrix::linear_combination(
        d * d,
        d * d,
        &[(C64::new(0.0, -1.0), &left), (C64::new(0.0, 1.0), &right)],
    );
    Superoperator {
        space: h.space.clone(),
        mat,
    }
}

/// Lindblad generator `−i[H, ρ] + Σ rate · D[c]ρ`.
pub fn liouvillian(h: &Operator, collapses: &[(f64, Operator)]) -> Result<Superoperator> {
    let d = h.dim();
    if h.mat.nrows() != h.mat.ncols() {
        return Err(Error::ShapeMismatch("Hamiltonian must be square".into()));
    }
    let id = CscMatrix::identity(d);
    let mut cdc_total = CscMatrix::zeros(d, d);
    let mut sandwiches = Vec::with_capacity(collapses.len());
    for (rate, c) in collapses {
        if !(*rate >= 0.0) {
            return Err(Error::NegativeRate(*rate));
        }
        if c.space != h.space {
            return Err(Error::ShapeMismatch(
                "collapse operator lives on a different space".into(),
            ));
        }
        if *rate == 0.0 {
            continue;
        }
        let cdc = c.mat.adjoint().matmul(&c.mat);
        cdc_total = cdc_total.axpby(ONE, &cdc, C64::new(*rate, 0.0));
        sandwiches.push(c.mat.conj().kron(&c.mat).scale(C64::new(*rate, 0.0)));
    }
    // Effective non-Hermitian generator G = −iH − ½ Σ rate c†c acts as
    // G ρ + ρ G†; the sandwich terms are added on top.
    let g = h.mat.axpby(C64::new(0.0, -1.0), &cdc_total, C64::new(-0.5, 0.0));
    let left = id.kron(&g);
    let right = g.adjoint().transpose().kron(&id);
    let mut terms: Vec<(C64, &CscMatrix)> = vec![(ONE, &left), (ONE, &right)];
    terms.extend(sandwiches.iter().map(|s| (ONE, s)));
    let mat = CscMatrix::linear_combination(d * d, d * d, &terms);
    Superoperator::new(&h.space, mat)
}

/// Partial transpose of a bipartite matrix with factor dimensions
/// `(d1, d2)`, transposing subsystem `0` or `1`.
pub fn partial_transpose(rho: &Mat<C64>, subsystem: usize, dims: (usize, usize)) -> Result<Mat<C64>> {
    let (d1, d2) = dims;
    let n = d1 * d2;
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{}, dims product is {n}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if subsystem > 1 {
        return Err(Error::ModeOutOfRange {
            mode: subsystem,
            n_modes: 2,
        });
    }
    let mut out = Mat::<C64>::zeros(n, n);
    for i1 in 0..d1 {
        for i2 in 0..d2 {
            for j1 in 0..d1 {
                for j2 in 0..d2 {
                    let (r, c) = if subsystem == 0 {
                        (j1 * d2 + i2, i1 * d2 + j2)
                    } else {
                        (i1 * d2 + j2, j1 * d2 + i2)
                    };
                    out[(i1 * d2 + i2, j1 * d2 + j2)] = rho[(r, c)];
                }
            }
        }
    }
    Ok(out)
}
