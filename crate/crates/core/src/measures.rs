//! Observables: Fock fidelity, photon statistics, Wigner functions,
//! relative-phase distribution and synchronization measure, logarithmic
//! negativity, Hinton exports and homodyne cross-correlations.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::evolve::{Krylov, LindbladModel, MeasuredChannel, TrajectoryRecord};
use crate::qspace::{hermitian_eigenvalues, partial_transpose, DensityMatrix};
use crate::{Error, Result, C64};

fn single_mode(rho: &DensityMatrix) -> Result<usize> {
    if rho.space().n_modes() != 1 {
        return Err(Error::InvalidSpace(format!(
            "expected a single-mode state, got {} modes",
            rho.space().n_modes()
        )));
    }
    Ok(rho.dim())
}

fn two_mode(rho: &DensityMatrix) -> Result<(usize, usize)> {
    let dims = rho.space().dims();
    if dims.len() != 2 {
        return Err(Error::InvalidSpace(format!(
            "expected a two-mode state, got {} modes",
            dims.len()
        )));
    }
    Ok((dims[0], dims[1]))
}

/// `⟨n₀|ρ|n₀⟩`.
pub fn fock_fidelity(rho: &DensityMatrix, n0: usize) -> Result<f64> {
    let d = single_mode(rho)?;
    if n0 >= d {
        return Err(Error::InvalidParams(format!("n0 = {n0} outside truncation {d}")));
    }
    Ok(rho.get(n0, n0).re)
}

/// Fock-basis populations.
pub fn photon_distribution(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let d = single_mode(rho)?;
    Ok((0..d).map(|n| rho.get(n, n).re).collect())
}

/// Wigner function on the grid `xs × ps`, with `a = (x + ip)/√2`, so that
/// the vacuum is `e^{−x²−p²}/π` and `W(0,0) = Σₙ(−1)ⁿρₙₙ/π`. Row `i` of the
/// result belongs to `ps[i]`, column `j` to `xs[j]`.
pub fn wigner(rho: &DensityMatrix, xs: &[f64], ps: &[f64]) -> Result<Mat<f64>> {
    let d = single_mode(rho)?;
    let mut w = Mat::<f64>::zeros(ps.len(), xs.len());
    // √(m!/n!) for m ≤ n
    let ratio = |m: usize, n: usize| -> f64 { ((m + 1)..=n).map(|k| 1.0 / (k as f64).sqrt()).product() };
    let mut lag = vec![0.0; d];
    for (i, &p) in ps.iter().enumerate() {
        for (j, &x) in xs.iter().enumerate() {
            let a = C64::new(x, p) / 2f64.sqrt();
            let b = 4.0 * a.norm_sqr();
            let two_a = 2.0 * a;
            let mut acc = 0.0;
            for m in 0..d {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                // L_m^{(k)}(B) for k = 0..d−1−m
                let mut pow = C64::new(1.0, 0.0);
                for k in 0..(d - m) {
                    let n = m + k;
                    let rmn = rho.get(m, n);
                    if k > 0 {
                        pow *= two_a;
                    }
                    if rmn.norm() == 0.0 {
                        continue;
                    }
                    laguerre(m, k as f64, b, &mut lag);
                    let l = lag[m];
                    if k == 0 {
                        acc += sign * rmn.re * l;
                    } else {
                        acc += 2.0 * sign * ratio(m, n) * l * (rmn * pow).re;
                    }
                }
            }
            w[(i, j)] = acc * (-0.5 * b).exp() / PI;
        }
    }
    Ok(w)
}

/// Generalized Laguerre `L_j^{(k)}(x)` for `j = 0..=n`, written to `out`.
fn laguerre(n: usize, k: f64, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n == 0 {
        return;
    }
    out[1] = 1.0 + k - x;
    for j in 1..n {
        let jf = j as f64;
        out[j + 1] = ((2.0 * jf + 1.0 + k - x) * out[j] - (jf + k) * out[j - 1]) / (jf + 1.0);
    }
}

/// Relative-phase distribution on a uniform grid over `[0, 2π)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDistribution {
    pub phis: Vec<f64>,
    pub values: Vec<f64>,
    /// Coherence sums `C_k` for `k = −(N−1)..=N−1`, index `k + N − 1`.
    pub coherences: Vec<C64>,
}

impl PhaseDistribution {
    pub fn step(&self) -> f64 {
        2.0 * PI / self.phis.len() as f64
    }

    /// Exact value of the trigonometric polynomial at `phi`.
    pub fn eval(&self, phi: f64) -> f64 {
        self.series(phi).0
    }

    /// `(P, P′, P″)` at `phi`.
    fn series(&self, phi: f64) -> (f64, f64, f64) {
        let kmax = (self.coherences.len() as i64 - 1) / 2;
        let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for (idx, c) in self.coherences.iter().enumerate() {
            let k = idx as i64 - kmax;
            let kf = k as f64;
            // C_k e^{−ikφ}
            let e = *c * C64::from_polar(1.0, -kf * phi);
            p += e.re;
            d1 += (e * C64::new(0.0, -kf)).re;
            d2 += (e * -(kf * kf)).re;
        }
        let s = 1.0 / (2.0 * PI);
        (p * s, d1 * s, d2 * s)
    }

    /// Maximum and its location: best grid point refined by Newton steps
    /// on the exact series.
    pub fn max(&self) -> (f64, f64) {
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
        for (&phi, &v) in self.phis.iter().zip(&self.values) {
            if v > best {
                best = v;
                arg = phi;
            }
        }
        let h = self.step();
        let mut phi = arg;
        for _ in 0..20 {
            let (_, d1, d2) = self.series(phi);
            if d2 >= 0.0 {
                break;
            }
            let next = phi - d1 / d2;
            if (next - arg).abs() > h {
                break;
            }
            let done = (next - phi).abs() < 1e-14;
            phi = next;
            if done {
                break;
            }
        }
        let refined = self.eval(phi);
        if refined >= best {
            (refined, phi.rem_euclid(2.0 * PI))
        } else {
            (best, arg)
        }
    }
}

/// Default number of phase grid points.
pub const PHASE_GRID: usize = 512;

/// Coherence sums `C_k = Σ_{n,m} ⟨n+k, m|ρ|n, m+k⟩`.
pub fn coherence_sums(rho: &DensityMatrix) -> Result<Vec<C64>> {
    let (d1, d2) = two_mode(rho)?;
    if d1 != d2 {
        return Err(Error::InvalidSpace(format!("mode dims must match, got ({d1}, {d2})")));
    }
    let n = d1 as i64;
    let mut out = vec![C64::new(0.0, 0.0); (2 * n - 1) as usize];
    for k in -(n - 1)..n {
        let mut s = C64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                let (r1, c2) = (a + k, b + k);
                if r1 < 0 || r1 >= n || c2 < 0 || c2 >= n {
                    continue;
                }
                let row = (r1 * n + b) as usize;
                let col = (a * n + c2) as usize;
                s += rho.get(row, col);
            }
        }
        out[(k + n - 1) as usize] = s;
    }
    Ok(out)
}

/// `P(φ)` of the relative phase `φ = φ₁ − φ₂`, normalized to unit
/// integral on a grid of `points` values.
pub fn relative_phase_distribution_on(rho: &DensityMatrix, points: usize) -> Result<PhaseDistribution> {
    let coherences = coherence_sums(rho)?;
    let h = 2.0 * PI / points as f64;
    let phis: Vec<f64> = (0..points).map(|i| i as f64 * h).collect();
    let mut pd = PhaseDistribution {
        phis,
        values: Vec::new(),
        coherences,
    };
    pd.values = pd.phis.iter().map(|&p| pd.eval(p)).collect();
    let norm: f64 = pd.values.iter().sum::<f64>() * h;
    if !(norm > 0.0) {
        return Err(Error::InvalidState("phase distribution has no weight".into()));
    }
    pd.values.iter_mut().for_each(|v| *v /= norm);
    pd.coherences.iter_mut().for_each(|c| *c /= norm);
    Ok(pd)
}

pub fn relative_phase_distribution(rho: &DensityMatrix) -> Result<PhaseDistribution> {
    relative_phase_distribution_on(rho, PHASE_GRID)
}

/// `S = 2π max P(φ) − 1`.
pub fn sync_measure(rho: &DensityMatrix) -> Result<f64> {
    let pd = relative_phase_distribution(rho)?;
    Ok(sync_from_phase(&pd))
}

pub fn sync_from_phase(pd: &PhaseDistribution) -> f64 {
    2.0 * PI * pd.max().0 - 1.0
}

/// `log₂ ‖ρ^{T₂}‖₁` of a bipartite state with factor dimensions `dims`.
pub fn log_negativity(rho: &DensityMatrix, dims: (usize, usize)) -> Result<f64> {
    let pt = partial_transpose(rho.data(), 1, dims)?;
    let ev = hermitian_eigenvalues(&pt)?;
    let norm: f64 = ev.iter().map(|l| l.abs()).sum();
    Ok(norm.log2().max(0.0))
}

/// One retained element `⟨k,l|ρ|m,n⟩` of a Hinton export.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HintonEntry {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub value: C64,
}

/// Magnitude below which Hinton entries are omitted.
pub const HINTON_THRESHOLD: f64 = 1e-6;

/// Elements of a two-mode state with `|ρ| > threshold`, row-major.
pub fn hinton_entries(rho: &DensityMatrix, threshold: f64) -> Result<Vec<HintonEntry>> {
    let (_, d2) = two_mode(rho)?;
    let d = rho.dim();
    let mut out = Vec::new();
    for r in 0..d {
        for c in 0..d {
            let v = rho.get(r, c);
            if v.norm() > threshold {
                out.push(HintonEntry {
                    k: r / d2,
                    l: r % d2,
                    m: c / d2,
                    n: c % d2,
                    value: v,
                });
            }
        }
    }
    Ok(out)
}

/// Write `k,l,m,n,abs,re,im` rows. The imaginary part is kept so the export
/// round-trips exactly.
pub fn hinton_export(rho: &DensityMatrix, path: &Path) -> Result<()> {
    let entries = hinton_entries(rho, HINTON_THRESHOLD)?;
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "k,l,m,n,abs,re,im").map_err(io)?;
    for e in entries {
        writeln!(
            w,
            "{},{},{},{},{:?},{:?},{:?}",
            e.k,
            e.l,
            e.m,
            e.n,
            e.value.norm(),
            e.value.re,
            e.value.im
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn hinton_import(path: &Path) -> Result<Vec<HintonEntry>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Parse(format!("{}:{}: expected 7 fields", path.display(), i + 1)));
        }
        let bad = |e: String| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1));
        let u = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(e.to_string()));
        let x = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
        out.push(HintonEntry {
            k: u(f[0])?,
            l: u(f[1])?,
            m: u(f[2])?,
            n: u(f[3])?,
            value: C64::new(x(f[5])?, x(f[6])?),
        });
    }
    Ok(out)
}

/// Cross-correlation curve `C_τ(x, y) = ∫ x(t) y(t − τ) dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XCorrResult {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub max_abs: f64,
    pub argmax_tau: f64,
}

impl XCorrResult {
    fn from_curve(taus: Vec<f64>, values: Vec<f64>) -> Self {
        let (mut max_abs, mut argmax_tau) = (0.0, 0.0);
        for (t, v) in taus.iter().zip(&values) {
            if v.abs() > max_abs {
                max_abs = v.abs();
                argmax_tau = *t;
            }
        }
        XCorrResult {
            taus,
            values,
            max_abs,
            argmax_tau,
        }
    }
}

/// Riemann sum over the overlapping samples only, at lags `j·dt` with
/// `|j·dt| ≤ tau_max`. Samples outside the window are treated as absent,
/// so `C_τ(x, y) = C_{−τ}(y, x)` holds exactly.
pub fn cross_correlation(x: &[f64], y: &[f64], dt: f64, tau_max: f64) -> Result<XCorrResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidParams("empty series".into()));
    }
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch("series lengths differ".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParams("dt must be positive".into()));
    }
    let n = x.len() as i64;
    let lmax = ((tau_max / dt + 1e-9).floor() as i64).clamp(0, n - 1);
    let mut taus = Vec::with_capacity((2 * lmax + 1) as usize);
    let mut values = Vec::with_capacity(taus.capacity());
    for j in -lmax..=lmax {
        let lo = j.max(0);
        let hi = (n + j).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += x[i as usize] * y[(i - j) as usize];
        }
        taus.push(j as f64 * dt);
        values.push(s * dt);
    }
    Ok(XCorrResult::from_curve(taus, values))
}

/// Same as [`cross_correlation`] after subtracting each series' mean.
pub fn cross_correlation_centered(x: &[f64], y: &[f64], dt: f64, tau_max: f64) -> Result<XCorrResult> {
    if x.is_empty() {
        return Err(Error::InvalidParams("empty series".into()));
    }
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let my = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    cross_correlation(&xc, &yc, dt, tau_max)
}

/// Ensemble-averaged cross-correlation of two measured channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleXCorr {
    pub taus: Vec<f64>,
    /// `𝔼[C_τ(J₁, J₂)]`
    pub current: Vec<f64>,
    /// `κ₁κ₂ 𝔼[C_τ(⟨X₁⟩, ⟨X₂⟩)]`
    pub conditioned: Vec<f64>,
    /// Standard error of `current` at each lag.
    pub current_stderr: Vec<f64>,
    pub max_current: f64,
    pub max_conditioned: f64,
    pub argmax_tau: f64,
    /// `max_τ |current − conditioned|`
    pub gap: f64,
    pub n_traj: usize,
}

/// Average `C_τ` over records for channels `(0, 1)`. `rates` are the
/// measurement rates `(κ₁, κ₂)`. The headline number is
/// [`EnsembleXCorr::max_conditioned`]; the noisy-current curve is kept as a
/// consistency check.
pub fn ensemble_xcorr(records: &[TrajectoryRecord], rates: (f64, f64), tau_max: f64) -> Result<EnsembleXCorr> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidParams("no records".into()))?;
    if first.n_channels() < 2 {
        return Err(Error::InvalidParams("need two measured channels".into()));
    }
    let dt = first.dt();
    for r in records {
        if r.times != first.times || r.n_channels() != first.n_channels() {
            return Err(Error::ShapeMismatch("records are on different grids".into()));
        }
    }
    let n = records.len() as f64;
    let mut cur: Vec<f64> = Vec::new();
    let mut cur2: Vec<f64> = Vec::new();
    let mut cond: Vec<f64> = Vec::new();
    let mut taus = Vec::new();
    for r in records {
        let c = cross_correlation(&r.currents[0], &r.currents[1], dt, tau_max)?;
        let x = cross_correlation(&r.x_expect[0], &r.x_expect[1], dt, tau_max)?;
        if cur.is_empty() {
            cur = vec![0.0; c.values.len()];
            cur2 = vec![0.0; c.values.len()];
            cond = vec![0.0; c.values.len()];
            taus = c.taus.clone();
        }
        for i in 0..cur.len() {
            cur[i] += c.values[i];
            cur2[i] += c.values[i] * c.values[i];
            cond[i] += x.values[i];
        }
    }
    let k12 = rates.0 * rates.1;
    let mut stderr = vec![0.0; cur.len()];
    for i in 0..cur.len() {
        cur[i] /= n;
        cond[i] *= k12 / n;
        let var = (cur2[i] / n - cur[i] * cur[i]).max(0.0);
        stderr[i] = if n > 1.0 {
            (var * n / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
    }
    let c = XCorrResult::from_curve(taus.clone(), cur.clone());
    let x = XCorrResult::from_curve(taus.clone(), cond.clone());
    let gap = cur.iter().zip(&cond).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(EnsembleXCorr {
        taus,
        current: cur,
        conditioned: cond,
        current_stderr: stderr,
        max_current: c.max_abs,
        max_conditioned: x.max_abs,
        argmax_tau: x.argmax_tau,
        gap,
        n_traj: records.len(),
    })
}

/// `max_τ |𝔼[C_τ]|` of the ensemble, from the conditioned-expectation form.
pub fn ensemble_xcorr_max(records: &[TrajectoryRecord], rates: (f64, f64), tau_max: f64) -> Result<f64> {
    Ok(ensemble_xcorr(records, rates, tau_max)?.max_conditioned)
}

/// Stationary two-time correlation of two homodyne currents from the
/// quantum regression theorem:
/// `E[J₁(t)J₂(t−τ)] = κ₁κ₂ tr[X₁ e^{𝓛τ}(c₂ρ + ρc₂†)]` for `τ > 0` and the
/// mirror expression for `τ < 0`, with `cᵢ = aᵢe^{−iφᵢ}`, `Xᵢ = cᵢ + cᵢ†`.
///
/// Returns `E[C_τ(J₁, J₂)]` for a record of `n` samples spaced `dt`, at
/// lags `j·dt` for `|j| ≤ lags`: the overlap `(n − |j|)·dt` times the
/// correlation. The equal-time value excludes the (independent) shot noise.
pub fn two_time_xcorr(
    model: &LindbladModel,
    rho_ss: &DensityMatrix,
    channels: (&MeasuredChannel, &MeasuredChannel),
    dt: f64,
    n: usize,
    lags: usize,
) -> Result<XCorrResult> {
    if rho_ss.space() != model.space() {
        return Err(Error::ShapeMismatch("steady state on a different space".into()));
    }
    let d = rho_ss.dim();
    let l = model.liouvillian();
    let norm = l.norm_inf();
    let krylov = Krylov::default();
    let rho = rho_ss.data();
    let (c1, c2) = (channels.0, channels.1);
    // g(j·dt) for j = 0..=lags with `late` measured after `early`
    let branch = |late: &MeasuredChannel, early: &MeasuredChannel| -> Result<Vec<f64>> {
        let ce = early.op.scale(C64::from_polar(1.0, -early.phase)).to_dense();
        let cl = late.op.scale(C64::from_polar(1.0, -late.phase)).to_dense();
        let src = &ce * rho + rho * ce.adjoint();
        let xl = Mat::from_fn(d, d, |i, j| cl[(i, j)] + cl[(j, i)].conj());
        let mut v: Vec<C64> = (0..d * d).map(|k| src[(k % d, k / d)]).collect();
        let mut out = Vec::with_capacity(lags + 1);
        for j in 0..=lags {
            if j > 0 {
                v = krylov.expv(l.matrix(), norm, dt, &v)?;
            }
            // tr[X v] = Σ_{i,k} X_{k,i} v_{i,k}
            let mut t = C64::new(0.0, 0.0);
            for col in 0..d {
                for row in 0..d {
                    t += xl[(col, row)] * v[row + col * d];
                }
            }
            out.push(t.re);
        }
        Ok(out)
    };
    let pos = branch(c1, c2)?;
    let neg = branch(c2, c1)?;
    let k12 = c1.rate * c2.rate;
    let lags = lags.min(n.saturating_sub(1));
    let mut taus = Vec::with_capacity(2 * lags + 1);
    let mut values = Vec::with_capacity(2 * lags + 1);
    for j in -(lags as i64)..=(lags as i64) {
        let g = if j >= 0 { pos[j as usize] } else { neg[(-j) as usize] };
        let overlap = (n as f64 - j.unsigned_abs() as f64) * dt;
        taus.push(j as f64 * dt);
        values.push(k12 * overlap * g);
    }
    Ok(XCorrResult::from_curve(taus, values))
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qspace::FockSpace;

    #[test]
    fn laguerre_values() {
        let mut l = vec![0.0; 4];
        laguerre(3, 0.0, 2.0, &mut l);
        // L₃(x) = (−x³ + 9x² − 18x + 6)/6
        assert!((l[3] - (-8.0 + 36.0 - 36.0 + 6.0) / 6.0).abs() < 1e-14);
        laguerre(2, 1.0, 0.5, &mut l);
        // L₂⁽¹⁾(x) = x²/2 − 3x + 3
        assert!((l[2] - (0.125 - 1.5 + 3.0)).abs() < 1e-14);
    }

    #[test]
    fn xcorr_constant_signal() {
        let x = vec![1.0; 100];
        let c = cross_correlation(&x, &x, 0.1, 0.0).unwrap();
        assert_eq!(c.taus, vec![0.0]);
        assert!((c.values[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_guards() {
        let s = FockSpace::new(&[3]).unwrap();
        let rho = DensityMatrix::basis(&s, &[1]).unwrap();
        assert_eq!(fock_fidelity(&rho, 1).unwrap(), 1.0);
        assert!(fock_fidelity(&rho, 3).is_err());
    }
}
