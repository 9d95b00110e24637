//! Model builders for the three tiers: the full driven circuit, the same
//! circuit in the displaced frame, and the effective Kerr oscillator with
//! engineered Lorentzian up/down jumps.
//!
//! Detunings follow `Δ = ω_mode − ω_drive`. The mode order of a single
//! oscillator is `(a, c, d)`; two oscillators use `(a₁, c₁, d₁, a₂, c₂, d₂)`.

use serde::{Deserialize, Serialize};

use crate::evolve::LindbladModel;
use crate::qspace::{destroy, number, transition, FockSpace, Operator};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Parameters of one Kerr oscillator `a` with its two linear resonators
/// `c` (damping) and `d` (amplification). All values in rad/µs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    #[serde(deserialize_with = "crate::units::rate")]
    pub delta_a: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub delta_c: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub delta_d: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub k: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub chi_ac: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub chi_ad: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub eps_a: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub eps_c: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub eps_d: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub kappa_a: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub kappa_c: f64,
    #[serde(deserialize_with = "crate::units::rate")]
    pub kappa_d: f64,
}

impl OscillatorParams {
    /// Reference device: κ^a = 0.1, κ^c = κ^d = 10, K = 30, χ = 8,
    /// ε^a = 500, ε^c = ε^d = 2000. The linear detunings are seeded from the
    /// sideband conditions for `n0 = 1`.
    pub fn reference(delta_a: f64) -> Self {
        let mut p = OscillatorParams {
            delta_a,
            delta_c: 0.0,
            delta_d: 0.0,
            k: 30.0,
            chi_ac: 8.0,
            chi_ad: 8.0,
            eps_a: 500.0,
            eps_c: 2000.0,
            eps_d: 2000.0,
            kappa_a: 0.1,
            kappa_c: 10.0,
            kappa_d: 10.0,
        };
        p.delta_c = delta_a - 2.0 * p.k;
        p.delta_d = -delta_a;
        if let Ok((tuned, _)) = stabilize_detunings(&p, 1, &FixedPoint::default()) {
            p = tuned;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.delta_a,
            self.delta_c,
            self.delta_d,
            self.k,
            self.chi_ac,
            self.chi_ad,
            self.eps_a,
            self.eps_c,
            self.eps_d,
            self.kappa_a,
            self.kappa_c,
            self.kappa_d,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite oscillator parameter".into()));
        }
        if !(self.kappa_a > 0.0 && self.kappa_c > 0.0 && self.kappa_d > 0.0) {
            return Err(Error::InvalidParams("all loss rates must be positive".into()));
        }
        if !(self.k > 0.0) {
            return Err(Error::InvalidParams("self-Kerr K must be positive".into()));
        }
        if self.chi_ac < 0.0 || self.chi_ad < 0.0 {
            return Err(Error::InvalidParams("cross-Kerr χ must be non-negative".into()));
        }
        Ok(())
    }

    /// Soft regime checks; empty when the parameters are in the intended
    /// single-photon Kerr regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.k / self.kappa_a <= 1.0 {
            w.push(format!(
                "K/κ^a = {:.3} ≤ 1: not in the single-photon Kerr regime",
                self.k / self.kappa_a
            ));
        }
        w
    }

    /// Mean loss of the two linear resonators.
    pub fn kappa_lin(&self) -> f64 {
        0.5 * (self.kappa_c + self.kappa_d)
    }
}

/// Two oscillators coupled by the cross-Kerr `J a₁†a₁a₂†a₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub osc: [OscillatorParams; 2],
    #[serde(deserialize_with = "crate::units::rate")]
    pub j: f64,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        self.osc[0].validate()?;
        self.osc[1].validate()?;
        if !self.j.is_finite() {
            return Err(Error::InvalidParams("non-finite J".into()));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w: Vec<String> = self.osc.iter().flat_map(|o| o.warnings()).collect();
        let kmin = self.osc[0].k.min(self.osc[1].k);
        if self.j.abs() > 0.3 * kmin {
            w.push(format!("|J| = {} is not small compared with K = {kmin}", self.j.abs()));
        }
        w
    }
}

/// Displacement amplitudes and renormalized detunings of one oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacedFrame {
    pub alpha: C64,
    pub gamma: C64,
    pub delta: C64,
    /// `Δ^a − χ^ac|γ|² − χ^ad|δ|²`
    pub delta_a_tilde: f64,
    /// `Δ̃^a − 4K|α|²`
    pub delta_a_hat: f64,
    pub delta_c_tilde: f64,
    pub delta_d_tilde: f64,
}

impl DisplacedFrame {
    /// Smallness ratios `(K/χ^ac)/|γ/α|` and `(K/χ^ad)/|δ/α|`; the squeezing
    /// term is negligible when both are ≪ 1. Infinite when a χ vanishes.
    pub fn smallness_ratios(&self, p: &OscillatorParams) -> (f64, f64) {
        let a = self.alpha.norm();
        let ratio = |chi: f64, amp: C64| {
            if chi == 0.0 || amp.norm() == 0.0 {
                f64::INFINITY
            } else {
                (p.k / chi) * a / amp.norm()
            }
        };
        (ratio(p.chi_ac, self.gamma), ratio(p.chi_ad, self.delta))
    }
}

fn displacement(eps: f64, delta: f64, kappa: f64, what: &'static str) -> Result<C64> {
    let den = C64::new(delta, -0.5 * kappa);
    if den.norm() == 0.0 {
        return Err(Error::ZeroDenominator(what));
    }
    Ok(-eps / den)
}

/// Coherent displacements that cancel the drives, and the resulting
/// frequency renormalizations.
pub fn compute_displacements(p: &OscillatorParams) -> Result<DisplacedFrame> {
    let alpha = displacement(p.eps_a, p.delta_a, p.kappa_a, "Δ^a − iκ^a/2")?;
    let gamma = displacement(p.eps_c, p.delta_c, p.kappa_c, "Δ^c − iκ^c/2")?;
    let delta = displacement(p.eps_d, p.delta_d, p.kappa_d, "Δ^d − iκ^d/2")?;
    let (a2, g2, d2) = (alpha.norm_sqr(), gamma.norm_sqr(), delta.norm_sqr());
    let delta_a_tilde = p.delta_a - p.chi_ac * g2 - p.chi_ad * d2;
    Ok(DisplacedFrame {
        alpha,
        gamma,
        delta,
        delta_a_tilde,
        delta_a_hat: delta_a_tilde - 4.0 * p.k * a2,
        delta_c_tilde: p.delta_c - p.chi_ac * a2,
        delta_d_tilde: p.delta_d - p.chi_ad * a2,
    })
}

/// Renormalized linear detunings `(Δ̃^c, Δ̃^d)` that put the red sideband
/// `Δ̂^a = Δ̃^c + 2Kn₀` and the blue sideband `Δ̂^a = −Δ̃^d + 2K(n₀−1)` on
/// resonance.
pub fn sideband_conditions(n0: usize, frame: &DisplacedFrame, k: f64) -> (f64, f64) {
    let down = 2.0 * k * n0 as f64;
    let up = 2.0 * k * (n0 as f64 - 1.0);
    (frame.delta_a_hat - down, up - frame.delta_a_hat)
}

/// Settings of the self-consistent detuning iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for FixedPoint {
    fn default() -> Self {
        FixedPoint {
            max_iter: 50,
            rel_tol: 1e-10,
        }
    }
}

/// Bare detunings `(Δ^c, Δ^d)` for one round of the sideband conditions
/// evaluated in the frame of `p`.
pub fn sideband_bare_detunings(p: &OscillatorParams, n0: usize) -> Result<(f64, f64)> {
    let frame = compute_displacements(p)?;
    let (tc, td) = sideband_conditions(n0, &frame, p.k);
    let a2 = frame.alpha.norm_sqr();
    Ok((tc + p.chi_ac * a2, td + p.chi_ad * a2))
}

/// Iterate the sideband conditions until the bare linear detunings stop
/// moving. `Δ̂^a` depends on `γ, δ`, which depend on the linear detunings,
/// so the one-shot values are only a first approximation.
///
/// Returns the tuned parameters and the number of iterations used.
pub fn stabilize_detunings(p: &OscillatorParams, n0: usize, fp: &FixedPoint) -> Result<(OscillatorParams, usize)> {
    if n0 == 0 {
        return Err(Error::InvalidParams("target Fock number must be ≥ 1".into()));
    }
    let mut q = p.clone();
    for it in 1..=fp.max_iter {
        let (dc, dd) = sideband_bare_detunings(&q, n0)?;
        let change = (dc - q.delta_c).abs().max((dd - q.delta_d).abs());
        let scale = dc.abs().max(dd.abs()).max(f64::MIN_POSITIVE);
        q.delta_c = dc;
        q.delta_d = dd;
        if change <= fp.rel_tol * scale {
            return Ok((q, it));
        }
    }
    Err(Error::Solver(format!(
        "sideband fixed point did not converge in {} iterations",
        fp.max_iter
    )))
}

/// Parameters of the effective single-oscillator master equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveKerrParams {
    pub delta_hat: f64,
    pub k: f64,
    pub kappa_a: f64,
    /// Loss of the eliminated linear resonators; sets `σ`.
    pub kappa_lin: f64,
    pub gamma_up: f64,
    pub gamma_down: f64,
    pub n0: usize,
    pub sigma: f64,
    /// Displacement of the Kerr mode, used for the optional squeezing term
    /// and for the coupling amplitude between two oscillators.
    pub alpha: C64,
    pub squeezing: bool,
}

impl EffectiveKerrParams {
    pub fn new(
        delta_hat: f64,
        k: f64,
        kappa_a: f64,
        kappa_lin: f64,
        gamma_up: f64,
        gamma_down: f64,
        n0: usize,
    ) -> Result<Self> {
        let p = EffectiveKerrParams {
            delta_hat,
            k,
            kappa_a,
            kappa_lin,
            gamma_up,
            gamma_down,
            n0,
            sigma: kappa_lin / (4.0 * k),
            alpha: C64::new(0.0, 0.0),
            squeezing: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// Adiabatic elimination of the linear resonators of `p` at the given
    /// frame: `γ↓ = 4|αγχ^ac|²/κ`, `γ↑ = 4|αδχ^ad|²/κ` with `κ` the mean
    /// linear loss.
    pub fn from_frame(p: &OscillatorParams, frame: &DisplacedFrame, n0: usize) -> Result<Self> {
        let kappa = p.kappa_lin();
        let down = 4.0 * (frame.alpha * frame.gamma * p.chi_ac).norm_sqr() / kappa;
        let up = 4.0 * (frame.alpha * frame.delta * p.chi_ad).norm_sqr() / kappa;
        let mut e = Self::new(frame.delta_a_hat, p.k, p.kappa_a, kappa, up, down, n0)?;
        e.alpha = frame.alpha;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::InvalidParams("target Fock number must be ≥ 1".into()));
        }
        if !(self.k > 0.0 && self.kappa_lin > 0.0) {
            return Err(Error::InvalidParams("K and the linear loss must be positive".into()));
        }
        if !(self.kappa_a >= 0.0) {
            return Err(Error::NegativeRate(self.kappa_a));
        }
        for r in [self.gamma_up, self.gamma_down] {
            if !(r >= 0.0) {
                return Err(Error::NegativeRate(r));
            }
        }
        let expect = self.kappa_lin / (4.0 * self.k);
        if (self.sigma - expect).abs() > 1e-12 * expect {
            return Err(Error::InvalidParams(format!(
                "σ = {} inconsistent with κ/(4K) = {expect}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// `L_m = σ² / ((n₀ − m)² + σ²)`.
    pub fn lorentzian(&self, m: usize) -> f64 {
        let s2 = self.sigma * self.sigma;
        let d = self.n0 as f64 - m as f64;
        s2 / (d * d + s2)
    }
}

/// `Δ̂ a†a − K a†a†aa` on `mode`, plus the optional squeezing term.
fn kerr_hamiltonian(space: &FockSpace, mode: usize, p: &EffectiveKerrParams) -> Result<Operator> {
    let n = number(space, mode)?;
    let a = destroy(space, mode)?;
    let ad = a.dag();
    let kerr = &(&ad * &ad) * &(&a * &a);
    let mut h = Operator::linear_combination(space, &[(re(p.delta_hat), &n), (re(-p.k), &kerr)]);
    if p.squeezing {
        let a2 = p.alpha * p.alpha;
        let sq = Operator::linear_combination(space, &[(-p.k * a2, &(&ad * &ad)), (-p.k * a2.conj(), &(&a * &a))]);
        h = &h + &sq;
    }
    Ok(h)
}

/// Linear loss followed by the Lorentzian-weighted up and down jumps of
/// one effective oscillator on `mode`. Zero-rate jumps are omitted.
fn effective_collapses(space: &FockSpace, mode: usize, p: &EffectiveKerrParams) -> Result<Vec<(f64, Operator)>> {
    let dim = space.dims()[mode];
    let mut out = vec![(p.kappa_a, destroy(space, mode)?)];
    for m in 1..dim {
        let rate = p.gamma_up * p.lorentzian(m);
        if rate > 0.0 {
            out.push((rate, transition(space, mode, m, m - 1)?.scale(re((m as f64).sqrt()))));
        }
    }
    for m in 0..dim - 1 {
        let rate = p.gamma_down * p.lorentzian(m);
        if rate > 0.0 {
            out.push((
                rate,
                transition(space, mode, m, m + 1)?.scale(re(((m + 1) as f64).sqrt())),
            ));
        }
    }
    Ok(out)
}

fn check_effective_dim(dim: usize, n0: usize) -> Result<()> {
    if dim < n0 + 3 {
        return Err(Error::TruncationTooSmall { dim, n0, need: n0 + 3 });
    }
    Ok(())
}

/// Effective master equation of one stabilized oscillator. The first
/// collapse channel is always the linear loss `(κ^a, a)`.
pub fn build_effective_model(p: &EffectiveKerrParams, space: &FockSpace) -> Result<LindbladModel> {
    p.validate()?;
    if space.n_modes() != 1 {
        return Err(Error::InvalidSpace(format!(
            "effective model needs one mode, got {}",
            space.n_modes()
        )));
    }
    check_effective_dim(space.dims()[0], p.n0)?;
    LindbladModel::new(kerr_hamiltonian(space, 0, p)?, effective_collapses(space, 0, p)?)
}

/// Coupling between two effective oscillators generated by `J a₁†a₁a₂†a₂`
/// in the displaced frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoupling {
    pub j: f64,
    pub alpha1: C64,
    pub alpha2: C64,
    /// Keep the residual density-density term `J n₁n₂`.
    pub cross_kerr: bool,
    /// Keep the shifts `J|α₂|² n₁ + J|α₁|² n₂`.
    pub shifts: bool,
}

impl EffectiveCoupling {
    pub fn new(j: f64, alpha1: C64, alpha2: C64) -> Self {
        EffectiveCoupling {
            j,
            alpha1,
            alpha2,
            cross_kerr: true,
            shifts: true,
        }
    }

    /// Pure hopping `J_lin a₁†a₂ + h.c.` with no shifts or cross-Kerr.
    pub fn hopping_only(j_lin: C64) -> Self {
        EffectiveCoupling {
            j: 1.0,
            alpha1: j_lin,
            alpha2: C64::new(1.0, 0.0),
            cross_kerr: false,
            shifts: false,
        }
    }

    /// `J α₁ α₂*`.
    pub fn j_lin(&self) -> C64 {
        self.j * self.alpha1 * self.alpha2.conj()
    }
}

/// Two effective oscillators on a two-mode space with hopping, shifts and
/// (optionally) the residual cross-Kerr. Collapse channels 0 and
/// `1 + jumps₁` are the linear losses of `a₁` and `a₂`.
pub fn build_coupled_effective_model(
    p1: &EffectiveKerrParams,
    p2: &EffectiveKerrParams,
    coupling: &EffectiveCoupling,
    space: &FockSpace,
) -> Result<LindbladModel> {
    p1.validate()?;
    p2.validate()?;
    if space.n_modes() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "coupled model needs two modes, got {}",
            space.n_modes()
        )));
    }
    check_effective_dim(space.dims()[0], p1.n0)?;
    check_effective_dim(space.dims()[1], p2.n0)?;
    let h1 = kerr_hamiltonian(space, 0, p1)?;
    let h2 = kerr_hamiltonian(space, 1, p2)?;
    let a1 = destroy(space, 0)?;
    let a2 = destroy(space, 1)?;
    let n1 = number(space, 0)?;
    let n2 = number(space, 1)?;
    let jl = coupling.j_lin();
    let hop12 = &a1.dag() * &a2;
    let hop21 = &a2.dag() * &a1;
    let mut terms: Vec<(C64, &Operator)> = vec![(re(1.0), &h1), (re(1.0), &h2), (jl, &hop12), (jl.conj(), &hop21)];
    let n1n2 = &n1 * &n2;
    if coupling.shifts {
        terms.push((re(coupling.j * coupling.alpha2.norm_sqr()), &n1));
        terms.push((re(coupling.j * coupling.alpha1.norm_sqr()), &n2));
    }
    if coupling.cross_kerr {
        terms.push((re(coupling.j), &n1n2));
    }
    let h = Operator::linear_combination(space, &terms);
    let mut collapses = effective_collapses(space, 0, p1)?;
    collapses.extend(effective_collapses(space, 1, p2)?);
    LindbladModel::new(h, collapses)
}

fn check_modes(space: &FockSpace, want: usize, what: &str) -> Result<()> {
    if space.n_modes() != want {
        return Err(Error::InvalidSpace(format!(
            "{what} needs {want} modes, got {}",
            space.n_modes()
        )));
    }
    Ok(())
}

/// Lab-frame (drive-rotating) Hamiltonian terms of one oscillator whose
/// modes start at `base`.
fn full_oscillator_terms(
    space: &FockSpace,
    base: usize,
    p: &OscillatorParams,
) -> Result<(Operator, Vec<(f64, Operator)>)> {
    let a = destroy(space, base)?;
    let c = destroy(space, base + 1)?;
    let d = destroy(space, base + 2)?;
    let (na, nc, nd) = (number(space, base)?, number(space, base + 1)?, number(space, base + 2)?);
    let ad = a.dag();
    let kerr = &(&ad * &ad) * &(&a * &a);
    let nanc = &na * &nc;
    let nand = &na * &nd;
    let xa = &a + &ad;
    let xc = &c + &c.dag();
    let xd = &d + &d.dag();
    let h = Operator::linear_combination(
        space,
        &[
            (re(p.delta_a), &na),
            (re(p.delta_c), &nc),
            (re(p.delta_d), &nd),
            (re(-p.k), &kerr),
            (re(-p.chi_ac), &nanc),
            (re(-p.chi_ad), &nand),
            (re(p.eps_a), &xa),
            (re(p.eps_c), &xc),
            (re(p.eps_d), &xd),
        ],
    );
    Ok((h, vec![(p.kappa_a, a), (p.kappa_c, c), (p.kappa_d, d)]))
}

/// Full driven circuit in the frame rotating with the drives.
///
/// A three-mode space `(a, c, d)` builds oscillator 0 alone and requires
/// `J = 0`; a six-mode space builds both oscillators and the `J` coupling.
pub fn build_full_model(p: &CircuitParams, space: &FockSpace) -> Result<LindbladModel> {
    p.validate()?;
    match space.n_modes() {
        3 => {
            if p.j != 0.0 {
                return Err(Error::InvalidSpace("a single oscillator requires J = 0".into()));
            }
            let (h, c) = full_oscillator_terms(space, 0, &p.osc[0])?;
            LindbladModel::new(h, c)
        }
        6 => {
            let (h1, mut c1) = full_oscillator_terms(space, 0, &p.osc[0])?;
            let (h2, c2) = full_oscillator_terms(space, 3, &p.osc[1])?;
            let n1n2 = &number(space, 0)? * &number(space, 3)?;
            let h = Operator::linear_combination(space, &[(re(1.0), &h1), (re(1.0), &h2), (re(p.j), &n1n2)]);
            c1.extend(c2);
            LindbladModel::new(h, c1)
        }
        n => Err(Error::InvalidSpace(format!("full model needs 3 or 6 modes, got {n}"))),
    }
}

/// Full single-oscillator model on an `(a, c, d)` space.
pub fn build_full_oscillator_model(p: &OscillatorParams, space: &FockSpace) -> Result<LindbladModel> {
    check_modes(space, 3, "single-oscillator full model")?;
    p.validate()?;
    let (h, c) = full_oscillator_terms(space, 0, p)?;
    LindbladModel::new(h, c)
}

/// Which terms generated by the displacement are kept in the displaced
/// frame. The renormalized number terms, the Kerr and cross-Kerr terms,
/// the red sideband `αγ* a†c + h.c.`, the blue sideband `αδ a†d† + h.c.`
/// and all dissipators are always present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplacedTerms {
    /// `αγ a†c† + h.c.` and `αδ* a†d + h.c.`
    pub counter_rotating: bool,
    /// `K(α² a†² + h.c.)`
    pub squeezing: bool,
    /// `2K(α a†²a + h.c.)`
    pub kerr_cubic: bool,
    /// `n_a(γ c† + h.c.)`, `(α a† + h.c.) n_c` and the `d` analogues.
    pub cross_kerr_linear: bool,
    /// Linear drives left over after the displacement (they vanish only to
    /// first order in the nonlinearities).
    pub residual_drives: bool,
}

impl DisplacedTerms {
    /// Every term of the exact expansion.
    pub fn all() -> Self {
        DisplacedTerms {
            counter_rotating: true,
            squeezing: true,
            kerr_cubic: true,
            cross_kerr_linear: true,
            residual_drives: true,
        }
    }

    /// Resonant terms only.
    pub fn rwa() -> Self {
        DisplacedTerms {
            counter_rotating: false,
            squeezing: false,
            kerr_cubic: false,
            cross_kerr_linear: false,
            residual_drives: false,
        }
    }
}

impl Default for DisplacedTerms {
    fn default() -> Self {
        Self::all()
    }
}

/// Displaced-frame Hamiltonian of one oscillator on modes `base..base+3`.
/// `extra_shift` is added to `Δ̂^a` and `extra_drive` to the residual `a`
/// drive (both come from the inter-oscillator coupling).
fn displaced_oscillator_terms(
    space: &FockSpace,
    base: usize,
    p: &OscillatorParams,
    f: &DisplacedFrame,
    terms: DisplacedTerms,
    extra_shift: f64,
    extra_drive: C64,
) -> Result<(Operator, Vec<(f64, Operator)>)> {
    let a = destroy(space, base)?;
    let c = destroy(space, base + 1)?;
    let d = destroy(space, base + 2)?;
    let (ad, cd, dd) = (a.dag(), c.dag(), d.dag());
    let (na, nc, nd) = (number(space, base)?, number(space, base + 1)?, number(space, base + 2)?);
    let (al, ga, de) = (f.alpha, f.gamma, f.delta);
    let (kc, kd) = (p.chi_ac, p.chi_ad);

    let kerr = &(&ad * &ad) * &(&a * &a);
    let nanc = &na * &nc;
    let nand = &na * &nd;
    let red = &ad * &c;
    let blue = &ad * &dd;
    let mut t: Vec<(C64, Operator)> = vec![
        (re(f.delta_a_hat + extra_shift), na.clone()),
        (re(f.delta_c_tilde), nc.clone()),
        (re(f.delta_d_tilde), nd.clone()),
        (re(-p.k), kerr),
        (re(-kc), nanc),
        (re(-kd), nand),
        (-kc * al * ga.conj(), red.clone()),
        (-kc * al.conj() * ga, red.dag()),
        (-kd * al * de, blue.clone()),
        (-kd * al.conj() * de.conj(), blue.dag()),
    ];
    if terms.counter_rotating {
        let cc = &ad * &cd;
        let ad_d = &ad * &d;
        t.push((-kc * al * ga, cc.clone()));
        t.push((-kc * (al * ga).conj(), cc.dag()));
        t.push((-kd * al * de.conj(), ad_d.clone()));
        t.push((-kd * al.conj() * de, ad_d.dag()));
    }
    if terms.squeezing {
        let a2 = &ad * &ad;
        t.push((-p.k * al * al, a2.clone()));
        t.push((-p.k * (al * al).conj(), a2.dag()));
    }
    if terms.kerr_cubic {
        let cub = &(&ad * &ad) * &a;
        t.push((-2.0 * p.k * al, cub.clone()));
        t.push((-2.0 * p.k * al.conj(), cub.dag()));
    }
    if terms.cross_kerr_linear {
        t.push((-kc * ga, &na * &cd));
        t.push((-kc * ga.conj(), &na * &c));
        t.push((-kc * al, &ad * &nc));
        t.push((-kc * al.conj(), &a * &nc));
        t.push((-kd * de, &na * &dd));
        t.push((-kd * de.conj(), &na * &d));
        t.push((-kd * al, &ad * &nd));
        t.push((-kd * al.conj(), &a * &nd));
    }
    if terms.residual_drives {
        let (a2, g2, d2) = (al.norm_sqr(), ga.norm_sqr(), de.norm_sqr());
        let ra =
            al * (C64::new(p.delta_a, -0.5 * p.kappa_a) - 2.0 * p.k * a2 - kc * g2 - kd * d2) + p.eps_a + extra_drive;
        let rc = ga * (C64::new(p.delta_c, -0.5 * p.kappa_c) - kc * a2) + p.eps_c;
        let rd = de * (C64::new(p.delta_d, -0.5 * p.kappa_d) - kd * a2) + p.eps_d;
        t.push((ra, ad.clone()));
        t.push((ra.conj(), a.clone()));
        t.push((rc, cd.clone()));
        t.push((rc.conj(), c.clone()));
        t.push((rd, dd.clone()));
        t.push((rd.conj(), d.clone()));
    }
    let refs: Vec<(C64, &Operator)> = t.iter().map(|(s, o)| (*s, o)).collect();
    let h = Operator::linear_combination(space, &refs);
    Ok((h, vec![(p.kappa_a, a), (p.kappa_c, c), (p.kappa_d, d)]))
}

/// One oscillator in the frame displaced by `(α, γ, δ)` on an `(a, c, d)`
/// space. With [`DisplacedTerms::all`] this is unitarily equivalent to the
/// full model up to truncation.
pub fn build_displaced_model(
    p: &OscillatorParams,
    frame: &DisplacedFrame,
    terms: DisplacedTerms,
    space: &FockSpace,
) -> Result<LindbladModel> {
    check_modes(space, 3, "displaced single-oscillator model")?;
    p.validate()?;
    let (h, c) = displaced_oscillator_terms(space, 0, p, frame, terms, 0.0, C64::new(0.0, 0.0))?;
    LindbladModel::new(h, c)
}

/// Both oscillators in the displaced frame on a six-mode space. The `J`
/// term contributes the hopping `J α₁α₂* a₁†a₂ + h.c.`, the shifts
/// `J|α₂|² n₁ + J|α₁|² n₂`, the residual `J n₁n₂`, and (as counter-rotating
/// and cross-Kerr-linear terms) the remainder of its expansion.
pub fn build_displaced_pair_model(
    p: &CircuitParams,
    frames: &[DisplacedFrame; 2],
    terms: DisplacedTerms,
    space: &FockSpace,
) -> Result<LindbladModel> {
    check_modes(space, 6, "displaced two-oscillator model")?;
    p.validate()?;
    let (a1s, a2s) = (frames[0].alpha, frames[1].alpha);
    let j = p.j;
    let (h1, mut c1) = displaced_oscillator_terms(
        space,
        0,
        &p.osc[0],
        &frames[0],
        terms,
        j * a2s.norm_sqr(),
        j * a2s.norm_sqr() * a1s,
    )?;
    let (h2, c2) = displaced_oscillator_terms(
        space,
        3,
        &p.osc[1],
        &frames[1],
        terms,
        j * a1s.norm_sqr(),
        j * a1s.norm_sqr() * a2s,
    )?;
    let a1 = destroy(space, 0)?;
    let a2 = destroy(space, 3)?;
    let (n1, n2) = (number(space, 0)?, number(space, 3)?);
    let hop = &a1.dag() * &a2;
    let n1n2 = &n1 * &n2;
    let mut t: Vec<(C64, Operator)> = vec![
        (re(1.0), h1),
        (re(1.0), h2),
        (re(j), n1n2),
        (j * a1s * a2s.conj(), hop.clone()),
        (j * (a1s * a2s.conj()).conj(), hop.dag()),
    ];
    if terms.counter_rotating {
        let pair = &a1.dag() * &a2.dag();
        t.push((j * a1s * a2s, pair.clone()));
        t.push((j * (a1s * a2s).conj(), pair.dag()));
    }
    if terms.cross_kerr_linear {
        t.push((j * a1s, &a1.dag() * &n2));
        t.push((j * a1s.conj(), &a1 * &n2));
        t.push((j * a2s, &n1 * &a2.dag()));
        t.push((j * a2s.conj(), &n1 * &a2));
    }
    let refs: Vec<(C64, &Operator)> = t.iter().map(|(s, o)| (*s, o)).collect();
    let h = Operator::linear_combination(space, &refs);
    c1.extend(c2);
    LindbladModel::new(h, c1)
}

/// `i·rate/2 (α* a − α a†)`: the Hamiltonian-like term the loss channel of
/// a displaced mode contributes.
pub fn displaced_loss_term(space: &FockSpace, mode: usize, rate: f64, alpha: C64) -> Result<Operator> {
    let a = destroy(space, mode)?;
    let half = I * (0.5 * rate);
    Ok(Operator::linear_combination(
        space,
        &[(half * alpha.conj(), &a), (-half * alpha, &a.dag())],
    ))
}
