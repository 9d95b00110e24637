use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evolve::StepControl;
use crate::models::{compute_displacements, EffectiveKerrParams, OscillatorParams};
use crate::units;
use crate::{Error, Result};

/// Which model family an experiment runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    /// Every term of the driven circuit, written in the displaced frame
    /// (unitarily equivalent to the lab frame up to truncation).
    Full,
    /// Displaced frame with the resonant terms only.
    Displaced,
    /// Adiabatically eliminated Kerr oscillators.
    Effective,
}

/// Steady-state solver choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    /// Charge-sector preconditioned GMRES where applicable, else direct.
    Auto,
    Direct,
    Sector,
    TrajectoryAverage,
}

/// Optional overrides of the reference device. Missing linear detunings
/// are seeded from the sideband conditions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorOverrides {
    #[serde(default, deserialize_with = "opt_rate")]
    pub delta_a: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub delta_c: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub delta_d: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub k: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub chi_ac: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub chi_ad: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub eps_a: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub eps_c: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub eps_d: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub kappa_a: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub kappa_c: Option<f64>,
    #[serde(default, deserialize_with = "opt_rate")]
    pub kappa_d: Option<f64>,
}

fn opt_rate<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    units::rate(d).map(Some)
}

fn rate_list<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    struct W(#[serde(deserialize_with = "units::rate")] f64);
    let v: Vec<W> = Vec::deserialize(d)?;
    Ok(v.into_iter().map(|w| w.0).collect())
}

impl OscillatorOverrides {
    /// Reference device at `delta_a` with the overrides applied. Unless both
    /// linear detunings are given they are re-seeded from the sideband
    /// conditions of the overridden device.
    pub fn device(&self, delta_a: f64, n0: usize) -> Result<OscillatorParams> {
        let mut p = OscillatorParams::reference(delta_a);
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.k, self.k);
        set(&mut p.chi_ac, self.chi_ac);
        set(&mut p.chi_ad, self.chi_ad);
        set(&mut p.eps_a, self.eps_a);
        set(&mut p.eps_c, self.eps_c);
        set(&mut p.eps_d, self.eps_d);
        set(&mut p.kappa_a, self.kappa_a);
        set(&mut p.kappa_c, self.kappa_c);
        set(&mut p.kappa_d, self.kappa_d);
        if self.delta_c.is_none() || self.delta_d.is_none() {
            p.delta_c = delta_a - 2.0 * p.k * n0 as f64;
            p.delta_d = -delta_a;
            if let Ok((tuned, _)) = crate::models::stabilize_detunings(&p, n0, &crate::models::FixedPoint::default()) {
                p = tuned;
            }
        }
        set(&mut p.delta_c, self.delta_c);
        set(&mut p.delta_d, self.delta_d);
        p.validate()?;
        Ok(p)
    }
}

/// A uniform sweep axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// `delta_a` for stabilization, `delta_hat` for synchronization and
    /// homodyne runs.
    pub name: String,
    #[serde(deserialize_with = "units::rate")]
    pub start: f64,
    #[serde(deserialize_with = "units::rate")]
    pub stop: f64,
    pub points: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + i as f64 * h).collect()
    }

    pub fn step(&self) -> f64 {
        if self.points < 2 {
            0.0
        } else {
            (self.stop - self.start) / (self.points - 1) as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub method: SolverChoice,
    /// GMRES relative tolerance of the sector solver.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Internal step control of the stochastic integrators.
    pub rate_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            method: SolverChoice::Auto,
            tol: 1e-14,
            restart: 120,
            max_iter: 2000,
            rate_factor: StepControl::default().rate_factor,
        }
    }
}

/// Trajectory settings (µs for times).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySettings {
    pub n_traj: usize,
    pub seed: u64,
    /// Discarded initial interval.
    pub t_burn: f64,
    /// Averaging (or record) length after the burn-in.
    pub t_avg: f64,
    /// Output spacing of homodyne records.
    pub dt_out: f64,
    /// Largest cross-correlation lag.
    pub tau_max: f64,
    /// Minimum fraction of successful trajectories.
    pub min_success: f64,
    /// Also write every homodyne record as `traj_<point>.bin`.
    pub archive: bool,
}

impl Default for TrajectorySettings {
    fn default() -> Self {
        TrajectorySettings {
            n_traj: 500,
            seed: 20_240_601,
            t_burn: 0.0,
            t_avg: 100.0,
            dt_out: 0.05,
            tau_max: 1.0,
            min_success: 0.95,
            archive: false,
        }
    }
}

/// Fock-state stabilization (photon statistics, fidelity vs `Δ^a`,
/// optimal linear detunings).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilizeSettings {
    pub n0: usize,
    /// Total steady-state evaluations allowed per sweep point.
    pub max_evals: usize,
    /// Coarse grid is `grid × grid` around the analytic seed.
    pub grid: usize,
    #[serde(deserialize_with = "units::rate")]
    pub grid_step: f64,
    /// Simplex stops once its extent is below this.
    #[serde(deserialize_with = "units::rate")]
    pub resolution: f64,
    /// Half-width of the search box around the seed.
    #[serde(deserialize_with = "units::rate")]
    pub bound: f64,
    /// Skip the optimizer and use the analytic seed.
    pub optimize: bool,
    /// Sweep indices that get a Wigner map; empty picks the middle point.
    pub wigner_points: Vec<usize>,
    pub wigner_extent: f64,
    pub wigner_grid: usize,
}

impl Default for StabilizeSettings {
    fn default() -> Self {
        StabilizeSettings {
            n0: 1,
            max_evals: 80,
            grid: 5,
            grid_step: 10.0,
            resolution: 0.1,
            bound: 60.0,
            optimize: true,
            wigner_points: Vec::new(),
            wigner_extent: 4.0,
            wigner_grid: 161,
        }
    }
}

/// Two coupled oscillators: synchronization sweeps and homodyne runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSettings {
    /// Coupling strengths for the synchronization sweep.
    #[serde(deserialize_with = "rate_list")]
    pub j_values: Vec<f64>,
    /// Coupling of the Hinton exports and of homodyne runs.
    #[serde(deserialize_with = "units::rate")]
    pub j: f64,
    /// Bare `Δ^a` defining the effective single-oscillator parameters.
    #[serde(deserialize_with = "units::rate")]
    pub operating_delta_a: f64,
    pub n0: usize,
    /// Keep the residual `J n₁n₂` term of the coupling.
    pub cross_kerr: bool,
    /// Extra Δ̂ values (besides 0 and the S peaks) to export.
    #[serde(deserialize_with = "rate_list")]
    pub flag_points: Vec<f64>,
    /// Measurement rate of each homodyne channel; defaults to `κ^a`.
    #[serde(default, deserialize_with = "opt_rate")]
    pub measured_rate: Option<f64>,
    /// Local-oscillator phases.
    pub lo_phases: [f64; 2],
    /// Local-oscillator frequency relative to the drives; defaults to the
    /// common oscillation frequency `Δ̂ + J|α|²` of the pair.
    #[serde(default, deserialize_with = "opt_rate")]
    pub lo_frequency: Option<f64>,
}

impl Default for CouplingSettings {
    fn default() -> Self {
        CouplingSettings {
            j_values: vec![-2.0, -4.0, -6.0],
            j: -6.0,
            operating_delta_a: 2000.0,
            n0: 1,
            cross_kerr: true,
            flag_points: Vec::new(),
            measured_rate: None,
            lo_phases: [0.0, 0.0],
            lo_frequency: None,
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub tier: Tier,
    #[serde(default)]
    pub oscillator: OscillatorOverrides,
    /// Truncation per mode; empty uses the tier default.
    #[serde(default)]
    pub dims: Vec<usize>,
    /// Hard cap on the Hilbert-space dimension.
    #[serde(default = "default_dim_cap")]
    pub dim_cap: usize,
    pub sweep: SweepAxis,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub trajectories: TrajectorySettings,
    #[serde(default)]
    pub stabilize: StabilizeSettings,
    #[serde(default)]
    pub coupling: CouplingSettings,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_dim_cap() -> usize {
    20_000
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let v: toml::Value = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(v)
    }

    pub fn from_value(v: toml::Value) -> Result<Self> {
        let c: ExperimentConfig = v
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Read a TOML file and apply `key.path=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut v: toml::Value =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        Self::from_value(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid experiment name {:?}", self.name)));
        }
        if self.sweep.points == 0 {
            return Err(Error::Config("sweep needs at least one point".into()));
        }
        if !self.sweep.start.is_finite() || !self.sweep.stop.is_finite() {
            return Err(Error::Config("sweep bounds must be finite".into()));
        }
        if self.dims.contains(&0) {
            return Err(Error::Config("truncation dims must be ≥ 1".into()));
        }
        let t = &self.trajectories;
        if !(t.dt_out > 0.0 && t.t_avg > 0.0 && t.t_burn >= 0.0 && t.tau_max >= 0.0) {
            return Err(Error::Config("trajectory times must be positive".into()));
        }
        if !(0.0..=1.0).contains(&t.min_success) {
            return Err(Error::Config("min_success must lie in [0, 1]".into()));
        }
        if !(self.solver.rate_factor > 0.0) {
            return Err(Error::Config("rate_factor must be positive".into()));
        }
        if self.stabilize.n0 == 0 || self.coupling.n0 == 0 {
            return Err(Error::Config("target Fock number must be ≥ 1".into()));
        }
        if self.stabilize.grid == 0 || self.stabilize.max_evals == 0 {
            return Err(Error::Config("optimizer grid and budget must be ≥ 1".into()));
        }
        if self.stabilize.wigner_grid < 2 {
            return Err(Error::Config("wigner_grid must be ≥ 2".into()));
        }
        Ok(())
    }

    /// Truncation for a single oscillator of this tier.
    pub fn oscillator_dims(&self) -> Vec<usize> {
        if !self.dims.is_empty() {
            return self.dims.clone();
        }
        match self.tier {
            Tier::Effective => vec![6],
            Tier::Full | Tier::Displaced => vec![6, 4, 4],
        }
    }

    /// Truncation for two coupled oscillators of this tier.
    pub fn pair_dims(&self) -> Vec<usize> {
        if !self.dims.is_empty() {
            return self.dims.clone();
        }
        match self.tier {
            Tier::Effective => vec![6, 6],
            Tier::Full | Tier::Displaced => vec![4, 3, 3, 4, 3, 3],
        }
    }

    /// Effective single-oscillator parameters at the coupling operating
    /// point.
    pub fn effective_oscillator(&self) -> Result<(OscillatorParams, EffectiveKerrParams)> {
        let c = &self.coupling;
        let p = self.oscillator.device(c.operating_delta_a, c.n0)?;
        let f = compute_displacements(&p)?;
        Ok((p.clone(), EffectiveKerrParams::from_frame(&p, &f, c.n0)?))
    }

    /// Canonical JSON of the parsed configuration (independent of TOML
    /// formatting and of how overrides were supplied).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Apply `a.b.c=value`, where `value` is parsed as a TOML value (falling
/// back to a string).
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = root;
    for (i, p) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {p:?} is not inside a table")))?;
        if i + 1 == parts.len() {
            table.insert(p.to_string(), value);
            return Ok(());
        }
        cur = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(Error::Config(format!("empty override key in {spec:?}")))
}
