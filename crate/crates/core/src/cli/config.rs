//! Run configuration. Every physical value carries a unit tag such as
//! `"0.001 cm-1"`; defaults are the copper-porphyrin parameters.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acf::{AcfOptions, Normalization, Taper};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    GTensor, HyperfineTensor, SpinSystem, COPPER_A_PAR_MHZ, COPPER_A_PERP_MHZ, COPPER_G_PAR, COPPER_G_PERP,
};
use crate::relaxometry::log_grid;
use crate::spectral::{
    NoiseParams, OhmicParams, DEFAULT_FLAT_G0, DEFAULT_GAMMA_PD_CM1, DEFAULT_LAMBDA_INV_CM1, DEFAULT_NOISE_A,
    DEFAULT_NOISE_B,
};
use crate::trajectory::Component;
use crate::units::{Quantity, Unit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: Option<u64>,
    pub system: SystemConfig,
    pub bath: BathConfig,
    pub sweep: SweepConfig,
    pub spectrum: SpectrumConfig,
    pub acf: AcfConfig,
    pub synth: SynthConfig,
    pub output: OutputConfig,
}

/// Principal values or a full row-major tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorSpec {
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

impl TensorSpec {
    fn matrix(&self) -> Matrix3<f64> {
        match self {
            TensorSpec::Diagonal(d) => Matrix3::from_diagonal(&Vector3::from(*d)),
            TensorSpec::Full(rows) => Matrix3::from_fn(|i, j| rows[i][j]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub nuclear_spin: f64,
    pub g: TensorSpec,
    pub hyperfine: TensorSpec,
    /// Unit of the hyperfine entries, an energy or frequency unit.
    pub hyperfine_unit: String,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            nuclear_spin: 1.5,
            g: TensorSpec::Diagonal([COPPER_G_PERP, COPPER_G_PERP, COPPER_G_PAR]),
            hyperfine: TensorSpec::Diagonal([COPPER_A_PERP_MHZ, COPPER_A_PERP_MHZ, COPPER_A_PAR_MHZ]),
            hyperfine_unit: "MHz".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectrumSource {
    Flat {
        g0: String,
    },
    Lorentzian {
        amplitude: f64,
        gamma: String,
    },
    File {
        path: PathBuf,
        temperature: Option<String>,
    },
    OuSynthetic {
        variance: f64,
        corr_time: String,
        dt: String,
        duration: String,
    },
}

impl Default for SpectrumSource {
    fn default() -> Self {
        SpectrumSource::Flat {
            g0: format!("{DEFAULT_FLAT_G0:e} s"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathConfig {
    pub temperature: String,
    pub lambda_inv: String,
    pub gamma_pd: String,
    pub a: String,
    pub b: f64,
    pub spin_lattice: bool,
    pub magnetic_noise: bool,
    pub spectrum: SpectrumSource,
}

impl Default for BathConfig {
    fn default() -> Self {
        Self {
            temperature: "10 K".into(),
            lambda_inv: format!("{DEFAULT_LAMBDA_INV_CM1} cm-1"),
            gamma_pd: format!("{DEFAULT_GAMMA_PD_CM1} cm-1"),
            a: format!("{DEFAULT_NOISE_A:e} T2"),
            b: 0.0,
            spin_lattice: true,
            magnetic_noise: true,
            spectrum: SpectrumSource::default(),
        }
    }
}

/// Either an explicit list or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldGrid {
    List(Vec<String>),
    Range {
        min: String,
        max: String,
        points: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// Overrides applied to the bath block for one sweep curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub spin_lattice: Option<bool>,
    pub magnetic_noise: Option<bool>,
    pub a: Option<String>,
    pub b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub fields: FieldGrid,
    pub direction: [f64; 3],
    pub models: Vec<ModelConfig>,
    pub no_hyperfine: bool,
    pub exponent_ranges: Vec<[String; 2]>,
    /// Optional temperature scan at `temperature_field`.
    pub temperatures: Vec<String>,
    pub temperature_field: String,
    /// `G ∝ (T / reference_temperature)^g_temperature_exponent` for
    /// analytic stand-in spectra during temperature scans.
    pub g_temperature_exponent: f64,
    pub reference_temperature: String,
    pub m_i: Option<f64>,
    pub secular: bool,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fields: FieldGrid::Range {
                min: "0.01 T".into(),
                max: "10 T".into(),
                points: 24,
                spacing: Spacing::Log,
            },
            direction: [0.0, 0.0, 1.0],
            models: vec![
                ModelConfig {
                    name: "spin-lattice".into(),
                    spin_lattice: Some(true),
                    magnetic_noise: Some(false),
                    a: None,
                    b: None,
                },
                ModelConfig {
                    name: "hybrid-b0".into(),
                    spin_lattice: Some(true),
                    magnetic_noise: Some(true),
                    a: None,
                    b: Some(0.0),
                },
                ModelConfig {
                    name: "hybrid-b3e-8".into(),
                    spin_lattice: Some(true),
                    magnetic_noise: Some(true),
                    a: None,
                    b: Some(DEFAULT_NOISE_B),
                },
            ],
            no_hyperfine: true,
            exponent_ranges: vec![
                ["0.01 T".into(), "0.1 T".into()],
                ["1 T".into(), "10 T".into()],
            ],
            temperatures: Vec::new(),
            temperature_field: "1 T".into(),
            g_temperature_exponent: 1.0,
            reference_temperature: "10 K".into(),
            m_i: None,
            secular: false,
            points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub fields: FieldGrid,
    pub direction: [f64; 3],
    /// Field for the spectral-density dump.
    pub j_field: String,
    pub j_component: String,
    pub j_omega_min: String,
    pub j_omega_max: String,
    pub j_points: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            fields: FieldGrid::Range {
                min: "0 T".into(),
                max: "0.5 T".into(),
                points: 101,
                spacing: Spacing::Linear,
            },
            direction: [0.0, 0.0, 1.0],
            j_field: "1 T".into(),
            j_component: "zz".into(),
            j_omega_min: "1e-5 cm-1".into(),
            j_omega_max: "10 cm-1".into(),
            j_points: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Biased,
    Unbiased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcfConfig {
    pub window: String,
    pub overlap: f64,
    pub estimator: Estimator,
    /// Exponential taper rate as a frequency, e.g. `"0.5 cm-1"`.
    pub taper: Option<String>,
    pub component: String,
    /// Upper frequency of the α summary band.
    pub omega_max: String,
    pub trajectories: Vec<PathBuf>,
}

impl Default for AcfConfig {
    fn default() -> Self {
        Self {
            window: "35 ps".into(),
            overlap: 0.0,
            estimator: Estimator::Biased,
            taper: None,
            component: "zz".into(),
            omega_max: "100 cm-1".into(),
            trajectories: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Variance {
    Uniform(f64),
    PerComponent([f64; 6]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Stationary variance of each component, in the order xx yy zz xy xz yz.
    pub variance: Variance,
    pub corr_time: String,
    pub dt: String,
    pub duration: String,
    pub temperature: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            variance: Variance::Uniform(1e-7),
            corr_time: "1 ps".into(),
            dt: "10 fs".into(),
            duration: "350 ps".into(),
            temperature: "10 K".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            plots: true,
        }
    }
}

/// Parses `text` as a tagged quantity convertible to `unit`, returning the
/// value in `unit`. `key` names the field in error messages.
pub fn quantity(text: &str, unit: Unit, key: &str) -> Result<f64> {
    let q: Quantity = text
        .parse()
        .map_err(|e| Error::Config(format!("{key}: {e}")))?;
    let v = q
        .convert(unit)
        .map_err(|e| Error::Config(format!("{key}: {e}")))?
        .value;
    if !v.is_finite() {
        return Err(Error::Config(format!("{key}: value is not finite")));
    }
    Ok(v)
}

fn positive(text: &str, unit: Unit, key: &str) -> Result<f64> {
    let v = quantity(text, unit, key)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key}: must be positive, got `{text}`")))
    }
}

fn non_negative(text: &str, unit: Unit, key: &str) -> Result<f64> {
    let v = quantity(text, unit, key)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key}: must be non-negative, got `{text}`")))
    }
}

pub fn parse_component(text: &str, key: &str) -> Result<Component> {
    Component::ALL
        .into_iter()
        .find(|c| c.label() == text.trim())
        .ok_or_else(|| Error::Config(format!("{key}: unknown tensor component `{text}`")))
}

impl Config {
    pub fn from_toml(text: &str, source: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(format!("{source}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Canonical serialization; the basis of [`Config::hash`].
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every tagged value once so commands fail early with exit code 2.
    pub fn validate(&self) -> Result<()> {
        self.spin_system()?;
        self.temperature()?;
        self.ohmic()?;
        self.noise()?;
        self.sweep_fields()?;
        self.sweep_direction()?;
        self.exponent_ranges()?;
        self.sweep_temperatures()?;
        positive(&self.sweep.temperature_field, Unit::Tesla, "sweep.temperature_field")?;
        positive(&self.sweep.reference_temperature, Unit::Kelvin, "sweep.reference_temperature")?;
        if self.sweep.points < 8 {
            return Err(Error::Config("sweep.points: need at least 8 samples per decay".into()));
        }
        let mut names: Vec<&str> = self.sweep.models.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.sweep.models.len() {
            return Err(Error::Config("sweep.models: names must be unique".into()));
        }
        for (k, m) in self.sweep.models.iter().enumerate() {
            if m.name.is_empty() || m.name.contains(',') {
                return Err(Error::Config(format!("sweep.models[{k}].name: must be non-empty without commas")));
            }
            if let Some(a) = &m.a {
                non_negative(a, Unit::TeslaSquared, &format!("sweep.models[{k}].a"))?;
            }
            if matches!(m.b, Some(b) if !(b >= 0.0)) {
                return Err(Error::Config(format!("sweep.models[{k}].b: must be non-negative")));
            }
        }
        self.spectrum_fields()?;
        vector(&self.spectrum.direction, "spectrum.direction")?;
        positive(&self.spectrum.j_field, Unit::Tesla, "spectrum.j_field")?;
        parse_component(&self.spectrum.j_component, "spectrum.j_component")?;
        self.j_omegas()?;
        self.acf_options()?;
        self.taper()?;
        parse_component(&self.acf.component, "acf.component")?;
        positive(&self.acf.omega_max, Unit::RadianPerSecond, "acf.omega_max")?;
        self.synth_params(0)?;
        Ok(())
    }

    pub fn spin_system(&self) -> Result<SpinSystem> {
        let s = &self.system;
        let unit: Unit = s
            .hyperfine_unit
            .parse()
            .map_err(|e| Error::Config(format!("system.hyperfine_unit: {e}")))?;
        let scale = Quantity::new(1.0, unit)
            .convert(Unit::RadianPerSecond)
            .map_err(|e| Error::Config(format!("system.hyperfine_unit: {e}")))?
            .value;
        let g = s.g.matrix();
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("system.g: entries must be finite".into()));
        }
        let a = s.hyperfine.matrix() * scale;
        SpinSystem::new(s.nuclear_spin, GTensor::new(g), HyperfineTensor::new(a))
            .map_err(|e| Error::Config(format!("system: {e}")))
    }

    pub fn temperature(&self) -> Result<f64> {
        positive(&self.bath.temperature, Unit::Kelvin, "bath.temperature")
    }

    pub fn ohmic(&self) -> Result<OhmicParams> {
        Ok(OhmicParams {
            lambda_inv: positive(&self.bath.lambda_inv, Unit::Wavenumber, "bath.lambda_inv")?,
        })
    }

    pub fn noise(&self) -> Result<NoiseParams> {
        let a = non_negative(&self.bath.a, Unit::TeslaSquared, "bath.a")?;
        let gamma = positive(&self.bath.gamma_pd, Unit::RadianPerSecond, "bath.gamma_pd")?;
        NoiseParams::new(a, self.bath.b, gamma).map_err(|e| Error::Config(format!("bath: {e}")))
    }

    pub fn sweep_fields(&self) -> Result<Vec<f64>> {
        let v = grid(&self.sweep.fields, "sweep.fields")?;
        if v.iter().any(|b| *b <= 0.0) || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep.fields: must be positive and strictly ascending".into()));
        }
        Ok(v)
    }

    pub fn sweep_direction(&self) -> Result<Vector3<f64>> {
        vector(&self.sweep.direction, "sweep.direction")
    }

    pub fn exponent_ranges(&self) -> Result<Vec<(f64, f64)>> {
        self.sweep
            .exponent_ranges
            .iter()
            .enumerate()
            .map(|(k, [lo, hi])| {
                let key = format!("sweep.exponent_ranges[{k}]");
                let lo = positive(lo, Unit::Tesla, &key)?;
                let hi = positive(hi, Unit::Tesla, &key)?;
                if hi <= lo {
                    return Err(Error::Config(format!("{key}: upper bound must exceed lower bound")));
                }
                Ok((lo, hi))
            })
            .collect()
    }

    pub fn sweep_temperatures(&self) -> Result<Vec<f64>> {
        self.sweep
            .temperatures
            .iter()
            .enumerate()
            .map(|(k, t)| positive(t, Unit::Kelvin, &format!("sweep.temperatures[{k}]")))
            .collect()
    }

    pub fn spectrum_fields(&self) -> Result<Vec<f64>> {
        let v = grid(&self.spectrum.fields, "spectrum.fields")?;
        if v.iter().any(|b| *b < 0.0) || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("spectrum.fields: must be non-negative and strictly ascending".into()));
        }
        Ok(v)
    }

    pub fn j_omegas(&self) -> Result<Vec<f64>> {
        let lo = positive(&self.spectrum.j_omega_min, Unit::RadianPerSecond, "spectrum.j_omega_min")?;
        let hi = positive(&self.spectrum.j_omega_max, Unit::RadianPerSecond, "spectrum.j_omega_max")?;
        if hi <= lo || self.spectrum.j_points < 2 {
            return Err(Error::Config("spectrum: need j_omega_max > j_omega_min and j_points >= 2".into()));
        }
        Ok(log_grid(lo, hi, self.spectrum.j_points))
    }

    pub fn acf_options(&self) -> Result<AcfOptions> {
        let window = positive(&self.acf.window, Unit::Second, "acf.window")?;
        if !(0.0..1.0).contains(&self.acf.overlap) {
            return Err(Error::Config("acf.overlap: must lie in [0, 1)".into()));
        }
        Ok(AcfOptions {
            window,
            overlap: self.acf.overlap,
            normalization: match self.acf.estimator {
                Estimator::Biased => Normalization::Biased,
                Estimator::Unbiased => Normalization::Unbiased,
            },
            ..AcfOptions::default()
        })
    }

    pub fn taper(&self) -> Result<Taper> {
        match &self.acf.taper {
            None => Ok(Taper::None),
            Some(t) => Ok(Taper::Exponential(positive(t, Unit::RadianPerSecond, "acf.taper")?)),
        }
    }

    /// OU parameters from the synth block with the configured mean g.
    pub fn synth_params(&self, seed: u64) -> Result<crate::trajectory::OuParams> {
        let s = &self.synth;
        let variance = match s.variance {
            Variance::Uniform(v) => [v; 6],
            Variance::PerComponent(v) => v,
        };
        if variance.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("synth.variance: must be non-negative".into()));
        }
        let corr_time = positive(&s.corr_time, Unit::Second, "synth.corr_time")?;
        let dt = positive(&s.dt, Unit::Second, "synth.dt")?;
        if dt >= corr_time / 2.0 {
            return Err(Error::Config("synth.dt: must be below half of synth.corr_time".into()));
        }
        Ok(crate::trajectory::OuParams {
            mean: *self.spin_system()?.g.matrix(),
            variance,
            corr_time,
            dt,
            duration: positive(&s.duration, Unit::Second, "synth.duration")?,
            temperature: positive(&s.temperature, Unit::Kelvin, "synth.temperature")?,
            seed,
        })
    }
}

fn vector(v: &[f64; 3], key: &str) -> Result<Vector3<f64>> {
    let d = Vector3::from(*v);
    if !(d.norm() > 0.0) || d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{key}: must be a finite non-zero vector")));
    }
    Ok(d)
}

fn grid(g: &FieldGrid, key: &str) -> Result<Vec<f64>> {
    match g {
        FieldGrid::List(items) => {
            if items.is_empty() {
                return Err(Error::Config(format!("{key}: empty list")));
            }
            items
                .iter()
                .enumerate()
                .map(|(k, s)| quantity(s, Unit::Tesla, &format!("{key}[{k}]")))
                .collect()
        }
        FieldGrid::Range {
            min,
            max,
            points,
            spacing,
        } => {
            let lo = quantity(min, Unit::Tesla, &format!("{key}.min"))?;
            let hi = quantity(max, Unit::Tesla, &format!("{key}.max"))?;
            if *points < 2 || hi <= lo {
                return Err(Error::Config(format!("{key}: need max > min and at least 2 points")));
            }
            Ok(match spacing {
                Spacing::Log => {
                    if lo <= 0.0 {
                        return Err(Error::Config(format!("{key}: log spacing needs min > 0")));
                    }
                    log_grid(lo, hi, *points)
                }
                Spacing::Linear => (0..*points)
                    .map(|k| lo + (hi - lo) * k as f64 / (*points - 1) as f64)
                    .collect(),
            })
        }
    }
}
