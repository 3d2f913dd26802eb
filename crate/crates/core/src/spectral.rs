//! Hybrid bath spectral density: an Ohmic spin-lattice part built from
//! g-tensor fluctuation spectra plus a Lorentzian magnetic-noise part.
//!
//! Values are in J²·s. Positive frequencies describe emission into the
//! bath; the spin-lattice part is extended to negative frequencies with the
//! Boltzmann factor `e^{-ħ|ω|/k_B T}`. The noise part is even in ω.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix3, Vector3};

use crate::acf::SpectrumEstimate;
use crate::error::{Error, Result};
use crate::hamiltonian::GTensor;
use crate::trajectory::Component;
use crate::units::{rad_per_s_to_wavenumber, wavenumber_to_rad_per_s, HBAR, K_B, MU_B};

/// Default flat stand-in for `G_ij(ω)`, seconds. Places the T1 maximum of
/// the field-independent hybrid model near 2.6 T at 10 K.
pub const DEFAULT_FLAT_G0: f64 = 8.0e-25;
/// Default `1/λ`, cm⁻¹.
pub const DEFAULT_LAMBDA_INV_CM1: f64 = 6.9;
/// Default noise correlation rate, cm⁻¹.
pub const DEFAULT_GAMMA_PD_CM1: f64 = 0.001;
/// Field-independent noise variance, T².
pub const DEFAULT_NOISE_A: f64 = 16e-10;
/// Field-dependent noise coefficient of the field-dependent model.
pub const DEFAULT_NOISE_B: f64 = 3e-8;

/// Ohmic prefactor `λω` of the spin-lattice density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicParams {
    /// `1/λ` in cm⁻¹.
    pub lambda_inv: f64,
}

impl Default for OhmicParams {
    fn default() -> Self {
        Self {
            lambda_inv: DEFAULT_LAMBDA_INV_CM1,
        }
    }
}

impl OhmicParams {
    pub fn new(lambda_inv: f64) -> Result<Self> {
        if !(lambda_inv > 0.0 && lambda_inv.is_finite()) {
            return Err(Error::domain("1/lambda must be positive"));
        }
        Ok(Self { lambda_inv })
    }

    /// λ in seconds per radian.
    pub fn lambda(&self) -> f64 {
        1.0 / wavenumber_to_rad_per_s(self.lambda_inv)
    }
}

/// Noise variance `A_B(B) = a + bB²` with correlation rate `gamma_pd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// T².
    pub a: f64,
    /// Dimensionless.
    pub b: f64,
    /// rad/s.
    pub gamma_pd: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            a: DEFAULT_NOISE_A,
            b: 0.0,
            gamma_pd: wavenumber_to_rad_per_s(DEFAULT_GAMMA_PD_CM1),
        }
    }
}

impl NoiseParams {
    pub fn new(a: f64, b: f64, gamma_pd: f64) -> Result<Self> {
        if !(a >= 0.0) || !(b >= 0.0) {
            return Err(Error::domain("noise coefficients a and b must be non-negative"));
        }
        if !(gamma_pd > 0.0 && gamma_pd.is_finite()) {
            return Err(Error::domain("gamma_pd must be positive"));
        }
        Ok(Self { a, b, gamma_pd })
    }

    pub fn field_dependent() -> Self {
        Self {
            b: DEFAULT_NOISE_B,
            ..Self::default()
        }
    }
}

/// Returns `(A_B, δB)` in T² and T.
pub fn noise_amplitude(noise: &NoiseParams, b_magnitude: f64) -> Result<(f64, f64)> {
    if !(b_magnitude >= 0.0) {
        return Err(Error::domain("field magnitude must be non-negative"));
    }
    let a_b = noise.a + noise.b * b_magnitude * b_magnitude;
    Ok((a_b, a_b.sqrt()))
}

/// `A_B γ / (√(2π) (γ² + ω²))` in T²·s.
pub fn magnetic_noise_spectrum(noise: &NoiseParams, b_magnitude: f64, omega: f64) -> f64 {
    let a_b = noise.a + noise.b * b_magnitude * b_magnitude;
    let g = noise.gamma_pd;
    a_b / (2.0 * PI).sqrt() * g / (g * g + omega * omega)
}

/// Source of the g-tensor fluctuation spectra `G_ij(ω)`, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub enum FluctuationSpectrum {
    /// `G_ij(ω) = g0` for every component and ω ≥ 0.
    Flat { g0: f64 },
    /// `G_ij(ω) = (A/√(2π)) γ/(γ² + ω²)` for every component.
    Lorentzian { amplitude: f64, gamma: f64 },
    /// Estimated spectra, linearly interpolated, zero outside the grid and
    /// where the estimate is negative.
    Estimated(SpectrumEstimate),
}

impl FluctuationSpectrum {
    pub fn value(&self, c: Component, omega: f64) -> f64 {
        match self {
            FluctuationSpectrum::Flat { g0 } => *g0,
            FluctuationSpectrum::Lorentzian { amplitude, gamma } => {
                amplitude / (2.0 * PI).sqrt() * gamma / (gamma * gamma + omega * omega)
            }
            FluctuationSpectrum::Estimated(s) => s.clamped(c, omega),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FluctuationSpectrum::Flat { g0 } => format!("flat G0={g0:e} s"),
            FluctuationSpectrum::Lorentzian { amplitude, gamma } => {
                format!("lorentzian A={amplitude:e} gamma={gamma:e} rad/s")
            }
            FluctuationSpectrum::Estimated(s) => format!(
                "estimated T={} K, {} points up to {:.3} cm-1",
                s.temperature,
                s.omega.len(),
                rad_per_s_to_wavenumber(*s.omega.last().unwrap_or(&0.0))
            ),
        }
    }
}

/// Everything needed to evaluate `J_jj'(ω)` at one field and temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensityModel {
    pub spectrum: FluctuationSpectrum,
    pub ohmic: OhmicParams,
    pub noise: NoiseParams,
    pub mean_g: GTensor,
    /// Tesla.
    pub field: Vector3<f64>,
    /// Kelvin.
    pub temperature: f64,
    pub spin_lattice: bool,
    pub magnetic_noise: bool,
    /// Multiplies `G_ij`; used for temperature-scaled stand-in spectra.
    pub g_scale: f64,
    /// Multiplies the whole spectral density.
    pub j_scale: f64,
}

impl SpectralDensityModel {
    pub fn new(spectrum: FluctuationSpectrum, mean_g: GTensor, field: Vector3<f64>, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::domain("temperature must be positive"));
        }
        if field.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("field must be finite"));
        }
        Ok(Self {
            spectrum,
            ohmic: OhmicParams::default(),
            noise: NoiseParams::default(),
            mean_g,
            field,
            temperature,
            spin_lattice: true,
            magnetic_noise: true,
            g_scale: 1.0,
            j_scale: 1.0,
        })
    }

    pub fn with_field(&self, field: Vector3<f64>) -> Self {
        Self {
            field,
            ..self.clone()
        }
    }

    pub fn with_temperature(&self, temperature: f64) -> Self {
        Self {
            temperature,
            ..self.clone()
        }
    }

    /// Spin-lattice part for ω ≥ 0; negative ω is treated as |ω|.
    pub fn spin_lattice_j(&self, j: usize, jp: usize, omega: f64) -> f64 {
        if !self.spin_lattice || j != jp {
            return 0.0;
        }
        let w = omega.abs();
        let coupling: f64 = (0..3)
            .map(|i| {
                let bi = self.field[i];
                if bi == 0.0 {
                    0.0
                } else {
                    bi * bi * self.spectrum.value(Component::from_indices(i, j), w)
                }
            })
            .sum();
        (MU_B / 2.0).powi(2) * self.ohmic.lambda() * w * coupling * self.g_scale * self.j_scale
    }

    pub fn magnetic_noise_j(&self, j: usize, jp: usize, omega: f64) -> f64 {
        if !self.magnetic_noise {
            return 0.0;
        }
        let g = self.mean_g.matrix();
        let contraction: f64 = (0..3).map(|i| g[(i, j)] * g[(i, jp)]).sum();
        (MU_B / 2.0).powi(2) * contraction * magnetic_noise_spectrum(&self.noise, self.field.norm(), omega) * self.j_scale
    }

    /// Detailed-balance weighted spin-lattice part for signed ω.
    pub fn spin_lattice_signed(&self, j: usize, jp: usize, omega: f64) -> f64 {
        if omega == 0.0 {
            return 0.0;
        }
        let up = self.spin_lattice_j(j, jp, omega.abs());
        if omega > 0.0 {
            up
        } else {
            up * (-HBAR * omega.abs() / (K_B * self.temperature)).exp()
        }
    }

    /// Total `J_jj'(ω)` for signed ω.
    pub fn total_j(&self, j: usize, jp: usize, omega: f64) -> f64 {
        self.spin_lattice_signed(j, jp, omega) + self.magnetic_noise_j(j, jp, omega)
    }

    /// All nine `J_jj'(ω)` at once.
    pub fn evaluate(&self, omega: f64) -> Matrix3<f64> {
        Matrix3::from_fn(|j, jp| self.total_j(j, jp, omega))
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.spin_lattice {
            parts.push(format!(
                "spin-lattice[{}; 1/lambda={} cm-1]",
                self.spectrum.describe(),
                self.ohmic.lambda_inv
            ));
        }
        if self.magnetic_noise {
            parts.push(format!(
                "noise[a={:e} T2, b={:e}, gamma_pd={} cm-1]",
                self.noise.a,
                self.noise.b,
                rad_per_s_to_wavenumber(self.noise.gamma_pd)
            ));
        }
        if parts.is_empty() {
            parts.push("no bath".into());
        }
        if self.g_scale != 1.0 {
            parts.push(format!("G x {}", self.g_scale));
        }
        if self.j_scale != 1.0 {
            parts.push(format!("J x {}", self.j_scale));
        }
        format!("{} at T={} K", parts.join(" + "), self.temperature)
    }

    /// Writes `omega_cm1,J_dg,J_dB,J_total` for component `(j, jp)`.
    pub fn write_csv<W: Write>(&self, j: usize, jp: usize, omegas: &[f64], mut out: W) -> std::io::Result<()> {
        writeln!(out, "omega_cm1,J_dg,J_dB,J_total")?;
        for &w in omegas {
            let dg = self.spin_lattice_signed(j, jp, w);
            let db = self.magnetic_noise_j(j, jp, w);
            writeln!(out, "{},{},{},{}", rad_per_s_to_wavenumber(w), dg, db, dg + db)?;
        }
        Ok(())
    }
}
