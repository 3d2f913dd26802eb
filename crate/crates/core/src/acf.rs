//! Windowed autocorrelation functions of g-tensor fluctuations, their
//! one-sided Fourier spectra, and temperature-scaling exponents.
//!
//! The spectrum convention is the real part of
//! `G(ω) = (1/√(2π)) ∫₀^τmax C(τ) e^{iωτ} dτ`, evaluated with trapezoidal
//! weights. Imaginary parts are discarded.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::parallel::par_map;
use crate::trajectory::{Component, FluctuationSeries};
use crate::units::{rad_per_s_to_wavenumber, wavenumber_to_rad_per_s};

/// Default ACF window length, seconds.
pub const DEFAULT_WINDOW: f64 = 35e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `1/N` for every lag.
    Biased,
    /// `1/(N - m)` at lag `m`.
    Unbiased,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcfOptions {
    /// Window length, seconds.
    pub window: f64,
    /// Fractional overlap between consecutive windows, `0 ≤ overlap < 1`.
    pub overlap: f64,
    /// Largest lag as a fraction of the window.
    pub max_lag_fraction: f64,
    pub normalization: Normalization,
}

impl Default for AcfOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            overlap: 0.0,
            max_lag_fraction: 0.5,
            normalization: Normalization::Biased,
        }
    }
}

/// Window-averaged stationary ACF for every tensor component.
#[derive(Debug, Clone)]
pub struct AcfEstimate {
    pub dt: f64,
    pub temperature: f64,
    /// Lag times τ_m = m dt, seconds.
    pub lags: Vec<f64>,
    /// Indexed by [`Component::index`].
    pub acf: [Vec<f64>; 6],
    /// Standard error of the window mean at each lag (NaN with one window).
    pub stderr: [Vec<f64>; 6],
    pub n_windows: usize,
}

impl AcfEstimate {
    pub fn component(&self, c: Component) -> &[f64] {
        &self.acf[c.index()]
    }

    pub fn max_lag(&self) -> f64 {
        *self.lags.last().expect("at least one lag")
    }

    /// Multiplies every ACF value (and its standard error) by `c`.
    pub fn scaled(&self, c: f64) -> AcfEstimate {
        let mut out = self.clone();
        for k in 0..6 {
            out.acf[k].iter_mut().for_each(|v| *v *= c);
            out.stderr[k].iter_mut().for_each(|v| *v *= c.abs());
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "tau_ps")?;
        for c in Component::ALL {
            write!(out, ",C{}", c.label())?;
        }
        for c in Component::ALL {
            write!(out, ",stderr_{}", c.label())?;
        }
        writeln!(out)?;
        for (m, tau) in self.lags.iter().enumerate() {
            write!(out, "{}", tau * 1e12)?;
            for c in Component::ALL {
                write!(out, ",{}", self.acf[c.index()][m])?;
            }
            for c in Component::ALL {
                write!(out, ",{}", self.stderr[c.index()][m])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// ACF averaged over windows of the fluctuation series.
///
/// Each window contributes `(1/N_w) Σ_k δg(t_k + τ_m) δg(t_k)` (or the
/// unbiased variant); a trailing partial window is dropped.
pub fn windowed_acf(fs: &FluctuationSeries, opts: &AcfOptions) -> Result<AcfEstimate> {
    let n = fs.len();
    let width = (opts.window / fs.dt).round() as usize;
    if width < 8 {
        return Err(Error::domain(format!(
            "window of {:.3e} s holds {width} samples, need at least 8",
            opts.window
        )));
    }
    if width > n {
        return Err(Error::domain(format!(
            "window of {:.3e} s is longer than the trajectory ({:.3e} s)",
            opts.window,
            fs.dt * n as f64
        )));
    }
    if !(0.0..1.0).contains(&opts.overlap) {
        return Err(Error::domain("window overlap must lie in [0, 1)"));
    }
    if !(opts.max_lag_fraction > 0.0 && opts.max_lag_fraction <= 1.0) {
        return Err(Error::domain("max lag fraction must lie in (0, 1]"));
    }
    let hop = ((width as f64 * (1.0 - opts.overlap)).round() as usize).max(1);
    let starts: Vec<usize> = (0..).map(|w| w * hop).take_while(|s| s + width <= n).collect();
    let max_lag = ((width as f64 * opts.max_lag_fraction).floor() as usize).min(width - 1);
    let lags: Vec<f64> = (0..=max_lag).map(|m| m as f64 * fs.dt).collect();
    let nw = starts.len();

    let per_component = par_map(&Component::ALL, |&c| {
        let x = fs.component(c);
        let mut sum = vec![0.0; max_lag + 1];
        let mut sum_sq = vec![0.0; max_lag + 1];
        for &s in &starts {
            let w = &x[s..s + width];
            for m in 0..=max_lag {
                let raw: f64 = w[m..].iter().zip(w).map(|(a, b)| a * b).sum();
                let norm = match opts.normalization {
                    Normalization::Biased => width,
                    Normalization::Unbiased => width - m,
                };
                let v = raw / norm as f64;
                sum[m] += v;
                sum_sq[m] += v * v;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / nw as f64).collect();
        let stderr: Vec<f64> = if nw > 1 {
            sum_sq
                .iter()
                .zip(&mean)
                .map(|(sq, mu)| {
                    let var = ((sq - nw as f64 * mu * mu) / (nw as f64 - 1.0)).max(0.0);
                    (var / nw as f64).sqrt()
                })
                .collect()
        } else {
            vec![f64::NAN; max_lag + 1]
        };
        (mean, stderr)
    });

    let mut acf: [Vec<f64>; 6] = Default::default();
    let mut stderr: [Vec<f64>; 6] = Default::default();
    for (k, (m, s)) in per_component.into_iter().enumerate() {
        acf[k] = m;
        stderr[k] = s;
    }
    Ok(AcfEstimate {
        dt: fs.dt,
        temperature: fs.temperature,
        lags,
        acf,
        stderr,
        n_windows: nw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Taper {
    #[default]
    None,
    /// Multiply the ACF by `e^{-rate τ}` before transforming (rate in 1/s).
    /// A regularization for finite-window leakage.
    Exponential(f64),
}

/// One-sided fluctuation spectra `G_ij(ω)` in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Angular frequency grid, rad/s, starting at 0.
    pub omega: Vec<f64>,
    /// Indexed by [`Component::index`].
    pub g: [Vec<f64>; 6],
    pub temperature: f64,
}

impl SpectrumEstimate {
    pub fn component(&self, c: Component) -> &[f64] {
        &self.g[c.index()]
    }

    pub fn omega_cm1(&self) -> Vec<f64> {
        self.omega.iter().map(|&w| rad_per_s_to_wavenumber(w)).collect()
    }

    /// Linear interpolation on the grid; `None` outside it.
    pub fn interpolate(&self, c: Component, omega: f64) -> Option<f64> {
        interpolate(&self.omega, &self.g[c.index()], omega)
    }

    /// Interpolated value with out-of-grid and negative values mapped to 0.
    pub fn clamped(&self, c: Component, omega: f64) -> f64 {
        self.interpolate(c, omega).map_or(0.0, |v| v.max(0.0))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "omega_cm1,Gxx,Gyy,Gzz,Gxy,Gxz,Gyz")?;
        for (k, w) in self.omega.iter().enumerate() {
            write!(out, "{}", rad_per_s_to_wavenumber(*w))?;
            for c in Component::ALL {
                write!(out, ",{}", self.g[c.index()][k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub(crate) fn interpolate(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    let (first, last) = (*x.first()?, *x.last()?);
    if !(at >= first && at <= last) {
        return None;
    }
    let hi = x.partition_point(|&v| v < at);
    if hi == 0 {
        return Some(y[0]);
    }
    let lo = hi - 1;
    if hi >= x.len() {
        return Some(y[lo]);
    }
    let w = (at - x[lo]) / (x[hi] - x[lo]);
    Some(y[lo] * (1.0 - w) + y[hi] * w)
}

/// Reads a spectrum CSV written by [`SpectrumEstimate::write_csv`].
pub fn read_spectrum<R: Read>(input: R, source: &str, temperature: f64) -> Result<SpectrumEstimate> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut omega = Vec::new();
    let mut g: [Vec<f64>; 6] = Default::default();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: source.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let values: Vec<f64> = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                path: source.into(),
                line,
                message: format!("row {}: malformed number", row + 1),
            })?;
        if values.len() != 7 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: source.into(),
                line,
                message: format!("row {}: expected 7 finite values", row + 1),
            });
        }
        omega.push(wavenumber_to_rad_per_s(values[0]));
        for k in 0..6 {
            g[k].push(values[k + 1]);
        }
    }
    if omega.len() < 2 || omega.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parse {
            path: source.into(),
            line: 0,
            message: "frequency column must be increasing with at least 2 rows".into(),
        });
    }
    Ok(SpectrumEstimate {
        omega,
        g,
        temperature,
    })
}

pub fn load_spectrum(path: &Path, temperature: f64) -> Result<SpectrumEstimate> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_spectrum(file, &path.display().to_string(), temperature)
}

/// Real part of the trapezoidal one-sided transform on the grid
/// `ω_k = k · 2π/τ_max`, up to the Nyquist frequency `π/dt`.
pub fn acf_spectrum(acf: &AcfEstimate, taper: Taper) -> SpectrumEstimate {
    let dt = acf.dt;
    let m = acf.lags.len();
    let tau_max = acf.max_lag();
    let d_omega = 2.0 * PI / tau_max;
    let count = ((PI / dt) / d_omega).floor() as usize + 1;
    let omega: Vec<f64> = (0..count).map(|k| k as f64 * d_omega).collect();

    let weights: Vec<f64> = (0..m)
        .map(|k| {
            let trap = if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
            let taper = match taper {
                Taper::None => 1.0,
                Taper::Exponential(rate) => (-rate * acf.lags[k]).exp(),
            };
            trap * taper * dt / (2.0 * PI).sqrt()
        })
        .collect();

    let per_component = par_map(&Component::ALL, |&c| {
        let values = acf.component(c);
        omega
            .iter()
            .map(|&w| {
                values
                    .iter()
                    .zip(&acf.lags)
                    .zip(&weights)
                    .map(|((v, tau), wt)| v * wt * (w * tau).cos())
                    .sum()
            })
            .collect::<Vec<f64>>()
    });
    let mut g: [Vec<f64>; 6] = Default::default();
    for (k, v) in per_component.into_iter().enumerate() {
        g[k] = v;
    }
    SpectrumEstimate {
        omega,
        g,
        temperature: acf.temperature,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Temperature exponent α(ω) of `G(ω, T) ∝ T^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSpectrum {
    pub omega: Vec<f64>,
    /// `None` where fewer than 3 temperatures had `G > 0`, and at ω = 0.
    pub alpha: Vec<Option<f64>>,
    /// Mean of α over `0 < ω ≤ omega_max`.
    pub mean: f64,
    /// Sample standard deviation of α over the same band.
    pub std: f64,
    pub samples: usize,
    pub histogram: Histogram,
}

pub const HISTOGRAM_BINS: usize = 20;

/// Per-frequency log-log slope of `G` against temperature.
///
/// Spectra are resampled onto the first spectrum's grid. Points with
/// `G ≤ 0` are dropped; frequencies with fewer than 3 usable temperatures are
/// marked missing.
pub fn temperature_exponent(spectra: &[SpectrumEstimate], component: Component, omega_max: f64) -> Result<AlphaSpectrum> {
    let mut temps: Vec<f64> = spectra.iter().map(|s| s.temperature).collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    if temps.len() < 3 || temps[0] <= 0.0 {
        return Err(Error::domain("temperature exponent needs at least 3 distinct positive temperatures"));
    }
    let grid = spectra[0].omega.clone();
    let alpha: Vec<Option<f64>> = grid
        .iter()
        .map(|&w| {
            if w <= 0.0 {
                return None;
            }
            let pts: Vec<(f64, f64)> = spectra
                .iter()
                .filter_map(|s| {
                    let v = s.interpolate(component, w)?;
                    (v > 0.0).then(|| (s.temperature.ln(), v.ln()))
                })
                .collect();
            if pts.len() < 3 {
                return None;
            }
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            (sxx > 0.0).then(|| sxy / sxx)
        })
        .collect();

    let band: Vec<f64> = grid
        .iter()
        .zip(&alpha)
        .filter(|(w, _)| **w > 0.0 && **w <= omega_max)
        .filter_map(|(_, a)| *a)
        .collect();
    if band.is_empty() {
        return Err(Error::domain("no usable frequencies below omega_max"));
    }
    let n = band.len() as f64;
    let mean = band.iter().sum::<f64>() / n;
    let std = if band.len() > 1 {
        (band.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(AlphaSpectrum {
        omega: grid,
        alpha,
        mean,
        std,
        samples: band.len(),
        histogram: histogram(&band, HISTOGRAM_BINS),
    })
}

fn histogram(values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1e-9_f64.max(lo.abs() * 1e-9);
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0; bins];
    for v in values {
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}
