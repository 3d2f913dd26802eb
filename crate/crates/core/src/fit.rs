//! Least-squares fits: single exponential decays, power laws and Lorentzians.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// R² below which a decay is reported as poorly described by one exponential.
pub const DECAY_R2_WARNING: f64 = 0.995;

/// Result of fitting `y(t) = y_inf + A exp(-t / T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Decay time T in seconds; infinite when the signal does not decay.
    pub time: f64,
    pub amplitude: f64,
    pub asymptote: f64,
    pub r_squared: f64,
}

impl DecayFit {
    pub fn no_decay(level: f64) -> Self {
        Self {
            time: f64::INFINITY,
            amplitude: 0.0,
            asymptote: level,
            r_squared: 1.0,
        }
    }

    pub fn decays(&self) -> bool {
        self.time.is_finite()
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.time
    }
}

/// Minimizes `f` on `[lo, hi]` by golden-section search.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Best `(c0, c1)` for `y ≈ c0 + c1 e^{-k t}` and the residual sum of squares.
fn separable_decay(t: &[f64], y: &[f64], rate: f64) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let e = (-rate * ti).exp();
        se += e;
        see += e * e;
        sy += yi;
        sey += e * yi;
    }
    let det = n * see - se * se;
    if det.abs() <= 1e-14 * n * see.max(f64::MIN_POSITIVE) {
        let c0 = sy / n;
        let ssr = y.iter().map(|v| (v - c0).powi(2)).sum();
        return (c0, 0.0, ssr);
    }
    let c0 = (see * sy - se * sey) / det;
    let c1 = (n * sey - se * sy) / det;
    let ssr = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| (yi - c0 - c1 * (-rate * ti).exp()).powi(2))
        .sum();
    (c0, c1, ssr)
}

/// Fits `y(t) = y_inf + A exp(-t/T)`.
///
/// The rate enters nonlinearly and is found by a bracketed one-dimensional
/// search on `ln k`, with `y_inf` and `A` solved linearly at each trial rate.
/// The bracket is centred on a log-linear regression of `y - y(t_end)`.
pub fn fit_decay(t: &[f64], y: &[f64]) -> Result<DecayFit> {
    if t.len() != y.len() {
        return Err(Error::domain("time and signal lengths differ"));
    }
    if t.len() < 8 {
        return Err(Error::domain("decay fit needs at least 8 points"));
    }
    if y.iter().chain(t).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite samples".into()));
    }
    let y0 = y[0];
    let spread = y.iter().map(|v| (v - y0).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * y0.abs().max(1e-300) || spread == 0.0 {
        return Ok(DecayFit::no_decay(y0));
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(Error::domain("time grid has zero span"));
    }

    let guess = log_linear_rate(t, y).unwrap_or(3.0 / span);
    let centre = guess.ln();
    let objective = |u: f64| separable_decay(t, y, u.exp()).2;

    let (lo, hi) = (centre - 9.0, centre + 9.0);
    let steps = 180;
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for s in 0..=steps {
        let u = lo + (hi - lo) * s as f64 / steps as f64;
        let v = objective(u);
        if v < best_val {
            best_val = v;
            best = s;
        }
    }
    if best == 0 || best == steps {
        return Err(Error::Fit(format!(
            "decay rate outside the resolvable range (initial guess {guess:.3e} 1/s)"
        )));
    }
    let h = (hi - lo) / steps as f64;
    let u_lo = lo + (best as f64 - 1.0) * h;
    let u = golden_section(objective, u_lo, u_lo + 2.0 * h, 1e-13);
    let rate = u.exp();
    let (c0, c1, ssr) = separable_decay(t, y, rate);

    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    Ok(DecayFit {
        time: 1.0 / rate,
        amplitude: c1,
        asymptote: c0,
        r_squared,
    })
}

fn log_linear_rate(t: &[f64], y: &[f64]) -> Option<f64> {
    let tail = *y.last()?;
    let head = (y[0] - tail).abs();
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .take(y.len() - 1)
        .filter_map(|(&ti, &yi)| {
            let d = (yi - tail).abs();
            (d > 1e-3 * head).then(|| (ti, d.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (slope, _) = ols(&pts)?;
    (slope < 0.0 && slope.is_finite()).then_some(-slope)
}

/// Ordinary least squares line through `(x, y)`; returns (slope, intercept).
fn ols(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Power-law fit `y = C x^slope` on log-log axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub slope: f64,
    /// Standard error of the slope from the residuals.
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares slope of `ln y` against `ln x` over `x ∈ [lo, hi]`, using
/// points with positive finite `y`.
pub fn scaling_exponent(x: &[f64], y: &[f64], range: (f64, f64)) -> Result<PowerLaw> {
    let (lo, hi) = range;
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&xi, &yi)| xi >= lo && xi <= hi && xi > 0.0 && yi > 0.0 && yi.is_finite())
        .map(|(&xi, &yi)| (xi.ln(), yi.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::domain(format!(
            "power-law fit needs at least 3 usable points in [{lo}, {hi}], found {}",
            pts.len()
        )));
    }
    let (slope, intercept) = ols(&pts).ok_or_else(|| Error::domain("degenerate abscissae"))?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = if pts.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(PowerLaw {
        slope,
        stderr,
        intercept,
        points: pts.len(),
    })
}

/// Parameters of `G(ω) = (A/√(2π)) γ / (γ² + ω²)`, the one-sided spectrum of
/// `A e^{-γτ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lorentzian {
    pub amplitude: f64,
    pub gamma: f64,
}

impl Lorentzian {
    pub fn eval(&self, omega: f64) -> f64 {
        self.amplitude / (2.0 * PI).sqrt() * self.gamma / (self.gamma * self.gamma + omega * omega)
    }
}

/// Least-squares Lorentzian through `(ω, G)`. The width is searched on a log
/// scale; the height is linear.
pub fn fit_lorentzian(omega: &[f64], g: &[f64]) -> Result<Lorentzian> {
    if omega.len() != g.len() || omega.len() < 3 {
        return Err(Error::domain("Lorentzian fit needs at least 3 points"));
    }
    let solve = |gamma: f64| {
        let (mut sff, mut sfg) = (0.0, 0.0);
        for (&w, &v) in omega.iter().zip(g) {
            let f = 1.0 / (gamma * gamma + w * w);
            sff += f * f;
            sfg += f * v;
        }
        let c = sfg / sff;
        let ssr: f64 = omega
            .iter()
            .zip(g)
            .map(|(&w, &v)| (v - c / (gamma * gamma + w * w)).powi(2))
            .sum();
        (c, ssr)
    };
    let wmax = omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let positive: Vec<f64> = omega.iter().map(|w| w.abs()).filter(|&w| w > 0.0).collect();
    let wmin = positive.iter().copied().fold(f64::INFINITY, f64::min);
    if !(wmax > 0.0) || !wmin.is_finite() {
        return Err(Error::domain("Lorentzian fit needs non-zero frequencies"));
    }
    let (lo, hi) = ((wmin * 1e-3).ln(), (wmax * 1e3).ln());
    let steps = 400;
    let mut best = (0, f64::INFINITY);
    for s in 0..=steps {
        let u = lo + (hi - lo) * s as f64 / steps as f64;
        let v = solve(u.exp()).1;
        if v < best.1 {
            best = (s, v);
        }
    }
    if best.0 == 0 || best.0 == steps {
        return Err(Error::Fit("Lorentzian width outside the sampled band".into()));
    }
    let h = (hi - lo) / steps as f64;
    let u0 = lo + (best.0 as f64 - 1.0) * h;
    let gamma = golden_section(|u| solve(u.exp()).1, u0, u0 + 2.0 * h, 1e-12).exp();
    let (c, _) = solve(gamma);
    Ok(Lorentzian {
        amplitude: c * (2.0 * PI).sqrt() / gamma,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, end: f64) -> Vec<f64> {
        (0..n).map(|k| end * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_exponential() {
        let tau = 1e-6;
        let t = grid(200, 10e-6);
        let y: Vec<f64> = t.iter().map(|&s| (-s / tau).exp()).collect();
        let fit = fit_decay(&t, &y).unwrap();
        assert!((fit.time - tau).abs() / tau < 1e-6);
        assert!((fit.amplitude - 1.0).abs() < 1e-6);
        assert!(fit.asymptote.abs() < 1e-6);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn offset_exponential() {
        let tau = 2.5e-3;
        let t = grid(150, 20e-3);
        let y: Vec<f64> = t.iter().map(|&s| 0.3 + 0.2 * (-s / tau).exp()).collect();
        let fit = fit_decay(&t, &y).unwrap();
        assert!((fit.asymptote - 0.3).abs() < 1e-9);
        assert!((fit.time - tau).abs() / tau < 1e-6);
    }

    #[test]
    fn biexponential_misfit_returns_slow_component() {
        let (fast, slow) = (1e-6, 1e-5);
        let t = grid(400, 60e-6);
        let y: Vec<f64> = t.iter().map(|&s| 0.1 * (-s / fast).exp() + 0.4 * (-s / slow).exp()).collect();
        let fit = fit_decay(&t, &y).unwrap();
        assert!(fit.r_squared < 1.0);
        assert!(fit.r_squared > 0.95);
        assert!((fit.time - slow).abs() / slow < 0.2, "T = {}", fit.time);
    }

    #[test]
    fn constant_signal_does_not_decay() {
        let t = grid(20, 1.0);
        let fit = fit_decay(&t, &vec![0.25; 20]).unwrap();
        assert!(!fit.decays());
        assert_eq!(fit.asymptote, 0.25);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_decay(&[0.0, 1.0, 2.0], &[1.0, 0.5, 0.25]).is_err());
    }

    #[test]
    fn power_laws() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        let p = scaling_exponent(&x, &sq, (1.0, 10.0)).unwrap();
        assert!((p.slope - 2.0).abs() < 1e-12);
        assert!(p.stderr < 1e-10);
        let cube: Vec<f64> = x.iter().map(|v| 4.0 / v.powi(3)).collect();
        let p = scaling_exponent(&x, &cube, (1.0, 10.0)).unwrap();
        assert!((p.slope + 3.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_inverse_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..40).map(|k| 10f64.powf(k as f64 / 39.0 * 2.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| (1.0 + rng.random_range(-0.05..0.05)) / v).collect();
        let p = scaling_exponent(&x, &y, (1.0, 100.0)).unwrap();
        assert!((p.slope + 1.0).abs() < 0.05, "slope {}", p.slope);
        assert!(p.stderr < 0.05);
    }

    #[test]
    fn scaling_needs_three_points() {
        assert!(scaling_exponent(&[1.0, 2.0, 3.0], &[1.0, -1.0, 2.0], (0.0, 5.0)).is_err());
        assert!(scaling_exponent(&[1.0, 2.0, 30.0], &[1.0, 1.0, 2.0], (0.0, 5.0)).is_err());
    }

    #[test]
    fn lorentzian_recovered_exactly() {
        let truth = Lorentzian { amplitude: 2e-7, gamma: 3e12 };
        let w: Vec<f64> = (0..50).map(|k| k as f64 * 4e11).collect();
        let g: Vec<f64> = w.iter().map(|&x| truth.eval(x)).collect();
        let fit = fit_lorentzian(&w, &g).unwrap();
        assert!((fit.gamma - truth.gamma).abs() / truth.gamma < 1e-8);
        assert!((fit.amplitude - truth.amplitude).abs() / truth.amplitude < 1e-8);
    }
}
