//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns a flat `Float64Array`; the layout is given
//! in its doc comment. The plain-Rust versions in [`api`] carry the logic and
//! are tested natively.

use wasm_bindgen::prelude::*;

pub mod api {
    use nalgebra::Vector3;
    use spinbath::hamiltonian::{zeeman_spectrum, SpinSystem};
    use spinbath::relaxometry::{log_grid, relaxation_times, RelaxOptions};
    use spinbath::spectral::{FluctuationSpectrum, SpectralDensityModel, DEFAULT_FLAT_G0};
    use spinbath::units::{rad_per_s_to_wavenumber, wavenumber_to_rad_per_s};

    pub const MAX_SWEEP_POINTS: usize = 60;

    fn direction(theta_deg: f64) -> Vector3<f64> {
        let t = theta_deg.to_radians();
        Vector3::new(t.sin(), 0.0, t.cos())
    }

    fn model(field: Vector3<f64>, temperature: f64, b_coef: f64) -> Result<SpectralDensityModel, String> {
        let sys = SpinSystem::copper_porphyrin();
        let mut m = SpectralDensityModel::new(FluctuationSpectrum::Flat { g0: DEFAULT_FLAT_G0 }, sys.g, field, temperature)
            .map_err(|e| e.to_string())?;
        if !(b_coef >= 0.0) {
            return Err("b must be non-negative".into());
        }
        m.noise.b = b_coef;
        Ok(m)
    }

    /// Levels in cm⁻¹ on `points` fields from 0 to `b_max`, row-major
    /// `points × 8`.
    pub fn zeeman_levels(b_max: f64, points: usize, theta_deg: f64) -> Result<Vec<f64>, String> {
        if !(b_max > 0.0) || points < 2 {
            return Err("need b_max > 0 and at least 2 points".into());
        }
        let fields: Vec<f64> = (0..points).map(|k| b_max * k as f64 / (points - 1) as f64).collect();
        let z = zeeman_spectrum(&SpinSystem::copper_porphyrin(), &fields, &direction(theta_deg)).map_err(|e| e.to_string())?;
        Ok(z.levels.iter().flatten().map(|e| rad_per_s_to_wavenumber(*e)).collect())
    }

    /// `[ω (cm⁻¹); J_δg; J_δB]`, each `points` long, for the zz component at
    /// `field` tesla along z.
    pub fn spectral_density(field: f64, temperature: f64, b_coef: f64, points: usize) -> Result<Vec<f64>, String> {
        if points < 2 {
            return Err("need at least 2 points".into());
        }
        let m = model(Vector3::new(0.0, 0.0, field), temperature, b_coef)?;
        let omegas = log_grid(wavenumber_to_rad_per_s(1e-4), wavenumber_to_rad_per_s(10.0), points);
        let mut out: Vec<f64> = omegas.iter().map(|w| rad_per_s_to_wavenumber(*w)).collect();
        out.extend(omegas.iter().map(|w| m.spin_lattice_signed(2, 2, *w)));
        out.extend(omegas.iter().map(|w| m.magnetic_noise_j(2, 2, *w)));
        Ok(out)
    }

    /// `[B (T); T1 (s); T2 (s)]`, each `points` long, over 0.01-10 T along z.
    pub fn relaxation_sweep(
        temperature: f64,
        b_coef: f64,
        spin_lattice: bool,
        magnetic_noise: bool,
        points: usize,
    ) -> Result<Vec<f64>, String> {
        if !(2..=MAX_SWEEP_POINTS).contains(&points) {
            return Err(format!("points must lie in 2..={MAX_SWEEP_POINTS}"));
        }
        let sys = SpinSystem::copper_porphyrin();
        let mut base = model(Vector3::zeros(), temperature, b_coef)?;
        base.spin_lattice = spin_lattice;
        base.magnetic_noise = magnetic_noise;
        let fields = log_grid(0.01, 10.0, points);
        let mut t1 = Vec::with_capacity(points);
        let mut t2 = Vec::with_capacity(points);
        for &b in &fields {
            let r = relaxation_times(&sys, &base.with_field(Vector3::new(0.0, 0.0, b)), &RelaxOptions::default())
                .map_err(|e| e.to_string())?;
            t1.push(r.t1.time());
            t2.push(r.t2.time());
        }
        Ok(fields.into_iter().chain(t1).chain(t2).collect())
    }
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = zeemanLevels)]
pub fn zeeman_levels(b_max: f64, points: usize, theta_deg: f64) -> Result<Vec<f64>, JsValue> {
    js(api::zeeman_levels(b_max, points, theta_deg))
}

#[wasm_bindgen(js_name = spectralDensity)]
pub fn spectral_density(field: f64, temperature: f64, b_coef: f64, points: usize) -> Result<Vec<f64>, JsValue> {
    js(api::spectral_density(field, temperature, b_coef, points))
}

#[wasm_bindgen(js_name = relaxationSweep)]
pub fn relaxation_sweep(
    temperature: f64,
    b_coef: f64,
    spin_lattice: bool,
    magnetic_noise: bool,
    points: usize,
) -> Result<Vec<f64>, JsValue> {
    js(api::relaxation_sweep(temperature, b_coef, spin_lattice, magnetic_noise, points))
}
