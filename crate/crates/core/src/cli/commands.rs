//! Subcommand implementations.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::Vector3;

use super::config::{parse_component, quantity, ModelConfig, SpectrumSource};
use super::svg::{Plot, Scale, Series};
use super::Context;
use crate::acf::{acf_spectrum, load_spectrum, temperature_exponent, windowed_acf, SpectrumEstimate};
use crate::error::{Error, Result};
use crate::hamiltonian::zeeman_spectrum;
use crate::redfield::RedfieldOptions;
use crate::relaxometry::{field_sweep, temperature_sweep, NamedModel, Quantity, RelaxOptions, SweepResult};
use crate::spectral::{FluctuationSpectrum, SpectralDensityModel};
use crate::trajectory::{detrend, load_trajectory, synth_ou_trajectory, OuParams};
use crate::units::{rad_per_s_to_wavenumber, Unit};

fn fluctuation_spectrum(ctx: &Context) -> Result<FluctuationSpectrum> {
    let cfg = &ctx.config;
    Ok(match &cfg.bath.spectrum {
        SpectrumSource::Flat { g0 } => FluctuationSpectrum::Flat {
            g0: quantity(g0, Unit::Second, "bath.spectrum.g0")?,
        },
        SpectrumSource::Lorentzian { amplitude, gamma } => FluctuationSpectrum::Lorentzian {
            amplitude: *amplitude,
            gamma: quantity(gamma, Unit::RadianPerSecond, "bath.spectrum.gamma")?,
        },
        SpectrumSource::File { path, temperature } => {
            let t = match temperature {
                Some(t) => quantity(t, Unit::Kelvin, "bath.spectrum.temperature")?,
                None => cfg.temperature()?,
            };
            FluctuationSpectrum::Estimated(load_spectrum(&ctx.resolve(path), t)?)
        }
        SpectrumSource::OuSynthetic {
            variance,
            corr_time,
            dt,
            duration,
        } => {
            let traj = synth_ou_trajectory(&OuParams {
                mean: *cfg.spin_system()?.g.matrix(),
                variance: [*variance; 6],
                corr_time: quantity(corr_time, Unit::Second, "bath.spectrum.corr_time")?,
                dt: quantity(dt, Unit::Second, "bath.spectrum.dt")?,
                duration: quantity(duration, Unit::Second, "bath.spectrum.duration")?,
                temperature: cfg.temperature()?,
                seed: ctx.seed,
            })
            .map_err(|e| Error::Config(format!("bath.spectrum: {e}")))?;
            let acf = windowed_acf(&detrend(&traj), &cfg.acf_options()?)
                .map_err(|e| Error::Config(format!("bath.spectrum: {e}")))?;
            FluctuationSpectrum::Estimated(acf_spectrum(&acf, cfg.taper()?))
        }
    })
}

/// Bath model from the `[bath]` block at `field`.
pub fn base_model(ctx: &Context, field: Vector3<f64>) -> Result<SpectralDensityModel> {
    let cfg = &ctx.config;
    let mut model = SpectralDensityModel::new(fluctuation_spectrum(ctx)?, cfg.spin_system()?.g, field, cfg.temperature()?)
        .map_err(|e| Error::Config(format!("bath: {e}")))?;
    model.ohmic = cfg.ohmic()?;
    model.noise = cfg.noise()?;
    model.spin_lattice = cfg.bath.spin_lattice;
    model.magnetic_noise = cfg.bath.magnetic_noise;
    Ok(model)
}

fn apply_overrides(base: &SpectralDensityModel, m: &ModelConfig, key: &str) -> Result<SpectralDensityModel> {
    let mut model = base.clone();
    if let Some(v) = m.spin_lattice {
        model.spin_lattice = v;
    }
    if let Some(v) = m.magnetic_noise {
        model.magnetic_noise = v;
    }
    if let Some(a) = &m.a {
        model.noise.a = quantity(a, Unit::TeslaSquared, &format!("{key}.a"))?;
    }
    if let Some(b) = m.b {
        model.noise.b = b;
    }
    Ok(model)
}

fn relax_options(ctx: &Context) -> RelaxOptions {
    let s = &ctx.config.sweep;
    RelaxOptions {
        points: s.points,
        m_i: s.m_i,
        redfield: RedfieldOptions {
            secular: s.secular,
            ..RedfieldOptions::default()
        },
        ..RelaxOptions::default()
    }
}

pub fn spectrum(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    ctx.ensure_out()?;
    let sys = cfg.spin_system()?;
    let fields = cfg.spectrum_fields()?;
    let dir = Vector3::from(cfg.spectrum.direction);
    let levels = zeeman_spectrum(&sys, &fields, &dir)?;
    let path = ctx.write_csv("zeeman.csv", &[format!("direction: {:?}", cfg.spectrum.direction)], |w| {
        levels.write_csv(w)
    })?;
    println!("wrote {}", path.display());
    let plot = Plot {
        title: "Zeeman levels".into(),
        x_label: "B (T)".into(),
        y_label: "E (cm-1)".into(),
        series: (0..levels.branch_count())
            .map(|k| {
                let e = levels.branch(k).into_iter().map(rad_per_s_to_wavenumber).collect();
                Series::new(format!("level {}", k + 1), fields.clone(), e)
            })
            .collect(),
        ..Plot::default()
    };
    ctx.write_plot("zeeman.svg", &plot)?;

    let b = quantity(&cfg.spectrum.j_field, Unit::Tesla, "spectrum.j_field")?;
    let model = base_model(ctx, dir.normalize() * b)?;
    let (j, jp) = parse_component(&cfg.spectrum.j_component, "spectrum.j_component")?.indices();
    let omegas = ctx.config.j_omegas()?;
    let extra = [
        format!("model: {}", model.describe()),
        format!("component: {}", cfg.spectrum.j_component),
        format!("field_T: {b}"),
    ];
    let path = ctx.write_csv("spectral_density.csv", &extra, |w| model.write_csv(j, jp, &omegas, w))?;
    println!("wrote {}", path.display());
    let w_cm: Vec<f64> = omegas.iter().map(|w| rad_per_s_to_wavenumber(*w)).collect();
    let plot = Plot {
        title: format!("J_{} at {b} T", cfg.spectrum.j_component),
        x_label: "omega (cm-1)".into(),
        y_label: "J (J^2 s)".into(),
        x_scale: Scale::Log,
        y_scale: Scale::Log,
        series: vec![
            Series::new("spin-lattice", w_cm.clone(), omegas.iter().map(|w| model.spin_lattice_signed(j, jp, *w)).collect()),
            Series::new("magnetic noise", w_cm.clone(), omegas.iter().map(|w| model.magnetic_noise_j(j, jp, *w)).collect()),
            Series::new("total", w_cm, omegas.iter().map(|w| model.total_j(j, jp, *w)).collect()),
        ],
    };
    ctx.write_plot("spectral_density.svg", &plot)
}

fn trajectory_list(ctx: &Context, args: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let list: Vec<PathBuf> = if args.is_empty() {
        ctx.config.acf.trajectories.iter().map(|p| ctx.resolve(p)).collect()
    } else {
        args.to_vec()
    };
    if list.is_empty() {
        return Err(Error::Config("no trajectories given on the command line or in acf.trajectories".into()));
    }
    Ok(list)
}

fn estimate_spectrum(ctx: &Context, path: &Path) -> Result<(crate::acf::AcfEstimate, SpectrumEstimate)> {
    let traj = load_trajectory(path)?;
    let acf = windowed_acf(&detrend(&traj), &ctx.config.acf_options()?).map_err(|e| match e {
        Error::Domain(m) => Error::Domain(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let spectrum = acf_spectrum(&acf, ctx.config.taper()?);
    info!("{}: {} windows at {} K", path.display(), acf.n_windows, acf.temperature);
    Ok((acf, spectrum))
}

fn unique_stems(paths: &[PathBuf]) -> Vec<String> {
    let mut seen = HashSet::new();
    paths
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let stem = p.file_stem().map_or_else(|| format!("traj{k}"), |s| s.to_string_lossy().into_owned());
            if seen.insert(stem.clone()) {
                stem
            } else {
                format!("{stem}_{k}")
            }
        })
        .collect()
}

pub fn acf(ctx: &Context, args: &[PathBuf]) -> Result<()> {
    let paths = trajectory_list(ctx, args)?;
    let component = parse_component(&ctx.config.acf.component, "acf.component")?;
    ctx.ensure_out()?;
    let mut acf_series = Vec::new();
    let mut spec_series = Vec::new();
    for (path, stem) in paths.iter().zip(unique_stems(&paths)) {
        let (acf, spectrum) = estimate_spectrum(ctx, path)?;
        let extra = [
            format!("source: {}", path.display()),
            format!("temperature_K: {}", acf.temperature),
            format!("windows: {}", acf.n_windows),
        ];
        let a = ctx.write_csv(&format!("acf_{stem}.csv"), &extra, |w| acf.write_csv(w))?;
        let s = ctx.write_csv(&format!("spectrum_{stem}.csv"), &extra, |w| spectrum.write_csv(w))?;
        println!("wrote {} and {}", a.display(), s.display());
        let label = format!("{stem} ({} K)", acf.temperature);
        acf_series.push(
            Series::new(
                label.clone(),
                acf.lags.iter().map(|t| t * 1e12).collect(),
                acf.component(component).to_vec(),
            ),
        );
        spec_series.push(Series::new(label, spectrum.omega_cm1(), spectrum.component(component).to_vec()));
    }
    let c = &ctx.config.acf.component;
    ctx.write_plot(
        "acf.svg",
        &Plot {
            title: format!("C_{c}(tau)"),
            x_label: "tau (ps)".into(),
            y_label: format!("C_{c}"),
            series: acf_series,
            ..Plot::default()
        },
    )?;
    ctx.write_plot(
        "spectrum.svg",
        &Plot {
            title: format!("G_{c}(omega)"),
            x_label: "omega (cm-1)".into(),
            y_label: format!("G_{c} (s)"),
            series: spec_series,
            ..Plot::default()
        },
    )
}

pub fn scaling(ctx: &Context, args: &[PathBuf]) -> Result<()> {
    let paths = trajectory_list(ctx, args)?;
    let cfg = &ctx.config;
    let component = parse_component(&cfg.acf.component, "acf.component")?;
    let omega_max = quantity(&cfg.acf.omega_max, Unit::RadianPerSecond, "acf.omega_max")?;
    ctx.ensure_out()?;
    let spectra = paths
        .iter()
        .map(|p| estimate_spectrum(ctx, p).map(|(_, s)| s))
        .collect::<Result<Vec<_>>>()?;
    let alpha = temperature_exponent(&spectra, component, omega_max)?;
    let temps: Vec<String> = spectra.iter().map(|s| s.temperature.to_string()).collect();
    let extra = [
        format!("component: {}", cfg.acf.component),
        format!("temperatures_K: {}", temps.join(" ")),
        format!("omega_max_cm1: {}", rad_per_s_to_wavenumber(omega_max)),
    ];
    let path = ctx.write_csv("alpha.csv", &extra, |w| {
        writeln!(w, "omega_cm1,alpha")?;
        for (o, a) in alpha.omega.iter().zip(&alpha.alpha) {
            match a {
                Some(a) => writeln!(w, "{},{a}", rad_per_s_to_wavenumber(*o))?,
                None => writeln!(w, "{},", rad_per_s_to_wavenumber(*o))?,
            }
        }
        Ok(())
    })?;
    println!("wrote {}", path.display());
    ctx.write_csv("alpha_histogram.csv", &extra, |w| {
        writeln!(w, "alpha_lo,alpha_hi,count")?;
        for (k, n) in alpha.histogram.counts.iter().enumerate() {
            writeln!(w, "{},{},{n}", alpha.histogram.edges[k], alpha.histogram.edges[k + 1])?;
        }
        Ok(())
    })?;
    let (x, y): (Vec<f64>, Vec<f64>) = alpha
        .omega
        .iter()
        .zip(&alpha.alpha)
        .filter(|(o, _)| **o <= omega_max)
        .filter_map(|(o, a)| Some((rad_per_s_to_wavenumber(*o), (*a)?)))
        .unzip();
    ctx.write_plot(
        "alpha.svg",
        &Plot {
            title: format!("temperature exponent of G_{}", cfg.acf.component),
            x_label: "omega (cm-1)".into(),
            y_label: "alpha".into(),
            series: vec![Series::new("alpha", x, y)],
            ..Plot::default()
        },
    )?;
    println!(
        "alpha = {:.3} ± {:.3} over {} frequencies up to {:.1} cm-1",
        alpha.mean,
        alpha.std,
        alpha.samples,
        rad_per_s_to_wavenumber(omega_max)
    );
    Ok(())
}

fn sweep_plot(result: &SweepResult, q: Quantity) -> Plot {
    let name = match q {
        Quantity::T1 => "T1",
        Quantity::T2 => "T2",
    };
    Plot {
        title: format!("{name} against field at {} K", result.temperature),
        x_label: "B (T)".into(),
        y_label: format!("{name} (s)"),
        x_scale: Scale::Log,
        y_scale: Scale::Log,
        series: result
            .curves()
            .into_iter()
            .map(|(model, hf)| {
                let (x, y) = result.values(&model, hf, q);
                let label = if hf { model } else { format!("{model} (no hf)") };
                Series::new(label, x, y)
            })
            .collect(),
    }
}

pub fn sweep(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let sys = cfg.spin_system()?;
    let fields = cfg.sweep_fields()?;
    let dir = cfg.sweep_direction()?.normalize();
    let base = base_model(ctx, dir * fields[0])?;
    let models: Vec<NamedModel> = if cfg.sweep.models.is_empty() {
        vec![NamedModel::new("bath", base.clone())]
    } else {
        cfg.sweep
            .models
            .iter()
            .enumerate()
            .map(|(k, m)| Ok(NamedModel::new(m.name.clone(), apply_overrides(&base, m, &format!("sweep.models[{k}]"))?)))
            .collect::<Result<_>>()?
    };
    let opts = relax_options(ctx);
    ctx.ensure_out()?;

    let result = field_sweep(&sys, &models, &fields, &dir, cfg.sweep.no_hyperfine, &opts)?;
    let extra: Vec<String> = models
        .iter()
        .map(|m| format!("model {}: {}", m.name, m.model.describe()))
        .chain([format!("temperature_K: {}", result.temperature)])
        .collect();
    let path = ctx.write_csv("sweep.csv", &extra, |w| result.write_csv(w))?;
    println!("wrote {}", path.display());
    ctx.write_plot("t1.svg", &sweep_plot(&result, Quantity::T1))?;
    ctx.write_plot("t2.svg", &sweep_plot(&result, Quantity::T2))?;

    let ranges = cfg.exponent_ranges()?;
    let mut rows = Vec::new();
    println!("{:<24} {:>3} {:>5} {:>16} {:>9} {:>8}", "model", "hf", "qty", "B range (T)", "slope", "stderr");
    for (model, hf) in result.curves() {
        for q in [Quantity::T1, Quantity::T2] {
            let qname = if q == Quantity::T1 { "T1" } else { "T2" };
            for &(lo, hi) in &ranges {
                let (slope, stderr) = match result.exponent(&model, hf, q, (lo, hi)) {
                    Ok(p) => (p.slope, p.stderr),
                    Err(e) => {
                        warn!("{model} {qname} over {lo}-{hi} T: {e}");
                        (f64::NAN, f64::NAN)
                    }
                };
                println!(
                    "{:<24} {:>3} {:>5} {:>16} {:>9.3} {:>8.3}",
                    model,
                    if hf { "yes" } else { "no" },
                    qname,
                    format!("{lo}-{hi}"),
                    slope,
                    stderr
                );
                rows.push(format!("{model},{hf},{qname},{lo},{hi},{slope},{stderr}"));
            }
        }
    }
    ctx.write_csv("exponents.csv", &extra, |w| {
        writeln!(w, "model,with_hyperfine,quantity,B_min_T,B_max_T,slope,stderr")?;
        rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;

    let temps = cfg.sweep_temperatures()?;
    if !temps.is_empty() {
        temperature_scan(ctx, &sys, &base, &temps, dir, &opts)?;
    }

    let failures = result.failures();
    for f in &failures {
        warn!(
            "{} at {} T (hyperfine {}): {}",
            f.model,
            f.field,
            f.with_hyperfine,
            f.failure.as_deref().unwrap_or("")
        );
    }
    if !failures.is_empty() {
        return Err(Error::Numerical(format!(
            "{} of {} sweep points failed; see sweep.csv",
            failures.len(),
            result.points.len()
        )));
    }
    Ok(())
}

fn temperature_scan(
    ctx: &Context,
    sys: &crate::hamiltonian::SpinSystem,
    base: &SpectralDensityModel,
    temps: &[f64],
    dir: Vector3<f64>,
    opts: &RelaxOptions,
) -> Result<()> {
    let cfg = &ctx.config;
    let b = quantity(&cfg.sweep.temperature_field, Unit::Tesla, "sweep.temperature_field")?;
    let t_ref = quantity(&cfg.sweep.reference_temperature, Unit::Kelvin, "sweep.reference_temperature")?;
    let exponent = cfg.sweep.g_temperature_exponent;
    let at_field = base.with_field(dir * b);
    let scan = temperature_sweep(
        sys,
        |t| {
            let mut m = at_field.with_temperature(t);
            m.g_scale *= (t / t_ref).powf(exponent);
            Ok(m)
        },
        temps,
        opts,
    )?;
    let extra = [
        format!("model: {}", at_field.describe()),
        format!("field_T: {b}"),
        format!("g_scale: (T/{t_ref} K)^{exponent}"),
        format!("t1_exponent: {}", scan.t1_exponent.slope),
    ];
    let path = ctx.write_csv("temperature_sweep.csv", &extra, |w| {
        writeln!(w, "T_K,T1_s,T2_s")?;
        for k in 0..scan.temperatures.len() {
            writeln!(w, "{},{},{}", scan.temperatures[k], scan.t1[k], scan.t2[k])?;
        }
        Ok(())
    })?;
    println!("wrote {}", path.display());
    println!("T1 ~ T^{:.3} at {b} T", scan.t1_exponent.slope);
    ctx.write_plot(
        "temperature_sweep.svg",
        &Plot {
            title: format!("relaxation at {b} T"),
            x_label: "T (K)".into(),
            y_label: "time (s)".into(),
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series: vec![
                Series::new("T1", scan.temperatures.clone(), scan.t1.clone()),
                Series::new("T2", scan.temperatures.clone(), scan.t2.clone()),
            ],
        },
    )
}

pub fn synth(ctx: &Context) -> Result<()> {
    let params = ctx.config.synth_params(ctx.seed)?;
    ctx.ensure_out()?;
    let traj = synth_ou_trajectory(&params)?;
    let path = ctx.out.join("trajectory.csv");
    let extra = [
        format!("ou corr_time_s: {} dt_s: {} variance: {:?}", params.corr_time, params.dt, params.variance),
    ];
    traj.save(&path, &ctx.metadata(&extra))?;
    println!("wrote {} ({} samples at {} K)", path.display(), traj.len(), params.temperature);
    let t: Vec<f64> = (0..traj.len()).map(|k| k as f64 * params.dt * 1e12).collect();
    ctx.write_plot(
        "trajectory.svg",
        &Plot {
            title: "g_zz(t)".into(),
            x_label: "t (ps)".into(),
            y_label: "g_zz".into(),
            series: vec![Series::new("gzz", t, traj.component(crate::trajectory::Component::Zz))],
            ..Plot::default()
        },
    )
}
