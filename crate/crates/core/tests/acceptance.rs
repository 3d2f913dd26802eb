//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints a PASS/FAIL line; the process fails if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinbath::acf::{acf_spectrum, temperature_exponent, windowed_acf, AcfOptions, SpectrumEstimate, Taper};
use spinbath::cli::commands::base_model;
use spinbath::cli::{Cli, Command, Config, Context};
use spinbath::fit::{fit_lorentzian, scaling_exponent};
use spinbath::hamiltonian::{build_hamiltonian, eigensystem, GTensor, SpinSystem, COPPER_A_PAR_MHZ, COPPER_G_PAR};
use spinbath::redfield::{gibbs_state, redfield_tensor, DensityMatrix, Method, Picture, RedfieldOptions, SteadyState};
use spinbath::relaxometry::{
    default_field_grid, log_grid, relaxation_times, relaxation_times_with, temperature_sweep, RelaxOptions,
};
use spinbath::spectral::{noise_amplitude, NoiseParams, SpectralDensityModel, DEFAULT_NOISE_A, DEFAULT_NOISE_B};
use spinbath::trajectory::{detrend, synth_ou_trajectory, Component, OuParams};
use spinbath::units::{megahertz_to_rad_per_s, HBAR, K_B, MU_B};
use spinbath::CMatrix;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn z(b: f64) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, b)
}

/// Bath model built from the default configuration, as the CLI would.
fn default_model(field: Vector3<f64>) -> SpectralDensityModel {
    let cli = Cli {
        command: Command::Sweep,
        config: None,
        out: None,
        no_plots: true,
        seed: None,
    };
    base_model(&Context::new(&cli).unwrap(), field).unwrap()
}

fn spin_lattice_only(field: Vector3<f64>) -> SpectralDensityModel {
    let mut m = default_model(field);
    m.magnetic_noise = false;
    m
}

fn hybrid(field: Vector3<f64>, b: f64) -> SpectralDensityModel {
    let mut m = default_model(field);
    m.magnetic_noise = true;
    m.noise.b = b;
    m
}

fn copper() -> SpinSystem {
    Config::default().spin_system().unwrap()
}

fn noise_amplitude_values() -> Outcome {
    let (_, low) = noise_amplitude(&NoiseParams::new(DEFAULT_NOISE_A, 0.0, 1e8).unwrap(), 1.0).map_err(|e| e.to_string())?;
    let (_, high) =
        noise_amplitude(&NoiseParams::new(DEFAULT_NOISE_A, DEFAULT_NOISE_B, 1e8).unwrap(), 10.0).map_err(|e| e.to_string())?;
    let ok = (low - 40e-6).abs() <= 1e-15 && ((high - 1.7326e-3) / 1.7326e-3).abs() <= 1e-4;
    check(ok, format!("dB(b=0) = {:.6} uT, dB(10 T) = {:.6} mT", low * 1e6, high * 1e3))
}

fn t1_field_slope() -> Outcome {
    let sys = copper();
    let fields = log_grid(1.0, 10.0, 8);
    let opts = RelaxOptions::default();
    let mut t1 = Vec::new();
    for &b in &fields {
        let m = spin_lattice_only(z(b)).with_temperature(300.0);
        t1.push(relaxation_times(&sys, &m, &opts).map_err(|e| e.to_string())?.t1.time());
    }
    let p = scaling_exponent(&fields, &t1, (1.0, 10.0)).map_err(|e| e.to_string())?;
    check((p.slope + 3.0).abs() <= 0.1, format!("T1 ~ B^{:.3} over 1-10 T at 300 K", p.slope))
}

fn t2_field_slope() -> Outcome {
    let sys = copper();
    let fields = log_grid(1.0, 10.0, 8);
    let opts = RelaxOptions::default();
    let mut t2 = Vec::new();
    for &b in &fields {
        t2.push(relaxation_times(&sys, &hybrid(z(b), DEFAULT_NOISE_B), &opts).map_err(|e| e.to_string())?.t2.time());
    }
    let p = scaling_exponent(&fields, &t2, (1.0, 10.0)).map_err(|e| e.to_string())?;
    check((p.slope + 2.0).abs() <= 0.1, format!("T2 ~ B^{:.3} over 1-10 T with b = 3e-8", p.slope))
}

fn t1_temperature_slope() -> Outcome {
    let sys = copper();
    let base = spin_lattice_only(z(1.0));
    let t_ref = base.temperature;
    let temps = [10.0, 20.0, 50.0, 100.0, 200.0, 300.0];
    let scan = temperature_sweep(
        &sys,
        |t| {
            let mut m = base.with_temperature(t);
            m.g_scale = t / t_ref;
            Ok(m)
        },
        &temps,
        &RelaxOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let s = scan.t1_exponent.slope;
    check((s + 1.0).abs() <= 0.05, format!("T1 ~ T^{s:.4} over 10-300 K at 1 T"))
}

fn pure_relaxation_limit() -> Outcome {
    let sys = copper();
    let opts = RelaxOptions::default();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for b in default_field_grid() {
        let r = relaxation_times(&sys, &spin_lattice_only(z(b)), &opts).map_err(|e| e.to_string())?;
        let ratio = r.t2.time() / (2.0 * r.t1.time());
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    check(lo >= 0.95 && hi <= 1.05, format!("T2/(2 T1) in [{lo:.4}, {hi:.4}] over the default grid"))
}

fn constant_noise_regime() -> Outcome {
    let sys = copper();
    let opts = RelaxOptions::default();
    let grid = default_field_grid();
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    for &b in &grid {
        let r = relaxation_times(&sys, &hybrid(z(b), 0.0), &opts).map_err(|e| e.to_string())?;
        t1.push(r.t1.time());
        t2.push(r.t2.time());
    }
    let band: Vec<f64> = grid.iter().zip(&t2).filter(|(b, _)| **b >= 0.1 - 1e-12).map(|(_, t)| *t).collect();
    let t2_min = band.iter().copied().fold(f64::INFINITY, f64::min);
    let t2_max = band.iter().copied().fold(0.0, f64::max);
    let spread = t2_max / t2_min - 1.0;
    let peak = (0..t1.len()).max_by(|&a, &b| t1[a].total_cmp(&t1[b])).unwrap();
    let unimodal = t1[..=peak].windows(2).all(|w| w[1] > w[0]) && t1[peak..].windows(2).all(|w| w[1] < w[0]);
    let interior = peak > 0 && peak + 1 < t1.len();
    check(
        spread < 0.2 && unimodal && interior,
        format!(
            "T2 spread {:.2}% (T2 ~ {:.2} us); T1 max at {:.3} T, unimodal: {unimodal}",
            spread * 100.0,
            t2_min * 1e6,
            grid[peak]
        ),
    )
}

fn thermal_steady_state() -> Outcome {
    let sys = copper();
    let mut worst = 0.0f64;
    for b in [0.05, 0.3, 1.0, 5.0] {
        let model = spin_lattice_only(z(b));
        let eigen = eigensystem(&build_hamiltonian(&sys, &model.field)).map_err(|e| e.to_string())?;
        let opts = RedfieldOptions {
            picture: Picture::Schrodinger,
            ..RedfieldOptions::default()
        };
        let rs = redfield_tensor(&eigen, &model, opts);
        let rho = match rs.steady_state().map_err(|e| e.to_string())? {
            SteadyState::Unique(rho) => rho,
            SteadyState::Degenerate { multiplicity, .. } => return Err(format!("{multiplicity}-fold steady state at {b} T")),
        };
        let gibbs = gibbs_state(&eigen, model.temperature);
        let scale = gibbs.rho.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, g) in rho.rho.iter().zip(gibbs.rho.iter()) {
            worst = worst.max((x - g).norm() / g.norm().max(scale));
        }
    }
    check(worst <= 1e-6, format!("max entrywise deviation from Gibbs {worst:.2e} (relative)"))
}

fn random_psd(rng: &mut ChaCha8Rng, scale: f64) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    (a * a.transpose()) * scale
}

fn structural_invariants() -> Outcome {
    let sys = copper();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_trace = 0.0f64;
    let mut worst_herm = 0.0f64;
    for _ in 0..100 {
        let t = rng.random_range(2.0..300.0);
        let b = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize() * rng.random_range(0.01..10.0);
        let j0 = random_psd(&mut rng, 1e-64);
        let j1 = random_psd(&mut rng, 1e-64);
        let width = rng.random_range(1e9..1e12);
        let beta = HBAR / (K_B * t);
        let bath = move |w: f64| {
            let shape = j0 + j1 * (width * width / (width * width + w * w));
            if w > 0.0 {
                shape
            } else if w < 0.0 {
                shape * (-beta * w.abs()).exp()
            } else {
                Matrix3::zeros()
            }
        };
        let eigen = eigensystem(&build_hamiltonian(&sys, &b)).map_err(|e| e.to_string())?;
        let rs = redfield_tensor(&eigen, &bath, RedfieldOptions::default());
        let rate = rs.max_rate();
        worst_trace = worst_trace.max(rs.trace_defect() / rate);
        worst_herm = worst_herm.max(rs.hermiticity_defect() / rate);

        let n = rs.dimension();
        let psi = DMatrix::from_fn(n, 1, |_, _| spinbath::C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let mut rho: CMatrix = &psi * psi.adjoint();
        let tr = rho.trace();
        rho /= tr;
        let rho0 = DensityMatrix::new(rho).map_err(|e| e.to_string())?;
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.25 / rate).collect();
        for r in rs.propagate(&rho0, &times, Method::Exponential).map_err(|e| e.to_string())? {
            worst_trace = worst_trace.max((r.trace() - 1.0).norm());
            worst_herm = worst_herm.max((&r.rho - r.rho.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
    }
    check(
        worst_trace <= 1e-9 && worst_herm <= 1e-9,
        format!("100 instances: trace defect {worst_trace:.2e}, hermiticity defect {worst_herm:.2e}"),
    )
}

/// Flat transverse closure bath with detailed balance at `t`.
fn flat_transverse(jxx: f64, jyy: f64, t: f64) -> impl Fn(f64) -> Matrix3<f64> + Sync {
    let beta = HBAR / (K_B * t);
    move |w: f64| {
        let j = Matrix3::from_diagonal(&Vector3::new(jxx, jyy, 0.0));
        if w > 0.0 {
            j
        } else if w < 0.0 {
            j * (-beta * w.abs()).exp()
        } else {
            Matrix3::zeros()
        }
    }
}

/// Golden rule with the two-sided spectrum S = 2J and
/// |<down|sigma_x|up>|^2 = |<down|sigma_y|up>|^2 = 1.
fn golden_rule_t1(jxx: f64, jyy: f64, g_par: f64, b: f64, t: f64) -> f64 {
    let omega0 = MU_B * g_par * b / HBAR;
    let emission = 2.0 * (jxx + jyy) / (HBAR * HBAR);
    let absorption = emission * (-HBAR * omega0 / (K_B * t)).exp();
    1.0 / (emission + absorption)
}

fn two_level_oracle() -> Outcome {
    let (g_perp, g_par) = (2.0, 2.3);
    let sys = SpinSystem::electron_only(GTensor::axial(g_perp, g_par));
    let opts = RelaxOptions::default();
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (b, t) in [(1.0, 10.0), (0.2, 4.0), (5.0, 300.0)] {
        let (jxx, jyy) = (3e-64, 1e-64);
        let r = relaxation_times_with(&sys, &z(b), &flat_transverse(jxx, jyy, t), &opts).map_err(|e| e.to_string())?;
        let oracle = golden_rule_t1(jxx, jyy, g_par, b, t);
        let e1 = (r.t1.time() / oracle - 1.0).abs();
        // Bloch limit T2 = 2 T1 for an axially symmetric transverse bath.
        let sym = relaxation_times_with(&sys, &z(b), &flat_transverse(2e-64, 2e-64, t), &opts).map_err(|e| e.to_string())?;
        let e2 = (sym.t2.time() / (2.0 * golden_rule_t1(2e-64, 2e-64, g_par, b, t)) - 1.0).abs();
        worst = worst.max(e1).max(e2);
        lines.push(format!("{b} T/{t} K: T1 {:.4e} s (err {e1:.1e}), T2 err {e2:.1e}", r.t1.time()));
    }
    check(worst <= 0.01, lines.join("; "))
}

fn ou_lorentzian_value(sigma2: f64, tau_c: f64, w: f64) -> f64 {
    let gamma = 1.0 / tau_c;
    sigma2 * gamma / ((2.0 * PI).sqrt() * (gamma * gamma + w * w))
}

fn ou_spectrum(variance: f64, tau_c: f64, dt: f64, duration: f64, temperature: f64, seed: u64) -> SpectrumEstimate {
    let traj = synth_ou_trajectory(&OuParams {
        mean: Matrix3::from_diagonal(&Vector3::new(2.11, 2.11, 2.04)),
        variance: [variance; 6],
        corr_time: tau_c,
        dt,
        duration,
        temperature,
        seed,
    })
    .unwrap();
    let acf = windowed_acf(&detrend(&traj), &AcfOptions::default()).unwrap();
    acf_spectrum(&acf, Taper::None)
}

fn estimation_oracle() -> Outcome {
    let (sigma2, tau_c) = (1e-7, 1e-12);
    let spec = ou_spectrum(sigma2, tau_c, 20e-15, 35_000e-12, 10.0, 2024);
    let zz = Component::Zz.index();
    let band: Vec<usize> = (0..spec.omega.len()).filter(|&k| spec.omega[k] <= 2.0 / tau_c).collect();
    let pointwise = band
        .iter()
        .map(|&k| (spec.g[zz][k] / ou_lorentzian_value(sigma2, tau_c, spec.omega[k]) - 1.0).abs())
        .fold(0.0, f64::max);
    let w: Vec<f64> = band.iter().map(|&k| spec.omega[k]).collect();
    let g: Vec<f64> = band.iter().map(|&k| spec.g[zz][k]).collect();
    let fit = fit_lorentzian(&w, &g).map_err(|e| e.to_string())?;
    let gamma_err = (fit.gamma * tau_c - 1.0).abs();
    let amp_err = (fit.amplitude / sigma2 - 1.0).abs();

    let temps = [10.0, 50.0, 100.0, 150.0, 300.0];
    let spectra: Vec<SpectrumEstimate> = temps
        .iter()
        .enumerate()
        .map(|(k, &t)| ou_spectrum(1e-9 * t, 0.2e-12, 10e-15, 3500e-12, t, 100 + k as u64))
        .collect();
    let omega_max = spinbath::units::wavenumber_to_rad_per_s(100.0);
    let alpha = temperature_exponent(&spectra, Component::Zz, omega_max).map_err(|e| e.to_string())?;
    check(
        pointwise <= 0.1 && gamma_err <= 0.1 && amp_err <= 0.1 && (alpha.mean - 1.0).abs() <= 0.2,
        format!(
            "Lorentzian: max pointwise error {:.3} over {} points, gamma tau_c - 1 = {:.3}, A/var - 1 = {:.3}; alpha = {:.3} +- {:.3}",
            pointwise,
            band.len(),
            gamma_err,
            amp_err,
            alpha.mean,
            alpha.std
        ),
    )
}

fn constructed_exponents() -> Outcome {
    let omega: Vec<f64> = (0..64).map(|k| k as f64 * 1e11).collect();
    let base: Vec<f64> = omega.iter().map(|w| 1e-24 / (1.0 + (w / 3e12).powi(2))).collect();
    let mut worst = 0.0f64;
    for power in [1.0f64, 2.0] {
        let spectra: Vec<SpectrumEstimate> = [10.0f64, 30.0, 77.0, 150.0, 300.0]
            .iter()
            .map(|&t| {
                let g: Vec<f64> = base.iter().map(|v| v * t.powf(power)).collect();
                SpectrumEstimate {
                    omega: omega.clone(),
                    g: std::array::from_fn(|_| g.clone()),
                    temperature: t,
                }
            })
            .collect();
        let a = temperature_exponent(&spectra, Component::Zz, 1e13).map_err(|e| e.to_string())?;
        for v in a.alpha.iter().flatten() {
            worst = worst.max((v - power).abs());
        }
        worst = worst.max((a.mean - power).abs());
    }
    check(worst <= 1e-10, format!("max |alpha - exact| = {worst:.2e}"))
}

/// Eigenvalues of a Hermitian matrix from cyclic Jacobi rotations on its
/// real symmetric embedding [[Re, -Im], [Im, Re]], which doubles each one.
fn jacobi_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.nrows();
    let m = 2 * n;
    let mut a = DMatrix::from_fn(m, m, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let v = h[(i % n, j % n)];
        match (bi, bj) {
            (0, 0) | (1, 1) => v.re,
            (0, 1) => -v.im,
            _ => v.im,
        }
    });
    for _sweep in 0..100 {
        let off: f64 = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        let diag: f64 = (0..m).map(|i| a[(i, i)].powi(2)).sum();
        if off <= 1e-30 * diag {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..m).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

fn zeeman_asymptotics() -> Outcome {
    let sys = copper();
    let slope = MU_B * COPPER_G_PAR / (2.0 * HBAR);
    let a_par = megahertz_to_rad_per_s(COPPER_A_PAR_MHZ);
    let (b1, b2) = (1e4, 2e4);
    let e1 = eigensystem(&build_hamiltonian(&sys, &z(b1))).map_err(|e| e.to_string())?.energies;
    let e2 = eigensystem(&build_hamiltonian(&sys, &z(b2))).map_err(|e| e.to_string())?.energies;
    // Ascending order: m_s = -1/2 with m_I = 3/2 .. -3/2, then m_s = +1/2 with m_I = -3/2 .. 3/2.
    let mut worst_slope = 0.0f64;
    let mut worst_offset = 0.0f64;
    for k in 0..8 {
        let (ms, mi) = if k < 4 { (-0.5, 1.5 - k as f64) } else { (0.5, -1.5 + (k - 4) as f64) };
        let s = (e2[k] - e1[k]) / (b2 - b1);
        let exact_slope = 2.0 * ms * slope;
        worst_slope = worst_slope.max((s / exact_slope - 1.0).abs());
        let offset = e2[k] - s * b2;
        let exact_offset = a_par * ms * mi;
        worst_offset = worst_offset.max((offset / exact_offset - 1.0).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_eig = 0.0f64;
    for _ in 0..20 {
        let b = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)) * rng.random_range(0.0..2.0);
        let h = build_hamiltonian(&sys, &b);
        let ours = eigensystem(&h).map_err(|e| e.to_string())?.energies;
        let oracle = jacobi_eigenvalues(&h);
        let scale = oracle.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (x, y) in ours.iter().zip(&oracle) {
            worst_eig = worst_eig.max((x - y).abs() / scale);
        }
    }
    check(
        worst_slope <= 1e-6 && worst_offset <= 1e-6 && worst_eig <= 1e-9,
        format!("slope error {worst_slope:.2e}, hyperfine offset error {worst_offset:.2e}, eigenvalue error vs Jacobi {worst_eig:.2e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("noise amplitude", noise_amplitude_values),
        ("spin-lattice field scaling", t1_field_slope),
        ("dephasing field scaling", t2_field_slope),
        ("temperature scaling", t1_temperature_slope),
        ("pure-relaxation limit", pure_relaxation_limit),
        ("field-independent noise", constant_noise_regime),
        ("thermal steady state", thermal_steady_state),
        ("Redfield invariants", structural_invariants),
        ("two-level oracle", two_level_oracle),
        ("estimation oracle", estimation_oracle),
        ("constructed exponents", constructed_exponents),
        ("Zeeman spectrum", zeeman_asymptotics),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
