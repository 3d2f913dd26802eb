//! T1/T2 extraction: polarized initial states, decay signals, exponential
//! fits, and field or temperature sweeps.

use std::io::Write;

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::fit::{fit_decay, scaling_exponent, DecayFit, PowerLaw, DECAY_R2_WARNING};
use crate::hamiltonian::{build_hamiltonian, eigensystem, EigenSystem, SpinSystem};
use crate::linalg::vectorize;
use crate::parallel::par_map;
use crate::redfield::{redfield_tensor, DensityMatrix, Method, RedfieldOptions, RedfieldSystem, SpectralDensity};
use crate::spectral::SpectralDensityModel;
use crate::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    /// `|m_s = +1/2⟩|m_I⟩`.
    Z,
    /// `(|+1/2⟩ + |-1/2⟩)/√2 ⊗ |m_I⟩`.
    X,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub polarization: Polarization,
    /// Nuclear projection; `None` means the largest, `m_I = I`.
    pub m_i: Option<f64>,
}

impl InitialState {
    pub fn z() -> Self {
        Self {
            polarization: Polarization::Z,
            m_i: None,
        }
    }

    pub fn x() -> Self {
        Self {
            polarization: Polarization::X,
            m_i: None,
        }
    }

    pub fn with_m_i(self, m_i: f64) -> Self {
        Self { m_i: Some(m_i), ..self }
    }
}

/// Pure initial state rotated into the eigenbasis of `eigen`.
pub fn initial_state(sys: &SpinSystem, eigen: &EigenSystem, spec: InitialState) -> Result<DensityMatrix> {
    let i = sys.nuclear_spin();
    let nd = sys.nuclear_dimension();
    if eigen.dimension() != 2 * nd {
        return Err(Error::domain("eigensystem does not belong to this spin system"));
    }
    let m = spec.m_i.unwrap_or(i);
    let k = i - m;
    if !(k >= -1e-9 && k <= 2.0 * i + 1e-9) || (k - k.round()).abs() > 1e-9 {
        return Err(Error::domain(format!("m_I = {m} is not a projection of I = {i}")));
    }
    let nuc = k.round() as usize;
    let mut psi = DVector::<C64>::zeros(2 * nd);
    match spec.polarization {
        Polarization::Z => psi[nuc] = C64::new(1.0, 0.0),
        Polarization::X => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            psi[nuc] = C64::new(h, 0.0);
            psi[nd + nuc] = C64::new(h, 0.0);
        }
    }
    let rotated = eigen.states.adjoint() * psi;
    DensityMatrix::pure(&rotated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `⟨S_z⟩`.
    Sz,
    /// `|⟨S_+⟩|`, the transverse coherence magnitude.
    Coherence,
}

fn observable_operator(eigen: &EigenSystem, obs: Observable) -> CMatrix {
    match obs {
        Observable::Sz => eigen.sigma[2].scale(0.5),
        Observable::Coherence => (&eigen.sigma[0] + eigen.sigma[1].map(|z| z * C64::new(0.0, 1.0))).scale(0.5),
    }
}

fn observe(rho: &DensityMatrix, op: &CMatrix, obs: Observable) -> f64 {
    let v = rho.expectation(op);
    match obs {
        Observable::Sz => v.re,
        Observable::Coherence => v.norm(),
    }
}

/// Observable values along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySignal {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn observable_signal(rhos: &[DensityMatrix], times: &[f64], eigen: &EigenSystem, obs: Observable) -> DecaySignal {
    let op = observable_operator(eigen, obs);
    DecaySignal {
        t: times.to_vec(),
        y: rhos.iter().map(|r| observe(r, &op, obs)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions {
    /// Samples per decay trace.
    pub points: usize,
    /// Trace length in estimated decay times.
    pub span: f64,
    pub method: Method,
    pub redfield: RedfieldOptions,
    /// Initial nuclear projection, `None` for `m_I = I`.
    pub m_i: Option<f64>,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            points: 200,
            span: 10.0,
            method: Method::Exponential,
            redfield: RedfieldOptions::default(),
            m_i: None,
        }
    }
}

/// A fitted decay time together with the signal it came from.
#[derive(Debug, Clone)]
pub struct RelaxTime {
    pub fit: DecayFit,
    pub signal: DecaySignal,
}

impl RelaxTime {
    /// Seconds; infinite when the signal does not decay.
    pub fn time(&self) -> f64 {
        self.fit.time
    }

    pub fn r_squared(&self) -> f64 {
        self.fit.r_squared
    }
}

/// Propagates `rho0` and fits the decay of `obs`, adapting the time grid to
/// the decay constant.
pub fn relax_time(rs: &RedfieldSystem, rho0: &DensityMatrix, obs: Observable, opts: &RelaxOptions) -> Result<RelaxTime> {
    let eigen = &rs.eigen;
    let op = observable_operator(eigen, obs);
    let n = eigen.dimension();
    let y0 = observe(rho0, &op, obs);
    let drho = crate::linalg::unvectorize(&(rs.generator() * vectorize(&rho0.rho)), n);
    let dy = match obs {
        Observable::Sz => (&drho * &op).trace().re,
        Observable::Coherence => {
            let s0 = rho0.expectation(&op);
            let ds = (&drho * &op).trace();
            if s0.norm() == 0.0 {
                0.0
            } else {
                (s0.conj() * ds).re / s0.norm()
            }
        }
    };
    let scale = y0.abs().max(f64::MIN_POSITIVE);
    let rate = dy.abs() / scale;
    if !(rate > 0.0) || rate < 1e-14 * rs.max_rate() {
        let times = vec![0.0, 1.0];
        return Ok(RelaxTime {
            fit: DecayFit::no_decay(y0),
            signal: DecaySignal { t: times, y: vec![y0, y0] },
        });
    }

    let points = opts.points.max(8);
    let mut span = opts.span / rate;
    let mut last_err = None;
    for _ in 0..4 {
        let times: Vec<f64> = (0..points).map(|k| span * k as f64 / (points - 1) as f64).collect();
        let rhos = rs.propagate(rho0, &times, opts.method)?;
        let signal = observable_signal(&rhos, &times, eigen, obs);
        match fit_decay(&signal.t, &signal.y) {
            Ok(fit) => {
                if !fit.decays() {
                    return Ok(RelaxTime { fit, signal });
                }
                let t = fit.time;
                if t > span / 2.0 || t < span / 40.0 {
                    span = opts.span * t;
                    last_err = None;
                    continue;
                }
                if fit.r_squared < DECAY_R2_WARNING {
                    log::warn!("decay fit R^2 = {:.5} below {DECAY_R2_WARNING}", fit.r_squared);
                }
                return Ok(RelaxTime { fit, signal });
            }
            Err(e) => {
                span *= 10.0;
                last_err = Some(e);
            }
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Fit("decay time did not settle inside the sampled window".into())))
}

/// T1 and T2 for one Hamiltonian and bath.
#[derive(Debug, Clone)]
pub struct RelaxationTimes {
    pub t1: RelaxTime,
    pub t2: RelaxTime,
}

/// Builds the Redfield tensor at the model's field and fits both decays.
pub fn relaxation_times(sys: &SpinSystem, model: &SpectralDensityModel, opts: &RelaxOptions) -> Result<RelaxationTimes> {
    times_from(sys, &assemble(sys, model, opts)?, opts)
}

/// As [`relaxation_times`] for an arbitrary bath at field `b`.
pub fn relaxation_times_with<J: SpectralDensity + ?Sized>(
    sys: &SpinSystem,
    b: &Vector3<f64>,
    bath: &J,
    opts: &RelaxOptions,
) -> Result<RelaxationTimes> {
    let eigen = eigensystem(&build_hamiltonian(sys, b))?;
    times_from(sys, &redfield_tensor(&eigen, bath, opts.redfield), opts)
}

fn times_from(sys: &SpinSystem, rs: &RedfieldSystem, opts: &RelaxOptions) -> Result<RelaxationTimes> {
    let t1 = relax_from(sys, rs, InitialState::z(), Observable::Sz, opts)?;
    let t2 = relax_from(sys, rs, InitialState::x(), Observable::Coherence, opts)?;
    Ok(RelaxationTimes { t1, t2 })
}

pub fn t1(sys: &SpinSystem, model: &SpectralDensityModel, opts: &RelaxOptions) -> Result<RelaxTime> {
    let rs = assemble(sys, model, opts)?;
    relax_from(sys, &rs, InitialState::z(), Observable::Sz, opts)
}

pub fn t2(sys: &SpinSystem, model: &SpectralDensityModel, opts: &RelaxOptions) -> Result<RelaxTime> {
    let rs = assemble(sys, model, opts)?;
    relax_from(sys, &rs, InitialState::x(), Observable::Coherence, opts)
}

/// Redfield tensor for `sys` in the model's field.
pub fn assemble(sys: &SpinSystem, model: &SpectralDensityModel, opts: &RelaxOptions) -> Result<RedfieldSystem> {
    let eigen = eigensystem(&build_hamiltonian(sys, &model.field))?;
    Ok(redfield_tensor(&eigen, model, opts.redfield).with_description(model.describe()))
}

fn relax_from(sys: &SpinSystem, rs: &RedfieldSystem, state: InitialState, obs: Observable, opts: &RelaxOptions) -> Result<RelaxTime> {
    let spec = match opts.m_i {
        Some(m) => state.with_m_i(m),
        None => state,
    };
    let rho0 = initial_state(sys, &rs.eigen, spec)?;
    relax_time(rs, &rho0, obs, opts)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// 24 log-spaced fields over 0.01–10 T.
pub fn default_field_grid() -> Vec<f64> {
    log_grid(0.01, 10.0, 24)
}

/// One named bath model in a sweep.
#[derive(Debug, Clone)]
pub struct NamedModel {
    pub name: String,
    pub model: SpectralDensityModel,
}

impl NamedModel {
    pub fn new(name: impl Into<String>, model: SpectralDensityModel) -> Self {
        Self {
            name: name.into(),
            model,
        }
    }
}

/// One (model, field) evaluation. Failed fits carry the error text and NaN
/// times.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub field: f64,
    pub model: String,
    pub with_hyperfine: bool,
    pub t1: f64,
    pub t2: f64,
    pub r2_t1: f64,
    pub r2_t2: f64,
    pub failure: Option<String>,
}

impl SweepPoint {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    T1,
    T2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub fields: Vec<f64>,
    pub temperature: f64,
    pub points: Vec<SweepPoint>,
}

pub const SWEEP_HEADER: &str = "B_tesla,T1_s,T2_s,model,r2_T1,r2_T2,with_hyperfine";

impl SweepResult {
    /// Points of one curve, in field order.
    pub fn curve(&self, model: &str, with_hyperfine: bool) -> Vec<&SweepPoint> {
        self.points
            .iter()
            .filter(|p| p.model == model && p.with_hyperfine == with_hyperfine)
            .collect()
    }

    /// Distinct `(model, with_hyperfine)` pairs in first-seen order.
    pub fn curves(&self) -> Vec<(String, bool)> {
        let mut out: Vec<(String, bool)> = Vec::new();
        for p in &self.points {
            let key = (p.model.clone(), p.with_hyperfine);
            if !out.contains(&key) {
                out.push(key);
            }
        }
        out
    }

    pub fn values(&self, model: &str, with_hyperfine: bool, q: Quantity) -> (Vec<f64>, Vec<f64>) {
        self.curve(model, with_hyperfine)
            .into_iter()
            .map(|p| (p.field, if q == Quantity::T1 { p.t1 } else { p.t2 }))
            .unzip()
    }

    pub fn exponent(&self, model: &str, with_hyperfine: bool, q: Quantity, range: (f64, f64)) -> Result<PowerLaw> {
        let (x, y) = self.values(model, with_hyperfine, q);
        scaling_exponent(&x, &y, range)
    }

    pub fn failures(&self) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| !p.converged()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SWEEP_HEADER}")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.field, p.t1, p.t2, p.model, p.r2_t1, p.r2_t2, p.with_hyperfine
            )?;
        }
        Ok(())
    }
}

/// T1 and T2 over `fields` along `direction` for every model, optionally
/// repeated without hyperfine coupling. Points run in parallel; output order
/// is model, hyperfine variant, field.
pub fn field_sweep(
    sys: &SpinSystem,
    models: &[NamedModel],
    fields: &[f64],
    direction: &Vector3<f64>,
    include_no_hyperfine: bool,
    opts: &RelaxOptions,
) -> Result<SweepResult> {
    if fields.is_empty() || fields.iter().any(|b| !(*b > 0.0)) || fields.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("field grid must be positive and strictly ascending"));
    }
    let norm = direction.norm();
    if !(norm > 0.0) {
        return Err(Error::domain("field direction must be non-zero"));
    }
    let unit = direction / norm;
    let temperature = models.first().map_or(f64::NAN, |m| m.model.temperature);
    let bare = sys.without_hyperfine();
    let variants: &[bool] = if include_no_hyperfine { &[true, false] } else { &[true] };

    let mut jobs = Vec::new();
    for (mi, _) in models.iter().enumerate() {
        for &hf in variants {
            for &b in fields {
                jobs.push((mi, hf, b));
            }
        }
    }
    let points = par_map(&jobs, |&(mi, hf, b)| {
        let named = &models[mi];
        let model = named.model.with_field(unit * b);
        let system = if hf { sys } else { &bare };
        match relaxation_times(system, &model, opts) {
            Ok(r) => SweepPoint {
                field: b,
                model: named.name.clone(),
                with_hyperfine: hf,
                t1: r.t1.time(),
                t2: r.t2.time(),
                r2_t1: r.t1.r_squared(),
                r2_t2: r.t2.r_squared(),
                failure: None,
            },
            Err(e) => SweepPoint {
                field: b,
                model: named.name.clone(),
                with_hyperfine: hf,
                t1: f64::NAN,
                t2: f64::NAN,
                r2_t1: f64::NAN,
                r2_t2: f64::NAN,
                failure: Some(e.to_string()),
            },
        }
    });
    Ok(SweepResult {
        fields: fields.to_vec(),
        temperature,
        points,
    })
}

#[derive(Debug, Clone)]
pub struct TemperatureSweep {
    pub temperatures: Vec<f64>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    /// Log-log slope of T1 against temperature.
    pub t1_exponent: PowerLaw,
}

/// T1/T2 against temperature with the bath rebuilt by `family` at each point.
pub fn temperature_sweep<F>(sys: &SpinSystem, family: F, temperatures: &[f64], opts: &RelaxOptions) -> Result<TemperatureSweep>
where
    F: Fn(f64) -> Result<SpectralDensityModel> + Sync + Send,
{
    if temperatures.len() < 2 {
        return Err(Error::domain("temperature sweep needs at least 2 temperatures"));
    }
    if temperatures.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::domain("temperatures must be positive"));
    }
    let results = par_map(temperatures, |&t| family(t).and_then(|m| relaxation_times(sys, &m, opts)));
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    for r in results {
        let r = r?;
        t1.push(r.t1.time());
        t2.push(r.t2.time());
    }
    let t1_exponent = if temperatures.len() >= 3 {
        let lo = temperatures.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = temperatures.iter().copied().fold(0.0, f64::max);
        scaling_exponent(temperatures, &t1, (lo, hi))?
    } else {
        let slope = (t1[1] / t1[0]).ln() / (temperatures[1] / temperatures[0]).ln();
        PowerLaw {
            slope,
            stderr: f64::NAN,
            intercept: t1[0].ln() - slope * temperatures[0].ln(),
            points: 2,
        }
    };
    Ok(TemperatureSweep {
        temperatures: temperatures.to_vec(),
        t1,
        t2,
        t1_exponent,
    })
}
