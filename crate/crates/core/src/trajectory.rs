//! g-tensor time series: ingestion, synthetic generation and detrending.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// The six independent entries of a symmetric 3×3 tensor, in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Xx,
    Yy,
    Zz,
    Xy,
    Xz,
    Yz,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Xx,
        Component::Yy,
        Component::Zz,
        Component::Xy,
        Component::Xz,
        Component::Yz,
    ];

    pub fn indices(self) -> (usize, usize) {
        match self {
            Component::Xx => (0, 0),
            Component::Yy => (1, 1),
            Component::Zz => (2, 2),
            Component::Xy => (0, 1),
            Component::Xz => (0, 2),
            Component::Yz => (1, 2),
        }
    }

    pub fn from_indices(i: usize, j: usize) -> Component {
        match (i.min(j), i.max(j)) {
            (0, 0) => Component::Xx,
            (1, 1) => Component::Yy,
            (2, 2) => Component::Zz,
            (0, 1) => Component::Xy,
            (0, 2) => Component::Xz,
            (1, 2) => Component::Yz,
            _ => panic!("tensor index out of range"),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::Xx => "xx",
            Component::Yy => "yy",
            Component::Zz => "zz",
            Component::Xy => "xy",
            Component::Xz => "xz",
            Component::Yz => "yz",
        }
    }
}

/// Uniformly sampled g-tensor trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GTrajectory {
    /// Time step, seconds.
    pub dt: f64,
    /// Kelvin.
    pub temperature: f64,
    pub samples: Vec<Matrix3<f64>>,
}

pub const TRAJECTORY_HEADER: &str = "t_ps,gxx,gyy,gzz,gxy,gxz,gyz,temperature_K";

/// Relative jitter allowed in the time column.
const TIME_JITTER: f64 = 1e-6;

impl GTrajectory {
    pub fn new(dt: f64, temperature: f64, samples: Vec<Matrix3<f64>>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain("time step must be positive"));
        }
        if samples.len() < 2 {
            return Err(Error::domain("a trajectory needs at least 2 samples"));
        }
        if let Some(k) = samples.iter().position(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::domain(format!("sample {k} has non-finite entries")));
        }
        Ok(Self {
            dt,
            temperature,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.samples.len() - 1) as f64
    }

    pub fn component(&self, c: Component) -> Vec<f64> {
        let (i, j) = c.indices();
        self.samples.iter().map(|m| m[(i, j)]).collect()
    }

    /// Writes the trajectory CSV. `metadata` lines are emitted as `#` comments.
    pub fn write_csv<W: Write>(&self, out: W, metadata: &[String]) -> Result<()> {
        let mut out = BufWriter::new(out);
        let io = |e| Error::io("<trajectory>", e);
        for line in metadata {
            writeln!(out, "# {line}").map_err(io)?;
        }
        writeln!(out, "{TRAJECTORY_HEADER}").map_err(io)?;
        for (k, g) in self.samples.iter().enumerate() {
            let t_ps = k as f64 * self.dt * 1e12;
            writeln!(
                out,
                "{t_ps},{},{},{},{},{},{},{}",
                g[(0, 0)],
                g[(1, 1)],
                g[(2, 2)],
                g[(0, 1)],
                g[(0, 2)],
                g[(1, 2)],
                self.temperature
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn save(&self, path: &Path, metadata: &[String]) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file, metadata).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    /// Linear up-sampling by an integer factor.
    pub fn upsample(&self, factor: usize) -> Result<GTrajectory> {
        if factor == 0 {
            return Err(Error::domain("up-sampling factor must be at least 1"));
        }
        let mut samples = Vec::with_capacity((self.len() - 1) * factor + 1);
        for pair in self.samples.windows(2) {
            for s in 0..factor {
                let w = s as f64 / factor as f64;
                samples.push(pair[0] * (1.0 - w) + pair[1] * w);
            }
        }
        samples.push(*self.samples.last().expect("non-empty"));
        GTrajectory::new(self.dt / factor as f64, self.temperature, samples)
    }
}

/// Parses a trajectory CSV. `source` names the input in error messages.
pub fn read_trajectory<R: Read>(input: R, source: &str) -> Result<GTrajectory> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };

    let header = reader
        .headers()
        .map_err(|e| parse_err(e.position().map_or(1, |p| p.line()), e.to_string()))?
        .clone();
    let expected: Vec<&str> = TRAJECTORY_HEADER.split(',').collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(
            header.position().map_or(1, |p| p.line()),
            format!("expected header `{TRAJECTORY_HEADER}`"),
        ));
    }

    let mut times = Vec::new();
    let mut samples = Vec::new();
    let mut temperature: Option<f64> = None;
    for (row, record) in reader.records().enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 8 {
            return Err(parse_err(line, format!("row {row}: expected 8 fields, found {}", record.len())));
        }
        let mut v = [0.0; 8];
        for (k, field) in record.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("row {row}: `{field}` is not a number")))?;
            if !x.is_finite() {
                return Err(parse_err(line, format!("row {row}: non-finite value in column {}", expected[k])));
            }
            v[k] = x;
        }
        match temperature {
            None => temperature = Some(v[7]),
            Some(t) if t != v[7] => {
                return Err(parse_err(line, format!("row {row}: temperature changes from {t} K to {} K", v[7])))
            }
            _ => {}
        }
        times.push(v[0] * 1e-12);
        samples.push(Matrix3::new(v[1], v[4], v[5], v[4], v[2], v[6], v[5], v[6], v[3]));
    }
    if samples.len() < 2 {
        return Err(parse_err(0, "a trajectory needs at least 2 rows".into()));
    }

    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(parse_err(0, "time column is not increasing".into()));
    }
    for (k, &t) in times.iter().enumerate() {
        let expected_t = times[0] + k as f64 * dt;
        if (t - expected_t).abs() > TIME_JITTER * dt.max(expected_t.abs()) {
            return Err(parse_err(0, format!("row {}: non-uniform time step", k + 1)));
        }
    }
    GTrajectory::new(dt, temperature.unwrap_or(0.0), samples)
}

pub fn load_trajectory(path: &Path) -> Result<GTrajectory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory(file, &path.display().to_string())
}

/// Ornstein-Uhlenbeck generator parameters. Each tensor component fluctuates
/// independently about `mean` with stationary variance `variance[c]` and
/// correlation time `corr_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuParams {
    pub mean: Matrix3<f64>,
    pub variance: [f64; 6],
    pub corr_time: f64,
    pub dt: f64,
    pub duration: f64,
    pub temperature: f64,
    pub seed: u64,
}

/// Exact-discretization OU trajectory: `x ← x e^{-dt/τ} + σ √(1 - e^{-2dt/τ}) ξ`,
/// started from the stationary distribution. Components are drawn in
/// [`Component::ALL`] order from a single seeded stream.
pub fn synth_ou_trajectory(p: &OuParams) -> Result<GTrajectory> {
    if !(p.corr_time > 0.0) {
        return Err(Error::domain("correlation time must be positive"));
    }
    if !(p.dt > 0.0) || p.dt >= p.corr_time / 2.0 {
        return Err(Error::domain("time step must satisfy 0 < dt < corr_time / 2"));
    }
    if p.variance.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::domain("variances must be non-negative"));
    }
    let steps = (p.duration / p.dt).round() as usize;
    let n = steps + 1;
    if n < 2 {
        return Err(Error::domain("duration shorter than one time step"));
    }
    let decay = (-p.dt / p.corr_time).exp();
    let kick = (1.0 - decay * decay).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut x = [0.0f64; 6];
    let sigma: Vec<f64> = p.variance.iter().map(|v| v.sqrt()).collect();
    for (c, xi) in x.iter_mut().enumerate() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *xi = sigma[c] * z;
    }
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            for (c, xi) in x.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *xi = *xi * decay + sigma[c] * kick * z;
            }
        }
        let mut g = p.mean;
        for comp in Component::ALL {
            let (i, j) = comp.indices();
            g[(i, j)] += x[comp.index()];
            if i != j {
                g[(j, i)] += x[comp.index()];
            }
        }
        samples.push(g);
    }
    GTrajectory::new(p.dt, p.temperature, samples)
}

/// Mean-subtracted trajectory.
#[derive(Debug, Clone)]
pub struct FluctuationSeries {
    pub dt: f64,
    pub temperature: f64,
    /// Time average of each tensor entry.
    pub mean_g: Matrix3<f64>,
    pub deltas: Vec<Matrix3<f64>>,
}

impl FluctuationSeries {
    pub fn component(&self, c: Component) -> Vec<f64> {
        let (i, j) = c.indices();
        self.deltas.iter().map(|m| m[(i, j)]).collect()
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

/// Removes the arithmetic time average from every tensor entry.
pub fn detrend(traj: &GTrajectory) -> FluctuationSeries {
    let n = traj.samples.len() as f64;
    // Two-pass mean keeps the residual average at rounding level.
    let mut mean = traj.samples.iter().fold(Matrix3::zeros(), |acc, g| acc + g) / n;
    let correction = traj.samples.iter().fold(Matrix3::zeros(), |acc, g| acc + (g - mean)) / n;
    mean += correction;
    FluctuationSeries {
        dt: traj.dt,
        temperature: traj.temperature,
        mean_g: mean,
        deltas: traj.samples.iter().map(|g| g - mean).collect(),
    }
}
