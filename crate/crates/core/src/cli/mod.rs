//! Command-line front end: `spinbath <command> [--config PATH] [--out DIR]`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O or input-format error.

pub mod commands;
pub mod config;
pub mod svg;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
pub use config::Config;

#[derive(Debug, Parser)]
#[command(name = "spinbath", version, about = "Redfield relaxometry of molecular spin qubits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration; defaults are used for anything not given.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Skip SVG output.
    #[arg(long, global = true)]
    pub no_plots: bool,

    /// RNG seed, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Zeeman levels against field and the bath spectral density.
    Spectrum,
    /// Windowed ACFs and fluctuation spectra of g-tensor trajectories.
    Acf {
        /// Trajectory CSVs, overriding `acf.trajectories`.
        trajectories: Vec<PathBuf>,
    },
    /// Temperature exponent of the fluctuation spectra.
    Scaling {
        trajectories: Vec<PathBuf>,
    },
    /// T1 and T2 against field for each configured model.
    Sweep,
    /// Synthetic Ornstein-Uhlenbeck g-tensor trajectory.
    Synth,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Acf { .. } => "acf",
            Command::Scaling { .. } => "scaling",
            Command::Sweep => "sweep",
            Command::Synth => "synth",
        }
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Units { .. } => 2,
        Error::Domain(_) | Error::Fit(_) | Error::Numerical(_) => 3,
        Error::Io { .. } | Error::Parse { .. } => 4,
    }
}

/// Shared state for one command invocation.
pub struct Context {
    pub config: Config,
    /// Directory relative input paths are resolved against.
    pub base: PathBuf,
    pub out: PathBuf,
    pub plots: bool,
    pub seed: u64,
    pub command: &'static str,
}

impl Context {
    pub fn new(cli: &Cli) -> Result<Self> {
        let (mut config, base) = match &cli.config {
            Some(path) => {
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (Config::load(path)?, base)
            }
            None => (Config::default(), PathBuf::new()),
        };
        if let Some(seed) = cli.seed {
            config.seed = Some(seed);
        }
        let seed = config.seed.unwrap_or(0);
        let out = cli.out.clone().unwrap_or_else(|| config.output.dir.clone());
        let plots = config.output.plots && !cli.no_plots;
        Ok(Self {
            config,
            base,
            out,
            plots,
            seed,
            command: cli.command.name(),
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base.join(path)
        }
    }

    /// Provenance lines written as `#` comments at the top of every CSV.
    pub fn metadata(&self, extra: &[String]) -> Vec<String> {
        let mut lines = vec![
            format!("spinbath {}", env!("CARGO_PKG_VERSION")),
            format!("command: {}", self.command),
            format!("config_sha256: {}", self.config.hash()),
            format!("seed: {}", self.seed),
        ];
        lines.extend(extra.iter().cloned());
        lines
    }

    pub fn ensure_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }

    /// Writes a CSV file with the metadata header followed by `body`.
    pub fn write_csv<F>(&self, name: &str, extra: &[String], body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.out.join(name);
        let io = |e| Error::io(&path, e);
        let file = File::create(&path).map_err(io)?;
        let mut w = BufWriter::new(file);
        for line in self.metadata(extra) {
            writeln!(w, "# {line}").map_err(io)?;
        }
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        Ok(path)
    }

    pub fn write_plot(&self, name: &str, plot: &svg::Plot) -> Result<()> {
        if self.plots {
            plot.save(&self.out.join(name))?;
        }
        Ok(())
    }
}

/// Runs the parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Acf { trajectories } => commands::acf(&ctx, trajectories),
        Command::Scaling { trajectories } => commands::scaling(&ctx, trajectories),
        Command::Sweep => commands::sweep(&ctx),
        Command::Synth => commands::synth(&ctx),
    }
}
