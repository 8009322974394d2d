//! `vlc-an` batch front end: configuration, subcommands and result files.

// `!(x > 0.0)` is deliberate: it rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use vlc_an_core::{Branch, EveCsi, Point};

use crate::config::Config;
use crate::output::{Outputs, RunManifest};

/// Placements and Eve realizations of a full-scale run.
pub const FULL_SCALE_SAMPLES: usize = 5000;

#[derive(Debug, Parser)]
#[command(name = "vlc-an", version, about = "Artificial-noise precoder design for multi-luminaire VLC")]
pub struct Cli {
    /// TOML configuration; omitted keys take reference values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `simulation.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `simulation.placements`.
    #[arg(long, global = true)]
    pub placements: Option<usize>,
    /// 5000 placements and 5000 Eve realizations.
    #[arg(long, global = true)]
    pub full_scale: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CsiArg {
    Known,
    Unknown,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Channel gains at given points and the averaged eavesdropper statistics.
    Channel {
        /// Receiver position `x,y,z`; repeatable. Defaults to the room centre.
        #[arg(long = "point", value_parser = parse_point)]
        points: Vec<Point>,
    },
    /// Attenuation and clipping noise against drive level with bias 2 sigma.
    Clipping {
        #[arg(long, default_value_t = 0.05)]
        sigma_min: f64,
        #[arg(long, default_value_t = 1.2)]
        sigma_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Designs for one Bob/Eve placement.
    Design {
        #[arg(long, value_parser = parse_point)]
        fixed_bob: Option<Point>,
        #[arg(long, value_parser = parse_point)]
        fixed_eve: Option<Point>,
        /// Restrict to one scheme; both by default.
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
        /// Restrict to one CSI model; both by default.
        #[arg(long, value_enum)]
        csi: Option<CsiArg>,
    },
    /// Parameter sweep over random placements, as set in `[sweep]`.
    Sweep,
    /// Analytic expressions against sampling and closed-form oracles.
    Validate,
}

impl BranchArg {
    pub fn branch(self) -> Branch {
        match self {
            BranchArg::One => Branch::One,
            BranchArg::Two => Branch::Two,
        }
    }
}

impl CsiArg {
    pub fn csi(self) -> EveCsi {
        match self {
            CsiArg::Known => EveCsi::Known,
            CsiArg::Unknown => EveCsi::Unknown,
        }
    }
}

pub fn parse_point(s: &str) -> Result<Point, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    let mut c = [0.0; 3];
    for (k, p) in parts.iter().enumerate() {
        c[k] = p.trim().parse().map_err(|e| format!("bad coordinate `{p}`: {e}"))?;
    }
    Ok(Point::new(c[0], c[1], c[2]))
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Channel { .. } => "channel",
            Command::Clipping { .. } => "clipping",
            Command::Design { .. } => "design",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
        }
    }
}

/// Configuration after command-line overrides.
pub fn resolve_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if cli.full_scale {
        cfg.simulation.placements = FULL_SCALE_SAMPLES;
        cfg.simulation.eve_realizations = FULL_SCALE_SAMPLES;
    }
    if let Some(n) = cli.placements {
        cfg.simulation.placements = n;
    }
    if let Some(s) = cli.seed {
        cfg.simulation.seed = s;
    }
    cfg.check()?;
    Ok(cfg)
}

/// What a subcommand reports back besides its files.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    /// Some record exceeded the tolerated failure fraction, or a check failed.
    pub failed: bool,
    pub lines: Vec<String>,
}

/// Parses `argv` (program name first), runs the subcommand and maps the
/// outcome to an exit status: 0 success, 1 failures, 2 usage or config.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli, &cfg, &args) {
        Ok(summary) => {
            for l in &summary.lines {
                println!("{l}");
            }
            if summary.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Runs the subcommand and writes its files, `config.toml` and
/// `manifest.json`; `args` are recorded in the manifest.
pub fn execute(cli: &Cli, cfg: &Config, args: &[String]) -> anyhow::Result<Summary> {
    let start = Instant::now();
    let mut out = Outputs::new(&cli.out)?;
    let summary = match &cli.command {
        Command::Channel { points } => commands::channel(cfg, points, &mut out)?,
        Command::Clipping {
            sigma_min,
            sigma_max,
            step,
        } => commands::clipping(cfg, *sigma_min, *sigma_max, *step, &mut out)?,
        Command::Design {
            fixed_bob,
            fixed_eve,
            branch,
            csi,
        } => commands::design(cfg, *fixed_bob, *fixed_eve, *branch, *csi, &mut out)?,
        Command::Sweep => commands::sweep(cfg, &mut out)?,
        Command::Validate => commands::validate(cfg, &mut out)?,
    };
    out.text("config.toml", &cfg.to_toml())?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name().to_string(),
        arguments: args.to_vec(),
        seed: cfg.simulation.seed,
        config: cfg.clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs: Vec::new(),
    };
    out.finish(manifest)?;
    Ok(summary)
}
