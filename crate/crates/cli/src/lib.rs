//! Command-line front end for jsdm-odds.

pub mod commands;
pub mod config;
pub mod ingest;
pub mod manifest;
pub mod render;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use jsdm_odds::inference::PairMethod;

use config::{parse_grid, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "jsdm-odds", version, about = "Spatial joint species distribution model and its odds-ratio surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a synthetic community with known parameters.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        spatial: Option<OnOff>,
        #[arg(long)]
        factors: Option<usize>,
    },
    /// Ingest site and species tables and run the sampler.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        chain: Chain,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        #[arg(long, value_name = "N")]
        checkpoint_every: Option<usize>,
    },
    /// Odds-ratio and joint-occurrence surfaces for species pairs.
    Surfaces {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surface: Surface,
        /// Covariate raster CSV: x,y then the raw covariates.
        #[arg(long, value_name = "CSV")]
        raster: Option<PathBuf>,
        #[arg(long, value_name = "NX,NY")]
        grid: Option<String>,
    },
    /// Richness mean and variance at every data site.
    Richness {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        fit: Option<PathBuf>,
    },
    /// Local, global and cumulative odds ratios of an ordinal table.
    Ordinal {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "CSV")]
        table: Option<PathBuf>,
    },
    /// Per-pair summary of a fit, or the ingestion summary of a data set.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surface: Surface,
        #[command(flatten)]
        input: Input,
    },
    /// Project lon/lat site coordinates to planar kilometres.
    Project {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[arg(long, allow_negative_numbers = true)]
        lon0: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lat0: Option<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; flags override its entries.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Input {
    /// Directory holding sites.csv and species.csv.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    pub sites: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    pub species: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Chain {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub factors: Option<usize>,
    #[arg(long)]
    pub spatial: Option<OnOff>,
}

#[derive(Debug, Clone, Args)]
pub struct Surface {
    /// Output directory of a fit run.
    #[arg(long, value_name = "DIR")]
    pub fit: Option<PathBuf>,
    #[arg(long, value_name = "A:B,C:D")]
    pub pairs: Option<String>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<PairMethod>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn on(self) -> bool {
        self == OnOff::On
    }
}

fn parse_method(s: &str) -> std::result::Result<PairMethod, String> {
    s.parse().map_err(|e: jsdm_odds::Error| e.to_string())
}

fn base(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.paths.out = Some(out.clone());
    }
    Ok(cfg)
}

fn apply_input(cfg: &mut RunConfig, input: &Input) {
    if input.data.is_some() {
        cfg.paths.data = input.data.clone();
    }
    if input.sites.is_some() {
        cfg.paths.sites = input.sites.clone();
    }
    if input.species.is_some() {
        cfg.paths.species = input.species.clone();
    }
}

fn apply_surface(cfg: &mut RunConfig, s: &Surface, pairs: &mut Vec<String>) {
    if s.fit.is_some() {
        cfg.paths.fit = s.fit.clone();
    }
    if let Some(p) = &s.pairs {
        *pairs = vec![p.clone()];
    }
    if let Some(m) = s.method {
        cfg.surfaces.method = m;
    }
}

/// What a command needs beyond its configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Simulate,
    Fit { resume: bool },
    Surfaces,
    Richness,
    Ordinal,
    Report,
    Project,
}

/// Config file first, then flags.
pub fn resolve(command: &Command) -> Result<(Action, RunConfig)> {
    match command {
        Command::Simulate { common, spatial, factors } => {
            let mut cfg = base(common)?;
            if let Some(s) = common.seed {
                cfg.simulate.seed = s;
            }
            if let Some(s) = spatial {
                cfg.simulate.spatial = s.on();
            }
            if let Some(r) = factors {
                cfg.simulate.r = *r;
            }
            Ok((Action::Simulate, cfg))
        }
        Command::Fit { common, input, chain, resume, checkpoint_every } => {
            let mut cfg = base(common)?;
            apply_input(&mut cfg, input);
            let c = &mut cfg.chain;
            if let Some(s) = common.seed {
                c.seed = s;
            }
            if let Some(v) = chain.iterations {
                c.iterations = v;
            }
            if let Some(v) = chain.burn_in {
                c.burn_in = v;
            }
            if let Some(v) = chain.thin {
                c.thin = v;
            }
            if let Some(v) = chain.factors {
                c.r = v;
            }
            if let Some(v) = chain.spatial {
                c.spatial = v.on();
            }
            if let Some(v) = checkpoint_every {
                cfg.fit.checkpoint_every = *v;
            }
            Ok((Action::Fit { resume: *resume }, cfg))
        }
        Command::Surfaces { common, surface, raster, grid } => {
            let mut cfg = base(common)?;
            let mut pairs = std::mem::take(&mut cfg.surfaces.pairs);
            apply_surface(&mut cfg, surface, &mut pairs);
            cfg.surfaces.pairs = pairs;
            if let Some(s) = common.seed {
                cfg.surfaces.seed = s;
            }
            if raster.is_some() {
                cfg.paths.raster = raster.clone();
            }
            if let Some(g) = grid {
                cfg.surfaces.grid = parse_grid(g)?;
            }
            Ok((Action::Surfaces, cfg))
        }
        Command::Richness { common, fit } => {
            let mut cfg = base(common)?;
            if fit.is_some() {
                cfg.paths.fit = fit.clone();
            }
            Ok((Action::Richness, cfg))
        }
        Command::Ordinal { common, table } => {
            let mut cfg = base(common)?;
            if table.is_some() {
                cfg.paths.table = table.clone();
            }
            Ok((Action::Ordinal, cfg))
        }
        Command::Report { common, surface, input } => {
            let mut cfg = base(common)?;
            let mut pairs = std::mem::take(&mut cfg.report.pairs);
            apply_surface(&mut cfg, surface, &mut pairs);
            cfg.report.pairs = pairs;
            apply_input(&mut cfg, input);
            if let Some(s) = common.seed {
                cfg.surfaces.seed = s;
            }
            Ok((Action::Report, cfg))
        }
        Command::Project { common, input, lon0, lat0 } => {
            let mut cfg = base(common)?;
            apply_input(&mut cfg, input);
            if lon0.is_some() {
                cfg.project.lon0 = *lon0;
            }
            if lat0.is_some() {
                cfg.project.lat0 = *lat0;
            }
            Ok((Action::Project, cfg))
        }
    }
}

pub fn execute(action: Action, cfg: &RunConfig) -> Result<()> {
    if let Some(out) = &cfg.paths.out {
        std::fs::create_dir_all(out)
            .map_err(|e| anyhow::anyhow!("creating output directory {}: {e}", out.display()))?;
    }
    match action {
        Action::Simulate => commands::simulate::run(cfg),
        Action::Fit { resume } => commands::fit::run(cfg, resume),
        Action::Surfaces => commands::surfaces::run(cfg),
        Action::Richness => commands::richness::run(cfg),
        Action::Ordinal => commands::ordinal::run(cfg),
        Action::Report => commands::report::run(cfg),
        Action::Project => commands::project::run(cfg),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let (action, cfg) = resolve(&cli.command)?;
    execute(action, &cfg)
}
