use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gplab::{run_experiment, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "gplab", version, about = "Desk-scale Bose gas experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zero-energy scattering length and its scaling.
    Scattering(Common),
    /// One-particle field: evolution, or ground state with `--minimize`.
    Gp {
        #[arg(long)]
        minimize: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Many-body convergence, or trap release with `--release`.
    Manybody {
        #[arg(long)]
        release: bool,
        #[command(flatten)]
        common: Common,
    },
    /// BBGKY, factorized hierarchy and collision operator checks.
    Hierarchy(Common),
    /// Graph counts, pairings and power counting.
    Graphs(Common),
    /// Sweep over the scaling exponent.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Flat TOML config; missing keys take canonical values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Treat warnings as failures.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self, kinds: &[ExperimentKind]) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::canonical(kinds[0]),
        };
        if self.config.is_some() && !kinds.contains(&cfg.kind) {
            bail!("config kind {} does not belong to this subcommand", cfg.kind);
        }
        if self.config.is_none() {
            cfg.kind = kinds[0];
        }
        macro_rules! apply {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        apply!(modes, length, n_min, n_max, beta, t_final, dt, v0, radius, seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    use ExperimentKind as K;
    let (common, kinds): (&Common, &[K]) = match &cli.command {
        Command::Scattering(c) => (c, &[K::Scattering]),
        Command::Gp { minimize: false, common } => (common, &[K::GpEvolve, K::GpMinimize]),
        Command::Gp { minimize: true, common } => (common, &[K::GpMinimize, K::GpEvolve]),
        Command::Manybody { release: false, common } => (common, &[K::MbConverge, K::TrapRelease]),
        Command::Manybody { release: true, common } => (common, &[K::TrapRelease, K::MbConverge]),
        Command::Hierarchy(c) => (c, &[K::HierarchyCheck]),
        Command::Graphs(c) => (c, &[K::Graphs]),
        Command::Sweep(c) => (c, &[K::BetaSweep]),
    };
    let cfg = common.config(kinds)?;
    let record = run_experiment(&cfg)?;
    for path in record.write(&common.out)? {
        println!("wrote {}", path.display());
    }
    for (name, value) in &record.metrics {
        println!("{name} = {value:e}");
    }
    for a in &record.assertions {
        println!("[{}] {}: {}", if a.passed { "pass" } else { "FAIL" }, a.name, a.detail);
    }
    for w in &record.warnings {
        println!("[warn] {w}");
    }
    let failures = record.failures(common.strict);
    if !failures.is_empty() {
        eprintln!("{} assertion(s) violated:", failures.len());
        for f in &failures {
            eprintln!("  {f}");
        }
    }
    Ok(failures.is_empty())
}
