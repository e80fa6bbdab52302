use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod manifest;

use config::{ExperimentConfig, OUTPUT_DIR_ENV};
use manifest::Collector;

#[derive(Parser, Debug)]
#[command(name = "phasemix", version, about = "Phase-restricted Glauber dynamics experiments")]
struct Cli {
    /// TOML experiment file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Size of the worker pool.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(flatten)]
    overrides: ExperimentConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Suite {
    DetailedBalance,
    EsIdentity,
    SwStationarity,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run Glauber replicas and record probe trajectories.
    Simulate,
    /// Draw Swendsen-Wang bond configurations.
    Rc,
    /// Coarse-grain stored or freshly sampled bond configurations.
    Coarse,
    /// Within-phase spatial mixing against ball radius.
    WsmScan,
    /// Time-to-band for several initializations.
    MixCompare,
    /// Probability of the small-magnetization window.
    LdpProbe,
    /// Survival of the boundary hitting time.
    HitStats,
    /// Edge-boundary tails of minus clusters.
    PolymerTail,
    /// Revealing coupling between two boundary conditions.
    RevealCouple,
    /// Exact checks against enumerated laws.
    OracleCheck {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Generate a random regular graph.
    RrgGen,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Rc => "rc",
            Command::Coarse => "coarse",
            Command::WsmScan => "wsm-scan",
            Command::MixCompare => "mix-compare",
            Command::LdpProbe => "ldp-probe",
            Command::HitStats => "hit-stats",
            Command::PolymerTail => "polymer-tail",
            Command::RevealCouple => "reveal-couple",
            Command::OracleCheck { .. } => "oracle-check",
            Command::RrgGen => "rrg-gen",
        }
    }

    fn stochastic(&self) -> bool {
        !matches!(self, Command::OracleCheck { .. } | Command::Coarse)
    }
}

fn dispatch(cmd: &Command, cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    match cmd {
        Command::Simulate => commands::simulate(cfg, col),
        Command::Rc => commands::rc(cfg, col),
        Command::Coarse => commands::coarse(cfg, col),
        Command::WsmScan => commands::wsm_scan(cfg, col),
        Command::MixCompare => commands::mix_compare(cfg, col),
        Command::LdpProbe => commands::ldp_probe(cfg, col),
        Command::HitStats => commands::hit_stats(cfg, col),
        Command::PolymerTail => commands::polymer_tail(cfg, col),
        Command::RevealCouple => commands::reveal_couple(cfg, col),
        Command::OracleCheck { suite } => {
            let name = suite.to_possible_value().expect("named suite");
            commands::oracle_check(name.get_name(), col)
        }
        Command::RrgGen => commands::rrg_gen(cfg, col),
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    let file = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = file.merged(&cli.overrides);
    let name = cli.command.name();
    // rrg-gen may take its seed from `graph_seed` alone
    let seeded = cfg.master_seed.is_some() || (matches!(cli.command, Command::RrgGen) && cfg.graph_seed.is_some());
    if cli.command.stochastic() && !seeded {
        bail!("{name} is stochastic: pass --seed or set `master_seed`");
    }
    let root = cfg
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("phasemix-out"));
    let dir = root.join(cfg.experiment.as_deref().unwrap_or(name));
    let mut col = Collector::start(dir, name, &cfg)?;
    let outcome = dispatch(&cli.command, &cfg, &mut col);
    let status = match &outcome {
        Ok(_) => Ok(()),
        Err(e) => Err(anyhow!("{e:#}")),
    };
    let dir = col.dir().to_path_buf();
    col.finish(&status)?;
    if outcome.is_ok() {
        eprintln!("outputs in {}", dir.display());
    }
    outcome
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
