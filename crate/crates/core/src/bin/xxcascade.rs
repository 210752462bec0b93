use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xxcascade::config::{load_config, Engine, RunConfig};
use xxcascade::error::{Error, Result};
use xxcascade::run::{self, Figure, Preset, ReproduceOptions};

#[derive(Parser)]
#[command(name = "xxcascade", version, about = "Long-range XX lattice dynamics from CSS_x")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; omitted sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-state evolution (N ≤ 24).
    ExactEvolve,
    /// Pair-product tVMC evolution.
    TvmcEvolve {
        /// Continue from `<out>/checkpoints/state.json`.
        #[arg(long)]
        resume: bool,
    },
    /// Collective-spin OAT reference series.
    OatRef,
    /// Lowest states per J^z sector and the tower fit.
    Spectrum,
    /// Squeezing, inertia, spectra, Cramér–Rao and cat statistics of stored series.
    Analyze {
        #[arg(required = true)]
        series: Vec<PathBuf>,
    },
    /// Regenerate the data behind one figure.
    Reproduce {
        /// jx_dynamics, squeezing, pjx_cats, varjx_parity, coherence, tower or benchmark.
        figure: String,
        #[arg(long, default_value = "desk")]
        preset: String,
        /// tVMC samples per RK stage.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

fn config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(Error::Config("threads: must be at least 1".into()));
        }
        cfg.threads = t;
    }
    if let Some(o) = &g.out {
        cfg.out = o.display().to_string();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Analyze { series } => {
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("analysis"));
            let summary = run::analyze(&series, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Reproduce { figure, preset, samples } => {
            let figure = Figure::parse(&figure)?;
            let opts = ReproduceOptions {
                preset: Preset::parse(&preset)?,
                seed: g.seed.unwrap_or(1),
                threads: g.threads.unwrap_or(1).max(1),
                samples,
            };
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("reproduce").join(figure.name()));
            let manifest = run::reproduce(figure, &opts, &out)?;
            println!("{}", serde_json::to_string_pretty(&manifest["results"])?);
        }
        cmd => {
            let cfg = config(g)?;
            let out = PathBuf::from(&cfg.out);
            match cmd {
                Command::ExactEvolve => run::exact_evolve(&RunConfig { engine: Engine::Exact, ..cfg }, &out)?,
                Command::TvmcEvolve { resume } => {
                    let run = run::tvmc_evolve(&RunConfig { engine: Engine::Tvmc, ..cfg }, &out, resume)?;
                    if !run.energy_drift_ok() {
                        eprintln!("warning: energy drift {:.3e} per site exceeds bound", run.max_energy_drift);
                    }
                }
                Command::OatRef => run::oat_ref(&RunConfig { engine: Engine::Dicke, ..cfg }, &out)?,
                Command::Spectrum => {
                    let fit = run::spectrum(&cfg, &out)?;
                    println!("inertia {:.6} (R² {:.6}, {} sectors)", fit.inertia, fit.r2, fit.n_points);
                }
                _ => unreachable!(),
            }
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(run::exit_code(&e) as u8)
        }
    }
}
