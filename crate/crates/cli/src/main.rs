//! `rtphd`: runs the robust trajectory PHD experiments from a TOML config.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rtphd::config::{ScenarioConfig, VariantKind};
use rtphd::experiment::{run_experiment, ExperimentSpec};
use rtphd::export::{track_rows, write_track_rows, TrackFormat};
use rtphd::scenario::{run_filter, run_seed, simulate_run, Variant};

#[derive(Parser)]
#[command(name = "rtphd", version, about = "Robust trajectory PHD filter experiments")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario config (TOML).
    #[arg(short, long, conflicts_with = "default")]
    config: Option<PathBuf>,

    /// Use the built-in four-target scenario.
    #[arg(long)]
    default: bool,

    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut config = match (&self.config, self.default) {
            (Some(path), _) => ScenarioConfig::load(path)?,
            (None, true) => ScenarioConfig::default(),
            (None, false) => bail!("pass --config <FILE> or --default"),
        };
        if let Some(seed) = self.seed {
            config.experiment.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo experiment; writes summary.csv, runtime.csv and manifest.json.
    Run {
        #[command(flatten)]
        config: ConfigArgs,

        /// Output directory.
        #[arg(short, long, default_value = "results")]
        out: PathBuf,

        /// Override the number of Monte Carlo runs.
        #[arg(long)]
        runs: Option<usize>,

        /// Only these filters (robust, baseline).
        #[arg(long, value_delimiter = ',')]
        variant: Option<Vec<VariantKind>>,

        /// Only these L-scan depths.
        #[arg(short = 'L', long = "window", value_delimiter = ',')]
        window: Option<Vec<usize>>,

        /// Run Monte Carlo runs one at a time.
        #[arg(long)]
        serial: bool,
    },
    /// Print a config file (the built-in scenario, or a loaded one after validation).
    DumpConfig {
        #[command(flatten)]
        config: ConfigArgs,

        /// Write to this file instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Simulate one run and export true and estimated trajectories.
    ExportTracks {
        #[command(flatten)]
        config: ConfigArgs,

        /// Run index under the master seed.
        #[arg(long, default_value_t = 0)]
        run: usize,

        #[arg(long, default_value = "robust")]
        variant: VariantKind,

        /// L-scan depth; defaults to the config value.
        #[arg(short = 'L', long = "window")]
        window: Option<usize>,

        /// Output format: csv or json.
        #[arg(long, default_value = "csv")]
        format: String,

        #[arg(short, long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            runs,
            variant,
            window,
            serial,
        } => {
            let config = config.load()?;
            let mut spec = ExperimentSpec::from_config(&config, out);
            if let Some(runs) = runs {
                spec.runs = runs;
            }
            spec.parallel = !serial;
            spec.restrict(variant.as_deref(), window.as_deref());
            let output = run_experiment(&config, &spec, false)?;
            for s in &output.monte_carlo.summaries {
                let l = s.variant.window.map_or("full".to_string(), |l| l.to_string());
                println!(
                    "{:<8} L={:<4} runs={:<4} failed={:<3} mean_tm={:.3} seconds/run={:.3}",
                    s.variant.kind.to_string(),
                    l,
                    s.runs,
                    s.failures.len(),
                    s.mean_rms_tm(),
                    s.mean_seconds
                );
            }
            println!("wrote {}", spec.out_dir.display());
        }
        Command::DumpConfig { config, out } => {
            let config = if config.config.is_none() {
                ScenarioConfig::default()
            } else {
                config.load()?
            };
            let text = config.to_toml_string()?;
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Command::ExportTracks {
            config,
            run,
            variant,
            window,
            format,
            out,
        } => {
            let config = config.load()?;
            config.validate()?;
            let format: TrackFormat = format.parse()?;
            let seed = config.experiment.seed;
            let sim = simulate_run(&config, config.experiment.horizon, seed, run)?;
            let variant = Variant {
                kind: variant,
                window: Some(window.unwrap_or(config.filter.window)),
            };
            let record = run_filter(&config, &sim, variant, run, run_seed(seed, run), true)?;
            let rows = track_rows(
                &record,
                &sim.truth,
                config.region.position_index,
                config.targets.detection_probability,
            )?;
            let n = write_track_rows(&rows, &out, format)?;
            println!("wrote {n} rows to {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
