//! Thin command-line front end over the tev-sim library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tev_sim::config::{load_config, Mode, ScenarioConfig};
use tev_sim::plot::plot_per_agent;
use tev_sim::sim::{compare_modes, run_scenario, write_comparison};

#[derive(Parser)]
#[command(
    name = "tev",
    about = "Transactive EV fleet market simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags that override keys of the (optional) TOML scenario config.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Scenario config TOML; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the fleet mode (v1g or v2g)
    #[arg(long)]
    mode: Option<Mode>,
    /// Override the output directory for CSV/JSON artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of simulated days
    #[arg(long)]
    days: Option<u32>,
    /// Override the number of EV agents
    #[arg(long)]
    fleet_size: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> tev_sim::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        if let Some(days) = self.days {
            cfg.days = days;
        }
        if let Some(fleet_size) = self.fleet_size {
            cfg.fleet_size = fleet_size;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write artifacts
    Run(ConfigArgs),
    /// Run paired V1G/V2G scenarios over a degradation-cost sweep
    CompareModes {
        #[command(flatten)]
        config: ConfigArgs,
        /// Degradation costs ($/kWh) to sweep
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.005, 0.008, 0.015])]
        phi: Vec<f64>,
    },
    /// Parse and validate a scenario config, reporting every problem
    ValidateConfig {
        /// Scenario config TOML
        #[arg(long)]
        config: PathBuf,
    },
    /// Render SVG scatter plots from a run's per_agent.csv
    Plot {
        /// per_agent.csv produced by `tev run`
        #[arg(long)]
        per_agent: PathBuf,
        /// Directory for the SVG files
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> tev_sim::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = args.resolve()?;
            if cfg.out_dir.is_none() {
                cfg.out_dir = Some(PathBuf::from("out"));
            }
            let artifacts = run_scenario(&cfg)?;
            let s = &artifacts.summary;
            println!(
                "{} agents x {} days ({} mode), artifacts in {}",
                cfg.fleet_size,
                cfg.days,
                match cfg.mode {
                    Mode::V1g => "V1G",
                    Mode::V2g => "V2G",
                },
                cfg.out_dir.as_ref().unwrap().display()
            );
            println!(
                "peak load {:.1} kWh (base {:.1}), mean price {:.4} $/kWh (base {:.4})",
                s.transactive.peak_kwh, s.base.peak_kwh, s.transactive.mean_price, s.base.mean_price
            );
            println!(
                "convergence {:.1}%, mean savings {:.2}%, mean amenity {:.1}%, audit clean: {}",
                100.0 * s.convergence_fraction,
                s.mean_savings_pct,
                s.mean_amenity_pct,
                s.audit.clean()
            );
            Ok(())
        }
        Command::CompareModes { config, phi } => {
            let mut cfg = config.resolve()?;
            let out = cfg.out_dir.take().unwrap_or_else(|| PathBuf::from("out"));
            let rows = compare_modes(&cfg, &phi)?;
            println!("phi      dSavings%  dPeak_kWh");
            for r in &rows {
                println!("{:.4} {:10.3} {:10.2}", r.phi, r.delta_savings_pct, r.delta_peak_kwh);
            }
            std::fs::create_dir_all(&out)?;
            let path = out.join("mode_comparison.csv");
            write_comparison(&rows, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::ValidateConfig { config } => {
            load_config(&config)?;
            println!("{}: OK", config.display());
            Ok(())
        }
        Command::Plot { per_agent, out } => {
            plot_per_agent(&per_agent, &out)?;
            println!(
                "wrote {} and {}",
                out.join("savings_vs_slider.svg").display(),
                out.join("amenity_vs_slider.svg").display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
