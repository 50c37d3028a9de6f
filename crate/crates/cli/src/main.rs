use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epipinn::inverse::rt_fit::RtFitConfig;
use epipinn::report::{run_experiment, ExperimentConfig, Mode, SyntheticSpec};
use epipinn::Error;

/// Physics-informed SIR fits, R_t estimation and reporting.
#[derive(Parser)]
#[command(name = "epipinn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit constant recovery and transmission rates per region.
    FitSir(Common),
    /// Estimate a time-dependent reproduction number per region.
    FitRt {
        #[command(flatten)]
        common: Common,
        /// Fixed recovery rate (defaults to 1/14).
        #[arg(long)]
        alpha: Option<f64>,
        /// Use the state-level loss weights instead of the national ones.
        #[arg(long)]
        state_weights: bool,
    },
    /// Integrate the SIR equations with RK4 and plot the result.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Correlate summary tables against vaccination coverage.
    Report {
        #[command(flatten)]
        common: Common,
        /// Summary CSV files with a region column.
        #[arg(long = "table")]
        tables: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON file mirroring the experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for tables, JSON and plots.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Independent training runs per region.
    #[arg(short = 'n', long)]
    repetitions: Option<usize>,
    /// Base seed; run k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(short = 'j', long)]
    workers: Option<usize>,
    /// Comma-separated region names.
    #[arg(long, value_delimiter = ',')]
    regions: Option<Vec<String>>,
    /// Region metadata CSV (region,population,vaccination_pct).
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Daily case CSV (date,region,new_cases,new_deaths).
    #[arg(long)]
    cases: Option<PathBuf>,
    /// Preprocessed region dataset JSON; repeatable.
    #[arg(long = "dataset")]
    datasets: Vec<PathBuf>,
    /// Skip SVG output.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1.0 / 14.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    #[arg(long, default_value_t = 1e6)]
    population: f64,
    #[arg(long, default_value_t = 10.0)]
    i0: f64,
    #[arg(long, default_value_t = 120)]
    days: usize,
}

impl Common {
    fn into_config(self, mode: Mode) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.mode = mode;
        if let Some(v) = self.output_dir {
            cfg.output_dir = v;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(v) = self.seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = self.regions {
            cfg.regions = v;
        }
        if let Some(v) = self.metadata {
            cfg.datasets.metadata_csv = Some(v);
        }
        if let Some(v) = self.cases {
            cfg.datasets.cases_csv = Some(v);
        }
        if !self.datasets.is_empty() {
            cfg.datasets.region_json = self.datasets;
        }
        if self.no_plots {
            cfg.plots = false;
        }
        Ok(cfg)
    }
}

fn build_config(command: Command) -> Result<ExperimentConfig, Error> {
    match command {
        Command::FitSir(common) => common.into_config(Mode::FitSir),
        Command::FitRt { common, alpha, state_weights } => {
            let mut cfg = common.into_config(Mode::FitRt)?;
            if state_weights {
                let preset = RtFitConfig::state();
                cfg.solver.rt.w0 = preset.w0;
                cfg.solver.rt.w1 = preset.w1;
            }
            if let Some(a) = alpha {
                cfg.solver.rt.alpha = a;
            }
            Ok(cfg)
        }
        Command::Simulate { common, sim } => {
            let explicit = common.config.is_some();
            let mut cfg = common.into_config(Mode::Simulate)?;
            if !explicit || cfg.datasets.synthetic.is_none() {
                cfg.datasets.synthetic = Some(SyntheticSpec {
                    alpha: sim.alpha,
                    beta: sim.beta,
                    i0: sim.i0,
                    days: sim.days,
                    population: Some(sim.population),
                    noise_std: 0.0,
                    noise_seed: 0,
                });
            }
            if cfg.regions.is_empty() && cfg.datasets.metadata_csv.is_none() {
                cfg.regions = vec!["synthetic".into()];
            }
            Ok(cfg)
        }
        Command::Report { common, tables } => {
            let mut cfg = common.into_config(Mode::Report)?;
            if !tables.is_empty() {
                cfg.datasets.report_tables = tables;
            }
            Ok(cfg)
        }
    }
}

fn exit_code(err: &Error) -> ExitCode {
    if err.is_training_failure() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match build_config(cli.command) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return exit_code(&e);
        }
    };
    match run_experiment(&cfg) {
        Ok(result) => {
            for c in &result.correlations {
                println!("{}: r = {:.5}, p = {:.4} (n = {})", c.pair, c.r, c.p, c.n);
            }
            println!("wrote results to {}", cfg.output_dir.display());
            if result.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                log::error!("{} run(s) failed during training", result.failures.len());
                ExitCode::from(2)
            }
        }
        Err(e) => {
            log::error!("{e}");
            exit_code(&e)
        }
    }
}
