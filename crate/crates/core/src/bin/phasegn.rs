use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use phasegn::bench::{self, Experiment, ExperimentConfig, GridSpec};
use phasegn::measure::ProblemInstance;
use phasegn::{Error, Field};

/// Phase retrieval experiments.
#[derive(Parser)]
#[command(name = "phasegn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Initializer accuracy against m/n.
    InitBench(ExperimentArgs),
    /// Relative error per iteration (defaults: m/n = 5, sigma = 0.1).
    Converge(ExperimentArgs),
    /// Iterations and wall time to reach the success threshold.
    Timing(ExperimentArgs),
    /// Success rate against m/n (default grid 1:10:0.5, 100 trials).
    Success(ExperimentArgs),
    /// Write one synthetic problem instance as binary arrays.
    ExportInstance(ExportArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    n: Option<usize>,
    /// `start:stop:step`, a comma list, or one value.
    #[arg(long = "m-over-n")]
    m_over_n: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Standard deviation of the additive intensity noise.
    #[arg(long)]
    sigma: Option<f64>,
    /// Signal field: real or complex.
    #[arg(long)]
    field: Option<Field>,
    /// Sensing-vector field: real or complex.
    #[arg(long)]
    ensemble: Option<Field>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long = "power-iters")]
    power_iters: Option<usize>,
    /// Iteration cap for every solver.
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Overrides the success threshold; recorded in the manifest.
    #[arg(long = "success-threshold")]
    success_threshold: Option<f64>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value = "real")]
    field: Field,
    #[arg(long, default_value = "complex")]
    ensemble: Field,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

impl ExperimentArgs {
    fn into_config(self, experiment: Experiment) -> Result<ExperimentConfig, Error> {
        let mut c = ExperimentConfig::defaults(experiment);
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.m_over_n {
            c.m_over_n = v.parse::<GridSpec>()?;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.sigma {
            c.noise_sigma = v;
        }
        if let Some(v) = self.field {
            c.signal_field = v;
        }
        if let Some(v) = self.ensemble {
            c.ensemble_field = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.methods {
            c.methods = v;
        }
        if let Some(v) = self.threads {
            c.threads = v;
        }
        if let Some(v) = self.power_iters {
            c.power_iters = v;
        }
        if let Some(v) = self.success_threshold {
            c.success_threshold = v;
        }
        c.max_iters = self.max_iters;
        c.out_dir = self.out;
        c.emit_svg = self.svg;
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::FieldMismatch(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::InitBench(a) => (Experiment::InitBench, a),
        Command::Converge(a) => (Experiment::Converge, a),
        Command::Timing(a) => (Experiment::Timing, a),
        Command::Success(a) => (Experiment::Success, a),
        Command::ExportInstance(a) => {
            let result = ProblemInstance::synthesize(a.m, a.n, a.ensemble, a.field, a.sigma, a.seed)
                .and_then(|inst| inst.write_dir(&a.out));
            return match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    error!("{e}");
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            };
        }
    };
    let result = args.into_config(experiment).and_then(|cfg| {
        let report = bench::run(&cfg)?;
        if cfg.out_dir.is_none() {
            print!("{}", report.primary_csv()?);
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
