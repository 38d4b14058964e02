//! Command-line front end: `generate`, `train`, `evaluate`, `plot` and `run`.
//!
//! Settings come from an optional JSON config (`--config`) with individual
//! flags layered on top. Exit codes: 0 on success, 2 for usage, config and
//! data errors, 3 when training or evaluation hits non-finite numbers.

pub mod config;
pub mod pipeline;
pub mod plot;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{DatasetSource, ExperimentConfig, ModelChoice, PlotConfig};
pub use pipeline::{run, RunManifest};
pub use plot::{plot_forecasts, PlotFiles};

use crate::dataprep::{gen_activities, gen_random_walk, write_csv, ActivitiesParams, CsvLayout, DegenerateMode, RandomWalkParams};
use crate::error::{Error, Result};
use crate::evalkit::ReportUnits;
use crate::numkit::Rng;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "tsfc", version, about = "Train and evaluate recurrent forecasters on univariate series")]
pub struct Cli {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seeds both the data generator and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (for `generate`: the CSV file).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic dataset to CSV.
    Generate(GenerateArgs),
    /// Train the selected networks and save checkpoints.
    Train(ExperimentArgs),
    /// Score saved checkpoints and the baseline on the test region.
    Evaluate(ExperimentArgs),
    /// Draw actual vs predicted charts from saved checkpoints.
    Plot(ExperimentArgs),
    /// Data, training, evaluation and plots in one go.
    Run(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GeneratorKind {
    Activities,
    RandomWalk,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    pub kind: GeneratorKind,
    #[arg(long)]
    pub length: Option<usize>,
    /// Number of series.
    #[arg(long)]
    pub series: Option<usize>,
    #[arg(long)]
    pub samples_per_day: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub amplitude_jitter: Option<f64>,
    /// Standard deviation of the log-return per step.
    #[arg(long)]
    pub step_sd: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum UnitsArg {
    Normalized,
    Raw,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DegenerateArg {
    Error,
    Midpoint,
}

#[derive(Args, Debug, Default)]
pub struct ExperimentArgs {
    /// Read series from this CSV instead of generating them.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// The CSV's first column holds dates and is skipped.
    #[arg(long)]
    pub date_column: bool,
    #[arg(long)]
    pub window: Option<usize>,
    /// Comma-separated forecast horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long)]
    pub test_len: Option<usize>,
    /// Comma-separated subset of lstm, gru, baseline.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub train_series: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub units: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Clip gradients to this global L2 norm.
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub no_shuffle: bool,
    #[arg(long, value_enum)]
    pub report_units: Option<UnitsArg>,
    #[arg(long)]
    pub fit_bounds_on_train: bool,
    #[arg(long, value_enum)]
    pub degenerate: Option<DegenerateArg>,
    /// Leading test points drawn per chart.
    #[arg(long)]
    pub plot_points: Option<usize>,
    #[arg(long)]
    pub origin_stride: Option<usize>,
}

impl ExperimentArgs {
    fn apply(&self, c: &mut ExperimentConfig) -> Result<()> {
        if let Some(path) = &self.data {
            c.dataset = DatasetSource::Csv { path: path.clone(), layout: CsvLayout { date_column: self.date_column } };
        } else if self.date_column {
            if let DatasetSource::Csv { layout, .. } = &mut c.dataset {
                layout.date_column = true;
            }
        }
        if let Some(v) = self.window {
            c.window = v;
        }
        if let Some(v) = &self.horizons {
            c.horizons = v.clone();
        }
        if let Some(v) = self.test_len {
            c.test_len = v;
        }
        if let Some(v) = &self.models {
            c.models = v.iter().map(|m| m.trim().parse()).collect::<Result<_>>()?;
        }
        if let Some(v) = self.train_series {
            c.train_series_index = v;
        }
        if let Some(v) = self.epochs {
            c.train.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.train.batch_size = v;
        }
        if let Some(v) = self.units {
            c.train.units = v;
        }
        if let Some(v) = self.learning_rate {
            c.train.learning_rate = v;
        }
        if self.clip_norm.is_some() {
            c.train.clip_norm = self.clip_norm;
        }
        if self.no_shuffle {
            c.train.shuffle = false;
        }
        if let Some(v) = self.report_units {
            c.report_units = match v {
                UnitsArg::Normalized => ReportUnits::Normalized,
                UnitsArg::Raw => ReportUnits::Raw,
            };
        }
        if self.fit_bounds_on_train {
            c.fit_bounds_on_train = true;
        }
        if let Some(v) = self.degenerate {
            c.degenerate = match v {
                DegenerateArg::Error => DegenerateMode::Error,
                DegenerateArg::Midpoint => DegenerateMode::Midpoint,
            };
        }
        if let Some(v) = self.plot_points {
            c.plot.points = v;
        }
        if self.origin_stride.is_some() {
            c.plot.origin_stride = self.origin_stride;
        }
        Ok(())
    }
}

impl Cli {
    /// Config file, then `--seed`/`--out`, then subcommand flags.
    pub fn experiment_config(&self, args: &ExperimentArgs) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            c.set_seed(seed);
        }
        if let Some(out) = &self.out {
            c.out_dir = out.clone();
        }
        args.apply(&mut c)?;
        c.validate()?;
        Ok(c)
    }
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<PathBuf> {
    let seed = cli.seed.unwrap_or(0);
    let mut rng = Rng::new(seed);
    let series = match args.kind {
        GeneratorKind::Activities => {
            let d = ActivitiesParams::default();
            let p = ActivitiesParams {
                n_series: args.series.unwrap_or(d.n_series),
                length: args.length.unwrap_or(d.length),
                samples_per_day: args.samples_per_day.unwrap_or(d.samples_per_day),
                noise_sd: args.noise_sd.unwrap_or(d.noise_sd),
                amplitude_jitter: args.amplitude_jitter.unwrap_or(d.amplitude_jitter),
                ..d
            };
            gen_activities(&mut rng, &p)?
        }
        GeneratorKind::RandomWalk => {
            let d = RandomWalkParams::default();
            let p = RandomWalkParams {
                n_series: args.series.unwrap_or(d.n_series),
                length: args.length.unwrap_or(d.length),
                step_sd: args.step_sd.unwrap_or(d.step_sd),
                ..d
            };
            gen_random_walk(&mut rng, &p)?
        }
    };
    let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("data.csv"));
    write_csv(&path, &series)?;
    Ok(path)
}

fn execute(cli: &Cli) -> Result<()> {
    let mut printer = |msg: &str| eprintln!("{msg}");
    let mut log: pipeline::Log<'_> = if cli.quiet { None } else { Some(&mut printer) };
    match &cli.command {
        Command::Generate(args) => {
            let path = generate(cli, args)?;
            if !cli.quiet {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Train(args) => {
            let c = cli.experiment_config(args)?;
            let series = pipeline::prepare(&c, &pipeline::load_raw(&c)?)?;
            pipeline::train_stage(&c, &series, &mut log)?;
        }
        Command::Evaluate(args) => {
            let c = cli.experiment_config(args)?;
            let series = pipeline::prepare(&c, &pipeline::load_raw(&c)?)?;
            let done = pipeline::evaluate_stage(&c, &series, &mut log)?;
            if !cli.quiet {
                let table = std::fs::read_to_string(&done.table).map_err(|e| Error::io(&done.table, e))?;
                print!("{table}");
            }
        }
        Command::Plot(args) => {
            let c = cli.experiment_config(args)?;
            let series = pipeline::prepare(&c, &pipeline::load_raw(&c)?)?;
            let files = pipeline::plot_stage(&c, &series)?;
            if !cli.quiet {
                eprintln!("wrote {} plot files under {}", files.len(), c.out_dir.join("plots").display());
            }
        }
        Command::Run(args) => {
            let c = cli.experiment_config(args)?;
            let manifest = run(&c, log)?;
            if !cli.quiet {
                eprintln!("wrote {}", RunManifest::path(&manifest.config).display());
            }
        }
    }
    Ok(())
}

/// Parse `args` (including the program name) and run the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            if e.is_numeric() {
                ExitCode::from(EXIT_NUMERIC)
            } else {
                ExitCode::from(EXIT_USAGE)
            }
        }
    }
}
