//! Experiment stages: data, training, evaluation, plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, ExperimentConfig, ModelChoice};
use super::plot::{plot_forecasts, PlotFiles};
use crate::cells::{ModelKind, ModelState};
use crate::dataprep::{
    gen_activities, gen_random_walk, load_csv, make_windows, normalize, normalize_fitted_on, write_csv, PartitionSpec,
    Region, Series,
};
use crate::error::{Error, Result};
use crate::evalkit::{aggregate, evaluate, reports_to_csv, reports_to_table, EvalReport, Forecaster, ReportUnits, SeriesScore};
use crate::numkit::Rng;
use crate::training::{load_checkpoint, save_checkpoint, train_with_progress, TrainOutcome};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Progress sink; `None` silences output.
pub type Log<'a> = Option<&'a mut dyn FnMut(&str)>;

fn say(log: &mut Log<'_>, msg: &str) {
    if let Some(f) = log.as_mut() {
        f(msg);
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Raw series as generated or read from disk.
pub fn load_raw(config: &ExperimentConfig) -> Result<Vec<Series>> {
    match &config.dataset {
        DatasetSource::Activities { seed, params } => gen_activities(&mut Rng::new(*seed), params),
        DatasetSource::RandomWalk { seed, params } => gen_random_walk(&mut Rng::new(*seed), params),
        DatasetSource::Csv { path, layout } => load_csv(path, *layout),
    }
}

/// Normalize every series and check the partition fits all of them.
pub fn prepare(config: &ExperimentConfig, raw: &[Series]) -> Result<Vec<Series>> {
    config.validate()?;
    if config.train_series_index >= raw.len() {
        return Err(Error::Config(format!(
            "train_series_index {} out of range: dataset has {} series",
            config.train_series_index,
            raw.len()
        )));
    }
    raw.iter()
        .map(|s| {
            for &h in &config.horizons {
                partition(config, h)?.validate(s.len()).map_err(|e| Error::Config(format!("'{}': {e}", s.name)))?;
            }
            if config.fit_bounds_on_train {
                normalize_fitted_on(s, s.len() - config.test_len, config.degenerate)
            } else {
                normalize(s, config.degenerate)
            }
        })
        .collect()
}

pub fn partition(config: &ExperimentConfig, horizon: usize) -> Result<PartitionSpec> {
    PartitionSpec::new(config.window, horizon, config.test_len)
}

/// Train one model on the configured training series (already normalized).
pub fn train_one(config: &ExperimentConfig, series: &[Series], kind: ModelKind, horizon: usize, log: &mut Log<'_>) -> Result<TrainOutcome> {
    let train_series = &series[config.train_series_index];
    let data = make_windows(train_series, partition(config, horizon)?, Region::Train)?;
    say(log, &format!("training {kind} f={horizon} on '{}' ({} windows)", train_series.name, data.len()));
    let epochs = config.train.epochs;
    train_with_progress(kind, &data, &config.train, |epoch, loss| {
        if epoch == 1 || epoch % 10 == 0 || epoch == epochs {
            say(log, &format!("  {kind} f={horizon} epoch {epoch}/{epochs} loss {loss:.6e}"));
        }
    })
}

/// Score a forecaster on every series.
pub fn score_all(
    choice: ModelChoice,
    model: Option<&ModelState>,
    series: &[Series],
    spec: PartitionSpec,
    units: ReportUnits,
) -> Result<EvalReport> {
    let forecaster = match model {
        Some(m) => Forecaster::Model(m),
        None => Forecaster::Baseline,
    };
    let rows = series
        .iter()
        .map(|s| {
            let e = evaluate(forecaster, s, spec, units)?;
            Ok(SeriesScore { name: s.name.clone(), rmse: e.rmse, da: e.da })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(choice.tag(), spec.horizon, rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub model: String,
    pub horizon: usize,
    pub path: PathBuf,
}

#[derive(Clone, Debug, Default)]
pub struct TrainArtifacts {
    pub checkpoints: Vec<ArtifactEntry>,
    pub loss_histories: Vec<ArtifactEntry>,
}

pub fn train_stage(config: &ExperimentConfig, series: &[Series], log: &mut Log<'_>) -> Result<TrainArtifacts> {
    let mut out = TrainArtifacts::default();
    for kind in config.trainable() {
        for &h in &config.horizons {
            let outcome = train_one(config, series, kind, h, log)?;
            let ckpt_path = config.checkpoint_path(kind, h);
            if let Some(parent) = ckpt_path.parent() {
                create_dir(parent)?;
            }
            save_checkpoint(&outcome.checkpoint, &ckpt_path)?;

            let mut csv = String::from("epoch,loss\n");
            for (i, l) in outcome.loss_history.iter().enumerate() {
                let _ = writeln!(csv, "{},{l}", i + 1);
            }
            let loss_path = config.loss_path(kind, h);
            write_file(&loss_path, csv)?;

            let tag = kind.tag().to_string();
            out.checkpoints.push(ArtifactEntry { model: tag.clone(), horizon: h, path: ckpt_path });
            out.loss_histories.push(ArtifactEntry { model: tag, horizon: h, path: loss_path });
        }
    }
    Ok(out)
}

fn load_model(config: &ExperimentConfig, kind: ModelKind, horizon: usize) -> Result<ModelState> {
    let path = config.checkpoint_path(kind, horizon);
    if !path.exists() {
        return Err(Error::Config(format!("missing checkpoint for {kind} f={horizon}: {}", path.display())));
    }
    let ckpt = load_checkpoint(&path)?;
    if ckpt.kind != kind || ckpt.window != config.window || ckpt.horizon != horizon {
        return Err(Error::Config(format!(
            "checkpoint {} holds {} w={} f={}, config wants {kind} w={} f={horizon}",
            path.display(),
            ckpt.kind,
            ckpt.window,
            ckpt.horizon,
            config.window
        )));
    }
    ckpt.model()
}

/// Forecaster for one (model, horizon) pair; `None` is the baseline.
fn forecaster_for(config: &ExperimentConfig, choice: ModelChoice, horizon: usize) -> Result<Option<ModelState>> {
    choice.kind().map(|k| load_model(config, k, horizon)).transpose()
}

fn evaluation_pairs(config: &ExperimentConfig) -> Vec<(ModelChoice, usize)> {
    let mut seen = Vec::new();
    for &m in &config.models {
        for &h in &config.horizons {
            if !seen.contains(&(m, h)) {
                seen.push((m, h));
            }
        }
    }
    seen
}

#[derive(Clone, Debug)]
pub struct EvaluateArtifacts {
    pub reports: Vec<EvalReport>,
    pub csv: PathBuf,
    pub table: PathBuf,
}

pub fn evaluate_stage(config: &ExperimentConfig, series: &[Series], log: &mut Log<'_>) -> Result<EvaluateArtifacts> {
    let mut reports = Vec::new();
    for (choice, h) in evaluation_pairs(config) {
        let model = forecaster_for(config, choice, h)?;
        let report = score_all(choice, model.as_ref(), series, partition(config, h)?, config.report_units)?;
        say(
            log,
            &format!(
                "{:<8} f={h:<3} RMSE {:.6} ± {:.6}  DA {:.4} ± {:.4}",
                choice.tag(),
                report.mean_rmse,
                report.sd_rmse,
                report.mean_da,
                report.sd_da
            ),
        );
        reports.push(report);
    }
    let csv = config.out_dir.join("report.csv");
    let table = config.out_dir.join("report.txt");
    write_file(&csv, reports_to_csv(&reports))?;
    let units = match config.report_units {
        ReportUnits::Normalized => "normalized",
        ReportUnits::Raw => "raw",
    };
    write_file(&table, format!("RMSE units: {units}; SD: sample (n-1)\n\n{}", reports_to_table(&reports)))?;
    Ok(EvaluateArtifacts { reports, csv, table })
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn plot_stage(config: &ExperimentConfig, series: &[Series]) -> Result<Vec<PathBuf>> {
    let dir = config.out_dir.join("plots");
    create_dir(&dir)?;
    let mut paths = Vec::new();
    for (choice, h) in evaluation_pairs(config) {
        let model = forecaster_for(config, choice, h)?;
        let forecaster = model.as_ref().map_or(Forecaster::Baseline, Forecaster::Model);
        let spec = partition(config, h)?;
        for s in series {
            let eval = evaluate(forecaster, s, spec, ReportUnits::Raw)?;
            let stem = dir.join(format!("{}_{}_f{h}", file_stem(&s.name), choice.tag()));
            let title = format!("{}: {} {}-step ahead", s.name, choice.tag(), h);
            let stride = if h == 1 { 1 } else { config.plot.origin_stride.unwrap_or(h) };
            let PlotFiles { svg, csv } = plot_forecasts(&eval.forecasts, &title, config.plot.points, stride)?;
            let (svg_path, csv_path) = (stem.with_extension("svg"), stem.with_extension("csv"));
            write_file(&svg_path, svg)?;
            write_file(&csv_path, csv)?;
            paths.push(svg_path);
            paths.push(csv_path);
        }
    }
    Ok(paths)
}

/// Record of a full run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub dataset: Option<PathBuf>,
    pub checkpoints: Vec<ArtifactEntry>,
    pub loss_histories: Vec<ArtifactEntry>,
    pub reports: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
    pub timings_secs: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn path(config: &ExperimentConfig) -> PathBuf {
        config.out_dir.join("manifest.json")
    }

    /// Every output file named in the manifest.
    pub fn outputs(&self) -> Vec<&Path> {
        self.dataset
            .iter()
            .map(PathBuf::as_path)
            .chain(self.checkpoints.iter().chain(&self.loss_histories).map(|a| a.path.as_path()))
            .chain(self.reports.iter().chain(&self.plots).map(PathBuf::as_path))
            .collect()
    }
}

fn stage<T>(name: &str, timings: &mut BTreeMap<String, f64>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| match e {
        Error::Numeric(m) => Error::Numeric(format!("{name} stage: {m}")),
        Error::Config(m) => Error::Config(format!("{name} stage: {m}")),
        Error::Argument(m) => Error::Argument(format!("{name} stage: {m}")),
        other => other,
    })?;
    timings.insert(name.to_string(), start.elapsed().as_secs_f64());
    Ok(out)
}

/// Data, training, evaluation and plots end to end.
pub fn run(config: &ExperimentConfig, mut log: Log<'_>) -> Result<RunManifest> {
    config.validate()?;
    let total = Instant::now();
    let mut timings = BTreeMap::new();
    create_dir(&config.out_dir)?;

    let (raw, dataset) = stage("data", &mut timings, || {
        let raw = load_raw(config)?;
        let path = if config.dataset.is_generated() {
            let p = config.out_dir.join("data.csv");
            write_csv(&p, &raw)?;
            Some(p)
        } else {
            None
        };
        Ok((raw, path))
    })?;
    let series = prepare(config, &raw)?;
    say(&mut log, &format!("{} series of length {}", series.len(), series[0].len()));

    let trained = stage("train", &mut timings, || train_stage(config, &series, &mut log))?;
    let evaluated = stage("evaluate", &mut timings, || evaluate_stage(config, &series, &mut log))?;
    let plots = stage("plot", &mut timings, || plot_stage(config, &series))?;
    timings.insert("total".into(), total.elapsed().as_secs_f64());

    let manifest = RunManifest {
        toolkit_version: TOOLKIT_VERSION.into(),
        seed: config.train.seed,
        config: config.clone(),
        dataset,
        checkpoints: trained.checkpoints,
        loss_histories: trained.loss_histories,
        reports: vec![evaluated.csv, evaluated.table],
        plots,
        timings_secs: timings,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
    write_file(&RunManifest::path(config), json + "\n")?;
    Ok(manifest)
}
