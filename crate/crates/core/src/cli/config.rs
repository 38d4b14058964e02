use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cells::ModelKind;
use crate::dataprep::{ActivitiesParams, CsvLayout, DegenerateMode, RandomWalkParams, DEFAULT_TEST_LEN, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::evalkit::ReportUnits;
use crate::training::TrainConfig;

/// Where the series come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    Activities {
        #[serde(default)]
        seed: u64,
        #[serde(flatten)]
        params: ActivitiesParams,
    },
    RandomWalk {
        #[serde(default)]
        seed: u64,
        #[serde(flatten)]
        params: RandomWalkParams,
    },
    Csv {
        path: PathBuf,
        #[serde(flatten)]
        layout: CsvLayout,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Activities { seed: 0, params: ActivitiesParams::default() }
    }
}

impl DatasetSource {
    pub fn set_seed(&mut self, new_seed: u64) {
        match self {
            DatasetSource::Activities { seed, .. } | DatasetSource::RandomWalk { seed, .. } => *seed = new_seed,
            DatasetSource::Csv { .. } => {}
        }
    }

    pub fn is_generated(&self) -> bool {
        !matches!(self, DatasetSource::Csv { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Lstm,
    Gru,
    Baseline,
}

impl ModelChoice {
    pub fn kind(self) -> Option<ModelKind> {
        match self {
            ModelChoice::Lstm => Some(ModelKind::Lstm),
            ModelChoice::Gru => Some(ModelKind::Gru),
            ModelChoice::Baseline => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ModelChoice::Lstm => "lstm",
            ModelChoice::Gru => "gru",
            ModelChoice::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelChoice::Lstm),
            "gru" => Ok(ModelChoice::Gru),
            "baseline" => Ok(ModelChoice::Baseline),
            other => Err(Error::Config(format!("unknown model '{other}' (expected lstm, gru or baseline)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotConfig {
    /// Number of leading test points drawn.
    pub points: usize,
    /// Distance between plotted forecast origins; defaults to the horizon,
    /// so multi-step fans do not overlap.
    pub origin_stride: Option<usize>,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig { points: 100, origin_stride: None }
    }
}

/// One experiment: data, partition, models, training and output settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub window: usize,
    pub horizons: Vec<usize>,
    pub test_len: usize,
    pub models: Vec<ModelChoice>,
    pub train_series_index: usize,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    pub report_units: ReportUnits,
    /// Fit normalization bounds on the training region only.
    pub fit_bounds_on_train: bool,
    pub degenerate: DegenerateMode,
    pub plot: PlotConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::default(),
            window: DEFAULT_WINDOW,
            horizons: vec![1, 20],
            test_len: DEFAULT_TEST_LEN,
            models: vec![ModelChoice::Lstm, ModelChoice::Gru, ModelChoice::Baseline],
            train_series_index: 0,
            train: TrainConfig::default(),
            out_dir: PathBuf::from("out"),
            report_units: ReportUnits::Normalized,
            fit_bounds_on_train: false,
            degenerate: DegenerateMode::Error,
            plot: PlotConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Sets the generator seed and the training seed together.
    pub fn set_seed(&mut self, seed: u64) {
        self.dataset.set_seed(seed);
        self.train.seed = seed;
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config(format!("horizons must be non-empty and >= 1, got {:?}", self.horizons)));
        }
        if let Some(&h) = self.horizons.iter().find(|&&h| h > self.test_len) {
            return Err(Error::Config(format!("horizon {h} exceeds test_len {}", self.test_len)));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        if self.plot.points == 0 || self.plot.origin_stride == Some(0) {
            return Err(Error::Config("plot points and origin stride must be >= 1".into()));
        }
        self.train.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Selected trainable kinds in config order, deduplicated.
    pub fn trainable(&self) -> Vec<ModelKind> {
        let mut kinds: Vec<ModelKind> = Vec::new();
        for k in self.models.iter().filter_map(|m| m.kind()) {
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
        kinds
    }

    pub fn checkpoint_path(&self, kind: ModelKind, horizon: usize) -> PathBuf {
        self.out_dir.join("checkpoints").join(format!("{kind}_f{horizon}.tsfc"))
    }

    pub fn loss_path(&self, kind: ModelKind, horizon: usize) -> PathBuf {
        self.out_dir.join("loss").join(format!("{kind}_f{horizon}.csv"))
    }
}
