//! Persistence baseline, RMSE / directional accuracy, and per-dataset
//! aggregation into mean and sample standard deviation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cells::ModelState;
use crate::dataprep::{make_windows, Bounds, PartitionSpec, Region, Series};
use crate::error::{Error, Result};

/// Forecasts issued from consecutive origins over a test region.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastSet {
    pub horizon: usize,
    /// One `f`-vector per origin.
    pub predicted: Vec<Vec<f64>>,
    pub actual: Vec<Vec<f64>>,
    /// Last input value seen before each origin.
    pub last_observed: Vec<f64>,
    /// Source index of the first forecast target of each origin.
    pub origins: Vec<usize>,
    pub bounds: Option<Bounds>,
}

impl ForecastSet {
    pub fn new(
        horizon: usize,
        predicted: Vec<Vec<f64>>,
        actual: Vec<Vec<f64>>,
        last_observed: Vec<f64>,
        bounds: Option<Bounds>,
    ) -> Result<Self> {
        let n = predicted.len();
        if actual.len() != n || last_observed.len() != n {
            return Err(Error::Shape(format!(
                "{n} predictions, {} actuals, {} last observations",
                actual.len(),
                last_observed.len()
            )));
        }
        if predicted.iter().chain(&actual).any(|v| v.len() != horizon) {
            return Err(Error::Shape(format!("every forecast must hold f={horizon} values")));
        }
        Ok(ForecastSet { horizon, predicted, actual, last_observed, origins: (0..n).collect(), bounds })
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    /// Same forecasts mapped back to the raw scale.
    pub fn denormalized(&self) -> Result<ForecastSet> {
        let b = self.bounds.ok_or_else(|| Error::Argument("forecast set carries no bounds".into()))?;
        Bounds::new(b.min, b.max)?;
        let map = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| r.iter().map(|&x| b.denormalize_value(x)).collect()).collect()
        };
        Ok(ForecastSet {
            horizon: self.horizon,
            predicted: map(&self.predicted),
            actual: map(&self.actual),
            last_observed: self.last_observed.iter().map(|&x| b.denormalize_value(x)).collect(),
            origins: self.origins.clone(),
            bounds: None,
        })
    }
}

/// Repeat the last value of the window `f` times.
pub fn baseline_forecast(window: &[f64], f: usize) -> Result<Vec<f64>> {
    let last = *window.last().ok_or_else(|| Error::Argument("baseline needs a non-empty window".into()))?;
    if f == 0 {
        return Err(Error::Argument("baseline horizon must be >= 1".into()));
    }
    Ok(vec![last; f])
}

fn ensure_non_empty(set: &ForecastSet) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Argument("empty forecast set".into()));
    }
    Ok(())
}

/// Root mean squared error over all (origin, step) pairs.
pub fn rmse(set: &ForecastSet) -> Result<f64> {
    ensure_non_empty(set)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, a) in set.predicted.iter().zip(&set.actual) {
        for (x, y) in p.iter().zip(a) {
            sum += (x - y) * (x - y);
            count += 1;
        }
    }
    Ok((sum / count as f64).sqrt())
}

fn direction(delta: f64) -> i8 {
    if delta > 0.0 {
        1
    } else if delta < 0.0 {
        -1
    } else {
        0
    }
}

/// Fraction of (origin, step) pairs whose predicted direction of change
/// matches the realized one. Step 1 is measured against the last observed
/// input, later steps against the previous actual value. A flat prediction
/// only matches a flat actual.
pub fn directional_accuracy(set: &ForecastSet) -> Result<f64> {
    ensure_non_empty(set)?;
    let mut hits = 0usize;
    let mut total = 0usize;
    for ((p, a), &last) in set.predicted.iter().zip(&set.actual).zip(&set.last_observed) {
        for k in 0..set.horizon {
            let reference = if k == 0 { last } else { a[k - 1] };
            if direction(p[k] - reference) == direction(a[k] - reference) {
                hits += 1;
            }
            total += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Clone, Copy, Debug)]
pub enum Forecaster<'a> {
    Baseline,
    Model(&'a ModelState),
}

impl Forecaster<'_> {
    pub fn tag(&self) -> &'static str {
        match self {
            Forecaster::Baseline => "baseline",
            Forecaster::Model(m) => m.kind().tag(),
        }
    }
}

/// Units in which errors are reported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportUnits {
    #[default]
    Normalized,
    Raw,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub forecasts: ForecastSet,
    pub rmse: f64,
    pub da: f64,
}

/// Forecast every test origin of a normalized series and score it.
pub fn evaluate(forecaster: Forecaster<'_>, series: &Series, spec: PartitionSpec, units: ReportUnits) -> Result<Evaluation> {
    if let Forecaster::Model(m) = forecaster {
        if m.window() != spec.window || m.horizon() != spec.horizon {
            return Err(Error::Argument(format!(
                "{} model has w={}, f={} but evaluation asks for w={}, f={}",
                m.kind(),
                m.window(),
                m.horizon(),
                spec.window,
                spec.horizon
            )));
        }
    }
    let test = make_windows(series, spec, Region::Test)?;
    let n = test.len();
    let f = spec.horizon;
    let predicted: Vec<Vec<f64>> = match forecaster {
        Forecaster::Baseline => {
            (0..n).map(|i| baseline_forecast(test.inputs.row(i), f)).collect::<Result<_>>()?
        }
        Forecaster::Model(m) => {
            let out = m.predict(&test.inputs.transpose())?;
            (0..n).map(|i| out.col(i)).collect()
        }
    };
    let actual: Vec<Vec<f64>> = (0..n).map(|i| test.targets.row(i).to_vec()).collect();
    let last: Vec<f64> = (0..n).map(|i| test.inputs.get(i, spec.window - 1)).collect();
    let mut set = ForecastSet::new(f, predicted, actual, last, series.bounds)?;
    set.origins = test.origins;

    let scored = match units {
        ReportUnits::Normalized => set.clone(),
        ReportUnits::Raw => set.denormalized()?,
    };
    Ok(Evaluation { rmse: rmse(&scored)?, da: directional_accuracy(&scored)?, forecasts: scored })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesScore {
    pub name: String,
    pub rmse: f64,
    pub da: f64,
}

/// Per-series scores of one (model, horizon) pair and their aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub horizon: usize,
    pub rows: Vec<SeriesScore>,
    pub mean_rmse: f64,
    pub sd_rmse: f64,
    pub mean_da: f64,
    pub sd_da: f64,
    /// Always "sample" (divisor n - 1; zero when n = 1).
    pub sd_kind: String,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn aggregate(model: &str, horizon: usize, rows: Vec<SeriesScore>) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::Argument("cannot aggregate zero series".into()));
    }
    let (mean_rmse, sd_rmse) = mean_sd(&rows.iter().map(|r| r.rmse).collect::<Vec<_>>());
    let (mean_da, sd_da) = mean_sd(&rows.iter().map(|r| r.da).collect::<Vec<_>>());
    Ok(EvalReport {
        model: model.to_string(),
        horizon,
        rows,
        mean_rmse,
        sd_rmse,
        mean_da,
        sd_da,
        sd_kind: "sample".into(),
    })
}

/// `model,horizon,series,rmse,da` rows, then `mean` and `sd` rows per report.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("model,horizon,series,rmse,da\n");
    for r in reports {
        for s in &r.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.model, r.horizon, s.name, s.rmse, s.da);
        }
        let _ = writeln!(out, "{},{},mean,{},{}", r.model, r.horizon, r.mean_rmse, r.mean_da);
        let _ = writeln!(out, "{},{},sd_{},{},{}", r.model, r.horizon, r.sd_kind, r.sd_rmse, r.sd_da);
    }
    out
}

/// Aligned plain-text summary table.
pub fn reports_to_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>7} {:>12} {:>12} {:>12} {:>12}", "model", "horizon", "RMSE mean", "RMSE SD", "DA mean", "DA SD");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<10} {:>7} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            r.model, r.horizon, r.mean_rmse, r.sd_rmse, r.mean_da, r.sd_da
        );
    }
    let _ = writeln!(out, "\nper series:");
    let _ = writeln!(out, "{:<10} {:>7} {:<16} {:>12} {:>12}", "model", "horizon", "series", "RMSE", "DA");
    for r in reports {
        for s in &r.rows {
            let _ = writeln!(out, "{:<10} {:>7} {:<16} {:>12.6} {:>12.6}", r.model, r.horizon, s.name, s.rmse, s.da);
        }
    }
    out
}
