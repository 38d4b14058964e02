//! Min-max normalization, train/test partitioning and sliding windows.
//!
//! A series of length `Q` is split into a training region `[0, Q - test_len)`
//! and a test region `[Q - test_len, Q)`. Windows have stride 1: sample `i`
//! reads `w` inputs and predicts the `f` values right after them. Test
//! windows may read inputs from the training region, but their targets lie
//! entirely inside the test region.

mod csvio;
mod generate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

pub use csvio::{load_csv, read_csv, write_csv, CsvLayout};
pub use generate::{gen_activities, gen_random_walk, ActivitiesParams, RandomWalkParams};

/// Default number of trailing samples held out for testing.
pub const DEFAULT_TEST_LEN: usize = 251;
/// Default input window length.
pub const DEFAULT_WINDOW: usize = 60;

/// Raw range recorded at normalization time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::Argument(format!("invalid bounds ({min}, {max}): need finite max > min")));
        }
        Ok(Bounds { min, max })
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    fn check(&self) -> Result<()> {
        Bounds::new(self.min, self.max).map(|_| ())
    }

    pub fn normalize_value(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn denormalize_value(&self, x: f64) -> f64 {
        x * (self.max - self.min) + self.min
    }
}

/// How to treat a series whose values are all equal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegenerateMode {
    /// Raise [`Error::DegenerateSeries`].
    #[default]
    Error,
    /// Map every value to 0.5. Bounds are recorded as `(c - 0.5, c + 0.5)`
    /// so that denormalization still inverts the mapping.
    Midpoint,
}

/// One named series. `bounds` is set once the values have been normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
    pub bounds: Option<Bounds>,
}

impl Series {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.len() < 2 {
            return Err(Error::Argument(format!("series '{name}' needs at least 2 samples, has {}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("series '{name}' has non-finite value at index {i}")));
        }
        Ok(Series { name, values, bounds: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.bounds.is_some()
    }

    fn min_max(values: &[f64]) -> (f64, f64) {
        values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Rescale onto [0, 1] using the min and max of the full series.
pub fn normalize(series: &Series, mode: DegenerateMode) -> Result<Series> {
    normalize_fitted_on(series, series.len(), mode)
}

/// Rescale using bounds fitted on the first `fit_len` samples only. Values
/// after `fit_len` may fall outside [0, 1].
pub fn normalize_fitted_on(series: &Series, fit_len: usize, mode: DegenerateMode) -> Result<Series> {
    if series.is_normalized() {
        return Err(Error::Argument(format!("series '{}' is already normalized", series.name)));
    }
    if series.len() < 2 || fit_len < 1 || fit_len > series.len() {
        return Err(Error::Argument(format!(
            "cannot fit bounds on {fit_len} of {} samples of '{}'",
            series.len(),
            series.name
        )));
    }
    let (lo, hi) = Series::min_max(&series.values[..fit_len]);
    let bounds = if hi > lo {
        Bounds { min: lo, max: hi }
    } else {
        match mode {
            DegenerateMode::Error => {
                return Err(Error::DegenerateSeries { name: series.name.clone(), len: fit_len, value: lo });
            }
            DegenerateMode::Midpoint => Bounds::new(lo - 0.5, lo + 0.5)?,
        }
    };
    Ok(normalize_with(series, bounds))
}

/// Apply already-known bounds.
pub fn normalize_with(series: &Series, bounds: Bounds) -> Series {
    Series {
        name: series.name.clone(),
        values: series.values.iter().map(|&x| bounds.normalize_value(x)).collect(),
        bounds: Some(bounds),
    }
}

/// Map normalized values back onto the raw scale.
pub fn denormalize(values: &[f64], bounds: Bounds) -> Result<Vec<f64>> {
    bounds.check()?;
    Ok(values.iter().map(|&x| bounds.denormalize_value(x)).collect())
}

/// Undo [`normalize`] on a whole series.
pub fn denormalize_series(series: &Series) -> Result<Series> {
    let bounds = series
        .bounds
        .ok_or_else(|| Error::Argument(format!("series '{}' carries no normalization bounds", series.name)))?;
    Ok(Series { name: series.name.clone(), values: denormalize(&series.values, bounds)?, bounds: None })
}

/// Window length `w`, horizon `f` and number of held-out samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub window: usize,
    pub horizon: usize,
    pub test_len: usize,
}

impl PartitionSpec {
    pub fn new(window: usize, horizon: usize, test_len: usize) -> Result<Self> {
        let spec = PartitionSpec { window, horizon, test_len };
        if window < 1 || horizon < 1 || test_len < horizon {
            return Err(Error::Argument(format!(
                "need w >= 1, f >= 1 and test_len >= f (got w={window}, f={horizon}, test_len={test_len})"
            )));
        }
        Ok(spec)
    }

    /// Check the partition against a series of length `q`.
    pub fn validate(&self, q: usize) -> Result<()> {
        PartitionSpec::new(self.window, self.horizon, self.test_len)?;
        if q < self.test_len + self.window + self.horizon {
            return Err(Error::Argument(format!(
                "series too short: Q={q} leaves no training window for w={}, f={}, test_len={} (need Q >= {})",
                self.window,
                self.horizon,
                self.test_len,
                self.test_len + self.window + self.horizon
            )));
        }
        Ok(())
    }

    /// End of the training region.
    pub fn train_end(&self, q: usize) -> usize {
        q - self.test_len
    }

    pub fn train_count(&self, q: usize) -> usize {
        self.train_end(q) - self.window - self.horizon + 1
    }

    pub fn test_count(&self) -> usize {
        self.test_len - self.horizon + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Train,
    Test,
}

/// `N` input windows (`N × w`) paired with their targets (`N × f`).
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub inputs: Matrix,
    pub targets: Matrix,
    /// Source index of the first target of each sample.
    pub origins: Vec<usize>,
    pub bounds: Option<Bounds>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn window(&self) -> usize {
        self.inputs.cols()
    }

    pub fn horizon(&self) -> usize {
        self.targets.cols()
    }

    /// Gather the given samples into column-major batches (`w × B`, `f × B`).
    pub fn batch(&self, indices: &[usize]) -> Result<(Matrix, Matrix)> {
        if indices.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        let (w, f) = (self.window(), self.horizon());
        let mut x = Matrix::zeros(w, indices.len());
        let mut y = Matrix::zeros(f, indices.len());
        for (col, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(Error::Argument(format!("sample {i} out of range ({} samples)", self.len())));
            }
            for (t, &v) in self.inputs.row(i).iter().enumerate() {
                x.set(t, col, v);
            }
            for (k, &v) in self.targets.row(i).iter().enumerate() {
                y.set(k, col, v);
            }
        }
        Ok((x, y))
    }
}

/// Build the training or test windows of a series.
pub fn make_windows(series: &Series, spec: PartitionSpec, region: Region) -> Result<WindowedDataset> {
    let q = series.len();
    spec.validate(q).map_err(|e| match e {
        Error::Argument(msg) => Error::Argument(format!("'{}': {msg}", series.name)),
        other => other,
    })?;
    let (w, f) = (spec.window, spec.horizon);
    let origins: Vec<usize> = match region {
        Region::Train => (w..=spec.train_end(q) - f).collect(),
        Region::Test => (spec.train_end(q)..=q - f).collect(),
    };
    let n = origins.len();
    let mut inputs = Vec::with_capacity(n * w);
    let mut targets = Vec::with_capacity(n * f);
    for &s in &origins {
        inputs.extend_from_slice(&series.values[s - w..s]);
        targets.extend_from_slice(&series.values[s..s + f]);
    }
    Ok(WindowedDataset {
        inputs: Matrix::from_vec(n, w, inputs)?,
        targets: Matrix::from_vec(n, f, targets)?,
        origins,
        bounds: series.bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;
    use proptest::prelude::*;

    fn series(values: &[f64]) -> Series {
        Series::new("s", values.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&series(&[2.0, 4.0, 6.0]), DegenerateMode::Error).unwrap();
        assert_eq!(n.values, vec![0.0, 0.5, 1.0]);
        assert_eq!(n.bounds, Some(Bounds { min: 2.0, max: 6.0 }));

        let unit = normalize(&series(&[0.0, 0.25, 1.0]), DegenerateMode::Error).unwrap();
        assert_eq!(unit.values, vec![0.0, 0.25, 1.0]);
        assert_eq!(unit.bounds, Some(Bounds { min: 0.0, max: 1.0 }));
    }

    #[test]
    fn constant_series_is_degenerate() {
        let s = series(&[3.0; 5]);
        assert!(matches!(normalize(&s, DegenerateMode::Error), Err(Error::DegenerateSeries { .. })));
        let mid = normalize(&s, DegenerateMode::Midpoint).unwrap();
        assert!(mid.values.iter().all(|&v| v == 0.5));
        assert_eq!(denormalize(&mid.values, mid.bounds.unwrap()).unwrap(), vec![3.0; 5]);
    }

    #[test]
    fn series_needs_two_finite_samples() {
        assert!(Series::new("x", vec![1.0]).is_err());
        assert!(Series::new("x", vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn denormalize_examples() {
        let b = Bounds { min: 2.0, max: 6.0 };
        assert_eq!(denormalize(&[0.0, 0.5, 1.0], b).unwrap(), vec![2.0, 4.0, 6.0]);
        assert!(matches!(denormalize(&[0.5], Bounds { min: 5.0, max: 5.0 }), Err(Error::Argument(_))));
    }

    #[test]
    fn train_bounds_option_leaves_test_unconstrained() {
        let s = series(&[1.0, 2.0, 3.0, 10.0]);
        let n = normalize_fitted_on(&s, 3, DegenerateMode::Error).unwrap();
        assert_eq!(n.bounds, Some(Bounds { min: 1.0, max: 3.0 }));
        assert_eq!(n.values[3], 4.5);
    }

    #[test]
    fn round_trip_on_random_series() {
        let mut rng = Rng::new(77);
        for _ in 0..1000 {
            let len = 2 + (rng.next_u64() % 50) as usize;
            let scale = 10f64.powf(rng.uniform_scalar(-3.0, 4.0));
            let values: Vec<f64> = (0..len).map(|_| rng.uniform_scalar(-scale, scale)).collect();
            let s = series(&values);
            let back = denormalize_series(&normalize(&s, DegenerateMode::Midpoint).unwrap()).unwrap();
            for (a, b) in values.iter().zip(&back.values) {
                assert!((a - b).abs() <= 1e-12 * scale.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn paper_scale_window_counts() {
        let s = series(&(0..3032).map(f64::from).collect::<Vec<_>>());
        let spec = PartitionSpec::new(60, 1, 251).unwrap();
        assert_eq!(make_windows(&s, spec, Region::Train).unwrap().len(), 2721);
        assert_eq!(make_windows(&s, spec, Region::Test).unwrap().len(), 251);
    }

    #[test]
    fn small_window_enumeration() {
        let s = series(&(0..10).map(f64::from).collect::<Vec<_>>());
        let spec = PartitionSpec::new(3, 2, 4).unwrap();
        let train = make_windows(&s, spec, Region::Train).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(train.inputs.row(0), &[0.0, 1.0, 2.0]);
        assert_eq!(train.targets.row(0), &[3.0, 4.0]);
        assert_eq!(train.inputs.row(1), &[1.0, 2.0, 3.0]);
        assert_eq!(train.targets.row(1), &[4.0, 5.0]);

        let test = make_windows(&s, spec, Region::Test).unwrap();
        assert_eq!(test.origins, vec![6, 7, 8]);
        assert_eq!(test.inputs.row(0), &[3.0, 4.0, 5.0]);
        assert_eq!(test.targets.row(2), &[8.0, 9.0]);
    }

    #[test]
    fn too_short_series_is_rejected() {
        let (w, f, test_len) = (3, 2, 4);
        let s = series(&vec![0.5; w + f + test_len - 1]);
        let spec = PartitionSpec::new(w, f, test_len).unwrap();
        let err = make_windows(&s, spec, Region::Train).unwrap_err().to_string();
        assert!(err.contains("Q=8") && err.contains("w=3") && err.contains("test_len=4"), "{err}");
        assert!(PartitionSpec::new(3, 5, 4).is_err());
        assert!(PartitionSpec::new(0, 1, 4).is_err());
    }

    #[test]
    fn batches_are_column_major() {
        let s = series(&(0..12).map(f64::from).collect::<Vec<_>>());
        let ds = make_windows(&s, PartitionSpec::new(3, 1, 2).unwrap(), Region::Train).unwrap();
        let (x, y) = ds.batch(&[2, 0]).unwrap();
        assert_eq!(x.col(0), vec![2.0, 3.0, 4.0]);
        assert_eq!(x.col(1), vec![0.0, 1.0, 2.0]);
        assert_eq!(y.as_slice(), &[5.0, 3.0]);
        assert!(ds.batch(&[]).is_err());
        assert!(ds.batch(&[99]).is_err());
    }

    proptest! {
        #[test]
        fn windows_respect_partition(q in 10usize..120, w in 1usize..20, f in 1usize..8, extra in 0usize..20) {
            let test_len = f + extra;
            prop_assume!(q >= w + f + test_len);
            let s = series(&(0..q).map(|i| i as f64).collect::<Vec<_>>());
            let spec = PartitionSpec::new(w, f, test_len).unwrap();
            let train = make_windows(&s, spec, Region::Train).unwrap();
            prop_assert_eq!(train.len(), (q - test_len) - w - f + 1);
            for i in 0..train.len() {
                // target starts immediately after the window
                prop_assert_eq!(train.targets.get(i, 0), train.inputs.get(i, w - 1) + 1.0);
                prop_assert!(train.targets.get(i, f - 1) < (q - test_len) as f64);
            }
            let test = make_windows(&s, spec, Region::Test).unwrap();
            prop_assert_eq!(test.len(), test_len - f + 1);
            prop_assert!(test.targets.as_slice().iter().all(|&v| v >= (q - test_len) as f64));
        }
    }
}
