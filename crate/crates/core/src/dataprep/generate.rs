//! Synthetic datasets: a weekly activity pattern and a geometric random walk
//! standing in for stock closing prices.

use serde::{Deserialize, Serialize};

use super::Series;
use crate::error::{Error, Result};
use crate::numkit::Rng;

const DAYS_PER_WEEK: usize = 7;
const HIGH_DAYS: usize = 5;

/// Weekly template: five high-activity days followed by two low ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivitiesParams {
    pub n_series: usize,
    pub length: usize,
    pub samples_per_day: usize,
    pub high_level: f64,
    pub low_level: f64,
    pub noise_sd: f64,
    /// Relative per-day amplitude jitter; each day's level is scaled by a
    /// factor drawn uniformly from `[1 - j, 1 + j)`.
    pub amplitude_jitter: f64,
}

impl Default for ActivitiesParams {
    fn default() -> Self {
        ActivitiesParams {
            n_series: 10,
            length: 3584,
            samples_per_day: 4,
            high_level: 100.0,
            low_level: 20.0,
            noise_sd: 5.0,
            amplitude_jitter: 0.1,
        }
    }
}

impl ActivitiesParams {
    pub fn period(&self) -> usize {
        DAYS_PER_WEEK * self.samples_per_day
    }

    fn validate(&self) -> Result<()> {
        if self.n_series == 0 || self.samples_per_day == 0 {
            return Err(Error::Argument("activities: n_series and samples_per_day must be positive".into()));
        }
        if self.length < self.period() {
            return Err(Error::Argument(format!(
                "activities: length {} is shorter than one week ({} samples)",
                self.length,
                self.period()
            )));
        }
        let finite = [self.high_level, self.low_level, self.noise_sd, self.amplitude_jitter]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.noise_sd < 0.0 || !(0.0..1.0).contains(&self.amplitude_jitter) {
            return Err(Error::Argument(format!(
                "activities: need finite levels, noise_sd >= 0 and jitter in [0, 1) (got {self:?})"
            )));
        }
        Ok(())
    }
}

pub fn gen_activities(rng: &mut Rng, params: &ActivitiesParams) -> Result<Vec<Series>> {
    params.validate()?;
    let spd = params.samples_per_day;
    let days = params.length.div_ceil(spd);
    (0..params.n_series)
        .map(|idx| {
            let mut values = Vec::with_capacity(params.length);
            for day in 0..days {
                let level =
                    if day % DAYS_PER_WEEK < HIGH_DAYS { params.high_level } else { params.low_level };
                let factor = if params.amplitude_jitter > 0.0 {
                    rng.uniform_scalar(1.0 - params.amplitude_jitter, 1.0 + params.amplitude_jitter)
                } else {
                    1.0
                };
                for _ in 0..spd.min(params.length - values.len()) {
                    let noise = if params.noise_sd > 0.0 { params.noise_sd * rng.normal() } else { 0.0 };
                    values.push((level * factor + noise).max(0.0));
                }
            }
            Series::new(format!("activity_{idx:02}"), values)
        })
        .collect()
}

/// Geometric random walk `x[t+1] = x[t] * exp(e)`, `e ~ Normal(0, step_sd²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomWalkParams {
    pub n_series: usize,
    pub length: usize,
    pub start: f64,
    pub step_sd: f64,
}

impl Default for RandomWalkParams {
    fn default() -> Self {
        RandomWalkParams { n_series: 10, length: 3032, start: 100.0, step_sd: 0.015 }
    }
}

pub fn gen_random_walk(rng: &mut Rng, params: &RandomWalkParams) -> Result<Vec<Series>> {
    let ok = params.n_series > 0
        && params.length >= 2
        && params.start.is_finite()
        && params.start > 0.0
        && params.step_sd.is_finite()
        && params.step_sd >= 0.0;
    if !ok {
        return Err(Error::Argument(format!(
            "random walk: need n_series >= 1, length >= 2, start > 0, step_sd >= 0 (got {params:?})"
        )));
    }
    (0..params.n_series)
        .map(|idx| {
            let mut x = params.start;
            let mut values = Vec::with_capacity(params.length);
            values.push(x);
            for _ in 1..params.length {
                if params.step_sd > 0.0 {
                    x *= (params.step_sd * rng.normal()).exp();
                }
                values.push(x);
            }
            Series::new(format!("walk_{idx:02}"), values)
        })
        .collect()
}
