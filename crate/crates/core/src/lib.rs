//! Univariate time-series forecasting with recurrent networks written from
//! scratch.
//!
//! The pipeline: normalize each series onto [0, 1], cut it into sliding
//! windows, train an LSTM or GRU (one recurrent layer and a linear head
//! emitting all `f` future steps at once) with Adam on MSE, then score the
//! test region with RMSE and directional accuracy against a persistence
//! baseline.
//!
//! - [`numkit`]: dense matrices and the seeded generator
//! - [`cells`]: LSTM/GRU forward and backward passes, dense head
//! - [`training`]: Adam, the training loop, checkpoint files
//! - [`dataprep`]: normalization, windowing, synthetic data, CSV input
//! - [`evalkit`]: baseline, metrics, aggregation
//! - [`cli`]: experiment configuration, pipeline stages and plots

pub mod cells;
pub mod cli;
pub mod dataprep;
pub mod error;
pub mod evalkit;
pub mod numkit;
pub mod training;

pub use error::{Error, Result};
