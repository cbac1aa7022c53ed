//! Circadian-rhythm analytics for multi-sensor wearable recordings.
//!
//! The crate turns raw accelerometer, R-R interval, heart-rate and
//! temperature streams into circadian rhythm metrics (cosinor parameters and
//! non-parametric actigraphy measures), chronotype regression models and
//! device-agreement statistics. A seedable synthetic-cohort generator makes
//! the full pipeline verifiable without real recordings.

pub mod chronotype;
pub mod counts;
pub mod error;
pub mod hrv;
pub mod ingest;
pub mod manifest;
pub mod rhythm;
pub mod series;
pub mod special;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use series::{EpochSeries, NonwearReason, SampleSeries, SignalKind, WearInterval, WearMask};
