//! Hierarchical grasp networks: edge/cloud offloading driven by calibrated
//! edge confidence, evaluated by accuracy, latency and user upsetness.

pub mod calibration;
pub mod controller;
pub mod error;
pub mod experience;
pub mod reliability;
pub mod svg;
pub mod synth;
pub mod trace;

pub use error::{HgnError, Result};
pub use trace::{ObjectTag, PredictionRecord, Trace};
