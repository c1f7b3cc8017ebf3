//! Real-time multimodal physiological emotion recognition.

pub mod alignment;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod features;
pub mod fusion;
pub mod model;
pub mod preprocess;
pub mod signal;
pub mod synth;
pub mod training;
pub mod trial_io;

pub use error::{Error, ErrorKind, Result};
