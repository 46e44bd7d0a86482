//! Unsupervised sketch-to-photo synthesis: a shape stage translating
//! sketches to grayscale photos, then a content stage colorizing them.

mod archive;
pub mod content;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod shape;
pub mod sketchdata;

pub use error::{Error, Result};
