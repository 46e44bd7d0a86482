//! Configuration, checkpoints, training runs, inference and the HTTP service.

pub mod checkpoint;
pub mod config;
pub mod model;
pub mod serve;
pub mod train;

pub use checkpoint::{Checkpoint, RngState, Stage, CHECKPOINT_VERSION};
pub use config::{TrainingConfig, CONFIG_ENV};
pub use model::{content_from_checkpoint, shape_from_checkpoint, Synthesizer};
pub use serve::{router, AppState, Gallery, SynthesisRequest, SynthesisResponse};
pub use train::{prepare_data, train_content, train_shape, RunLock};
