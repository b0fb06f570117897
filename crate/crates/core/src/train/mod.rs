//! Parameter learning and structure learning.

mod em;
mod log;
mod structure;

pub use em::{em_full_batch, em_stochastic, em_update, em_with_validation, EmConfig, ScheduleSegment};
pub use log::{EpochRecord, LearnerState, Stage, TrainLog};
pub use structure::{compress, structure_learn, Compression, LoopConfig};
