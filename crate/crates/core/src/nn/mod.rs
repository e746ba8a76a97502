//! Parameters, optimizer, layers and verification tooling.

pub mod checkpoint;
mod gradcheck;
pub mod layers;
mod params;

pub use gradcheck::{grad_check, relative_error, CoordinateCheck, GradCheckReport, DEFAULT_FIRST_STEP, MIN_COORDINATES, REL_ERROR_FLOOR};
pub use layers::{LayerKind, MessagePassing, Mode};
pub use params::{AdamConfig, ParamEntry, ParamStore};
