//! Dense matrices, named parameter sets, the Adam optimizer and a
//! finite-difference gradient checker.

mod adam;
mod gradcheck;
mod mat;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_report, relative_error, GradCheckOptions, GradCheckReport};
pub use mat::{dot, sigmoid, Mat};
pub use params::{ParamSet, ParamStore};

/// Global-norm threshold applied to every training step's gradient.
pub const GRAD_CLIP_NORM: f64 = 5.0;
