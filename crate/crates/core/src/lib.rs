//! Net ergodic rate of a multi-cell uplink with compressed backhaul and
//! pilot-based channel estimation, and the training length that maximizes it.
//!
//! * [`system_model`]: variance profiles, quantization noise, MMSE split.
//! * [`det_equiv`]: deterministic-equivalent rate, derivative, closed forms.
//! * [`monte_carlo`]: seeded simulation of the ergodic log-det rate.
//! * [`train_opt`]: optimal training length, deterministic and simulated.
//! * [`experiment`]: sweep/optimum experiments, CSV output and plots.

pub mod det_equiv;
pub mod error;
pub mod experiment;
pub mod monte_carlo;
pub mod system_model;
pub mod train_opt;

pub use error::{Error, Result};
