//! Curricular and cyclical confidence-aware loss for time-series learning.
//!
//! * [`numerics`]: Lambert W, loss statistics, `erfc`, seeded RNG.
//! * [`loss`]: the loss family and its confidence closed form.
//! * [`sampler`]: expected selection error, analytic and simulated.
//! * [`data`]: synthetic generators, CSV ingestion, prefix views.
//! * [`trainer`]: small models, wrapped training loops, transfer metrics.
//! * [`suites`]: executable invariant checks shared by tests and the CLI.
//!
//! Data-parallel work goes through [`exec::Exec`]; results never depend on
//! the number of threads.

pub mod data;
pub mod error;
pub mod exec;
pub mod loss;
pub mod numerics;
pub mod sampler;
pub mod suites;
pub mod trainer;

pub use error::{Error, Result};
pub use exec::Exec;
