//! Numeric kernels shared by the loss, the simulators and the trainer.

mod lambert;
mod rng;
mod special;
mod stats;

pub use lambert::{lambert_w0, BRANCH_POINT};
pub use rng::{derive_seed, RngAlgorithm, SeededRng};
pub use special::{erfc, std_normal_cdf, std_normal_pdf};
pub use stats::{loss_stats, LossStats};
