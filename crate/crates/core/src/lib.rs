//! Ground-truth-free pose error estimation for VI-SLAM trajectories.
//!
//! Repeated trials of the same input sequence disagree more where pose error
//! is high. Evaluating every pair of trials with windowed relative pose error
//! and reducing each window's errors with a robust statistic yields a
//! per-window error estimate that needs no ground truth.

pub mod align;
pub mod classify;
pub mod error;
pub mod pipeline;
pub mod rpe;
pub mod scene;
pub mod sim;
pub mod stats;
pub mod trajectory;
pub mod tum;
pub mod uncertainty;

pub use error::{Error, Result};
