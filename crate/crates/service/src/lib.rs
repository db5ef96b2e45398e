//! HTTP service that plays a submitted sequence on a pool of playback
//! workers, collects one trajectory estimate per trial and returns per-window
//! pose error estimates.
//!
//! Routes:
//!
//! | method | path                        | body                                   |
//! |--------|-----------------------------|----------------------------------------|
//! | POST   | `/sequences`                | [`SequenceBundle`] -> [`SequenceJob`]  |
//! | GET    | `/sequences/{id}`           | [`SequenceJob`]                        |
//! | GET    | `/sequences/{id}/result`    | [`EstimationResult`] once done         |
//! | GET    | `/workers`                  | list of [`WorkerRecord`]               |
//! | POST   | `/workers/{id}/heartbeat`   | [`WorkerRecord`]                       |

pub mod device;
pub mod error;
pub mod http;
pub mod job;
pub mod orchestrator;
pub mod plan;
pub mod store;

pub use device::{DeviceRegistry, PlaybackDevice, PlaybackInput, SimulatedDevice};
pub use error::{ServiceError, ServiceResult};
pub use http::{router, serve, spawn, RunningService};
pub use job::{EstimationResult, JobStatus, SequenceBundle, SequenceJob, WindowEstimate};
pub use orchestrator::{Orchestrator, ServiceConfig, WorkerRecord, WorkerStatus};
pub use plan::{assign, wait_time, Assignment, PlaybackPlan};
