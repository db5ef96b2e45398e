use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use puk_core::classify::{ClassBoundaries, ErrorClass};
use puk_core::pipeline::SequenceSpec;
use puk_core::trajectory::Timestamp;

use crate::error::{ServiceError, ServiceResult};
use crate::plan::PlaybackPlan;

/// Seconds since the Unix epoch.
pub fn now_secs() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Received,
    Assigned,
    Playing,
    Estimating,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }

    /// Forward-only: each step moves to the next state, and any live state
    /// may fail.
    pub fn can_advance_to(self, next: JobStatus) -> bool {
        use JobStatus::*;
        match (self, next) {
            (Done | Failed, _) => false,
            (_, Failed) => true,
            (Received, Assigned) | (Assigned, Playing) | (Playing, Estimating) | (Estimating, Done) => true,
            _ => false,
        }
    }
}

/// Body of `POST /sequences`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceBundle {
    pub sequence: SequenceSpec,
    pub trials: usize,
    /// Recorded trajectory in TUM text form; replaces the generated ground
    /// truth when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<ClassBoundaries>,
}

impl SequenceBundle {
    pub fn validate(&self) -> ServiceResult<()> {
        if self.trials < 2 {
            return Err(ServiceError::BadRequest(format!(
                "pairwise estimation needs at least 2 trials, got {}",
                self.trials
            )));
        }
        self.sequence.profile().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        if let Some(name) = &self.setting {
            puk_core::uncertainty::builtin_registry()
                .get(name)
                .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceJob {
    pub id: String,
    pub duration_s: f64,
    pub trials: usize,
    pub status: JobStatus,
    pub created_at: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlaybackPlan>,
    /// Pairwise trajectory evaluations performed for the estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl SequenceJob {
    pub fn new(id: String, duration_s: f64, trials: usize) -> Self {
        SequenceJob {
            id,
            duration_s,
            trials,
            status: JobStatus::Received,
            created_at: now_secs(),
            plan: None,
            evaluations: None,
            failure: None,
        }
    }

    pub fn advance(&mut self, next: JobStatus) -> ServiceResult<()> {
        if !self.status.can_advance_to(next) {
            return Err(ServiceError::Internal(format!(
                "job {} cannot move from {:?} to {next:?}",
                self.id, self.status
            )));
        }
        self.status = next;
        Ok(())
    }

    pub fn fail(&mut self, cause: impl Into<String>) {
        if !self.status.is_terminal() {
            self.status = JobStatus::Failed;
            self.failure = Some(cause.into());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    pub window_index: usize,
    pub mid_timestamp: Timestamp,
    pub estimate_m: f64,
    pub class: ErrorClass,
}

/// Body of `GET /sequences/{id}/result`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub job_id: String,
    pub setting: String,
    pub n_trials: usize,
    pub evaluations: usize,
    pub window_frames: usize,
    pub boundaries: ClassBoundaries,
    pub mean_estimate_m: f64,
    pub windows: Vec<WindowEstimate>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use JobStatus::*;

    #[test]
    fn status_only_moves_forward() {
        let order = [Received, Assigned, Playing, Estimating, Done];
        for (i, a) in order.iter().enumerate() {
            for (j, b) in order.iter().enumerate() {
                assert_eq!(a.can_advance_to(*b), j == i + 1, "{a:?} -> {b:?}");
            }
        }
        for s in [Received, Assigned, Playing, Estimating] {
            assert!(s.can_advance_to(Failed));
        }
        assert!(!Done.can_advance_to(Failed));
        assert!(!Failed.can_advance_to(Received));
    }

    #[test]
    fn failing_a_finished_job_is_ignored() {
        let mut job = SequenceJob::new("seq-000001".into(), 2.0, 2);
        for s in [Assigned, Playing, Estimating, Done] {
            job.advance(s).unwrap();
        }
        job.fail("late crash");
        assert_eq!(job.status, Done);
        assert!(job.failure.is_none());
        assert!(job.advance(Playing).is_err());
    }
}
