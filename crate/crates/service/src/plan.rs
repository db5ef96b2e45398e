//! Trial assignment and the playback wait-time model `L_p = d * ceil(T / D)`.

use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub worker: String,
    /// Trial indices this worker plays, in order.
    pub trials: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybackPlan {
    pub assignments: Vec<Assignment>,
    pub devices: usize,
    pub wait_time_s: f64,
}

impl PlaybackPlan {
    pub fn count_for(&self, worker: &str) -> usize {
        self.assignments
            .iter()
            .find(|a| a.worker == worker)
            .map_or(0, |a| a.trials.len())
    }

    pub fn total_trials(&self) -> usize {
        self.assignments.iter().map(|a| a.trials.len()).sum()
    }
}

pub fn wait_time(duration_s: f64, trials: usize, devices: usize) -> f64 {
    duration_s * trials.div_ceil(devices) as f64
}

/// Splits `trials` over `idle` workers in contiguous blocks; the first
/// `trials % D` workers play one extra trial.
pub fn assign(duration_s: f64, trials: usize, idle: &[String]) -> ServiceResult<PlaybackPlan> {
    if idle.is_empty() {
        return Err(ServiceError::NoIdleWorkers);
    }
    if trials == 0 {
        return Err(ServiceError::BadRequest("nothing to play".into()));
    }
    let d = idle.len();
    let (base, extra) = (trials / d, trials % d);
    let mut next = 0u64;
    let assignments = idle
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let count = (base + usize::from(i < extra)) as u64;
            let block = (next..next + count).collect();
            next += count;
            Assignment {
                worker: w.clone(),
                trials: block,
            }
        })
        .filter(|a| !a.trials.is_empty())
        .collect();
    Ok(PlaybackPlan {
        assignments,
        devices: d,
        wait_time_s: wait_time(duration_s, trials, d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn workers(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("worker-{i}")).collect()
    }

    #[test]
    fn reference_instances() {
        let p = assign(15.0, 5, &workers(1)).unwrap();
        assert_eq!(p.count_for("worker-0"), 5);
        assert_eq!(p.wait_time_s, 75.0);

        let p = assign(141.0, 10, &workers(3)).unwrap();
        let counts: Vec<_> = p.assignments.iter().map(|a| a.trials.len()).collect();
        assert_eq!(counts, vec![4, 3, 3]);
        assert_eq!(p.wait_time_s, 564.0);

        let p = assign(15.0, 4, &workers(4)).unwrap();
        assert!(p.assignments.iter().all(|a| a.trials.len() == 1));
        assert_eq!(p.wait_time_s, 15.0);
    }

    #[test]
    fn more_workers_than_trials() {
        let p = assign(2.0, 3, &workers(5)).unwrap();
        assert_eq!(p.assignments.len(), 3);
        assert_eq!(p.devices, 5);
        assert_eq!(p.wait_time_s, 2.0);
    }

    #[test]
    fn no_idle_workers() {
        assert!(matches!(assign(1.0, 2, &[]), Err(ServiceError::NoIdleWorkers)));
    }
}
