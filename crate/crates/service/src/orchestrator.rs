//! Job lifecycle: submission, FIFO scheduling onto idle workers, playback,
//! estimation. All assignment decisions run on a single scheduler task; the
//! HTTP handlers only enqueue work and read state.

use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;
use std::sync::{Arc, Weak};

use log::{info, warn};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use puk_core::pipeline::{estimate_trials, PipelineConfig};
use puk_core::sim::trial_seed;
use puk_core::trajectory::{Trajectory, TrialSet};
use puk_core::tum::{parse_trajectory_str, TrajectoryFormat};

use crate::device::{DeviceRegistry, PlaybackInput};
use crate::error::{ServiceError, ServiceResult};
use crate::job::{now_secs, EstimationResult, JobStatus, SequenceBundle, SequenceJob, WindowEstimate};
use crate::plan::{assign, PlaybackPlan};
use crate::store::JobStore;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub workers: usize,
    /// Wall seconds per second of sequence during playback; 0 is instant.
    pub rt_factor: f64,
    pub seed: u64,
    pub jobs_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            workers: 4,
            rt_factor: 0.0,
            seed: 0,
            jobs_dir: PathBuf::from("puk-jobs"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkerStatus {
    Idle,
    Busy,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRecord {
    pub id: String,
    pub status: WorkerStatus,
    pub last_heartbeat: f64,
}

struct JobEntry {
    job: SequenceJob,
    bundle: SequenceBundle,
    input: PlaybackInput,
    result: Option<String>,
}

#[derive(Default)]
struct State {
    jobs: BTreeMap<String, JobEntry>,
    queue: VecDeque<String>,
    workers: BTreeMap<String, WorkerRecord>,
    next_id: u64,
}

pub struct Orchestrator {
    state: Mutex<State>,
    devices: DeviceRegistry,
    store: JobStore,
    config: ServiceConfig,
    wake: mpsc::UnboundedSender<()>,
}

impl Orchestrator {
    /// Starts the scheduler task on the current tokio runtime.
    pub fn start(config: ServiceConfig, devices: DeviceRegistry) -> ServiceResult<Arc<Self>> {
        let store = JobStore::open(&config.jobs_dir)?;
        let now = now_secs();
        let workers = devices
            .ids()
            .map(|id| {
                let rec = WorkerRecord {
                    id: id.to_string(),
                    status: WorkerStatus::Idle,
                    last_heartbeat: now,
                };
                (id.to_string(), rec)
            })
            .collect();
        let (wake, mut rx) = mpsc::unbounded_channel();
        let orch = Arc::new(Orchestrator {
            state: Mutex::new(State {
                workers,
                next_id: 1,
                ..State::default()
            }),
            devices,
            store,
            config,
            wake,
        });
        let weak: Weak<Orchestrator> = Arc::downgrade(&orch);
        tokio::spawn(async move {
            while rx.recv().await.is_some() {
                let Some(orch) = weak.upgrade() else { break };
                orch.dispatch();
            }
        });
        Ok(orch)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn store(&self) -> &JobStore {
        &self.store
    }

    fn nudge(&self) {
        // the receiver only disappears with the runtime
        let _ = self.wake.send(());
    }

    fn ground_truth(&self, bundle: &SequenceBundle) -> ServiceResult<Trajectory> {
        let bad = |e: puk_core::Error| ServiceError::BadRequest(e.to_string());
        let gt = match &bundle.trajectory {
            Some(text) => parse_trajectory_str(text, "ground_truth", "payload", TrajectoryFormat::Tum).map_err(bad)?,
            None => bundle.sequence.ground_truth().map_err(bad)?,
        };
        let windows = gt.windows(bundle.sequence.window_frames).map_err(bad)?.len();
        if windows != bundle.sequence.difficulty.len() {
            return Err(ServiceError::BadRequest(format!(
                "difficulty lists {} windows, trajectory has {windows}",
                bundle.sequence.difficulty.len()
            )));
        }
        Ok(gt)
    }

    pub fn submit(&self, bundle: SequenceBundle) -> ServiceResult<SequenceJob> {
        bundle.validate()?;
        let gt = self.ground_truth(&bundle)?;
        let mut sequence = bundle.sequence.clone();
        sequence.noise.seed = trial_seed(self.config.seed, bundle.sequence.noise.seed);
        let input = PlaybackInput {
            duration_s: gt.duration(),
            ground_truth: Arc::new(gt),
            sequence,
        };

        let job = {
            let mut st = self.state.lock();
            let id = format!("seq-{:06}", st.next_id);
            st.next_id += 1;
            let job = SequenceJob::new(id.clone(), input.duration_s, bundle.trials);
            self.store.create(&job, &bundle)?;
            st.queue.push_back(id.clone());
            st.jobs.insert(
                id,
                JobEntry {
                    job: job.clone(),
                    bundle,
                    input,
                    result: None,
                },
            );
            job
        };
        info!("received {} (d = {:.3} s, T = {})", job.id, job.duration_s, job.trials);
        self.nudge();
        Ok(job)
    }

    pub fn job(&self, id: &str) -> ServiceResult<SequenceJob> {
        let st = self.state.lock();
        st.jobs
            .get(id)
            .map(|e| e.job.clone())
            .ok_or_else(|| ServiceError::NotFound(format!("sequence {id}")))
    }

    /// Result file contents, available once the job is done.
    pub fn result(&self, id: &str) -> ServiceResult<String> {
        let st = self.state.lock();
        let entry = st.jobs.get(id).ok_or_else(|| ServiceError::NotFound(format!("sequence {id}")))?;
        match (&entry.result, entry.job.status) {
            (Some(text), JobStatus::Done) => Ok(text.clone()),
            (_, JobStatus::Failed) => Err(ServiceError::NotReady(format!(
                "sequence {id} failed: {}",
                entry.job.failure.as_deref().unwrap_or("unknown cause")
            ))),
            (_, status) => Err(ServiceError::NotReady(format!("sequence {id} is {status:?}"))),
        }
    }

    pub fn workers(&self) -> Vec<WorkerRecord> {
        self.state.lock().workers.values().cloned().collect()
    }

    pub fn heartbeat(&self, id: &str) -> ServiceResult<WorkerRecord> {
        let rec = {
            let mut st = self.state.lock();
            let rec = st
                .workers
                .get_mut(id)
                .ok_or_else(|| ServiceError::NotFound(format!("worker {id}")))?;
            rec.last_heartbeat = now_secs();
            if rec.status == WorkerStatus::Offline {
                rec.status = WorkerStatus::Idle;
            }
            rec.clone()
        };
        self.nudge();
        Ok(rec)
    }

    /// Moves queued jobs onto idle workers, oldest first.
    fn dispatch(self: &Arc<Self>) {
        loop {
            let mut st = self.state.lock();
            let Some(id) = st.queue.front().cloned() else { return };
            let idle: Vec<String> = st
                .workers
                .values()
                .filter(|w| w.status == WorkerStatus::Idle)
                .map(|w| w.id.clone())
                .collect();
            if idle.is_empty() {
                return;
            }
            st.queue.pop_front();
            let Some(entry) = st.jobs.get_mut(&id) else { continue };
            let plan = match assign(entry.job.duration_s, entry.job.trials, &idle) {
                Ok(plan) => plan,
                Err(e) => {
                    entry.job.fail(e.to_string());
                    let _ = self.store.update(&entry.job);
                    continue;
                }
            };
            entry.job.plan = Some(plan.clone());
            if let Err(e) = entry.job.advance(JobStatus::Assigned).and_then(|_| self.store.update(&entry.job)) {
                entry.job.fail(e.to_string());
                continue;
            }
            for a in &plan.assignments {
                if let Some(w) = st.workers.get_mut(&a.worker) {
                    w.status = WorkerStatus::Busy;
                }
            }
            drop(st);
            info!("assigned {id}: {} devices, L_p = {} s", plan.devices, plan.wait_time_s);
            tokio::spawn(Arc::clone(self).run(id, plan));
        }
    }

    fn transition(&self, id: &str, next: JobStatus) -> ServiceResult<()> {
        let mut st = self.state.lock();
        let entry = st.jobs.get_mut(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        entry.job.advance(next)?;
        self.store.update(&entry.job)
    }

    fn release(&self, plan: &PlaybackPlan, crashed: &[String]) {
        {
            let mut st = self.state.lock();
            for a in &plan.assignments {
                if let Some(w) = st.workers.get_mut(&a.worker) {
                    w.status = if crashed.contains(&a.worker) {
                        WorkerStatus::Offline
                    } else {
                        WorkerStatus::Idle
                    };
                }
            }
        }
        self.nudge();
    }

    fn fail(&self, id: &str, cause: &str) {
        warn!("{id} failed: {cause}");
        if let Err(e) = self.store.discard_trials(id) {
            warn!("could not discard trials of {id}: {e}");
        }
        let mut st = self.state.lock();
        if let Some(entry) = st.jobs.get_mut(id) {
            entry.job.fail(cause);
            let _ = self.store.update(&entry.job);
        }
    }

    async fn run(self: Arc<Self>, id: String, plan: PlaybackPlan) {
        if let Err(e) = self.transition(&id, JobStatus::Playing) {
            self.release(&plan, &[]);
            return self.fail(&id, &e.to_string());
        }
        let input = match self.state.lock().jobs.get(&id) {
            Some(e) => e.input.clone(),
            None => return,
        };

        let mut tasks = Vec::new();
        for a in &plan.assignments {
            let Some(device) = self.devices.get(&a.worker) else {
                self.release(&plan, &[]);
                return self.fail(&id, &format!("unknown worker {}", a.worker));
            };
            let (input, trials, worker) = (input.clone(), a.trials.clone(), a.worker.clone());
            tasks.push(tokio::task::spawn_blocking(move || {
                trials
                    .iter()
                    .map(|&t| device.play(&input, t))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|cause| (worker, cause))
            }));
        }

        let mut trials = Vec::new();
        let mut crashed = Vec::new();
        let mut causes = Vec::new();
        for task in tasks {
            match task.await {
                Ok(Ok(mut ts)) => trials.append(&mut ts),
                Ok(Err((worker, cause))) => {
                    causes.push(ServiceError::Playback { worker: worker.clone(), cause }.to_string());
                    crashed.push(worker);
                }
                Err(join) => causes.push(format!("playback task aborted: {join}")),
            }
        }
        self.release(&plan, &crashed);
        if !causes.is_empty() {
            return self.fail(&id, &causes.join("; "));
        }

        trials.sort_by(|a, b| a.id().cmp(b.id()));
        let outcome = async {
            self.store.write_trials(&id, &trials)?;
            self.transition(&id, JobStatus::Estimating)?;
            let bundle = self.state.lock().jobs.get(&id).map(|e| e.bundle.clone());
            let bundle = bundle.ok_or_else(|| ServiceError::NotFound(id.clone()))?;
            let job_id = id.clone();
            let result = tokio::task::spawn_blocking(move || estimate(&job_id, &bundle, trials))
                .await
                .map_err(|e| ServiceError::Internal(e.to_string()))??;
            let text = self.store.write_result(&id, &result)?;
            let mut st = self.state.lock();
            let entry = st.jobs.get_mut(&id).ok_or_else(|| ServiceError::NotFound(id.clone()))?;
            entry.job.evaluations = Some(result.evaluations);
            entry.result = Some(text);
            entry.job.advance(JobStatus::Done)?;
            self.store.update(&entry.job)
        }
        .await;
        match outcome {
            Ok(()) => info!("{id} done"),
            Err(e) => self.fail(&id, &e.to_string()),
        }
    }
}

/// Pairwise estimate, classes and mid-frame timestamps for one job.
fn estimate(id: &str, bundle: &SequenceBundle, trials: Vec<Trajectory>) -> ServiceResult<EstimationResult> {
    let mut cfg = PipelineConfig::default();
    cfg.rpe.window_frames = bundle.sequence.window_frames;
    if let Some(s) = &bundle.setting {
        cfg.setting = s.clone();
    }
    if let Some(b) = bundle.boundaries {
        cfg.boundaries = b;
    }
    let set = TrialSet::estimation(trials)?;
    let report = estimate_trials(&set, &cfg)?;
    Ok(EstimationResult {
        job_id: id.to_string(),
        setting: report.setting.clone().unwrap_or_default(),
        n_trials: report.n_trials,
        evaluations: report.evaluations,
        window_frames: report.window_frames,
        boundaries: report.boundaries,
        mean_estimate_m: report.mean_error_m,
        windows: report
            .windows
            .iter()
            .map(|w| WindowEstimate {
                window_index: w.window_index,
                mid_timestamp: w.mid_timestamp,
                estimate_m: w.error_m,
                class: w.class,
            })
            .collect(),
    })
}
