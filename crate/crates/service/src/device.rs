//! Playback devices. A device replays one sequence per trial index and
//! returns the resulting trajectory estimate. The in-process simulated device
//! stands in for a physical phone; anything implementing [`PlaybackDevice`]
//! can be registered in its place.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use puk_core::pipeline::SequenceSpec;
use puk_core::sim::generate_trial;
use puk_core::trajectory::Trajectory;

/// Everything a device needs to replay a sequence.
#[derive(Debug, Clone)]
pub struct PlaybackInput {
    pub ground_truth: Arc<Trajectory>,
    pub sequence: SequenceSpec,
    pub duration_s: f64,
}

pub trait PlaybackDevice: Send + Sync {
    fn id(&self) -> &str;

    /// Replays the sequence once. Blocks for the playback duration.
    fn play(&self, input: &PlaybackInput, trial_index: u64) -> Result<Trajectory, String>;
}

pub struct SimulatedDevice {
    id: String,
    rt_factor: f64,
    crash_after: Option<usize>,
    played: AtomicUsize,
}

impl SimulatedDevice {
    /// `rt_factor` scales the wall time of one playback: 0 returns at once,
    /// 1 takes the sequence duration.
    pub fn new(id: impl Into<String>, rt_factor: f64) -> Self {
        SimulatedDevice {
            id: id.into(),
            rt_factor: rt_factor.max(0.0),
            crash_after: None,
            played: AtomicUsize::new(0),
        }
    }

    /// Fails every playback after the first `n`.
    pub fn crashing_after(mut self, n: usize) -> Self {
        self.crash_after = Some(n);
        self
    }
}

impl PlaybackDevice for SimulatedDevice {
    fn id(&self) -> &str {
        &self.id
    }

    fn play(&self, input: &PlaybackInput, trial_index: u64) -> Result<Trajectory, String> {
        let count = self.played.fetch_add(1, Ordering::SeqCst);
        if self.rt_factor > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(input.duration_s * self.rt_factor));
        }
        if self.crash_after.is_some_and(|n| count >= n) {
            return Err(format!("device {} crashed during trial {trial_index}", self.id));
        }
        let profile = input.sequence.profile().map_err(|e| e.to_string())?;
        generate_trial(&input.ground_truth, &profile, &input.sequence.noise, trial_index).map_err(|e| e.to_string())
    }
}

/// Devices by id.
#[derive(Clone, Default)]
pub struct DeviceRegistry {
    devices: BTreeMap<String, Arc<dyn PlaybackDevice>>,
}

impl DeviceRegistry {
    pub fn simulated(count: usize, rt_factor: f64) -> Self {
        let mut reg = Self::default();
        for i in 0..count {
            reg.register(SimulatedDevice::new(format!("worker-{i}"), rt_factor));
        }
        reg
    }

    pub fn register(&mut self, device: impl PlaybackDevice + 'static) {
        self.devices.insert(device.id().to_string(), Arc::new(device));
    }

    pub fn get(&self, id: &str) -> Option<Arc<dyn PlaybackDevice>> {
        self.devices.get(id).cloned()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.devices.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }
}

impl std::fmt::Debug for DeviceRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.ids()).finish()
    }
}
