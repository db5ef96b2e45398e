//! One directory per job under the store root:
//!
//! ```text
//! seq-000001/
//!   payload.json     submitted bundle
//!   job.json         latest job record
//!   events.jsonl     append-only status history
//!   trials/*.tum     playback outputs
//!   result.json      estimation result
//! ```

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use puk_core::trajectory::Trajectory;
use puk_core::tum::write_trajectory_file;
use serde::Serialize;

use crate::error::ServiceResult;
use crate::job::{now_secs, SequenceBundle, SequenceJob};

#[derive(Debug, Clone)]
pub struct JobStore {
    root: PathBuf,
}

fn pretty(value: &impl Serialize) -> ServiceResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(puk_core::Error::from)?;
    s.push('\n');
    Ok(s)
}

/// Write to a sibling temp file, then rename over the target.
fn replace(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

impl JobStore {
    pub fn open(root: impl Into<PathBuf>) -> ServiceResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(JobStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn job_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn create(&self, job: &SequenceJob, bundle: &SequenceBundle) -> ServiceResult<()> {
        let dir = self.job_dir(&job.id);
        fs::create_dir_all(dir.join("trials"))?;
        replace(&dir.join("payload.json"), &pretty(bundle)?)?;
        self.update(job)
    }

    pub fn update(&self, job: &SequenceJob) -> ServiceResult<()> {
        let dir = self.job_dir(&job.id);
        replace(&dir.join("job.json"), &pretty(job)?)?;
        let event = serde_json::json!({
            "at": now_secs(),
            "status": job.status,
            "failure": job.failure,
        });
        let mut log = OpenOptions::new().create(true).append(true).open(dir.join("events.jsonl"))?;
        writeln!(log, "{event}")?;
        Ok(())
    }

    pub fn write_trials(&self, id: &str, trials: &[Trajectory]) -> ServiceResult<()> {
        let dir = self.job_dir(id).join("trials");
        for t in trials {
            write_trajectory_file(t, dir.join(format!("{}.tum", t.id())))?;
        }
        Ok(())
    }

    pub fn discard_trials(&self, id: &str) -> ServiceResult<()> {
        let dir = self.job_dir(id).join("trials");
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
            fs::create_dir_all(&dir)?;
        }
        Ok(())
    }

    /// Persists the result and returns the exact bytes written.
    pub fn write_result(&self, id: &str, result: &impl Serialize) -> ServiceResult<String> {
        let text = pretty(result)?;
        replace(&self.job_dir(id).join("result.json"), &text)?;
        Ok(text)
    }
}
