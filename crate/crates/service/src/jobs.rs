//! In-process vitals job queue on a bounded worker pool.
//!
//! A job moves `queued -> running -> done | failed` and never back. Each job
//! owns its frame sequence; the estimator runs on the blocking pool once a
//! worker permit is free.

use std::collections::HashMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use uuid::Uuid;
use vitalcam_core::frameio::FrameSequence;
use vitalcam_core::vitals::{self, EstimateOptions, VitalKind, VitalsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_finished(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalsJob {
    pub job_id: Uuid,
    pub kind: VitalKind,
    pub state: JobState,
    /// Frames and rate the job was submitted with.
    pub input: JobInput,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<VitalsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInput {
    pub source: String,
    pub frames: usize,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug)]
pub struct JobQueue {
    jobs: RwLock<HashMap<Uuid, VitalsJob>>,
    permits: Arc<Semaphore>,
}

impl JobQueue {
    pub fn new(workers: usize) -> Self {
        Self {
            jobs: RwLock::new(HashMap::new()),
            permits: Arc::new(Semaphore::new(workers.max(1))),
        }
    }

    pub fn get(&self, id: &Uuid) -> Option<VitalsJob> {
        self.jobs.read().get(id).cloned()
    }

    /// Records the job as queued and schedules it. Must be called from
    /// within a tokio runtime.
    pub fn submit(
        self: &Arc<Self>,
        kind: VitalKind,
        seq: FrameSequence,
        opts: EstimateOptions,
    ) -> Uuid {
        let job_id = Uuid::new_v4();
        let job = VitalsJob {
            job_id,
            kind,
            state: JobState::Queued,
            input: JobInput {
                source: seq.source_id().to_string(),
                frames: seq.len(),
                fps: seq.fps(),
                width: seq.width(),
                height: seq.height(),
            },
            result: None,
            error: None,
            created_at: Utc::now(),
            started_at: None,
            finished_at: None,
        };
        self.jobs.write().insert(job_id, job);

        let queue = Arc::clone(self);
        tokio::spawn(async move {
            let _permit = match Arc::clone(&queue.permits).acquire_owned().await {
                Ok(p) => p,
                Err(_) => {
                    queue.finish(job_id, Err("worker pool closed".into()));
                    return;
                }
            };
            queue.transition(job_id, |j| {
                j.state = JobState::Running;
                j.started_at = Some(Utc::now());
            });
            let outcome =
                tokio::task::spawn_blocking(move || vitals::estimate(kind, &seq, &opts)).await;
            let outcome = match outcome {
                Ok(Ok(report)) => Ok(report),
                Ok(Err(e)) => Err(e.to_string()),
                Err(e) => Err(format!("estimator crashed: {e}")),
            };
            if let Err(msg) = &outcome {
                tracing::warn!(%job_id, %kind, error = %msg, "vitals job failed");
            }
            queue.finish(job_id, outcome);
        });
        job_id
    }

    fn finish(&self, id: Uuid, outcome: Result<VitalsReport, String>) {
        self.transition(id, |j| {
            match outcome {
                Ok(report) => {
                    j.state = JobState::Done;
                    j.result = Some(report);
                }
                Err(msg) => {
                    j.state = JobState::Failed;
                    j.error = Some(msg);
                }
            }
            j.finished_at = Some(Utc::now());
        });
    }

    fn transition(&self, id: Uuid, f: impl FnOnce(&mut VitalsJob)) {
        let mut jobs = self.jobs.write();
        if let Some(job) = jobs.get_mut(&id) {
            let before = job.state;
            f(job);
            debug_assert!(
                job.state > before,
                "job {id}: {before:?} -> {:?}",
                job.state
            );
        }
    }
}
