//! Run registry for the service: lifecycle, bounded concurrency,
//! persistence under a runs directory, cancellation and event fan-out.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Semaphore};

use super::export::{metrics_line, ExportBundle};
use crate::error::{Error, Result};
use crate::federate::{DataSources, RoundMetrics, RunOptions, Simulation, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Pending,
    Running,
    Completed,
    Failed,
    Cancelled,
}

impl RunStatus {
    pub const ALL: [RunStatus; 5] = [
        RunStatus::Pending,
        RunStatus::Running,
        RunStatus::Completed,
        RunStatus::Failed,
        RunStatus::Cancelled,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, RunStatus::Completed | RunStatus::Failed | RunStatus::Cancelled)
    }

    /// Position along PENDING → RUNNING → terminal.
    pub fn stage(self) -> u8 {
        match self {
            RunStatus::Pending => 0,
            RunStatus::Running => 1,
            _ => 2,
        }
    }

    pub fn can_transition_to(self, next: RunStatus) -> bool {
        use RunStatus::*;
        matches!(
            (self, next),
            (Pending, Running | Cancelled | Failed) | (Running, Completed | Failed | Cancelled)
        )
    }
}

/// Public view of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHandle {
    pub id: String,
    pub status: RunStatus,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub rounds_completed: usize,
    pub total_rounds: usize,
    pub config: SimulationConfig,
}

/// Next item of a run's event stream.
#[derive(Debug, Clone, PartialEq)]
pub enum RunEvent {
    Round(RoundMetrics),
    Status(Box<RunHandle>),
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("no run with id {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("too many pending runs; retry later")]
    QueueFull,
    #[error(transparent)]
    Invalid(#[from] Error),
}

#[derive(Debug, Clone)]
pub struct RegistryConfig {
    pub runs_dir: PathBuf,
    pub sources: DataSources,
    pub max_concurrent_runs: usize,
    pub max_pending_runs: usize,
    pub client_threads: Option<usize>,
}

impl RegistryConfig {
    pub fn new(runs_dir: impl Into<PathBuf>, sources: DataSources) -> Self {
        Self {
            runs_dir: runs_dir.into(),
            sources,
            max_concurrent_runs: 2,
            max_pending_runs: 16,
            client_threads: None,
        }
    }
}

struct RunState {
    handle: RunHandle,
    history: Vec<RoundMetrics>,
    parameters: Vec<f64>,
    log: String,
}

pub struct RunEntry {
    state: Mutex<RunState>,
    version: watch::Sender<u64>,
    cancel: Arc<AtomicBool>,
    dir: PathBuf,
}

impl RunEntry {
    fn lock(&self) -> MutexGuard<'_, RunState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn bump(&self) {
        self.version.send_modify(|v| *v += 1);
    }

    pub fn handle(&self) -> RunHandle {
        self.lock().handle.clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.version.subscribe()
    }

    /// First round after `after`, else the terminal status once every round
    /// has been delivered, else `None` (wait for a change).
    pub fn next_event(&self, after: usize) -> Option<RunEvent> {
        let st = self.lock();
        if let Some(m) = st.history.iter().find(|m| m.round > after) {
            return Some(RunEvent::Round(m.clone()));
        }
        st.handle
            .status
            .is_terminal()
            .then(|| RunEvent::Status(Box::new(st.handle.clone())))
    }

    fn transition(&self, next: RunStatus, message: Option<String>) -> bool {
        let mut st = self.lock();
        if !st.handle.status.can_transition_to(next) {
            return false;
        }
        st.handle.status = next;
        st.handle.updated_at = Utc::now();
        if message.is_some() {
            st.handle.message = message;
        }
        let line = format!(
            "status {:?}{}",
            next,
            st.handle.message.as_deref().map(|m| format!(": {m}")).unwrap_or_default()
        );
        st.log.push_str(&line);
        st.log.push('\n');
        persist_state(&self.dir, &st);
        drop(st);
        self.bump();
        true
    }

    fn push_round(&self, m: &RoundMetrics) {
        let mut st = self.lock();
        st.history.push(m.clone());
        st.handle.rounds_completed = m.round;
        st.handle.updated_at = Utc::now();
        let line = metrics_line(m, st.handle.total_rounds);
        st.log.push_str(&line);
        st.log.push('\n');
        if let Ok(json) = serde_json::to_string(m) {
            let appended = OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.dir.join("metrics.jsonl"))
                .and_then(|mut f| writeln!(f, "{json}"));
            if let Err(e) = appended {
                log::warn!("could not append metrics for run {}: {e}", st.handle.id);
            }
        }
        drop(st);
        self.bump();
    }

    pub fn export(&self) -> std::result::Result<Vec<u8>, RegistryError> {
        let st = self.lock();
        if !matches!(st.handle.status, RunStatus::Completed | RunStatus::Cancelled) {
            return Err(RegistryError::Conflict(format!(
                "run is {:?}; export needs COMPLETED or CANCELLED",
                st.handle.status
            )));
        }
        let bundle = ExportBundle::new(&st.handle.config, &st.history, &st.parameters, st.log.clone())?;
        Ok(bundle.to_zip()?)
    }
}

fn write_atomic(path: &Path, body: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, body)?;
    fs::rename(tmp, path)
}

fn persist_state(dir: &Path, st: &RunState) {
    let result = serde_json::to_vec_pretty(&st.handle)
        .map_err(std::io::Error::other)
        .and_then(|b| write_atomic(&dir.join("status.json"), &b))
        .and_then(|_| {
            let params = serde_json::to_vec(&st.parameters).map_err(std::io::Error::other)?;
            write_atomic(&dir.join("parameters.json"), &params)
        })
        .and_then(|_| fs::write(dir.join("run.log"), &st.log));
    if let Err(e) = result {
        log::warn!("could not persist run {}: {e}", st.handle.id);
    }
}

pub struct Registry {
    config: RegistryConfig,
    runs: Mutex<HashMap<String, Arc<RunEntry>>>,
    slots: Arc<Semaphore>,
}

impl Registry {
    /// Opens the runs directory, reloading earlier runs. Runs that were
    /// still pending or running when the service stopped become FAILED.
    pub fn open(config: RegistryConfig) -> Result<Arc<Self>> {
        fs::create_dir_all(&config.runs_dir).map_err(|e| Error::io(&config.runs_dir, e))?;
        let mut runs = HashMap::new();
        let listing = fs::read_dir(&config.runs_dir).map_err(|e| Error::io(&config.runs_dir, e))?;
        for dir in listing.flatten().map(|e| e.path()).filter(|p| p.is_dir()) {
            match load_run(&dir) {
                Ok(entry) => {
                    let id = entry.handle().id;
                    runs.insert(id, Arc::new(entry));
                }
                Err(e) => log::warn!("skipping {}: {e}", dir.display()),
            }
        }
        let slots = Arc::new(Semaphore::new(config.max_concurrent_runs.max(1)));
        Ok(Arc::new(Self {
            config,
            runs: Mutex::new(runs),
            slots,
        }))
    }

    pub fn sources(&self) -> &DataSources {
        &self.config.sources
    }

    fn runs(&self) -> MutexGuard<'_, HashMap<String, Arc<RunEntry>>> {
        self.runs.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn entry(&self, id: &str) -> std::result::Result<Arc<RunEntry>, RegistryError> {
        self.runs()
            .get(id)
            .cloned()
            .ok_or_else(|| RegistryError::NotFound(id.to_string()))
    }

    pub fn get(&self, id: &str) -> std::result::Result<RunHandle, RegistryError> {
        Ok(self.entry(id)?.handle())
    }

    pub fn list(&self) -> Vec<RunHandle> {
        let mut all: Vec<RunHandle> = self.runs().values().map(|e| e.handle()).collect();
        all.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        all
    }

    /// Validates and sets up a run, then queues it. Blocking: the dataset
    /// is loaded and preprocessed here so every config error surfaces
    /// before a handle exists. Must be called inside a tokio runtime.
    pub fn submit(self: &Arc<Self>, config: SimulationConfig) -> std::result::Result<RunHandle, RegistryError> {
        config.validate()?;
        let corpus = config.dataset.load(&self.config.sources).map_err(|e| match e {
            Error::Validation(v) => Error::Validation(v),
            other => Error::Validation(vec![crate::error::FieldError::new("dataset", other.to_string())]),
        })?;
        let options = RunOptions {
            client_threads: self.config.client_threads,
            record_wall_time: true,
        };
        let sim = Simulation::new(config.clone(), corpus, options)?;

        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.config.runs_dir.join(&id);
        let now = Utc::now();
        let handle = RunHandle {
            id: id.clone(),
            status: RunStatus::Pending,
            created_at: now,
            updated_at: now,
            message: None,
            rounds_completed: 0,
            total_rounds: config.global_rounds,
            config,
        };
        let state = RunState {
            handle: handle.clone(),
            history: Vec::new(),
            parameters: sim.global().parameters.clone(),
            log: format!("run {id} created\n"),
        };
        let entry = Arc::new(RunEntry {
            state: Mutex::new(state),
            version: watch::channel(0).0,
            cancel: Arc::new(AtomicBool::new(false)),
            dir: dir.clone(),
        });
        {
            let mut runs = self.runs();
            let pending = runs
                .values()
                .filter(|e| e.lock().handle.status == RunStatus::Pending)
                .count();
            if pending >= self.config.max_pending_runs {
                return Err(RegistryError::QueueFull);
            }
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let cfg_json = serde_json::to_vec_pretty(&handle.config).map_err(Error::from)?;
            fs::write(dir.join("config.json"), cfg_json).map_err(|e| Error::io(&dir, e))?;
            persist_state(&dir, &entry.lock());
            runs.insert(id, entry.clone());
        }
        tokio::spawn(drive(self.slots.clone(), entry, sim));
        Ok(handle)
    }

    /// Requests cancellation. Pending runs are cancelled at once; running
    /// ones stop at the next round boundary.
    pub fn cancel(&self, id: &str) -> std::result::Result<RunHandle, RegistryError> {
        let entry = self.entry(id)?;
        let status = entry.handle().status;
        if status.is_terminal() {
            return Err(RegistryError::Conflict(format!("run is already {status:?}")));
        }
        entry.cancel.store(true, Ordering::SeqCst);
        if status == RunStatus::Pending {
            entry.transition(RunStatus::Cancelled, Some("cancelled before start".into()));
        }
        Ok(entry.handle())
    }
}

async fn drive(slots: Arc<Semaphore>, entry: Arc<RunEntry>, mut sim: Simulation) {
    let Ok(_permit) = slots.acquire_owned().await else {
        return;
    };
    if entry.cancel.load(Ordering::SeqCst) || !entry.transition(RunStatus::Running, None) {
        return;
    }
    let worker = entry.clone();
    let joined = tokio::task::spawn_blocking(move || {
        let mut sink = |m: &RoundMetrics| worker.push_round(m);
        let outcome = sim.run(&mut sink, Some(&worker.cancel));
        (outcome, sim.global().parameters.clone())
    })
    .await;
    let (outcome, params) = match joined {
        Ok(v) => v,
        Err(e) => (Err(Error::structural(format!("run worker panicked: {e}"))), Vec::new()),
    };
    if !params.is_empty() {
        entry.lock().parameters = params;
    }
    match outcome {
        Ok(o) if o.cancelled => entry.transition(RunStatus::Cancelled, Some("cancelled".into())),
        Ok(_) => entry.transition(RunStatus::Completed, None),
        Err(e) => entry.transition(RunStatus::Failed, Some(e.to_string())),
    };
}

fn load_run(dir: &Path) -> Result<RunEntry> {
    let status_path = dir.join("status.json");
    let bytes = fs::read(&status_path).map_err(|e| Error::io(&status_path, e))?;
    let mut handle: RunHandle = serde_json::from_slice(&bytes)?;
    let history: Vec<RoundMetrics> = fs::read_to_string(dir.join("metrics.jsonl"))
        .unwrap_or_default()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<_, _>>()?;
    let parameters: Vec<f64> = fs::read(dir.join("parameters.json"))
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok())
        .unwrap_or_default();
    let log = fs::read_to_string(dir.join("run.log")).unwrap_or_default();
    handle.rounds_completed = history.last().map_or(0, |m| m.round);
    let interrupted = !handle.status.is_terminal();
    let state = RunState {
        handle,
        history,
        parameters,
        log,
    };
    let entry = RunEntry {
        state: Mutex::new(state),
        version: watch::channel(0).0,
        cancel: Arc::new(AtomicBool::new(false)),
        dir: dir.to_path_buf(),
    };
    if interrupted {
        let mut st = entry.lock();
        st.handle.status = RunStatus::Failed;
        st.handle.message = Some("interrupted by a service restart".into());
        persist_state(dir, &st);
    }
    Ok(entry)
}
