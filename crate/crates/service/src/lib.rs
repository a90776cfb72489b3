//! HTTP service that walks a participant through rating and demonstrating
//! the canonical task, learns their weights, and then anticipates each
//! action while they demonstrate the actual task.
//!
//! Sessions live in memory. With a snapshot directory configured, every
//! session's export is written there periodically so a crash loses at most
//! one interval of work.

pub mod api;
pub mod error;
pub mod session;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::routing::{get, post};
use axum::Router;
use prefxfer_core::graph::enumerate_states;
use prefxfer_core::irl::LearnConfig;
use prefxfer_core::{shipped, TaskSpec};

pub use error::ApiError;
pub use session::{Export, LoadedTask, Phase, Session};

pub const DEFAULT_SNAPSHOT_INTERVAL: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Keep anticipations out of step responses (they are still logged).
    pub hide_anticipation: bool,
    pub learn: LearnConfig,
    pub snapshot_dir: Option<PathBuf>,
    pub snapshot_interval: Duration,
    pub default_canonical: String,
    pub default_actual: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            hide_anticipation: false,
            learn: LearnConfig::default(),
            snapshot_dir: None,
            snapshot_interval: DEFAULT_SNAPSHOT_INTERVAL,
            default_canonical: "canonical".into(),
            default_actual: "actual".into(),
        }
    }
}

type SessionMap = HashMap<String, Arc<Mutex<Session>>>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    tasks: BTreeMap<String, Arc<LoadedTask>>,
    sessions: RwLock<SessionMap>,
}

impl AppState {
    /// Serves the two shipped tasks.
    pub fn new(config: ServiceConfig) -> Result<Self, ApiError> {
        Self::with_tasks(config, [shipped::canonical_task(), shipped::actual_task()])
    }

    pub fn with_tasks(
        config: ServiceConfig,
        tasks: impl IntoIterator<Item = TaskSpec>,
    ) -> Result<Self, ApiError> {
        config.learn.validate()?;
        let mut map = BTreeMap::new();
        for spec in tasks {
            let graph = Arc::new(enumerate_states(&spec)?);
            map.insert(
                spec.task_id().to_string(),
                Arc::new(LoadedTask { spec, graph }),
            );
        }
        for id in [&config.default_canonical, &config.default_actual] {
            if !map.contains_key(id) {
                return Err(ApiError::UnknownTask(id.clone()));
            }
        }
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                tasks: map,
                sessions: RwLock::new(HashMap::new()),
            }),
        })
    }

    fn task(&self, id: &str) -> Result<Arc<LoadedTask>, ApiError> {
        self.inner
            .tasks
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownTask(id.to_string()))
    }

    pub fn create_session(
        &self,
        canonical: Option<&str>,
        actual: Option<&str>,
    ) -> Result<(String, Phase), ApiError> {
        let cfg = &self.inner.config;
        let canonical = self.task(canonical.unwrap_or(&cfg.default_canonical))?;
        let actual = self.task(actual.unwrap_or(&cfg.default_actual))?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(
            id.clone(),
            canonical,
            actual,
            cfg.learn,
            cfg.hide_anticipation,
        );
        let phase = session.phase();
        self.inner
            .sessions
            .write()
            .unwrap()
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok((id, phase))
    }

    pub fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.inner
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    }

    pub fn task_infos(&self) -> Vec<api::TaskInfo> {
        self.inner
            .tasks
            .values()
            .map(|t| api::TaskInfo {
                task_id: t.spec.task_id().to_string(),
                num_actions: t.spec.num_actions(),
                total_steps: t.spec.total_steps(),
            })
            .collect()
    }

    /// Writes `<dir>/<session_id>.json` for every session, each atomically.
    pub fn snapshot_to(&self, dir: &Path) -> std::io::Result<usize> {
        std::fs::create_dir_all(dir)?;
        let sessions: Vec<_> = self
            .inner
            .sessions
            .read()
            .unwrap()
            .values()
            .cloned()
            .collect();
        for s in &sessions {
            let export = s.lock().unwrap().export();
            let text = serde_json::to_string_pretty(&export).expect("exports serialize");
            write_atomic(
                &dir.join(format!("{}.json", export.session_id)),
                text.as_bytes(),
            )?;
        }
        Ok(sessions.len())
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/tasks", get(api::list_tasks))
        .route("/sessions", post(api::create_session))
        .route("/sessions/{id}/ratings", post(api::submit_ratings))
        .route("/sessions/{id}/step", get(api::get_step))
        .route("/sessions/{id}/actions", post(api::submit_action))
        .route("/sessions/{id}/export", get(api::export))
        .with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config.clone())
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
    if let Some(dir) = config.snapshot_dir.clone() {
        let state = state.clone();
        let every = config.snapshot_interval;
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(every);
            loop {
                ticker.tick().await;
                let (state, dir) = (state.clone(), dir.clone());
                let res = tokio::task::spawn_blocking(move || state.snapshot_to(&dir)).await;
                if let Ok(Err(e)) = res {
                    eprintln!("snapshot failed: {e}");
                }
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    let final_state = state.clone();
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(dir) = &config.snapshot_dir {
        final_state.snapshot_to(dir)?;
    }
    Ok(())
}
