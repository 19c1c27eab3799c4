//! In-memory session registry with idle eviction and optional on-disk
//! persistence of `(upload, config, messages)`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use tokio::sync::Mutex as AsyncMutex;
use uuid::Uuid;
use wdc::{decode_max_side, DehazeConfig};

use crate::session::{RecordedMessage, Session};

/// Largest accepted upload, in bytes.
pub const DEFAULT_MAX_UPLOAD: usize = 25 * 1024 * 1024;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub max_upload_bytes: usize,
    pub idle_timeout: Duration,
    /// Directory holding one subdirectory per session. Evicted or restarted
    /// sessions are rebuilt from it on the next request.
    pub persist_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_upload_bytes: DEFAULT_MAX_UPLOAD,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            persist_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Pipeline(#[from] wdc::DehazeError),
    #[error("persistence failed for {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corrupt persisted session {path}: {source}")]
    Corrupt {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub type SharedSession = Arc<AsyncMutex<Session>>;

struct Slot {
    session: SharedSession,
    last_used: Instant,
}

pub struct SessionStore {
    config: ServiceConfig,
    slots: Mutex<HashMap<Uuid, Slot>>,
}

const UPLOAD_FILE: &str = "upload.bin";
const CONFIG_FILE: &str = "config.json";
const MESSAGES_FILE: &str = "messages.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let text = serde_json::to_vec_pretty(value).expect("session records serialize");
    std::fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| StoreError::Corrupt {
        path: path.to_path_buf(),
        source,
    })
}

impl SessionStore {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn session_dir(&self, id: Uuid) -> Option<PathBuf> {
        self.config
            .persist_dir
            .as_ref()
            .map(|d| d.join(id.to_string()))
    }

    /// Decodes, resizes and dehazes an upload. Blocking.
    pub fn create(
        &self,
        upload: &[u8],
        config: DehazeConfig,
    ) -> Result<(Uuid, SharedSession), StoreError> {
        let image = decode_max_side(upload, config.max_side)?;
        let session = Session::new(image, config)?;
        let id = Uuid::new_v4();
        if let Some(dir) = self.session_dir(id) {
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let path = dir.join(UPLOAD_FILE);
            std::fs::write(&path, upload).map_err(io_err(&path))?;
            write_json(&dir.join(CONFIG_FILE), session.config())?;
            write_json(&dir.join(MESSAGES_FILE), &Vec::<RecordedMessage>::new())?;
        }
        let shared = Arc::new(AsyncMutex::new(session));
        self.slots.lock().expect("store lock").insert(
            id,
            Slot {
                session: shared.clone(),
                last_used: Instant::now(),
            },
        );
        Ok((id, shared))
    }

    /// Looks a session up and marks it used. Falls back to the persisted copy.
    pub fn get(&self, id: Uuid) -> Result<Option<SharedSession>, StoreError> {
        {
            let mut slots = self.slots.lock().expect("store lock");
            if let Some(slot) = slots.get_mut(&id) {
                slot.last_used = Instant::now();
                return Ok(Some(slot.session.clone()));
            }
        }
        let Some(dir) = self.session_dir(id) else {
            return Ok(None);
        };
        if !dir.is_dir() {
            return Ok(None);
        }
        let path = dir.join(UPLOAD_FILE);
        let upload = std::fs::read(&path).map_err(io_err(&path))?;
        let config: DehazeConfig = read_json(&dir.join(CONFIG_FILE))?;
        let messages: Vec<RecordedMessage> = read_json(&dir.join(MESSAGES_FILE))?;
        let image = decode_max_side(&upload, config.max_side)?;
        let session = Session::replay(image, config, messages)?;

        let mut slots = self.slots.lock().expect("store lock");
        // another request may have restored it meanwhile
        let slot = slots.entry(id).or_insert_with(|| Slot {
            session: Arc::new(AsyncMutex::new(session)),
            last_used: Instant::now(),
        });
        slot.last_used = Instant::now();
        Ok(Some(slot.session.clone()))
    }

    /// Records the message list of a session on disk, if persistence is on.
    pub fn persist_messages(
        &self,
        id: Uuid,
        messages: &[RecordedMessage],
    ) -> Result<(), StoreError> {
        match self.session_dir(id) {
            Some(dir) => write_json(&dir.join(MESSAGES_FILE), &messages),
            None => Ok(()),
        }
    }

    /// Drops sessions idle for longer than the timeout as of `now`.
    /// Returns how many were dropped.
    pub fn evict_idle_at(&self, now: Instant) -> usize {
        let mut slots = self.slots.lock().expect("store lock");
        let before = slots.len();
        let timeout = self.config.idle_timeout;
        slots.retain(|_, s| now.saturating_duration_since(s.last_used) <= timeout);
        before - slots.len()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Runs eviction every `period` on the current runtime.
    pub fn spawn_evictor(self: &Arc<Self>, period: Duration) -> tokio::task::JoinHandle<()> {
        let store = Arc::downgrade(self);
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let Some(store) = store.upgrade() else { break };
                store.evict_idle_at(Instant::now());
            }
        })
    }
}
