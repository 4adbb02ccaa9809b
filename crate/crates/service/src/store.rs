use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use log::{info, warn};

use crate::session::{Session, SessionConfig, RECORD_FILE};
use crate::{Result, ServiceError};

/// Sessions by id, each behind its own lock so that submissions to one
/// session are serialized while different sessions proceed independently.
pub struct SessionStore {
    root: PathBuf,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    /// Replay every session directory under `root`. A session that fails
    /// to replay is logged and left out rather than blocking the others.
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        let mut sessions = BTreeMap::new();
        let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(RECORD_FILE).is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            match Session::open(&dir) {
                Ok(s) => {
                    info!("session {} restored at cycle {}", s.id(), s.state().cycle);
                    sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
                }
                Err(e) => warn!("skipping {}: {e}", dir.display()),
            }
        }
        Ok(SessionStore { root: root.to_path_buf(), sessions: Mutex::new(sessions) })
    }

    fn map(&self) -> MutexGuard<'_, BTreeMap<String, Arc<Mutex<Session>>>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn len(&self) -> usize {
        self.map().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<String> {
        self.map().keys().cloned().collect()
    }

    /// Reserve a fresh directory, then build the session outside the map
    /// lock; any failure is the caller's config and removes the directory.
    pub fn create(&self, config: SessionConfig) -> Result<String> {
        let (id, dir) = {
            let map = self.map();
            let mut n = map.len() + 1;
            loop {
                let id = format!("s{n:04}");
                let dir = self.root.join(&id);
                if !map.contains_key(&id) && fs::create_dir(&dir).is_ok() {
                    break (id, dir);
                }
                n += 1;
            }
        };
        match Session::create(&dir, id.clone(), config) {
            Ok(s) => {
                self.map().insert(id.clone(), Arc::new(Mutex::new(s)));
                info!("session {id} created");
                Ok(id)
            }
            Err(e) => {
                let _ = fs::remove_dir_all(&dir);
                Err(match e {
                    ServiceError::Core(_) | ServiceError::Io(_) | ServiceError::Json(_) => {
                        ServiceError::BadRequest(e.to_string())
                    }
                    other => other,
                })
            }
        }
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.map().get(id).cloned().ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Run `f` on the session under its lock. A session whose lock was
    /// poisoned by a panic mid-update is rebuilt from disk first.
    pub fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T>) -> Result<T> {
        let cell = self.get(id)?;
        let mut guard = match cell.lock() {
            Ok(g) => g,
            Err(poisoned) => {
                let mut g = poisoned.into_inner();
                warn!("session {id}: reloading after an interrupted update");
                let dir = g.dir().to_path_buf();
                *g = Session::open(&dir)?;
                cell.clear_poison();
                g
            }
        };
        f(&mut guard)
    }
}
