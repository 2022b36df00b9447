//! Chat sessions with idle expiry.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use trainbot_core::dialog::DialogContext;

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub context: DialogContext,
    pub created_at: Instant,
    pub last_active_at: Instant,
}

impl Session {
    fn new(session_id: String, now: Instant) -> Self {
        Session {
            context: DialogContext::new(session_id.clone()),
            session_id,
            created_at: now,
            last_active_at: now,
        }
    }
}

/// Where sessions live between turns.
pub trait SessionStore: Send + Sync {
    /// Runs `f` on the session with exclusive access, creating it when it is
    /// missing or expired. Turns on one session are serialised; distinct
    /// sessions proceed in parallel.
    fn with_session<R>(&self, session_id: &str, f: impl FnOnce(&mut Session) -> R) -> R
    where
        Self: Sized;

    /// Drops idle sessions; returns how many were removed.
    fn purge_expired(&self) -> usize;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug)]
pub struct MemorySessionStore {
    ttl: Duration,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl MemorySessionStore {
    pub fn new(ttl: Duration) -> Self {
        MemorySessionStore {
            ttl,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn new_session_id() -> String {
        uuid::Uuid::new_v4().simple().to_string()
    }

    fn slot(&self, session_id: &str, now: Instant) -> Arc<Mutex<Session>> {
        let mut map = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let expired = map.get(session_id).is_some_and(|s| {
            let s = s.lock().unwrap_or_else(|e| e.into_inner());
            now.duration_since(s.last_active_at) > self.ttl
        });
        if expired {
            map.remove(session_id);
        }
        map.entry(session_id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(Session::new(session_id.to_string(), now))))
            .clone()
    }
}

impl SessionStore for MemorySessionStore {
    fn with_session<R>(&self, session_id: &str, f: impl FnOnce(&mut Session) -> R) -> R {
        let now = Instant::now();
        let slot = self.slot(session_id, now);
        let mut session = slot.lock().unwrap_or_else(|e| e.into_inner());
        session.last_active_at = now;
        f(&mut session)
    }

    fn purge_expired(&self) -> usize {
        let now = Instant::now();
        let mut map = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let before = map.len();
        map.retain(|_, s| {
            let s = s.lock().unwrap_or_else(|e| e.into_inner());
            now.duration_since(s.last_active_at) <= self.ttl
        });
        before - map.len()
    }

    fn len(&self) -> usize {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sessions_persist_and_expire() {
        let store = MemorySessionStore::new(Duration::from_millis(30));
        store.with_session("a", |s| s.context.turn_count = 3);
        assert_eq!(store.with_session("a", |s| s.context.turn_count), 3);
        assert_eq!(store.with_session("b", |s| s.context.turn_count), 0);
        assert_eq!(store.len(), 2);
        std::thread::sleep(Duration::from_millis(50));
        assert_eq!(store.with_session("a", |s| s.context.turn_count), 0);
        assert_eq!(store.purge_expired(), 1);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn ids_are_unique() {
        assert_ne!(MemorySessionStore::new_session_id(), MemorySessionStore::new_session_id());
    }
}
