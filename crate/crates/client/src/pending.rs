//! Handles for calls running in the background.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use crate::error::{ClientError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CallState {
    InFlight,
    Done,
    Failed,
}

/// Opaque identifier of a call, unique within the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallId(u64);

impl fmt::Display for CallId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "call-{}", self.0)
    }
}

type Callback<T> = Box<dyn FnOnce(&Result<T>) + Send>;

struct Slot<T> {
    result: Option<Arc<Result<T>>>,
    callbacks: Vec<Callback<T>>,
}

struct Shared<T> {
    slot: Mutex<Slot<T>>,
    done: Condvar,
}

impl<T> Shared<T> {
    fn lock(&self) -> MutexGuard<'_, Slot<T>> {
        self.slot.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// A call started with one of the client's `begin_*` methods.
///
/// The state moves from `InFlight` to `Done` or `Failed` exactly once.
/// Completion can be observed by polling [`state`](Self::state), by
/// blocking in [`wait`](Self::wait), or through callbacks registered with
/// [`on_complete`](Self::on_complete), which run once each on the worker
/// thread (or immediately on the caller's thread if the call has already
/// finished).
pub struct PendingCall<T> {
    id: CallId,
    shared: Arc<Shared<T>>,
}

impl<T> fmt::Debug for PendingCall<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PendingCall").field("id", &self.id).field("state", &self.state()).finish()
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn state_of<T>(r: &Result<T>) -> CallState {
    if r.is_ok() {
        CallState::Done
    } else {
        CallState::Failed
    }
}

impl<T> PendingCall<T> {
    pub fn id(&self) -> CallId {
        self.id
    }

    /// Current state; never blocks.
    pub fn state(&self) -> CallState {
        match &self.shared.lock().result {
            None => CallState::InFlight,
            Some(r) => state_of(r),
        }
    }
}

impl<T: Clone + Send + Sync + 'static> PendingCall<T> {
    pub(crate) fn spawn<F>(work: F) -> PendingCall<T>
    where
        F: FnOnce() -> Result<T> + Send + 'static,
    {
        let shared =
            Arc::new(Shared { slot: Mutex::new(Slot { result: None, callbacks: Vec::new() }), done: Condvar::new() });
        let id = CallId(NEXT_ID.fetch_add(1, Ordering::Relaxed));
        let worker = Arc::clone(&shared);
        let spawned = std::thread::Builder::new().name(format!("terra-{id}")).spawn(move || {
            let result = Arc::new(work());
            let callbacks = {
                let mut slot = worker.lock();
                slot.result = Some(Arc::clone(&result));
                std::mem::take(&mut slot.callbacks)
            };
            worker.done.notify_all();
            for cb in callbacks {
                cb(&result);
            }
        });
        if let Err(e) = spawned {
            let mut slot = shared.lock();
            slot.result = Some(Arc::new(Err(ClientError::Invalid(format!("cannot start call: {e}")))));
        }
        PendingCall { id, shared }
    }

    /// Blocks up to `timeout` and returns the state reached.
    pub fn wait_timeout(&self, timeout: Duration) -> CallState {
        let slot = self.shared.lock();
        let (slot, _) = self
            .shared
            .done
            .wait_timeout_while(slot, timeout, |s| s.result.is_none())
            .unwrap_or_else(|p| p.into_inner());
        match &slot.result {
            None => CallState::InFlight,
            Some(r) => state_of(r),
        }
    }

    /// Blocks until the call finishes and returns its outcome.
    pub fn wait(self) -> Result<T> {
        let mut slot = self.shared.lock();
        while slot.result.is_none() {
            slot = self.shared.done.wait(slot).unwrap_or_else(|p| p.into_inner());
        }
        let result = slot.result.take().expect("result present");
        drop(slot);
        Arc::try_unwrap(result).unwrap_or_else(|shared| (*shared).clone())
    }

    /// The outcome if the call has finished, without consuming the handle.
    pub fn try_result(&self) -> Option<Result<T>> {
        self.shared.lock().result.as_ref().map(|r| (**r).clone())
    }

    /// Registers a completion callback.
    pub fn on_complete<F>(&self, callback: F)
    where
        F: FnOnce(&Result<T>) + Send + 'static,
    {
        let mut slot = self.shared.lock();
        match &slot.result {
            Some(r) => {
                let r = Arc::clone(r);
                drop(slot);
                callback(&r);
            }
            None => slot.callbacks.push(Box::new(callback)),
        }
    }
}
