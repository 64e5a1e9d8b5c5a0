//! Bounded single-producer single-consumer snapshot channel.
//!
//! The producer never blocks: when the queue is full the oldest snapshot
//! that is not final is discarded.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};

use crate::qd::Snapshot;

pub const DEFAULT_CAPACITY: usize = 4;

#[derive(Debug, Default)]
struct State {
    items: VecDeque<Snapshot>,
    closed: bool,
    pushed: usize,
    dropped: usize,
}

#[derive(Debug)]
pub struct SnapshotQueue {
    state: Mutex<State>,
    ready: Condvar,
    capacity: usize,
}

impl SnapshotQueue {
    pub fn new(capacity: usize) -> Self {
        SnapshotQueue {
            state: Mutex::new(State::default()),
            ready: Condvar::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&self, snapshot: Snapshot) {
        let mut s = self.state.lock().expect("queue lock poisoned");
        if s.items.len() >= self.capacity {
            if let Some(pos) = s.items.iter().position(|x| !x.is_final) {
                s.items.remove(pos);
                s.dropped += 1;
            }
        }
        s.items.push_back(snapshot);
        s.pushed += 1;
        self.ready.notify_one();
    }

    /// No more snapshots will arrive.
    pub fn close(&self) {
        self.state.lock().expect("queue lock poisoned").closed = true;
        self.ready.notify_all();
    }

    /// Blocks until a snapshot is available; `None` once closed and drained.
    pub fn pop(&self) -> Option<Snapshot> {
        let mut s = self.state.lock().expect("queue lock poisoned");
        loop {
            if let Some(x) = s.items.pop_front() {
                return Some(x);
            }
            if s.closed {
                return None;
            }
            s = self.ready.wait(s).expect("queue lock poisoned");
        }
    }

    /// (pushed, dropped) counts so far.
    pub fn stats(&self) -> (usize, usize) {
        let s = self.state.lock().expect("queue lock poisoned");
        (s.pushed, s.dropped)
    }
}
