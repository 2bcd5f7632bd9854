//! Hand-off between the control loop and the decision policy.
//!
//! The loop never waits on the policy. It submits a query when nothing is in
//! flight and polls for a reply once per tick. In-process policies are
//! answered at submission and released after a fixed number of ticks, which
//! keeps runs deterministic. Remote policies run on a worker thread.

use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::thread::JoinHandle;

use crate::advisor::{Decision, PolicyDriver, PolicyError, QueryRecord};

pub type Reply = (QueryRecord, Result<Decision, PolicyError>);

pub trait Mailbox {
    fn in_flight(&self) -> bool;
    /// Hands `query` to the policy. Callers check `in_flight` first.
    fn submit(&mut self, query: QueryRecord, tick: u64);
    fn poll(&mut self, tick: u64) -> Option<Reply>;
}

/// Answers immediately and releases the reply `latency_ticks` later.
pub struct SimulatedMailbox {
    driver: PolicyDriver,
    latency_ticks: u64,
    pending: Option<(u64, Reply)>,
}

impl SimulatedMailbox {
    pub fn new(driver: PolicyDriver, latency_ticks: u64) -> Self {
        Self { driver, latency_ticks, pending: None }
    }
}

impl Mailbox for SimulatedMailbox {
    fn in_flight(&self) -> bool {
        self.pending.is_some()
    }

    fn submit(&mut self, query: QueryRecord, tick: u64) {
        let result = self.driver.query(query.clone());
        self.pending = Some((tick + self.latency_ticks, (query, result)));
    }

    fn poll(&mut self, tick: u64) -> Option<Reply> {
        match &self.pending {
            Some((due, _)) if *due <= tick => self.pending.take().map(|(_, r)| r),
            _ => None,
        }
    }
}

/// Runs the policy on its own thread with one request in flight.
pub struct ThreadedMailbox {
    requests: Option<Sender<QueryRecord>>,
    replies: Receiver<Reply>,
    worker: Option<JoinHandle<()>>,
    busy: bool,
}

impl ThreadedMailbox {
    pub fn spawn(mut driver: PolicyDriver) -> Self {
        let (req_tx, req_rx) = mpsc::channel::<QueryRecord>();
        let (rep_tx, rep_rx) = mpsc::channel::<Reply>();
        let worker = std::thread::spawn(move || {
            for query in req_rx {
                let result = driver.query(query.clone());
                if rep_tx.send((query, result)).is_err() {
                    break;
                }
            }
        });
        Self { requests: Some(req_tx), replies: rep_rx, worker: Some(worker), busy: false }
    }
}

impl Mailbox for ThreadedMailbox {
    fn in_flight(&self) -> bool {
        self.busy
    }

    fn submit(&mut self, query: QueryRecord, _tick: u64) {
        if let Some(tx) = &self.requests {
            self.busy = tx.send(query).is_ok();
        }
    }

    fn poll(&mut self, _tick: u64) -> Option<Reply> {
        match self.replies.try_recv() {
            Ok(reply) => {
                self.busy = false;
                Some(reply)
            }
            Err(TryRecvError::Empty) => None,
            Err(TryRecvError::Disconnected) if self.busy => {
                self.busy = false;
                let query =
                    QueryRecord::new(f64::NAN, crate::monitor::FailureReport { codes: vec![], info: String::new() });
                Some((query, Err(PolicyError::Disconnected)))
            }
            Err(TryRecvError::Disconnected) => None,
        }
    }
}

impl Drop for ThreadedMailbox {
    fn drop(&mut self) {
        // closing the request channel ends the worker loop
        self.requests = None;
        if let Some(handle) = self.worker.take() {
            if !self.busy {
                let _ = handle.join();
            }
        }
    }
}
