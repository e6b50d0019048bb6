//! Discrete-event kernel.
//!
//! Events are totally ordered by `(fire_at, seq)` where `seq` is a
//! monotonically increasing insertion counter, so events scheduled for
//! the same instant dispatch in FIFO order. Dispatch is fully
//! deterministic: the same schedule/cancel sequence always produces the
//! same pop order, byte for byte.

use crate::time::SimTime;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("cannot schedule at {at} before current time {now}")]
    SchedulingInPast { at: SimTime, now: SimTime },
    #[error("advance on an empty event queue")]
    EmptyQueue,
}

/// Handle returned by `schedule`, usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventId(u64);

impl EventId {
    pub fn seq(self) -> u64 {
        self.0
    }
}

/// A dispatched event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: &'static str,
    pub payload: P,
}

/// One line of the event trace CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTraceRow {
    pub time_ps: u64,
    pub seq: u64,
    pub target: &'static str,
    pub payload_kind: &'static str,
}

pub trait Payload {
    /// Short stable label used in the event trace.
    fn kind(&self) -> &'static str;
}

/// Pending-event queue with deterministic total order.
#[derive(Debug)]
pub struct EventQueue<P> {
    queue: BTreeMap<(SimTime, u64), (&'static str, P)>,
    by_seq: HashMap<u64, SimTime>,
    now: SimTime,
    next_seq: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        EventQueue {
            queue: BTreeMap::new(),
            by_seq: HashMap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Queue `payload` for `target` at `fire_at`. Same-instant events
    /// keep insertion order.
    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: &'static str,
        payload: P,
    ) -> Result<EventId, KernelError> {
        if fire_at < self.now {
            return Err(KernelError::SchedulingInPast {
                at: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.insert((fire_at, seq), (target, payload));
        self.by_seq.insert(seq, fire_at);
        Ok(EventId(seq))
    }

    /// Remove a pending event. Returns false if it already fired or was
    /// cancelled before.
    pub fn cancel(&mut self, id: EventId) -> bool {
        match self.by_seq.remove(&id.0) {
            Some(at) => self.queue.remove(&(at, id.0)).is_some(),
            None => false,
        }
    }

    /// Pop the next event and move the clock to its timestamp.
    pub fn advance(&mut self) -> Result<Event<P>, KernelError> {
        let (&(fire_at, seq), _) = self.queue.iter().next().ok_or(KernelError::EmptyQueue)?;
        let (target, payload) = self.queue.remove(&(fire_at, seq)).expect("key just seen");
        self.by_seq.remove(&seq);
        debug_assert!(fire_at >= self.now, "event queue went backwards");
        self.now = fire_at;
        Ok(Event {
            fire_at,
            seq,
            target,
            payload,
        })
    }

    /// Timestamp of the next pending event, if any.
    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.keys().next().map(|&(t, _)| t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    impl Payload for &'static str {
        fn kind(&self) -> &'static str {
            self
        }
    }

    #[test]
    fn same_instant_events_dispatch_fifo() {
        let mut q = EventQueue::new();
        let t = SimTime::from_ns(10);
        for name in ["a", "b", "c"] {
            q.schedule(t, "node", name).unwrap();
        }
        let order: Vec<_> = (0..3).map(|_| q.advance().unwrap().payload).collect();
        assert_eq!(order, vec!["a", "b", "c"]);
    }

    #[test]
    fn dispatch_order_is_time_then_seq() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(20), "x", "late").unwrap();
        q.schedule(SimTime::from_ns(5), "x", "early").unwrap();
        q.schedule(SimTime::from_ns(20), "x", "late2").unwrap();
        assert_eq!(q.advance().unwrap().payload, "early");
        assert_eq!(q.advance().unwrap().payload, "late");
        assert_eq!(q.advance().unwrap().payload, "late2");
    }

    #[test]
    fn schedule_in_past_rejected() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(100), "x", "a").unwrap();
        q.advance().unwrap();
        let err = q.schedule(SimTime::from_ns(50), "x", "b").unwrap_err();
        assert!(matches!(err, KernelError::SchedulingInPast { .. }));
        // Scheduling exactly at the current time is allowed.
        q.schedule(SimTime::from_ns(100), "x", "c").unwrap();
    }

    #[test]
    fn advance_on_empty_queue_errors() {
        let mut q: EventQueue<&'static str> = EventQueue::new();
        assert_eq!(q.advance().unwrap_err(), KernelError::EmptyQueue);
    }

    #[test]
    fn cancelled_event_never_fires() {
        let mut q = EventQueue::new();
        let id = q.schedule(SimTime::from_ns(10), "x", "dead").unwrap();
        q.schedule(SimTime::from_ns(20), "x", "alive").unwrap();
        assert!(q.cancel(id));
        assert!(!q.cancel(id), "double cancel reports false");
        assert_eq!(q.advance().unwrap().payload, "alive");
        assert!(q.is_empty());
    }

    #[test]
    fn clock_is_monotonic_nondecreasing() {
        let mut q = EventQueue::new();
        for i in 0..100u64 {
            // Interleave duplicate timestamps.
            q.schedule(SimTime::from_ns(i / 3), "x", "e").unwrap();
        }
        let mut last = SimTime::ZERO;
        while !q.is_empty() {
            let ev = q.advance().unwrap();
            assert!(ev.fire_at >= last);
            last = ev.fire_at;
            assert_eq!(q.now(), ev.fire_at);
        }
    }

    #[test]
    fn identical_inputs_identical_dispatch() {
        let run = || {
            let mut q = EventQueue::new();
            let mut ids = Vec::new();
            for i in 0..1000u64 {
                let t = SimTime::from_ps((i * 7919) % 5000);
                ids.push(q.schedule(t, "x", "e").unwrap());
            }
            for i in (0..1000).step_by(13) {
                q.cancel(ids[i]);
            }
            let mut seqs = Vec::new();
            while !q.is_empty() {
                let ev = q.advance().unwrap();
                seqs.push((ev.fire_at.as_ps(), ev.seq));
            }
            seqs
        };
        assert_eq!(run(), run());
    }
}
