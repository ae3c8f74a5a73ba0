//! Events and the ordered event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::cluster::MigrationPlan;
use crate::error::{Error, Result};
use crate::ids::NodeId;
use crate::resilience::RegenStep;
use crate::time::SimTime;
use crate::workload::Request;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    RequestArrival(Request),
    NodeFail { node: NodeId },
    NodeRecover { node: NodeId },
    /// `fraction` of the node's records are damaged when the event fires; the
    /// victims are drawn from a stream seeded by `pick_seed`.
    Corruption {
        node: NodeId,
        fraction: f64,
        pick_seed: u64,
    },
    SyncTick,
    RebalanceTick,
    ForecastTick,
    PatternShift { index: usize },
    MigrationDone { plan: MigrationPlan },
    RegenStep { step: RegenStep },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::RequestArrival(_) => "request_arrival",
            EventKind::NodeFail { .. } => "node_fail",
            EventKind::NodeRecover { .. } => "node_recover",
            EventKind::Corruption { .. } => "corruption",
            EventKind::SyncTick => "sync_tick",
            EventKind::RebalanceTick => "rebalance_tick",
            EventKind::ForecastTick => "forecast_tick",
            EventKind::PatternShift { .. } => "pattern_shift",
            EventKind::MigrationDone { .. } => "migration_done",
            EventKind::RegenStep { .. } => "regen_step",
        }
    }
}

/// A scheduled event. `seq` is assigned by the queue and breaks ties between
/// events at the same instant in scheduling order.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops first.
        other
            .time
            .cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
    now: SimTime,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Schedules `kind` at `time`. Scheduling at the current instant is
    /// allowed; the event runs after everything already queued for it.
    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<u64> {
        if time < self.now {
            return Err(Error::SchedulingInPast {
                event: time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.time)
    }

    /// Pops the next event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<Event> {
        let ev = self.heap.pop()?;
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        Some(ev)
    }

    /// Pops the next event only if it is due at or before `t_end`.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event> {
        match self.peek_time() {
            Some(t) if t <= t_end => self.pop(),
            _ => None,
        }
    }

    /// Moves the clock forward without processing anything. Never moves it back.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}
