use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::scenario::NodeId;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival {
        sta: NodeId,
    },
    /// A backoff countdown reached zero. Stale tokens are ignored.
    BackoffSlot {
        node: NodeId,
        token: u64,
    },
    TxEnd {
        tx: u64,
    },
    /// Protocol step of a TXOP or SR exchange. Scheduled after the `TxEnd`
    /// of the same instant, so the medium is already updated.
    Phase(Phase),
    NavExpiry {
        node: NodeId,
    },
    SroDeadline {
        sta: NodeId,
        token: u64,
    },
    DropEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Trigger frame finished; deliver it.
    TriggerDelivered {
        ap: NodeId,
    },
    /// SIFS after the TF: scheduled STAs start the UL MU PPDU.
    UlStart {
        ap: NodeId,
    },
    UlEnd {
        ap: NodeId,
    },
    BlockAckStart {
        ap: NodeId,
    },
    TxopEnd {
        ap: NodeId,
    },
    SrEnd {
        sta: NodeId,
    },
    SrAckStart {
        sta: NodeId,
    },
    SrResolve {
        sta: NodeId,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Min-queue on `(time, sequence)`; equal times pop in scheduling order.
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

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) {
        assert!(time >= self.now, "event scheduled in the past: {time} < {}", self.now);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        let ev = self.heap.pop()?;
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        Some(ev)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
