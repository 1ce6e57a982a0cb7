//! Channel access and the trigger-based uplink exchange.
//!
//! APs contend with DCF-style backoff (single access category, no RTS/CTS).
//! A winning AP sends a trigger frame, its scheduled STAs answer with one
//! UL MU PPDU after SIFS, and the AP closes the TXOP with a Multi-STA
//! BlockAck.

use std::collections::VecDeque;

use rand::Rng;

use crate::phy::{self, McsTable, MULTI_STA_BLOCK_ACK, PREAMBLE, SYMBOL, TRIGGER_FRAME};
use crate::psr;
use crate::scenario::{Node, NodeId, TrafficClass};
use crate::time::SimTime;
use crate::traffic::HEADER_BYTES;

pub const SLOT: SimTime = SimTime::from_us(9);
pub const SIFS: SimTime = SimTime::from_us(16);
pub const DIFS: SimTime = SimTime::from_us(34);
pub const CW_MIN: u32 = 15;
pub const CW_MAX: u32 = 1023;
pub const RETRY_LIMIT: u8 = 7;
pub const TXOP_LIMIT: SimTime = SimTime::from_ms(4);
/// Energy-detect threshold of physical carrier sense.
pub const CCA_ENERGY_DBM: f64 = -62.0;
pub const UL_TARGET_RSSI_MIN_DBM: f64 = -90.0;
pub const UL_TARGET_RSSI_MAX_DBM: f64 = -40.0;

/// Longest UL MU PPDU that still leaves room for TF, two SIFS and the BlockAck.
pub const MAX_UL_DURATION: SimTime =
    SimTime::from_ns(TXOP_LIMIT.as_ns() - TRIGGER_FRAME.as_ns() - 2 * SIFS.as_ns() - MULTI_STA_BLOCK_ACK.as_ns());

/// Data symbols available in [`MAX_UL_DURATION`].
pub const MAX_UL_SYMBOLS: u64 = (MAX_UL_DURATION.as_ns() - PREAMBLE.as_ns()) / SYMBOL.as_ns();

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Medium {
    Idle,
    Busy,
}

/// Combined physical and virtual carrier sense.
///
/// `preamble_locked` is true while a frame whose preamble was detected above
/// sensitivity is still on the air.
pub fn carrier_sense(energy_dbm: f64, nav_expiry: SimTime, preamble_locked: bool, now: SimTime) -> Medium {
    if energy_dbm >= CCA_ENERGY_DBM || nav_expiry > now || preamble_locked {
        Medium::Busy
    } else {
        Medium::Idle
    }
}

/// Energy-only physical carrier sense, the rule a STA applies inside a
/// spatial reuse opportunity.
pub fn energy_sense(energy_dbm: f64) -> Medium {
    if energy_dbm >= CCA_ENERGY_DBM {
        Medium::Busy
    } else {
        Medium::Idle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackoffStep {
    Counting,
    Frozen,
    Transmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backoff {
    pub counter: u32,
    pub cw: u32,
}

impl Backoff {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut b = Backoff { counter: 0, cw: CW_MIN };
        b.redraw(rng);
        b
    }

    pub fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.counter = rng.random_range(0..=self.cw);
    }

    /// One slot boundary. A busy slot freezes the counter; an idle slot at a
    /// zero counter means the node transmits.
    pub fn step(&mut self, slot_idle: bool) -> BackoffStep {
        if !slot_idle {
            return BackoffStep::Frozen;
        }
        if self.counter == 0 {
            return BackoffStep::Transmit;
        }
        self.counter -= 1;
        if self.counter == 0 {
            BackoffStep::Transmit
        } else {
            BackoffStep::Counting
        }
    }

    /// Consumes `slots` idle slots at once.
    pub fn elapse(&mut self, slots: u64) {
        self.counter = self.counter.saturating_sub(slots.min(u32::MAX as u64) as u32);
    }

    pub fn on_failure<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.cw = (2 * (self.cw + 1) - 1).min(CW_MAX);
        self.redraw(rng);
    }

    pub fn on_success<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.cw = CW_MIN;
        self.redraw(rng);
    }
}

/// NAV after overhearing a frame received at `rx_dbm` that reserves the
/// medium until `declared_end`.
pub fn nav_update(nav_expiry: SimTime, rx_dbm: f64, sensitivity_dbm: f64, declared_end: SimTime) -> SimTime {
    if rx_dbm < sensitivity_dbm {
        nav_expiry
    } else {
        nav_expiry.max(declared_end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledSta {
    pub sta: NodeId,
    pub stream: usize,
    pub mcs: u8,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerFrame {
    pub donor_ap: NodeId,
    pub bss: NodeId,
    pub scheduled: Vec<ScheduledSta>,
    pub ul_duration: SimTime,
    pub ul_target_rssi_dbm: f64,
    pub psr_allowed: bool,
    /// Present iff `psr_allowed`.
    pub psr_input_dbm: Option<f64>,
    /// Acceptable interference at the donor, kept for auditing.
    pub i_ap_dbm: Option<f64>,
    pub tx_power_dbm: f64,
}

/// Timeline of one TXOP: TF, SIFS, UL MU PPDU, SIFS, Multi-STA BlockAck.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxopPlan {
    pub start: SimTime,
    pub tf_end: SimTime,
    pub ul_start: SimTime,
    pub ul_end: SimTime,
    pub end: SimTime,
}

impl TxopPlan {
    pub fn new(start: SimTime, ul_duration: SimTime) -> Self {
        let tf_end = start + TRIGGER_FRAME;
        let ul_start = tf_end + SIFS;
        let ul_end = ul_start + ul_duration;
        TxopPlan { start, tf_end, ul_start, ul_end, end: ul_end + SIFS + MULTI_STA_BLOCK_ACK }
    }

    pub fn duration(&self) -> SimTime {
        self.end - self.start
    }
}

/// Round-robin STA selection with strict priority for low-latency STAs.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    last_ll: Option<NodeId>,
    last_bb: Option<NodeId>,
}

impl RoundRobin {
    /// Picks up to `slots` STAs from `pending` (any order): every pending
    /// low-latency STA first, then broadband STAs, each class rotating from
    /// just after the one served last.
    pub fn select(&mut self, pending: &[(NodeId, TrafficClass)], slots: usize) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(slots);
        for (class, last) in
            [(TrafficClass::LowLatency, &mut self.last_ll), (TrafficClass::Broadband, &mut self.last_bb)]
        {
            if out.len() == slots {
                break;
            }
            let mut ids: Vec<NodeId> = pending.iter().filter(|(_, c)| *c == class).map(|&(id, _)| id).collect();
            ids.sort_unstable();
            let start = last.map_or(0, |l| ids.partition_point(|&id| id <= l));
            let start = start.min(ids.len());
            ids.rotate_left(start);
            for id in ids.into_iter().take(slots - out.len()) {
                out.push(id);
                *last = Some(id);
            }
        }
        out
    }
}

/// UL target RSSI: the weakest scheduled STA's full-power RSS, clamped.
pub fn ul_target_rssi(scheduled: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let weakest = scheduled.into_iter().map(|(max_power, loss)| max_power - loss).fold(f64::INFINITY, f64::min);
    weakest.clamp(UL_TARGET_RSSI_MIN_DBM, UL_TARGET_RSSI_MAX_DBM)
}

/// Inverse power control toward the target, capped at the STA's maximum.
pub fn sta_tx_power(target_dbm: f64, loss_db: f64, max_power_dbm: f64) -> f64 {
    (target_dbm + loss_db).min(max_power_dbm)
}

/// What the AP knows about a STA with queued uplink data.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingSta {
    pub id: NodeId,
    pub class: TrafficClass,
    /// On-air bytes (headers included) waiting in the STA queue.
    pub pending_bytes: u64,
    /// Average large-scale loss to the AP.
    pub loss_db: f64,
    pub max_tx_power_dbm: f64,
}

pub struct TriggerParams<'a> {
    pub bandwidth_mhz: u32,
    pub mcs_table: &'a McsTable,
    /// Safety margin when PSR is enabled; `None` disables PSR in the TF.
    pub psr_safety_margin_db: Option<f64>,
}

/// Builds the trigger frame and TXOP timeline for an AP that just won the
/// medium at `now`. `sinr_for(sta, tx_power_dbm, n_streams)` returns the
/// SINR the AP predicts for that STA's stream.
///
/// Returns `None` when no STA has pending data.
pub fn build_trigger(
    ap: &Node,
    pending: &[PendingSta],
    rr: &mut RoundRobin,
    now: SimTime,
    params: &TriggerParams<'_>,
    mut sinr_for: impl FnMut(NodeId, f64, usize) -> f64,
) -> Option<(TriggerFrame, TxopPlan)> {
    let candidates: Vec<(NodeId, TrafficClass)> =
        pending.iter().filter(|p| p.pending_bytes > 0).map(|p| (p.id, p.class)).collect();
    let chosen = rr.select(&candidates, ap.n_antennas);
    if chosen.is_empty() {
        return None;
    }
    let info = |id: NodeId| pending.iter().find(|p| p.id == id).expect("chosen from pending");
    let target = ul_target_rssi(chosen.iter().map(|&id| (info(id).max_tx_power_dbm, info(id).loss_db)));
    let n_streams = chosen.len();
    let mut scheduled = Vec::with_capacity(n_streams);
    let mut symbols = 0u64;
    for (stream, &id) in chosen.iter().enumerate() {
        let p = info(id);
        let power = sta_tx_power(target, p.loss_db, p.max_tx_power_dbm);
        let mcs = params.mcs_table.select(sinr_for(id, power, n_streams));
        symbols = symbols.max(phy::symbols_for_bits(p.pending_bytes * 8, mcs, params.bandwidth_mhz, 1));
        scheduled.push(ScheduledSta { sta: id, stream, mcs: mcs.index, tx_power_dbm: power });
    }
    let ul_duration = PREAMBLE + SimTime(symbols.min(MAX_UL_SYMBOLS) * SYMBOL.as_ns());
    let (psr_allowed, psr_input_dbm, i_ap_dbm) = match params.psr_safety_margin_db {
        Some(margin) => {
            let min_snr =
                scheduled.iter().map(|s| params.mcs_table.get(s.mcs).min_snr_db).fold(f64::NEG_INFINITY, f64::max);
            let i_ap = psr::acceptable_interference_dbm(target, min_snr, margin);
            (true, Some(psr::psr_input_dbm(ap.max_tx_power_dbm, i_ap)), Some(i_ap))
        }
        None => (false, None, None),
    };
    let tf = TriggerFrame {
        donor_ap: ap.id,
        bss: ap.id,
        scheduled,
        ul_duration,
        ul_target_rssi_dbm: target,
        psr_allowed,
        psr_input_dbm,
        i_ap_dbm,
        tx_power_dbm: ap.max_tx_power_dbm,
    };
    let plan = TxopPlan::new(now, ul_duration);
    debug_assert!(plan.duration() <= TXOP_LIMIT);
    Some((tf, plan))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mpdu {
    /// Index of the owning file in the drop's file table.
    pub file: usize,
    pub payload_bytes: u32,
    pub retries: u8,
    pub reinjected: bool,
}

impl Mpdu {
    pub fn new(file: usize, payload_bytes: u32) -> Self {
        Mpdu { file, payload_bytes, retries: 0, reinjected: false }
    }

    pub fn air_bytes(&self) -> u64 {
        (self.payload_bytes + HEADER_BYTES) as u64
    }
}

/// Per-STA FIFO of MPDUs awaiting (re)transmission.
#[derive(Debug, Clone, Default)]
pub struct TxQueue {
    items: VecDeque<Mpdu>,
    air_bytes: u64,
}

impl TxQueue {
    pub fn push_back(&mut self, m: Mpdu) {
        self.air_bytes += m.air_bytes();
        self.items.push_back(m);
    }

    fn push_front(&mut self, m: Mpdu) {
        self.air_bytes += m.air_bytes();
        self.items.push_front(m);
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn pending_air_bytes(&self) -> u64 {
        self.air_bytes
    }

    pub fn front(&self) -> Option<&Mpdu> {
        self.items.front()
    }

    pub fn pop_front(&mut self) -> Option<Mpdu> {
        let m = self.items.pop_front()?;
        self.air_bytes -= m.air_bytes();
        Some(m)
    }

    /// Dequeues MPDUs in order while their on-air bits fit in `capacity_bits`.
    pub fn take_fitting(&mut self, capacity_bits: u64) -> Vec<Mpdu> {
        let mut used = 0u64;
        let mut out = Vec::new();
        while let Some(m) = self.items.front() {
            let bits = m.air_bytes() * 8;
            if used + bits > capacity_bits {
                break;
            }
            used += bits;
            out.push(self.pop_front().expect("front exists"));
        }
        out
    }

    /// Returns failed MPDUs to the head of the queue in their original order.
    /// An MPDU past the retry limit is reinjected once with a fresh retry
    /// count; the second time it is lost. Lost MPDUs are returned.
    pub fn requeue_failed(&mut self, failed: Vec<Mpdu>) -> Vec<Mpdu> {
        let mut lost = Vec::new();
        for mut m in failed.into_iter().rev() {
            if m.retries >= RETRY_LIMIT {
                if m.reinjected {
                    lost.push(m);
                    continue;
                }
                m.retries = 0;
                m.reinjected = true;
            } else {
                m.retries += 1;
            }
            self.push_front(m);
        }
        lost.reverse();
        lost
    }
}
