//! One drop: a single-threaded event loop over the full MAC/PHY/PSR dynamics.

use std::collections::{BTreeMap, VecDeque};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{dbm_to_mw, mw_to_dbm, LinkTable};
use crate::config::SimConfig;
use crate::engine::event::{EventKind, EventQueue, Phase};
use crate::error::SimError;
use crate::mac::{self, Backoff, Medium, Mpdu, PendingSta, RoundRobin, TriggerFrame, TriggerParams, TxQueue, TxopPlan};
use crate::mac::{DIFS, SIFS, SLOT, TXOP_LIMIT};
use crate::phy::{self, McsTable, Reception, ACK, MULTI_STA_BLOCK_ACK, PREAMBLE, SYMBOL, TRIGGER_FRAME};
use crate::psr::{self, SpatialReuseOpportunity, SrDecision, TriggerView};
use crate::scenario::{self, Deployment, NodeId, NodeKind, TrafficClass};
use crate::time::SimTime;
use crate::traffic::{self, FileRecord, FileStatus, TrafficSource};

const STREAM_DEPLOY: u64 = 0;
const STREAM_CHANNEL: u64 = 1;
const STREAM_MAC: u64 = 3;
const STREAM_PHY: u64 = 4;
const STREAM_TRAFFIC: u64 = 100;

/// Ended transmissions are kept this long for interference lookback.
const HISTORY: SimTime = SimTime::from_ms(10);

/// Independent random stream `stream` of a drop seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Everything recorded about one SR transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SrAudit {
    pub sta: NodeId,
    pub sta_bss: NodeId,
    pub donor_ap: NodeId,
    pub donor_bss: NodeId,
    pub start: SimTime,
    pub ppdu_end: SimTime,
    /// PPDU end plus SIFS plus ACK.
    pub exchange_end: SimTime,
    pub deadline: SimTime,
    pub tx_power_dbm: f64,
    pub bandwidth_mhz: u32,
    pub rpl_dbm: f64,
    pub psr_input_dbm: f64,
    pub i_ap_dbm: f64,
    /// SR signal received at the donor AP, per 20 MHz.
    pub donor_interference_dbm_per_20mhz: f64,
}

impl SrAudit {
    pub fn satisfies_power_condition(&self) -> bool {
        psr::satisfies_power_condition(self.tx_power_dbm, self.bandwidth_mhz, self.psr_input_dbm, self.rpl_dbm)
    }

    /// Positive when the donor AP sees more than its tolerated interference.
    pub fn interference_excess_db(&self) -> f64 {
        self.donor_interference_dbm_per_20mhz - self.i_ap_dbm
    }

    pub fn contained(&self) -> bool {
        self.exchange_end <= self.deadline
    }

    pub fn inter_bss(&self) -> bool {
        self.sta_bss != self.donor_bss
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DropAudit {
    pub sr: Vec<SrAudit>,
    pub txops: u64,
    /// TXOPs in which no MPDU was received.
    pub failed_txops: u64,
    pub max_txop: SimTime,
    pub txops_over_limit: u64,
    pub sros_granted: u64,
    /// SR attempts that found the medium busy.
    pub sr_busy_defers: u64,
    /// SR attempts whose exchange would overrun the SRO deadline.
    pub sr_deadline_defers: u64,
    /// SR exchanges that ended with an ACK.
    pub sr_acked: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DropResult {
    pub seed: u64,
    pub psr_enabled: bool,
    pub duration: SimTime,
    /// Files that arrived after the warm-up, in arrival order.
    pub files: Vec<FileRecord>,
    /// SR transmissions per SR-eligible STA (zero entries included).
    pub sr_transmissions: BTreeMap<NodeId, u32>,
    /// MSDU bytes acknowledged per STA over the whole drop.
    pub delivered_bytes: BTreeMap<NodeId, u64>,
    pub completed: usize,
    pub censored: usize,
    pub dropped: usize,
    pub event_count: u64,
    pub audit: DropAudit,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for DropResult {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.psr_enabled == other.psr_enabled
            && self.duration == other.duration
            && self.files == other.files
            && self.sr_transmissions == other.sr_transmissions
            && self.delivered_bytes == other.delivered_bytes
            && self.completed == other.completed
            && self.censored == other.censored
            && self.dropped == other.dropped
            && self.event_count == other.event_count
            && self.audit == other.audit
    }
}

impl DropResult {
    /// Application goodput of one STA over the drop, in Mbps.
    pub fn goodput_mbps(&self, sta: NodeId) -> f64 {
        let bytes = self.delivered_bytes.get(&sta).copied().unwrap_or(0);
        bytes as f64 * 8.0 / self.duration.as_us_f64()
    }
}

/// Simulates one drop. Deterministic in `(cfg, seed)`.
pub fn run_drop(cfg: &SimConfig, seed: u64) -> Result<DropResult, SimError> {
    cfg.validate()?;
    let wall = Instant::now();
    let mut sim = Sim::new(cfg, seed)?;
    sim.run()?;
    let mut result = sim.finish(seed);
    result.wall_time = wall.elapsed();
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Trigger,
    UlMu,
    BlockAck,
    SrData,
    Ack,
}

#[derive(Debug, Clone, Copy)]
struct Tx {
    id: u64,
    node: NodeId,
    start: SimTime,
    end: SimTime,
    power_dbm: f64,
    #[allow(dead_code)]
    kind: FrameKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sensing {
    /// Energy, NAV and preamble detection.
    Full,
    /// Energy only; NAV ignored.
    EnergyOnly,
}

#[derive(Debug)]
struct Access {
    sensing: Sensing,
    active: bool,
    backoff: Backoff,
    idle_since: Option<SimTime>,
    fire_at: Option<SimTime>,
    token: u64,
}

#[derive(Debug)]
struct NodeState {
    nav: SimTime,
    locked: Vec<u64>,
    transmitting: Option<u64>,
    access: Access,
    noise_dbm: f64,
    sensitivity_dbm: f64,
}

#[derive(Debug)]
struct SrExchange {
    mpdu: Mpdu,
    tx: u64,
    mcs: u8,
    power_dbm: f64,
    start: SimTime,
    end: SimTime,
    success: bool,
}

#[derive(Debug)]
struct StaState {
    class: TrafficClass,
    ap: NodeId,
    queue: TxQueue,
    source: TrafficSource,
    rng: ChaCha8Rng,
    grabber: bool,
    sro: Option<SpatialReuseOpportunity>,
    sro_token: u64,
    reserved: bool,
    sr: Option<SrExchange>,
    sr_count: u32,
    delivered: u64,
}

#[derive(Debug)]
struct Stream {
    sta: NodeId,
    mcs: u8,
    power_dbm: f64,
    decoded: bool,
    tx: Option<u64>,
    mpdus: Vec<(Mpdu, SimTime, SimTime)>,
    ok: Vec<bool>,
}

#[derive(Debug)]
struct Txop {
    tf: TriggerFrame,
    plan: TxopPlan,
    streams: Vec<Stream>,
    any_success: bool,
}

#[derive(Debug, Default)]
struct ApState {
    rr: RoundRobin,
    txop: Option<Txop>,
}

#[derive(Debug)]
struct FileState {
    record: FileRecord,
    remaining: u32,
    recorded: bool,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    bw: u32,
    psr_enabled: bool,
    end: SimTime,
    warmup: SimTime,
    q: EventQueue,
    dep: Deployment,
    links: LinkTable,
    mcs: McsTable,
    nodes: Vec<NodeState>,
    aps: Vec<ApState>,
    stas: Vec<Option<StaState>>,
    active: Vec<Tx>,
    history: VecDeque<Tx>,
    next_tx: u64,
    files: Vec<FileState>,
    mac_rng: ChaCha8Rng,
    phy_rng: ChaCha8Rng,
    audit: DropAudit,
    events: u64,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig, seed: u64) -> Result<Self, SimError> {
        let mut deploy_rng = substream(seed, STREAM_DEPLOY);
        let mut channel_rng = substream(seed, STREAM_CHANNEL);
        let mut mac_rng = substream(seed, STREAM_MAC);
        let dep = scenario::deploy(&cfg.scenario, cfg.psr.enabled, &mut deploy_rng)?;
        let links = LinkTable::build(&dep, &cfg.channel, &mut channel_rng);
        let dep = scenario::associate(dep, &links);
        let bw = cfg.channel.bandwidth_mhz;

        let mut nodes = Vec::with_capacity(dep.nodes.len());
        let mut aps = Vec::new();
        let mut stas = Vec::with_capacity(dep.nodes.len());
        for n in &dep.nodes {
            let sensing = if n.is_ap() { Sensing::Full } else { Sensing::EnergyOnly };
            nodes.push(NodeState {
                nav: SimTime::ZERO,
                locked: Vec::new(),
                transmitting: None,
                access: Access {
                    sensing,
                    active: false,
                    backoff: Backoff::new(&mut mac_rng),
                    idle_since: None,
                    fire_at: None,
                    token: 0,
                },
                noise_dbm: phy::noise_floor_dbm(bw, n.noise_figure_db),
                sensitivity_dbm: n.sensitivity_dbm,
            });
            match n.kind {
                NodeKind::Ap => {
                    aps.push(ApState::default());
                    stas.push(None);
                }
                NodeKind::Sta => {
                    let class =
                        n.traffic_class.ok_or_else(|| SimError::Internal(format!("STA {} has no class", n.id)))?;
                    let ap =
                        dep.serving_ap(n.id).ok_or_else(|| SimError::Internal(format!("STA {} unassociated", n.id)))?;
                    let source = TrafficSource::for_class(n.id, class, &cfg.traffic, cfg.scenario.n_broadband_stas)?;
                    stas.push(Some(StaState {
                        class,
                        ap,
                        queue: TxQueue::default(),
                        source,
                        rng: substream(seed, STREAM_TRAFFIC + n.id as u64),
                        grabber: cfg.psr.grabber_classes.contains(&class),
                        sro: None,
                        sro_token: 0,
                        reserved: false,
                        sr: None,
                        sr_count: 0,
                        delivered: 0,
                    }));
                }
            }
        }
        Ok(Sim {
            cfg,
            bw,
            psr_enabled: cfg.psr.enabled,
            end: SimTime::from_secs_f64(cfg.sim.duration_s),
            warmup: SimTime::from_secs_f64(cfg.sim.warmup_ms * 1e-3),
            q: EventQueue::new(),
            dep,
            links,
            mcs: McsTable::with_thresholds(&cfg.phy.min_snr_db),
            nodes,
            aps,
            stas,
            active: Vec::new(),
            history: VecDeque::new(),
            next_tx: 0,
            files: Vec::new(),
            mac_rng,
            phy_rng: substream(seed, STREAM_PHY),
            audit: DropAudit::default(),
            events: 0,
        })
    }

    fn now(&self) -> SimTime {
        self.q.now()
    }

    fn sta(&self, id: NodeId) -> &StaState {
        self.stas[id].as_ref().expect("node is a STA")
    }

    fn sta_mut(&mut self, id: NodeId) -> &mut StaState {
        self.stas[id].as_mut().expect("node is a STA")
    }

    fn internal(&self, what: impl std::fmt::Display) -> SimError {
        SimError::Internal(format!("t={}: {what}", self.now()))
    }

    fn run(&mut self) -> Result<(), SimError> {
        self.q.schedule(self.end, EventKind::DropEnd);
        for id in 0..self.stas.len() {
            let first = match self.stas[id].as_mut() {
                Some(s) => s.source.first_arrival(&mut s.rng),
                None => continue,
            };
            if let Some(t) = first {
                self.q.schedule(t, EventKind::Arrival { sta: id });
            }
        }
        while let Some(ev) = self.q.pop() {
            self.events += 1;
            match ev.kind {
                EventKind::DropEnd => return Ok(()),
                EventKind::Arrival { sta } => self.on_arrival(sta),
                EventKind::BackoffSlot { node, token } => self.on_backoff(node, token)?,
                EventKind::TxEnd { tx } => self.end_tx(tx)?,
                EventKind::NavExpiry { node } => self.refresh(node),
                EventKind::SroDeadline { sta, token } => self.on_sro_deadline(sta, token),
                EventKind::Phase(phase) => self.on_phase(phase)?,
            }
        }
        Err(self.internal("event queue exhausted before drop end"))
    }

    fn finish(self, seed: u64) -> DropResult {
        let mut files = Vec::new();
        let (mut completed, mut censored, mut dropped) = (0, 0, 0);
        for f in self.files.into_iter().filter(|f| f.recorded) {
            match f.record.status {
                FileStatus::Completed(_) => completed += 1,
                FileStatus::Pending => censored += 1,
                FileStatus::Dropped => dropped += 1,
            }
            files.push(f.record);
        }
        let mut sr_transmissions = BTreeMap::new();
        let mut delivered_bytes = BTreeMap::new();
        for (id, s) in self.stas.iter().enumerate() {
            if let Some(s) = s {
                if s.grabber {
                    sr_transmissions.insert(id, s.sr_count);
                }
                delivered_bytes.insert(id, s.delivered);
            }
        }
        DropResult {
            seed,
            psr_enabled: self.psr_enabled,
            duration: self.end,
            files,
            sr_transmissions,
            delivered_bytes,
            completed,
            censored,
            dropped,
            event_count: self.events,
            audit: self.audit,
            wall_time: Duration::ZERO,
        }
    }

    // ---- medium ----

    fn energy_mw(&self, rx: NodeId, skip_starting_now: bool) -> f64 {
        let now = self.now();
        self.active
            .iter()
            .filter(|t| t.node != rx && !(skip_starting_now && t.start == now))
            .map(|t| dbm_to_mw(t.power_dbm + self.links.gain_db(t.node, rx)))
            .sum()
    }

    /// Worst aggregate interference at `rx` over `[start, end)`, ignoring
    /// the transmissions in `exclude`.
    fn interference_mw(&self, rx: NodeId, start: SimTime, end: SimTime, exclude: &[u64]) -> f64 {
        let overlapping: Vec<&Tx> = self
            .history
            .iter()
            .chain(self.active.iter())
            .filter(|t| t.node != rx && t.start < end && t.end > start && !exclude.contains(&t.id))
            .collect();
        let mut worst = 0.0f64;
        let breakpoints = std::iter::once(start).chain(overlapping.iter().map(|t| t.start).filter(|&s| s > start));
        for at in breakpoints {
            let sum: f64 = overlapping
                .iter()
                .filter(|t| t.start <= at && t.end > at)
                .map(|t| dbm_to_mw(t.power_dbm + self.links.gain_db(t.node, rx)))
                .sum();
            worst = worst.max(sum);
        }
        worst
    }

    fn transmitted_during(&self, node: NodeId, start: SimTime, end: SimTime) -> bool {
        self.history.iter().chain(self.active.iter()).any(|t| t.node == node && t.start < end && t.end > start)
    }

    fn sinr_db(&self, desired_dbm: f64, zf: f64, rx: NodeId, interference_mw: f64) -> f64 {
        phy::sinr_db(desired_dbm, zf, self.nodes[rx].noise_dbm, [mw_to_dbm(interference_mw)])
    }

    fn start_tx(
        &mut self,
        node: NodeId,
        kind: FrameKind,
        power_dbm: f64,
        duration: SimTime,
        nav_end: SimTime,
    ) -> Result<u64, SimError> {
        if self.nodes[node].transmitting.is_some() {
            return Err(self.internal(format!("node {node} starts {kind:?} while transmitting")));
        }
        let now = self.now();
        let id = self.next_tx;
        self.next_tx += 1;
        for m in 0..self.nodes.len() {
            if m == node {
                continue;
            }
            let rx = power_dbm + self.links.gain_db(node, m);
            let ns = &mut self.nodes[m];
            if ns.transmitting.is_some() || rx < ns.sensitivity_dbm {
                continue;
            }
            ns.locked.push(id);
            let nav = mac::nav_update(ns.nav, rx, ns.sensitivity_dbm, nav_end);
            if nav > ns.nav && nav > now {
                ns.nav = nav;
                self.q.schedule(nav, EventKind::NavExpiry { node: m });
            }
        }
        self.nodes[node].transmitting = Some(id);
        self.active.push(Tx { id, node, start: now, end: now + duration, power_dbm, kind });
        self.q.schedule(now + duration, EventKind::TxEnd { tx: id });
        self.refresh_all();
        Ok(id)
    }

    fn end_tx(&mut self, id: u64) -> Result<(), SimError> {
        let pos =
            self.active.iter().position(|t| t.id == id).ok_or_else(|| self.internal(format!("unknown tx {id}")))?;
        let tx = self.active.swap_remove(pos);
        self.nodes[tx.node].transmitting = None;
        for ns in &mut self.nodes {
            ns.locked.retain(|&l| l != id);
        }
        self.history.push_back(tx);
        let horizon = self.now().saturating_sub(HISTORY);
        while self.history.front().is_some_and(|t| t.end < horizon) {
            self.history.pop_front();
        }
        self.refresh_all();
        Ok(())
    }

    fn is_idle(&self, n: NodeId) -> bool {
        let ns = &self.nodes[n];
        if ns.transmitting.is_some() {
            return false;
        }
        let energy = mw_to_dbm(self.energy_mw(n, false));
        match ns.access.sensing {
            Sensing::Full => mac::carrier_sense(energy, ns.nav, !ns.locked.is_empty(), self.now()) == Medium::Idle,
            Sensing::EnergyOnly => mac::energy_sense(energy) == Medium::Idle && !self.sta(n).reserved,
        }
    }

    // ---- backoff ----

    fn refresh_all(&mut self) {
        for n in 0..self.nodes.len() {
            self.refresh(n);
        }
    }

    /// Re-evaluates the medium for a contending node: starts the DIFS plus
    /// backoff countdown when it turns idle, freezes it when it turns busy.
    fn refresh(&mut self, n: NodeId) {
        let now = self.now();
        let acc = &self.nodes[n].access;
        if !acc.active || acc.fire_at == Some(now) {
            return;
        }
        let idle = self.is_idle(n);
        let acc = &mut self.nodes[n].access;
        match (idle, acc.idle_since) {
            (true, None) => {
                let fire = now + DIFS + SimTime(SLOT.as_ns() * acc.backoff.counter as u64);
                acc.idle_since = Some(now);
                acc.fire_at = Some(fire);
                acc.token += 1;
                let token = acc.token;
                self.q.schedule(fire, EventKind::BackoffSlot { node: n, token });
            }
            (false, Some(_)) => self.freeze(n),
            _ => {}
        }
    }

    fn freeze(&mut self, n: NodeId) {
        let now = self.now();
        let acc = &mut self.nodes[n].access;
        if let Some(since) = acc.idle_since.take() {
            let counted = since + DIFS;
            if now > counted {
                acc.backoff.elapse((now - counted).as_ns() / SLOT.as_ns());
            }
        }
        acc.fire_at = None;
        acc.token += 1;
    }

    fn activate(&mut self, n: NodeId) {
        if !self.nodes[n].access.active {
            self.nodes[n].access.active = true;
            self.refresh(n);
        }
    }

    fn deactivate(&mut self, n: NodeId) {
        if self.nodes[n].access.active {
            self.freeze(n);
            self.nodes[n].access.active = false;
        }
    }

    fn on_backoff(&mut self, node: NodeId, token: u64) -> Result<(), SimError> {
        let acc = &mut self.nodes[node].access;
        if !acc.active || acc.token != token {
            return Ok(());
        }
        acc.idle_since = None;
        acc.fire_at = None;
        acc.backoff.counter = 0;
        if self.dep.nodes[node].is_ap() {
            self.ap_access(node)
        } else {
            self.sr_access(node)
        }
    }

    // ---- traffic ----

    fn on_arrival(&mut self, sta: NodeId) {
        let now = self.now();
        let file = self.files.len();
        let recorded = now >= self.warmup;
        let s = self.sta_mut(sta);
        let size = s.source.file_size_bytes;
        let record = FileRecord {
            sta,
            class: s.class,
            arrival: now,
            size_bytes: size,
            status: FileStatus::Pending,
            sr_mpdus: 0,
        };
        let parts = traffic::segment(size);
        let remaining = parts.len() as u32;
        for bytes in parts {
            s.queue.push_back(Mpdu::new(file, bytes));
        }
        let next = s.source.next_arrival(&mut s.rng, now);
        let ap = s.ap;
        self.files.push(FileState { record, remaining, recorded });
        if let Some(t) = next {
            self.q.schedule(t, EventKind::Arrival { sta });
        }
        self.wake_ap(ap);
        self.try_sr(sta);
    }

    fn deliver(&mut self, sta: NodeId, mpdu: &Mpdu, via_sr: bool) {
        let now = self.now();
        self.sta_mut(sta).delivered += mpdu.payload_bytes as u64;
        let f = &mut self.files[mpdu.file];
        f.remaining -= 1;
        if via_sr {
            f.record.sr_mpdus += 1;
        }
        if f.remaining == 0 && f.record.status == FileStatus::Pending {
            f.record.status = FileStatus::Completed(now);
        }
    }

    fn lose(&mut self, mpdu: &Mpdu) {
        let f = &mut self.files[mpdu.file];
        if f.record.status == FileStatus::Pending {
            f.record.status = FileStatus::Dropped;
        }
    }

    // ---- scheduled access ----

    fn has_pending(&self, ap: NodeId) -> bool {
        self.stas.iter().enumerate().any(|(id, s)| {
            s.as_ref().is_some_and(|s| s.ap == ap && !s.queue.is_empty() && s.sr.is_none())
                && self.nodes[id].transmitting.is_none()
        })
    }

    fn wake_ap(&mut self, ap: NodeId) {
        if self.aps[ap].txop.is_none() && self.has_pending(ap) {
            self.activate(ap);
        }
    }

    fn ap_access(&mut self, ap: NodeId) -> Result<(), SimError> {
        let now = self.now();
        let pending: Vec<PendingSta> = self
            .stas
            .iter()
            .enumerate()
            .filter_map(|(id, s)| {
                let s = s.as_ref()?;
                (s.ap == ap && !s.queue.is_empty() && s.sr.is_none() && self.nodes[id].transmitting.is_none()).then(
                    || PendingSta {
                        id,
                        class: s.class,
                        pending_bytes: s.queue.pending_air_bytes(),
                        loss_db: self.links.large_scale_loss_db(ap, id),
                        max_tx_power_dbm: self.dep.nodes[id].max_tx_power_dbm,
                    },
                )
            })
            .collect();
        let interference = self.energy_mw(ap, false);
        let params = TriggerParams {
            bandwidth_mhz: self.bw,
            mcs_table: &self.mcs,
            psr_safety_margin_db: self.psr_enabled.then_some(self.cfg.psr.safety_margin_db),
        };
        let ap_node = &self.dep.nodes[ap];
        let n_ant = ap_node.n_antennas;
        let links = &self.links;
        let noise = self.nodes[ap].noise_dbm;
        let built = mac::build_trigger(ap_node, &pending, &mut self.aps[ap].rr, now, &params, |sta, power, k| {
            let zf = phy::zf_gain(n_ant, k).unwrap_or(1.0);
            phy::sinr_db(power + links.gain_db(sta, ap), zf, noise, [mw_to_dbm(interference)])
        });
        self.deactivate(ap);
        let Some((tf, plan)) = built else {
            return Ok(());
        };
        let duration = plan.duration();
        self.audit.txops += 1;
        self.audit.max_txop = self.audit.max_txop.max(duration);
        if duration > TXOP_LIMIT {
            self.audit.txops_over_limit += 1;
        }
        let streams = tf
            .scheduled
            .iter()
            .map(|s| Stream {
                sta: s.sta,
                mcs: s.mcs,
                power_dbm: s.tx_power_dbm,
                decoded: false,
                tx: None,
                mpdus: Vec::new(),
                ok: Vec::new(),
            })
            .collect();
        self.start_tx(ap, FrameKind::Trigger, tf.tx_power_dbm, TRIGGER_FRAME, plan.end)?;
        self.q.schedule(plan.tf_end, EventKind::Phase(Phase::TriggerDelivered { ap }));
        self.aps[ap].txop = Some(Txop { tf, plan, streams, any_success: false });
        Ok(())
    }

    fn on_phase(&mut self, phase: Phase) -> Result<(), SimError> {
        match phase {
            Phase::TriggerDelivered { ap } => self.trigger_delivered(ap),
            Phase::UlStart { ap } => self.ul_start(ap),
            Phase::UlEnd { ap } => self.ul_end(ap),
            Phase::BlockAckStart { ap } => self.block_ack_start(ap),
            Phase::TxopEnd { ap } => self.txop_end(ap),
            Phase::SrEnd { sta } => self.sr_end(sta),
            Phase::SrAckStart { sta } => self.sr_ack_start(sta),
            Phase::SrResolve { sta } => self.sr_resolve(sta),
        }
    }

    fn take_txop(&mut self, ap: NodeId) -> Result<Txop, SimError> {
        self.aps[ap].txop.take().ok_or_else(|| self.internal(format!("AP {ap} has no TXOP")))
    }

    fn can_receive_tf(&self, sta: NodeId, tf_power: f64, ap: NodeId, plan: &TxopPlan) -> bool {
        tf_power + self.links.gain_db(ap, sta) >= self.nodes[sta].sensitivity_dbm
            && self.nodes[sta].transmitting.is_none()
            && !self.transmitted_during(sta, plan.start, plan.tf_end)
    }

    fn trigger_delivered(&mut self, ap: NodeId) -> Result<(), SimError> {
        let now = self.now();
        let mut txop = self.take_txop(ap)?;
        let power = txop.tf.tx_power_dbm;
        for s in &mut txop.streams {
            if self.can_receive_tf(s.sta, power, ap, &txop.plan) {
                s.decoded = true;
                self.stas[s.sta].as_mut().expect("scheduled STA").reserved = true;
            }
        }
        for s in &txop.streams {
            if s.decoded {
                self.deactivate(s.sta);
            }
        }
        if txop.tf.psr_allowed {
            let view = TriggerView {
                donor_ap: ap,
                bss: txop.tf.bss,
                psr_allowed: true,
                psr_input_dbm: txop.tf.psr_input_dbm,
                tx_power_dbm: power,
                ul_end: txop.plan.ul_end,
            };
            for sta in 0..self.stas.len() {
                let eligible = self.stas[sta].as_ref().is_some_and(|s| s.grabber);
                if !eligible || !self.can_receive_tf(sta, power, ap, &txop.plan) {
                    continue;
                }
                let rpl = power + self.links.gain_db(ap, sta);
                let Some(fresh) = psr::detect_sro(&self.dep.nodes[sta], &view, rpl, self.bw, now) else {
                    continue;
                };
                self.audit.sros_granted += 1;
                let s = self.sta_mut(sta);
                let merged = psr::merge_sro(s.sro, fresh, now);
                if s.sro != Some(merged) {
                    s.sro = Some(merged);
                    s.sro_token += 1;
                    let token = s.sro_token;
                    self.q.schedule(merged.deadline, EventKind::SroDeadline { sta, token });
                }
                self.try_sr(sta);
            }
        }
        self.q.schedule(txop.plan.ul_start, EventKind::Phase(Phase::UlStart { ap }));
        self.aps[ap].txop = Some(txop);
        Ok(())
    }

    fn ul_start(&mut self, ap: NodeId) -> Result<(), SimError> {
        let mut txop = self.take_txop(ap)?;
        let plan = txop.plan;
        let ul_duration = plan.ul_end - plan.ul_start;
        let n_symbols = (ul_duration - PREAMBLE).as_ns() / SYMBOL.as_ns();
        let data_start = plan.ul_start + PREAMBLE;
        for s in &mut txop.streams {
            if !s.decoded || self.nodes[s.sta].transmitting.is_some() {
                s.decoded = false;
                continue;
            }
            let mcs = *self.mcs.get(s.mcs);
            let capacity = phy::bits_in_symbols(n_symbols, &mcs, self.bw, 1);
            let bits_per_symbol = phy::bits_per_symbol(&mcs, self.bw);
            let mpdus = self.stas[s.sta].as_mut().expect("scheduled STA").queue.take_fitting(capacity);
            let mut offset = 0u64;
            for m in mpdus {
                let bits = m.air_bytes() * 8;
                let first = (offset as f64 / bits_per_symbol).floor() as u64;
                let last = ((offset + bits) as f64 / bits_per_symbol).ceil() as u64;
                offset += bits;
                let from = data_start + SimTime(first * SYMBOL.as_ns());
                let to = data_start + SimTime(last.min(n_symbols).max(first + 1) * SYMBOL.as_ns());
                s.mpdus.push((m, from, to));
            }
            s.tx = Some(self.start_tx(s.sta, FrameKind::UlMu, s.power_dbm, ul_duration, plan.end)?);
        }
        self.q.schedule(plan.ul_end, EventKind::Phase(Phase::UlEnd { ap }));
        self.aps[ap].txop = Some(txop);
        Ok(())
    }

    fn ul_end(&mut self, ap: NodeId) -> Result<(), SimError> {
        let mut txop = self.take_txop(ap)?;
        let own: Vec<u64> = txop.streams.iter().filter_map(|s| s.tx).collect();
        let zf = phy::zf_gain(self.dep.nodes[ap].n_antennas, txop.tf.scheduled.len())
            .map_err(|e| self.internal(format!("{e:?}")))?;
        let mut any = false;
        for s in &mut txop.streams {
            let mcs = *self.mcs.get(s.mcs);
            let desired = s.power_dbm + self.links.gain_db(s.sta, ap);
            for (_, from, to) in &s.mpdus {
                let ok = !self.transmitted_during(ap, *from, *to) && {
                    let i = self.interference_mw(ap, *from, *to, &own);
                    let sinr = self.sinr_db(desired, zf, ap, i);
                    phy::reception_outcome(sinr, &mcs, &mut self.phy_rng) == Reception::Success
                };
                any |= ok;
                s.ok.push(ok);
            }
        }
        txop.any_success = any;
        if any {
            self.q.schedule(self.now() + SIFS, EventKind::Phase(Phase::BlockAckStart { ap }));
        } else {
            self.q.schedule(txop.plan.end, EventKind::Phase(Phase::TxopEnd { ap }));
        }
        self.aps[ap].txop = Some(txop);
        Ok(())
    }

    fn block_ack_start(&mut self, ap: NodeId) -> Result<(), SimError> {
        let end = self.aps[ap].txop.as_ref().map(|t| t.plan.end).ok_or_else(|| self.internal("BA without TXOP"))?;
        let power = self.dep.nodes[ap].max_tx_power_dbm;
        self.start_tx(ap, FrameKind::BlockAck, power, MULTI_STA_BLOCK_ACK, end)?;
        self.q.schedule(end, EventKind::Phase(Phase::TxopEnd { ap }));
        Ok(())
    }

    fn txop_end(&mut self, ap: NodeId) -> Result<(), SimError> {
        let txop = self.take_txop(ap)?;
        for s in txop.streams {
            self.sta_mut(s.sta).reserved = false;
            let mut failed = Vec::new();
            for ((m, _, _), ok) in s.mpdus.into_iter().zip(s.ok) {
                if ok {
                    self.deliver(s.sta, &m, false);
                } else {
                    failed.push(m);
                }
            }
            let lost = self.sta_mut(s.sta).queue.requeue_failed(failed);
            for m in &lost {
                self.lose(m);
            }
        }
        let backoff = &mut self.nodes[ap].access.backoff;
        if txop.any_success {
            backoff.on_success(&mut self.mac_rng);
        } else {
            self.audit.failed_txops += 1;
            backoff.on_failure(&mut self.mac_rng);
        }
        for sta in txop.tf.scheduled.iter().map(|s| s.sta) {
            self.refresh(sta);
            self.try_sr(sta);
        }
        self.wake_ap(ap);
        Ok(())
    }

    // ---- spatial reuse ----

    fn sr_ready(&self, sta: NodeId) -> bool {
        let s = self.sta(sta);
        self.psr_enabled
            && s.grabber
            && s.sro.is_some_and(|o| o.is_valid(self.now()))
            && !s.queue.is_empty()
            && s.sr.is_none()
            && !s.reserved
            && self.nodes[sta].transmitting.is_none()
    }

    fn try_sr(&mut self, sta: NodeId) {
        if self.sr_ready(sta) {
            self.activate(sta);
        }
    }

    fn on_sro_deadline(&mut self, sta: NodeId, token: u64) {
        let s = self.sta_mut(sta);
        if s.sro_token == token {
            s.sro = None;
            self.deactivate(sta);
        }
    }

    fn sr_access(&mut self, sta: NodeId) -> Result<(), SimError> {
        let now = self.now();
        if !self.sr_ready(sta) {
            self.deactivate(sta);
            return Ok(());
        }
        let s = self.sta(sta);
        let sro = s.sro.expect("checked by sr_ready");
        let ap = s.ap;
        let sta_bss = self.dep.nodes[sta].bss.unwrap_or(ap);
        let air_bytes = s.queue.front().expect("checked by sr_ready").air_bytes();
        let power = sro.max_tx_power_dbm;
        let zf = phy::zf_gain(self.dep.nodes[ap].n_antennas, 1).map_err(|e| self.internal(format!("{e:?}")))?;
        let expected = self.sinr_db(power + self.links.gain_db(sta, ap), zf, ap, self.energy_mw(ap, false));
        let mcs = *self.mcs.select(expected);
        let ppdu = phy::ppdu_duration(air_bytes, &mcs, self.bw, 1);
        let energy = mw_to_dbm(self.energy_mw(sta, true));
        match psr::sr_channel_access(energy, &sro, ppdu, now) {
            SrDecision::Transmit => {
                self.deactivate(sta);
                let exchange_end = now + ppdu + SIFS + ACK;
                let tx = self.start_tx(sta, FrameKind::SrData, power, ppdu, exchange_end)?;
                let s = self.sta_mut(sta);
                let mpdu = s.queue.pop_front().expect("checked by sr_ready");
                s.sr_count += 1;
                s.sr = Some(SrExchange {
                    mpdu,
                    tx,
                    mcs: mcs.index,
                    power_dbm: power,
                    start: now,
                    end: now + ppdu,
                    success: false,
                });
                self.audit.sr.push(SrAudit {
                    sta,
                    sta_bss,
                    donor_ap: sro.donor_ap,
                    donor_bss: sro.donor_bss,
                    start: now,
                    ppdu_end: now + ppdu,
                    exchange_end,
                    deadline: sro.deadline,
                    tx_power_dbm: power,
                    bandwidth_mhz: self.bw,
                    rpl_dbm: sro.rpl_dbm,
                    psr_input_dbm: sro.psr_input_dbm,
                    i_ap_dbm: sro.i_ap_dbm,
                    donor_interference_dbm_per_20mhz: power + self.links.gain_db(sta, sro.donor_ap)
                        - psr::bandwidth_term_db(self.bw),
                });
                self.q.schedule(now + ppdu, EventKind::Phase(Phase::SrEnd { sta }));
            }
            SrDecision::DeferBusy => {
                self.audit.sr_busy_defers += 1;
                self.refresh(sta);
            }
            SrDecision::DeferDeadline => {
                self.audit.sr_deadline_defers += 1;
                self.deactivate(sta);
            }
        }
        Ok(())
    }

    fn sr_end(&mut self, sta: NodeId) -> Result<(), SimError> {
        let ap = self.sta(sta).ap;
        let ex = self.sta(sta).sr.as_ref().ok_or_else(|| self.internal("SR end without exchange"))?;
        let (tx, start, end, power, mcs) = (ex.tx, ex.start, ex.end, ex.power_dbm, *self.mcs.get(ex.mcs));
        let zf = phy::zf_gain(self.dep.nodes[ap].n_antennas, 1).map_err(|e| self.internal(format!("{e:?}")))?;
        let ok = self.aps[ap].txop.is_none() && !self.transmitted_during(ap, start, end) && {
            let i = self.interference_mw(ap, start, end, &[tx]);
            let sinr = self.sinr_db(power + self.links.gain_db(sta, ap), zf, ap, i);
            phy::reception_outcome(sinr, &mcs, &mut self.phy_rng) == Reception::Success
        };
        self.sta_mut(sta).sr.as_mut().expect("exchange present").success = ok;
        let now = self.now();
        if ok {
            self.q.schedule(now + SIFS, EventKind::Phase(Phase::SrAckStart { sta }));
        } else {
            self.q.schedule(now + SIFS + ACK, EventKind::Phase(Phase::SrResolve { sta }));
        }
        Ok(())
    }

    fn sr_ack_start(&mut self, sta: NodeId) -> Result<(), SimError> {
        let now = self.now();
        let ap = self.sta(sta).ap;
        if self.nodes[ap].transmitting.is_some() || self.aps[ap].txop.is_some() {
            self.sta_mut(sta).sr.as_mut().expect("exchange present").success = false;
        } else {
            let power = self.dep.nodes[ap].max_tx_power_dbm;
            self.start_tx(ap, FrameKind::Ack, power, ACK, now + ACK)?;
        }
        self.q.schedule(now + ACK, EventKind::Phase(Phase::SrResolve { sta }));
        Ok(())
    }

    fn sr_resolve(&mut self, sta: NodeId) -> Result<(), SimError> {
        let ex = self.sta_mut(sta).sr.take().ok_or_else(|| self.internal("SR resolve without exchange"))?;
        if ex.success {
            self.audit.sr_acked += 1;
            self.deliver(sta, &ex.mpdu, true);
            self.nodes[sta].access.backoff.on_success(&mut self.mac_rng);
        } else {
            let lost = self.sta_mut(sta).queue.requeue_failed(vec![ex.mpdu]);
            for m in &lost {
                self.lose(m);
            }
            self.nodes[sta].access.backoff.on_failure(&mut self.mac_rng);
        }
        self.try_sr(sta);
        let ap = self.sta(sta).ap;
        self.wake_ap(ap);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.sim.duration_s = 0.2;
        cfg
    }

    #[test]
    fn substreams_differ() {
        use rand::RngCore;
        assert_ne!(substream(1, 0).next_u64(), substream(1, 1).next_u64());
        assert_eq!(substream(1, 3).next_u64(), substream(1, 3).next_u64());
    }

    #[test]
    fn short_drop_runs_and_conserves_files() {
        let mut cfg = quiet();
        cfg.psr.enabled = true;
        let r = run_drop(&cfg, 7).unwrap();
        assert_eq!(r.completed + r.censored + r.dropped, r.files.len());
        assert!(r.completed > 0);
        assert!(r.audit.txops > 0);
        for f in &r.files {
            if let Some(d) = f.delay() {
                assert!(d > SimTime::ZERO);
            }
        }
    }

    #[test]
    fn baseline_never_uses_sr() {
        let r = run_drop(&quiet(), 3).unwrap();
        assert!(r.audit.sr.is_empty());
        assert!(r.sr_transmissions.values().all(|&c| c == 0));
        assert_eq!(r.audit.sros_granted, 0);
    }
}
