//! Deployment geometry: AP placement, STA drop and STA-AP association.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::LinkTable;
use crate::config::ScenarioConfig;
use crate::error::ConfigError;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Ap,
    Sta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficClass {
    Broadband,
    LowLatency,
}

impl TrafficClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TrafficClass::Broadband => "broadband",
            TrafficClass::LowLatency => "low-latency",
        }
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn distance_2d(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_3d(&self, other: &Position) -> f64 {
        let d2 = self.distance_2d(other);
        d2.hypot(self.z - other.z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// BSS identifier, equal to the serving AP id. `None` for a STA until
    /// association has run.
    pub bss: Option<NodeId>,
    pub position: Position,
    pub n_antennas: usize,
    pub max_tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub sensitivity_dbm: f64,
    pub psr_capable: bool,
    /// `None` for APs.
    pub traffic_class: Option<TrafficClass>,
}

impl Node {
    pub fn is_ap(&self) -> bool {
        self.kind == NodeKind::Ap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub nodes: Vec<Node>,
    /// STA id to serving AP id.
    pub association: BTreeMap<NodeId, NodeId>,
    pub room_length_m: f64,
    pub room_width_m: f64,
}

impl Deployment {
    pub fn aps(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_ap())
    }

    pub fn stas(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| !n.is_ap())
    }

    pub fn n_aps(&self) -> usize {
        self.aps().count()
    }

    pub fn serving_ap(&self, sta: NodeId) -> Option<NodeId> {
        self.association.get(&sta).copied()
    }

    pub fn contains(&self, p: &Position) -> bool {
        p.x > 0.0 && p.x < self.room_length_m && p.y > 0.0 && p.y < self.room_width_m
    }
}

/// Places APs on the room centerline and drops STAs uniformly on the floor.
///
/// Node ids: APs first (`0..n_aps`), then the low-latency STAs, then the
/// broadband STAs. Association is left empty.
pub fn deploy<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    psr_capable: bool,
    rng: &mut R,
) -> Result<Deployment, ConfigError> {
    let d = cfg.inter_ap_distance_m;
    if !(d.is_finite() && d > 0.0) {
        return Err(ConfigError::invalid("scenario.inter_ap_distance_m", "must be > 0"));
    }
    if cfg.n_aps == 0 {
        return Err(ConfigError::invalid("scenario.n_aps", "must be >= 1"));
    }
    let length = cfg.n_aps as f64 * d;
    let width = d;
    let mut nodes = Vec::with_capacity(cfg.n_aps + cfg.n_broadband_stas + cfg.n_lowlatency_stas);
    for k in 0..cfg.n_aps {
        nodes.push(Node {
            id: k,
            kind: NodeKind::Ap,
            bss: Some(k),
            position: Position { x: d / 2.0 + k as f64 * d, y: d / 2.0, z: cfg.ap_height_m },
            n_antennas: cfg.ap_antennas,
            max_tx_power_dbm: cfg.ap_max_tx_power_dbm,
            noise_figure_db: cfg.ap_noise_figure_db,
            sensitivity_dbm: cfg.sensitivity_dbm,
            psr_capable,
            traffic_class: None,
        });
    }
    let n_stas = cfg.n_lowlatency_stas + cfg.n_broadband_stas;
    for i in 0..n_stas {
        let class = if i < cfg.n_lowlatency_stas { TrafficClass::LowLatency } else { TrafficClass::Broadband };
        let position = Position { x: open_uniform(rng, length), y: open_uniform(rng, width), z: cfg.sta_height_m };
        nodes.push(Node {
            id: nodes.len(),
            kind: NodeKind::Sta,
            bss: None,
            position,
            n_antennas: cfg.sta_antennas,
            max_tx_power_dbm: cfg.sta_max_tx_power_dbm,
            noise_figure_db: cfg.sta_noise_figure_db,
            sensitivity_dbm: cfg.sensitivity_dbm,
            psr_capable,
            traffic_class: Some(class),
        });
    }
    Ok(Deployment { nodes, association: BTreeMap::new(), room_length_m: length, room_width_m: width })
}

/// Uniform on the open interval (0, hi).
fn open_uniform<R: Rng + ?Sized>(rng: &mut R, hi: f64) -> f64 {
    loop {
        let v = rng.random_range(0.0..hi);
        if v > 0.0 {
            return v;
        }
    }
}

/// Associates every STA with the AP giving the strongest average received
/// signal (AP max power minus pathloss minus shadowing; fading excluded).
/// Ties go to the lowest AP id.
pub fn associate(mut deployment: Deployment, links: &LinkTable) -> Deployment {
    let aps: Vec<(NodeId, f64)> = deployment.aps().map(|a| (a.id, a.max_tx_power_dbm)).collect();
    let mut association = BTreeMap::new();
    for sta in deployment.nodes.iter_mut().filter(|n| !n.is_ap()) {
        let mut best: Option<(NodeId, f64)> = None;
        for &(ap, power) in &aps {
            let rss = power - links.large_scale_loss_db(ap, sta.id);
            if best.is_none_or(|(_, b)| rss > b) {
                best = Some((ap, rss));
            }
        }
        let (ap, _) = best.expect("deployment has at least one AP");
        sta.bss = Some(ap);
        association.insert(sta.id, ap);
    }
    deployment.association = association;
    deployment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{LinkState, LinkTable};
    use crate::config::ChannelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(d: f64) -> ScenarioConfig {
        ScenarioConfig { inter_ap_distance_m: d, ..ScenarioConfig::default() }
    }

    #[test]
    fn aps_on_centerline() {
        let dep = deploy(&cfg(20.0), false, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let aps: Vec<_> = dep.aps().map(|a| (a.position.x, a.position.y, a.position.z)).collect();
        assert_eq!(aps, vec![(10.0, 10.0, 3.0), (30.0, 10.0, 3.0), (50.0, 10.0, 3.0)]);
    }

    #[test]
    fn no_stas_gives_only_aps() {
        let c = ScenarioConfig { n_broadband_stas: 0, n_lowlatency_stas: 0, ..cfg(20.0) };
        let dep = deploy(&c, false, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(dep.nodes.len(), 3);
        assert_eq!(dep.stas().count(), 0);
    }

    #[test]
    fn stas_inside_room_d10() {
        let dep = deploy(&cfg(10.0), false, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!((dep.room_length_m, dep.room_width_m), (30.0, 10.0));
        for s in dep.stas() {
            assert!(dep.contains(&s.position));
            assert_eq!(s.position.z, 1.0);
        }
        let ll = dep.stas().filter(|s| s.traffic_class == Some(TrafficClass::LowLatency)).count();
        let bb = dep.stas().filter(|s| s.traffic_class == Some(TrafficClass::Broadband)).count();
        assert_eq!((ll, bb), (8, 16));
        // The low-latency STAs are the first drawn.
        assert!(dep.nodes[3..11].iter().all(|s| s.traffic_class == Some(TrafficClass::LowLatency)));
    }

    #[test]
    fn non_positive_distance_is_error() {
        assert!(deploy(&cfg(0.0), false, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
        assert!(deploy(&cfg(-3.0), false, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn deploy_is_deterministic() {
        let a = deploy(&cfg(20.0), true, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = deploy(&cfg(20.0), true, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a, b);
    }

    fn manual(sta_x: f64, shadow: [f64; 2]) -> (Deployment, LinkTable) {
        let c = ScenarioConfig { n_aps: 2, n_broadband_stas: 1, n_lowlatency_stas: 0, ..cfg(20.0) };
        let mut dep = deploy(&c, false, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        dep.nodes[2].position = Position { x: sta_x, y: 10.0, z: 1.0 };
        let ch = ChannelConfig { fading_enabled: false, ..ChannelConfig::default() };
        let mut links = LinkTable::build(&dep, &ch, &mut ChaCha8Rng::seed_from_u64(1));
        for (ap, s) in [(0usize, shadow[0]), (1, shadow[1])] {
            let d = dep.nodes[ap].position.distance_3d(&dep.nodes[2].position);
            links.set_link(ap, 2, LinkState::deterministic(ap, 2, d, true, 5.18, s));
        }
        (dep, links)
    }

    #[test]
    fn sta_under_ap_associates_to_it() {
        let (dep, links) = manual(30.0, [0.0, 0.0]);
        let dep = associate(dep, &links);
        assert_eq!(dep.serving_ap(2), Some(1));
        assert_eq!(dep.nodes[2].bss, Some(1));
    }

    #[test]
    fn equidistant_tie_goes_to_lowest_id() {
        let (dep, links) = manual(20.0, [0.0, 0.0]);
        assert_eq!(associate(dep, &links).serving_ap(2), Some(0));
    }

    #[test]
    fn shadowing_can_favor_far_ap() {
        // STA at x=18: 8 m from AP0, 12 m from AP1 (2-D). Give AP0 enough
        // shadowing loss that AP1 ends up 1 dB stronger.
        let (dep, links) = manual(18.0, [0.0, 0.0]);
        let l0 = links.large_scale_loss_db(0, 2);
        let l1 = links.large_scale_loss_db(1, 2);
        let extra = (l1 - l0) + 1.0;
        let (dep2, links2) = manual(18.0, [extra, 0.0]);
        assert_eq!(associate(dep, &links).serving_ap(2), Some(0));
        let rss0 = 24.0 - links2.large_scale_loss_db(0, 2);
        let rss1 = 24.0 - links2.large_scale_loss_db(1, 2);
        assert!((rss1 - rss0 - 1.0).abs() < 1e-9);
        assert_eq!(associate(dep2, &links2).serving_ap(2), Some(1));
    }
}
