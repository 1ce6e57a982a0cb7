//! Per-link propagation: InH-Office LOS probability and pathloss, log-normal
//! shadowing and a static per-drop Rayleigh fading matrix.
//!
//! All large-scale quantities are drawn once per unordered node pair, so the
//! loss from `a` to `b` always equals the loss from `b` to `a`. The fading
//! matrix for `b -> a` is the transpose of the one for `a -> b`, which keeps
//! its mean power reciprocal as well.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::config::ChannelConfig;
use crate::scenario::{Deployment, NodeId};

/// LOS probability for an indoor open-office link at 2-D distance `d2d_m`.
pub fn los_probability(d2d_m: f64) -> f64 {
    if d2d_m <= 5.0 {
        1.0
    } else if d2d_m <= 49.0 {
        (-(d2d_m - 5.0) / 70.8).exp()
    } else {
        (-(d2d_m - 49.0) / 211.7).exp() * 0.54
    }
}

/// InH-Office pathloss in dB. Distances below 1 m are clamped to 1 m.
pub fn pathloss_db(d3d_m: f64, carrier_ghz: f64, is_los: bool) -> f64 {
    let d = d3d_m.max(1.0);
    let los = 32.4 + 17.3 * d.log10() + 20.0 * carrier_ghz.log10();
    if is_los {
        los
    } else {
        let nlos = 17.3 + 38.3 * d.log10() + 24.9 * carrier_ghz.log10();
        los.max(nlos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    /// Lower node id of the pair.
    pub tx: NodeId,
    pub rx: NodeId,
    pub d3d_m: f64,
    pub is_los: bool,
    pub pathloss_db: f64,
    /// Positive values attenuate.
    pub shadowing_db: f64,
    /// Row-major `rx antennas x tx antennas` for the `tx -> rx` direction;
    /// `None` when fading is disabled.
    pub fading: Option<FadingMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex64>,
}

impl FadingMatrix {
    pub fn draw<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let entries = (0..rows * cols)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re * s, im * s)
            })
            .collect();
        FadingMatrix { rows, cols, entries }
    }

    pub fn mean_power(&self) -> f64 {
        self.entries.iter().map(|h| h.norm_sqr()).sum::<f64>() / self.entries.len() as f64
    }

    pub fn transpose(&self) -> FadingMatrix {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.entries[r * self.cols + c]);
            }
        }
        FadingMatrix { rows: self.cols, cols: self.rows, entries }
    }
}

impl LinkState {
    /// A link with fixed LOS state and shadowing, fading disabled.
    pub fn deterministic(a: NodeId, b: NodeId, d3d_m: f64, is_los: bool, carrier_ghz: f64, shadowing_db: f64) -> Self {
        LinkState {
            tx: a.min(b),
            rx: a.max(b),
            d3d_m,
            is_los,
            pathloss_db: pathloss_db(d3d_m, carrier_ghz, is_los),
            shadowing_db,
            fading: None,
        }
    }

    pub fn large_scale_loss_db(&self) -> f64 {
        self.pathloss_db + self.shadowing_db
    }

    /// `10 log10` of the mean fading power; 0 dB when fading is disabled.
    pub fn fading_gain_db(&self) -> f64 {
        self.fading.as_ref().map_or(0.0, |f| 10.0 * f.mean_power().log10())
    }
}

/// Received power (dBm) over the whole transmission bandwidth.
pub fn rx_power_dbm(tx_power_dbm: f64, link: &LinkState) -> f64 {
    tx_power_dbm - link.pathloss_db - link.shadowing_db + link.fading_gain_db()
}

/// The frozen channel realization of one drop.
#[derive(Debug, Clone)]
pub struct LinkTable {
    n: usize,
    links: Vec<LinkState>,
    /// Dense symmetric cache of `-(pathloss + shadowing) + fading` in dB.
    gain: Vec<f64>,
    loss: Vec<f64>,
}

impl LinkTable {
    pub fn build<R: Rng + ?Sized>(deployment: &Deployment, cfg: &ChannelConfig, rng: &mut R) -> Self {
        let n = deployment.nodes.len();
        let mut links = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let los_shadow = Normal::new(0.0, cfg.los_sigma_db).expect("sigma validated");
        let nlos_shadow = Normal::new(0.0, cfg.nlos_sigma_db).expect("sigma validated");
        for a in 0..n {
            for b in a + 1..n {
                let pa = &deployment.nodes[a].position;
                let pb = &deployment.nodes[b].position;
                let d2d = pa.distance_2d(pb);
                let d3d = pa.distance_3d(pb);
                let is_los = rng.random::<f64>() < los_probability(d2d);
                let shadowing_db = if is_los { los_shadow.sample(rng) } else { nlos_shadow.sample(rng) };
                let fading = cfg
                    .fading_enabled
                    .then(|| FadingMatrix::draw(deployment.nodes[b].n_antennas, deployment.nodes[a].n_antennas, rng));
                links.push(LinkState {
                    tx: a,
                    rx: b,
                    d3d_m: d3d,
                    is_los,
                    pathloss_db: pathloss_db(d3d, cfg.carrier_ghz, is_los),
                    shadowing_db,
                    fading,
                });
            }
        }
        let mut table = LinkTable { n, links, gain: vec![0.0; n * n], loss: vec![0.0; n * n] };
        table.refresh_cache();
        table
    }

    fn index(&self, a: NodeId, b: NodeId) -> usize {
        let (lo, hi) = (a.min(b), a.max(b));
        assert!(lo != hi && hi < self.n, "no link between {a} and {b}");
        // Row-major upper triangle without the diagonal.
        lo * (2 * self.n - lo - 1) / 2 + (hi - lo - 1)
    }

    fn refresh_cache(&mut self) {
        for a in 0..self.n {
            for b in a + 1..self.n {
                let l = &self.links[self.index(a, b)];
                let g = -l.large_scale_loss_db() + l.fading_gain_db();
                let loss = l.large_scale_loss_db();
                self.gain[a * self.n + b] = g;
                self.gain[b * self.n + a] = g;
                self.loss[a * self.n + b] = loss;
                self.loss[b * self.n + a] = loss;
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn link(&self, a: NodeId, b: NodeId) -> &LinkState {
        &self.links[self.index(a, b)]
    }

    /// Fading matrix for the `from -> to` direction.
    pub fn fading(&self, from: NodeId, to: NodeId) -> Option<FadingMatrix> {
        let l = self.link(from, to);
        l.fading.as_ref().map(|f| if from == l.tx { f.clone() } else { f.transpose() })
    }

    /// Replaces one link (test hook for hand-built geometries).
    pub fn set_link(&mut self, a: NodeId, b: NodeId, mut link: LinkState) {
        link.tx = a.min(b);
        link.rx = a.max(b);
        let i = self.index(a, b);
        self.links[i] = link;
        self.refresh_cache();
    }

    /// Pathloss plus shadowing, in dB.
    pub fn large_scale_loss_db(&self, a: NodeId, b: NodeId) -> f64 {
        self.loss[a * self.n + b]
    }

    /// Total link gain in dB, fading included.
    pub fn gain_db(&self, a: NodeId, b: NodeId) -> f64 {
        self.gain[a * self.n + b]
    }

    pub fn rx_power_dbm(&self, tx_power_dbm: f64, from: NodeId, to: NodeId) -> f64 {
        tx_power_dbm + self.gain_db(from, to)
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}
