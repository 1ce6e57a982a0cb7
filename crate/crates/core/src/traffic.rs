//! Application traffic: FTP3 (Poisson file arrivals of fixed size) for
//! broadband STAs and strictly periodic small files for low-latency STAs.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::config::TrafficConfig;
use crate::error::ConfigError;
use crate::scenario::{NodeId, TrafficClass};
use crate::time::SimTime;

/// Largest MSDU carried by one MPDU.
pub const MAX_MSDU_BYTES: u32 = 1500;
/// Transport, IP and MAC header bytes added to every MPDU.
pub const HEADER_BYTES: u32 = 40;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    /// Poisson arrivals at `rate_per_s` files per second. A zero rate never fires.
    Ftp3 {
        rate_per_s: f64,
    },
    Periodic {
        interval: SimTime,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSource {
    pub owner: NodeId,
    pub kind: SourceKind,
    pub file_size_bytes: u32,
}

impl TrafficSource {
    pub fn new(owner: NodeId, kind: SourceKind, file_size_bytes: u32) -> Result<Self, ConfigError> {
        if file_size_bytes == 0 {
            return Err(ConfigError::invalid("traffic.file_bytes", "files must be non-empty"));
        }
        match kind {
            SourceKind::Ftp3 { rate_per_s } if !(rate_per_s >= 0.0 && rate_per_s.is_finite()) => {
                return Err(ConfigError::invalid("traffic.broadband_load_mbps", "arrival rate must be >= 0"));
            }
            SourceKind::Periodic { interval } if interval == SimTime::ZERO => {
                return Err(ConfigError::invalid("traffic.lowlatency_period_ms", "period must be > 0"));
            }
            _ => {}
        }
        Ok(TrafficSource { owner, kind, file_size_bytes })
    }

    /// Builds the source for a STA of the given class from the traffic
    /// configuration. Broadband load is split evenly across `n_broadband` STAs.
    pub fn for_class(
        owner: NodeId,
        class: TrafficClass,
        cfg: &TrafficConfig,
        n_broadband: usize,
    ) -> Result<Self, ConfigError> {
        match class {
            TrafficClass::Broadband => {
                let rate = ftp3_rate_per_sta(cfg.broadband_load_mbps, n_broadband, cfg.broadband_file_bytes);
                TrafficSource::new(owner, SourceKind::Ftp3 { rate_per_s: rate }, cfg.broadband_file_bytes)
            }
            TrafficClass::LowLatency => TrafficSource::new(
                owner,
                SourceKind::Periodic { interval: SimTime::from_secs_f64(cfg.lowlatency_period_ms * 1e-3) },
                cfg.lowlatency_file_bytes,
            ),
        }
    }

    /// First arrival: exponential for FTP3, uniform phase in `[0, interval)`
    /// for periodic sources.
    pub fn first_arrival<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<SimTime> {
        match self.kind {
            SourceKind::Periodic { interval } => Some(SimTime(rng.random_range(0..interval.as_ns()))),
            SourceKind::Ftp3 { .. } => self.next_arrival(rng, SimTime::ZERO),
        }
    }

    pub fn next_arrival<R: Rng + ?Sized>(&self, rng: &mut R, now: SimTime) -> Option<SimTime> {
        match self.kind {
            SourceKind::Ftp3 { rate_per_s } => {
                if rate_per_s <= 0.0 {
                    return None;
                }
                let gap: f64 = Exp::new(rate_per_s).expect("positive rate").sample(rng);
                Some(now + SimTime::from_secs_f64(gap))
            }
            SourceKind::Periodic { interval } => Some(now + interval),
        }
    }
}

/// Per-STA FTP3 file rate for an aggregate load split over `n_stas`.
pub fn ftp3_rate_per_sta(aggregate_load_mbps: f64, n_stas: usize, file_bytes: u32) -> f64 {
    if n_stas == 0 {
        return 0.0;
    }
    aggregate_load_mbps * 1e6 / (n_stas as f64 * file_bytes as f64 * 8.0)
}

/// Splits a file into MPDU payload sizes (MSDU bytes, headers excluded).
pub fn segment(file_bytes: u32) -> Vec<u32> {
    let full = file_bytes / MAX_MSDU_BYTES;
    let rem = file_bytes % MAX_MSDU_BYTES;
    let mut out = vec![MAX_MSDU_BYTES; full as usize];
    if rem > 0 {
        out.push(rem);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FileStatus {
    Completed(SimTime),
    /// Still in flight when the drop ended.
    Pending,
    /// Lost after exhausting retries twice.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub sta: NodeId,
    pub class: TrafficClass,
    pub arrival: SimTime,
    pub size_bytes: u32,
    pub status: FileStatus,
    /// MPDUs of this file delivered inside spatial reuse opportunities.
    pub sr_mpdus: u32,
}

impl FileRecord {
    pub fn completed(&self) -> Option<SimTime> {
        match self.status {
            FileStatus::Completed(t) => Some(t),
            _ => None,
        }
    }

    pub fn delay(&self) -> Option<SimTime> {
        self.completed().map(|c| c - self.arrival)
    }

    pub fn throughput_mbps(&self) -> Option<f64> {
        self.delay().map(|d| self.size_bytes as f64 * 8.0 / d.as_us_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn load_split() {
        assert!((ftp3_rate_per_sta(100.0, 16, 500_000) - 1.5625).abs() < 1e-12);
        assert_eq!(ftp3_rate_per_sta(0.0, 16, 500_000), 0.0);
    }

    #[test]
    fn zero_load_never_arrives() {
        let src = TrafficSource::new(3, SourceKind::Ftp3 { rate_per_s: 0.0 }, 500_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(src.first_arrival(&mut rng), None);
    }

    #[test]
    fn periodic_is_exact() {
        let src = TrafficSource::for_class(4, TrafficClass::LowLatency, &TrafficConfig::default(), 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let first = src.first_arrival(&mut rng).unwrap();
        assert!(first < SimTime::from_ms(10));
        let mut t = first;
        for _ in 0..100 {
            let next = src.next_arrival(&mut rng, t).unwrap();
            assert_eq!(next - t, SimTime::from_ms(10));
            t = next;
        }
        // 25.6 kbps offered.
        let kbps = src.file_size_bytes as f64 * 8.0 / 0.010 / 1e3;
        assert_eq!(kbps, 25.6);
    }

    #[test]
    fn segmentation() {
        assert_eq!(segment(32), vec![32]);
        let s = segment(500_000);
        assert_eq!(s.len(), 334);
        assert_eq!(s.iter().filter(|&&b| b == 1500).count(), 333);
        assert_eq!(s.iter().map(|&b| b as u64).sum::<u64>(), 500_000);
        assert_eq!(segment(3000), vec![1500, 1500]);
    }

    proptest::proptest! {
        #[test]
        fn segments_reconstruct_file(bytes in 1u32..5_000_000) {
            let s = segment(bytes);
            proptest::prop_assert_eq!(s.iter().map(|&b| b as u64).sum::<u64>(), bytes as u64);
            proptest::prop_assert!(s.iter().all(|&b| b > 0 && b <= MAX_MSDU_BYTES));
            proptest::prop_assert_eq!(s.len() as u32, bytes.div_ceil(MAX_MSDU_BYTES));
        }
    }

    #[test]
    fn empty_file_rejected() {
        assert!(TrafficSource::new(3, SourceKind::Periodic { interval: SimTime::from_ms(10) }, 0).is_err());
    }

    #[test]
    fn poisson_count_within_three_sigma() {
        let rate = 50.0;
        let src = TrafficSource::new(3, SourceKind::Ftp3 { rate_per_s: rate }, 500_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let horizon = SimTime::from_ms(200_000);
        let mut n = 0u64;
        let mut t = src.first_arrival(&mut rng).unwrap();
        while t < horizon {
            n += 1;
            t = src.next_arrival(&mut rng, t).unwrap();
        }
        let mean = rate * horizon.as_secs_f64();
        assert!((n as f64 - mean).abs() <= 3.0 * mean.sqrt(), "{n} vs {mean}");
    }

    #[test]
    fn record_metrics() {
        let r = FileRecord {
            sta: 3,
            class: TrafficClass::Broadband,
            arrival: SimTime::from_ms(1),
            size_bytes: 500_000,
            status: FileStatus::Completed(SimTime::from_ms(21)),
            sr_mpdus: 0,
        };
        assert_eq!(r.delay(), Some(SimTime::from_ms(20)));
        assert!((r.throughput_mbps().unwrap() - 200.0).abs() < 1e-9);
    }
}
