//! Pooled delay and throughput statistics.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::engine::sim::DropResult;
use crate::scenario::TrafficClass;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("percentile of an empty sample set")]
    Empty,
    #[error("percentile {0} outside [0, 100]")]
    OutOfRange(String),
}

/// Nearest-rank percentile: the smallest sample with at least `p`% of the
/// samples at or below it.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(MetricsError::OutOfRange(p.to_string()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(nearest_rank(&sorted, p))
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Empirical CDF over sorted samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Ecdf { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    pub fn percentile(&self, p: f64) -> Result<f64, MetricsError> {
        if self.sorted.is_empty() {
            return Err(MetricsError::Empty);
        }
        if !(0.0..=100.0).contains(&p) {
            return Err(MetricsError::OutOfRange(p.to_string()));
        }
        Ok(nearest_rank(&self.sorted, p))
    }

    /// Step points `(x, F(x))`, one per distinct sample value.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in self.sorted.iter().enumerate() {
            let y = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = y,
                _ => out.push((x, y)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: TrafficClass,
    /// File delays of completed files, microseconds.
    pub delay_us: Ecdf,
    /// Per-file throughput of completed files, Mbps.
    pub throughput_mbps: Ecdf,
    pub files: usize,
    pub censored: usize,
    pub dropped: usize,
}

impl ClassMetrics {
    fn new(class: TrafficClass) -> Self {
        ClassMetrics {
            class,
            delay_us: Ecdf::new(Vec::new()),
            throughput_mbps: Ecdf::new(Vec::new()),
            files: 0,
            censored: 0,
            dropped: 0,
        }
    }

    pub fn delay_percentile_us(&self, p: f64) -> Result<f64, MetricsError> {
        self.delay_us.percentile(p)
    }

    pub fn mean_throughput_mbps(&self) -> Option<f64> {
        let s = self.throughput_mbps.samples();
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    }

    pub fn median_throughput_mbps(&self) -> Option<f64> {
        self.throughput_mbps.percentile(50.0).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub drops: usize,
    pub classes: BTreeMap<TrafficClass, ClassMetrics>,
    /// SR transmissions per eligible STA per drop, pooled.
    pub sro_counts: Vec<u32>,
}

impl MetricsSummary {
    /// Pools the file records of all drops. Input order does not matter.
    pub fn from_drops(drops: &[DropResult]) -> Self {
        let mut delays: BTreeMap<TrafficClass, Vec<f64>> = BTreeMap::new();
        let mut tputs: BTreeMap<TrafficClass, Vec<f64>> = BTreeMap::new();
        let mut classes: BTreeMap<TrafficClass, ClassMetrics> = BTreeMap::new();
        let mut sro_counts = Vec::new();
        for d in drops {
            for f in &d.files {
                let c = classes.entry(f.class).or_insert_with(|| ClassMetrics::new(f.class));
                c.files += 1;
                match f.status {
                    crate::traffic::FileStatus::Pending => c.censored += 1,
                    crate::traffic::FileStatus::Dropped => c.dropped += 1,
                    crate::traffic::FileStatus::Completed(_) => {}
                }
                if let (Some(delay), Some(tput)) = (f.delay(), f.throughput_mbps()) {
                    delays.entry(f.class).or_default().push(delay.as_us_f64());
                    tputs.entry(f.class).or_default().push(tput);
                }
            }
            sro_counts.extend(d.sr_transmissions.values().copied());
        }
        for (class, c) in classes.iter_mut() {
            c.delay_us = Ecdf::new(delays.remove(class).unwrap_or_default());
            c.throughput_mbps = Ecdf::new(tputs.remove(class).unwrap_or_default());
        }
        sro_counts.sort_unstable();
        MetricsSummary { drops: drops.len(), classes, sro_counts }
    }

    pub fn class(&self, class: TrafficClass) -> Option<&ClassMetrics> {
        self.classes.get(&class)
    }

    /// Fraction of eligible STAs (per drop) that never transmitted in an SRO.
    pub fn zero_sro_fraction(&self) -> Option<f64> {
        if self.sro_counts.is_empty() {
            return None;
        }
        Some(self.sro_counts.iter().filter(|&&c| c == 0).count() as f64 / self.sro_counts.len() as f64)
    }
}
