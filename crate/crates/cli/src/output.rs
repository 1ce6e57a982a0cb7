//! Result files: `files.csv`, `sro_counts.csv` and `summary.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use psrsim_core::{Campaign, DropResult, MetricsSummary, TrafficClass};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FILES_CSV: &str = "files.csv";
pub const SRO_COUNTS_CSV: &str = "sro_counts.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// Percentiles reported in `summary.json`.
pub const REPORTED_PERCENTILES: [f64; 4] = [50.0, 85.0, 95.0, 99.0];

/// One row of `files.csv`. Pending and dropped files leave the completion
/// columns empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRow {
    pub drop_seed: u64,
    pub sta_id: usize,
    pub traffic_class: TrafficClass,
    pub arrival_ns: u64,
    pub completed_ns: Option<u64>,
    pub size_bytes: u32,
    pub delay_us: Option<f64>,
    pub throughput_mbps: Option<f64>,
    /// 1 when at least one MPDU of the file went out in an SRO.
    pub via_sr: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SroRow {
    pub drop_seed: u64,
    pub sta_id: usize,
    pub sr_transmissions_gained: u32,
}

pub fn file_rows(drops: &[DropResult]) -> Vec<FileRow> {
    drops
        .iter()
        .flat_map(|d| {
            d.files.iter().map(move |f| FileRow {
                drop_seed: d.seed,
                sta_id: f.sta,
                traffic_class: f.class,
                arrival_ns: f.arrival.as_ns(),
                completed_ns: f.completed().map(|t| t.as_ns()),
                size_bytes: f.size_bytes,
                delay_us: f.delay().map(|t| t.as_us_f64()),
                throughput_mbps: f.throughput_mbps(),
                via_sr: u8::from(f.sr_mpdus > 0),
            })
        })
        .collect()
}

pub fn sro_rows(drops: &[DropResult]) -> Vec<SroRow> {
    drops
        .iter()
        .flat_map(|d| {
            d.sr_transmissions.iter().map(move |(&sta, &n)| SroRow {
                drop_seed: d.seed,
                sta_id: sta,
                sr_transmissions_gained: n,
            })
        })
        .collect()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv { path: path.display().to_string(), source }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub samples: usize,
    pub censored: usize,
    pub dropped: usize,
    /// Keyed by percentile, e.g. `"p95"`. Empty without samples.
    pub delay_percentiles_us: BTreeMap<String, f64>,
    pub mean_throughput_mbps: Option<f64>,
    pub median_throughput_mbps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub label: String,
    pub psr_enabled: bool,
    pub inter_ap_distance_m: f64,
    pub broadband_load_mbps: f64,
    pub ap_antennas: usize,
    pub drops: usize,
    pub master_seed: u64,
    pub classes: BTreeMap<TrafficClass, ClassSummary>,
    pub zero_sro_fraction: Option<f64>,
    pub sr_transmissions: usize,
}

pub fn point_summary(label: &str, campaign: &Campaign) -> PointSummary {
    let cfg = &campaign.config;
    PointSummary {
        label: label.to_string(),
        psr_enabled: cfg.psr.enabled,
        inter_ap_distance_m: cfg.scenario.inter_ap_distance_m,
        broadband_load_mbps: cfg.traffic.broadband_load_mbps,
        ap_antennas: cfg.scenario.ap_antennas,
        drops: campaign.drops.len(),
        master_seed: cfg.sim.seed,
        classes: class_summaries(&campaign.summary),
        zero_sro_fraction: cfg.psr.enabled.then(|| campaign.summary.zero_sro_fraction()).flatten(),
        sr_transmissions: campaign.drops.iter().map(|d| d.audit.sr.len()).sum(),
    }
}

fn class_summaries(summary: &MetricsSummary) -> BTreeMap<TrafficClass, ClassSummary> {
    summary
        .classes
        .iter()
        .map(|(&class, m)| {
            let delay_percentiles_us = REPORTED_PERCENTILES
                .iter()
                .filter_map(|&p| m.delay_percentile_us(p).ok().map(|v| (format!("p{p}"), v)))
                .collect();
            let s = ClassSummary {
                samples: m.delay_us.len(),
                censored: m.censored,
                dropped: m.dropped,
                delay_percentiles_us,
                mean_throughput_mbps: m.mean_throughput_mbps(),
                median_throughput_mbps: m.median_throughput_mbps(),
            };
            (class, s)
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| CliError::Json { path: path.display().to_string(), source })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Writes the three per-campaign files into `dir`.
pub fn write_campaign(dir: &Path, label: &str, campaign: &Campaign) -> Result<PointSummary, CliError> {
    create_dir(dir)?;
    write_csv(&dir.join(FILES_CSV), &file_rows(&campaign.drops))?;
    write_csv(&dir.join(SRO_COUNTS_CSV), &sro_rows(&campaign.drops))?;
    let summary = point_summary(label, campaign);
    write_json(&dir.join(SUMMARY_JSON), &summary)?;
    Ok(summary)
}
