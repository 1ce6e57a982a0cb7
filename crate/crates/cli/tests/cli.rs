use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use psrsim_cli::output::{self, FileRow, PointSummary, SroRow};
use psrsim_core::{SimConfig, TrafficClass};

fn psrsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psrsim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SHORT: &str = "[sim]\nduration_s = 0.2\ndrops = 3\nseed = 9\n";

#[test]
fn empty_config_is_all_defaults() {
    let cfg = SimConfig::from_toml_str("").unwrap();
    assert_eq!(cfg, SimConfig::default());
    assert_eq!(cfg.scenario.inter_ap_distance_m, 20.0);
    assert_eq!(cfg.traffic.broadband_load_mbps, 100.0);
    assert_eq!(cfg.scenario.ap_antennas, 4);
    assert!(!cfg.psr.enabled);
}

#[test]
fn dotted_keys_are_accepted() {
    let cfg = SimConfig::from_toml_str("scenario.inter_ap_distance_m = 10\npsr.enabled = true\n").unwrap();
    assert_eq!(cfg.scenario.inter_ap_distance_m, 10.0);
    assert!(cfg.psr.enabled);
}

#[test]
fn validate_accepts_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = psrsim(&["validate", "--config", &write_config(dir.path(), "")]);
    assert!(out.status.success());
}

#[test]
fn excessive_margin_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = psrsim(&["validate", "--config", &write_config(dir.path(), "psr.safety_margin_db = 6\n")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("psr.safety_margin_db"));
}

#[test]
fn negative_distance_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = psrsim(&["validate", "--config", &write_config(dir.path(), "scenario.inter_ap_distance_m = -1\n")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario.inter_ap_distance_m"));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = psrsim(&["validate", "--config", &write_config(dir.path(), "scenario.inter_ap_distanse_m = 10\n")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inter_ap_distanse_m"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = psrsim(&["validate", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn override_out_of_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out_dir = dir.path().join("o");
    let out = psrsim(&["simulate", "--config", &cfg, "--ap-antennas", "0", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

fn simulate(cfg: &str, out: &Path, extra: &[&str]) -> Vec<u8> {
    let mut args = vec!["simulate", "--config", cfg, "--psr", "on", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = psrsim(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out.join(output::FILES_CSV)).unwrap()
}

#[test]
fn files_csv_is_byte_identical_across_runs_and_threading() {
    let dir = tempfile::tempdir().unwrap();
    let par = write_config(dir.path(), &format!("{SHORT}parallel = true\n"));
    let a = simulate(&par, &dir.path().join("a"), &[]);
    let b = simulate(&par, &dir.path().join("b"), &[]);
    let seq_path = dir.path().join("seq.toml");
    std::fs::write(&seq_path, format!("{SHORT}parallel = false\n")).unwrap();
    let c = simulate(seq_path.to_str().unwrap(), &dir.path().join("c"), &[]);
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(a, c);
    // Rerunning into the same directory overwrites with identical bytes.
    let again = simulate(&par, &dir.path().join("a"), &[]);
    assert_eq!(a, again);
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out = dir.path().join("o");
    simulate(&cfg, &out, &["--inter-ap-distance-m", "10", "--load-mbps", "20", "--drops", "2"]);
    let files: Vec<FileRow> = output::read_csv(&out.join(output::FILES_CSV)).unwrap();
    let sro: Vec<SroRow> = output::read_csv(&out.join(output::SRO_COUNTS_CSV)).unwrap();
    let seeds: std::collections::BTreeSet<u64> = files.iter().map(|r| r.drop_seed).collect();
    assert_eq!(seeds.len(), 2);
    // 8 low-latency STAs per drop.
    assert_eq!(sro.len(), 16);
    for r in &files {
        assert_eq!(r.completed_ns.is_some(), r.delay_us.is_some());
        if let (Some(c), Some(d)) = (r.completed_ns, r.delay_us) {
            assert!((d - (c - r.arrival_ns) as f64 / 1e3).abs() < 1e-6);
        }
    }
    let summary: PointSummary =
        serde_json::from_slice(&std::fs::read(out.join(output::SUMMARY_JSON)).unwrap()).unwrap();
    assert_eq!(summary.inter_ap_distance_m, 10.0);
    assert_eq!(summary.broadband_load_mbps, 20.0);
    assert!(summary.psr_enabled);
    assert_eq!(summary.drops, 2);
    let ll = &summary.classes[&TrafficClass::LowLatency];
    for k in ["p50", "p85", "p95", "p99"] {
        assert!(ll.delay_percentiles_us.contains_key(k));
    }
    let svg = std::fs::read_to_string(out.join("delay_cdf.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn sweep_fig6_writes_points_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig6");
    let o =
        psrsim(&["sweep", "--preset", "fig6", "--out", out.to_str().unwrap(), "--drops", "1", "--duration-s", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for load in ["load5", "load20", "load50", "load100"] {
        for mode in ["baseline", "psr"] {
            assert!(out.join(format!("{load}-{mode}")).join(output::FILES_CSV).exists());
        }
    }
    let summaries: Vec<PointSummary> =
        serde_json::from_slice(&std::fs::read(out.join(output::SUMMARY_JSON)).unwrap()).unwrap();
    assert_eq!(summaries.len(), 8);
    let table = std::fs::read_to_string(out.join("percentiles.csv")).unwrap();
    assert!(table.lines().next().unwrap().contains("p85_us"));
    assert!(out.join("fig6.svg").exists());
}

#[test]
fn sweep_rejects_unknown_preset() {
    let o = psrsim(&["sweep", "--preset", "fig9", "--out", "/tmp/unused"]);
    assert!(!o.status.success());
}

fn file_row() -> impl Strategy<Value = FileRow> {
    (
        any::<u64>(),
        0usize..64,
        prop_oneof![Just(TrafficClass::Broadband), Just(TrafficClass::LowLatency)],
        0u64..10_000_000_000,
        proptest::option::of(0u64..10_000_000_000),
        1u32..1_000_000,
        proptest::option::of(0.0f64..1e7),
        proptest::option::of(0.0f64..1e4),
        0u8..2,
    )
        .prop_map(
            |(
                drop_seed,
                sta_id,
                traffic_class,
                arrival_ns,
                completed_ns,
                size_bytes,
                delay_us,
                throughput_mbps,
                via_sr,
            )| FileRow {
                drop_seed,
                sta_id,
                traffic_class,
                arrival_ns,
                completed_ns,
                size_bytes,
                delay_us,
                throughput_mbps,
                via_sr,
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn file_rows_round_trip(rows in proptest::collection::vec(file_row(), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        output::write_csv(&path, &rows).unwrap();
        let back: Vec<FileRow> = output::read_csv(&path).unwrap();
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn sro_rows_round_trip(rows in proptest::collection::vec((any::<u64>(), 0usize..64, any::<u32>()), 0..20)) {
        let rows: Vec<SroRow> = rows
            .into_iter()
            .map(|(drop_seed, sta_id, sr_transmissions_gained)| SroRow { drop_seed, sta_id, sr_transmissions_gained })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        output::write_csv(&path, &rows).unwrap();
        let back: Vec<SroRow> = output::read_csv(&path).unwrap();
        prop_assert_eq!(back, rows);
    }
}
