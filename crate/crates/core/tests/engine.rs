use psrsim_core::{run_campaign, run_drop, FileStatus, MetricsSummary, SimConfig, SimTime, TrafficClass};

fn short(psr: bool) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.sim.duration_s = 0.5;
    cfg.psr.enabled = psr;
    cfg
}

/// One AP, one broadband STA a few meters away, deterministic channel,
/// offered load far above capacity.
fn single_link() -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.scenario.n_aps = 1;
    cfg.scenario.inter_ap_distance_m = 6.0;
    cfg.scenario.n_broadband_stas = 1;
    cfg.scenario.n_lowlatency_stas = 0;
    cfg.channel.fading_enabled = false;
    cfg.channel.los_sigma_db = 0.0;
    cfg.channel.nlos_sigma_db = 0.0;
    cfg.traffic.broadband_load_mbps = 2000.0;
    cfg.sim.duration_s = 2.0;
    cfg
}

/// Saturated TXOP cycle rate from first principles: 80 MHz, MCS 11
/// (1024-QAM, rate 5/6), 980 data subcarriers, 13.6 us symbols, 4 ms TXOP.
fn single_link_oracle_mbps() -> f64 {
    let (slot, sifs, difs): (f64, f64, f64) = (9.0, 16.0, 34.0);
    let (tf, ba, preamble, symbol): (f64, f64, f64, f64) = (50.0, 50.0, 44.0, 13.6);
    let mean_backoff = 15.0 / 2.0 * slot;
    let ul_budget = 4000.0 - tf - sifs - sifs - ba;
    let symbols = ((ul_budget - preamble) / symbol).floor();
    let bits_per_symbol = 980.0 * 10.0 * 5.0 / 6.0;
    let mpdu_air_bits = (1500.0 + 40.0) * 8.0;
    let mpdus = (symbols * bits_per_symbol / mpdu_air_bits).floor();
    let ul = preamble + symbols * symbol;
    let cycle = difs + mean_backoff + tf + sifs + ul + sifs + ba;
    mpdus * 1500.0 * 8.0 / cycle
}

#[test]
fn oracle_arithmetic() {
    // 186 MPDUs per 4099.1 us cycle.
    assert!((single_link_oracle_mbps() - 2_232_000.0 / 4099.1).abs() < 1e-9);
}

#[test]
fn single_link_goodput_matches_cycle_oracle() {
    let oracle = single_link_oracle_mbps();
    let mut goodput = Vec::new();
    for seed in 1..=3 {
        let r = run_drop(&single_link(), seed).unwrap();
        let sta = *r.delivered_bytes.keys().next().unwrap();
        goodput.push(r.goodput_mbps(sta));
    }
    let mean = goodput.iter().sum::<f64>() / goodput.len() as f64;
    let err = (mean - oracle).abs() / oracle;
    assert!(err <= 0.02, "goodput {mean:.1} vs oracle {oracle:.1} ({:.2}%)", err * 100.0);
}

#[test]
fn same_seed_same_result() {
    let cfg = short(true);
    assert_eq!(run_drop(&cfg, 11).unwrap(), run_drop(&cfg, 11).unwrap());
    assert_ne!(run_drop(&cfg, 11).unwrap().files, run_drop(&cfg, 12).unwrap().files);
}

#[test]
fn parallel_campaign_matches_sequential() {
    let mut cfg = short(true);
    cfg.sim.parallel = true;
    let par = run_campaign(&cfg, 4).unwrap();
    cfg.sim.parallel = false;
    let seq = run_campaign(&cfg, 4).unwrap();
    assert_eq!(par.drops, seq.drops);
    assert_eq!(par.summary, seq.summary);
}

#[test]
fn zero_traffic_produces_no_files() {
    let mut cfg = short(true);
    cfg.scenario.n_lowlatency_stas = 0;
    cfg.traffic.broadband_load_mbps = 0.0;
    let r = run_drop(&cfg, 5).unwrap();
    assert!(r.files.is_empty());
    assert_eq!(r.audit.txops, 0);
    // Drop end only.
    assert_eq!(r.event_count, 1);
}

#[test]
fn files_are_conserved() {
    for psr in [false, true] {
        let r = run_drop(&short(psr), 21).unwrap();
        let mut counts = [0usize; 3];
        for f in &r.files {
            match f.status {
                FileStatus::Completed(t) => {
                    assert!(t > f.arrival);
                    counts[0] += 1;
                }
                FileStatus::Pending => counts[1] += 1,
                FileStatus::Dropped => counts[2] += 1,
            }
        }
        assert_eq!(counts, [r.completed, r.censored, r.dropped]);
        assert_eq!(r.completed + r.censored + r.dropped, r.files.len());
    }
}

#[test]
fn lowlatency_file_count_follows_period() {
    let mut cfg = SimConfig::default();
    cfg.sim.duration_s = 2.0;
    let c = run_campaign(&cfg, 2).unwrap();
    let ll = c.summary.class(TrafficClass::LowLatency).unwrap();
    // 8 STAs, 10 ms period, 2 s: exactly 200 arrivals each per drop.
    assert_eq!(ll.files, 2 * 8 * 200);
    assert_eq!(ll.delay_us.len() + ll.censored + ll.dropped, ll.files);
}

#[test]
fn warmup_discards_early_files() {
    let mut cfg = short(false);
    cfg.sim.warmup_ms = 100.0;
    let r = run_drop(&cfg, 2).unwrap();
    assert!(!r.files.is_empty());
    assert!(r.files.iter().all(|f| f.arrival >= SimTime::from_ms(100)));
}

#[test]
fn baseline_has_no_spatial_reuse() {
    let r = run_drop(&short(false), 8).unwrap();
    assert!(r.audit.sr.is_empty());
    assert_eq!(r.audit.sros_granted, 0);
    assert!(r.sr_transmissions.values().all(|&n| n == 0));
    assert!(r.files.iter().all(|f| f.sr_mpdus == 0));
}

#[test]
fn sr_transmissions_respect_psr_rules() {
    for fading in [false, true] {
        let mut cfg = short(true);
        cfg.channel.fading_enabled = fading;
        cfg.sim.duration_s = 1.0;
        let mut total = 0;
        for seed in 1..=3 {
            let r = run_drop(&cfg, seed).unwrap();
            total += r.audit.sr.len();
            assert_eq!(r.audit.sr.len() as u32, r.sr_transmissions.values().sum::<u32>());
            for a in &r.audit.sr {
                assert!(a.satisfies_power_condition(), "{a:?}");
                assert!(a.interference_excess_db() <= 1e-9, "{a:?}");
                assert!(a.contained(), "{a:?}");
                assert!(a.inter_bss(), "{a:?}");
                assert!(a.start < a.deadline);
            }
        }
        assert!(total > 0, "no SR activity to check (fading {fading})");
    }
}

#[test]
fn txops_never_exceed_limit() {
    let r = run_drop(&short(true), 4).unwrap();
    assert!(r.audit.txops > 0);
    assert_eq!(r.audit.txops_over_limit, 0);
    assert!(r.audit.max_txop <= SimTime::from_ms(4));
}

#[test]
fn single_drop_summary_equals_its_records() {
    let cfg = short(false);
    let c = run_campaign(&cfg, 1).unwrap();
    let again = MetricsSummary::from_drops(&c.drops);
    assert_eq!(c.summary, again);
    let ll_completed =
        c.drops[0].files.iter().filter(|f| f.class == TrafficClass::LowLatency && f.completed().is_some()).count();
    assert_eq!(c.summary.class(TrafficClass::LowLatency).unwrap().delay_us.len(), ll_completed);
}

#[test]
fn summary_is_order_independent() {
    let c = run_campaign(&short(true), 3).unwrap();
    let mut rev = c.drops.clone();
    rev.reverse();
    assert_eq!(MetricsSummary::from_drops(&rev), c.summary);
}
