//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use psrsim_core::{run_campaign, Campaign, Ecdf, SimConfig, TrafficClass};
use serde::Serialize;

use crate::output::{self, PointSummary};
use crate::plot::{Axis, CdfPlot, Series};
use crate::presets::{Metric, Preset};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "psrsim", version, about = "802.11ax uplink simulator with parameterized spatial reuse")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one campaign and write files.csv, sro_counts.csv, summary.json.
    Simulate(SimulateArgs),
    /// Run a figure preset: one campaign per sweep point plus a CDF plot.
    Sweep(SweepArgs),
    /// Check a configuration file and exit.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct RunOverrides {
    #[arg(long)]
    pub drops: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub psr: Option<OnOff>,
    #[arg(long)]
    pub inter_ap_distance_m: Option<f64>,
    #[arg(long)]
    pub load_mbps: Option<f64>,
    #[arg(long)]
    pub ap_antennas: Option<usize>,
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    #[arg(long)]
    pub out: PathBuf,
    /// Base configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunOverrides,
}

impl RunOverrides {
    fn apply(&self, cfg: &mut SimConfig) {
        if let Some(d) = self.drops {
            cfg.sim.drops = d;
        }
        if let Some(s) = self.seed {
            cfg.sim.seed = s;
        }
        if let Some(t) = self.duration_s {
            cfg.sim.duration_s = t;
        }
    }
}

pub fn run(cli: Cli, log: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(&args, log),
        Command::Sweep(args) => sweep(&args, log),
        Command::Validate { config } => {
            SimConfig::load(&config)?;
            let _ = writeln!(log, "{}: ok", config.display());
            Ok(())
        }
    }
}

pub fn simulate(args: &SimulateArgs, log: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = SimConfig::load(&args.config)?;
    if let Some(p) = args.psr {
        cfg.psr.enabled = p == OnOff::On;
    }
    if let Some(d) = args.inter_ap_distance_m {
        cfg.scenario.inter_ap_distance_m = d;
    }
    if let Some(l) = args.load_mbps {
        cfg.traffic.broadband_load_mbps = l;
    }
    if let Some(n) = args.ap_antennas {
        cfg.scenario.ap_antennas = n;
    }
    args.run.apply(&mut cfg);
    cfg.validate()?;
    let campaign = run_campaign(&cfg, cfg.sim.drops)?;
    let summary = output::write_campaign(&args.out, "simulate", &campaign)?;
    let ll = campaign.summary.class(TrafficClass::LowLatency).map(|m| m.delay_us.clone());
    if let Some(ll) = ll {
        let plot = CdfPlot {
            title: "Low-latency UL file delay".into(),
            x_label: "delay (us)".into(),
            x_axis: Axis::Log10,
            series: vec![Series { label: mode_label(cfg.psr.enabled).into(), cdf: &ll, dashed: false }],
        };
        output::write_text(&args.out.join("delay_cdf.svg"), &plot.render())?;
    }
    report(log, &summary);
    Ok(())
}

fn mode_label(psr: bool) -> &'static str {
    if psr {
        "PSR"
    } else {
        "baseline"
    }
}

fn report(log: &mut dyn Write, s: &PointSummary) {
    let ll = s.classes.get(&TrafficClass::LowLatency);
    let p = |k: &str| ll.and_then(|c| c.delay_percentiles_us.get(k)).map_or("-".to_string(), |v| format!("{v:.0}"));
    let _ = writeln!(
        log,
        "{:<22} low-latency delay us p50 {:>7} p85 {:>7} p95 {:>7} | SR tx {}",
        s.label,
        p("p50"),
        p("p85"),
        p("p95"),
        s.sr_transmissions
    );
}

/// One line per sweep point and class in `percentiles.csv`.
#[derive(Debug, Serialize)]
struct PercentileRow<'a> {
    label: &'a str,
    psr_enabled: bool,
    inter_ap_distance_m: f64,
    broadband_load_mbps: f64,
    ap_antennas: usize,
    traffic_class: TrafficClass,
    samples: usize,
    p50_us: Option<f64>,
    p85_us: Option<f64>,
    p95_us: Option<f64>,
    p99_us: Option<f64>,
    median_throughput_mbps: Option<f64>,
}

pub fn sweep(args: &SweepArgs, log: &mut dyn Write) -> Result<(), CliError> {
    let mut base = match &args.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    args.run.apply(&mut base);
    base.validate()?;
    output::create_dir(&args.out)?;
    let points = args.preset.points(&base);
    let total = points.len();
    let mut done: Vec<(String, Campaign, PointSummary)> = Vec::new();
    let mut failed = 0;
    for point in points {
        match run_campaign(&point.config, point.config.sim.drops) {
            Ok(c) => {
                let s = output::write_campaign(&args.out.join(&point.label), &point.label, &c)?;
                report(log, &s);
                done.push((point.label, c, s));
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(log, "{}: {e}", point.label);
            }
        }
    }
    let summaries: Vec<&PointSummary> = done.iter().map(|(_, _, s)| s).collect();
    output::write_json(&args.out.join(output::SUMMARY_JSON), &summaries)?;
    write_percentiles(&args.out.join("percentiles.csv"), &summaries)?;
    write_plot(&args.out, args.preset, &done)?;
    if failed > 0 {
        return Err(CliError::SweepPoints { failed, total });
    }
    Ok(())
}

fn write_percentiles(path: &Path, summaries: &[&PointSummary]) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for s in summaries {
        for (&class, c) in &s.classes {
            let p = |k: &str| c.delay_percentiles_us.get(k).copied();
            rows.push(PercentileRow {
                label: &s.label,
                psr_enabled: s.psr_enabled,
                inter_ap_distance_m: s.inter_ap_distance_m,
                broadband_load_mbps: s.broadband_load_mbps,
                ap_antennas: s.ap_antennas,
                traffic_class: class,
                samples: c.samples,
                p50_us: p("p50"),
                p85_us: p("p85"),
                p95_us: p("p95"),
                p99_us: p("p99"),
                median_throughput_mbps: c.median_throughput_mbps,
            });
        }
    }
    output::write_csv(path, &rows)
}

fn write_plot(dir: &Path, preset: Preset, done: &[(String, Campaign, PointSummary)]) -> Result<(), CliError> {
    let (x_label, axis) = match preset.metric() {
        Metric::LowLatencyDelay => ("delay (us)", Axis::Log10),
        Metric::BroadbandThroughput => ("file throughput (Mbps)", Axis::Log10),
        Metric::SroCount => ("SR transmissions per STA and drop", Axis::Linear),
    };
    let cdfs: Vec<(String, bool, Ecdf)> = done
        .iter()
        .map(|(label, c, _)| {
            let cdf = match preset.metric() {
                Metric::LowLatencyDelay => c.summary.class(TrafficClass::LowLatency).map(|m| m.delay_us.clone()),
                Metric::BroadbandThroughput => {
                    c.summary.class(TrafficClass::Broadband).map(|m| m.throughput_mbps.clone())
                }
                Metric::SroCount => Some(Ecdf::new(c.summary.sro_counts.iter().map(|&n| f64::from(n)).collect())),
            };
            (label.clone(), !c.config.psr.enabled, cdf.unwrap_or_else(|| Ecdf::new(Vec::new())))
        })
        .collect();
    let plot = CdfPlot {
        title: preset.title().into(),
        x_label: x_label.into(),
        x_axis: axis,
        series: cdfs.iter().map(|(l, dashed, cdf)| Series { label: l.clone(), cdf, dashed: *dashed }).collect(),
    };
    output::write_text(&dir.join(format!("{}.svg", preset.name())), &plot.render())
}
