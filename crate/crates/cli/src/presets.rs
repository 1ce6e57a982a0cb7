//! Figure sweeps: density (fig3 to fig5), load (fig6) and AP antennas (fig7).

use psrsim_core::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Low-latency delay CDF for d = 10, 20, 30 m.
    Fig3,
    /// SR transmissions per low-latency STA for d = 10, 20, 30 m.
    Fig4,
    /// Broadband file throughput CDF for d = 10, 20, 30 m.
    Fig5,
    /// Low-latency delay for broadband loads of 5, 20, 50, 100 Mbps.
    Fig6,
    /// Low-latency delay for 1, 2, 4, 8 AP antennas.
    Fig7,
}

/// What a preset's plot shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    LowLatencyDelay,
    SroCount,
    BroadbandThroughput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub config: SimConfig,
}

pub const DENSITIES_M: [f64; 3] = [10.0, 20.0, 30.0];
pub const LOADS_MBPS: [f64; 4] = [5.0, 20.0, 50.0, 100.0];
pub const ANTENNAS: [usize; 4] = [1, 2, 4, 8];
const REFERENCE_DISTANCE_M: f64 = 20.0;
const REFERENCE_LOAD_MBPS: f64 = 100.0;

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Preset::Fig3 | Preset::Fig6 | Preset::Fig7 => Metric::LowLatencyDelay,
            Preset::Fig4 => Metric::SroCount,
            Preset::Fig5 => Metric::BroadbandThroughput,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Preset::Fig3 => "Low-latency UL file delay vs inter-AP distance",
            Preset::Fig4 => "SR transmissions per low-latency STA vs inter-AP distance",
            Preset::Fig5 => "Broadband UL file throughput vs inter-AP distance",
            Preset::Fig6 => "Low-latency UL file delay vs broadband load",
            Preset::Fig7 => "Low-latency UL file delay vs AP antennas",
        }
    }

    fn psr_modes(self) -> &'static [bool] {
        match self {
            Preset::Fig4 => &[true],
            _ => &[false, true],
        }
    }

    /// Sweep points in a fixed order, each derived from `base`.
    pub fn points(self, base: &SimConfig) -> Vec<SweepPoint> {
        let mut axis: Vec<(String, SimConfig)> = Vec::new();
        match self {
            Preset::Fig3 | Preset::Fig4 | Preset::Fig5 => {
                for d in DENSITIES_M {
                    let mut c = base.clone();
                    c.scenario.inter_ap_distance_m = d;
                    c.traffic.broadband_load_mbps = REFERENCE_LOAD_MBPS;
                    axis.push((format!("d{d}"), c));
                }
            }
            Preset::Fig6 => {
                for load in LOADS_MBPS {
                    let mut c = base.clone();
                    c.scenario.inter_ap_distance_m = REFERENCE_DISTANCE_M;
                    c.traffic.broadband_load_mbps = load;
                    axis.push((format!("load{load}"), c));
                }
            }
            Preset::Fig7 => {
                for n in ANTENNAS {
                    let mut c = base.clone();
                    c.scenario.inter_ap_distance_m = REFERENCE_DISTANCE_M;
                    c.traffic.broadband_load_mbps = REFERENCE_LOAD_MBPS;
                    c.scenario.ap_antennas = n;
                    axis.push((format!("ant{n}"), c));
                }
            }
        }
        let mut out = Vec::new();
        for (label, cfg) in axis {
            for &psr in self.psr_modes() {
                let mut config = cfg.clone();
                config.psr.enabled = psr;
                let mode = if psr { "psr" } else { "baseline" };
                out.push(SweepPoint { label: format!("{label}-{mode}"), config });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_counts() {
        let base = SimConfig::default();
        assert_eq!(Preset::Fig3.points(&base).len(), 6);
        assert_eq!(Preset::Fig4.points(&base).len(), 3);
        assert_eq!(Preset::Fig5.points(&base).len(), 6);
        assert_eq!(Preset::Fig6.points(&base).len(), 8);
        assert_eq!(Preset::Fig7.points(&base).len(), 8);
    }

    #[test]
    fn fig7_sets_antennas_and_reference_point() {
        let pts = Preset::Fig7.points(&SimConfig::default());
        let ants: Vec<usize> = pts.iter().map(|p| p.config.scenario.ap_antennas).collect();
        assert_eq!(ants, vec![1, 1, 2, 2, 4, 4, 8, 8]);
        assert!(pts.iter().all(|p| p.config.scenario.inter_ap_distance_m == 20.0));
        assert_eq!(pts[0].label, "ant1-baseline");
        assert_eq!(pts[1].label, "ant1-psr");
        assert!(pts[1].config.psr.enabled && !pts[0].config.psr.enabled);
    }

    #[test]
    fn fig4_is_psr_only() {
        assert!(Preset::Fig4.points(&SimConfig::default()).iter().all(|p| p.config.psr.enabled));
    }

    #[test]
    fn labels_are_unique() {
        for preset in [Preset::Fig3, Preset::Fig4, Preset::Fig5, Preset::Fig6, Preset::Fig7] {
            let mut labels: Vec<String> = preset.points(&SimConfig::default()).into_iter().map(|p| p.label).collect();
            let n = labels.len();
            labels.sort();
            labels.dedup();
            assert_eq!(labels.len(), n);
        }
    }
}
