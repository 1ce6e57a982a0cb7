//! System-level simulator for IEEE 802.11ax uplink WLANs with parameterized
//! spatial reuse (PSR).
//!
//! A drop places APs and STAs in a rectangular room, draws the large-scale
//! channel, and then runs a single-threaded discrete-event loop covering
//! CSMA/CA access at the APs, trigger-based uplink MU-MIMO exchanges and,
//! when enabled, NAV-exempt spatial reuse transmissions by low-latency STAs.
//! Campaigns pool many drops into delay and throughput statistics.

pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod mac;
pub mod phy;
pub mod psr;
pub mod scenario;
pub mod time;
pub mod traffic;

pub use config::{ChannelConfig, PsrConfig, RunConfig, ScenarioConfig, SimConfig, TrafficConfig};
pub use engine::campaign::{drop_seed, run_campaign, Campaign};
pub use engine::metrics::{percentile, ClassMetrics, Ecdf, MetricsSummary};
pub use engine::sim::{run_drop, DropAudit, DropResult, SrAudit};
pub use error::{ConfigError, SimError};
pub use scenario::{Deployment, Node, NodeId, NodeKind, TrafficClass};
pub use time::SimTime;
pub use traffic::{FileRecord, FileStatus};
