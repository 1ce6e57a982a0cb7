//! Monte Carlo drops with independent, reproducible seeds.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SimConfig;
use crate::engine::metrics::MetricsSummary;
use crate::engine::sim::{run_drop, DropResult};
use crate::error::{ConfigError, SimError};

/// Seed of drop `k`, derived from the master seed alone so any drop can be
/// rerun in isolation.
pub fn drop_seed(master: u64, k: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(k as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, Serialize)]
pub struct Campaign {
    pub config: SimConfig,
    /// Sorted by drop index.
    pub drops: Vec<DropResult>,
    pub summary: MetricsSummary,
}

/// Runs `n_drops` drops, in parallel when `cfg.sim.parallel` is set.
pub fn run_campaign(cfg: &SimConfig, n_drops: usize) -> Result<Campaign, SimError> {
    cfg.validate()?;
    if n_drops == 0 {
        return Err(ConfigError::invalid("sim.drops", "must be >= 1").into());
    }
    let seeds: Vec<u64> = (0..n_drops).map(|k| drop_seed(cfg.sim.seed, k)).collect();
    let drops: Vec<DropResult> = if cfg.sim.parallel {
        seeds.par_iter().map(|&s| run_drop(cfg, s)).collect::<Result<_, _>>()?
    } else {
        seeds.iter().map(|&s| run_drop(cfg, s)).collect::<Result<_, _>>()?
    };
    let summary = MetricsSummary::from_drops(&drops);
    Ok(Campaign { config: cfg.clone(), drops, summary })
}
