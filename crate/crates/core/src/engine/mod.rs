//! Deterministic discrete-event core and Monte Carlo orchestration.

pub mod campaign;
pub mod event;
pub mod metrics;
pub mod sim;
