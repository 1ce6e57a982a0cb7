//! PHY abstraction: HE rates and PPDU airtime, SINR with a zero-forcing
//! array-gain model, SINR-driven MCS selection and a packet error model
//! anchored at 10% PER on each MCS's minimum SNR.

use rand::Rng;
use thiserror::Error;

use crate::channel::{dbm_to_mw, mw_to_dbm};
use crate::time::SimTime;

/// Minimum SNR (dB) giving at most 10% PER, MCS 0..=11.
pub const DEFAULT_MIN_SNR_DB: [f64; 12] = [2.0, 5.0, 8.0, 11.0, 15.0, 18.0, 20.0, 25.0, 29.0, 31.0, 34.0, 36.0];

/// 12.8 us OFDM symbol plus 0.8 us cyclic prefix.
pub const SYMBOL: SimTime = SimTime::from_ns(13_600);
pub const PREAMBLE: SimTime = SimTime::from_us(44);
pub const LEGACY_CONTROL_RATE_MBPS: f64 = 24.0;
pub const TRIGGER_FRAME: SimTime = SimTime::from_us(50);
pub const MULTI_STA_BLOCK_ACK: SimTime = SimTime::from_us(50);
pub const ACK: SimTime = SimTime::from_us(30);
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// (bits per subcarrier, code rate numerator, code rate denominator).
const MODULATION: [(u32, u32, u32); 12] = [
    (1, 1, 2),
    (2, 1, 2),
    (2, 3, 4),
    (4, 1, 2),
    (4, 3, 4),
    (6, 2, 3),
    (6, 3, 4),
    (6, 5, 6),
    (8, 3, 4),
    (8, 5, 6),
    (10, 3, 4),
    (10, 5, 6),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub index: u8,
    pub bits_per_subcarrier: u32,
    pub code_rate_num: u32,
    pub code_rate_den: u32,
    pub min_snr_db: f64,
}

impl McsEntry {
    pub fn code_rate(&self) -> f64 {
        self.code_rate_num as f64 / self.code_rate_den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl Default for McsTable {
    fn default() -> Self {
        McsTable::with_thresholds(&DEFAULT_MIN_SNR_DB)
    }
}

impl McsTable {
    /// Builds the HE MCS 0..=11 table with the given minimum-SNR column.
    pub fn with_thresholds(min_snr_db: &[f64]) -> Self {
        assert_eq!(min_snr_db.len(), MODULATION.len(), "one threshold per MCS");
        let entries = MODULATION
            .iter()
            .zip(min_snr_db)
            .enumerate()
            .map(|(i, (&(bits, num, den), &snr))| McsEntry {
                index: i as u8,
                bits_per_subcarrier: bits,
                code_rate_num: num,
                code_rate_den: den,
                min_snr_db: snr,
            })
            .collect();
        McsTable { entries }
    }

    pub fn get(&self, index: u8) -> &McsEntry {
        &self.entries[index as usize]
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    /// Highest MCS whose threshold does not exceed `sinr_db`; MCS 0 otherwise.
    pub fn select(&self, sinr_db: f64) -> &McsEntry {
        self.entries.iter().rev().find(|m| m.min_snr_db <= sinr_db).unwrap_or(&self.entries[0])
    }
}

pub fn data_subcarriers(bandwidth_mhz: u32) -> u32 {
    match bandwidth_mhz {
        20 => 234,
        40 => 468,
        80 => 980,
        other => panic!("unsupported bandwidth {other} MHz"),
    }
}

pub fn data_rate_mbps(mcs: &McsEntry, bandwidth_mhz: u32, n_streams: usize) -> f64 {
    n_streams as f64 * data_subcarriers(bandwidth_mhz) as f64 * mcs.bits_per_subcarrier as f64 * mcs.code_rate()
        / SYMBOL.as_us_f64()
}

/// Data bits carried per OFDM symbol, per spatial stream.
pub fn bits_per_symbol(mcs: &McsEntry, bandwidth_mhz: u32) -> f64 {
    data_subcarriers(bandwidth_mhz) as f64 * mcs.bits_per_subcarrier as f64 * mcs.code_rate()
}

/// Number of OFDM symbols needed for `payload_bits`, computed in exact
/// integer arithmetic.
pub fn symbols_for_bits(payload_bits: u64, mcs: &McsEntry, bandwidth_mhz: u32, n_streams: usize) -> u64 {
    let per_symbol_times_den = n_streams as u64
        * data_subcarriers(bandwidth_mhz) as u64
        * (mcs.bits_per_subcarrier * mcs.code_rate_num) as u64;
    (payload_bits * mcs.code_rate_den as u64).div_ceil(per_symbol_times_den)
}

/// Payload bits that fit in `n_symbols` symbols (rounded down).
pub fn bits_in_symbols(n_symbols: u64, mcs: &McsEntry, bandwidth_mhz: u32, n_streams: usize) -> u64 {
    let per_symbol_times_den = n_streams as u64
        * data_subcarriers(bandwidth_mhz) as u64
        * (mcs.bits_per_subcarrier * mcs.code_rate_num) as u64;
    n_symbols * per_symbol_times_den / mcs.code_rate_den as u64
}

pub fn ppdu_duration(payload_bytes: u64, mcs: &McsEntry, bandwidth_mhz: u32, n_streams: usize) -> SimTime {
    let n_sym = symbols_for_bits(payload_bytes * 8, mcs, bandwidth_mhz, n_streams);
    PREAMBLE + SimTime(n_sym * SYMBOL.as_ns())
}

pub fn noise_floor_dbm(bandwidth_mhz: u32, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * (bandwidth_mhz as f64 * 1e6).log10() + noise_figure_db
}

#[derive(Debug, Error, PartialEq)]
#[error("cannot multiplex {streams} streams on {antennas} antennas")]
pub struct StreamError {
    pub antennas: usize,
    pub streams: usize,
}

/// Desired-signal gain of a zero-forcing receiver: `N - K + 1`.
pub fn zf_gain(n_antennas: usize, n_streams: usize) -> Result<f64, StreamError> {
    if n_streams == 0 || n_streams > n_antennas {
        return Err(StreamError { antennas: n_antennas, streams: n_streams });
    }
    Ok((n_antennas - n_streams + 1) as f64)
}

/// Post-ZF SINR in dB. Interference from outside the receiver's own
/// multiplexed group is not suppressed.
pub fn sinr_db(
    desired_dbm: f64,
    zf_gain_linear: f64,
    noise_dbm: f64,
    interference_dbm: impl IntoIterator<Item = f64>,
) -> f64 {
    let denom: f64 = dbm_to_mw(noise_dbm) + interference_dbm.into_iter().map(dbm_to_mw).sum::<f64>();
    desired_dbm + 10.0 * zf_gain_linear.log10() - mw_to_dbm(denom)
}

/// Packet error probability: certain loss 3 dB or more below the MCS
/// threshold, a linear-in-dB ramp to 10% at the threshold, then an
/// exponential tail.
pub fn packet_error_rate(sinr_db: f64, mcs: &McsEntry) -> f64 {
    let excess = sinr_db - mcs.min_snr_db;
    if excess < -3.0 {
        1.0
    } else if excess <= 0.0 {
        1.0 - 0.9 * (excess + 3.0) / 3.0
    } else {
        0.1 * (-excess).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reception {
    Success,
    Failure,
}

pub fn reception_outcome<R: Rng + ?Sized>(sinr_db: f64, mcs: &McsEntry, rng: &mut R) -> Reception {
    if rng.random::<f64>() < packet_error_rate(sinr_db, mcs) {
        Reception::Failure
    } else {
        Reception::Success
    }
}
