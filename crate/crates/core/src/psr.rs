//! Parameterized spatial reuse.
//!
//! The donor AP advertises `PSR_INPUT = TX_PWR_AP + I_AP` in its trigger
//! frame, where `I_AP = UL_Target_RSSI - Min_SNR_MCS - Safety_Margin` is the
//! interference its triggered uplink can tolerate. A PSR-capable STA of
//! another BSS that hears the TF at `RPL` may transmit during the triggered
//! uplink provided
//!
//! ```text
//! TX_PWR_STA - 10 log10(TX_BW / 20 MHz) <= PSR_INPUT - RPL
//! ```
//!
//! With reciprocal loss `L` between the STA and the donor, `RPL = TX_PWR_AP - L`,
//! so the per-20 MHz interference the STA causes at the donor is at most `I_AP`.

use crate::error::ConfigError;
use crate::mac::{energy_sense, Medium, SIFS};
use crate::phy::ACK;
use crate::scenario::{Node, NodeId};
use crate::time::SimTime;

pub const MAX_SAFETY_MARGIN_DB: f64 = 5.0;
/// Below this cap no MCS closes an in-room link; the SRO is not worth taking.
pub const MIN_USEFUL_SR_POWER_DBM: f64 = -10.0;

pub fn validate_safety_margin(margin_db: f64) -> Result<(), ConfigError> {
    if !(0.0..=MAX_SAFETY_MARGIN_DB).contains(&margin_db) {
        return Err(ConfigError::invalid("psr.safety_margin_db", format!("{margin_db} dB is outside [0, 5]")));
    }
    Ok(())
}

pub fn acceptable_interference_dbm(ul_target_rssi_dbm: f64, min_snr_mcs_db: f64, safety_margin_db: f64) -> f64 {
    ul_target_rssi_dbm - min_snr_mcs_db - safety_margin_db
}

/// Checked variant of [`acceptable_interference_dbm`] that enforces the
/// safety margin bound.
pub fn try_acceptable_interference_dbm(
    ul_target_rssi_dbm: f64,
    min_snr_mcs_db: f64,
    safety_margin_db: f64,
) -> Result<f64, ConfigError> {
    validate_safety_margin(safety_margin_db)?;
    Ok(acceptable_interference_dbm(ul_target_rssi_dbm, min_snr_mcs_db, safety_margin_db))
}

pub fn psr_input_dbm(tx_pwr_ap_dbm: f64, i_ap_dbm: f64) -> f64 {
    tx_pwr_ap_dbm + i_ap_dbm
}

/// Bandwidth normalization term `10 log10(BW / 20 MHz)`.
pub fn bandwidth_term_db(tx_bw_mhz: u32) -> f64 {
    10.0 * (tx_bw_mhz as f64 / 20.0).log10()
}

/// Largest transmit power satisfying the PSR power condition, further
/// capped at the STA's hardware maximum.
pub fn max_sr_tx_power_dbm(psr_input_dbm: f64, rpl_dbm: f64, tx_bw_mhz: u32, sta_max_power_dbm: f64) -> f64 {
    (psr_input_dbm - rpl_dbm + bandwidth_term_db(tx_bw_mhz)).min(sta_max_power_dbm)
}

/// The power condition itself, with a small absolute tolerance for rounding.
pub fn satisfies_power_condition(tx_power_dbm: f64, tx_bw_mhz: u32, psr_input_dbm: f64, rpl_dbm: f64) -> bool {
    tx_power_dbm - bandwidth_term_db(tx_bw_mhz) <= psr_input_dbm - rpl_dbm + 1e-9
}

/// A granted spatial reuse window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialReuseOpportunity {
    pub donor_ap: NodeId,
    pub donor_bss: NodeId,
    pub psr_input_dbm: f64,
    pub i_ap_dbm: f64,
    pub rpl_dbm: f64,
    /// End of the triggered uplink transmission.
    pub deadline: SimTime,
    pub max_tx_power_dbm: f64,
}

impl SpatialReuseOpportunity {
    pub fn is_valid(&self, now: SimTime) -> bool {
        now < self.deadline
    }

    /// Power headroom, the quantity compared between concurrent SROs.
    pub fn budget_db(&self) -> f64 {
        self.psr_input_dbm - self.rpl_dbm
    }
}

/// Trigger-frame fields a STA needs to evaluate an SRO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerView {
    pub donor_ap: NodeId,
    pub bss: NodeId,
    pub psr_allowed: bool,
    pub psr_input_dbm: Option<f64>,
    pub tx_power_dbm: f64,
    /// End of the uplink the TF solicits.
    pub ul_end: SimTime,
}

/// Checks both SRO conditions for `sta` having decoded `tf` at `rpl_dbm`.
/// The caller has already filtered on capability and traffic class.
pub fn detect_sro(
    sta: &Node,
    tf: &TriggerView,
    rpl_dbm: f64,
    bandwidth_mhz: u32,
    now: SimTime,
) -> Option<SpatialReuseOpportunity> {
    if rpl_dbm < sta.sensitivity_dbm || !sta.psr_capable || now >= tf.ul_end {
        return None;
    }
    // Condition 1: inter-BSS trigger frame.
    if sta.bss == Some(tf.bss) || !tf.psr_allowed {
        return None;
    }
    let psr_input = tf.psr_input_dbm?;
    // Condition 2: some transmit power satisfies the limit.
    let cap = max_sr_tx_power_dbm(psr_input, rpl_dbm, bandwidth_mhz, sta.max_tx_power_dbm);
    if cap < MIN_USEFUL_SR_POWER_DBM {
        return None;
    }
    Some(SpatialReuseOpportunity {
        donor_ap: tf.donor_ap,
        donor_bss: tf.bss,
        psr_input_dbm: psr_input,
        i_ap_dbm: psr_input - tf.tx_power_dbm,
        rpl_dbm,
        deadline: tf.ul_end,
        max_tx_power_dbm: cap,
    })
}

/// Keeps at most one SRO per STA: an expired SRO is always replaced, and
/// between two live ones the larger power budget wins.
pub fn merge_sro(
    current: Option<SpatialReuseOpportunity>,
    fresh: SpatialReuseOpportunity,
    now: SimTime,
) -> SpatialReuseOpportunity {
    match current {
        Some(cur) if cur.is_valid(now) && cur.budget_db() >= fresh.budget_db() => cur,
        _ => fresh,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrDecision {
    Transmit,
    /// Energy detected on the medium.
    DeferBusy,
    /// The PPDU plus SIFS and ACK would overrun the SRO.
    DeferDeadline,
}

/// NAV-exempt access inside an SRO: only the energy rule and the deadline
/// apply.
pub fn sr_channel_access(energy_dbm: f64, sro: &SpatialReuseOpportunity, ppdu: SimTime, now: SimTime) -> SrDecision {
    if energy_sense(energy_dbm) == Medium::Busy {
        return SrDecision::DeferBusy;
    }
    if now + ppdu + SIFS + ACK > sro.deadline {
        return SrDecision::DeferDeadline;
    }
    SrDecision::Transmit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{NodeKind, Position, TrafficClass};
    use proptest::prelude::*;

    #[test]
    fn acceptable_interference() {
        assert_eq!(acceptable_interference_dbm(-60.0, 30.0, 3.0), -93.0);
        assert_eq!(acceptable_interference_dbm(-60.0, 30.0, 0.0), -90.0);
        assert!(try_acceptable_interference_dbm(-60.0, 30.0, 6.0).is_err());
        assert_eq!(try_acceptable_interference_dbm(-60.0, 30.0, 5.0), Ok(-95.0));
    }

    #[test]
    fn psr_input() {
        assert_eq!(psr_input_dbm(24.0, -93.0), -69.0);
        assert_eq!(psr_input_dbm(20.0, -93.0), -73.0);
    }

    #[test]
    fn max_power() {
        assert_eq!(max_sr_tx_power_dbm(-46.0, -60.0, 20, 15.0), 14.0);
        assert_eq!(max_sr_tx_power_dbm(-46.0, -60.0, 80, 15.0), 15.0);
        assert!((max_sr_tx_power_dbm(-46.0, -60.0, 80, 99.0) - (14.0 + 6.0206)).abs() < 1e-3);
        assert_eq!(max_sr_tx_power_dbm(-70.0, -70.0, 20, 15.0), 0.0);
    }

    fn sta(bss: NodeId) -> Node {
        Node {
            id: 7,
            kind: NodeKind::Sta,
            bss: Some(bss),
            position: Position { x: 1.0, y: 1.0, z: 1.0 },
            n_antennas: 1,
            max_tx_power_dbm: 15.0,
            noise_figure_db: 9.0,
            sensitivity_dbm: -90.0,
            psr_capable: true,
            traffic_class: Some(TrafficClass::LowLatency),
        }
    }

    fn tf(bss: NodeId, psr_input: f64) -> TriggerView {
        TriggerView {
            donor_ap: bss,
            bss,
            psr_allowed: true,
            psr_input_dbm: Some(psr_input),
            tx_power_dbm: 24.0,
            ul_end: SimTime::from_ms(4),
        }
    }

    #[test]
    fn intra_bss_trigger_gives_nothing() {
        assert!(detect_sro(&sta(1), &tf(1, -46.0), -60.0, 80, SimTime::ZERO).is_none());
    }

    #[test]
    fn inter_bss_trigger_grants() {
        let sro = detect_sro(&sta(2), &tf(1, -46.0), -60.0, 80, SimTime::ZERO).unwrap();
        // 15 - 6.02 = 8.98 <= 14: full power allowed.
        assert_eq!(sro.max_tx_power_dbm, 15.0);
        assert!(satisfies_power_condition(15.0, 80, -46.0, -60.0));
        assert_eq!(sro.deadline, SimTime::from_ms(4));
    }

    #[test]
    fn unsatisfiable_budget_gives_nothing() {
        // Budget -69 - (-50) = -19 dB per 20 MHz; -13 dBm over 80 MHz is under the floor.
        assert!(detect_sro(&sta(2), &tf(1, -69.0), -50.0, 80, SimTime::ZERO).is_none());
    }

    #[test]
    fn psr_disallowed_gives_nothing() {
        let mut t = tf(1, -46.0);
        t.psr_allowed = false;
        t.psr_input_dbm = None;
        assert!(detect_sro(&sta(2), &t, -60.0, 80, SimTime::ZERO).is_none());
        let mut s = sta(2);
        s.psr_capable = false;
        assert!(detect_sro(&s, &tf(1, -46.0), -60.0, 80, SimTime::ZERO).is_none());
    }

    #[test]
    fn access_decisions() {
        let sro = detect_sro(&sta(2), &tf(1, -46.0), -60.0, 80, SimTime::ZERO).unwrap();
        let ppdu = SimTime::from_us(71);
        assert_eq!(sr_channel_access(-70.0, &sro, ppdu, SimTime::from_ms(1)), SrDecision::Transmit);
        assert_eq!(sr_channel_access(-60.0, &sro, ppdu, SimTime::from_ms(1)), SrDecision::DeferBusy);
        let late = sro.deadline - SimTime::from_us(50);
        assert_eq!(sr_channel_access(-70.0, &sro, SimTime::from_us(74), late), SrDecision::DeferDeadline);
        // Exactly fitting is allowed.
        let exact = sro.deadline - (ppdu + SIFS + ACK);
        assert_eq!(sr_channel_access(-70.0, &sro, ppdu, exact), SrDecision::Transmit);
    }

    #[test]
    fn merge_keeps_larger_budget() {
        let a = detect_sro(&sta(2), &tf(1, -46.0), -60.0, 80, SimTime::ZERO).unwrap();
        let b = detect_sro(&sta(2), &tf(0, -50.0), -60.0, 80, SimTime::ZERO).unwrap();
        assert_eq!(merge_sro(Some(a), b, SimTime::ZERO), a);
        assert_eq!(merge_sro(Some(b), a, SimTime::ZERO), a);
        // Expired SROs are replaced regardless of budget.
        assert_eq!(merge_sro(Some(a), b, SimTime::from_ms(5)), b);
        assert_eq!(merge_sro(None, b, SimTime::ZERO), b);
    }

    proptest! {
        /// With reciprocal loss, transmitting at the cap never puts more than
        /// I_AP per 20 MHz at the donor.
        #[test]
        fn cap_bounds_interference_at_donor(
            target in -90.0f64..-40.0,
            min_snr in 2.0f64..36.0,
            margin in 0.0f64..5.0,
            loss in 40.0f64..120.0,
            bw in prop::sample::select(vec![20u32, 40, 80]),
        ) {
            let i_ap = acceptable_interference_dbm(target, min_snr, margin);
            let input = psr_input_dbm(24.0, i_ap);
            let rpl = 24.0 - loss;
            let p = max_sr_tx_power_dbm(input, rpl, bw, 15.0);
            prop_assert!(satisfies_power_condition(p, bw, input, rpl));
            let at_donor_per_20 = p - loss - bandwidth_term_db(bw);
            prop_assert!(at_donor_per_20 <= i_ap + 1e-9);
        }
    }
}
