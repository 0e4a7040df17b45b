//! Busy-period lengths, TXOP burst sizes and the expected duration of one
//! backoff-chain state transition. All durations are in microseconds.

use serde::{Deserialize, Serialize};

use crate::coupling::SolverResult;
use crate::params::{AccessMode, AcParams, BurstUnit, PhyProfile, ScenarioConfig, TransitionModel, NUM_ACS};

/// Channel busy time following a success (`t_success`) or collision
/// (`t_collision`) of a frame from each AC. Both include the sender's AIFS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusyDurations {
    pub t_success: [f64; NUM_ACS],
    pub t_collision: [f64; NUM_ACS],
}

pub fn busy_durations(cfg: &ScenarioConfig) -> BusyDurations {
    let phy = &cfg.phy;
    let t_header = phy.airtime(phy.header_bits);
    let t_payload = phy.airtime(phy.payload_bits);
    let t_ack = phy.airtime(phy.ack_bits);
    let t_rts = phy.airtime(phy.rts_bits);
    let t_cts = phy.airtime(phy.cts_bits);
    let sifs = phy.sifs();

    let mut busy = BusyDurations {
        t_success: [0.0; NUM_ACS],
        t_collision: [0.0; NUM_ACS],
    };
    for (idx, ac) in cfg.acs.iter().enumerate() {
        let aifs = phy.aifs(ac.aifsn);
        let data_exchange = t_header + t_payload + sifs + t_ack;
        match cfg.access_mode {
            AccessMode::Basic => {
                busy.t_success[idx] = aifs + data_exchange;
                busy.t_collision[idx] = aifs + t_header + t_payload;
            }
            AccessMode::RtsCts => {
                busy.t_success[idx] = aifs + t_rts + sifs + t_cts + sifs + data_exchange;
                busy.t_collision[idx] = aifs + t_rts;
            }
        }
    }
    busy
}

/// Time one packet occupies inside a TXOP for the given accounting unit.
pub fn packet_time(phy: &PhyProfile, unit: BurstUnit) -> f64 {
    let airtime = phy.airtime(phy.header_bits) + phy.airtime(phy.payload_bits);
    match unit {
        BurstUnit::Airtime => airtime,
        BurstUnit::Exchange => airtime + phy.sifs() + phy.airtime(phy.ack_bits) + phy.sifs(),
    }
}

/// Packets per successful access: `max(1, floor(txop / packet time))`, and 1
/// when the TXOP limit is zero.
pub fn txop_burst_len(ac: &AcParams, phy: &PhyProfile, unit: BurstUnit) -> u32 {
    packets_in_txop(ac.txop_limit_us, packet_time(phy, unit))
}

pub fn packets_in_txop(txop_limit_us: u32, per_packet: f64) -> u32 {
    if txop_limit_us == 0 {
        return 1;
    }
    let packets = (f64::from(txop_limit_us) / per_packet).floor();
    if packets.is_finite() && packets >= 1.0 {
        packets.min(f64::from(u32::MAX)) as u32
    } else {
        1
    }
}

pub fn burst_lengths(cfg: &ScenarioConfig) -> [u32; NUM_ACS] {
    cfg.acs
        .map(|ac| txop_burst_len(&ac, &cfg.phy, cfg.model.burst_unit))
}

/// Expected duration `E(T_α)` of one state transition per AC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionTime {
    pub e_t: [f64; NUM_ACS],
}

pub fn expected_transition_time(
    cfg: &ScenarioConfig,
    result: &SolverResult,
    busy: &BusyDurations,
) -> TransitionTime {
    expected_transition_time_with(cfg, result, busy, cfg.model.transition_model)
}

/// `E(T_α) = (1 - P_tr) σ + P_tr [ (AIFS_α - AIFS_min) + busy ]`.
///
/// With [`TransitionModel::Literal`] the busy term is
/// `Σ_β P_Sβ T_s^β + Σ_β (1 - P_Sβ) T_c^β`, whose weights sum to 4 rather
/// than 1. [`TransitionModel::Normalized`] weights the success lengths by
/// `P_Sβ` and a single collision length (the attempt-share average of
/// `T_c^β`) by `1 - Σ_β P_Sβ`.
pub fn expected_transition_time_with(
    cfg: &ScenarioConfig,
    result: &SolverResult,
    busy: &BusyDurations,
    model: TransitionModel,
) -> TransitionTime {
    let phy = &cfg.phy;
    let p_tr = result.p_tr;
    let busy_term = match model {
        TransitionModel::Literal => (0..NUM_ACS)
            .map(|b| {
                result.p_succ[b] * busy.t_success[b] + (1.0 - result.p_succ[b]) * busy.t_collision[b]
            })
            .sum::<f64>(),
        TransitionModel::Normalized => {
            let success_mass: f64 = result.p_succ.iter().sum();
            let shares = attempt_shares(&result.tau_ac);
            let share_total: f64 = shares.iter().sum();
            let t_coll = if share_total > 0.0 {
                (0..NUM_ACS)
                    .map(|b| shares[b] / share_total * busy.t_collision[b])
                    .sum::<f64>()
            } else {
                busy.t_collision.iter().sum::<f64>() / NUM_ACS as f64
            };
            (0..NUM_ACS)
                .map(|b| result.p_succ[b] * busy.t_success[b])
                .sum::<f64>()
                + (1.0 - success_mass).max(0.0) * t_coll
        }
    };
    let mut e_t = [0.0; NUM_ACS];
    for (idx, ac) in cfg.acs.iter().enumerate() {
        e_t[idx] = (1.0 - p_tr) * phy.slot() + p_tr * (phy.aifs_offset(ac.aifsn) + busy_term);
    }
    TransitionTime { e_t }
}

/// Probability that a station's transmission in a slot comes from AC `β`
/// (the virtual-collision winner): `τ_β Π_{γ<β} (1 - τ_γ)`.
pub fn attempt_shares(tau_ac: &[f64; NUM_ACS]) -> [f64; NUM_ACS] {
    let mut shares = [0.0; NUM_ACS];
    let mut idle_above = 1.0;
    for (share, tau) in shares.iter_mut().zip(tau_ac) {
        *share = tau * idle_above;
        idle_above *= 1.0 - tau;
    }
    shares
}
