//! Scenario parameters: per access category contention settings, PHY timing
//! and the model options that select between equation variants.
//!
//! Contention windows are stored as window *sizes*: a counter drawn in stage
//! `i` is uniform on `0..W_i`. When `cw_max / cw_min` is not a power of two the
//! number of doubling stages is `floor(log2(cw_max / cw_min))` and the
//! effective maximum window is `cw_min * 2^m` (see [`AcParams::normalized`]).

use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of access categories per station. Index 0 has the highest priority.
pub const NUM_ACS: usize = 4;

/// Smallest AIFSN for which the AIFS offset against `AIFS_min` is non-negative.
pub const MIN_AIFSN: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcParams {
    /// Stage-0 window size `W_0`, in slots.
    pub cw_min: u32,
    /// Largest window size, in slots.
    pub cw_max: u32,
    pub aifsn: u32,
    /// TXOP limit in microseconds; 0 allows a single packet per access.
    pub txop_limit_us: u32,
    /// Retries allowed after the window stops doubling.
    pub retry_extra: u32,
}

impl AcParams {
    pub const fn new(cw_min: u32, cw_max: u32, aifsn: u32, txop_limit_us: u32) -> Self {
        Self {
            cw_min,
            cw_max,
            aifsn,
            txop_limit_us,
            retry_extra: DEFAULT_RETRY_EXTRA,
        }
    }

    /// Number of doubling stages `m = floor(log2(cw_max / cw_min))`.
    ///
    /// Returns 0 when the parameters are invalid (`cw_min == 0` or
    /// `cw_max < cw_min`); callers are expected to validate first.
    pub fn stages(&self) -> u32 {
        if self.cw_min == 0 || self.cw_max < self.cw_min {
            return 0;
        }
        let ratio = self.cw_max / self.cw_min;
        // floor(log2(cw_max / cw_min)) equals floor(log2(floor(ratio))) for integers
        31 - ratio.leading_zeros()
    }

    /// `cw_min * 2^m`, the largest window actually reached by the doubling schedule.
    pub fn effective_cw_max(&self) -> u32 {
        self.cw_min << self.stages()
    }

    pub fn is_normalized(&self) -> bool {
        self.cw_max == self.effective_cw_max()
    }

    /// Copy with `cw_max` rounded down onto the doubling schedule.
    pub fn normalized(&self) -> Self {
        Self {
            cw_max: self.effective_cw_max(),
            ..*self
        }
    }

    /// Total number of backoff stages, `m + f + 1`.
    pub fn max_attempts(&self) -> u32 {
        self.stages() + self.retry_extra + 1
    }
}

pub const DEFAULT_RETRY_EXTRA: u32 = 2;

/// Upper bound on `retry_extra`; keeps every stage sum small.
pub const MAX_RETRY_EXTRA: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyProfile {
    /// Slot time σ in µs.
    pub slot_us: u32,
    pub sifs_us: u32,
    /// Data rate in bits per µs (Mbit/s).
    pub data_rate: f64,
    /// MAC + PHY header length in bits.
    pub header_bits: u32,
    pub payload_bits: u32,
    pub ack_bits: u32,
    pub rts_bits: u32,
    pub cts_bits: u32,
}

impl Default for PhyProfile {
    fn default() -> Self {
        Self {
            slot_us: 20,
            sifs_us: 10,
            data_rate: 1.0,
            header_bits: 400,
            payload_bits: 8184,
            ack_bits: 240,
            rts_bits: 288,
            cts_bits: 240,
        }
    }
}

impl PhyProfile {
    pub fn slot(&self) -> f64 {
        f64::from(self.slot_us)
    }

    pub fn sifs(&self) -> f64 {
        f64::from(self.sifs_us)
    }

    /// Airtime of `bits` at the configured rate, in µs.
    pub fn airtime(&self, bits: u32) -> f64 {
        f64::from(bits) / self.data_rate
    }

    /// `SIFS + aifsn * σ`.
    pub fn aifs(&self, aifsn: u32) -> f64 {
        self.sifs() + f64::from(aifsn) * self.slot()
    }

    /// `SIFS + 2σ`.
    pub fn aifs_min(&self) -> f64 {
        self.aifs(MIN_AIFSN)
    }

    /// Idle time an AC waits beyond `AIFS_min`, `(aifsn - 2) σ`.
    pub fn aifs_offset(&self, aifsn: u32) -> f64 {
        (f64::from(aifsn) - f64::from(MIN_AIFSN)) * self.slot()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessMode {
    Basic,
    RtsCts,
}

impl AccessMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessMode::Basic => "basic",
            AccessMode::RtsCts => "rtscts",
        }
    }
}

impl fmt::Display for AccessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AccessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(AccessMode::Basic),
            "rtscts" => Ok(AccessMode::RtsCts),
            other => Err(format!("unknown access mode `{other}` (expected basic|rtscts)")),
        }
    }
}

/// What one "packet" inside a TXOP costs when computing the burst length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BurstUnit {
    /// DATA + SIFS + ACK + SIFS.
    Exchange,
    /// Header plus payload airtime only.
    Airtime,
}

/// Which form of the per-transition expected duration is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionModel {
    /// Busy term `Σ P_Sβ T_s^β + Σ (1 - P_Sβ) T_c^β` exactly as written.
    Literal,
    /// Busy slot split into success (`Σ P_Sβ`) and collision (`1 - Σ P_Sβ`)
    /// with the collision length averaged over the attempt shares.
    Normalized,
}

macro_rules! keyword_enum {
    ($ty:ty, $($variant:path => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!(
                        "unknown value `{other}` (expected {})",
                        [$($name),+].join("|")
                    )),
                }
            }
        }
    };
}

keyword_enum!(BurstUnit, BurstUnit::Exchange => "exchange", BurstUnit::Airtime => "airtime");
keyword_enum!(
    TransitionModel,
    TransitionModel::Literal => "literal",
    TransitionModel::Normalized => "normalized",
);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: u32,
    /// Relaxation weight λ in `τ ← (1-λ) τ + λ F(τ)`.
    pub damping: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 100_000,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    pub burst_unit: BurstUnit,
    pub transition_model: TransitionModel,
    /// Add `L` to the expected attempt slots.
    pub include_txop_slots: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            burst_unit: BurstUnit::Exchange,
            transition_model: TransitionModel::Literal,
            include_txop_slots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_stations: u32,
    pub acs: [AcParams; NUM_ACS],
    pub phy: PhyProfile,
    pub access_mode: AccessMode,
    pub model: ModelOptions,
    pub solver: SolverSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        default_table1()
    }
}

/// The standard EDCA parameter set, desk PHY profile and 10 stations.
pub fn default_table1() -> ScenarioConfig {
    ScenarioConfig {
        n_stations: 10,
        acs: [
            AcParams::new(7, 15, 2, 3264),
            AcParams::new(15, 31, 2, 6016),
            AcParams::new(31, 1023, 3, 0),
            AcParams::new(31, 1023, 7, 0),
        ],
        phy: PhyProfile::default(),
        access_mode: AccessMode::Basic,
        model: ModelOptions::default(),
        solver: SolverSettings::default(),
    }
}

impl ScenarioConfig {
    pub fn with_stations(&self, n: u32) -> Self {
        Self {
            n_stations: n,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// Outcome of [`validate`]. `violations` make the configuration unusable;
/// `notes` record adjustments such as window normalization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> crate::Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(crate::Error::InvalidConfig(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        f.write_str(&self.violations.join("; "))
    }
}

pub fn validate(cfg: &ScenarioConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut fail = |msg: String| report.violations.push(msg);

    if cfg.n_stations < 1 {
        fail("scenario.n_stations must be ≥ 1".to_string());
    }

    let phy = &cfg.phy;
    for (name, value) in [("slot_us", phy.slot_us), ("sifs_us", phy.sifs_us)] {
        if value == 0 {
            fail(format!("phy.{name} must be > 0"));
        }
    }
    if !(phy.data_rate.is_finite() && phy.data_rate > 0.0) {
        fail(format!("phy.data_rate must be finite and > 0, got {}", phy.data_rate));
    }
    for (name, value) in [
        ("header_bits", phy.header_bits),
        ("payload_bits", phy.payload_bits),
        ("ack_bits", phy.ack_bits),
        ("rts_bits", phy.rts_bits),
        ("cts_bits", phy.cts_bits),
    ] {
        if value == 0 {
            fail(format!("phy.{name} must be > 0"));
        }
    }

    for (idx, ac) in cfg.acs.iter().enumerate() {
        if ac.cw_min < 1 {
            fail(format!("ac{idx}: cw_min must be ≥ 1"));
        }
        if ac.cw_max < ac.cw_min {
            fail(format!(
                "ac{idx}: cw_max ({}) must be ≥ cw_min ({})",
                ac.cw_max, ac.cw_min
            ));
        }
        if ac.aifsn < MIN_AIFSN {
            fail(format!(
                "ac{idx}: aifsn must be ≥ {MIN_AIFSN} (AIFS below AIFS_min), got {}",
                ac.aifsn
            ));
        }
        if ac.retry_extra > MAX_RETRY_EXTRA {
            fail(format!("ac{idx}: retry_extra must be ≤ {MAX_RETRY_EXTRA}"));
        }
    }
    for (idx, ac) in cfg.acs.iter().enumerate() {
        if ac.cw_min >= 1 && ac.cw_max >= ac.cw_min && !ac.is_normalized() {
            report.notes.push(format!(
                "ac{idx}: cw_max {} is not cw_min·2^m; normalized to {} (m = {})",
                ac.cw_max,
                ac.effective_cw_max(),
                ac.stages()
            ));
        }
    }

    let s = &cfg.solver;
    if !(s.tolerance.is_finite() && s.tolerance > 0.0) {
        report
            .violations
            .push("scenario.solver_tolerance must be finite and > 0".to_string());
    }
    if s.max_iterations == 0 {
        report
            .violations
            .push("scenario.solver_max_iterations must be ≥ 1".to_string());
    }
    if !(s.damping > 0.0 && s.damping <= 1.0) {
        report
            .violations
            .push("scenario.solver_damping must lie in (0, 1]".to_string());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_defaults() {
        let cfg = default_table1();
        assert_eq!(cfg.acs[0], AcParams::new(7, 15, 2, 3264));
        assert_eq!(cfg.acs[1], AcParams::new(15, 31, 2, 6016));
        assert_eq!(cfg.acs[3], AcParams::new(31, 1023, 7, 0));
        assert!(cfg.acs.iter().all(|ac| ac.retry_extra == 2));
        assert_eq!(cfg.n_stations, 10);
        assert_eq!(cfg.phy, PhyProfile::default());
    }

    #[test]
    fn stage_count_normalization() {
        let ac2 = default_table1().acs[2];
        assert_eq!(ac2.stages(), 5);
        assert_eq!(ac2.effective_cw_max(), 992);
        assert_eq!(ac2.normalized().cw_max, 31 * 32);
        // 15/7 and 31/15 each round down to a single doubling
        assert_eq!(default_table1().acs[0].effective_cw_max(), 14);
        assert_eq!(default_table1().acs[1].effective_cw_max(), 30);
        assert_eq!(AcParams::new(16, 1024, 2, 0).stages(), 6);
        assert!(AcParams::new(16, 1024, 2, 0).is_normalized());
        assert_eq!(AcParams::new(8, 8, 2, 0).stages(), 0);
    }

    #[test]
    fn defaults_validate_clean_with_notes() {
        let report = validate(&default_table1());
        assert!(report.is_ok(), "{report}");
        assert_eq!(report.notes.len(), 4);
    }

    #[test]
    fn zero_cw_min_rejected() {
        let mut cfg = default_table1();
        cfg.acs[1].cw_min = 0;
        let report = validate(&cfg);
        assert!(report.violations.iter().any(|v| v.contains("cw_min must be ≥ 1")));
    }

    #[test]
    fn aifsn_below_two_rejected() {
        let mut cfg = default_table1();
        cfg.acs[0].aifsn = 1;
        assert!(cfg.phy.aifs_offset(1) < 0.0);
        let report = validate(&cfg);
        assert!(!report.is_ok());
        assert!(report.violations[0].contains("aifsn"));
    }

    #[test]
    fn inverted_window_and_zero_rate_rejected() {
        let mut cfg = default_table1();
        cfg.acs[2].cw_max = 3;
        cfg.phy.data_rate = 0.0;
        cfg.n_stations = 0;
        let report = validate(&cfg);
        assert_eq!(report.violations.len(), 3);
    }

    #[test]
    fn aifs_arithmetic() {
        let phy = PhyProfile::default();
        assert_eq!(phy.aifs(2), 50.0);
        assert_eq!(phy.aifs(7), 150.0);
        assert_eq!(phy.aifs_min(), 50.0);
        assert_eq!(phy.aifs_offset(7), 100.0);
    }
}
