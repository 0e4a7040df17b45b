//! Flat `key = value` configuration files.
//!
//! ```text
//! [scenario]
//! n_stations = 10
//! access_mode = basic
//!
//! [phy]
//! slot_us = 20
//!
//! [ac0]
//! cw_min = 7
//! ```
//!
//! Sections are `[scenario]`, `[phy]` and `[ac0]`..`[ac3]`. Keys that are not
//! given keep their [`default_table1`](crate::params::default_table1) value.
//! Unknown sections or keys, duplicated keys and malformed values are errors.
//! Lines starting with `#` are comments. [`to_config_string`] produces the one
//! canonical form, which [`parse_config`] reads back to an identical value.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::params::{default_table1, ScenarioConfig, NUM_ACS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("invalid value `{value}` for {section}.{key}: {reason}")]
    InvalidValue {
        section: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("malformed override `{0}` (expected section.key=value)")]
    MalformedOverride(String),
}

fn parse_value<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        section: section.to_string(),
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

/// Set a single `section.key` on `cfg`.
pub fn apply_setting(
    cfg: &mut ScenarioConfig,
    section: &str,
    key: &str,
    value: &str,
) -> Result<(), ConfigError> {
    let unknown_key = || ConfigError::UnknownKey {
        section: section.to_string(),
        key: key.to_string(),
    };
    let v = value;
    match section {
        "scenario" => match key {
            "n_stations" => cfg.n_stations = parse_value(section, key, v)?,
            "access_mode" => cfg.access_mode = parse_value(section, key, v)?,
            "burst_unit" => cfg.model.burst_unit = parse_value(section, key, v)?,
            "transition_model" => cfg.model.transition_model = parse_value(section, key, v)?,
            "include_txop_slots" => cfg.model.include_txop_slots = parse_value(section, key, v)?,
            "solver_tolerance" => cfg.solver.tolerance = parse_value(section, key, v)?,
            "solver_max_iterations" => cfg.solver.max_iterations = parse_value(section, key, v)?,
            "solver_damping" => cfg.solver.damping = parse_value(section, key, v)?,
            _ => return Err(unknown_key()),
        },
        "phy" => {
            let phy = &mut cfg.phy;
            match key {
                "slot_us" => phy.slot_us = parse_value(section, key, v)?,
                "sifs_us" => phy.sifs_us = parse_value(section, key, v)?,
                "data_rate" => phy.data_rate = parse_value(section, key, v)?,
                "header_bits" => phy.header_bits = parse_value(section, key, v)?,
                "payload_bits" => phy.payload_bits = parse_value(section, key, v)?,
                "ack_bits" => phy.ack_bits = parse_value(section, key, v)?,
                "rts_bits" => phy.rts_bits = parse_value(section, key, v)?,
                "cts_bits" => phy.cts_bits = parse_value(section, key, v)?,
                _ => return Err(unknown_key()),
            }
        }
        s => {
            let idx = ac_index(s).ok_or_else(|| ConfigError::UnknownSection(s.to_string()))?;
            let ac = &mut cfg.acs[idx];
            match key {
                "cw_min" => ac.cw_min = parse_value(section, key, v)?,
                "cw_max" => ac.cw_max = parse_value(section, key, v)?,
                "aifsn" => ac.aifsn = parse_value(section, key, v)?,
                "txop_limit_us" => ac.txop_limit_us = parse_value(section, key, v)?,
                "retry_extra" => ac.retry_extra = parse_value(section, key, v)?,
                _ => return Err(unknown_key()),
            }
        }
    }
    Ok(())
}

fn ac_index(section: &str) -> Option<usize> {
    let idx: usize = section.strip_prefix("ac")?.parse().ok()?;
    (idx < NUM_ACS && section.len() == 3).then_some(idx)
}

fn is_known_section(section: &str) -> bool {
    matches!(section, "scenario" | "phy") || ac_index(section).is_some()
}

/// Parse configuration text on top of the default parameter set.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = default_table1();
    let mut section: Option<String> = None;
    let mut seen = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: format!("unterminated section header `{line}`"),
            })?;
            let name = name.trim();
            if !is_known_section(name) {
                return Err(ConfigError::UnknownSection(name.to_string()));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(current) = section.as_deref() else {
            return Err(ConfigError::Syntax {
                line: line_no,
                message: format!("`{key}` appears before any section header"),
            });
        };
        if !seen.insert((current.to_string(), key.to_string())) {
            return Err(ConfigError::Syntax {
                line: line_no,
                message: format!("duplicate key {current}.{key}"),
            });
        }
        apply_setting(&mut cfg, current, key, value)?;
    }
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Apply a `section.key=value` override.
pub fn apply_override(cfg: &mut ScenarioConfig, assignment: &str) -> Result<(), ConfigError> {
    let malformed = || ConfigError::MalformedOverride(assignment.to_string());
    let (path, value) = assignment.split_once('=').ok_or_else(malformed)?;
    let (section, key) = path.trim().split_once('.').ok_or_else(malformed)?;
    apply_setting(cfg, section.trim(), key.trim(), value.trim())
}

/// Canonical text form: fixed section and key order, LF line endings.
pub fn to_config_string(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let s = &mut out;
    // writing into a String cannot fail
    let _ = writeln!(s, "[scenario]");
    let _ = writeln!(s, "n_stations = {}", cfg.n_stations);
    let _ = writeln!(s, "access_mode = {}", cfg.access_mode);
    let _ = writeln!(s, "burst_unit = {}", cfg.model.burst_unit);
    let _ = writeln!(s, "transition_model = {}", cfg.model.transition_model);
    let _ = writeln!(s, "include_txop_slots = {}", cfg.model.include_txop_slots);
    let _ = writeln!(s, "solver_tolerance = {:e}", cfg.solver.tolerance);
    let _ = writeln!(s, "solver_max_iterations = {}", cfg.solver.max_iterations);
    let _ = writeln!(s, "solver_damping = {}", cfg.solver.damping);

    let phy = &cfg.phy;
    let _ = writeln!(s, "\n[phy]");
    let _ = writeln!(s, "slot_us = {}", phy.slot_us);
    let _ = writeln!(s, "sifs_us = {}", phy.sifs_us);
    let _ = writeln!(s, "data_rate = {}", phy.data_rate);
    let _ = writeln!(s, "header_bits = {}", phy.header_bits);
    let _ = writeln!(s, "payload_bits = {}", phy.payload_bits);
    let _ = writeln!(s, "ack_bits = {}", phy.ack_bits);
    let _ = writeln!(s, "rts_bits = {}", phy.rts_bits);
    let _ = writeln!(s, "cts_bits = {}", phy.cts_bits);

    for (idx, ac) in cfg.acs.iter().enumerate() {
        let _ = writeln!(s, "\n[ac{idx}]");
        let _ = writeln!(s, "cw_min = {}", ac.cw_min);
        let _ = writeln!(s, "cw_max = {}", ac.cw_max);
        let _ = writeln!(s, "aifsn = {}", ac.aifsn);
        let _ = writeln!(s, "txop_limit_us = {}", ac.txop_limit_us);
        let _ = writeln!(s, "retry_extra = {}", ac.retry_extra);
    }
    out
}
