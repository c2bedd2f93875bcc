//! Plain-text scenario files.
//!
//! ```text
//! # comments start with '#'
//! [radio]
//! carrier_frequency_ghz = 5
//! noise_density_dbm_hz = -169
//!
//! [network]
//! bandwidth_mhz = 10
//! altitude_m = 100
//! num_uavs = 3
//! uav_power_dbm = 30            # one value for all UAVs, or a list: 30, 27, 30
//! gateway_power_dbm = 30
//!
//! [users]
//! 1000, 0                        # x_m, y_m, one user per line
//!
//! [gateway]
//! 0, 0
//!
//! [initial_placement]            # optional, one UAV per line
//! 2500, 0
//! ```
//!
//! Every quantity can also be given in SI units (`carrier_frequency_hz`,
//! `noise_density_w_hz`, `bandwidth_hz`, `uav_power_w`, `gateway_power_w`),
//! and `[radio]` accepts an explicit `beta0` overriding the free-space value.
//! [`serialize_scenario`] writes the SI form so that parsing its output
//! reproduces every field bit for bit.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use sha2::{Digest, Sha256};
use skyhaul_core::{
    build_default_radio, dbm_to_watts, Error as CoreError, GroundNode, Placement, RadioConstants, Scenario,
};

/// A scenario file could not be turned into a [`Scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// 1-based line number, when the problem is tied to one line.
    pub line: Option<usize>,
    /// Offending key or section.
    pub field: Option<String>,
    pub message: String,
}

impl ParseError {
    fn at(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            field: Some(field.into()),
            message: message.into(),
        }
    }

    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line: None,
            field: Some(field.into()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "{field}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Radio,
    Network,
    Users,
    Gateway,
    InitialPlacement,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "radio" => Section::Radio,
            "network" => Section::Network,
            "users" => Section::Users,
            "gateway" => Section::Gateway,
            "initial_placement" => Section::InitialPlacement,
            _ => return None,
        })
    }
}

const RADIO_KEYS: &[&str] = &[
    "carrier_frequency_ghz",
    "carrier_frequency_hz",
    "noise_density_dbm_hz",
    "noise_density_w_hz",
    "beta0",
];
const NETWORK_KEYS: &[&str] = &[
    "bandwidth_mhz",
    "bandwidth_hz",
    "altitude_m",
    "num_uavs",
    "uav_power_dbm",
    "uav_power_w",
    "gateway_power_dbm",
    "gateway_power_w",
];

/// Raw `key = value` entry with its line number.
struct Entry {
    line: usize,
    value: String,
}

#[derive(Default)]
struct Raw {
    keys: BTreeMap<&'static str, Entry>,
    users: Vec<[f64; 2]>,
    gateway: Vec<(usize, [f64; 2])>,
    initial: Vec<[f64; 2]>,
    seen: Vec<Section>,
}

fn parse_number(line: usize, field: &str, text: &str) -> Result<f64, ParseError> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| ParseError::at(line, field, format!("expected a number, found `{}`", text.trim())))?;
    if !v.is_finite() {
        return Err(ParseError::at(line, field, "value must be finite"));
    }
    Ok(v)
}

fn parse_list(line: usize, field: &str, text: &str) -> Result<Vec<f64>, ParseError> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_number(line, field, s))
        .collect()
}

fn parse_point(line: usize, section: &str, text: &str) -> Result<[f64; 2], ParseError> {
    let values = parse_list(line, section, text)?;
    match values.as_slice() {
        [x, y] => Ok([*x, *y]),
        _ => Err(ParseError::at(
            line,
            section,
            format!("expected `x_m, y_m`, found {} value(s)", values.len()),
        )),
    }
}

fn tokenize(text: &str) -> Result<Raw, ParseError> {
    let mut raw = Raw::default();
    let mut section: Option<Section> = None;
    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let body = full.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            let s = Section::parse(name)
                .ok_or_else(|| ParseError::at(line, name, "unknown section"))?;
            if raw.seen.contains(&s) {
                return Err(ParseError::at(line, name, "section appears more than once"));
            }
            raw.seen.push(s);
            section = Some(s);
            continue;
        }
        let Some(current) = section else {
            return Err(ParseError::at(line, body, "content before the first section header"));
        };
        match current {
            Section::Radio | Section::Network => {
                let (key, value) = body
                    .split_once('=')
                    .ok_or_else(|| ParseError::at(line, body, "expected `key = value`"))?;
                let key = key.trim();
                let allowed = if current == Section::Radio {
                    RADIO_KEYS
                } else {
                    NETWORK_KEYS
                };
                let known = allowed
                    .iter()
                    .find(|k| **k == key)
                    .ok_or_else(|| ParseError::at(line, key, "unknown key in this section"))?;
                if raw.keys.contains_key(known) {
                    return Err(ParseError::at(line, key, "key given more than once"));
                }
                raw.keys.insert(
                    known,
                    Entry {
                        line,
                        value: value.trim().to_string(),
                    },
                );
            }
            Section::Users => raw.users.push(parse_point(line, "users", body)?),
            Section::Gateway => raw.gateway.push((line, parse_point(line, "gateway", body)?)),
            Section::InitialPlacement => raw.initial.push(parse_point(line, "initial_placement", body)?),
        }
    }
    Ok(raw)
}

impl Raw {
    /// Value of whichever of two unit variants is present, converted to SI.
    fn quantity(
        &self,
        human: &'static str,
        to_si: impl Fn(f64) -> f64,
        si: &'static str,
    ) -> Result<f64, ParseError> {
        match (self.keys.get(human), self.keys.get(si)) {
            (Some(_), Some(e)) => Err(ParseError::at(e.line, si, format!("conflicts with `{human}`"))),
            (Some(e), None) => Ok(to_si(parse_number(e.line, human, &e.value)?)),
            (None, Some(e)) => parse_number(e.line, si, &e.value),
            (None, None) => Err(ParseError::field(human, "missing required key")),
        }
    }

    fn quantity_list(
        &self,
        human: &'static str,
        to_si: impl Fn(f64) -> f64,
        si: &'static str,
    ) -> Result<(usize, Vec<f64>), ParseError> {
        match (self.keys.get(human), self.keys.get(si)) {
            (Some(_), Some(e)) => Err(ParseError::at(e.line, si, format!("conflicts with `{human}`"))),
            (Some(e), None) => Ok((e.line, parse_list(e.line, human, &e.value)?.into_iter().map(to_si).collect())),
            (None, Some(e)) => Ok((e.line, parse_list(e.line, si, &e.value)?)),
            (None, None) => Err(ParseError::field(human, "missing required key")),
        }
    }
}

fn core_error(err: CoreError) -> ParseError {
    match err {
        CoreError::Invariant { field, reason } => ParseError::field(field, reason),
        CoreError::DimensionMismatch { what, expected, found } => {
            ParseError::field(what, format!("expected {expected} entries, found {found}"))
        }
        other => ParseError {
            line: None,
            field: None,
            message: other.to_string(),
        },
    }
}

/// Parses scenario text. Units are converted to SI here (dBm to W, MHz to Hz,
/// GHz to Hz).
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let raw = tokenize(text)?;
    let fc = raw.quantity("carrier_frequency_ghz", |g| g * 1e9, "carrier_frequency_hz")?;
    let n0 = raw.quantity("noise_density_dbm_hz", dbm_to_watts, "noise_density_w_hz")?;
    let radio = match raw.keys.get("beta0") {
        Some(e) => RadioConstants::new(fc, parse_number(e.line, "beta0", &e.value)?, n0),
        None => build_default_radio(fc, n0),
    }
    .map_err(core_error)?;
    let bandwidth = raw.quantity("bandwidth_mhz", |m| m * 1e6, "bandwidth_hz")?;
    let altitude = {
        let e = raw
            .keys
            .get("altitude_m")
            .ok_or_else(|| ParseError::field("altitude_m", "missing required key"))?;
        parse_number(e.line, "altitude_m", &e.value)?
    };
    let num_uavs = {
        let e = raw
            .keys
            .get("num_uavs")
            .ok_or_else(|| ParseError::field("num_uavs", "missing required key"))?;
        e.value
            .parse::<usize>()
            .map_err(|_| ParseError::at(e.line, "num_uavs", format!("expected a count, found `{}`", e.value)))?
    };
    let (power_line, mut uav_power) = raw.quantity_list("uav_power_dbm", dbm_to_watts, "uav_power_w")?;
    if uav_power.len() == 1 && num_uavs > 1 {
        uav_power = vec![uav_power[0]; num_uavs];
    }
    if uav_power.len() != num_uavs {
        return Err(ParseError::at(
            power_line,
            "uav_power",
            format!("expected 1 or {num_uavs} values, found {}", uav_power.len()),
        ));
    }
    let gateway_power = raw.quantity("gateway_power_dbm", dbm_to_watts, "gateway_power_w")?;
    if !raw.seen.contains(&Section::Users) {
        return Err(ParseError::field("users", "missing [users] section (K >= 1)"));
    }
    let gateway = match raw.gateway.as_slice() {
        [(_, p)] => GroundNode::new(p[0], p[1]),
        [] => return Err(ParseError::field("gateway", "missing gateway position")),
        [_, (line, _), ..] => return Err(ParseError::at(*line, "gateway", "only one gateway position allowed")),
    };
    let users = raw.users.iter().map(|p| GroundNode::new(p[0], p[1])).collect();
    let mut scenario = Scenario::new(
        num_uavs,
        users,
        gateway,
        altitude,
        bandwidth,
        uav_power,
        gateway_power,
        radio,
    )
    .map_err(core_error)?;
    if raw.seen.contains(&Section::InitialPlacement) {
        let placement = Placement::new(raw.initial.clone()).map_err(core_error)?;
        scenario = scenario.with_initial_placement(placement).map_err(core_error)?;
    }
    Ok(scenario)
}

/// Writes `scenario` in the SI form of the file format. The output is
/// canonical: equal scenarios give identical text.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    let radio = scenario.radio();
    let mut s = String::new();
    let _ = writeln!(s, "[radio]");
    let _ = writeln!(s, "carrier_frequency_hz = {:e}", radio.carrier_frequency());
    let _ = writeln!(s, "noise_density_w_hz = {:e}", radio.noise_density());
    let default_beta0 = build_default_radio(radio.carrier_frequency(), radio.noise_density())
        .map(|r| r.beta0())
        .ok();
    if default_beta0 != Some(radio.beta0()) {
        let _ = writeln!(s, "beta0 = {:e}", radio.beta0());
    }
    let _ = writeln!(s, "\n[network]");
    let _ = writeln!(s, "bandwidth_hz = {:e}", scenario.total_bandwidth());
    let _ = writeln!(s, "altitude_m = {}", scenario.altitude());
    let _ = writeln!(s, "num_uavs = {}", scenario.num_uavs());
    let powers: Vec<String> = scenario.uav_power().iter().map(|p| format!("{p:e}")).collect();
    let _ = writeln!(s, "uav_power_w = {}", powers.join(", "));
    let _ = writeln!(s, "gateway_power_w = {:e}", scenario.gateway_power());
    let _ = writeln!(s, "\n[users]");
    for u in scenario.users() {
        let _ = writeln!(s, "{}, {}", u.x, u.y);
    }
    let g = scenario.gateway();
    let _ = writeln!(s, "\n[gateway]\n{}, {}", g.x, g.y);
    if let Some(p) = scenario.initial_placement() {
        let _ = writeln!(s, "\n[initial_placement]");
        for q in &p.uav_positions {
            let _ = writeln!(s, "{}, {}", q[0], q[1]);
        }
    }
    s
}

/// SHA-256 of the canonical serialization, as lowercase hex.
pub fn scenario_hash(scenario: &Scenario) -> String {
    let digest = Sha256::digest(serialize_scenario(scenario).as_bytes());
    format!("{digest:x}")
}
