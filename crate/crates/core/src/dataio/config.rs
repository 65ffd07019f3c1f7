//! JSON configuration documents, validation and dotted-key overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::synth::{GridSpec, NoiseModel};
use crate::abcd::PortSpec;
use crate::engine::fit::FitOptions;
use crate::error::{Error, Result};
use crate::topology::{default_cpw, BareCableTopology, ResonatorTopology, CABLE_Q};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Uniform,
    #[default]
    ModeWindows,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub grid: GridKind,
    pub f_min: f64,
    pub f_max: f64,
    /// Total points for a uniform grid, points per mode for mode windows.
    pub points: usize,
    /// Half-width of each mode window in estimated linewidths.
    pub linewidths: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid: GridKind::ModeWindows,
            f_min: 3e9,
            f_max: 5.5e9,
            points: 801,
            linewidths: 15.0,
        }
    }
}

impl SweepConfig {
    pub fn grid_spec(&self) -> GridSpec {
        match self.grid {
            GridKind::Uniform => GridSpec::Uniform {
                f_min: self.f_min,
                f_max: self.f_max,
                points: self.points,
            },
            GridKind::ModeWindows => GridSpec::ModeWindows {
                f_min: self.f_min,
                f_max: self.f_max,
                linewidths: self.linewidths,
                points_per_mode: self.points,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0 && self.f_min.is_finite()) {
            return Err(Error::validation("sweep.f_min", "must be > 0"));
        }
        if !(self.f_max > self.f_min && self.f_max.is_finite()) {
            return Err(Error::validation("sweep.f_max", "must exceed sweep.f_min"));
        }
        if self.points < 2 {
            return Err(Error::validation("sweep.points", "must be >= 2"));
        }
        if !(self.linewidths > 0.0) {
            return Err(Error::validation("sweep.linewidths", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    /// Fixed attenuation plus cable loss between generator and coupler, dB.
    pub chain_attenuation: f64,
    /// Generator power per input trace, W.
    pub p_generator: Vec<f64>,
    /// The mode nearest this frequency is fitted in each trace, Hz.
    pub f_target: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            chain_attenuation: 80.4,
            p_generator: Vec::new(),
            f_target: 4.902e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanTargets {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Cable `Q_i` held fixed during calibration.
    pub fixed_cable_q: f64,
    /// Family means to match instead of surveying input traces: node and
    /// antinode for a splice, half-wave and quarter-wave for a chip.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<MeanTargets>,
    /// CPW lengths of the half-wave and quarter-wave chip assemblies, m.
    pub chip_cpw_lengths: [f64; 2],
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            fixed_cable_q: CABLE_Q,
            targets: None,
            chip_cpw_lengths: [default_cpw(1.0).length, default_cpw(0.25).length],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub schema_version: u32,
    #[serde(default = "default_topology")]
    pub topology: ResonatorTopology,
    #[serde(default)]
    pub port: PortSpec,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub power: PowerConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

fn default_topology() -> ResonatorTopology {
    ResonatorTopology::Bare(BareCableTopology::default())
}

impl Default for ConfigDocument {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            topology: default_topology(),
            port: PortSpec::default(),
            sweep: SweepConfig::default(),
            fit: FitOptions::default(),
            noise: NoiseModel::default(),
            power: PowerConfig::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let doc: Self = serde_path_to_error::deserialize(value).map_err(|e| {
            let key = e.path().to_string();
            Error::validation(if key == "." { "(root)".into() } else { key }, e.into_inner().to_string())
        })?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Loads `path` (or the defaults), applies `key=value` overrides in order
    /// and re-validates.
    pub fn load_with_overrides(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Parse {
                line: e.line(),
                msg: e.to_string(),
            })?,
            None => serde_json::to_value(Self::default())?,
        };
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("override {o:?} is not key=value")))?;
            apply_override(&mut value, key.trim(), raw.trim())?;
        }
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.topology.validate()?;
        self.port.validate()?;
        self.sweep.validate()?;
        self.fit.validate()?;
        self.noise.validate()?;
        if !(self.power.chain_attenuation.is_finite()) {
            return Err(Error::validation("power.chain_attenuation", "must be finite"));
        }
        if let Some(i) = self.power.p_generator.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::validation(format!("power.p_generator[{i}]"), "must be >= 0"));
        }
        if !(self.power.f_target > 0.0) {
            return Err(Error::validation("power.f_target", "must be > 0"));
        }
        let c = &self.calibration;
        if !(c.fixed_cable_q > 0.0) {
            return Err(Error::validation("calibration.fixed_cable_q", "must be > 0"));
        }
        if let Some(t) = c.targets {
            if !(t.a > 0.0 && t.b > 0.0) {
                return Err(Error::validation("calibration.targets", "means must be > 0"));
            }
        }
        if c.chip_cpw_lengths.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::validation("calibration.chip_cpw_lengths", "must be >= 0"));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Sets the dotted `key` in `doc`, creating objects along the way. The value
/// is parsed as JSON when possible, otherwise taken as a string.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("bad override key {key:?}")));
    }
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(Error::validation(parts[..i].join("."), "is not an object"));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last key")
}
