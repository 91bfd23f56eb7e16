//! TOML device configurations and sweep plans.
//!
//! Device file:
//!
//! ```toml
//! c_mutual = 0.0          # aF, optional (default 0)
//! temperature_K = 4.2     # optional (default 4.2)
//!
//! [donor]
//! c_source = 1.74         # aF
//! c_drain = 1.83
//! c_gate = 1.44
//! c_back = 0.86
//! levels = [[0.0, 2], [15.4, 2]]   # [offset meV, degeneracy], or "metallic"
//! energy_offset = 575.0   # meV per electron, optional (default 0)
//! gamma_source = 1e9      # Hz, optional (default 1e9)
//! gamma_drain = 1e9
//! window = [0, 4]
//!
//! [dot]
//! # same keys
//! ```
//!
//! Plan file:
//!
//! ```toml
//! observable = "current"            # current | conductance | log10_conductance
//! axis1 = "v_gate:2500:3000:501"
//! axis2 = "v_back:-200:200:81"
//! delta_vd = 0.1                    # optional
//! log_floor = 1e-12                 # optional
//! temperature_K = 2.0               # optional device override
//! c_mutual = 5.0                    # optional device override
//!
//! [fixed]
//! v_drain = 0.2
//! ```
//!
//! Unknown keys are rejected in both files.

use serde::{Deserialize, Serialize};

use crate::device::{
    BiasPoint, CapacitanceSet, DeviceSpec, DotIndex, DotSpec, DotSpectrum, Level, OccupancyWindow, DEFAULT_GAMMA,
    DEFAULT_TEMPERATURE,
};
use crate::error::{Error, Result};
use crate::sweep::DEFAULT_LOG_FLOOR;
use crate::sweep::{Axis, Observable, SweepPlan};
use crate::transport::DEFAULT_DELTA_VD;

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

/// `levels` entry: either the string `"metallic"` or a list of
/// `[offset, degeneracy]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelsConfig {
    Named(String),
    List(Vec<(f64, u32)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DotConfig {
    pub c_source: f64,
    pub c_drain: f64,
    pub c_gate: f64,
    pub c_back: f64,
    pub levels: LevelsConfig,
    #[serde(default)]
    pub energy_offset: f64,
    #[serde(default = "default_gamma")]
    pub gamma_source: f64,
    #[serde(default = "default_gamma")]
    pub gamma_drain: f64,
    pub window: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(default)]
    pub c_mutual: f64,
    #[serde(rename = "temperature_K", default = "default_temperature")]
    pub temperature_k: f64,
    pub donor: DotConfig,
    pub dot: DotConfig,
}

fn keyed(block: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config(format!("{block}.{name}: {reason}")),
        Error::Config(m) => Error::Config(m),
        other => Error::Config(format!("{block}: {other}")),
    }
}

impl DotConfig {
    fn to_spec(&self, block: &str) -> Result<DotSpec> {
        let caps =
            CapacitanceSet::new(self.c_source, self.c_drain, self.c_gate, self.c_back).map_err(|e| keyed(block, e))?;
        let spectrum = match &self.levels {
            LevelsConfig::Named(s) if s == "metallic" => DotSpectrum::Metallic,
            LevelsConfig::Named(s) => {
                return Err(Error::Config(format!(
                    "{block}.levels: expected \"metallic\" or a list of [offset, degeneracy], got \"{s}\""
                )))
            }
            LevelsConfig::List(list) => DotSpectrum::discrete(
                list.iter()
                    .map(|&(offset, degeneracy)| Level { offset, degeneracy })
                    .collect(),
            )
            .map_err(|e| keyed(block, e))?,
        };
        let window = OccupancyWindow::new(self.window[0], self.window[1]).map_err(|e| keyed(block, e))?;
        DotSpec::new(
            caps,
            spectrum,
            self.energy_offset,
            self.gamma_source,
            self.gamma_drain,
            window,
        )
        .map_err(|e| keyed(block, e))
    }

    fn from_spec(spec: &DotSpec) -> Self {
        let caps = spec.caps();
        let levels = match spec.spectrum() {
            DotSpectrum::Metallic => LevelsConfig::Named("metallic".into()),
            DotSpectrum::Discrete(levels) => {
                LevelsConfig::List(levels.iter().map(|l| (l.offset, l.degeneracy)).collect())
            }
        };
        let w = spec.window();
        Self {
            c_source: caps.c_source(),
            c_drain: caps.c_drain(),
            c_gate: caps.c_gate(),
            c_back: caps.c_back(),
            levels,
            energy_offset: spec.energy_offset(),
            gamma_source: spec.gamma_source(),
            gamma_drain: spec.gamma_drain(),
            window: [w.min, w.max],
        }
    }
}

impl DeviceConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(one_line(&e.to_string())))
    }

    pub fn to_spec(&self) -> Result<DeviceSpec> {
        let donor = self.donor.to_spec(DotIndex::Donor.block())?;
        let dot = self.dot.to_spec(DotIndex::Dot.block())?;
        DeviceSpec::new(donor, dot, self.c_mutual, self.temperature_k).map_err(|e| keyed("device", e))
    }

    pub fn from_spec(spec: &DeviceSpec) -> Self {
        Self {
            c_mutual: spec.c_mutual(),
            temperature_k: spec.temperature(),
            donor: DotConfig::from_spec(spec.donor()),
            dot: DotConfig::from_spec(spec.dot()),
        }
    }

    /// TOML rendering with every key explicit, so equal devices give equal
    /// text.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("device config always serializes")
    }
}

impl DotIndex {
    /// Table name of the island in a device file.
    pub fn block(self) -> &'static str {
        match self {
            DotIndex::Donor => "donor",
            DotIndex::Dot => "dot",
        }
    }
}

/// Parses and validates a device file.
pub fn parse_device(text: &str) -> Result<DeviceSpec> {
    DeviceConfig::parse(text)?.to_spec()
}

/// Canonical TOML for a device.
pub fn device_to_toml(spec: &DeviceSpec) -> String {
    DeviceConfig::from_spec(spec).canonical()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfig {
    pub v_source: Option<f64>,
    pub v_drain: Option<f64>,
    pub v_gate: Option<f64>,
    pub v_back: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub observable: Option<String>,
    pub axis1: Option<String>,
    pub axis2: Option<String>,
    pub delta_vd: Option<f64>,
    pub log_floor: Option<f64>,
    #[serde(rename = "temperature_K")]
    pub temperature_k: Option<f64>,
    pub c_mutual: Option<f64>,
    #[serde(default)]
    pub fixed: FixedConfig,
}

/// A plan file before command-line overrides.
impl PlanConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Plan(one_line(&e.to_string())))
    }

    pub fn empty() -> Self {
        Self {
            observable: None,
            axis1: None,
            axis2: None,
            delta_vd: None,
            log_floor: None,
            temperature_k: None,
            c_mutual: None,
            fixed: FixedConfig::default(),
        }
    }

    /// Builds the sweep plan; `observable` defaults to current.
    pub fn to_plan(&self) -> Result<SweepPlan> {
        let axis = |v: &Option<String>, name: &str| -> Result<Axis> {
            v.as_deref()
                .ok_or_else(|| Error::Plan(format!("{name} is not set")))?
                .parse()
        };
        let observable = match &self.observable {
            Some(o) => o.parse()?,
            None => Observable::Current,
        };
        let f = &self.fixed;
        let fixed = BiasPoint::new(
            f.v_source.unwrap_or(0.0),
            f.v_drain.unwrap_or(0.0),
            f.v_gate.unwrap_or(0.0),
            f.v_back.unwrap_or(0.0),
        );
        let mut plan = SweepPlan::new(
            axis(&self.axis1, "axis1")?,
            axis(&self.axis2, "axis2")?,
            fixed,
            observable,
        )?;
        plan.delta_vd = self.delta_vd.unwrap_or(DEFAULT_DELTA_VD);
        plan.log_floor = self.log_floor.unwrap_or(DEFAULT_LOG_FLOOR);
        plan.validate()?;
        Ok(plan)
    }

    /// Applies the plan's device overrides.
    pub fn apply_overrides(&self, device: &DeviceSpec) -> Result<DeviceSpec> {
        let mut d = device.clone();
        if let Some(t) = self.temperature_k {
            d = d.with_temperature(t).map_err(|e| keyed("plan", e))?;
        }
        if let Some(c) = self.c_mutual {
            d = d.with_c_mutual(c).map_err(|e| keyed("plan", e))?;
        }
        Ok(d)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1: &str = include_str!("../configs/table1.device");

    #[test]
    fn bundled_table1_matches_builtin() {
        assert_eq!(parse_device(TABLE1).unwrap(), DeviceSpec::table1());
    }

    #[test]
    fn canonical_round_trip() {
        let d = DeviceSpec::table1().with_c_mutual(5.0).unwrap();
        let text = device_to_toml(&d);
        assert_eq!(parse_device(&text).unwrap(), d);
        assert_eq!(device_to_toml(&parse_device(&text).unwrap()), text);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = TABLE1.replace("c_gate = 1.44", "c_gate = 1.44\nc_gait = 1.0");
        let err = parse_device(&text).unwrap_err().to_string();
        assert!(err.contains("c_gait"), "{err}");
    }

    #[test]
    fn invalid_value_names_block_and_key() {
        let text = TABLE1.replacen("c_gate = 1.44", "c_gate = -1.44", 1);
        let err = parse_device(&text).unwrap_err().to_string();
        assert!(err.contains("donor.c_gate"), "{err}");
    }

    #[test]
    fn missing_key_is_named() {
        let text = TABLE1.replacen("c_back = 0.86\n", "", 1);
        let err = parse_device(&text).unwrap_err().to_string();
        assert!(err.contains("c_back"), "{err}");
    }

    #[test]
    fn bad_levels() {
        let text = TABLE1.replacen("levels = [[0.0, 2], [15.4, 2]]", "levels = \"quantum\"", 1);
        let err = parse_device(&text).unwrap_err().to_string();
        assert!(err.contains("donor.levels"), "{err}");
    }

    #[test]
    fn window_beyond_capacity() {
        let text = TABLE1.replacen("window = [0, 4]", "window = [0, 5]", 1);
        let err = parse_device(&text).unwrap_err().to_string();
        assert!(err.contains("donor.window"), "{err}");
    }

    #[test]
    fn plan_with_overrides() {
        let p = PlanConfig::parse(
            "observable = \"conductance\"\naxis1 = \"v_gate:0:10:11\"\naxis2 = \"v_drain:-1:1:3\"\ntemperature_K = 2.0\n[fixed]\nv_back = 5.0\n",
        )
        .unwrap();
        let plan = p.to_plan().unwrap();
        assert_eq!(plan.observable, Observable::Conductance);
        assert_eq!(plan.fixed.v_back, 5.0);
        let d = p.apply_overrides(&DeviceSpec::table1()).unwrap();
        assert_eq!(d.temperature(), 2.0);
        assert!(PlanConfig::parse("axis3 = \"v_gate:0:1:2\"").is_err());
        assert!(PlanConfig::empty().to_plan().is_err());
    }

    #[test]
    fn bundled_plans_parse() {
        for text in [
            include_str!("../configs/fig2.plan"),
            include_str!("../configs/fig3b.plan"),
            include_str!("../configs/fig5b.plan"),
        ] {
            PlanConfig::parse(text).unwrap().to_plan().unwrap();
        }
    }
}
