//! JSON sidecar recording how a map was produced.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::DeviceConfig;
use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::sweep::SweepPlan;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// `simulate` or `ground_state`.
    pub command: String,
    /// Device after all overrides.
    pub device: DeviceConfig,
    pub plan: SweepPlan,
    /// `sha256:` + hex digest of the canonical device TOML.
    pub config_digest: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

/// `sha256:<hex>` of the canonical TOML form of `device`.
pub fn config_digest(device: &DeviceSpec) -> String {
    let canonical = DeviceConfig::from_spec(device).canonical();
    let digest = Sha256::digest(canonical.as_bytes());
    let mut out = String::from("sha256:");
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl RunManifest {
    pub fn new(command: &str, device: &DeviceSpec, plan: &SweepPlan) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            device: DeviceConfig::from_spec(device),
            plan: plan.clone(),
            config_digest: config_digest(device),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest always serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Map(format!("manifest: {e}")))
    }

    pub fn device_spec(&self) -> Result<DeviceSpec> {
        self.device.to_spec()
    }
}

/// `<out>.manifest.json` next to the map file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
