//! Run manifests: enough metadata next to every output to regenerate it.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    /// SHA-256 of the canonical JSON of the run configuration.
    pub config_hash: String,
    pub master_seed: u64,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` wins when set so
    /// that manifests can be reproduced byte for byte.
    pub created_unix: u64,
    pub outputs: Vec<String>,
}

/// Serialises `config` with object keys sorted at every level and no
/// whitespace, so equal configurations hash equally whatever their key order.
pub fn canonical_json<T: Serialize + ?Sized>(config: &T) -> Result<String> {
    // `Value` objects are BTreeMap-backed, so re-serialising sorts the keys.
    let v = serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| Error::Config(e.to_string()))
}

pub fn config_hash<T: Serialize + ?Sized>(config: &T) -> Result<String> {
    let digest = Sha256::digest(canonical_json(config)?.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        write!(hex, "{b:02x}").expect("writing to a String cannot fail");
    }
    Ok(hex)
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

impl RunManifest {
    pub fn new<T: Serialize + ?Sized>(config: &T, master_seed: u64, outputs: Vec<String>) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(config)?,
            master_seed,
            created_unix: timestamp(),
            outputs,
        })
    }
}
