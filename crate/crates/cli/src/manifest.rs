//! Run manifests: every command writes one next to its outputs so any
//! artifact is traceable to the exact inputs and seeds that produced it,
//! and scenario identity can be checked before comparing logs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tracklab_core::config::AppConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Hash over the resolved vehicle/perturbation/mpc/scenario setup;
    /// equal fingerprints mean two logs came from the same experiment.
    pub scenario_fingerprint: Option<String>,
    pub seeds: Seeds,
    pub mode: Option<String>,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Seeds {
    pub elm: u64,
    pub split: u64,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes =
        std::fs::read(path).map_err(|e| anyhow::anyhow!("cannot hash {}: {e}", path.display()))?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Hash the parts of the configuration that define the experiment
/// (everything except estimator/compensator tuning and collection plan).
pub fn scenario_fingerprint(config: &AppConfig) -> anyhow::Result<String> {
    #[derive(Serialize)]
    struct Identity<'a> {
        vehicle: &'a tracklab_core::config::VehicleSection,
        perturbation: &'a tracklab_core::Perturbation,
        mpc: &'a tracklab_core::config::MpcSection,
        scenario: &'a tracklab_core::config::ScenarioSection,
    }
    let canonical = serde_json::to_string(&Identity {
        vehicle: &config.vehicle,
        perturbation: &config.perturbation,
        mpc: &config.mpc,
        scenario: &config.scenario,
    })?;
    Ok(hex_digest(canonical.as_bytes()))
}

pub fn file_ref(path: &Path) -> anyhow::Result<FileRef> {
    Ok(FileRef {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

impl RunManifest {
    pub fn write_next_to(&self, output: &Path) -> anyhow::Result<PathBuf> {
        let path = manifest_path(output);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn load_for(output: &Path) -> anyhow::Result<RunManifest> {
        let path = manifest_path(output);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            anyhow::anyhow!(
                "missing manifest {} (needed to check scenario identity): {e}",
                path.display()
            )
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}
