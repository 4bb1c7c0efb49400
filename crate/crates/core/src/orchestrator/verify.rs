//! Re-derives a run's verdicts from its stored artifacts, without simulating.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::SCHEMA_VERSION;
use super::metrics::evaluate;
use super::run::{digest, sha256_hex, RunManifest, Summary, MANIFEST_FILE, SUMMARY_FILE};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifiedCheck {
    pub name: String,
    pub recorded: bool,
    pub recomputed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<VerifiedCheck>,
    /// Every recomputed verdict equals the recorded one.
    pub consistent: bool,
    pub all_passed: bool,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))
}

/// Accepts a run directory or the manifest inside it.
pub fn verify(path: &Path) -> Result<VerifyReport> {
    let (dir, manifest_path) = if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST_FILE))
    } else {
        (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
    };
    let raw: serde_json::Value = serde_json::from_slice(&read(&manifest_path)?)
        .map_err(|e| Error::InvalidParameter(format!("manifest is not JSON: {e}")))?;
    let version = raw.get("schema_version").and_then(serde_json::Value::as_u64);
    if version != Some(u64::from(SCHEMA_VERSION)) {
        return Err(Error::InvalidParameter(format!(
            "manifest schema version {version:?} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    let manifest: RunManifest =
        serde_json::from_value(raw).map_err(|e| Error::InvalidParameter(format!("malformed manifest: {e}")))?;
    for a in &manifest.artifacts {
        let actual = sha256_hex(&read(&dir.join(&a.path))?);
        if actual != a.sha256 {
            return Err(Error::InvalidParameter(format!("checksum mismatch for {}", a.path)));
        }
    }
    if digest(&manifest.artifacts) != manifest.output_digest {
        return Err(Error::InvalidParameter("output digest does not match the artifact list".into()));
    }
    let summary: Summary = serde_json::from_slice(&read(&dir.join(SUMMARY_FILE))?)
        .map_err(|e| Error::InvalidParameter(format!("malformed summary: {e}")))?;
    let checks: Vec<VerifiedCheck> = manifest
        .checks
        .iter()
        .map(|c| VerifiedCheck { name: c.name.clone(), recorded: c.passed, recomputed: evaluate(&c.rule, &summary.records) })
        .collect();
    let consistent = checks.iter().all(|c| c.recorded == c.recomputed) && manifest.all_passed == checks.iter().all(|c| c.recorded);
    let all_passed = checks.iter().all(|c| c.recomputed);
    Ok(VerifyReport { checks, consistent, all_passed })
}
