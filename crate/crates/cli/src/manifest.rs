use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub target_rank: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReferencePolicy {
    #[default]
    #[serde(rename = "first-of-group")]
    FirstOfGroup,
}

/// Input description shared by `bounds`, `plan` and `compress`.
///
/// Relative `block_paths` are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub block_paths: Vec<PathBuf>,
    pub budget: BudgetSpec,
    #[serde(default)]
    pub rank_tol: Option<f64>,
    #[serde(default)]
    pub reference_policy: ReferencePolicy,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.to_string()))?;
        manifest
            .validate()
            .map_err(|msg| CliError::parse(path, msg))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in &mut manifest.block_paths {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(format!(
                "unsupported manifest schema_version {}, expected {MANIFEST_SCHEMA_VERSION}",
                self.schema_version
            ));
        }
        if self.block_paths.is_empty() {
            return Err("block_paths must list at least one file".into());
        }
        if self.budget.target_rank == 0 {
            return Err("budget.target_rank must be >= 1".into());
        }
        if !(self.budget.tolerance > 0.0) || !self.budget.tolerance.is_finite() {
            return Err("budget.tolerance must be positive and finite".into());
        }
        if let Some(t) = self.rank_tol {
            if !(t > 0.0) || !t.is_finite() {
                return Err("rank_tol must be positive and finite".into());
            }
        }
        Ok(())
    }
}
