use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gamma_am_core::LoadStats;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{Error, ErrorRecord, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl InputDigest {
    pub fn of(path: &Path, contents: &[u8]) -> Self {
        InputDigest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(contents)),
            bytes: contents.len() as u64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub obo_warnings: Vec<String>,
    pub training_annotations: Option<LoadStatsRecord>,
    pub evaluation_annotations: Option<LoadStatsRecord>,
    pub gamma_used: Option<f64>,
    pub no_enrichment_genes: Vec<String>,
    /// B genes without held-out annotations; excluded from scoring.
    pub unscored_genes: Vec<String>,
    pub sc_skipped: usize,
    pub small_clusters: usize,
}

/// Serializable mirror of the loader counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStatsRecord {
    pub rows: usize,
    pub dropped_namespace: usize,
    pub dropped_evidence: usize,
    pub dropped_unknown_term: usize,
    pub duplicate_rows: usize,
    pub retained_annotations: usize,
    pub root_only_genes: usize,
    pub genes: usize,
}

impl LoadStatsRecord {
    pub fn new(s: &LoadStats, genes: usize) -> Self {
        LoadStatsRecord {
            rows: s.rows,
            dropped_namespace: s.dropped_namespace,
            dropped_evidence: s.dropped_evidence,
            dropped_unknown_term: s.dropped_unknown_term,
            duplicate_rows: s.duplicate_rows,
            retained_annotations: s.retained_annotations,
            root_only_genes: s.root_only_genes,
            genes,
        }
    }
}

/// Everything needed to audit or repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub config: PipelineConfig,
    pub workers: usize,
    pub inputs: BTreeMap<String, InputDigest>,
    pub stages_completed: Vec<String>,
    /// True when a stage failed and only earlier outputs exist.
    pub partial: bool,
    pub outputs: Vec<String>,
    pub diagnostics: Diagnostics,
    pub error: Option<ErrorRecord>,
}

impl RunManifest {
    pub fn new(config: PipelineConfig, workers: usize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: gamma_am_core::VERSION.to_string(),
            config,
            workers,
            inputs: BTreeMap::new(),
            stages_completed: Vec::new(),
            partial: false,
            outputs: Vec::new(),
            diagnostics: Diagnostics::default(),
            error: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&path.display().to_string(), e.line(), e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
