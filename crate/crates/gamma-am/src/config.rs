//! Run configuration: flat `key = value` files merged with command-line
//! overrides.
//!
//! Values may be bare words or double-quoted strings; lists are
//! comma-separated; `#` starts a comment outside quotes. Relative paths in a
//! file resolve against the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gamma_am_core::{BcNormalization, Correction, EdgeFilter, ExpressionMetric, Namespace, Seeding, SimilarityKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the expression and semantic matrices are balanced before mixing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balancing {
    /// Equalize both matrices into `m` percentile bins and mix at 0.5.
    Percentile,
    /// Pick gamma by grid search on split / cluster / assign runs.
    #[default]
    GammaTuning,
    /// Use the configured `gamma` as is.
    FixedGamma,
}

pub const KEYS: &[&str] = &[
    "obo",
    "annotations",
    "expression_a",
    "expression_b",
    "namespace",
    "metric",
    "similarity",
    "balancing",
    "gamma",
    "m",
    "k",
    "grid_step",
    "runs",
    "split",
    "seed",
    "alpha",
    "correction",
    "seeding",
    "popular_threshold",
    "out_dir",
    "evidence_exclude",
    "edge_filter",
    "assign_equalized",
    "term_graph",
    "strict_obo",
    "bc_normalization",
    "l2_blocks",
];

const PATH_KEYS: &[&str] = &["obo", "annotations", "expression_a", "expression_b", "out_dir"];

/// Raw key/value settings before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    /// Parse config text; `base` is the directory relative paths resolve against.
    pub fn parse(text: &str, source: &str, base: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let n = idx + 1;
            let line = strip_comment(raw.trim_end_matches('\r')).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, n, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("{source}:{n}: unknown key `{key}`")));
            }
            let value = unquote(value.trim()).map_err(|m| Error::parse(source, n, m))?;
            let value = if PATH_KEYS.contains(&key.as_str()) && !value.is_empty() {
                base.join(&value).to_string_lossy().into_owned()
            } else {
                value
            };
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("{source}:{n}: key `{key}` set twice")));
            }
        }
        Ok(Settings(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.0.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Later settings win.
    pub fn merge(mut self, over: Settings) -> Settings {
        self.0.extend(over.0);
        self
    }

    fn typed<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => parse(v)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.typed(key, |v| v.parse().ok())
    }

    fn word<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.typed(key, |v| {
            serde_json::from_value(serde_json::Value::String(v.to_string())).ok()
        })
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>> {
        self.typed(key, |v| match v {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        })
    }

    fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        })
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> std::result::Result<String, String> {
    if let Some(rest) = v.strip_prefix('"') {
        let inner = rest
            .strip_suffix('"')
            .ok_or_else(|| format!("unterminated string `{v}`"))?;
        if inner.contains('"') {
            return Err(format!("stray quote in `{v}`"));
        }
        return Ok(inner.to_string());
    }
    if v.contains('"') {
        return Err(format!("stray quote in `{v}`"));
    }
    Ok(v.to_string())
}

/// Fully typed configuration. Serialized verbatim into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub obo: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub expression_a: Option<PathBuf>,
    pub expression_b: Option<PathBuf>,
    pub namespace: Namespace,
    pub metric: ExpressionMetric,
    pub similarity: SimilarityKind,
    pub balancing: Balancing,
    pub gamma: Option<f64>,
    pub m: usize,
    pub k: usize,
    pub grid_step: f64,
    pub runs: usize,
    pub split: f64,
    pub seed: Option<u64>,
    pub alpha: f64,
    pub correction: Correction,
    pub seeding: Seeding,
    pub popular_threshold: Option<usize>,
    pub out_dir: PathBuf,
    pub evidence_exclude: Vec<String>,
    pub edge_filter: EdgeFilter,
    /// Assign B genes on the equalized expression matrix in percentile mode.
    pub assign_equalized: bool,
    pub term_graph: bool,
    pub strict_obo: bool,
    pub bc_normalization: BcNormalization,
    /// Condition counts of consecutive experiments, each L2-normalized per
    /// gene before distances are taken. Empty disables normalization.
    pub l2_blocks: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            obo: None,
            annotations: None,
            expression_a: None,
            expression_b: None,
            namespace: Namespace::BiologicalProcess,
            metric: ExpressionMetric::default(),
            similarity: SimilarityKind::default(),
            balancing: Balancing::default(),
            gamma: None,
            m: 20,
            k: 10,
            grid_step: 0.05,
            runs: 10,
            split: 0.5,
            seed: None,
            alpha: 0.05,
            correction: Correction::default(),
            seeding: Seeding::default(),
            popular_threshold: None,
            out_dir: PathBuf::from("gamma_am_out"),
            evidence_exclude: vec!["ND".to_string()],
            edge_filter: EdgeFilter::default(),
            assign_equalized: true,
            term_graph: true,
            strict_obo: false,
            bc_normalization: BcNormalization::default(),
            l2_blocks: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let mut c = PipelineConfig::default();
        let path = |k: &str| s.get(k).filter(|v| !v.is_empty()).map(PathBuf::from);
        c.obo = path("obo");
        c.annotations = path("annotations");
        c.expression_a = path("expression_a");
        c.expression_b = path("expression_b");
        if let Some(d) = path("out_dir") {
            c.out_dir = d;
        }
        if let Some(v) = s.parsed("namespace")? {
            c.namespace = v;
        }
        if let Some(v) = s.parsed("metric")? {
            c.metric = v;
        }
        if let Some(v) = s.parsed("similarity")? {
            c.similarity = v;
        }
        if let Some(v) = s.word("balancing")? {
            c.balancing = v;
        }
        c.gamma = s.parsed("gamma")?;
        macro_rules! scalar {
            ($($key:ident),*) => {$(
                if let Some(v) = s.parsed(stringify!($key))? {
                    c.$key = v;
                }
            )*};
        }
        scalar!(m, k, grid_step, runs, split, alpha);
        c.seed = s.parsed("seed")?;
        if let Some(v) = s.parsed("correction")? {
            c.correction = v;
        }
        if let Some(v) = s.parsed("seeding")? {
            c.seeding = v;
        }
        c.popular_threshold = s.parsed("popular_threshold")?;
        if let Some(v) = s.list("evidence_exclude") {
            c.evidence_exclude = v;
        }
        if let Some(v) = s.word("edge_filter")? {
            c.edge_filter = v;
        }
        if let Some(v) = s.boolean("assign_equalized")? {
            c.assign_equalized = v;
        }
        if let Some(v) = s.boolean("term_graph")? {
            c.term_graph = v;
        }
        if let Some(v) = s.boolean("strict_obo")? {
            c.strict_obo = v;
        }
        if let Some(v) = s.word("bc_normalization")? {
            c.bc_normalization = v;
        }
        if let Some(v) = s.list("l2_blocks") {
            c.l2_blocks = v
                .iter()
                .map(|b| b.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("invalid l2_blocks `{}`", s.get("l2_blocks").unwrap_or(""))))?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Range and consistency checks that do not need the input files.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match (self.balancing, self.gamma) {
            (Balancing::FixedGamma, None) => return bad("balancing = fixed_gamma requires gamma".into()),
            (Balancing::FixedGamma, Some(g)) if !(0.0..=1.0).contains(&g) => {
                return bad(format!("gamma {g} outside [0, 1]"))
            }
            (Balancing::Percentile | Balancing::GammaTuning, Some(_)) => {
                return bad("gamma is only allowed with balancing = fixed_gamma".into())
            }
            _ => {}
        }
        if self.m < 2 {
            return bad(format!("m must be at least 2, got {}", self.m));
        }
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.runs == 0 {
            return bad("runs must be positive".into());
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad(format!("split {} outside (0, 1)", self.split));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if self.l2_blocks.contains(&0) {
            return bad("l2_blocks entries must be positive".into());
        }
        Ok(())
    }

    pub fn require_path<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{key}` is required")))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("`seed` is required".into()))
    }

    /// Checks needed before a full pipeline run.
    pub fn validate_for_pipeline(&self) -> Result<()> {
        self.validate()?;
        self.require_path(&self.obo, "obo")?;
        self.require_path(&self.annotations, "annotations")?;
        self.require_path(&self.expression_a, "expression_a")?;
        self.require_path(&self.expression_b, "expression_b")?;
        self.require_seed()?;
        Ok(())
    }

    pub fn excluded_evidence(&self) -> std::collections::BTreeSet<String> {
        self.evidence_exclude.iter().cloned().collect()
    }

    /// The settings that reproduce this config when parsed back.
    pub fn to_settings(&self) -> Settings {
        let mut s = Settings::default();
        let mut put = |k: &str, v: String| {
            s.0.insert(k.to_string(), v);
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.to_string_lossy().into_owned());
        for (k, v) in [
            ("obo", path(&self.obo)),
            ("annotations", path(&self.annotations)),
            ("expression_a", path(&self.expression_a)),
            ("expression_b", path(&self.expression_b)),
        ] {
            if let Some(v) = v {
                put(k, v);
            }
        }
        put("out_dir", self.out_dir.to_string_lossy().into_owned());
        put("namespace", self.namespace.as_str().into());
        put("metric", self.metric.as_str().into());
        put("similarity", self.similarity.as_str().into());
        put("balancing", word(&self.balancing));
        if let Some(g) = self.gamma {
            put("gamma", g.to_string());
        }
        put("m", self.m.to_string());
        put("k", self.k.to_string());
        put("grid_step", self.grid_step.to_string());
        put("runs", self.runs.to_string());
        put("split", self.split.to_string());
        if let Some(seed) = self.seed {
            put("seed", seed.to_string());
        }
        put("alpha", self.alpha.to_string());
        put("correction", self.correction.as_str().into());
        put("seeding", self.seeding.as_str().into());
        if let Some(t) = self.popular_threshold {
            put("popular_threshold", t.to_string());
        }
        put("evidence_exclude", self.evidence_exclude.join(","));
        put("edge_filter", word(&self.edge_filter));
        put("assign_equalized", self.assign_equalized.to_string());
        put("term_graph", self.term_graph.to_string());
        put("strict_obo", self.strict_obo.to_string());
        put("bc_normalization", word(&self.bc_normalization));
        put(
            "l2_blocks",
            self.l2_blocks
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        s
    }

    /// Render as a config file.
    pub fn to_config_text(&self) -> String {
        let s = self.to_settings();
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = s.get(key) {
                out.push_str(&format!("{key} = \"{v}\"\n"));
            }
        }
        out
    }
}

fn word<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}
