//! TOML service configuration. Secrets never live here; the parser config
//! only names the environment variable that holds an API key.

use std::path::{Path, PathBuf};

use intentrank_core::query::ParserConfig;
use intentrank_core::scoring::EmbedderConfig;
use intentrank_svg::DEFAULT_PAYLOAD_THRESHOLD;
use serde::{Deserialize, Serialize};

pub const DEFAULT_COMMIT_CAP: usize = 8;
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Snapshot directory loaded at startup and by reindex without a path.
    pub index_dir: PathBuf,
    /// One event log per session lives here.
    pub session_dir: PathBuf,
    pub commit_cap: usize,
    pub default_k: usize,
    pub payload_threshold: usize,
    pub embedder: EmbedderConfig,
    pub parser: ParserConfig,
    /// Optional external re-ranker for auto-selection.
    pub selector_endpoint: Option<String>,
    /// Optional external model that turns a summary plus a message into edits.
    pub editor_endpoint: Option<String>,
    pub backend_timeout_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            index_dir: PathBuf::from("index"),
            session_dir: PathBuf::from("sessions"),
            commit_cap: DEFAULT_COMMIT_CAP,
            default_k: DEFAULT_TOP_K,
            payload_threshold: DEFAULT_PAYLOAD_THRESHOLD,
            embedder: EmbedderConfig::default(),
            parser: ParserConfig { fallback_only: true, ..ParserConfig::default() },
            selector_endpoint: None,
            editor_endpoint: None,
            backend_timeout_secs: 30,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: ServiceConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Relative paths are resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.index_dir, &mut cfg.session_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.parser.keyword_table_path.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), String> {
        if self.commit_cap == 0 {
            return Err("commit_cap must be at least 1".into());
        }
        if self.default_k == 0 {
            return Err("default_k must be at least 1".into());
        }
        if self.parser.max_retries == 0 {
            return Err("parser.max_retries must be at least 1".into());
        }
        Ok(())
    }
}
