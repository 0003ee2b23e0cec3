//! `cartoprompt.toml`: every stage's settings in one file.
//!
//! Any key can be overridden from the environment as
//! `CARTOPROMPT__<SECTION>__<KEY>=<value>`; the value is read as a TOML
//! literal when it parses as one and as a plain string otherwise. Relative
//! paths resolve against the config file's directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use cartoprompt_core::curate::CurationJob;
use cartoprompt_core::embed::ProjectionConfig;
use cartoprompt_core::{DescriptorConfig, LatLon, VerbalizerRules};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "CARTOPROMPT__";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub descriptor: DescriptorConfig,
    pub verbalizer: VerbalizerRules,
    pub curation: CurationConfig,
    pub projection: ProjectionConfig,
    pub completion: CompletionConfig,
    pub service: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// OSM XML or Overpass JSON files.
    pub osm_files: Vec<PathBuf>,
    pub overpass: Option<OverpassSource>,
    /// Snapshot written by `ingest`.
    pub store: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            osm_files: Vec::new(),
            overpass: None,
            store: PathBuf::from("cartoprompt-store.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverpassSource {
    pub endpoint: String,
    #[serde(default = "default_overpass_timeout")]
    pub timeout_s: u32,
    pub areas: Vec<OverpassArea>,
}

fn default_overpass_timeout() -> u32 {
    180
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverpassArea {
    pub lat: f64,
    pub lon: f64,
    /// Half the side of the fetched square.
    pub half_side_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    #[serde(flatten)]
    pub job: CurationJob,
    pub request_timeout_s: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            job: CurationJob::default(),
            request_timeout_s: 300.0,
        }
    }
}

/// Raw-completion endpoint behind `/v1/ask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompletionConfig {
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_s: f64,
    pub max_concurrent: usize,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8001/v1/completions".into(),
            model: "cartoprompt".into(),
            token_env: "CARTOPROMPT_COMPLETION_TOKEN".into(),
            timeout_s: 60.0,
            max_concurrent: 4,
        }
    }
}

impl CompletionConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// GeoJSON layer written by `embed` and served at `/v1/embeddings`.
    pub embeddings_path: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            embeddings_path: PathBuf::from("embeddings.geojson"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let has_overpass = self.data.overpass.as_ref().is_some_and(|o| !o.areas.is_empty());
        if self.data.osm_files.is_empty() && !has_overpass {
            return Err(Error::Config(
                "no data source: set data.osm_files or data.overpass.areas".into(),
            ));
        }
        if let Some(o) = &self.data.overpass {
            for a in &o.areas {
                if !LatLon::new(a.lat, a.lon).is_valid() || !(a.half_side_m > 0.0) {
                    return Err(Error::Config(format!(
                        "invalid overpass area ({}, {}, {})",
                        a.lat, a.lon, a.half_side_m
                    )));
                }
            }
        }
        self.descriptor.validate()?;
        self.curation.job.validate()?;
        self.projection.validate()?;
        if !(self.curation.request_timeout_s > 0.0) || !(self.completion.timeout_s > 0.0) {
            return Err(Error::Config("timeouts must be positive".into()));
        }
        if self.completion.max_concurrent == 0 {
            return Err(Error::Config("completion.max_concurrent must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Parses TOML text, applies `env` overrides, validates.
    pub fn from_toml_str<I>(text: &str, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut root: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        apply_env_overrides(&mut root, env)?;
        let cfg: PipelineConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` with overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text, std::env::vars())
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.data.osm_files.iter_mut().for_each(fix);
        fix(&mut self.data.store);
        fix(&mut self.service.embeddings_path);
    }
}

fn parse_env_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

pub fn apply_env_overrides<I>(root: &mut toml::Table, env: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    for (key, raw) in env {
        let Some(rest) = key.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let path: Vec<String> = rest.split("__").map(str::to_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(Error::Config(format!("malformed override variable `{key}`")));
        }
        let (leaf, parents) = path.split_last().expect("split yields one item");
        let mut table = &mut *root;
        for p in parents {
            let slot = table
                .entry(p.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = slot
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}`: `{p}` is not a section")))?;
        }
        table.insert(leaf.clone(), parse_env_value(&raw));
    }
    Ok(())
}
