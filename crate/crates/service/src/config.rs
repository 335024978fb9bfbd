//! Service configuration, read from TOML.
//!
//! ```toml
//! data_dir = "var"
//!
//! [paths]
//! lexicon = "data/lexicon.tsv"
//! blocklist = "data/blocklist.txt"
//! cities = "data/cities.tsv"
//! models = "models"
//!
//! [models]            # per-syndrome model spec, used by `train`
//! respiratory = "nb"
//!
//! [aberration]
//! k = 1.0
//! stratify_by_hour = true
//!
//! [server]
//! port = 8080
//!
//! [scheduler]
//! tick_minutes = 60
//!
//! [source]
//! kind = "replay"
//! path = "messages.jsonl"
//! ```
//!
//! `SYNDROMIC_PORT` and `SYNDROMIC_DATA_DIR` override the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use syndromic_core::aberration::AberrationConfig;
use syndromic_core::classifier::ModelSpec;
use syndromic_core::nb::EventModel;
use syndromic_core::pipeline::DEFAULT_DAILY_LIMIT;
use syndromic_core::Syndrome;

use crate::synthetic::SyntheticConfig;

pub const PORT_VAR: &str = "SYNDROMIC_PORT";
pub const DATA_DIR_VAR: &str = "SYNDROMIC_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_dir: PathBuf,
    pub paths: Paths,
    /// Model spec strings keyed by syndrome name.
    pub models: BTreeMap<String, String>,
    pub training: Training,
    pub aberration: AberrationConfig,
    pub pipeline: PipelineConfig,
    pub server: Server,
    pub scheduler: Scheduler,
    pub source: Option<SourceConfig>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: PathBuf::from("var"),
            paths: Paths::default(),
            models: BTreeMap::new(),
            training: Training::default(),
            aberration: AberrationConfig::default(),
            pipeline: PipelineConfig::default(),
            server: Server::default(),
            scheduler: Scheduler::default(),
            source: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub lexicon: PathBuf,
    pub blocklist: PathBuf,
    pub cities: PathBuf,
    pub models: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            lexicon: PathBuf::from("data/lexicon.tsv"),
            blocklist: PathBuf::from("data/blocklist.txt"),
            cities: PathBuf::from("data/cities.tsv"),
            models: PathBuf::from("models"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Training {
    pub alpha: f64,
    pub event_model: EventModel,
    pub c: f64,
    pub kkt_tolerance: f64,
}

impl Default for Training {
    fn default() -> Self {
        Training {
            alpha: 1.0,
            event_model: EventModel::Bernoulli,
            c: 1.0,
            kkt_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub daily_limit: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            daily_limit: DEFAULT_DAILY_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Server {
    pub bind: String,
    pub port: u16,
}

impl Default for Server {
    fn default() -> Self {
        Server {
            bind: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scheduler {
    pub tick_minutes: u32,
}

impl Default for Scheduler {
    fn default() -> Self {
        Scheduler { tick_minutes: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Replay { path: PathBuf },
    Synthetic(SyntheticConfig),
}

impl Config {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, resolves relative paths against its directory and
    /// applies environment overrides.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        fix(&mut self.paths.lexicon);
        fix(&mut self.paths.blocklist);
        fix(&mut self.paths.cities);
        fix(&mut self.paths.models);
        if let Some(SourceConfig::Replay { path }) = &mut self.source {
            fix(path);
        }
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> anyhow::Result<()> {
        if let Some(port) = var(PORT_VAR) {
            self.server.port = port
                .trim()
                .parse()
                .with_context(|| format!("{PORT_VAR}={port:?} is not a port number"))?;
        }
        if let Some(dir) = var(DATA_DIR_VAR) {
            self.data_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.aberration.validate()?;
        for (name, spec) in &self.models {
            name.parse::<Syndrome>()
                .with_context(|| format!("[models] key `{name}`"))?;
            spec.parse::<ModelSpec>().with_context(|| format!("[models] {name}"))?;
        }
        if self.scheduler.tick_minutes == 0 {
            bail!("scheduler.tick_minutes must be positive");
        }
        if self.pipeline.daily_limit == 0 {
            bail!("pipeline.daily_limit must be positive");
        }
        if let Some(SourceConfig::Synthetic(s)) = &self.source {
            s.validate()?;
        }
        Ok(())
    }

    /// Configured spec for `syndrome`, else the deployed default.
    pub fn model_spec(&self, syndrome: Syndrome) -> ModelSpec {
        self.models
            .get(syndrome.as_str())
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| ModelSpec::deployed_default(syndrome))
    }
}
