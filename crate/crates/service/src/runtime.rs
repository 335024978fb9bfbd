//! Loading configured resources and running the server.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::{Arc, RwLock};

use anyhow::Context;
use chrono::{DateTime, Utc};
use syndromic_core::classifier::TextClassifier;
use syndromic_core::exec::Execution;
use syndromic_core::geo::CityRegistry;
use syndromic_core::pipeline::{BlockList, ClassifierSet, Pipeline, SyndromeLexicon};
use syndromic_core::store::{truncate_to_hour, CountStore, FileStore};
use syndromic_core::Syndrome;

use crate::api::{self, AppState};
use crate::config::{Config, SourceConfig};
use crate::scheduler::{ingest_tick, recompute_alerts, AlertSnapshot};
use crate::source::{ReplaySource, SourceAdapter};
use crate::synthetic::SyntheticSource;

fn reader(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

pub fn load_registry(path: &Path) -> anyhow::Result<CityRegistry> {
    CityRegistry::read_from(reader(path)?).with_context(|| format!("city registry {}", path.display()))
}

pub fn load_lexicon(path: &Path) -> anyhow::Result<SyndromeLexicon> {
    SyndromeLexicon::read_from(reader(path)?).with_context(|| format!("lexicon {}", path.display()))
}

pub fn load_blocklist(path: &Path) -> anyhow::Result<BlockList> {
    BlockList::read_from(reader(path)?).with_context(|| format!("block list {}", path.display()))
}

/// Loads `<syndrome>.vocab` / `<syndrome>.model` for all six syndromes.
pub fn load_classifiers(dir: &Path) -> anyhow::Result<ClassifierSet> {
    let mut set = ClassifierSet::default();
    for s in Syndrome::ALL {
        let clf = TextClassifier::load(dir, s.as_str())
            .with_context(|| format!("loading {s} model from {} (run `syndromic train`)", dir.display()))?;
        set.insert(s, clf);
    }
    Ok(set)
}

pub fn build_pipeline(cfg: &Config) -> anyhow::Result<Pipeline> {
    Ok(Pipeline::new(
        load_lexicon(&cfg.paths.lexicon)?,
        load_blocklist(&cfg.paths.blocklist)?,
        load_classifiers(&cfg.paths.models)?,
    )
    .with_daily_limit(cfg.pipeline.daily_limit))
}

pub fn open_store(cfg: &Config) -> anyhow::Result<FileStore> {
    FileStore::open(&cfg.data_dir).with_context(|| format!("opening store in {}", cfg.data_dir.display()))
}

pub fn build_source(cfg: &Config, registry: &CityRegistry) -> anyhow::Result<Option<Box<dyn SourceAdapter>>> {
    Ok(match &cfg.source {
        None => None,
        Some(SourceConfig::Replay { path }) => Some(Box::new(
            ReplaySource::open(path).with_context(|| format!("replay file {}", path.display()))?,
        )),
        Some(SourceConfig::Synthetic(s)) => Some(Box::new(SyntheticSource::new(s.clone(), registry)?)),
    })
}

/// Everything the server and the scheduler share.
pub struct Runtime {
    pub config: Config,
    pub registry: Arc<CityRegistry>,
    pub store: Arc<FileStore>,
    pub alerts: Arc<RwLock<AlertSnapshot>>,
}

impl Runtime {
    /// Opens the store and restores the last alert snapshot, computing a
    /// fresh one at `now` when none was saved.
    pub fn open(config: Config, now: DateTime<Utc>) -> anyhow::Result<Self> {
        let registry = Arc::new(load_registry(&config.paths.cities)?);
        let store = Arc::new(open_store(&config)?);
        let snapshot = match AlertSnapshot::load(&config.data_dir)? {
            Some(s) => s,
            None => recompute_alerts(
                truncate_to_hour(now),
                store.as_ref(),
                &registry,
                &config.aberration,
                Execution::default(),
            )?,
        };
        Ok(Runtime {
            config,
            registry,
            store,
            alerts: Arc::new(RwLock::new(snapshot)),
        })
    }

    pub fn app_state(&self) -> AppState {
        AppState {
            registry: self.registry.clone(),
            store: self.store.clone() as Arc<dyn CountStore>,
            alerts: self.alerts.clone(),
        }
    }

    /// Ingests the hour ending at `now` (if a source is given), then
    /// recomputes and persists the alert snapshot.
    pub fn tick(
        &self,
        now: DateTime<Utc>,
        source: Option<&dyn SourceAdapter>,
        pipeline: Option<&Pipeline>,
    ) -> anyhow::Result<()> {
        if let (Some(source), Some(pipeline)) = (source, pipeline) {
            ingest_tick(now, source, pipeline, &self.registry, self.store.as_ref())?;
        }
        let snapshot = recompute_alerts(
            now,
            self.store.as_ref(),
            &self.registry,
            &self.config.aberration,
            Execution::default(),
        )?;
        snapshot.save(&self.config.data_dir)?;
        *self.alerts.write().unwrap_or_else(|e| e.into_inner()) = snapshot;
        Ok(())
    }
}

/// Serves the API and, when a source is configured, runs the hourly
/// scheduler until interrupted.
pub async fn serve(config: Config) -> anyhow::Result<()> {
    let runtime = Arc::new(Runtime::open(config, Utc::now())?);
    let source: Option<Arc<dyn SourceAdapter>> = build_source(&runtime.config, &runtime.registry)?.map(Arc::from);
    let pipeline = match source {
        Some(_) => Some(Arc::new(build_pipeline(&runtime.config)?)),
        None => None,
    };

    if let (Some(source), Some(pipeline)) = (source, pipeline) {
        let rt = runtime.clone();
        let every = std::time::Duration::from_secs(60 * u64::from(rt.config.scheduler.tick_minutes));
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(every);
            interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
            loop {
                interval.tick().await;
                let (rt, source, pipeline) = (rt.clone(), source.clone(), pipeline.clone());
                let now = truncate_to_hour(Utc::now());
                let done =
                    tokio::task::spawn_blocking(move || rt.tick(now, Some(source.as_ref()), Some(pipeline.as_ref())))
                        .await;
                match done {
                    Ok(Ok(())) => {}
                    Ok(Err(e)) => log::error!("tick {now} aborted: {e:#}"),
                    Err(e) => log::error!("tick {now} panicked: {e}"),
                }
            }
        });
    }

    let addr = format!("{}:{}", runtime.config.server.bind, runtime.config.server.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, api::router(runtime.app_state()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
