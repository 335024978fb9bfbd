//! Hourly ingestion and alert recomputation.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use syndromic_core::aberration::{band, c2_score, trend, AberrationConfig, AlertState, BaselineWindow, Trend};
use syndromic_core::exec::{self, Execution};
use syndromic_core::geo::CityRegistry;
use syndromic_core::pipeline::{Pipeline, Status};
use syndromic_core::store::{is_on_hour, Batch, CountKey, CountStore};
use syndromic_core::{Error, Result, Syndrome};

use crate::source::SourceAdapter;

/// What one tick did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    /// The tick instant; the window is the hour before it.
    pub tick: DateTime<Utc>,
    /// The tick had already been committed and nothing was re-processed.
    pub skipped: bool,
    pub drained: u64,
    /// No location, or outside every registered city.
    pub unlocated: u64,
    pub invalid: u64,
    /// Pipeline outcomes in `Status::ALL` order.
    pub by_status: Vec<(Status, u64)>,
    /// Count increments recorded, one per (message, confirmed syndrome).
    pub recorded: u64,
}

impl TickReport {
    fn new(tick: DateTime<Utc>) -> Self {
        TickReport {
            tick,
            skipped: false,
            drained: 0,
            unlocated: 0,
            invalid: 0,
            by_status: Status::ALL.iter().map(|s| (*s, 0)).collect(),
            recorded: 0,
        }
    }

    pub fn count(&self, status: Status) -> u64 {
        self.by_status.iter().find(|(s, _)| *s == status).map_or(0, |(_, n)| *n)
    }

    fn bump(&mut self, status: Status) {
        if let Some(entry) = self.by_status.iter_mut().find(|(s, _)| *s == status) {
            entry.1 += 1;
        }
    }
}

/// Ingests the hour `[now − 1h, now)`: assigns each message a city, runs the
/// pipeline, and commits all accepted counts and archived messages as one
/// batch marked with `now`. A tick that was already committed is skipped,
/// so re-running an hour never double-counts. Any error aborts the tick
/// before anything is written.
pub fn ingest_tick(
    now: DateTime<Utc>,
    source: &dyn SourceAdapter,
    pipeline: &Pipeline,
    registry: &CityRegistry,
    store: &dyn CountStore,
) -> Result<TickReport> {
    if !is_on_hour(now) {
        return Err(Error::InvalidArgument(format!("tick {now} is not on an hour boundary")));
    }
    let mut report = TickReport::new(now);
    if store.tick_committed(now) {
        report.skipped = true;
        return Ok(report);
    }

    let from = now - Duration::hours(1);
    let messages = source.drain(from, now)?;
    report.drained = messages.len() as u64;

    let mut batch = Batch {
        tick: Some(now),
        ..Batch::default()
    };
    for m in &messages {
        if m.validate().is_err() {
            report.invalid += 1;
            continue;
        }
        let Some(city) = registry.assign(m.location) else {
            report.unlocated += 1;
            continue;
        };
        let outcome = pipeline.process(m)?;
        report.bump(outcome.status);
        for &syndrome in &outcome.matched_syndromes {
            let key = CountKey::new(city.name.clone(), syndrome, m.timestamp);
            batch.counts.push((key.clone(), 1));
            batch.messages.push((key, m.clone()));
            report.recorded += 1;
        }
    }
    store.commit(batch)?;
    pipeline.rate_limiter.forget_before(from.date_naive());
    log::info!(
        "tick {now}: {} drained, {} accepted, {} unlocated",
        report.drained,
        report.count(Status::Accepted),
        report.unlocated
    );
    Ok(report)
}

/// Runs every hourly tick in `(first, last]` in order.
pub fn ingest_range(
    first: DateTime<Utc>,
    last: DateTime<Utc>,
    source: &dyn SourceAdapter,
    pipeline: &Pipeline,
    registry: &CityRegistry,
    store: &dyn CountStore,
) -> Result<Vec<TickReport>> {
    let mut reports = Vec::new();
    let mut tick = first + Duration::hours(1);
    while tick <= last {
        reports.push(ingest_tick(tick, source, pipeline, registry, store)?);
        tick += Duration::hours(1);
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyndromeAlert {
    pub syndrome: Syndrome,
    pub score: f64,
    pub band: u8,
    pub trend: Trend,
    /// Count in the scored period (the last hour when stratified by hour).
    pub current_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityAlerts {
    pub city: String,
    /// All six syndromes in fixed order.
    pub syndromes: Vec<SyndromeAlert>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertSnapshot {
    pub computed_at: DateTime<Utc>,
    pub cities: Vec<CityAlerts>,
}

impl AlertSnapshot {
    pub fn city(&self, name: &str) -> Option<&CityAlerts> {
        self.cities.iter().find(|c| c.city == name)
    }

    pub fn get(&self, city: &str, syndrome: Syndrome) -> Option<&SyndromeAlert> {
        self.city(city)?.syndromes.get(syndrome.index())
    }

    pub fn state(&self, city: &str, syndrome: Syndrome) -> Option<AlertState> {
        self.get(city, syndrome).map(|a| AlertState {
            score: a.score,
            band: a.band,
            trend: a.trend,
            computed_at: self.computed_at,
        })
    }

    /// Writes `alerts.json` under `dir`, replacing any previous snapshot
    /// atomically.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let tmp = dir.join("alerts.json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self)?).map_err(Error::Storage)?;
        fs::rename(&tmp, dir.join("alerts.json")).map_err(Error::Storage)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join("alerts.json");
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&fs::read(path)?)?))
    }
}

/// C2 score of the period ending at `at` against its baseline.
pub fn score_at(
    store: &dyn CountStore,
    city: &str,
    syndrome: Syndrome,
    at: DateTime<Utc>,
    cfg: &AberrationConfig,
) -> Result<(f64, u64)> {
    let history = store.baseline(city, syndrome, at, cfg.history_days, cfg.stratify_by_hour)?;
    let current = store.current(city, syndrome, at, cfg.stratify_by_hour);
    let window = BaselineWindow::from_counts(history)?;
    Ok((c2_score(&window, current as f64, cfg.k, cfg.sigma_floor)?, current))
}

/// Scores every registered city and syndrome at `now`. The trend compares
/// against the score one hour earlier.
pub fn recompute_alerts(
    now: DateTime<Utc>,
    store: &dyn CountStore,
    registry: &CityRegistry,
    cfg: &AberrationConfig,
    exec: Execution,
) -> Result<AlertSnapshot> {
    cfg.validate()?;
    let pairs: Vec<(usize, Syndrome)> = (0..registry.len())
        .flat_map(|c| Syndrome::ALL.into_iter().map(move |s| (c, s)))
        .collect();
    let scored = exec::map(exec, &pairs, |&(c, syndrome)| -> Result<SyndromeAlert> {
        let city = &registry.cities()[c].name;
        let (score, current_count) = score_at(store, city, syndrome, now, cfg)?;
        let (previous, _) = score_at(store, city, syndrome, now - Duration::hours(1), cfg)?;
        Ok(SyndromeAlert {
            syndrome,
            score,
            band: band(score, &cfg.band_thresholds)?,
            trend: trend(Some(previous), score, cfg.trend_threshold),
            current_count,
        })
    });
    let mut scored = scored.into_iter();
    let mut cities = Vec::with_capacity(registry.len());
    for city in registry.cities() {
        let syndromes = scored.by_ref().take(Syndrome::ALL.len()).collect::<Result<Vec<_>>>()?;
        cities.push(CityAlerts {
            city: city.name.clone(),
            syndromes,
        });
    }
    Ok(AlertSnapshot {
        computed_at: now,
        cities,
    })
}
