mod common;

use chrono::Duration;
use syndromic_core::aberration::{AberrationConfig, Trend};
use syndromic_core::exec::Execution;
use syndromic_core::pipeline::Status;
use syndromic_core::store::{CountKey, CountStore, FileStore};
use syndromic_core::Syndrome;
use syndromic_service::scheduler::{ingest_range, ingest_tick, recompute_alerts, AlertSnapshot};
use syndromic_service::source::ReplaySource;

use common::{hour, message, pipeline, registry};

const ALPHA: Option<(f64, f64)> = Some((10.0, 10.0));

#[test]
fn empty_hour_commits_an_empty_tick() {
    let store = FileStore::in_memory();
    let source = ReplaySource::new(vec![]).unwrap();
    let report = ingest_tick(hour(2, 5), &source, &pipeline(), &registry(), &store).unwrap();
    assert!(!report.skipped);
    assert_eq!((report.drained, report.unlocated, report.recorded), (0, 0, 0));
    assert!(report.by_status.iter().all(|(_, n)| *n == 0));
    assert!(store.tick_committed(hour(2, 5)));
    assert_eq!(store.sum("Alpha", Syndrome::Respiratory, hour(1, 0), hour(3, 0)), 0);
}

#[test]
fn one_report_counts_once_in_its_hour() {
    let store = FileStore::in_memory();
    let at = hour(2, 4) + Duration::minutes(20);
    let source = ReplaySource::new(vec![message("m1", "u1", at, ALPHA, "woke up with cough today")]).unwrap();
    let report = ingest_tick(hour(2, 5), &source, &pipeline(), &registry(), &store).unwrap();
    assert_eq!(report.count(Status::Accepted), 1);
    assert_eq!(report.recorded, 1);
    assert_eq!(store.count(&CountKey::new("Alpha", Syndrome::Respiratory, at)), 1);
    assert_eq!(store.sum("Beta", Syndrome::Respiratory, hour(1, 0), hour(3, 0)), 0);
    let archived = store
        .messages("Alpha", Syndrome::Respiratory, hour(2, 4), hour(2, 5), 10)
        .unwrap();
    assert_eq!(archived.len(), 1);
    assert_eq!(archived[0].id, "m1");
}

#[test]
fn window_is_the_hour_before_the_tick() {
    let store = FileStore::in_memory();
    let source = ReplaySource::new(vec![
        message(
            "early",
            "u1",
            hour(2, 3) + Duration::minutes(59),
            ALPHA,
            "woke up with cough today",
        ),
        message("edge", "u2", hour(2, 4), ALPHA, "woke up with cough today"),
        message("late", "u3", hour(2, 5), ALPHA, "woke up with cough today"),
    ])
    .unwrap();
    let report = ingest_tick(hour(2, 5), &source, &pipeline(), &registry(), &store).unwrap();
    assert_eq!(report.drained, 1);
    assert_eq!(
        store.count(&CountKey::new("Alpha", Syndrome::Respiratory, hour(2, 4))),
        1
    );
}

#[test]
fn replaying_a_tick_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let msgs: Vec<_> = (0..8)
        .map(|i| {
            let at = hour(2, 4) + Duration::minutes(i * 7);
            message(
                &format!("m{i}"),
                &format!("u{i}"),
                at,
                ALPHA,
                "home sick with diarrhea today",
            )
        })
        .collect();
    let source = ReplaySource::new(msgs).unwrap();
    let (p, reg) = (pipeline(), registry());
    let key = CountKey::new("Alpha", Syndrome::Gastrointestinal, hour(2, 4));
    {
        let store = FileStore::open(dir.path()).unwrap();
        let first = ingest_tick(hour(2, 5), &source, &p, &reg, &store).unwrap();
        assert_eq!(first.recorded, 8);
        let again = ingest_tick(hour(2, 5), &source, &p, &reg, &store).unwrap();
        assert!(again.skipped);
        assert_eq!(store.count(&key), 8);
    }
    let reopened = FileStore::open(dir.path()).unwrap();
    assert!(reopened.tick_committed(hour(2, 5)));
    assert!(ingest_tick(hour(2, 5), &source, &p, &reg, &reopened).unwrap().skipped);
    assert_eq!(reopened.count(&key), 8);
}

#[test]
fn unlocated_messages_do_not_use_up_the_daily_allowance() {
    let store = FileStore::in_memory();
    let mut msgs: Vec<_> = (0..10)
        .map(|i| {
            message(
                &format!("far{i}"),
                "u1",
                hour(2, 4) + Duration::minutes(i),
                None,
                "woke up with cough today",
            )
        })
        .collect();
    msgs.push(message(
        "home",
        "u1",
        hour(2, 4) + Duration::minutes(30),
        ALPHA,
        "woke up with cough today",
    ));
    let source = ReplaySource::new(msgs).unwrap();
    let report = ingest_tick(hour(2, 5), &source, &pipeline(), &registry(), &store).unwrap();
    assert_eq!(report.unlocated, 10);
    assert_eq!(report.count(Status::Accepted), 1);
}

#[test]
fn rejects_ticks_off_the_hour() {
    let store = FileStore::in_memory();
    let source = ReplaySource::new(vec![]).unwrap();
    let at = hour(2, 5) + Duration::minutes(1);
    assert!(ingest_tick(at, &source, &pipeline(), &registry(), &store).is_err());
    assert!(!store.tick_committed(at));
}

#[test]
fn range_runs_each_tick_after_the_first() {
    let store = FileStore::in_memory();
    let source = ReplaySource::new(vec![]).unwrap();
    let reports = ingest_range(hour(2, 0), hour(2, 6), &source, &pipeline(), &registry(), &store).unwrap();
    let ticks: Vec<_> = reports.iter().map(|r| r.tick).collect();
    assert_eq!(ticks, (1..=6).map(|h| hour(2, h)).collect::<Vec<_>>());
}

#[test]
fn empty_store_scores_zero_everywhere() {
    let store = FileStore::in_memory();
    let snap = recompute_alerts(
        hour(20, 9),
        &store,
        &registry(),
        &AberrationConfig::default(),
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(snap.cities.len(), 2);
    for city in &snap.cities {
        let order: Vec<_> = city.syndromes.iter().map(|a| a.syndrome).collect();
        assert_eq!(order, Syndrome::ALL);
        for a in &city.syndromes {
            assert_eq!(
                (a.score, a.band, a.trend, a.current_count),
                (0.0, 0, Trend::Sideways, 0)
            );
        }
    }
}

/// Fourteen days of a steady 18/22 alternating count in every hour.
fn seeded_history(store: &FileStore) {
    for day in 1..=15 {
        for h in 0..24 {
            let n = if (day + h) % 2 == 0 { 18 } else { 22 };
            store
                .record(&CountKey::new("Alpha", Syndrome::Rash, hour(day, h)), n, None)
                .unwrap();
        }
    }
}

#[test]
fn tenfold_spike_raises_the_top_band() {
    let store = FileStore::in_memory();
    seeded_history(&store);
    store
        .record(&CountKey::new("Alpha", Syndrome::Rash, hour(16, 0)), 200, None)
        .unwrap();
    let cfg = AberrationConfig::default();
    let snap = recompute_alerts(hour(16, 1), &store, &registry(), &cfg, Execution::Sequential).unwrap();
    let alert = snap.get("Alpha", Syndrome::Rash).unwrap();
    assert_eq!(alert.current_count, 200);
    assert!(alert.band >= 3, "{alert:?}");
    assert_eq!(alert.trend, Trend::Up);
    assert_eq!(snap.get("Beta", Syndrome::Rash).unwrap().band, 0);
}

#[test]
fn steady_counts_stay_quiet_and_sideways() {
    let store = FileStore::in_memory();
    seeded_history(&store);
    let snap = recompute_alerts(
        hour(16, 0),
        &store,
        &registry(),
        &AberrationConfig::default(),
        Execution::Sequential,
    )
    .unwrap();
    let alert = snap.get("Alpha", Syndrome::Rash).unwrap();
    assert_eq!(alert.band, 0);
    assert_eq!(alert.trend, Trend::Sideways);
}

#[test]
fn snapshot_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    assert!(AlertSnapshot::load(dir.path()).unwrap().is_none());
    let store = FileStore::in_memory();
    seeded_history(&store);
    let snap = recompute_alerts(
        hour(16, 0),
        &store,
        &registry(),
        &AberrationConfig::default(),
        Execution::Parallel,
    )
    .unwrap();
    snap.save(dir.path()).unwrap();
    assert_eq!(AlertSnapshot::load(dir.path()).unwrap(), Some(snap));
}
