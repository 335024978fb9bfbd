//! Hourly positive-message counts and the accepted-message archive.
//!
//! [`CountStore`] is the storage contract; [`FileStore`] implements it with
//! an in-memory index backed by an append-only JSON-lines journal.
//!
//! On-disk layout (format version 1):
//!
//! ```text
//! <data_dir>/VERSION         "syndromic-store 1"
//! <data_dir>/journal.jsonl   one committed batch per line
//! ```
//!
//! A batch line is `{"tick": <hour or null>, "counts": [...], "messages": [...]}`.
//! Each line is written with a single `write` followed by `fsync`, so a
//! batch is either fully present or (after a crash mid-write) a truncated
//! final line that is ignored on load.
//!
//! All instants are UTC. Buckets are inclusive at the start and exclusive
//! at the end.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::RwLock;

use chrono::{DateTime, Datelike, Duration, DurationRound, NaiveDate, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Message;
use crate::syndrome::Syndrome;

const VERSION: &str = "syndromic-store 1";
pub const DEFAULT_RETENTION_DAYS: i64 = 35;

pub fn truncate_to_hour(t: DateTime<Utc>) -> DateTime<Utc> {
    t.duration_trunc(Duration::hours(1)).unwrap_or(t)
}

fn truncate_to_day(t: DateTime<Utc>) -> DateTime<Utc> {
    t.duration_trunc(Duration::days(1)).unwrap_or(t)
}

pub fn is_on_hour(t: DateTime<Utc>) -> bool {
    t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountKey {
    pub city: String,
    pub syndrome: Syndrome,
    hour: DateTime<Utc>,
}

impl CountKey {
    /// `at` is truncated to its hour bucket.
    pub fn new(city: impl Into<String>, syndrome: Syndrome, at: DateTime<Utc>) -> Self {
        CountKey {
            city: city.into(),
            syndrome,
            hour: truncate_to_hour(at),
        }
    }

    pub fn hour(&self) -> DateTime<Utc> {
        self.hour
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Hourly,
    Daily,
    Weekly,
    Monthly,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hourly" => Ok(Granularity::Hourly),
            "daily" => Ok(Granularity::Daily),
            "weekly" => Ok(Granularity::Weekly),
            "monthly" => Ok(Granularity::Monthly),
            other => Err(Error::InvalidArgument(format!("unknown granularity `{other}`"))),
        }
    }
}

fn first_of_month(t: DateTime<Utc>) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(t.year(), t.month(), 1, 0, 0, 0)
        .single()
        .unwrap_or(t)
}

fn next_month(t: DateTime<Utc>) -> DateTime<Utc> {
    let (y, m) = if t.month() == 12 {
        (t.year() + 1, 1)
    } else {
        (t.year(), t.month() + 1)
    };
    Utc.with_ymd_and_hms(y, m, 1, 0, 0, 0).single().unwrap_or(t)
}

/// Bucket start/end pairs covering `[start, end)`. Weekly buckets are
/// 7-day runs anchored at the UTC day containing `start`.
fn buckets(start: DateTime<Utc>, end: DateTime<Utc>, g: Granularity) -> Vec<(DateTime<Utc>, DateTime<Utc>)> {
    let mut out = Vec::new();
    let mut cur = match g {
        Granularity::Hourly => truncate_to_hour(start),
        Granularity::Daily | Granularity::Weekly => truncate_to_day(start),
        Granularity::Monthly => first_of_month(start),
    };
    while cur < end {
        let next = match g {
            Granularity::Hourly => cur + Duration::hours(1),
            Granularity::Daily => cur + Duration::days(1),
            Granularity::Weekly => cur + Duration::days(7),
            Granularity::Monthly => next_month(cur),
        };
        out.push((cur, next));
        cur = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    pub city: String,
    pub syndrome: Syndrome,
    pub granularity: Granularity,
    /// `(bucket start, count)`, strictly increasing by bucket.
    pub points: Vec<(DateTime<Utc>, u64)>,
}

impl CountSeries {
    pub fn total(&self) -> u64 {
        self.points.iter().map(|(_, c)| c).sum()
    }
}

/// Everything ingested for one hour, committed atomically.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    /// Set for scheduler ticks; a second batch for the same tick is ignored.
    pub tick: Option<DateTime<Utc>>,
    pub counts: Vec<(CountKey, u64)>,
    pub messages: Vec<(CountKey, Message)>,
}

pub trait CountStore: Send + Sync {
    /// Applies `batch` atomically. Returns `false` without changing anything
    /// when the batch's tick was already committed.
    fn commit(&self, batch: Batch) -> Result<bool>;

    fn tick_committed(&self, tick: DateTime<Utc>) -> bool;

    /// Sum of hourly counts with bucket start in `[start, end)`.
    fn sum(&self, city: &str, syndrome: Syndrome, start: DateTime<Utc>, end: DateTime<Utc>) -> u64;

    /// Archived messages with bucket in `[start, end)`, newest first.
    fn messages(
        &self,
        city: &str,
        syndrome: Syndrome,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
        limit: usize,
    ) -> Result<Vec<Message>>;

    /// Counts one increment and optionally archives the message behind it.
    fn record(&self, key: &CountKey, increment: u64, message: Option<&Message>) -> Result<()> {
        self.commit(Batch {
            tick: None,
            counts: vec![(key.clone(), increment)],
            messages: message.map(|m| (key.clone(), m.clone())).into_iter().collect(),
        })?;
        Ok(())
    }

    fn count(&self, key: &CountKey) -> u64 {
        self.sum(&key.city, key.syndrome, key.hour, key.hour + Duration::hours(1))
    }

    /// Zero-filled counts in `[start, end)` per calendar bucket. The first
    /// and last buckets only count hours inside the range, so the points
    /// always total `sum(start, end)`.
    fn series(
        &self,
        city: &str,
        syndrome: Syndrome,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
        granularity: Granularity,
    ) -> Result<CountSeries> {
        if start > end {
            return Err(Error::InvalidArgument(format!("inverted range {start} > {end}")));
        }
        let points = buckets(start, end, granularity)
            .into_iter()
            .map(|(b0, b1)| (b0, self.sum(city, syndrome, b0.max(start), b1.min(end))))
            .collect();
        Ok(CountSeries {
            city: city.to_owned(),
            syndrome,
            granularity,
            points,
        })
    }

    /// Count for the period ending at `at`: the last hour when stratified,
    /// the last 24 hours otherwise.
    fn current(&self, city: &str, syndrome: Syndrome, at: DateTime<Utc>, stratify_by_hour: bool) -> u64 {
        let len = period(stratify_by_hour);
        self.sum(city, syndrome, at - len, at)
    }

    /// The same period shifted back by 1..=`history_days` days, oldest
    /// first. `at` must lie on an hour boundary.
    fn baseline(
        &self,
        city: &str,
        syndrome: Syndrome,
        at: DateTime<Utc>,
        history_days: usize,
        stratify_by_hour: bool,
    ) -> Result<Vec<u64>> {
        if !is_on_hour(at) {
            return Err(Error::InvalidArgument(format!("{at} is not on an hour boundary")));
        }
        let len = period(stratify_by_hour);
        Ok((1..=history_days as i64)
            .rev()
            .map(|d| {
                let end = at - Duration::days(d);
                self.sum(city, syndrome, end - len, end)
            })
            .collect())
    }

    /// Writes `hour_iso,count` rows for every hour in `[start, end)`.
    fn export_csv(
        &self,
        city: &str,
        syndrome: Syndrome,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
        out: &mut dyn Write,
    ) -> Result<()> {
        let s = self.series(city, syndrome, start, end, Granularity::Hourly)?;
        writeln!(out, "hour_iso,count")?;
        for (hour, count) in s.points {
            writeln!(out, "{},{count}", hour.format("%Y-%m-%dT%H:%M:%SZ"))?;
        }
        Ok(())
    }
}

fn period(stratify_by_hour: bool) -> Duration {
    if stratify_by_hour {
        Duration::hours(1)
    } else {
        Duration::days(1)
    }
}

type SeriesKey = (String, Syndrome);

#[derive(Debug, Default)]
struct Inner {
    counts: HashMap<SeriesKey, BTreeMap<DateTime<Utc>, u64>>,
    archive: HashMap<SeriesKey, BTreeMap<DateTime<Utc>, Vec<Message>>>,
    ticks: BTreeSet<DateTime<Utc>>,
    latest: Option<DateTime<Utc>>,
}

impl Inner {
    fn apply(&mut self, batch: &Batch, retention: Duration) {
        if let Some(t) = batch.tick {
            self.ticks.insert(t);
        }
        for (key, inc) in &batch.counts {
            if *inc > 0 {
                *self
                    .counts
                    .entry((key.city.clone(), key.syndrome))
                    .or_default()
                    .entry(key.hour)
                    .or_insert(0) += inc;
            }
            self.latest = self.latest.max(Some(key.hour));
        }
        for (key, m) in &batch.messages {
            self.archive
                .entry((key.city.clone(), key.syndrome))
                .or_default()
                .entry(key.hour)
                .or_default()
                .push(m.clone());
            self.latest = self.latest.max(Some(key.hour));
        }
        if let Some(latest) = self.latest {
            let cutoff = latest - retention;
            for hours in self.archive.values_mut() {
                *hours = hours.split_off(&cutoff);
            }
        }
    }
}

/// File-backed store with an in-memory index. `FileStore::in_memory`
/// gives the same behaviour without persistence.
#[derive(Debug)]
pub struct FileStore {
    inner: RwLock<Inner>,
    journal: Option<std::sync::Mutex<File>>,
    dir: Option<PathBuf>,
    retention: Duration,
}

impl FileStore {
    pub fn in_memory() -> Self {
        FileStore {
            inner: RwLock::new(Inner::default()),
            journal: None,
            dir: None,
            retention: Duration::days(DEFAULT_RETENTION_DAYS),
        }
    }

    /// Opens (or creates) a store under `dir`, replaying the journal.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let version_path = dir.join("VERSION");
        if version_path.exists() {
            let found = fs::read_to_string(&version_path)?;
            if found.trim() != VERSION {
                return Err(Error::InvalidArgument(format!(
                    "unsupported store version {:?} in {}",
                    found.trim(),
                    dir.display()
                )));
            }
        } else {
            fs::write(&version_path, format!("{VERSION}\n"))?;
        }

        let retention = Duration::days(DEFAULT_RETENTION_DAYS);
        let journal_path = dir.join("journal.jsonl");
        let mut inner = Inner::default();
        if journal_path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(&journal_path)?)
                .lines()
                .collect::<std::io::Result<_>>()?;
            let last = lines.len();
            for (n, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Batch>(line) {
                    Ok(batch) => inner.apply(&batch, retention),
                    Err(e) if n + 1 == last => {
                        log::warn!("ignoring truncated final journal line: {e}");
                    }
                    Err(e) => return Err(Error::parse(n + 1, e.to_string())),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&journal_path)
            .map_err(Error::Storage)?;
        Ok(FileStore {
            inner: RwLock::new(inner),
            journal: Some(std::sync::Mutex::new(file)),
            dir: Some(dir.to_owned()),
            retention,
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Hours for which a scheduler tick has been committed.
    pub fn ticks(&self) -> Vec<DateTime<Utc>> {
        self.read().ticks.iter().copied().collect()
    }

    /// Every (city, syndrome) pair with at least one recorded count.
    pub fn series_keys(&self) -> Vec<(String, Syndrome)> {
        let mut keys: Vec<_> = self.read().counts.keys().cloned().collect();
        keys.sort();
        keys
    }

    /// Earliest and latest hour bucket with a non-zero count.
    pub fn span(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        let inner = self.read();
        let first = inner.counts.values().filter_map(|m| m.keys().next()).min()?;
        let last = inner.counts.values().filter_map(|m| m.keys().next_back()).max()?;
        Some((*first, *last))
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }
}

impl CountStore for FileStore {
    fn commit(&self, batch: Batch) -> Result<bool> {
        let mut inner = self.inner.write().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = batch.tick {
            if inner.ticks.contains(&t) {
                return Ok(false);
            }
        }
        if let Some(journal) = &self.journal {
            let mut line = serde_json::to_string(&batch)?;
            line.push('\n');
            let mut file = journal.lock().unwrap_or_else(|e| e.into_inner());
            file.write_all(line.as_bytes()).map_err(Error::Storage)?;
            file.sync_data().map_err(Error::Storage)?;
        }
        inner.apply(&batch, self.retention);
        Ok(true)
    }

    fn tick_committed(&self, tick: DateTime<Utc>) -> bool {
        self.read().ticks.contains(&tick)
    }

    fn sum(&self, city: &str, syndrome: Syndrome, start: DateTime<Utc>, end: DateTime<Utc>) -> u64 {
        if start >= end {
            return 0;
        }
        let inner = self.read();
        inner
            .counts
            .get(&(city.to_owned(), syndrome))
            .map_or(0, |hours| hours.range(start..end).map(|(_, c)| c).sum())
    }

    fn messages(
        &self,
        city: &str,
        syndrome: Syndrome,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
        limit: usize,
    ) -> Result<Vec<Message>> {
        if limit == 0 {
            return Err(Error::InvalidArgument("limit must be positive".into()));
        }
        if start >= end {
            return Ok(Vec::new());
        }
        let inner = self.read();
        let Some(hours) = inner.archive.get(&(city.to_owned(), syndrome)) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for (_, msgs) in hours.range(start..end).rev() {
            let mut bucket: Vec<&Message> = msgs.iter().rev().collect();
            bucket.sort_by_key(|m| std::cmp::Reverse(m.timestamp));
            for m in bucket {
                if out.len() == limit {
                    return Ok(out);
                }
                out.push(m.clone());
            }
        }
        Ok(out)
    }
}

/// Calendar day containing `t`.
pub fn utc_day(t: DateTime<Utc>) -> NaiveDate {
    t.date_naive()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2011, 3, d, h, 0, 0).unwrap()
    }

    fn msg(id: &str, t: DateTime<Utc>) -> Message {
        Message {
            id: id.into(),
            user_id: "u".into(),
            timestamp: t,
            location: None,
            text: "sore throat".into(),
            is_retweet: false,
            has_external_link: false,
        }
    }

    const R: Syndrome = Syndrome::Respiratory;

    #[test]
    fn record_examples() {
        let s = FileStore::in_memory();
        let k = CountKey::new("Tokyo", R, at(2, 10) + Duration::minutes(17));
        assert_eq!(k.hour(), at(2, 10));
        s.record(&k, 1, None).unwrap();
        s.record(&k, 1, None).unwrap();
        assert_eq!(s.count(&k), 2);

        s.record(&k, 0, Some(&msg("m1", at(2, 10)))).unwrap();
        assert_eq!(s.count(&k), 2);
        assert_eq!(s.messages("Tokyo", R, at(2, 10), at(2, 11), 10).unwrap().len(), 1);

        let other = CountKey::new("London", R, at(2, 10));
        s.record(&other, 5, None).unwrap();
        assert_eq!(s.count(&k), 2);
        assert_eq!(s.count(&other), 5);
    }

    #[test]
    fn series_examples() {
        let s = FileStore::in_memory();
        for h in 0..24 {
            s.record(&CountKey::new("X", R, at(2, h)), 1, None).unwrap();
        }
        let daily = s.series("X", R, at(2, 0), at(3, 0), Granularity::Daily).unwrap();
        assert_eq!(daily.points, vec![(at(2, 0), 24)]);

        let empty = FileStore::in_memory();
        let z = empty.series("X", R, at(1, 0), at(4, 0), Granularity::Daily).unwrap();
        assert_eq!(z.points.len(), 3);
        assert!(z.points.iter().all(|(_, c)| *c == 0));

        let two_weeks = FileStore::in_memory();
        for d in 1..=14 {
            two_weeks
                .record(&CountKey::new("X", R, at(d, 12)), d as u64, None)
                .unwrap();
        }
        let weekly = two_weeks
            .series("X", R, at(1, 0), at(15, 0), Granularity::Weekly)
            .unwrap();
        assert_eq!(weekly.points, vec![(at(1, 0), 28), (at(8, 0), 77)]);

        assert!(s.series("X", R, at(3, 0), at(2, 0), Granularity::Hourly).is_err());
    }

    #[test]
    fn edge_buckets_are_clipped_to_the_range() {
        let s = FileStore::in_memory();
        for h in [3, 15] {
            for d in [1, 2] {
                s.record(&CountKey::new("X", R, at(d, h)), 1, None).unwrap();
            }
        }
        let daily = s.series("X", R, at(1, 12), at(2, 12), Granularity::Daily).unwrap();
        assert_eq!(daily.points, vec![(at(1, 0), 1), (at(2, 0), 1)]);
        assert_eq!(daily.total(), s.sum("X", R, at(1, 12), at(2, 12)));
    }

    #[test]
    fn monthly_buckets() {
        let s = FileStore::in_memory();
        s.record(&CountKey::new("X", R, at(31, 23)), 2, None).unwrap();
        let apr = Utc.with_ymd_and_hms(2011, 4, 1, 0, 0, 0).unwrap();
        s.record(&CountKey::new("X", R, apr), 3, None).unwrap();
        let m = s
            .series("X", R, at(1, 0), apr + Duration::days(2), Granularity::Monthly)
            .unwrap();
        assert_eq!(m.points, vec![(at(1, 0), 2), (apr, 3)]);
        assert_eq!("monthly".parse::<Granularity>().unwrap(), Granularity::Monthly);
    }

    #[test]
    fn baseline_examples() {
        let empty = FileStore::in_memory();
        assert_eq!(empty.baseline("X", R, at(20, 10), 14, true).unwrap(), vec![0; 14]);

        let s = FileStore::in_memory();
        for d in 1..=19 {
            // 5 per day, all in hour 10
            s.record(&CountKey::new("X", R, at(d, 9)), 5, None).unwrap();
        }
        assert_eq!(s.baseline("X", R, at(20, 10), 14, true).unwrap(), vec![5; 14]);
        assert_eq!(s.baseline("X", R, at(20, 0), 14, false).unwrap(), vec![5; 14]);
        assert!(s.baseline("X", R, at(20, 10) + Duration::minutes(1), 14, true).is_err());

        let pattern = FileStore::in_memory();
        for (i, d) in (6..=19).enumerate() {
            pattern
                .record(&CountKey::new("X", R, at(d, 9)), i as u64 * 3, None)
                .unwrap();
        }
        let expect: Vec<u64> = (0..14).map(|i| i * 3).collect();
        assert_eq!(pattern.baseline("X", R, at(20, 10), 14, true).unwrap(), expect);
        assert_eq!(pattern.current("X", R, at(19, 10), true), 39);
    }

    #[test]
    fn messages_newest_first() {
        let s = FileStore::in_memory();
        for (i, h) in [(1, 8), (2, 9), (3, 9)] {
            let k = CountKey::new("X", R, at(2, h));
            s.record(&k, 1, Some(&msg(&format!("m{i}"), at(2, h) + Duration::minutes(i))))
                .unwrap();
        }
        let all = s.messages("X", R, at(2, 0), at(3, 0), 10).unwrap();
        assert_eq!(
            all.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(),
            ["m3", "m2", "m1"]
        );
        let newest = s.messages("X", R, at(2, 0), at(3, 0), 1).unwrap();
        assert_eq!(newest[0].id, "m3");
        assert!(s.messages("Y", R, at(2, 0), at(3, 0), 5).unwrap().is_empty());
        assert!(s.messages("X", R, at(2, 0), at(3, 0), 0).is_err());
    }

    #[test]
    fn tick_batches_are_idempotent() {
        let s = FileStore::in_memory();
        let batch = Batch {
            tick: Some(at(2, 11)),
            counts: vec![(CountKey::new("X", R, at(2, 10)), 3)],
            messages: vec![],
        };
        assert!(s.commit(batch.clone()).unwrap());
        assert!(!s.commit(batch).unwrap());
        assert_eq!(s.count(&CountKey::new("X", R, at(2, 10))), 3);
        assert!(s.tick_committed(at(2, 11)));
    }

    #[test]
    fn journal_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let s = FileStore::open(dir.path()).unwrap();
            s.commit(Batch {
                tick: Some(at(2, 11)),
                counts: vec![(CountKey::new("X", R, at(2, 10)), 4)],
                messages: vec![(CountKey::new("X", R, at(2, 10)), msg("a", at(2, 10)))],
            })
            .unwrap();
        }
        // Simulate a crash halfway through the next write.
        let mut f = OpenOptions::new()
            .append(true)
            .open(dir.path().join("journal.jsonl"))
            .unwrap();
        f.write_all(b"{\"tick\":null,\"counts\":[[").unwrap();
        drop(f);

        let s = FileStore::open(dir.path()).unwrap();
        assert_eq!(s.count(&CountKey::new("X", R, at(2, 10))), 4);
        assert!(s.tick_committed(at(2, 11)));
        assert_eq!(s.messages("X", R, at(2, 10), at(2, 11), 5).unwrap()[0].id, "a");

        fs::write(dir.path().join("VERSION"), "other 9\n").unwrap();
        assert!(FileStore::open(dir.path()).is_err());
    }

    #[test]
    fn archive_retention() {
        let s = FileStore::in_memory();
        s.record(&CountKey::new("X", R, at(1, 0)), 1, Some(&msg("old", at(1, 0))))
            .unwrap();
        let later = at(1, 0) + Duration::days(40);
        s.record(&CountKey::new("X", R, later), 1, Some(&msg("new", later)))
            .unwrap();
        let kept = s.messages("X", R, at(1, 0), later + Duration::hours(1), 10).unwrap();
        assert_eq!(kept.len(), 1);
        // Counts are never pruned.
        assert_eq!(s.count(&CountKey::new("X", R, at(1, 0))), 1);
    }

    #[test]
    fn csv_export() {
        let s = FileStore::in_memory();
        s.record(&CountKey::new("X", R, at(2, 1)), 7, None).unwrap();
        let mut out = Vec::new();
        s.export_csv("X", R, at(2, 0), at(2, 3), &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "hour_iso,count\n2011-03-02T00:00:00Z,0\n2011-03-02T01:00:00Z,7\n2011-03-02T02:00:00Z,0\n"
        );
    }
}
