//! Two-stage message filter.
//!
//! Stages run in a fixed order and the first one that rejects a message
//! decides its status:
//!
//! 1. structural: re-tweets and messages carrying external links
//! 2. per-user daily rate limit
//! 3. syndromic keyword prefilter
//! 4. block list of stop words and phrases
//! 5. per-syndrome ML classification

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::classifier::TextClassifier;
use crate::error::{Error, Result};
use crate::geo::LatLon;
use crate::syndrome::Syndrome;
use crate::text::{tokenize, Token};

pub const DEFAULT_DAILY_LIMIT: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub location: Option<LatLon>,
    pub text: String,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default)]
    pub has_external_link: bool,
}

impl Message {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidArgument("message id must not be empty".into()));
        }
        if let Some(loc) = &self.location {
            loc.validate()?;
        }
        Ok(())
    }

    /// Parses one JSON object per line, skipping blank lines.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Message>> {
        let mut out = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let m: Message = serde_json::from_str(&line).map_err(|e| Error::parse(n + 1, e.to_string()))?;
            m.validate().map_err(|e| Error::parse(n + 1, e.to_string()))?;
            out.push(m);
        }
        Ok(out)
    }
}

/// A keyword or stop phrase as a token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phrase(Vec<Token>);

impl Phrase {
    pub fn parse(text: &str) -> Option<Self> {
        let tokens = tokenize(text);
        (!tokens.is_empty()).then_some(Phrase(tokens))
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    /// Whole-token, contiguous match.
    pub fn occurs_in(&self, tokens: &[Token]) -> bool {
        tokens.windows(self.0.len()).any(|w| w == self.0.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyndromeLexicon {
    keywords: [Vec<Phrase>; 6],
}

impl SyndromeLexicon {
    pub fn new(entries: impl IntoIterator<Item = (Syndrome, Phrase)>) -> Result<Self> {
        let mut keywords: [Vec<Phrase>; 6] = Default::default();
        for (syn, phrase) in entries {
            let list = &mut keywords[syn.index()];
            if !list.contains(&phrase) {
                list.push(phrase);
            }
        }
        if let Some(missing) = Syndrome::ALL.iter().find(|s| keywords[s.index()].is_empty()) {
            return Err(Error::InvalidArgument(format!("lexicon has no keywords for {missing}")));
        }
        Ok(SyndromeLexicon { keywords })
    }

    pub fn keywords(&self, syndrome: Syndrome) -> &[Phrase] {
        &self.keywords[syndrome.index()]
    }

    /// `syndrome<TAB>keyword-or-phrase` per line; `#` comments allowed.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (syn, kw) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(n + 1, "expected `syndrome<TAB>keyword`"))?;
            let syn: Syndrome = syn.parse().map_err(|e: Error| Error::parse(n + 1, e.to_string()))?;
            let phrase = Phrase::parse(kw).ok_or_else(|| Error::parse(n + 1, "empty keyword"))?;
            entries.push((syn, phrase));
        }
        Self::new(entries)
    }

    pub fn candidates(&self, tokens: &[Token]) -> BTreeSet<Syndrome> {
        Syndrome::ALL
            .into_iter()
            .filter(|s| self.keywords(*s).iter().any(|p| p.occurs_in(tokens)))
            .collect()
    }
}

/// Stop words and phrases that veto a message.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockList {
    entries: Vec<Phrase>,
}

impl BlockList {
    pub fn new(entries: Vec<Phrase>) -> Self {
        BlockList { entries }
    }

    pub fn entries(&self) -> &[Phrase] {
        &self.entries
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut entries = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            if let Some(p) = Phrase::parse(&line) {
                entries.push(p);
            }
        }
        Ok(BlockList { entries })
    }

    pub fn blocks(&self, tokens: &[Token]) -> bool {
        self.entries.iter().any(|p| p.occurs_in(tokens))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    DroppedRetweet,
    DroppedLink,
    DroppedRateLimit,
    DroppedNoKeyword,
    DroppedBlocklist,
    DroppedMlNegative,
    Accepted,
}

impl Status {
    pub const ALL: [Status; 7] = [
        Status::DroppedRetweet,
        Status::DroppedLink,
        Status::DroppedRateLimit,
        Status::DroppedNoKeyword,
        Status::DroppedBlocklist,
        Status::DroppedMlNegative,
        Status::Accepted,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub message_id: String,
    pub status: Status,
    pub matched_syndromes: BTreeSet<Syndrome>,
}

pub fn structural_filter(m: &Message) -> Option<Status> {
    if m.is_retweet {
        Some(Status::DroppedRetweet)
    } else if m.has_external_link {
        Some(Status::DroppedLink)
    } else {
        None
    }
}

/// Per-user, per-UTC-day message counter.
#[derive(Debug)]
pub struct RateLimiter {
    limit: u32,
    counters: Mutex<HashMap<(String, NaiveDate), u32>>,
}

impl RateLimiter {
    pub fn new(limit: u32) -> Self {
        RateLimiter {
            limit,
            counters: Mutex::new(HashMap::new()),
        }
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }

    /// Admits the message and bumps the counter if the user is still under
    /// the limit for the message's UTC day.
    pub fn admit(&self, user_id: &str, at: DateTime<Utc>) -> bool {
        let key = (user_id.to_owned(), at.date_naive());
        let mut counters = self.counters.lock().unwrap_or_else(|e| e.into_inner());
        let count = counters.entry(key).or_insert(0);
        if *count < self.limit {
            *count += 1;
            true
        } else {
            false
        }
    }

    /// Drops counters for days before `day`.
    pub fn forget_before(&self, day: NaiveDate) {
        let mut counters = self.counters.lock().unwrap_or_else(|e| e.into_inner());
        counters.retain(|(_, d), _| *d >= day);
    }
}

impl Default for RateLimiter {
    fn default() -> Self {
        Self::new(DEFAULT_DAILY_LIMIT)
    }
}

/// Trained classifier per syndrome.
#[derive(Debug, Clone, Default)]
pub struct ClassifierSet {
    models: [Option<Arc<TextClassifier>>; 6],
}

impl ClassifierSet {
    pub fn insert(&mut self, syndrome: Syndrome, clf: TextClassifier) {
        self.models[syndrome.index()] = Some(Arc::new(clf));
    }

    pub fn get(&self, syndrome: Syndrome) -> Option<&TextClassifier> {
        self.models[syndrome.index()].as_deref()
    }

    pub fn is_complete(&self) -> bool {
        self.models.iter().all(Option::is_some)
    }
}

/// Runs each candidate syndrome's classifier and keeps the positives.
pub fn classify_message(
    tokens: &[Token],
    candidates: &BTreeSet<Syndrome>,
    models: &ClassifierSet,
) -> Result<BTreeSet<Syndrome>> {
    let mut confirmed = BTreeSet::new();
    for &syn in candidates {
        let clf = models.get(syn).ok_or_else(|| Error::MissingModel(syn.to_string()))?;
        if clf.predict_tokens(tokens)?.is_positive() {
            confirmed.insert(syn);
        }
    }
    Ok(confirmed)
}

/// Running totals of outcomes, used to report the stage-two removal rate.
#[derive(Debug, Default)]
pub struct PipelineStats {
    counts: [AtomicU64; 7],
}

impl PipelineStats {
    fn bump(&self, status: Status) {
        let i = Status::ALL.iter().position(|s| *s == status).unwrap_or(0);
        self.counts[i].fetch_add(1, Ordering::Relaxed);
    }

    pub fn count(&self, status: Status) -> u64 {
        let i = Status::ALL.iter().position(|s| *s == status).unwrap_or(0);
        self.counts[i].load(Ordering::Relaxed)
    }

    /// Fraction of ML-evaluated messages that the classifiers rejected.
    pub fn ml_removal_rate(&self) -> Option<f64> {
        let rejected = self.count(Status::DroppedMlNegative);
        let evaluated = rejected + self.count(Status::Accepted);
        (evaluated > 0).then(|| rejected as f64 / evaluated as f64)
    }
}

pub struct Pipeline {
    pub lexicon: SyndromeLexicon,
    pub blocklist: BlockList,
    pub models: ClassifierSet,
    pub rate_limiter: RateLimiter,
    pub stats: PipelineStats,
}

impl Pipeline {
    pub fn new(lexicon: SyndromeLexicon, blocklist: BlockList, models: ClassifierSet) -> Self {
        Pipeline {
            lexicon,
            blocklist,
            models,
            rate_limiter: RateLimiter::default(),
            stats: PipelineStats::default(),
        }
    }

    pub fn with_daily_limit(mut self, limit: u32) -> Self {
        self.rate_limiter = RateLimiter::new(limit);
        self
    }

    pub fn process(&self, m: &Message) -> Result<PipelineOutcome> {
        let outcome = |status, matched| PipelineOutcome {
            message_id: m.id.clone(),
            status,
            matched_syndromes: matched,
        };
        let result = (|| {
            if let Some(status) = structural_filter(m) {
                return Ok(outcome(status, BTreeSet::new()));
            }
            if !self.rate_limiter.admit(&m.user_id, m.timestamp) {
                return Ok(outcome(Status::DroppedRateLimit, BTreeSet::new()));
            }
            let tokens = tokenize(&m.text);
            let candidates = self.lexicon.candidates(&tokens);
            if candidates.is_empty() {
                return Ok(outcome(Status::DroppedNoKeyword, BTreeSet::new()));
            }
            if self.blocklist.blocks(&tokens) {
                return Ok(outcome(Status::DroppedBlocklist, BTreeSet::new()));
            }
            let confirmed = classify_message(&tokens, &candidates, &self.models)?;
            if confirmed.is_empty() {
                Ok(outcome(Status::DroppedMlNegative, BTreeSet::new()))
            } else {
                Ok(outcome(Status::Accepted, confirmed))
            }
        })();
        if let Ok(o) = &result {
            self.stats.bump(o.status);
        }
        result
    }
}
