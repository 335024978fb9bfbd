//! Message sources polled by the scheduler.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono::{DateTime, Utc};
use syndromic_core::pipeline::Message;
use syndromic_core::{Error, Result};

/// Yields the messages posted in a half-open time window. Implementations
/// return them in non-decreasing timestamp order, and asking for the same
/// window twice returns the same messages.
pub trait SourceAdapter: Send + Sync {
    fn drain(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Vec<Message>>;

    /// Earliest and latest timestamp, when the source is finite.
    fn span(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        None
    }
}

/// Replays a JSON-lines message file (the pipeline input format).
#[derive(Debug, Clone, Default)]
pub struct ReplaySource {
    messages: Vec<Message>,
}

impl ReplaySource {
    /// Fails if timestamps ever decrease.
    pub fn new(messages: Vec<Message>) -> Result<Self> {
        if let Some(i) = messages.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::parse(
                i + 2,
                format!("timestamp goes backwards at message `{}`", messages[i + 1].id),
            ));
        }
        Ok(ReplaySource { messages })
    }

    pub fn open(path: &Path) -> Result<Self> {
        Self::new(Message::read_jsonl(BufReader::new(File::open(path)?))?)
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

impl SourceAdapter for ReplaySource {
    fn drain(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Vec<Message>> {
        let lo = self.messages.partition_point(|m| m.timestamp < from);
        let hi = self.messages.partition_point(|m| m.timestamp < to);
        Ok(self.messages[lo..hi.max(lo)].to_vec())
    }

    fn span(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        Some((self.messages.first()?.timestamp, self.messages.last()?.timestamp))
    }
}
