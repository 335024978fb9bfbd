//! EARS C2 aberration scoring, alert banding and trend direction.
//!
//! `S_t = max(0, (C_t − (μ_t + kσ_t)) / σ_t)` where μ_t and σ_t are the mean
//! and sample standard deviation of a trailing baseline window. A σ below
//! `sigma_floor` is replaced by the floor so quiet series stay scorable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tunables for C2 scoring and presentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AberrationConfig {
    pub k: f64,
    pub history_days: usize,
    pub sigma_floor: f64,
    /// Ascending lower edges of bands 1..=4.
    pub band_thresholds: [f64; 4],
    /// Compare the current hour against the same hour of previous days
    /// rather than against daily totals.
    pub stratify_by_hour: bool,
    /// Minimum score change that counts as a trend.
    pub trend_threshold: f64,
}

impl Default for AberrationConfig {
    fn default() -> Self {
        AberrationConfig {
            k: 1.0,
            history_days: 14,
            sigma_floor: 0.5,
            band_thresholds: [1.0, 2.0, 3.0, 4.0],
            stratify_by_hour: true,
            trend_threshold: 0.25,
        }
    }
}

impl AberrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidArgument(format!("k must be >= 0, got {}", self.k)));
        }
        if self.history_days < 2 {
            return Err(Error::InvalidArgument("history_days must be at least 2".into()));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::InvalidArgument("sigma_floor must be positive".into()));
        }
        if !self.band_thresholds.windows(2).all(|w| w[0] < w[1]) || self.band_thresholds[0] <= 0.0 {
            return Err(Error::InvalidArgument(
                "band thresholds must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Trailing history of counts, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineWindow {
    counts: Vec<f64>,
    mean: f64,
    std_dev: f64,
}

impl BaselineWindow {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InsufficientData("empty baseline history".into()));
        }
        if counts.len() < 2 {
            return Err(Error::InsufficientData(
                "baseline history needs at least two periods".into(),
            ));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument("baseline counts must be finite and >= 0".into()));
        }
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(BaselineWindow {
            counts,
            mean,
            std_dev: var.sqrt(),
        })
    }

    pub fn from_counts<I: IntoIterator<Item = u64>>(counts: I) -> Result<Self> {
        Self::new(counts.into_iter().map(|c| c as f64).collect())
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample (n − 1) standard deviation.
    pub fn std_dev(&self) -> f64 {
        self.std_dev
    }
}

pub fn c2_score(history: &BaselineWindow, current: f64, k: f64, sigma_floor: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("k must be >= 0, got {k}")));
    }
    if !(sigma_floor > 0.0) {
        return Err(Error::InvalidArgument("sigma_floor must be positive".into()));
    }
    let sigma = if history.std_dev < sigma_floor {
        sigma_floor
    } else {
        history.std_dev
    };
    Ok(((current - (history.mean + k * sigma)) / sigma).max(0.0))
}

/// Alert band 0..=4 for a C2 score.
pub fn band(score: f64, thresholds: &[f64; 4]) -> Result<u8> {
    if !(score >= 0.0) {
        return Err(Error::InvalidArgument(format!("score must be >= 0, got {score}")));
    }
    Ok(thresholds.iter().filter(|&&t| score >= t).count() as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Up,
    Down,
    Sideways,
}

pub fn trend(previous: Option<f64>, latest: f64, threshold: f64) -> Trend {
    match previous {
        Some(prev) if latest - prev > threshold => Trend::Up,
        Some(prev) if latest - prev < -threshold => Trend::Down,
        _ => Trend::Sideways,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertState {
    pub score: f64,
    pub band: u8,
    pub trend: Trend,
    pub computed_at: chrono::DateTime<chrono::Utc>,
}
