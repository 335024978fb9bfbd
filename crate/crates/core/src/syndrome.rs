use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The six syndrome classes, in the fixed order used by every report and API
/// response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Syndrome {
    Respiratory,
    Gastrointestinal,
    Neurological,
    Rash,
    Hemorrhagic,
    Constitutional,
}

impl Syndrome {
    pub const ALL: [Syndrome; 6] = [
        Syndrome::Respiratory,
        Syndrome::Gastrointestinal,
        Syndrome::Neurological,
        Syndrome::Rash,
        Syndrome::Hemorrhagic,
        Syndrome::Constitutional,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Syndrome::Respiratory => "respiratory",
            Syndrome::Gastrointestinal => "gastrointestinal",
            Syndrome::Neurological => "neurological",
            Syndrome::Rash => "rash",
            Syndrome::Hemorrhagic => "hemorrhagic",
            Syndrome::Constitutional => "constitutional",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Syndrome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Syndrome::ALL
            .into_iter()
            .find(|syn| syn.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown syndrome `{s}`")))
    }
}

/// Binary class label of a per-syndrome classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// `+1.0` / `-1.0` as used by the SVM dual.
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}
