//! Naive Bayes over binary bag-of-words vectors.
//!
//! A model scores a document by `log P(c) + Σ log P(f_i | c)`; the evidence
//! term `P(d)` is the same for both classes and is never computed. Two event
//! models are supported: Bernoulli (absent features contribute
//! `log P(f_i = 0 | c)`, the default) and multinomial over the binary
//! presence counts.

use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::BinaryClassifier;
use crate::error::{Error, Result};
use crate::syndrome::Label;
use crate::text::BinaryVector;

const HEADER: &str = "nb-model v1";

const POS: usize = 0;
const NEG: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventModel {
    #[default]
    Bernoulli,
    Multinomial,
}

impl EventModel {
    fn as_str(self) -> &'static str {
        match self {
            EventModel::Bernoulli => "bernoulli",
            EventModel::Multinomial => "multinomial",
        }
    }
}

impl FromStr for EventModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(EventModel::Bernoulli),
            "multinomial" => Ok(EventModel::Multinomial),
            other => Err(Error::InvalidArgument(format!("unknown event model `{other}`"))),
        }
    }
}

/// Training options for [`NbModel::train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbParams {
    pub alpha: f64,
    pub event_model: EventModel,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams {
            alpha: 1.0,
            event_model: EventModel::Bernoulli,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    event_model: EventModel,
    alpha: f64,
    vocab_size: usize,
    /// `[positive, negative]`.
    class_log_priors: [f64; 2],
    /// `log P(f_i = 1 | c)` (Bernoulli) or `log P(w_i | c)` (multinomial).
    log_present: [Vec<f64>; 2],
    /// `log P(f_i = 0 | c)`; empty for the multinomial model.
    log_absent: [Vec<f64>; 2],
    absent_totals: [f64; 2],
}

/// Unnormalised log posteriors of one document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPosterior {
    pub positive: f64,
    pub negative: f64,
}

impl LogPosterior {
    pub fn margin(&self) -> f64 {
        self.positive - self.negative
    }

    /// Highest-scoring class; an exact tie goes to negative.
    pub fn label(&self) -> Label {
        Label::from_bool(self.positive > self.negative)
    }
}

fn class_index(label: Label) -> usize {
    match label {
        Label::Positive => POS,
        Label::Negative => NEG,
    }
}

impl NbModel {
    pub fn train(examples: &[(BinaryVector, Label)], params: NbParams) -> Result<Self> {
        if !(params.alpha > 0.0 && params.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothing alpha must be positive, got {}",
                params.alpha
            )));
        }
        let first = examples
            .first()
            .ok_or_else(|| Error::UnusableTrainingSet("no training examples".into()))?;
        let m = first.0.dimension();

        let mut docs = [0usize; 2];
        let mut feature_docs = [vec![0usize; m], vec![0usize; m]];
        for (x, label) in examples {
            x.check_dimension(m)?;
            let c = class_index(*label);
            docs[c] += 1;
            for i in x.active() {
                feature_docs[c][i] += 1;
            }
        }
        if docs[POS] == 0 || docs[NEG] == 0 {
            return Err(Error::UnusableTrainingSet(
                "both positive and negative examples are required".into(),
            ));
        }

        let n = examples.len() as f64;
        let class_log_priors = [(docs[POS] as f64 / n).ln(), (docs[NEG] as f64 / n).ln()];
        let alpha = params.alpha;

        let (log_present, log_absent) = match params.event_model {
            EventModel::Bernoulli => {
                let present = |c: usize| -> Vec<f64> {
                    let denom = docs[c] as f64 + 2.0 * alpha;
                    feature_docs[c]
                        .iter()
                        .map(|&k| ((k as f64 + alpha) / denom).ln())
                        .collect()
                };
                let absent = |c: usize| -> Vec<f64> {
                    let denom = docs[c] as f64 + 2.0 * alpha;
                    feature_docs[c]
                        .iter()
                        .map(|&k| (((docs[c] - k) as f64 + alpha) / denom).ln())
                        .collect()
                };
                ([present(POS), present(NEG)], [absent(POS), absent(NEG)])
            }
            EventModel::Multinomial => {
                let present = |c: usize| -> Vec<f64> {
                    let total: usize = feature_docs[c].iter().sum();
                    let denom = total as f64 + alpha * m as f64;
                    feature_docs[c]
                        .iter()
                        .map(|&k| ((k as f64 + alpha) / denom).ln())
                        .collect()
                };
                ([present(POS), present(NEG)], [Vec::new(), Vec::new()])
            }
        };

        Ok(Self::assemble(
            params.event_model,
            alpha,
            m,
            class_log_priors,
            log_present,
            log_absent,
        ))
    }

    fn assemble(
        event_model: EventModel,
        alpha: f64,
        vocab_size: usize,
        class_log_priors: [f64; 2],
        log_present: [Vec<f64>; 2],
        log_absent: [Vec<f64>; 2],
    ) -> Self {
        let absent_totals = [log_absent[POS].iter().sum(), log_absent[NEG].iter().sum()];
        NbModel {
            event_model,
            alpha,
            vocab_size,
            class_log_priors,
            log_present,
            log_absent,
            absent_totals,
        }
    }

    pub fn event_model(&self) -> EventModel {
        self.event_model
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn log_prior(&self, label: Label) -> f64 {
        self.class_log_priors[class_index(label)]
    }

    /// `log P(f_i = 1 | c)` under the Bernoulli model, `log P(w_i | c)` under
    /// the multinomial one.
    pub fn log_likelihood_present(&self, feature: usize, label: Label) -> f64 {
        self.log_present[class_index(label)][feature]
    }

    /// `log P(f_i = 0 | c)`; `None` for the multinomial model.
    pub fn log_likelihood_absent(&self, feature: usize, label: Label) -> Option<f64> {
        self.log_absent[class_index(label)].get(feature).copied()
    }

    pub fn log_posterior(&self, x: &BinaryVector) -> Result<LogPosterior> {
        x.check_dimension(self.vocab_size)?;
        let score = |c: usize| -> f64 {
            let mut s = self.class_log_priors[c];
            match self.event_model {
                EventModel::Bernoulli => {
                    // Start from "everything absent" and swap in the present terms.
                    s += self.absent_totals[c];
                    for i in x.active() {
                        s += self.log_present[c][i] - self.log_absent[c][i];
                    }
                }
                EventModel::Multinomial => {
                    for i in x.active() {
                        s += self.log_present[c][i];
                    }
                }
            }
            s
        };
        Ok(LogPosterior {
            positive: score(POS),
            negative: score(NEG),
        })
    }

    pub fn classify(&self, x: &BinaryVector) -> Result<Label> {
        Ok(self.log_posterior(x)?.label())
    }

    /// Writes the line-oriented model file. Floats use Rust's shortest
    /// round-trip representation, so reading back is bit-exact.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HEADER}")?;
        writeln!(out, "event {}", self.event_model.as_str())?;
        writeln!(out, "alpha {:?}", self.alpha)?;
        writeln!(out, "vocab_size {}", self.vocab_size)?;
        writeln!(
            out,
            "priors {:?} {:?}",
            self.class_log_priors[POS], self.class_log_priors[NEG]
        )?;
        for i in 0..self.vocab_size {
            write!(out, "{i} {:?} {:?}", self.log_present[POS][i], self.log_present[NEG][i])?;
            if self.event_model == EventModel::Bernoulli {
                write!(out, " {:?} {:?}", self.log_absent[POS][i], self.log_absent[NEG][i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().map(|(n, l)| (n + 1, l));
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((n, l)) => Ok((n, l?)),
                None => Err(Error::parse(0, "unexpected end of model file")),
            }
        };

        let (n, header) = next()?;
        if header.trim() != HEADER {
            return Err(Error::parse(n, format!("expected `{HEADER}`, found {header:?}")));
        }
        let (n, line) = next()?;
        let event_model: EventModel = keyed(n, &line, "event")?.parse()?;
        let (n, line) = next()?;
        let alpha = parse_f64(n, keyed(n, &line, "alpha")?)?;
        let (n, line) = next()?;
        let vocab_size: usize = keyed(n, &line, "vocab_size")?
            .parse()
            .map_err(|e| Error::parse(n, format!("{e}")))?;
        let (n, line) = next()?;
        let priors: Vec<f64> = keyed(n, &line, "priors")?
            .split_whitespace()
            .map(|v| parse_f64(n, v))
            .collect::<Result<_>>()?;
        if priors.len() != 2 {
            return Err(Error::parse(n, "expected two priors"));
        }

        let width = match event_model {
            EventModel::Bernoulli => 4,
            EventModel::Multinomial => 2,
        };
        let mut present = [Vec::with_capacity(vocab_size), Vec::with_capacity(vocab_size)];
        let mut absent = [Vec::new(), Vec::new()];
        for i in 0..vocab_size {
            let (n, line) = next()?;
            let mut fields = line.split_whitespace();
            let idx: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse(n, "missing feature index"))?;
            if idx != i {
                return Err(Error::parse(n, format!("expected feature {i}, found {idx}")));
            }
            let values: Vec<f64> = fields.map(|v| parse_f64(n, v)).collect::<Result<_>>()?;
            if values.len() != width {
                return Err(Error::parse(n, format!("expected {width} values")));
            }
            present[POS].push(values[0]);
            present[NEG].push(values[1]);
            if width == 4 {
                absent[POS].push(values[2]);
                absent[NEG].push(values[3]);
            }
        }
        Ok(Self::assemble(
            event_model,
            alpha,
            vocab_size,
            [priors[0], priors[1]],
            present,
            absent,
        ))
    }
}

fn keyed<'a>(line_no: usize, line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(str::trim)
        .ok_or_else(|| Error::parse(line_no, format!("expected `{key} ...`, found {line:?}")))
}

fn parse_f64(line_no: usize, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|e| Error::parse(line_no, format!("bad number {value:?}: {e}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line_no, format!("non-finite value {value:?}")));
    }
    Ok(v)
}

impl BinaryClassifier for NbModel {
    fn predict(&self, x: &BinaryVector) -> Result<Label> {
        self.classify(x)
    }
}
