use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::syndrome::{Label, Syndrome};

/// One message labelled independently by three annotators for a single
/// syndrome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedMessage {
    pub text: String,
    pub syndrome: Syndrome,
    pub labels: [bool; 3],
}

impl AnnotatedMessage {
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::parse(n + 1, e.to_string()))?);
        }
        Ok(out)
    }

    pub fn unanimous(&self) -> Option<Label> {
        let [a, b, c] = self.labels;
        (a == b && b == c).then(|| Label::from_bool(a))
    }
}

/// Cohen's kappa for two binary annotators.
///
/// When chance agreement is total (`p_e = 1`, both annotators used a single
/// identical class) kappa is 1 if they agree everywhere and 0 otherwise.
pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "label lists differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("label lists are empty".into()));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let a_pos = a.iter().filter(|x| **x).count() as f64 / n;
    let b_pos = b.iter().filter(|x| **x).count() as f64 / n;
    let p_o = agree / n;
    let p_e = a_pos * b_pos + (1.0 - a_pos) * (1.0 - b_pos);
    if p_e == 1.0 {
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Highest of the three pairwise kappas.
pub fn best_pair_kappa(msgs: &[AnnotatedMessage]) -> Result<f64> {
    if msgs.is_empty() {
        return Err(Error::InsufficientData("no annotated messages".into()));
    }
    let column = |i: usize| msgs.iter().map(|m| m.labels[i]).collect::<Vec<_>>();
    let cols = [column(0), column(1), column(2)];
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut best = f64::NEG_INFINITY;
    for (i, j) in pairs {
        best = best.max(cohen_kappa(&cols[i], &cols[j])?);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub syndrome: Syndrome,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Consensus {
    pub corpus: Vec<LabeledText>,
    pub discarded: usize,
}

/// Keeps only messages all three annotators agree on.
pub fn consensus_corpus(msgs: &[AnnotatedMessage]) -> Consensus {
    let mut out = Consensus::default();
    for m in msgs {
        match m.unanimous() {
            Some(label) => out.corpus.push(LabeledText {
                text: m.text.clone(),
                syndrome: m.syndrome,
                label,
            }),
            None => out.discarded += 1,
        }
    }
    out
}

/// Per-syndrome corpus shape: consensus positives/negatives and annotator
/// agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub syndrome: Syndrome,
    pub positives: usize,
    pub negatives: usize,
    /// `positives / negatives`; infinite when there are no negatives.
    pub ratio: f64,
    pub kappa: f64,
    pub discarded: usize,
}

pub fn summarize(syndrome: Syndrome, msgs: &[AnnotatedMessage]) -> Result<CorpusSummary> {
    let own: Vec<AnnotatedMessage> = msgs.iter().filter(|m| m.syndrome == syndrome).cloned().collect();
    let kappa = best_pair_kappa(&own)?;
    let consensus = consensus_corpus(&own);
    let positives = consensus.corpus.iter().filter(|t| t.label.is_positive()).count();
    let negatives = consensus.corpus.len() - positives;
    Ok(CorpusSummary {
        syndrome,
        positives,
        negatives,
        ratio: positives as f64 / negatives as f64,
        kappa,
        discarded: consensus.discarded,
    })
}
