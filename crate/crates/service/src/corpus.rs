//! Corpus files for the offline subcommands.
//!
//! A corpus is JSON lines. Each line is either a labelled text
//! `{"text", "syndrome", "label": "positive"|"negative"}` or a
//! triple-annotated message `{"text", "syndrome", "labels": [bool; 3]}`;
//! annotated messages contribute only when all three labels agree.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::Context;
use syndromic_core::classifier::{ModelSpec, NbTrainer, SvmTrainer};
use syndromic_core::eval::{kfold_cv, AnnotatedMessage, EvalReport, LabeledText};
use syndromic_core::nb::NbParams;
use syndromic_core::svm::{KernelChoice, SolverSettings};
use syndromic_core::text::{tokenize, Token};
use syndromic_core::{Label, Syndrome};

#[derive(Debug, Default)]
pub struct Corpus {
    pub texts: Vec<LabeledText>,
    /// Annotated lines dropped for lack of agreement.
    pub discarded: usize,
}

impl Corpus {
    pub fn read_from<R: BufRead>(input: R) -> anyhow::Result<Self> {
        let mut corpus = Corpus::default();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(&line).with_context(|| format!("line {}", n + 1))?;
            if value.get("labels").is_some() {
                let m: AnnotatedMessage = serde_json::from_value(value).with_context(|| format!("line {}", n + 1))?;
                match m.unanimous() {
                    Some(label) => corpus.texts.push(LabeledText {
                        text: m.text,
                        syndrome: m.syndrome,
                        label,
                    }),
                    None => corpus.discarded += 1,
                }
            } else {
                corpus
                    .texts
                    .push(serde_json::from_value(value).with_context(|| format!("line {}", n + 1))?);
            }
        }
        Ok(corpus)
    }

    pub fn open(path: &Path) -> anyhow::Result<Self> {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read_from(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
    }

    /// Tokenised documents for one syndrome.
    pub fn documents(&self, syndrome: Syndrome) -> Vec<(Vec<Token>, Label)> {
        self.texts
            .iter()
            .filter(|t| t.syndrome == syndrome)
            .map(|t| (tokenize(&t.text), t.label))
            .collect()
    }

    pub fn syndromes(&self) -> Vec<Syndrome> {
        Syndrome::ALL
            .into_iter()
            .filter(|s| self.texts.iter().any(|t| t.syndrome == *s))
            .collect()
    }
}

/// Stratified k-fold cross-validation of a named model configuration.
pub fn evaluate(
    spec: ModelSpec,
    docs: &[(Vec<Token>, Label)],
    folds: usize,
    seed: u64,
    nb: NbParams,
    svm: SolverSettings,
) -> syndromic_core::Result<EvalReport> {
    match spec {
        ModelSpec::NaiveBayes => kfold_cv(docs, folds, &NbTrainer { params: nb }, seed),
        ModelSpec::SvmPolynomial(degree) => kfold_cv(
            docs,
            folds,
            &SvmTrainer {
                kernel: KernelChoice::polynomial(degree),
                settings: svm,
            },
            seed,
        ),
        ModelSpec::SvmRbf => kfold_cv(
            docs,
            folds,
            &SvmTrainer {
                kernel: KernelChoice::rbf(),
                settings: svm,
            },
            seed,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_line_formats() {
        let text = r#"{"text": "sore throat", "syndrome": "respiratory", "label": "positive"}
{"text": "cough syrup ad", "syndrome": "respiratory", "labels": [false, false, false]}

{"text": "maybe flu", "syndrome": "respiratory", "labels": [true, false, true]}
{"text": "rash", "syndrome": "rash", "label": "negative"}
"#;
        let c = Corpus::read_from(text.as_bytes()).unwrap();
        assert_eq!(c.texts.len(), 3);
        assert_eq!(c.discarded, 1);
        assert_eq!(c.documents(Syndrome::Respiratory).len(), 2);
        assert_eq!(c.syndromes(), [Syndrome::Respiratory, Syndrome::Rash]);
        assert!(Corpus::read_from("{\"text\": 1}".as_bytes()).is_err());
    }
}
