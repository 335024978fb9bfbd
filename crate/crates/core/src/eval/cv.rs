use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{BinaryClassifier, Trainer};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::syndrome::Label;
use crate::text::{Token, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Negative, Label::Positive) => self.fp += 1,
            (Label::Positive, Label::Negative) => self.fn_ += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn prf(&self) -> Prf {
        prf(self.tp, self.fp, self.fn_)
    }
}

impl std::ops::AddAssign for Confusion {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

/// Precision, recall and F1 as percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any of the three had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

pub fn prf(tp: u64, fp: u64, fn_: u64) -> Prf {
    let ratio = |num: u64, den: u64| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f1 = match (p, r) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Prf {
        precision: p.unwrap_or(0.0),
        recall: r.unwrap_or(0.0),
        f1: f1.unwrap_or(0.0),
        degenerate: p.is_none() || r.is_none() || f1.is_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub confusion: Confusion,
    pub scores: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: Vec<FoldResult>,
    /// Summed over folds.
    pub confusion: Confusion,
    /// Computed from the summed confusion counts.
    pub micro: Prf,
    /// Unweighted mean of the per-fold scores.
    pub fold_mean: Prf,
}

/// Fold id for every example. Positives and negatives are shuffled
/// separately, concatenated, and dealt round-robin, so each fold receives
/// a near-equal share of each class.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_positive()).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_positive()).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0; labels.len()];
    for (slot, idx) in pos.into_iter().chain(neg).enumerate() {
        fold[idx] = slot % k;
    }
    fold
}

pub fn kfold_cv<T: Trainer>(docs: &[(Vec<Token>, Label)], k: usize, trainer: &T, seed: u64) -> Result<EvalReport> {
    kfold_cv_with(docs, k, trainer, seed, Execution::default())
}

/// Stratified k-fold cross-validation. The vocabulary is rebuilt from each
/// training split so held-out words never leak into the features.
pub fn kfold_cv_with<T: Trainer>(
    docs: &[(Vec<Token>, Label)],
    k: usize,
    trainer: &T,
    seed: u64,
    exec: Execution,
) -> Result<EvalReport> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if docs.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} documents cannot fill {k} folds",
            docs.len()
        )));
    }
    let positives = docs.iter().filter(|(_, l)| l.is_positive()).count();
    let negatives = docs.len() - positives;
    if positives < 2 || negatives < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least two examples of each class ({positives} positive, {negatives} negative)"
        )));
    }

    let labels: Vec<Label> = docs.iter().map(|(_, l)| *l).collect();
    let fold_of = stratified_folds(&labels, k, seed);

    let results = exec::map_range(exec, k, |fold| -> Result<FoldResult> {
        let train: Vec<&(Vec<Token>, Label)> = docs
            .iter()
            .zip(&fold_of)
            .filter(|(_, f)| **f != fold)
            .map(|(d, _)| d)
            .collect();
        let vocab = Vocabulary::build(train.iter().map(|(tokens, _)| tokens))?;
        let examples: Vec<_> = train
            .iter()
            .map(|(tokens, label)| (vocab.vectorize(tokens), *label))
            .collect();
        let model = trainer.train(&examples)?;
        let mut confusion = Confusion::default();
        for ((tokens, truth), _) in docs.iter().zip(&fold_of).filter(|(_, f)| **f == fold) {
            confusion.record(*truth, model.predict(&vocab.vectorize(tokens))?);
        }
        Ok(FoldResult {
            confusion,
            scores: confusion.prf(),
        })
    });
    let folds = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut confusion = Confusion::default();
    for f in &folds {
        confusion += f.confusion;
    }
    let mean = |pick: fn(&Prf) -> f64| folds.iter().map(|f| pick(&f.scores)).sum::<f64>() / k as f64;
    Ok(EvalReport {
        micro: confusion.prf(),
        fold_mean: Prf {
            precision: mean(|p| p.precision),
            recall: mean(|p| p.recall),
            f1: mean(|p| p.f1),
            degenerate: folds.iter().any(|f| f.scores.degenerate),
        },
        confusion,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::NbTrainer;
    use crate::text::tokenize;
    use proptest::prelude::*;

    #[test]
    fn prf_examples() {
        let s = prf(8, 2, 2);
        assert_eq!((s.precision, s.recall, s.f1, s.degenerate), (80.0, 80.0, 80.0, false));
        let z = prf(0, 0, 0);
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
        assert!(z.degenerate);
        let no_hits = prf(0, 3, 4);
        assert_eq!(no_hits.f1, 0.0);
        assert!(no_hits.degenerate);
    }

    fn separable(n_each: usize) -> Vec<(Vec<Token>, Label)> {
        let mut docs = Vec::new();
        for i in 0..n_each {
            docs.push((tokenize(&format!("alpha{} beta{}", i % 7, i % 5)), Label::Positive));
            docs.push((tokenize(&format!("gamma{} delta{}", i % 7, i % 5)), Label::Negative));
        }
        docs
    }

    #[test]
    fn separable_corpus_is_perfect() {
        let report = kfold_cv(&separable(40), 10, &NbTrainer::default(), 7).unwrap();
        assert_eq!(report.micro.f1, 100.0);
        assert_eq!(report.confusion.total(), 80);
        assert_eq!(report.folds.len(), 10);
    }

    #[test]
    fn leave_one_out() {
        let docs = separable(5);
        let report = kfold_cv(&docs, docs.len(), &NbTrainer::default(), 1).unwrap();
        assert_eq!(report.folds.len(), 10);
        assert!(report.folds.iter().all(|f| f.confusion.total() == 1));
        let folds = stratified_folds(&docs.iter().map(|d| d.1).collect::<Vec<_>>(), 10, 1);
        let mut sorted = folds.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn insufficient_data() {
        let docs = separable(3);
        assert!(matches!(
            kfold_cv(&docs, 10, &NbTrainer::default(), 1),
            Err(Error::InsufficientData(_))
        ));
        let one_class: Vec<_> = separable(10).into_iter().filter(|d| d.1.is_positive()).collect();
        assert!(kfold_cv(&one_class, 2, &NbTrainer::default(), 1).is_err());
        assert!(kfold_cv(&separable(10), 1, &NbTrainer::default(), 1).is_err());
    }

    #[test]
    fn seeded_and_execution_independent() {
        let docs = separable(30);
        let a = kfold_cv_with(&docs, 5, &NbTrainer::default(), 3, Execution::Sequential).unwrap();
        let b = kfold_cv_with(&docs, 5, &NbTrainer::default(), 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(
            labels in proptest::collection::vec(any::<bool>(), 10..200),
            k in 2usize..12,
            seed in any::<u64>(),
        ) {
            let labels: Vec<Label> = labels.into_iter().map(Label::from_bool).collect();
            let folds = stratified_folds(&labels, k, seed);
            prop_assert_eq!(folds.len(), labels.len());
            prop_assert!(folds.iter().all(|f| *f < k));
            let pos = labels.iter().filter(|l| l.is_positive()).count();
            for f in 0..k {
                let in_fold = (0..labels.len()).filter(|&i| folds[i] == f && labels[i].is_positive()).count();
                prop_assert!(in_fold * k + k >= pos && in_fold * k <= pos + k);
            }
        }

        #[test]
        fn f1_between_p_and_r(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
            let s = prf(tp, fp, fn_);
            if !s.degenerate {
                let (lo, hi) = (s.precision.min(s.recall), s.precision.max(s.recall));
                prop_assert!(lo - 1e-9 <= s.f1 && s.f1 <= hi + 1e-9);
            }
        }
    }
}
