//! Annotation agreement, consensus corpora, cross-validation and term
//! ranking.

mod agreement;
mod cv;
mod terms;

pub use agreement::{
    best_pair_kappa, cohen_kappa, consensus_corpus, summarize, AnnotatedMessage, Consensus, CorpusSummary, LabeledText,
};
pub use cv::{kfold_cv, kfold_cv_with, prf, stratified_folds, Confusion, EvalReport, FoldResult, Prf};
pub use terms::{mi_rank, mi_rank_with, TermScore};
