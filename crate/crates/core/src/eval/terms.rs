use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::syndrome::Label;
use crate::text::{Token, Vocabulary};

/// Association measure between term presence and the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermScore {
    /// Expected mutual information over the 2×2 presence/class table, bits.
    #[default]
    MutualInformation,
    /// Pointwise mutual information of (present, positive), bits.
    Pmi,
}

/// Add-½ smoothed 2×2 table → score.
fn score_table(n: [[f64; 2]; 2], measure: TermScore) -> f64 {
    // n[x][c]: x = present?, c = positive?
    let total: f64 = n.iter().flatten().sum::<f64>() + 2.0;
    let p = |x: usize, c: usize| (n[x][c] + 0.5) / total;
    let px = |x: usize| p(x, 0) + p(x, 1);
    let pc = |c: usize| p(0, c) + p(1, c);
    match measure {
        TermScore::MutualInformation => {
            let mut mi = 0.0;
            for x in 0..2 {
                for c in 0..2 {
                    let joint = p(x, c);
                    mi += joint * (joint / (px(x) * pc(c))).log2();
                }
            }
            mi
        }
        TermScore::Pmi => (p(1, 1) / (px(1) * pc(1))).log2(),
    }
}

pub fn mi_rank(docs: &[(Vec<Token>, Label)], top_n: usize, measure: TermScore) -> Result<Vec<(String, f64)>> {
    mi_rank_with(docs, top_n, measure, Execution::default())
}

/// Top `top_n` terms by descending score; ties are broken alphabetically.
pub fn mi_rank_with(
    docs: &[(Vec<Token>, Label)],
    top_n: usize,
    measure: TermScore,
    exec: Execution,
) -> Result<Vec<(String, f64)>> {
    let vocab = Vocabulary::build(docs.iter().map(|(t, _)| t))?;
    let positives = docs.iter().filter(|(_, l)| l.is_positive()).count() as f64;
    let negatives = docs.len() as f64 - positives;

    let mut present: HashMap<usize, [f64; 2]> = HashMap::new();
    for (tokens, label) in docs {
        let x = vocab.vectorize(tokens);
        for i in x.active() {
            present.entry(i).or_default()[usize::from(label.is_positive())] += 1.0;
        }
    }

    let terms = vocab.terms();
    let mut scored = exec::map_range(exec, terms.len(), |i| {
        let [neg1, pos1] = present.get(&i).copied().unwrap_or_default();
        let table = [[negatives - neg1, positives - pos1], [neg1, pos1]];
        (terms[i].as_str().to_owned(), score_table(table, measure))
    });
    if scored.iter().any(|(_, s)| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite term score".into()));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(top_n);
    Ok(scored)
}
