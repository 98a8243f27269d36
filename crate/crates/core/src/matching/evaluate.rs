use serde::{Deserialize, Serialize};

use super::dataset::MatcherDataset;
use super::Matcher;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupScores {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub f1: f64,
}

/// Multi-label F1 of a matcher, per group in (physical, social, event) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherScores {
    pub physical: GroupScores,
    pub social: GroupScores,
    pub event: GroupScores,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

/// F1 from confusion counts; 1.0 when there is nothing to predict and nothing
/// was predicted.
pub fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

pub fn evaluate_matcher(matcher: &Matcher<'_>, dataset: &MatcherDataset) -> MatcherScores {
    let mut counts = [(0usize, 0usize, 0usize); 3];
    for ex in dataset.iter() {
        let pred = matcher.predict_labels(&ex.head).as_array();
        let gold = ex.labels.as_array();
        for k in 0..3 {
            match (pred[k], gold[k]) {
                (true, true) => counts[k].0 += 1,
                (true, false) => counts[k].1 += 1,
                (false, true) => counts[k].2 += 1,
                (false, false) => {}
            }
        }
    }
    let per: Vec<GroupScores> = counts
        .iter()
        .map(|&(tp, fp, fn_)| GroupScores { tp, fp, fn_, f1: f1(tp, fp, fn_) })
        .collect();
    let (tp, fp, fn_) = counts
        .iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    MatcherScores {
        physical: per[0],
        social: per[1],
        event: per[2],
        macro_f1: per.iter().map(|g| g.f1).sum::<f64>() / 3.0,
        micro_f1: f1(tp, fp, fn_),
    }
}
