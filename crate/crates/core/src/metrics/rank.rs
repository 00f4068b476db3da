use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Candidates of one query ordered by descending score, ties by ascending
/// candidate id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction {
    pub query_id: u64,
    pub candidates: Vec<(u64, f64)>,
    /// Label per candidate id; absent candidates count as label 0.
    pub relevance: BTreeMap<u64, f64>,
}

impl RankedPrediction {
    pub fn new(query_id: u64, scores: Vec<(u64, f64)>, relevance: BTreeMap<u64, f64>) -> Result<Self> {
        if scores.iter().any(|(_, s)| s.is_nan()) {
            return Err(Error::NonFinite {
                location: format!("scores of query {query_id}"),
            });
        }
        let mut candidates = scores;
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(Self {
            query_id,
            candidates,
            relevance,
        })
    }

    pub fn label(&self, candidate: u64) -> f64 {
        self.relevance.get(&candidate).copied().unwrap_or(0.0)
    }

    fn relevant_count(&self) -> usize {
        self.candidates.iter().filter(|(c, _)| self.label(*c) > 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RecallMode {
    /// Hits in the top `k` over all relevant candidates.
    #[default]
    Standard,
    /// Hits in the top `k` divided by `k`.
    PaperLiteral,
}

/// Recall of the top `k` candidates. Candidates with a positive label are
/// relevant.
pub fn recall_at_k(prediction: &RankedPrediction, k: usize, mode: RecallMode) -> Result<f64> {
    if k == 0 || k > prediction.candidates.len() {
        return Err(Error::Config(format!(
            "k={k} outside 1..={}",
            prediction.candidates.len()
        )));
    }
    let relevant = prediction.relevant_count();
    if relevant == 0 {
        return Err(Error::UndefinedMetric("recall with no relevant candidate"));
    }
    let hits = prediction.candidates[..k].iter().filter(|(c, _)| prediction.label(*c) > 0.0).count();
    Ok(match mode {
        RecallMode::Standard => hits as f64 / relevant as f64,
        RecallMode::PaperLiteral => hits as f64 / k as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ndcg {
    pub value: f64,
    /// Set when the ideal gain is zero and the value is defined as 0.
    pub degenerate: bool,
}

fn gain(y: f64) -> f64 {
    2f64.powf(y) - 1.0
}

fn discount(rank: usize) -> f64 {
    (1.0 + rank as f64).log2()
}

/// `DCG@k / IDCG@k` with gains `2^y - 1` and discounts `log2(1 + rank)`.
/// `k` larger than the candidate list is truncated.
pub fn ndcg_at_k(prediction: &RankedPrediction, k: usize) -> Result<Ndcg> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let dcg: f64 = prediction
        .candidates
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, (c, _))| gain(prediction.label(*c)) / discount(r + 1))
        .sum();
    let mut ideal: Vec<f64> = prediction.candidates.iter().map(|(c, _)| prediction.label(*c)).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(r, y)| gain(*y) / discount(r + 1)).sum();
    if idcg <= 0.0 {
        return Ok(Ndcg {
            value: 0.0,
            degenerate: true,
        });
    }
    if dcg == idcg {
        return Ok(Ndcg {
            value: 1.0,
            degenerate: false,
        });
    }
    Ok(Ndcg {
        value: dcg / idcg,
        degenerate: false,
    })
}

pub fn mae(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyBatch("mae over zero predictions"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::shape("mae labels", predictions.len(), labels.len()));
    }
    Ok(predictions.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pred(scores: &[f64], labels: &[f64]) -> RankedPrediction {
        let s = scores.iter().enumerate().map(|(i, &v)| (i as u64, v)).collect();
        let r = labels.iter().enumerate().map(|(i, &v)| (i as u64, v)).collect();
        RankedPrediction::new(0, s, r).unwrap()
    }

    #[test]
    fn recall_examples() {
        let p = pred(&[0.9, 0.1, 0.5], &[1.0, 0.0, 0.0]);
        assert_eq!(recall_at_k(&p, 1, RecallMode::Standard).unwrap(), 1.0);
        let p = pred(&[0.9, 0.1, 0.5, 0.3], &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(recall_at_k(&p, 2, RecallMode::Standard).unwrap(), 0.5);
        assert_eq!(recall_at_k(&p, 2, RecallMode::PaperLiteral).unwrap(), 0.5);
        assert_eq!(recall_at_k(&p, 4, RecallMode::PaperLiteral).unwrap(), 0.5);
    }

    #[test]
    fn recall_without_relevant_is_undefined() {
        let p = pred(&[0.9, 0.1], &[0.0, 0.0]);
        assert!(matches!(recall_at_k(&p, 1, RecallMode::Standard), Err(Error::UndefinedMetric(_))));
        assert!(recall_at_k(&pred(&[1.0], &[1.0]), 2, RecallMode::Standard).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let p = pred(&[0.5, 0.5, 0.7], &[0.0, 1.0, 0.0]);
        assert_eq!(p.candidates.iter().map(|c| c.0).collect::<Vec<_>>(), vec![2, 0, 1]);
    }

    #[test]
    fn ndcg_examples() {
        let p = pred(&[3.0, 2.0, 1.0], &[5.0, 3.0, 1.0]);
        assert_eq!(ndcg_at_k(&p, 3).unwrap().value, 1.0);
        let p = pred(&[3.0, 2.0], &[3.0, 5.0]);
        assert_eq!(ndcg_at_k(&p, 1).unwrap().value, 7.0 / 31.0);
        let p = pred(&[3.0, 2.0], &[0.0, 0.0]);
        assert_eq!(ndcg_at_k(&p, 2).unwrap(), Ndcg { value: 0.0, degenerate: true });
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0], &[3.0]).unwrap(), 2.0);
        assert!(mae(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn recall_monotone_in_k_and_full_at_end(
            scores in prop::collection::vec(-5.0f64..5.0, 1..40),
            seed in any::<u64>(),
        ) {
            let labels: Vec<f64> = scores.iter().enumerate().map(|(i, _)| f64::from((seed >> (i % 64)) & 1 == 1)).collect();
            prop_assume!(labels.iter().any(|&l| l > 0.0));
            let p = pred(&scores, &labels);
            let mut last = 0.0;
            for k in 1..=scores.len() {
                let r = recall_at_k(&p, k, RecallMode::Standard).unwrap();
                prop_assert!(r >= last);
                last = r;
            }
            prop_assert_eq!(last, 1.0);
        }

        #[test]
        fn ndcg_in_unit_interval_and_tail_invariant(
            scores in prop::collection::vec(-5.0f64..5.0, 2..30),
            labels in prop::collection::vec(0u8..6, 30),
            k in 1usize..10,
        ) {
            let labels: Vec<f64> = labels[..scores.len()].iter().map(|&l| f64::from(l)).collect();
            let p = pred(&scores, &labels);
            let v = ndcg_at_k(&p, k).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&v));
            // reverse the tail below rank k
            let mut q = p.clone();
            if k < q.candidates.len() {
                q.candidates[k..].reverse();
            }
            prop_assert_eq!(ndcg_at_k(&q, k).unwrap().value, v);
        }
    }
}
