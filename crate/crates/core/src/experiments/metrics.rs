use serde::{Deserialize, Serialize};

use super::train::{predict, Example};
use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::morph::{classify_plural, Suffix};
use crate::seq2seq::ModelParams;

/// Exact-match percentage of predicted against gold plurals.
pub fn accuracy(predictions: &[String], examples: &[Example]) -> Result<f64> {
    if predictions.len() != examples.len() {
        return Err(Error::Argument("one prediction per example required".into()));
    }
    if examples.is_empty() {
        return Ok(0.0);
    }
    let hits = predictions.iter().zip(examples).filter(|(p, e)| **p == e.noun.plural).count();
    Ok(100.0 * hits as f64 / examples.len() as f64)
}

/// Percentage of `dataset` whose top-1 beam output equals the gold plural.
pub fn exact_accuracy(params: &ModelParams, vocab: &Vocab, dataset: &[Example], beam_width: usize) -> Result<f64> {
    accuracy(&predict(params, vocab, dataset, beam_width)?, dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold items of this class.
    pub support: usize,
}

/// Per-class scores in [`Suffix::ALL`] order. A ratio with a zero
/// denominator is reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfTable {
    pub rows: Vec<(Suffix, Prf)>,
}

impl PrfTable {
    pub fn get(&self, s: Suffix) -> Prf {
        self.rows[s.index()].1
    }

    /// Class with the lowest F1 among those with gold support.
    pub fn worst_f1(&self, exclude: &[Suffix]) -> Option<Suffix> {
        self.rows
            .iter()
            .filter(|(s, p)| p.support > 0 && !exclude.contains(s))
            .min_by(|a, b| a.1.f1.total_cmp(&b.1.f1))
            .map(|(s, _)| *s)
    }

    /// Element-wise mean of several tables (e.g. one per seed).
    pub fn mean(tables: &[PrfTable]) -> Option<PrfTable> {
        let first = tables.first()?;
        let n = tables.len() as f64;
        let rows = first
            .rows
            .iter()
            .enumerate()
            .map(|(i, (s, _))| {
                let sum = |f: fn(&Prf) -> f64| tables.iter().map(|t| f(&t.rows[i].1)).sum::<f64>() / n;
                let prf = Prf {
                    precision: sum(|p| p.precision),
                    recall: sum(|p| p.recall),
                    f1: sum(|p| p.f1),
                    support: first.rows[i].1.support,
                };
                (*s, prf)
            })
            .collect();
        Some(PrfTable { rows })
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Precision, recall and F1 from parallel gold and predicted suffix labels.
pub fn prf_from_labels(gold: &[Suffix], predicted: &[Suffix]) -> Result<PrfTable> {
    if gold.len() != predicted.len() {
        return Err(Error::Argument("gold and predicted label counts differ".into()));
    }
    let mut tp = [0usize; 6];
    let mut gold_n = [0usize; 6];
    let mut pred_n = [0usize; 6];
    for (&g, &p) in gold.iter().zip(predicted) {
        gold_n[g.index()] += 1;
        pred_n[p.index()] += 1;
        if g == p {
            tp[g.index()] += 1;
        }
    }
    let rows = Suffix::ALL
        .iter()
        .map(|&s| {
            let i = s.index();
            let precision = ratio(tp[i], pred_n[i]);
            let recall = ratio(tp[i], gold_n[i]);
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            (s, Prf { precision, recall, f1, support: gold_n[i] })
        })
        .collect();
    Ok(PrfTable { rows })
}

/// Suffix scores from predicted strings: both sides are classified against
/// the lemma, umlaut folded into the suffix.
pub fn prf_from_predictions(predictions: &[String], examples: &[Example]) -> Result<PrfTable> {
    if predictions.len() != examples.len() {
        return Err(Error::Argument("one prediction per example required".into()));
    }
    let gold: Vec<Suffix> = examples.iter().map(|e| classify_plural(&e.noun.lemma, &e.noun.plural).suffix).collect();
    let pred: Vec<Suffix> =
        predictions.iter().zip(examples).map(|(p, e)| classify_plural(&e.noun.lemma, p).suffix).collect();
    prf_from_labels(&gold, &pred)
}

pub fn suffix_prf(params: &ModelParams, vocab: &Vocab, dataset: &[Example], beam_width: usize) -> Result<PrfTable> {
    prf_from_predictions(&predict(params, vocab, dataset, beam_width)?, dataset)
}
