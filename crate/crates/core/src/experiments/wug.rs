use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, Vocab, WugItem};
use crate::error::{Error, Result};
use crate::morph::{classify_plural, Suffix};
use crate::seq2seq::{beam_search, max_len_for, ModelParams};

/// A ranked output of an inflecting model.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub form: String,
    pub log_prob: f64,
    /// `false` when decoding hit the length cap before `<eos>`.
    pub finished: bool,
}

/// Anything that maps a singular to ranked plural candidates.
pub trait Inflector {
    /// Identifier of this model instance, used to order results.
    fn seed(&self) -> u64;

    /// At most `k` candidates, best first.
    fn inflect(&self, lemma: &str, gender: Gender, k: usize) -> Result<Vec<Prediction>>;
}

/// A trained network with its vocabulary and beam width.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub vocab: Vocab,
    pub beam_width: usize,
}

impl Inflector for TrainedModel {
    fn seed(&self) -> u64 {
        self.params.seed
    }

    fn inflect(&self, lemma: &str, gender: Gender, k: usize) -> Result<Vec<Prediction>> {
        let input = self.vocab.encode_input(lemma, gender)?;
        let mask = self.vocab.output_mask();
        let hyps = beam_search(&self.params, &input, self.beam_width, max_len_for(&input), Some(&mask))?;
        Ok(hyps
            .into_iter()
            .take(k)
            .map(|h| Prediction { form: h.text(&self.vocab), log_prob: h.log_prob, finished: h.finished })
            .collect())
    }
}

/// Fixed ranked outputs per lemma; lemmas not listed yield nothing.
#[derive(Debug, Clone, Default)]
pub struct FixedInflector {
    pub seed: u64,
    pub outputs: BTreeMap<String, Vec<String>>,
}

impl FixedInflector {
    pub fn new(seed: u64) -> FixedInflector {
        FixedInflector { seed, outputs: BTreeMap::new() }
    }

    pub fn with(mut self, lemma: &str, ranked: &[&str]) -> FixedInflector {
        self.outputs.insert(lemma.to_string(), ranked.iter().map(|s| s.to_string()).collect());
        self
    }
}

impl Inflector for FixedInflector {
    fn seed(&self) -> u64 {
        self.seed
    }

    fn inflect(&self, lemma: &str, _gender: Gender, k: usize) -> Result<Vec<Prediction>> {
        let ranked = self.outputs.get(lemma).map(Vec::as_slice).unwrap_or(&[]);
        Ok(ranked
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, f)| Prediction { form: f.clone(), log_prob: -(i as f64), finished: true })
            .collect())
    }
}

/// Class counts and proportions for one stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemProductions {
    pub item: String,
    pub rhyme: bool,
    /// Counts in [`Suffix::ALL`] order.
    pub counts: [usize; 6],
    /// Top-1 form of each model, in seed order.
    pub forms: Vec<String>,
}

impl ItemProductions {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn proportions(&self) -> [f64; 6] {
        proportions(&self.counts)
    }

    pub fn proportion(&self, s: Suffix) -> f64 {
        self.proportions()[s.index()]
    }
}

fn proportions(counts: &[usize; 6]) -> [f64; 6] {
    let n: usize = counts.iter().sum();
    let mut out = [0.0; 6];
    if n > 0 {
        for (o, &c) in out.iter_mut().zip(counts) {
            *o = c as f64 / n as f64;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WugReport {
    pub items: Vec<ItemProductions>,
    pub seeds: Vec<u64>,
}

impl WugReport {
    /// Class counts pooled over the items of one category.
    pub fn category_counts(&self, rhyme: bool) -> [usize; 6] {
        let mut out = [0; 6];
        for item in self.items.iter().filter(|i| i.rhyme == rhyme) {
            for (o, c) in out.iter_mut().zip(item.counts) {
                *o += c;
            }
        }
        out
    }

    /// Class percentages within Rhymes (`true`) or Non-Rhymes.
    pub fn category_percent(&self, rhyme: bool) -> [f64; 6] {
        proportions(&self.category_counts(rhyme)).map(|p| 100.0 * p)
    }

    /// Class percentages over all stimuli.
    pub fn overall_percent(&self) -> [f64; 6] {
        let r = self.category_counts(true);
        let n = self.category_counts(false);
        let mut all = [0; 6];
        for i in 0..6 {
            all[i] = r[i] + n[i];
        }
        proportions(&all).map(|p| 100.0 * p)
    }

    pub fn item(&self, orth: &str) -> Option<&ItemProductions> {
        self.items.iter().find(|i| i.item == orth)
    }
}

fn sorted_models<'a, M: Inflector + ?Sized>(ensemble: &'a [&'a M]) -> Result<Vec<&'a M>> {
    if ensemble.is_empty() {
        return Err(Error::Argument("ensemble is empty".into()));
    }
    let mut models = ensemble.to_vec();
    models.sort_by_key(|m| m.seed());
    Ok(models)
}

/// Top-1 production of every model for every stimulus, presented as a
/// neuter noun, classified against the stimulus. Each model contributes one
/// production per item; a model returning nothing contributes none.
pub fn wug_productions<M: Inflector + ?Sized>(ensemble: &[&M], stimuli: &[WugItem]) -> Result<WugReport> {
    let models = sorted_models(ensemble)?;
    let mut items = Vec::with_capacity(stimuli.len());
    for s in stimuli {
        let mut counts = [0; 6];
        let mut forms = Vec::with_capacity(models.len());
        for m in &models {
            match m.inflect(&s.orth, Gender::Neuter, 1)?.into_iter().next() {
                Some(p) => {
                    counts[classify_plural(&s.orth, &p.form).suffix.index()] += 1;
                    forms.push(p.form);
                }
                None => forms.push(String::new()),
            }
        }
        items.push(ItemProductions { item: s.orth.clone(), rhyme: s.rhyme, counts, forms });
    }
    Ok(WugReport { items, seeds: models.iter().map(|m| m.seed()).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub k: usize,
    /// `[rank][class]` counts over Rhymes.
    pub rhyme: Vec<[usize; 6]>,
    /// `[rank][class]` counts over Non-Rhymes.
    pub nonrhyme: Vec<[usize; 6]>,
    /// `(item, seed, available)` where fewer than `k` hypotheses came back.
    pub short: Vec<(String, u64, usize)>,
}

impl RankProfile {
    /// Pooled counts at 1-based `rank`.
    pub fn counts(&self, rank: usize) -> [usize; 6] {
        let mut out = self.rhyme[rank - 1];
        for (o, c) in out.iter_mut().zip(self.nonrhyme[rank - 1]) {
            *o += c;
        }
        out
    }

    /// Pooled class percentages at 1-based `rank`.
    pub fn percent(&self, rank: usize) -> [f64; 6] {
        proportions(&self.counts(rank)).map(|p| 100.0 * p)
    }
}

/// Classes of beam ranks 1..=k for every stimulus and model.
pub fn rank_profile<M: Inflector + ?Sized>(ensemble: &[&M], stimuli: &[WugItem], k: usize) -> Result<RankProfile> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let models = sorted_models(ensemble)?;
    let mut profile = RankProfile { k, rhyme: vec![[0; 6]; k], nonrhyme: vec![[0; 6]; k], short: Vec::new() };
    for s in stimuli {
        for m in &models {
            let preds = m.inflect(&s.orth, Gender::Neuter, k)?;
            if preds.len() < k {
                profile.short.push((s.orth.clone(), m.seed(), preds.len()));
            }
            let table = if s.rhyme { &mut profile.rhyme } else { &mut profile.nonrhyme };
            for (rank, p) in preds.iter().enumerate().take(k) {
                table[rank][classify_plural(&s.orth, &p.form).suffix.index()] += 1;
            }
        }
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::corpus::builtin_stimuli;

    fn all_e(seed: u64) -> FixedInflector {
        let mut m = FixedInflector::new(seed);
        for s in builtin_stimuli() {
            let e = format!("{}e", s.orth);
            let en = format!("{}en", s.orth);
            m = m.with(&s.orth, &[&e, &en, "xx"]);
        }
        m
    }

    #[test]
    fn single_model_all_e() {
        let m = all_e(1);
        let r = wug_productions(&[&m], &builtin_stimuli()).unwrap();
        assert_eq!(r.items.len(), 24);
        for item in &r.items {
            assert_eq!(item.proportion(Suffix::E), 1.0);
        }
        assert_eq!(r.category_percent(true)[Suffix::E.index()], 100.0);
        assert_eq!(r.category_counts(false).iter().sum::<usize>(), 12);
    }

    #[test]
    fn counting_three_models() {
        let stim = vec![WugItem { orth: "Bral".into(), rhyme: true }];
        let a = FixedInflector::new(1).with("Bral", &["Brale"]);
        let b = FixedInflector::new(2).with("Bral", &["Brale"]);
        let c = FixedInflector::new(3).with("Bral", &["Brals"]);
        let r = wug_productions(&[&c, &a, &b], &stim).unwrap();
        let item = r.item("Bral").unwrap();
        assert_abs_diff_eq!(item.proportion(Suffix::E), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(item.proportion(Suffix::S), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(item.proportions().iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        assert_eq!(r.seeds, vec![1, 2, 3]);
        assert_eq!(item.forms, vec!["Brale", "Brale", "Brals"]);
    }

    #[test]
    fn empty_ensemble_is_an_error() {
        let none: [&FixedInflector; 0] = [];
        assert!(wug_productions(&none, &builtin_stimuli()).is_err());
    }

    #[test]
    fn rank_profile_counts_and_consistency() {
        let a = all_e(1);
        let b = FixedInflector::new(2).with("Bral", &["Brals", "Bräle"]);
        let stim = builtin_stimuli();
        let p = rank_profile(&[&a, &b], &stim, 3).unwrap();
        assert_eq!(p.counts(1)[Suffix::E.index()], 24);
        assert_eq!(p.counts(1)[Suffix::S.index()], 1);
        assert_eq!(p.counts(2)[Suffix::En.index()], 24);
        assert_eq!(p.counts(2)[Suffix::E.index()], 1);
        assert_eq!(p.counts(3)[Suffix::Other.index()], 24);
        // b has 2 outputs for Bral and none for the other 23 items.
        assert_eq!(p.short.len(), 24);
        let w = wug_productions(&[&a, &b], &stim).unwrap();
        let mut pooled = w.category_counts(true);
        assert_eq!(w.item("Pind").unwrap().forms, vec!["Pinde", ""]);
        for (x, y) in pooled.iter_mut().zip(w.category_counts(false)) {
            *x += y;
        }
        assert_eq!(p.counts(1), pooled);
    }
}
