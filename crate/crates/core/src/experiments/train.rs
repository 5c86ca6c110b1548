use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{make_splits, Noun, NounLexicon, SplitCounts, TokenSeq, Vocab, WugItem};
use crate::error::{Error, Result};
use crate::numerics::{clip_global_norm, AdadeltaConfig, AdadeltaState};
use crate::seq2seq::{
    batch_loss_and_grad, beam_search, greedy_decode_batch, max_len_for, AttentionKind, ModelConfig, ModelParams,
};

/// Model shape without the vocabulary size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub emb_dim: usize,
    pub dec_emb_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub bidirectional: bool,
    pub attention: AttentionKind,
    pub init_range: f64,
    pub input_feed: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        let c = ModelConfig::new(0);
        Architecture {
            emb_dim: c.emb_dim,
            dec_emb_dim: c.dec_emb_dim,
            hidden: c.hidden,
            layers: c.layers,
            bidirectional: c.bidirectional,
            attention: c.attention,
            init_range: c.init_range,
            input_feed: c.input_feed,
        }
    }
}

impl Architecture {
    pub fn config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            emb_dim: self.emb_dim,
            dec_emb_dim: self.dec_emb_dim,
            hidden: self.hidden,
            layers: self.layers,
            bidirectional: self.bidirectional,
            attention: self.attention,
            init_range: self.init_range,
            input_feed: self.input_feed,
        }
    }
}

/// Divisor applied to the summed token NLL of a batch before the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientNorm {
    /// Number of target tokens: the mean per-token loss.
    Tokens,
    /// Number of sequences in the batch.
    Sequences,
}

impl std::fmt::Display for GradientNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GradientNorm::Tokens => "tokens",
            GradientNorm::Sequences => "sequences",
        })
    }
}

impl std::str::FromStr for GradientNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tokens" => Ok(GradientNorm::Tokens),
            "sequences" | "sents" => Ok(GradientNorm::Sequences),
            _ => Err(Error::Argument(format!("unknown gradient normalisation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDecay {
    pub start: usize,
    pub factor: f64,
}

impl StepDecay {
    /// Step multiplier used during `epoch` (1-based).
    pub fn rate(&self, epoch: usize) -> f64 {
        self.factor.powi(epoch.saturating_sub(self.start) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub adadelta: AdadeltaConfig,
    pub clip_norm: f64,
    pub gradient_norm: GradientNorm,
    /// Halving-style step decay: from the epoch after `start`, each epoch
    /// multiplies the Adadelta step by `factor` again.
    pub decay: Option<StepDecay>,
    pub seeds: Vec<u64>,
    pub split: SplitCounts,
    /// Seed of the train/dev/test shuffle, shared by every model seed.
    pub split_seed: u64,
    /// Beam width for the per-epoch dev accuracy; 1 decodes greedily.
    pub dev_beam: usize,
    /// Beam width for evaluation and wug productions.
    pub beam_width: usize,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 20,
            epochs: 10,
            dropout: 0.3,
            adadelta: AdadeltaConfig::default(),
            clip_norm: 5.0,
            gradient_norm: GradientNorm::Sequences,
            decay: None,
            seeds: (1..=25).collect(),
            split: SplitCounts::REFERENCE,
            split_seed: 0,
            dev_beam: 1,
            beam_width: 12,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.dev_beam == 0 || self.beam_width == 0 {
            return Err(Error::Argument("batch size, epochs and beam widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Argument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Argument("clip norm must be positive".into()));
        }
        Ok(())
    }
}

/// An encoded noun.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub noun: Noun,
    pub input: TokenSeq,
    pub target: TokenSeq,
}

pub fn encode_examples(nouns: &[Noun], vocab: &Vocab) -> Result<Vec<Example>> {
    nouns
        .iter()
        .map(|n| {
            Ok(Example {
                noun: n.clone(),
                input: vocab.encode_input(&n.lemma, n.gender)?,
                target: vocab.encode_target(&n.plural)?,
            })
        })
        .collect()
}

/// Vocabulary plus encoded splits shared by all seeds of a sweep.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub vocab: Vocab,
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
}

impl ExperimentData {
    /// Splits `lexicon` with `counts` and `split_seed`; the vocabulary also
    /// covers the stimuli so they can be encoded later.
    pub fn prepare(lexicon: &NounLexicon, counts: SplitCounts, split_seed: u64, stimuli: &[WugItem]) -> Result<ExperimentData> {
        let split = make_splits(lexicon, counts, split_seed)?;
        let vocab = Vocab::build(&lexicon.entries, stimuli.iter().map(|s| s.orth.as_str()));
        Ok(ExperimentData {
            train: encode_examples(&lexicon.select(&split.train), &vocab)?,
            dev: encode_examples(&lexicon.select(&split.dev), &vocab)?,
            test: encode_examples(&lexicon.select(&split.test), &vocab)?,
            vocab,
        })
    }
}

/// Seeded random subset of `n` entries, kept in their original order.
pub fn subsample(lexicon: &NounLexicon, n: usize, seed: u64) -> Result<NounLexicon> {
    if n > lexicon.len() {
        return Err(Error::Argument(format!("cannot sample {n} of {} nouns", lexicon.len())));
    }
    let mut idx: Vec<usize> = (0..lexicon.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(n);
    idx.sort_unstable();
    Ok(NounLexicon { entries: lexicon.select(&idx), provenance: lexicon.provenance.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the per-batch mean token NLL.
    pub train_loss: f64,
    /// Exact-match percentage on the dev set.
    pub dev_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
}

/// Top-1 output strings for `examples`, decoded with `beam` (1 = greedy).
pub fn predict(params: &ModelParams, vocab: &Vocab, examples: &[Example], beam: usize) -> Result<Vec<String>> {
    let mask = vocab.output_mask();
    if beam == 1 {
        let mut out = Vec::with_capacity(examples.len());
        for chunk in examples.chunks(64) {
            let inputs: Vec<&TokenSeq> = chunk.iter().map(|e| &e.input).collect();
            let lens: Vec<usize> = chunk.iter().map(|e| max_len_for(&e.input)).collect();
            for h in greedy_decode_batch(params, &inputs, &lens, Some(&mask))? {
                out.push(h.text(vocab));
            }
        }
        return Ok(out);
    }
    examples
        .iter()
        .map(|e| {
            let hyps = beam_search(params, &e.input, beam, max_len_for(&e.input), Some(&mask))?;
            Ok(hyps.first().map(|h| h.text(vocab)).unwrap_or_default())
        })
        .collect()
}

fn accuracy_of(preds: &[String], examples: &[Example]) -> f64 {
    super::metrics::accuracy(preds, examples).unwrap_or(0.0)
}

/// Trains for exactly `config.epochs` epochs and returns the final weights.
/// Shuffling and dropout masks come from a stream derived from the model
/// seed.
pub fn train(
    params: ModelParams,
    train_set: &[Example],
    dev_set: &[Example],
    vocab: &Vocab,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    if params.config.vocab_size != vocab.len() {
        return Err(Error::Argument("model and vocabulary sizes differ".into()));
    }
    let mut params = params;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1);
    let mut opt = AdadeltaState::new(&params.tensors, config.adadelta);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        opt.learning_rate = config.decay.map_or(1.0, |d| d.rate(epoch));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&TokenSeq, &TokenSeq)> =
                chunk.iter().map(|&i| (&train_set[i].input, &train_set[i].target)).collect();
            let (loss, mut grads) = batch_loss_and_grad(&params, &batch, Some((config.dropout, &mut rng)), true)
                .map_err(|e| Error::Numeric(format!("seed {} epoch {epoch} batch {b}: {e}", params.seed)))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("seed {} epoch {epoch} batch {b}: loss {loss}", params.seed)));
            }
            if config.gradient_norm == GradientNorm::Sequences {
                let tokens: usize = batch.iter().map(|(_, t)| t.len()).sum();
                let factor = tokens as f64 / batch.len() as f64;
                for g in &mut grads {
                    g.data_mut().iter_mut().for_each(|x| *x *= factor);
                }
            }
            clip_global_norm(&mut grads, config.clip_norm);
            opt.step(&mut params.tensors, &grads)?;
            total += loss;
            batches += 1;
        }
        let dev_accuracy = if dev_set.is_empty() {
            0.0
        } else {
            accuracy_of(&predict(&params, vocab, dev_set, config.dev_beam)?, dev_set)
        };
        let record = EpochRecord { epoch, train_loss: total / batches as f64, dev_accuracy };
        on_epoch(&record);
        history.push(record);
    }
    Ok(TrainOutcome { params, history })
}

#[derive(Debug)]
pub struct SweepResult {
    pub models: BTreeMap<u64, TrainOutcome>,
    pub failures: BTreeMap<u64, Error>,
    pub warnings: Vec<String>,
}

/// Trains one model per seed on identical data. Failed seeds are reported
/// and the others continue. `jobs` seeds train concurrently.
pub fn sweep(
    data: &ExperimentData,
    config: &TrainConfig,
    jobs: usize,
    on_epoch: &(dyn Fn(u64, &EpochRecord) + Sync),
) -> Result<SweepResult> {
    config.validate()?;
    let mut result = SweepResult { models: BTreeMap::new(), failures: BTreeMap::new(), warnings: Vec::new() };
    if config.seeds.is_empty() {
        result.warnings.push("empty seed list: nothing trained".into());
        return Ok(result);
    }
    let model_config = config.architecture.config(data.vocab.len());
    let run = |seed: u64| -> Result<TrainOutcome> {
        let params = ModelParams::init(model_config, seed)?;
        train(params, &data.train, &data.dev, &data.vocab, config, &mut |r| on_epoch(seed, r))
    };
    let queue = Mutex::new(config.seeds.iter().copied().collect::<std::collections::VecDeque<_>>());
    let done = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(config.seeds.len()) {
            s.spawn(|| loop {
                let Some(seed) = queue.lock().unwrap().pop_front() else { break };
                let outcome = run(seed);
                done.lock().unwrap().push((seed, outcome));
            });
        }
    });
    for (seed, outcome) in done.into_inner().unwrap() {
        match outcome {
            Ok(o) => {
                result.models.insert(seed, o);
            }
            Err(e) => {
                result.warnings.push(format!("seed {seed} failed: {e}"));
                result.failures.insert(seed, e);
            }
        }
    }
    Ok(result)
}
