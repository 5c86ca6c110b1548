use std::cmp::Ordering;

use super::graph::{self, DecNodes, Dropout, EncNodes, Weights};
use super::ModelParams;
use crate::corpus::{TokenSeq, Vocab};
use crate::error::{Error, Result};
use crate::numerics::tensor::log_softmax;
use crate::numerics::Tape;

/// A decoded output sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    /// Generated tokens, ending with `<eos>` when finished.
    pub tokens: Vec<usize>,
    /// Sum of token log-probabilities.
    pub log_prob: f64,
    pub finished: bool,
}

impl BeamHypothesis {
    pub fn text(&self, vocab: &Vocab) -> String {
        vocab.decode(&self.tokens)
    }
}

/// Descending score, then ascending token sequence.
fn rank(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> Ordering {
    b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(&b.1))
}

fn check_allowed(params: &ModelParams, allowed: Option<&[bool]>) -> Result<()> {
    match allowed {
        Some(a) if a.len() != params.config.vocab_size => {
            Err(Error::Argument("output mask length differs from the vocabulary size".into()))
        }
        Some(a) if !a.iter().any(|&x| x) => Err(Error::Argument("output mask allows no token".into())),
        _ => Ok(()),
    }
}

/// Length-unnormalised beam search.
///
/// Each step expands every live hypothesis by every permitted token (all
/// tokens when `allowed` is `None`) and keeps the `width` best candidates;
/// those ending in `<eos>` are set aside as finished. The search ends when
/// nothing is live, when `width` finished hypotheses exist and the best live
/// score is already below the `width`-th finished one, or at `max_len`
/// tokens, where live hypotheses are returned unfinished. Results are sorted
/// by log-probability, ties broken by token order, and truncated to `width`.
pub fn beam_search(
    params: &ModelParams,
    input: &TokenSeq,
    width: usize,
    max_len: usize,
    allowed: Option<&[bool]>,
) -> Result<Vec<BeamHypothesis>> {
    if width == 0 || max_len == 0 {
        return Err(Error::Argument("beam width and max_len must be at least 1".into()));
    }
    if input.is_empty() {
        return Err(Error::Argument("cannot decode an empty input".into()));
    }
    check_allowed(params, allowed)?;
    let mut tape = Tape::new(&params.tensors);
    let w = Weights::new(&mut tape, params);
    let enc = graph::encode_batch(&mut tape, &w, &[input.as_slice()], &mut Dropout::Off)?;

    let mut live: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new())];
    let mut state = DecNodes::initial(&mut tape, &w, &enc);
    let mut finished: Vec<(f64, Vec<usize>)> = Vec::new();

    for _ in 0..max_len {
        let rows = vec![0; live.len()];
        let enc_rows: EncNodes = enc.repeat_rows(&mut tape, &rows)?;
        let prev: Vec<usize> = live.iter().map(|(_, t)| t.last().copied().unwrap_or(Vocab::BOS)).collect();
        let step = graph::decoder_step(&mut tape, &w, &prev, &state, &enc_rows, &mut Dropout::Off)?;
        let logits = graph::project(&mut tape, &w, step.features)?;
        let lp = log_softmax(tape.value(logits));

        let mut cands: Vec<(f64, Vec<usize>, usize)> = Vec::with_capacity(live.len() * lp.cols());
        for (r, (score, toks)) in live.iter().enumerate() {
            for (v, &l) in lp.row_slice(r).iter().enumerate() {
                if allowed.is_none_or(|a| a[v]) {
                    let mut t = toks.clone();
                    t.push(v);
                    cands.push((score + l, t, r));
                }
            }
        }
        cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(&b.1)));
        cands.truncate(width);

        let mut next = Vec::new();
        let mut parents = Vec::new();
        for (score, toks, r) in cands {
            if toks.last() == Some(&Vocab::EOS) {
                finished.push((score, toks));
            } else {
                next.push((score, toks));
                parents.push(r);
            }
        }
        live = next;
        if live.is_empty() {
            break;
        }
        if finished.len() >= width {
            finished.sort_by(rank);
            if live[0].0 < finished[width - 1].0 {
                live.clear();
                break;
            }
        }
        state = step.state.gather(&mut tape, &parents)?;
    }

    let mut out: Vec<BeamHypothesis> = finished
        .into_iter()
        .map(|(s, t)| BeamHypothesis { tokens: t, log_prob: s, finished: true })
        .chain(live.into_iter().map(|(s, t)| BeamHypothesis { tokens: t, log_prob: s, finished: false }))
        .collect();
    out.sort_by(|a, b| {
        b.log_prob.partial_cmp(&a.log_prob).unwrap_or(Ordering::Equal).then_with(|| a.tokens.cmp(&b.tokens))
    });
    out.truncate(width);
    Ok(out)
}

/// Greedy decoding: the highest-probability token at every step, ties going
/// to the lower index.
pub fn greedy_decode(
    params: &ModelParams,
    input: &TokenSeq,
    max_len: usize,
    allowed: Option<&[bool]>,
) -> Result<BeamHypothesis> {
    Ok(greedy_decode_batch(params, &[input], &[max_len], allowed)?.remove(0))
}

/// Greedy decoding of many inputs at once, each with its own length cap.
pub fn greedy_decode_batch(
    params: &ModelParams,
    inputs: &[&TokenSeq],
    max_lens: &[usize],
    allowed: Option<&[bool]>,
) -> Result<Vec<BeamHypothesis>> {
    if inputs.len() != max_lens.len() {
        return Err(Error::Argument("one max_len per input required".into()));
    }
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    if inputs.iter().any(|s| s.is_empty()) {
        return Err(Error::Argument("cannot decode an empty input".into()));
    }
    if max_lens.contains(&0) {
        return Err(Error::Argument("max_len must be at least 1".into()));
    }
    check_allowed(params, allowed)?;
    let mut tape = Tape::new(&params.tensors);
    let w = Weights::new(&mut tape, params);
    let seqs: Vec<&[usize]> = inputs.iter().map(|s| s.as_slice()).collect();
    let enc = graph::encode_batch(&mut tape, &w, &seqs, &mut Dropout::Off)?;
    let mut state = DecNodes::initial(&mut tape, &w, &enc);
    let mut out: Vec<BeamHypothesis> =
        inputs.iter().map(|_| BeamHypothesis { tokens: Vec::new(), log_prob: 0.0, finished: false }).collect();
    let steps = *max_lens.iter().max().unwrap();
    for s in 0..steps {
        if out.iter().zip(max_lens).all(|(h, &m)| h.finished || h.tokens.len() >= m) {
            break;
        }
        let prev: Vec<usize> = out.iter().map(|h| h.tokens.last().copied().unwrap_or(Vocab::BOS)).collect();
        let step = graph::decoder_step(&mut tape, &w, &prev, &state, &enc, &mut Dropout::Off)?;
        let logits = graph::project(&mut tape, &w, step.features)?;
        let lp = log_softmax(tape.value(logits));
        for (r, h) in out.iter_mut().enumerate() {
            if h.finished || s >= max_lens[r] {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (v, &l) in lp.row_slice(r).iter().enumerate() {
                if allowed.is_none_or(|a| a[v]) && best.is_none_or(|(_, b)| l > b) {
                    best = Some((v, l));
                }
            }
            let (v, l) = best.expect("mask allows at least one token");
            h.tokens.push(v);
            h.log_prob += l;
            h.finished = v == Vocab::EOS;
        }
        state = step.state;
    }
    Ok(out)
}
