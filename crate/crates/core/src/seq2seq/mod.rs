//! Attention encoder-decoder over character sequences.
//!
//! Stacked LSTM encoder over the gender-tagged input, stacked LSTM decoder
//! initialised from the encoder's final states, global attention over the
//! top encoder layer and a linear projection of `[hidden; context]` onto the
//! vocabulary. Optionally the concatenation first passes through a tanh
//! attentional layer whose output is fed back as extra decoder input on the
//! next step. Decoding starts from `<bos>`.

mod beam;
mod graph;
mod params;

pub use beam::{beam_search, greedy_decode, greedy_decode_batch, BeamHypothesis};
pub use params::{AttentionKind, ModelConfig, ModelParams};

use rand::RngCore;

use crate::corpus::{TokenSeq, Vocab};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor};
use graph::{DecNodes, Dropout, EncNodes, Weights};

/// Encoder output for one input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncStates {
    /// Top-layer hidden vector per input position, each `[1, hidden]`.
    pub outputs: Vec<Tensor>,
    /// Final hidden state of every layer.
    pub final_h: Vec<Tensor>,
    /// Final cell state of every layer.
    pub final_c: Vec<Tensor>,
}

impl EncStates {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// Recurrent decoder state, one `[1, hidden]` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DecState {
    pub h: Vec<Tensor>,
    pub c: Vec<Tensor>,
    /// Previous attentional vector for input-feeding models; `None` means
    /// zeros.
    pub feed: Option<Tensor>,
}

impl DecState {
    /// Layer-wise copy of the encoder's final states.
    pub fn from_encoder(enc: &EncStates) -> DecState {
        DecState { h: enc.final_h.clone(), c: enc.final_c.clone(), feed: None }
    }
}

/// Default-sized model for `vocab`, initialised from `seed`.
pub fn init_model(vocab: &Vocab, seed: u64) -> Result<ModelParams> {
    ModelParams::init(ModelConfig::new(vocab.len()), seed)
}

/// Decoding length cap for an encoded input.
pub fn max_len_for(input: &TokenSeq) -> usize {
    input.len() + 5
}

pub fn encode(params: &ModelParams, input: &TokenSeq) -> Result<EncStates> {
    if input.is_empty() {
        return Err(Error::Argument("cannot encode an empty sequence".into()));
    }
    let mut tape = Tape::new(&params.tensors);
    let w = Weights::new(&mut tape, params);
    let enc = graph::encode_batch(&mut tape, &w, &[input.as_slice()], &mut Dropout::Off)?;
    Ok(EncStates {
        outputs: enc.outputs.iter().map(|&n| tape.value(n).clone()).collect(),
        final_h: enc.final_h.iter().map(|&n| tape.value(n).clone()).collect(),
        final_c: enc.final_c.iter().map(|&n| tape.value(n).clone()).collect(),
    })
}

/// Attention of one decoder hidden vector over encoder states. Returns the
/// context vector and the attention weights.
pub fn attend(params: &ModelParams, dec_hidden: &Tensor, enc: &EncStates) -> Result<(Tensor, Tensor)> {
    let h = params.config.hidden;
    if dec_hidden.numel() != h {
        return Err(Error::Shape { op: "attend", left: dec_hidden.shape().to_vec(), right: vec![1, h] });
    }
    if enc.is_empty() {
        return Err(Error::Argument("no encoder states to attend over".into()));
    }
    let mut tape = Tape::new(&params.tensors);
    let w = Weights::new(&mut tape, params);
    let query = tape.constant(Tensor::row(dec_hidden.data()));
    let enc_nodes = EncNodes::from_states(&mut tape, &w, enc)?;
    let (context, weights) = graph::attention(&mut tape, &w, query, &enc_nodes)?;
    Ok((tape.value(context).clone(), tape.value(weights).clone()))
}

/// One decoder step for a single sequence: logits over the vocabulary and
/// the next state.
pub fn decode_step(
    params: &ModelParams,
    prev_token: usize,
    state: &DecState,
    enc: &EncStates,
) -> Result<(Tensor, DecState)> {
    if prev_token >= params.config.vocab_size {
        return Err(Error::Argument(format!("token {prev_token} outside vocabulary")));
    }
    let mut tape = Tape::new(&params.tensors);
    let w = Weights::new(&mut tape, params);
    let enc_nodes = EncNodes::from_states(&mut tape, &w, enc)?;
    let feed = params.config.input_feed.then(|| {
        let f = state.feed.clone().unwrap_or_else(|| Tensor::zeros(&[1, params.config.hidden]));
        tape.constant(f)
    });
    let dec = DecNodes {
        h: state.h.iter().map(|t| tape.constant(t.clone())).collect(),
        c: state.c.iter().map(|t| tape.constant(t.clone())).collect(),
        feed,
    };
    let step = graph::decoder_step(&mut tape, &w, &[prev_token], &dec, &enc_nodes, &mut Dropout::Off)?;
    let logits = graph::project(&mut tape, &w, step.features)?;
    let next = DecState {
        h: step.state.h.iter().map(|&n| tape.value(n).clone()).collect(),
        c: step.state.c.iter().map(|&n| tape.value(n).clone()).collect(),
        feed: step.state.feed.map(|n| tape.value(n).clone()),
    };
    Ok((tape.value(logits).clone(), next))
}

/// Teacher-forced mean per-token negative log-likelihood of `target` given
/// `input`. With `dropout` set, inter-layer dropout masks are drawn from the
/// supplied generator.
pub fn sequence_loss(
    params: &ModelParams,
    input: &TokenSeq,
    target: &TokenSeq,
    dropout: Option<(f64, &mut dyn RngCore)>,
) -> Result<f64> {
    Ok(batch_loss_and_grad(params, &[(input, target)], dropout, false)?.0)
}

/// Mean per-token NLL over a batch and, when `with_grad`, its gradient for
/// every parameter tensor.
pub fn batch_loss_and_grad(
    params: &ModelParams,
    batch: &[(&TokenSeq, &TokenSeq)],
    dropout: Option<(f64, &mut dyn RngCore)>,
    with_grad: bool,
) -> Result<(f64, Vec<Tensor>)> {
    for (_, target) in batch {
        if target.as_slice().last() != Some(&Vocab::EOS) {
            return Err(Error::Argument("target must end with <eos>".into()));
        }
    }
    let mut drop = match dropout {
        Some((rate, rng)) if rate > 0.0 => Dropout::On { rate, rng },
        _ => Dropout::Off,
    };
    let mut tape = Tape::new(&params.tensors);
    let w = Weights::new(&mut tape, params);
    let loss = graph::batch_loss(&mut tape, &w, batch, &mut drop)?;
    let value = tape.value(loss).item().unwrap();
    let grads = if with_grad { tape.backward(loss)? } else { Vec::new() };
    Ok((value, grads))
}

#[cfg(test)]
mod tests;
