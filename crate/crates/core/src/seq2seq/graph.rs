//! Batched forward graphs. Rows of every node are batch elements; padded
//! positions are handled with row selection and attention masks.

use rand::{Rng, RngCore};

use super::params::{AttnLayout, ModelParams};
use super::EncStates;
use crate::corpus::{TokenSeq, Vocab};
use crate::error::Result;
use crate::numerics::{NodeId, Tape, Tensor};

pub(crate) enum Dropout<'r> {
    Off,
    On { rate: f64, rng: &'r mut dyn RngCore },
}

impl Dropout<'_> {
    fn apply(&mut self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let Dropout::On { rate, rng } = self else { return Ok(x) };
        let shape = tape.value(x).shape().to_vec();
        let keep = 1.0 - *rate;
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let mask = tape.constant(Tensor::new(shape, data)?);
        tape.mul(x, mask)
    }
}

/// Parameter nodes, registered once per tape.
pub(crate) struct Weights {
    enc_emb: NodeId,
    enc: Vec<Vec<(NodeId, NodeId)>>,
    dec_emb: NodeId,
    dec: Vec<(NodeId, NodeId)>,
    attn: AttnNodes,
    attn_out: Option<NodeId>,
    out_w: NodeId,
    out_b: NodeId,
    enc_units: usize,
    hidden: usize,
}

enum AttnNodes {
    Bilinear { w: NodeId },
    Additive { wq: NodeId, wk: NodeId, v: NodeId },
}

impl Weights {
    pub fn new(tape: &mut Tape, params: &ModelParams) -> Weights {
        let l = &params.layout;
        let mut p = |i: usize| tape.param(i);
        Weights {
            enc_emb: p(l.enc_emb),
            enc: l.enc.iter().map(|dirs| dirs.iter().map(|&(w, b)| (p(w), p(b))).collect()).collect(),
            dec_emb: p(l.dec_emb),
            dec: l.dec.iter().map(|&(w, b)| (p(w), p(b))).collect(),
            attn: match l.attn {
                AttnLayout::Bilinear { w } => AttnNodes::Bilinear { w: p(w) },
                AttnLayout::Additive { wq, wk, v } => AttnNodes::Additive { wq: p(wq), wk: p(wk), v: p(v) },
            },
            attn_out: l.attn_out.map(&mut p),
            out_w: p(l.out_w),
            out_b: p(l.out_b),
            enc_units: params.config.enc_units(),
            hidden: params.config.hidden,
        }
    }
}

/// One LSTM cell: gates `[i, f, g, o]` from `[x; h]·W + b`.
fn lstm_cell(
    tape: &mut Tape,
    (w, b): (NodeId, NodeId),
    units: usize,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId)> {
    let xh = tape.concat(&[x, h])?;
    let z = tape.matmul(xh, w)?;
    let z = tape.add(z, b)?;
    let i = tape.slice_cols(z, 0, units)?;
    let i = tape.sigmoid(i);
    let f = tape.slice_cols(z, units, 2 * units)?;
    let f = tape.sigmoid(f);
    let g = tape.slice_cols(z, 2 * units, 3 * units)?;
    let g = tape.tanh(g);
    let o = tape.slice_cols(z, 3 * units, 4 * units)?;
    let o = tape.sigmoid(o);
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_new = tape.add(fc, ig)?;
    let tc = tape.tanh(c_new);
    let h_new = tape.mul(o, tc)?;
    Ok((h_new, c_new))
}

/// Encoder nodes for a batch.
pub(crate) struct EncNodes {
    /// Top-layer output per position, `[B, hidden]`.
    pub outputs: Vec<NodeId>,
    pub final_h: Vec<NodeId>,
    pub final_c: Vec<NodeId>,
    /// `[B, T]`, 1 where the position exists.
    pub mask: Tensor,
    /// Precomputed key projections for additive attention.
    keys: Option<Vec<NodeId>>,
}

impl EncNodes {
    fn finish(tape: &mut Tape, w: &Weights, outputs: Vec<NodeId>, final_h: Vec<NodeId>, final_c: Vec<NodeId>, mask: Tensor) -> Result<EncNodes> {
        let keys = match w.attn {
            AttnNodes::Bilinear { .. } => None,
            AttnNodes::Additive { wk, .. } => {
                Some(outputs.iter().map(|&e| tape.matmul(e, wk)).collect::<Result<Vec<_>>>()?)
            }
        };
        Ok(EncNodes { outputs, final_h, final_c, mask, keys })
    }

    /// Re-enters precomputed single-sequence states as constants.
    pub fn from_states(tape: &mut Tape, w: &Weights, enc: &EncStates) -> Result<EncNodes> {
        let outputs = enc.outputs.iter().map(|t| tape.constant(t.clone())).collect();
        let final_h = enc.final_h.iter().map(|t| tape.constant(t.clone())).collect();
        let final_c = enc.final_c.iter().map(|t| tape.constant(t.clone())).collect();
        let mask = Tensor::filled(&[1, enc.len()], 1.0);
        EncNodes::finish(tape, w, outputs, final_h, final_c, mask)
    }

    /// Copies of batch row `rows[i]` for every `i`, e.g. to decode several
    /// hypotheses of one input side by side.
    pub fn repeat_rows(&self, tape: &mut Tape, rows: &[usize]) -> Result<EncNodes> {
        let g = |tape: &mut Tape, ids: &[NodeId]| ids.iter().map(|&n| tape.gather(n, rows)).collect::<Result<Vec<_>>>();
        let outputs = g(tape, &self.outputs)?;
        let final_h = g(tape, &self.final_h)?;
        let final_c = g(tape, &self.final_c)?;
        let keys = match &self.keys {
            Some(k) => Some(g(tape, k)?),
            None => None,
        };
        let t = self.mask.cols();
        let mut data = Vec::with_capacity(rows.len() * t);
        for &r in rows {
            data.extend_from_slice(self.mask.row_slice(r));
        }
        Ok(EncNodes { outputs, final_h, final_c, mask: Tensor::new(vec![rows.len(), t], data)?, keys })
    }
}

fn zeros(tape: &mut Tape, rows: usize, cols: usize) -> NodeId {
    tape.constant(Tensor::zeros(&[rows, cols]))
}

/// Runs one direction of one layer over `inputs`; `reverse` walks right to
/// left. Padded positions leave the state untouched.
fn run_direction(
    tape: &mut Tape,
    cell: (NodeId, NodeId),
    units: usize,
    inputs: &[NodeId],
    keep: &[Vec<bool>],
    reverse: bool,
) -> Result<(Vec<NodeId>, NodeId, NodeId)> {
    let b = keep[0].len();
    let mut h = zeros(tape, b, units);
    let mut c = zeros(tape, b, units);
    let mut outs = vec![h; inputs.len()];
    let order: Vec<usize> = if reverse { (0..inputs.len()).rev().collect() } else { (0..inputs.len()).collect() };
    for t in order {
        let (hn, cn) = lstm_cell(tape, cell, units, inputs[t], h, c)?;
        if keep[t].iter().all(|&k| k) {
            h = hn;
            c = cn;
        } else {
            h = tape.select(hn, h, &keep[t])?;
            c = tape.select(cn, c, &keep[t])?;
        }
        outs[t] = h;
    }
    Ok((outs, h, c))
}

pub(crate) fn encode_batch(tape: &mut Tape, w: &Weights, seqs: &[&[usize]], dropout: &mut Dropout) -> Result<EncNodes> {
    let b = seqs.len();
    let t_max = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
    let keep: Vec<Vec<bool>> = (0..t_max).map(|t| seqs.iter().map(|s| t < s.len()).collect()).collect();
    let mut mask = Vec::with_capacity(b * t_max);
    for s in seqs {
        mask.extend((0..t_max).map(|t| if t < s.len() { 1.0 } else { 0.0 }));
    }
    let mask = Tensor::new(vec![b, t_max], mask)?;

    let mut inputs = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let tokens: Vec<usize> = seqs.iter().map(|s| s.get(t).copied().unwrap_or(Vocab::PAD)).collect();
        inputs.push(tape.gather(w.enc_emb, &tokens)?);
    }
    let mut final_h = Vec::new();
    let mut final_c = Vec::new();
    for (k, dirs) in w.enc.iter().enumerate() {
        if k > 0 {
            inputs = inputs.into_iter().map(|x| dropout.apply(tape, x)).collect::<Result<_>>()?;
        }
        if dirs.len() == 1 {
            let (outs, h, c) = run_direction(tape, dirs[0], w.enc_units, &inputs, &keep, false)?;
            inputs = outs;
            final_h.push(h);
            final_c.push(c);
        } else {
            let (fo, fh, fc) = run_direction(tape, dirs[0], w.enc_units, &inputs, &keep, false)?;
            let (bo, bh, bc) = run_direction(tape, dirs[1], w.enc_units, &inputs, &keep, true)?;
            inputs = fo.iter().zip(&bo).map(|(&f, &r)| tape.concat(&[f, r])).collect::<Result<_>>()?;
            final_h.push(tape.concat(&[fh, bh])?);
            final_c.push(tape.concat(&[fc, bc])?);
        }
    }
    EncNodes::finish(tape, w, inputs, final_h, final_c, mask)
}

/// Global attention of `query` (`[B, hidden]`) over the encoder outputs.
/// Returns `(context, weights)`.
pub(crate) fn attention(tape: &mut Tape, w: &Weights, query: NodeId, enc: &EncNodes) -> Result<(NodeId, NodeId)> {
    let mut scores = Vec::with_capacity(enc.outputs.len());
    match w.attn {
        AttnNodes::Bilinear { w } => {
            let q = tape.matmul(query, w)?;
            for &e in &enc.outputs {
                let prod = tape.mul(q, e)?;
                scores.push(tape.sum_cols(prod));
            }
        }
        AttnNodes::Additive { wq, v, .. } => {
            let q = tape.matmul(query, wq)?;
            for &k in enc.keys.as_ref().expect("additive attention keys") {
                let s = tape.add(q, k)?;
                let s = tape.tanh(s);
                scores.push(tape.matmul(s, v)?);
            }
        }
    }
    let scores = if scores.len() == 1 { scores[0] } else { tape.concat(&scores)? };
    let weights = tape.softmax(scores, Some(&enc.mask))?;
    let mut context = None;
    for (t, &e) in enc.outputs.iter().enumerate() {
        let a = if enc.outputs.len() == 1 { weights } else { tape.slice_cols(weights, t, t + 1)? };
        let term = tape.mul_col(e, a)?;
        context = Some(match context {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    Ok((context.expect("non-empty encoder"), weights))
}

pub(crate) struct DecNodes {
    pub h: Vec<NodeId>,
    pub c: Vec<NodeId>,
    /// Previous attentional vector, `[B, hidden]`, with input feeding.
    pub feed: Option<NodeId>,
}

impl DecNodes {
    /// Encoder final states, and a zero feed vector when the model uses one.
    pub fn initial(tape: &mut Tape, w: &Weights, enc: &EncNodes) -> DecNodes {
        let rows = enc.mask.rows();
        let feed = w.attn_out.map(|_| zeros(tape, rows, w.hidden));
        DecNodes { h: enc.final_h.clone(), c: enc.final_c.clone(), feed }
    }

    /// Row `rows[i]` of every state node.
    pub fn gather(&self, tape: &mut Tape, rows: &[usize]) -> Result<DecNodes> {
        let g = |tape: &mut Tape, ids: &[NodeId]| ids.iter().map(|&n| tape.gather(n, rows)).collect::<Result<Vec<_>>>();
        Ok(DecNodes {
            h: g(tape, &self.h)?,
            c: g(tape, &self.c)?,
            feed: match self.feed {
                Some(f) => Some(tape.gather(f, rows)?),
                None => None,
            },
        })
    }
}

pub(crate) struct StepNodes {
    /// Input to the output projection: `[h_top; context]`, or the
    /// attentional vector with input feeding.
    pub features: NodeId,
    pub state: DecNodes,
}

pub(crate) fn decoder_step(
    tape: &mut Tape,
    w: &Weights,
    prev: &[usize],
    state: &DecNodes,
    enc: &EncNodes,
    dropout: &mut Dropout,
) -> Result<StepNodes> {
    let mut x = tape.gather(w.dec_emb, prev)?;
    if let Some(f) = state.feed {
        x = tape.concat(&[x, f])?;
    }
    let mut h = Vec::with_capacity(w.dec.len());
    let mut c = Vec::with_capacity(w.dec.len());
    for (k, &cell) in w.dec.iter().enumerate() {
        if k > 0 {
            x = dropout.apply(tape, x)?;
        }
        let (hn, cn) = lstm_cell(tape, cell, w.hidden, x, state.h[k], state.c[k])?;
        h.push(hn);
        c.push(cn);
        x = hn;
    }
    let (context, _) = attention(tape, w, x, enc)?;
    let mut features = tape.concat(&[x, context])?;
    let mut feed = None;
    if let Some(wc) = w.attn_out {
        let z = tape.matmul(features, wc)?;
        features = tape.tanh(z);
        feed = Some(features);
    }
    Ok(StepNodes { features, state: DecNodes { h, c, feed } })
}

pub(crate) fn project(tape: &mut Tape, w: &Weights, features: NodeId) -> Result<NodeId> {
    let z = tape.matmul(features, w.out_w)?;
    tape.add(z, w.out_b)
}

/// Summed teacher-forced NLL over a batch, divided by the number of target
/// tokens.
pub(crate) fn batch_loss(
    tape: &mut Tape,
    w: &Weights,
    batch: &[(&TokenSeq, &TokenSeq)],
    dropout: &mut Dropout,
) -> Result<NodeId> {
    let inputs: Vec<&[usize]> = batch.iter().map(|(i, _)| i.as_slice()).collect();
    let enc = encode_batch(tape, w, &inputs, dropout)?;
    let steps = batch.iter().map(|(_, t)| t.len()).max().unwrap_or(0);
    let mut state = DecNodes::initial(tape, w, &enc);
    let mut features = Vec::with_capacity(steps);
    let mut targets = Vec::with_capacity(steps * batch.len());
    for s in 0..steps {
        let prev: Vec<usize> = batch
            .iter()
            .map(|(_, t)| if s == 0 { Vocab::BOS } else { t.0.get(s - 1).copied().unwrap_or(Vocab::PAD) })
            .collect();
        let step = decoder_step(tape, w, &prev, &state, &enc, dropout)?;
        features.push(step.features);
        targets.extend(batch.iter().map(|(_, t)| t.0.get(s).copied()));
        state = step.state;
    }
    let all = if features.len() == 1 { features[0] } else { tape.stack_rows(&features)? };
    let logits = project(tape, w, all)?;
    let nll = tape.nll_sum(logits, &targets)?;
    let ntok = targets.iter().filter(|t| t.is_some()).count().max(1);
    tape.scale(nll, 1.0 / ntok as f64)
}
