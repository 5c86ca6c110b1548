use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::grad_check;

fn toy_config(vocab_size: usize) -> ModelConfig {
    ModelConfig {
        vocab_size,
        emb_dim: 3,
        dec_emb_dim: 4,
        hidden: 4,
        layers: 2,
        bidirectional: false,
        attention: AttentionKind::Bilinear,
        init_range: 0.5,
        input_feed: false,
    }
}

fn seq(v: &[usize]) -> TokenSeq {
    TokenSeq(v.to_vec())
}

// Plain nested-loop forward pass used as an oracle for the tape graphs.
mod naive {
    use super::ModelParams;

    fn rows(p: &ModelParams, name: &str) -> Vec<Vec<f64>> {
        let t = p.get(name).unwrap();
        (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect()
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn affine(x: &[f64], w: &[Vec<f64>], b: Option<&[f64]>) -> Vec<f64> {
        let n = w[0].len();
        (0..n)
            .map(|j| x.iter().zip(w).map(|(xi, row)| xi * row[j]).sum::<f64>() + b.map_or(0.0, |b| b[j]))
            .collect()
    }

    fn cell(p: &ModelParams, prefix: &str, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let u = h.len();
        let xh: Vec<f64> = x.iter().chain(h).copied().collect();
        let z = affine(&xh, &rows(p, &format!("{prefix}.w")), Some(&rows(p, &format!("{prefix}.b"))[0]));
        let mut hn = vec![0.0; u];
        let mut cn = vec![0.0; u];
        for j in 0..u {
            let (i, f, g, o) = (sig(z[j]), sig(z[u + j]), z[2 * u + j].tanh(), sig(z[3 * u + j]));
            cn[j] = f * c[j] + i * g;
            hn[j] = o * cn[j].tanh();
        }
        (hn, cn)
    }

    pub struct Enc {
        pub outputs: Vec<Vec<f64>>,
        pub h: Vec<Vec<f64>>,
        pub c: Vec<Vec<f64>>,
    }

    pub fn encode(p: &ModelParams, input: &[usize]) -> Enc {
        let hsz = p.config.hidden;
        let layers = p.config.layers;
        let emb = rows(p, "enc.emb");
        let mut h = vec![vec![0.0; hsz]; layers];
        let mut c = vec![vec![0.0; hsz]; layers];
        let mut outputs = Vec::new();
        for &tok in input {
            let mut x = emb[tok].clone();
            for k in 0..layers {
                let (hn, cn) = cell(p, &format!("enc.l{k}"), &x, &h[k], &c[k]);
                h[k] = hn.clone();
                c[k] = cn;
                x = hn;
            }
            outputs.push(x);
        }
        Enc { outputs, h, c }
    }

    pub fn attend(p: &ModelParams, q: &[f64], enc: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let qw = affine(q, &rows(p, "attn.w"), None);
        let scores: Vec<f64> = enc.iter().map(|e| e.iter().zip(&qw).map(|(a, b)| a * b).sum()).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ex: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = ex.iter().sum();
        let w: Vec<f64> = ex.iter().map(|e| e / total).collect();
        let mut ctx = vec![0.0; q.len()];
        for (wt, e) in w.iter().zip(enc) {
            for j in 0..ctx.len() {
                ctx[j] += wt * e[j];
            }
        }
        (ctx, w)
    }

    /// Logits for every decoder step under teacher forcing on `target`.
    pub fn logits(p: &ModelParams, input: &[usize], target: &[usize]) -> Vec<Vec<f64>> {
        let enc = encode(p, input);
        let emb = rows(p, "dec.emb");
        let (mut h, mut c) = (enc.h.clone(), enc.c.clone());
        let mut prev = 1;
        let mut feed = vec![0.0; p.config.hidden];
        let mut out = Vec::new();
        for &y in target {
            let mut x = emb[prev].clone();
            if p.config.input_feed {
                x.extend_from_slice(&feed);
            }
            for k in 0..p.config.layers {
                let (hn, cn) = cell(p, &format!("dec.l{k}"), &x, &h[k], &c[k]);
                h[k] = hn.clone();
                c[k] = cn;
                x = hn;
            }
            let (ctx, _) = attend(p, &x, &enc.outputs);
            let mut feat: Vec<f64> = x.iter().chain(&ctx).copied().collect();
            if p.config.input_feed {
                feat = affine(&feat, &rows(p, "attn.out.w"), None).iter().map(|v| v.tanh()).collect();
                feed = feat.clone();
            }
            out.push(affine(&feat, &rows(p, "out.w"), Some(&rows(p, "out.b")[0])));
            prev = y;
        }
        out
    }

    pub fn loss(p: &ModelParams, input: &[usize], target: &[usize]) -> f64 {
        let all = logits(p, input, target);
        let mut total = 0.0;
        for (l, &y) in all.iter().zip(target) {
            let lse = l.iter().map(|v| v.exp()).sum::<f64>().ln();
            total += lse - l[y];
        }
        total / target.len() as f64
    }
}

#[test]
fn init_is_deterministic_per_seed() {
    let a = ModelParams::init(toy_config(7), 1).unwrap();
    let b = ModelParams::init(toy_config(7), 1).unwrap();
    let c = ModelParams::init(toy_config(7), 2).unwrap();
    assert_eq!(a.checkpoint_bytes().unwrap(), b.checkpoint_bytes().unwrap());
    assert_ne!(a.tensors, c.tensors);
    let r = a.config.init_range;
    assert!(a.tensors.iter().flat_map(|t| t.data()).all(|v| (-r..r).contains(v)));
}

#[test]
fn parameter_count_for_forty_symbols() {
    let (v, e, h) = (40, 300, 100);
    let lstm = |input: usize| (input + h) * 4 * h + 4 * h;
    let side = v * e + lstm(e) + lstm(h);
    let expected = 2 * side + h * h + 2 * h * v + v;
    let params = ModelParams::init(ModelConfig::new(40), 3).unwrap();
    assert_eq!(params.param_count(), expected);
    assert_eq!(expected, 523_640);
    assert_eq!(params.config.param_count(), expected);

    let fed = ModelConfig { input_feed: true, ..ModelConfig::new(40) };
    let extra = h * 4 * h + 2 * h * h - h * v;
    assert_eq!(ModelParams::init(fed, 3).unwrap().param_count(), expected + extra);
}

#[test]
fn encode_shapes_and_sensitivity() {
    let p = ModelParams::init(toy_config(9), 4).unwrap();
    let a = encode(&p, &seq(&[3, 6, 7, 8, 6, 2])).unwrap();
    assert_eq!(a.len(), 6);
    assert_eq!(a.final_h.len(), 2);
    let b = encode(&p, &seq(&[3, 8, 7, 6, 6, 2])).unwrap();
    assert_ne!(a.final_h, b.final_h);
    assert!(encode(&p, &seq(&[])).is_err());
}

#[test]
fn zero_weights_give_zero_hidden_state() {
    let p = ModelParams::zeros(toy_config(7)).unwrap();
    let enc = encode(&p, &seq(&[3, 4, 5, 2])).unwrap();
    for t in enc.outputs.iter().chain(&enc.final_h) {
        assert!(t.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn encoder_matches_naive_oracle() {
    let p = ModelParams::init(toy_config(9), 11).unwrap();
    let input = [5, 6, 7, 8, 2];
    let enc = encode(&p, &seq(&input)).unwrap();
    let oracle = naive::encode(&p, &input);
    for (t, o) in enc.outputs.iter().zip(&oracle.outputs) {
        for (a, b) in t.data().iter().zip(o) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }
}

#[test]
fn attention_single_position() {
    let p = ModelParams::init(toy_config(7), 5).unwrap();
    let enc = encode(&p, &seq(&[3])).unwrap();
    let q = Tensor::row(&[0.3, -0.2, 0.9, 0.1]);
    let (ctx, w) = attend(&p, &q, &enc).unwrap();
    assert_eq!(w.data(), &[1.0]);
    assert_eq!(ctx.data(), enc.outputs[0].data());
}

#[test]
fn attention_identical_states() {
    let p = ModelParams::init(toy_config(7), 5).unwrap();
    let state = Tensor::row(&[0.1, 0.2, -0.3, 0.4]);
    let enc = EncStates {
        outputs: vec![state.clone(); 4],
        final_h: vec![state.clone(); 2],
        final_c: vec![state.clone(); 2],
    };
    let (ctx, w) = attend(&p, &Tensor::row(&[1.0, -1.0, 0.5, 2.0]), &enc).unwrap();
    for (a, b) in ctx.data().iter().zip(state.data()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }
    assert_abs_diff_eq!(w.data().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
}

#[test]
fn attention_matches_brute_force() {
    let p = ModelParams::init(toy_config(7), 6).unwrap();
    let enc = encode(&p, &seq(&[3, 5, 2])).unwrap();
    let q = [0.7, -0.4, 0.2, 0.5];
    let (ctx, w) = attend(&p, &Tensor::row(&q), &enc).unwrap();
    let states: Vec<Vec<f64>> = enc.outputs.iter().map(|t| t.data().to_vec()).collect();
    let (oc, ow) = naive::attend(&p, &q, &states);
    for (a, b) in ctx.data().iter().zip(&oc).chain(w.data().iter().zip(&ow)) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
    }
    assert!(attend(&p, &Tensor::row(&[1.0, 2.0]), &enc).is_err());
}

#[test]
fn decode_step_matches_naive_oracle() {
    for config in [toy_config(9), ModelConfig { input_feed: true, ..toy_config(9) }] {
        decode_step_case(config);
    }
}

fn decode_step_case(config: ModelConfig) {
    let p = ModelParams::init(config, 8).unwrap();
    let input = [4, 6, 8, 2];
    let target = [7, 6, 2];
    let enc = encode(&p, &seq(&input)).unwrap();
    let oracle = naive::logits(&p, &input, &target);
    let mut state = DecState::from_encoder(&enc);
    let mut prev = Vocab::BOS;
    for (step, &y) in target.iter().enumerate() {
        let (logits, next) = decode_step(&p, prev, &state, &enc).unwrap();
        assert_eq!(logits.numel(), 9);
        for (a, b) in logits.data().iter().zip(&oracle[step]) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
        let probs = crate::numerics::tensor::softmax(&logits, None).unwrap();
        assert_abs_diff_eq!(probs.data().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        state = next;
        prev = y;
    }
    assert!(decode_step(&p, 9, &state, &enc).is_err());
}

#[test]
fn loss_matches_naive_oracle() {
    for config in [toy_config(9), ModelConfig { input_feed: true, ..toy_config(9) }] {
        let p = ModelParams::init(config, 9).unwrap();
        let input = [5, 3, 7, 8, 2];
        let target = [7, 3, 3, 2];
        let got = sequence_loss(&p, &seq(&input), &seq(&target), None).unwrap();
        assert_abs_diff_eq!(got, naive::loss(&p, &input, &target), epsilon = 1e-13);
        assert!(got >= 0.0);
    }
}

#[test]
fn zero_model_loss_is_log_vocab() {
    let p = ModelParams::zeros(toy_config(8)).unwrap();
    let loss = sequence_loss(&p, &seq(&[3, 5, 6, 2]), &seq(&[5, 6, 7, 2]), None).unwrap();
    assert_abs_diff_eq!(loss, (8f64).ln(), epsilon = 1e-12);
}

#[test]
fn target_must_end_with_eos() {
    let p = ModelParams::init(toy_config(8), 1).unwrap();
    assert!(sequence_loss(&p, &seq(&[3, 5, 2]), &seq(&[5, 6]), None).is_err());
}

#[test]
fn dropout_changes_loss_and_is_reproducible() {
    let p = ModelParams::init(toy_config(8), 1).unwrap();
    let (x, y) = (seq(&[3, 5, 6, 7, 2]), seq(&[5, 6, 2]));
    let clean = sequence_loss(&p, &x, &y, None).unwrap();
    let mut r1 = ChaCha8Rng::seed_from_u64(3);
    let mut r2 = ChaCha8Rng::seed_from_u64(3);
    let a = sequence_loss(&p, &x, &y, Some((0.3, &mut r1))).unwrap();
    let b = sequence_loss(&p, &x, &y, Some((0.3, &mut r2))).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, clean);
}

fn variants() -> Vec<ModelConfig> {
    let base = toy_config(8);
    vec![
        base,
        ModelConfig { attention: AttentionKind::Additive, ..base },
        ModelConfig { bidirectional: true, ..base },
        ModelConfig { input_feed: true, ..base },
    ]
}

#[test]
fn batched_loss_equals_token_weighted_average() {
    for config in variants() {
        let p = ModelParams::init(config, 2).unwrap();
        let a = (seq(&[3, 5, 6, 7, 6, 2]), seq(&[5, 6, 7, 7, 2]));
        let b = (seq(&[4, 7, 2]), seq(&[7, 2]));
        let la = sequence_loss(&p, &a.0, &a.1, None).unwrap();
        let lb = sequence_loss(&p, &b.0, &b.1, None).unwrap();
        let (both, _) = batch_loss_and_grad(&p, &[(&a.0, &a.1), (&b.0, &b.1)], None, false).unwrap();
        assert_abs_diff_eq!(both, (5.0 * la + 2.0 * lb) / 7.0, epsilon = 1e-13);
    }
}

#[test]
fn batched_gradient_is_token_weighted_sum() {
    for config in variants() {
        let p = ModelParams::init(config, 4).unwrap();
        let a = (seq(&[3, 5, 6, 7, 6, 2]), seq(&[5, 6, 7, 7, 2]));
        let b = (seq(&[4, 7, 2]), seq(&[7, 2]));
        let (_, ga) = batch_loss_and_grad(&p, &[(&a.0, &a.1)], None, true).unwrap();
        let (_, gb) = batch_loss_and_grad(&p, &[(&b.0, &b.1)], None, true).unwrap();
        let (_, both) = batch_loss_and_grad(&p, &[(&b.0, &b.1), (&a.0, &a.1)], None, true).unwrap();
        for ((x, y), z) in ga.iter().zip(&gb).zip(&both) {
            for ((u, v), w) in x.data().iter().zip(y.data()).zip(z.data()) {
                assert_abs_diff_eq!(*w, (5.0 * u + 2.0 * v) / 7.0, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for config in variants() {
        let p = ModelParams::init(config, 7).unwrap();
        let (x, y) = (seq(&[3, 5, 6, 7, 2]), seq(&[6, 5, 7, 2]));
        let f = |t: &[Tensor]| {
            let q = ModelParams { tensors: t.to_vec(), ..p.clone() };
            batch_loss_and_grad(&q, &[(&x, &y)], None, true)
        };
        let report = grad_check(f, &p.tensors, 1e-5).unwrap();
        assert_eq!(report.checked, p.param_count());
        assert!(report.max_rel_error <= 1e-4, "{config:?}: {report:?}");
    }
}

#[test]
fn beam_width_one_is_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for s in 0..20 {
        let p = ModelParams::init(ModelConfig { init_range: 1.0, ..toy_config(8) }, s).unwrap();
        let input = seq(&[3, rng.random_range(5..8), rng.random_range(5..8), 2]);
        let beam = beam_search(&p, &input, 1, 6, None).unwrap();
        let greedy = greedy_decode(&p, &input, 6, None).unwrap();
        assert_eq!(beam.len(), 1);
        assert_eq!(beam[0].tokens, greedy.tokens);
        assert_abs_diff_eq!(beam[0].log_prob, greedy.log_prob, epsilon = 1e-12);
    }
}

/// Log-probability of every token sequence up to `max_len` over `allowed`,
/// via repeated single steps.
fn enumerate(p: &ModelParams, input: &TokenSeq, allowed: &[usize], max_len: usize) -> Vec<(f64, Vec<usize>, bool)> {
    let enc = encode(p, input).unwrap();
    let mut out = Vec::new();
    let mut frontier = vec![(0.0, Vec::new(), DecState::from_encoder(&enc))];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (score, toks, state) in frontier {
            let prev = toks.last().copied().unwrap_or(Vocab::BOS);
            let (logits, ns) = decode_step(p, prev, &state, &enc).unwrap();
            let lp = crate::numerics::tensor::log_softmax(&logits);
            for &v in allowed {
                let mut t: Vec<usize> = toks.clone();
                t.push(v);
                let s = score + lp.data()[v];
                if v == Vocab::EOS {
                    out.push((s, t, true));
                } else {
                    next.push((s, t, ns.clone()));
                }
            }
        }
        frontier = next;
    }
    out.extend(frontier.into_iter().map(|(s, t, _)| (s, t, false)));
    out.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    out
}

#[test]
fn two_token_beam_matches_enumeration() {
    let p = ModelParams::init(ModelConfig { init_range: 1.0, ..toy_config(4) }, 13).unwrap();
    let mask = [false, false, true, true];
    let input = seq(&[3, 3, 2]);
    let beam = beam_search(&p, &input, 2, 2, Some(&mask)).unwrap();
    let all = enumerate(&p, &input, &[2, 3], 2);
    assert_eq!(all.len(), 3);
    assert_eq!(beam.len(), 2);
    for (h, (s, t, fin)) in beam.iter().zip(&all) {
        assert_eq!(&h.tokens, t);
        assert_eq!(h.finished, *fin);
        assert_abs_diff_eq!(h.log_prob, s, epsilon = 1e-12);
    }
}

#[test]
fn wide_beam_is_exhaustive() {
    let p = ModelParams::init(ModelConfig { init_range: 1.5, ..toy_config(5) }, 17).unwrap();
    let mask = [false, false, true, true, true];
    let input = seq(&[3, 4, 2]);
    let all = enumerate(&p, &input, &[2, 3, 4], 3);
    let beam = beam_search(&p, &input, 10, 3, Some(&mask)).unwrap();
    assert_eq!(beam.len(), 10);
    for (h, (s, t, fin)) in beam.iter().zip(&all) {
        assert_eq!(&h.tokens, t);
        assert_eq!(h.finished, *fin);
        assert_abs_diff_eq!(h.log_prob, s, epsilon = 1e-12);
    }
}

#[test]
fn beam_scores_are_sorted_true_log_probs() {
    for input_feed in [false, true] {
        beam_scores_case(input_feed);
    }
}

fn beam_scores_case(input_feed: bool) {
    let vocab = Vocab::from_chars("abc".chars());
    let p = ModelParams::init(ModelConfig { init_range: 1.0, input_feed, ..toy_config(vocab.len()) }, 5).unwrap();
    let input = vocab.encode_input("abca", crate::corpus::Gender::Neuter).unwrap();
    let mask = vocab.output_mask();
    let beam = beam_search(&p, &input, 12, max_len_for(&input), Some(&mask)).unwrap();
    assert!(!beam.is_empty() && beam.len() <= 12);
    for pair in beam.windows(2) {
        assert!(pair[0].log_prob >= pair[1].log_prob);
    }
    for h in &beam {
        assert_eq!(h.finished, h.tokens.last() == Some(&Vocab::EOS));
        assert!(h.tokens.iter().all(|&t| mask[t]));
        if h.finished {
            let loss = sequence_loss(&p, &input, &TokenSeq(h.tokens.clone()), None).unwrap();
            assert_abs_diff_eq!(-loss * h.tokens.len() as f64, h.log_prob, epsilon = 1e-9);
        }
    }
    let again = beam_search(&p, &input, 12, max_len_for(&input), Some(&mask)).unwrap();
    assert_eq!(beam, again);
}

#[test]
fn beam_rejects_bad_arguments() {
    let p = ModelParams::init(toy_config(6), 1).unwrap();
    let input = seq(&[3, 4, 2]);
    assert!(beam_search(&p, &input, 0, 5, None).is_err());
    assert!(beam_search(&p, &input, 2, 0, None).is_err());
    assert!(beam_search(&p, &input, 2, 5, Some(&[true; 3])).is_err());
    assert!(beam_search(&p, &input, 2, 5, Some(&[false; 6])).is_err());
}

#[test]
fn batched_greedy_matches_single() {
    for input_feed in [false, true] {
        batched_greedy_case(input_feed);
    }
}

fn batched_greedy_case(input_feed: bool) {
    let p = ModelParams::init(ModelConfig { init_range: 1.0, input_feed, ..toy_config(8) }, 3).unwrap();
    let inputs = [seq(&[3, 5, 6, 7, 2]), seq(&[4, 7, 2]), seq(&[5, 5, 6, 2])];
    let refs: Vec<&TokenSeq> = inputs.iter().collect();
    let batch = greedy_decode_batch(&p, &refs, &[6, 3, 5], None).unwrap();
    for ((x, m), b) in inputs.iter().zip([6, 3, 5]).zip(&batch) {
        let single = greedy_decode(&p, x, m, None).unwrap();
        assert_eq!(single.tokens, b.tokens);
        assert_abs_diff_eq!(single.log_prob, b.log_prob, epsilon = 1e-12);
        assert!(b.tokens.len() <= m);
    }
}

#[test]
fn save_and_load_round_trip() {
    let vocab = Vocab::from_chars("abz".chars());
    let p = ModelParams::init(
        ModelConfig { attention: AttentionKind::Additive, input_feed: true, ..toy_config(vocab.len()) },
        42,
    ).unwrap();
    let dir = tempfile::tempdir().unwrap();
    p.save(dir.path(), &vocab, 10).unwrap();
    let (q, v, epoch) = ModelParams::load(dir.path()).unwrap();
    assert_eq!(q, p);
    assert_eq!(v, vocab);
    assert_eq!(epoch, 10);

    let other = Vocab::from_chars("abq".chars());
    std::fs::write(dir.path().join("vocab.txt"), other.to_text()).unwrap();
    assert!(matches!(ModelParams::load(dir.path()), Err(Error::Checkpoint(_))));
    assert!(p.save(dir.path(), &Vocab::from_chars("a".chars()), 1).is_err());
}
