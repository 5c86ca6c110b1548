use proptest::prelude::*;
use wuglab::corpus::{TokenSeq, Vocab};
use wuglab::seq2seq::{beam_search, greedy_decode, AttentionKind, ModelConfig, ModelParams};

fn toy(seed: u64) -> ModelParams {
    let config = ModelConfig {
        vocab_size: 8,
        emb_dim: 3,
        dec_emb_dim: 3,
        hidden: 4,
        layers: 2,
        bidirectional: false,
        attention: AttentionKind::Bilinear,
        init_range: 1.0,
        input_feed: false,
    };
    ModelParams::init(config, seed).unwrap()
}

fn input() -> impl Strategy<Value = TokenSeq> {
    proptest::collection::vec(5usize..8, 1..4).prop_map(|chars| {
        let mut v = vec![3];
        v.extend(chars);
        v.push(Vocab::EOS);
        TokenSeq(v)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beam_output_invariants(seed in 0u64..1000, x in input(), width in 1usize..6) {
        let p = toy(seed);
        let hyps = beam_search(&p, &x, width, 5, None).unwrap();
        prop_assert!(!hyps.is_empty() && hyps.len() <= width);
        for w in hyps.windows(2) {
            prop_assert!(w[0].log_prob >= w[1].log_prob);
        }
        for h in &hyps {
            prop_assert!(h.log_prob <= 0.0);
            prop_assert_eq!(h.finished, h.tokens.last() == Some(&Vocab::EOS));
            prop_assert!(h.tokens.len() <= 5);
            prop_assert!(h.tokens[..h.tokens.len().saturating_sub(1)].iter().all(|&t| t != Vocab::EOS));
        }
    }

    #[test]
    fn width_one_is_greedy(seed in 0u64..1000, x in input()) {
        let p = toy(seed);
        let g = greedy_decode(&p, &x, 5, None).unwrap();
        let b1 = beam_search(&p, &x, 1, 5, None).unwrap();
        prop_assert_eq!(&b1[0].tokens, &g.tokens);
    }

    // Narrow beams are not monotone in width, but none can beat a beam
    // wide enough to keep every prefix (8^3 sequences of length 3).
    #[test]
    fn exhaustive_beam_bounds_narrow_beams(seed in 0u64..1000, x in input(), width in 1usize..12) {
        let p = toy(seed);
        let all = beam_search(&p, &x, 512, 3, None).unwrap();
        let narrow = beam_search(&p, &x, width, 3, None).unwrap();
        prop_assert!(all[0].log_prob >= narrow[0].log_prob - 1e-12);
    }

    #[test]
    fn decoding_is_deterministic(seed in 0u64..1000, x in input()) {
        let p = toy(seed);
        prop_assert_eq!(beam_search(&p, &x, 4, 5, None).unwrap(), beam_search(&p, &x, 4, 5, None).unwrap());
    }
}
