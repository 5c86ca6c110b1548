use wuglab::corpus::{builtin_stimuli, Gender, Noun, NounLexicon, SplitCounts};
use wuglab::experiments::{
    exact_accuracy, predict, rank_profile, sweep, wug_productions, Architecture, ExperimentData, TrainConfig,
    TrainedModel,
};
use wuglab::seq2seq::{AttentionKind, ModelParams};

const NOUNS: &[(&str, &str, char)] = &[
    ("Hund", "Hunde", 'm'),
    ("Tag", "Tage", 'm'),
    ("Tisch", "Tische", 'm'),
    ("Katze", "Katzen", 'f'),
    ("Blume", "Blumen", 'f'),
    ("Frau", "Frauen", 'f'),
    ("Kind", "Kinder", 'n'),
    ("Bild", "Bilder", 'n'),
    ("Auto", "Autos", 'n'),
    ("Kino", "Kinos", 'n'),
    ("Lehrer", "Lehrer", 'm'),
    ("Messer", "Messer", 'n'),
];

fn lexicon() -> NounLexicon {
    NounLexicon {
        entries: NOUNS
            .iter()
            .map(|&(l, p, g)| Noun::new(l, p, Gender::from_code(&g.to_string()).unwrap()).unwrap())
            .collect(),
        provenance: Vec::new(),
    }
}

fn config(seeds: Vec<u64>) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        epochs: 150,
        dropout: 0.0,
        seeds,
        split: SplitCounts { train: 10, dev: 1, test: 1 },
        split_seed: 3,
        dev_beam: 1,
        beam_width: 4,
        architecture: Architecture {
            emb_dim: 8,
            dec_emb_dim: 8,
            hidden: 16,
            layers: 1,
            bidirectional: false,
            attention: AttentionKind::Bilinear,
            init_range: 0.1,
            input_feed: false,
        },
        ..TrainConfig::default()
    }
}

#[test]
fn toy_sweep_learns_and_reports() {
    let stimuli = builtin_stimuli();
    let data = ExperimentData::prepare(&lexicon(), SplitCounts { train: 10, dev: 1, test: 1 }, 3, &stimuli).unwrap();
    let cfg = config(vec![1, 2]);
    let result = sweep(&data, &cfg, 2, &|_, _| {}).unwrap();
    assert!(result.failures.is_empty());
    assert_eq!(result.models.keys().copied().collect::<Vec<_>>(), [1, 2]);

    for outcome in result.models.values() {
        let h = &outcome.history;
        assert_eq!(h.len(), 150);
        assert!(h[149].train_loss < h[0].train_loss / 4.0, "loss {} -> {}", h[0].train_loss, h[149].train_loss);
        assert!(exact_accuracy(&outcome.params, &data.vocab, &data.train, 4).unwrap() >= 70.0);
    }

    let models: Vec<TrainedModel> = result
        .models
        .values()
        .map(|o| TrainedModel { params: o.params.clone(), vocab: data.vocab.clone(), beam_width: 4 })
        .collect();
    let refs: Vec<&TrainedModel> = models.iter().collect();
    let report = wug_productions(&refs, &stimuli).unwrap();
    assert_eq!(report.items.len(), 24);
    assert_eq!(report.seeds, [1, 2]);
    assert!(report.items.iter().all(|i| i.total() == 2));
    let profile = rank_profile(&refs, &stimuli, 3).unwrap();
    assert!((profile.percent(1).iter().sum::<f64>() - 100.0).abs() < 1e-9);
}

#[test]
fn jobs_do_not_change_weights() {
    let data = ExperimentData::prepare(&lexicon(), SplitCounts { train: 10, dev: 1, test: 1 }, 3, &[]).unwrap();
    let mut cfg = config(vec![5, 6, 7]);
    cfg.epochs = 3;
    cfg.dropout = 0.3;
    let serial = sweep(&data, &cfg, 1, &|_, _| {}).unwrap();
    let parallel = sweep(&data, &cfg, 3, &|_, _| {}).unwrap();
    for seed in [5, 6, 7] {
        assert_eq!(serial.models[&seed].params, parallel.models[&seed].params);
        assert_eq!(serial.models[&seed].history, parallel.models[&seed].history);
    }
}

#[test]
fn saved_model_predicts_identically() {
    let data = ExperimentData::prepare(&lexicon(), SplitCounts { train: 10, dev: 1, test: 1 }, 3, &[]).unwrap();
    let mut cfg = config(vec![9]);
    cfg.epochs = 5;
    let outcome = sweep(&data, &cfg, 1, &|_, _| {}).unwrap().models.remove(&9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    outcome.params.save(dir.path(), &data.vocab, 5).unwrap();
    let (params, vocab, epoch) = ModelParams::load(dir.path()).unwrap();
    assert_eq!(epoch, 5);
    assert_eq!(vocab, data.vocab);
    assert_eq!(params, outcome.params);
    assert_eq!(
        predict(&params, &vocab, &data.train, 4).unwrap(),
        predict(&outcome.params, &data.vocab, &data.train, 4).unwrap()
    );
}
