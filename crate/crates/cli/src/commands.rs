use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use wuglab::corpus::{
    builtin_stimuli, merge_gender, parse_gender_map, parse_stimuli, parse_unimorph, NounLexicon, SplitCounts, Vocab,
    WugItem,
};
use wuglab::experiments::{
    accuracy, compare_model_speaker, encode_examples, parse_speaker_csv, predict, prf_from_predictions, rank_profile,
    rating_stats, speaker_csv, speaker_item_productions, speaker_production_stats, subsample, survey_table_records,
    sweep as run_sweep, wug_productions, Architecture, EpochRecord, Example, ExperimentData, PrfTable, Report,
    SeedAccuracy, TrainConfig, TrainedModel,
};
use wuglab::morph::{corpus_views, distribution_csv};
use wuglab::numerics::AdadeltaConfig;
use wuglab::seq2seq::ModelParams;

use crate::manifest;
use crate::settings::{format_seeds, parse_seeds, Settings};
use crate::CliError;

const SETTINGS_FILE: &str = "settings.txt";
const DATA_FILE: &str = "data.tsv";
const MODELS_DIR: &str = "models";

fn read(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{path}: {e}")))
}

fn run_dir(s: &Settings) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(s.str("run").unwrap_or("run"));
    fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

/// Collects written files so they can be checksummed into the manifest.
struct Outputs {
    run: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(run: &Path) -> Outputs {
        Outputs { run: run.to_path_buf(), written: Vec::new() }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.run.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn add(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    fn finish(self, command: &str, s: &Settings, seeds: &[u64]) -> Result<(), CliError> {
        manifest::record(&self.run, command, s, seeds, &self.written)
    }
}

fn stimuli(s: &Settings) -> Result<Vec<WugItem>, CliError> {
    match s.str("stimuli") {
        Some(p) => Ok(parse_stimuli(&read(p)?)?),
        None => Ok(builtin_stimuli()),
    }
}

fn lexicon_from_corpus(s: &Settings) -> Result<Option<(NounLexicon, usize)>, CliError> {
    match (s.str("corpus"), s.str("gender")) {
        (Some(c), Some(g)) => {
            let pairs = parse_unimorph(&read(c)?)?;
            let genders = parse_gender_map(&read(g)?)?;
            let merged = merge_gender(&pairs.pairs, &genders);
            let mut lexicon = merged.lexicon;
            lexicon.provenance = vec![c.to_string(), g.to_string()];
            Ok(Some((lexicon, merged.dropped)))
        }
        (None, None) => Ok(None),
        _ => Err(CliError::Usage("--corpus and --gender must be given together".into())),
    }
}

/// `--lexicon`, else `--corpus` with `--gender`, else the run's ingested
/// lexicon; then `--limit` if set.
fn load_lexicon(s: &Settings, run: &Path) -> Result<NounLexicon, CliError> {
    let lexicon = if let Some(p) = s.str("lexicon") {
        NounLexicon::from_tsv(&read(p)?)?
    } else if let Some((lex, _)) = lexicon_from_corpus(s)? {
        lex
    } else {
        let p = run.join("lexicon.tsv");
        if !p.exists() {
            return Err(CliError::Data(format!(
                "no lexicon: pass --lexicon or --corpus with --gender, or run ingest into {}",
                run.display()
            )));
        }
        NounLexicon::from_tsv(&read(&p.to_string_lossy())?)?
    };
    match s.parse::<usize>("limit")? {
        Some(n) => Ok(subsample(&lexicon, n, s.parse_or("limit_seed", 0)?)?),
        None => Ok(lexicon),
    }
}

fn split_counts(s: &Settings, n: usize) -> Result<SplitCounts, CliError> {
    let Some(text) = s.str("split") else { return Ok(SplitCounts::for_size(n)) };
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid split {text:?}: expected train,dev,test")))?;
    match parts[..] {
        [train, dev, test] => Ok(SplitCounts { train, dev, test }),
        _ => Err(CliError::Usage(format!("invalid split {text:?}: expected train,dev,test"))),
    }
}

fn train_config(s: &Settings, seeds: Vec<u64>, split: SplitCounts) -> Result<TrainConfig, CliError> {
    let d = TrainConfig::default();
    let a = Architecture::default();
    let architecture = Architecture {
        emb_dim: s.parse_or("emb_dim", a.emb_dim)?,
        dec_emb_dim: s.parse_or("dec_emb_dim", a.dec_emb_dim)?,
        hidden: s.parse_or("hidden", a.hidden)?,
        layers: s.parse_or("layers", a.layers)?,
        bidirectional: s.parse_or("bidirectional", a.bidirectional)?,
        attention: s.parse_or("attention", a.attention)?,
        init_range: s.parse_or("init_range", a.init_range)?,
        input_feed: s.parse_or("input_feed", a.input_feed)?,
    };
    let config = TrainConfig {
        batch_size: s.parse_or("batch_size", d.batch_size)?,
        epochs: s.parse_or("epochs", d.epochs)?,
        dropout: s.parse_or("dropout", d.dropout)?,
        adadelta: AdadeltaConfig {
            rho: s.parse_or("adadelta_rho", d.adadelta.rho)?,
            eps: s.parse_or("adadelta_eps", d.adadelta.eps)?,
        },
        clip_norm: s.parse_or("clip_norm", d.clip_norm)?,
        decay: d.decay,
        gradient_norm: s.parse_or("gradient_norm", d.gradient_norm)?,
        seeds,
        split,
        split_seed: s.parse_or("split_seed", d.split_seed)?,
        dev_beam: s.parse_or("dev_beam", d.dev_beam)?,
        beam_width: s.parse_or("beam", d.beam_width)?,
        architecture,
    };
    config.validate()?;
    Ok(config)
}

fn jobs(s: &Settings) -> Result<usize, CliError> {
    let j: usize = s.parse_or("jobs", 1)?;
    if j == 0 {
        return Err(CliError::Usage("jobs must be at least 1".into()));
    }
    Ok(j)
}

pub fn ingest(s: &Settings) -> Result<(), CliError> {
    let run = run_dir(s)?;
    let (lexicon, dropped) =
        lexicon_from_corpus(s)?.ok_or_else(|| CliError::Usage("ingest needs --corpus and --gender".into()))?;
    let mut out = Outputs::new(&run);
    out.write("lexicon.tsv", &lexicon.to_tsv())?;
    println!("{} nouns ({} without gender dropped)", lexicon.len(), dropped);
    out.finish("ingest", s, &[])
}

pub fn stats(s: &Settings) -> Result<(), CliError> {
    let run = run_dir(s)?;
    let lexicon = load_lexicon(s, &run)?;
    let items = stimuli(s)?;
    let orths: Vec<&str> = items.iter().map(|i| i.orth.as_str()).collect();
    let csv = distribution_csv(&corpus_views(&lexicon.entries, &orths));
    let mut out = Outputs::new(&run);
    out.write("stats.csv", &csv)?;
    print!("{csv}");
    out.finish("stats", s, &[])
}

pub fn train(s: &Settings) -> Result<(), CliError> {
    let seed: u64 = s.parse_or("seed", 1)?;
    fit(s, vec![seed], "train")
}

pub fn sweep(s: &Settings) -> Result<(), CliError> {
    let seeds = parse_seeds(s.str("seeds").unwrap_or("1..25"))?;
    fit(s, seeds, "sweep")
}

fn seed_dir(seed: u64) -> String {
    format!("{MODELS_DIR}/seed-{seed}")
}

fn history_csv(histories: &[(u64, Vec<EpochRecord>)]) -> String {
    Report { histories: histories.to_vec(), ..Report::default() }
        .csv_files()
        .into_iter()
        .find(|(name, _)| name == "history.csv")
        .map(|(_, body)| body)
        .unwrap_or_default()
}

fn fit(s: &Settings, seeds: Vec<u64>, command: &str) -> Result<(), CliError> {
    let run = run_dir(s)?;
    let lexicon = load_lexicon(s, &run)?;
    let items = stimuli(s)?;
    let split = split_counts(s, lexicon.len())?;
    let config = train_config(s, seeds.clone(), split)?;
    let jobs = jobs(s)?;
    let data = ExperimentData::prepare(&lexicon, split, config.split_seed, &items)?;
    eprintln!(
        "{} nouns: train {}, dev {}, test {}; seeds {}",
        lexicon.len(),
        data.train.len(),
        data.dev.len(),
        data.test.len(),
        format_seeds(&seeds)
    );

    let progress = |seed: u64, r: &EpochRecord| {
        eprintln!("seed {seed} epoch {} loss {:.4} dev {:.2}%", r.epoch, r.train_loss, r.dev_accuracy);
    };
    let result = run_sweep(&data, &config, jobs, &progress)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    let mut snapshot = s.clone();
    snapshot.set("seeds", format_seeds(&seeds));
    snapshot.set("split", format!("{},{},{}", split.train, split.dev, split.test));
    snapshot.set("split_seed", config.split_seed.to_string());
    let a = &config.architecture;
    let effective = [
        ("batch_size", config.batch_size.to_string()),
        ("epochs", config.epochs.to_string()),
        ("dropout", config.dropout.to_string()),
        ("adadelta_rho", config.adadelta.rho.to_string()),
        ("adadelta_eps", config.adadelta.eps.to_string()),
        ("clip_norm", config.clip_norm.to_string()),
        ("gradient_norm", config.gradient_norm.to_string()),
        ("dev_beam", config.dev_beam.to_string()),
        ("emb_dim", a.emb_dim.to_string()),
        ("dec_emb_dim", a.dec_emb_dim.to_string()),
        ("hidden", a.hidden.to_string()),
        ("layers", a.layers.to_string()),
        ("attention", a.attention.to_string()),
        ("bidirectional", a.bidirectional.to_string()),
        ("init_range", a.init_range.to_string()),
        ("input_feed", a.input_feed.to_string()),
    ];
    for (k, v) in effective {
        snapshot.set(k, v);
    }
    snapshot.remove("run");

    let mut out = Outputs::new(&run);
    out.write(DATA_FILE, &lexicon.to_tsv())?;
    out.write("vocab.txt", &data.vocab.to_text())?;
    out.write(SETTINGS_FILE, &snapshot.to_text())?;
    let mut histories = Vec::new();
    for (seed, outcome) in &result.models {
        let dir = run.join(seed_dir(*seed));
        outcome.params.save(&dir, &data.vocab, config.epochs)?;
        for f in ["model.ckpt", "model.meta", "vocab.txt"] {
            out.add(dir.join(f));
        }
        out.write(
            &format!("{}/history.json", seed_dir(*seed)),
            &(serde_json::to_string_pretty(&outcome.history)? + "\n"),
        )?;
        histories.push((*seed, outcome.history.clone()));
    }
    out.write("history.csv", &history_csv(&histories))?;
    let trained: Vec<u64> = result.models.keys().copied().collect();
    out.finish(command, &snapshot, &trained)?;
    if !result.failures.is_empty() {
        return Err(CliError::Data(format!("{} of {} seeds failed", result.failures.len(), seeds.len())));
    }
    Ok(())
}

/// The run's settings snapshot under the current settings, except that the
/// data split always comes from the snapshot.
fn run_settings(s: &Settings, run: &Path) -> Result<Settings, CliError> {
    let path = run.join(SETTINGS_FILE);
    let snapshot = match fs::read_to_string(&path) {
        Ok(text) => crate::settings::parse_config(&text)?,
        Err(_) => BTreeMap::new(),
    };
    let mut merged = Settings::from_pairs(snapshot.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    for (k, v) in s.iter() {
        if !matches!(k, "split" | "split_seed" | "limit" | "limit_seed" | "lexicon" | "corpus" | "gender") {
            merged.set(k, v);
        }
    }
    merged.remove("run");
    Ok(merged)
}

struct Loaded {
    seed: u64,
    params: ModelParams,
    vocab: Vocab,
    history: Vec<EpochRecord>,
}

fn load_models(run: &Path) -> Result<Vec<Loaded>, CliError> {
    let dir = run.join(MODELS_DIR);
    let mut seeds = Vec::new();
    if let Ok(entries) = fs::read_dir(&dir) {
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().to_string();
            if let Some(seed) = name.strip_prefix("seed-").and_then(|n| n.parse::<u64>().ok()) {
                if e.path().join("model.ckpt").exists() {
                    seeds.push(seed);
                }
            }
        }
    }
    if seeds.is_empty() {
        return Err(CliError::Data(format!("no checkpoints found under {}", dir.display())));
    }
    seeds.sort_unstable();
    seeds
        .into_iter()
        .map(|seed| {
            let d = run.join(seed_dir(seed));
            let (params, vocab, _) = ModelParams::load(&d)?;
            let history = match fs::read_to_string(d.join("history.json")) {
                Ok(t) => serde_json::from_str(&t)?,
                Err(_) => Vec::new(),
            };
            Ok(Loaded { seed, params, vocab, history })
        })
        .collect()
}

fn ensemble(models: &[Loaded], beam: usize) -> Vec<TrainedModel> {
    models
        .iter()
        .map(|m| TrainedModel { params: m.params.clone(), vocab: m.vocab.clone(), beam_width: beam })
        .collect()
}

fn wug_parts(s: &Settings, models: &[Loaded], items: &[WugItem], report: &mut Report) -> Result<(), CliError> {
    let beam: usize = s.parse_or("beam", 12)?;
    let k: usize = s.parse_or("rank_k", 5)?;
    if beam == 0 || k == 0 {
        return Err(CliError::Usage("beam and rank_k must be positive".into()));
    }
    let trained = ensemble(models, beam.max(k));
    let refs: Vec<&TrainedModel> = trained.iter().collect();
    report.wug = Some(wug_productions(&refs, items)?);
    report.rank_profile = Some(rank_profile(&refs, items, k)?);
    Ok(())
}

fn write_report(out: &mut Outputs, report: &Report, settings: Option<&Settings>) -> Result<(), CliError> {
    for (name, body) in report.csv_files() {
        out.write(&name, &body)?;
    }
    if let Some(s) = settings {
        let mut json = report.to_json();
        let snapshot: serde_json::Map<String, serde_json::Value> =
            s.iter().map(|(k, v)| (k.to_string(), serde_json::Value::String(v.to_string()))).collect();
        json["settings"] = serde_json::Value::Object(snapshot);
        out.write("report.json", &(serde_json::to_string_pretty(&json)? + "\n"))?;
    }
    Ok(())
}

pub fn wug(s: &Settings) -> Result<(), CliError> {
    let run = run_dir(s)?;
    let s = run_settings(s, &run)?;
    let models = load_models(&run)?;
    let items = stimuli(&s)?;
    let mut report = Report::default();
    wug_parts(&s, &models, &items, &mut report)?;
    if let Some(w) = &report.wug {
        let (r, nr) = (w.category_percent(true), w.category_percent(false));
        println!("class,pct_r,pct_nr");
        for suffix in wuglab::morph::Suffix::ALL {
            println!("{},{:.1},{:.1}", suffix.label(), r[suffix.index()], nr[suffix.index()]);
        }
    }
    let mut out = Outputs::new(&run);
    write_report(&mut out, &report, None)?;
    let seeds: Vec<u64> = models.iter().map(|m| m.seed).collect();
    out.finish("wug", &s, &seeds)
}

pub fn speakers(s: &Settings, synthesize: bool) -> Result<(), CliError> {
    let run = run_dir(s)?;
    let items = stimuli(s)?;
    let path = s.str("speakers").ok_or_else(|| CliError::Usage("speakers needs --speakers".into()))?;
    if synthesize {
        fs::write(path, speaker_csv(&survey_table_records(&items)?))?;
    }
    let records = parse_speaker_csv(&read(path)?)?;
    let report = Report {
        speaker_production: Some(speaker_production_stats(&records, &items)?),
        speaker_ratings: Some(rating_stats(&records, &items)?),
        ..Report::default()
    };
    let mut out = Outputs::new(&run);
    write_report(&mut out, &report, None)?;
    if let Some((_, body)) = report.csv_files().into_iter().find(|(n, _)| n == "survey.csv") {
        print!("{body}");
    }
    out.finish("speakers", s, &[])
}

/// `(train, dev, test)` examples of the run's stored data and split.
fn run_examples(s: &Settings, run: &Path, vocab: &Vocab) -> Result<[Vec<Example>; 3], CliError> {
    let path = run.join(DATA_FILE);
    let lexicon = NounLexicon::from_tsv(&read(&path.to_string_lossy())?)?;
    let split = split_counts(s, lexicon.len())?;
    let assignment = wuglab::corpus::make_splits(&lexicon, split, s.parse_or("split_seed", 0)?)?;
    Ok([
        encode_examples(&lexicon.select(&assignment.train), vocab)?,
        encode_examples(&lexicon.select(&assignment.dev), vocab)?,
        encode_examples(&lexicon.select(&assignment.test), vocab)?,
    ])
}

pub fn report(s: &Settings) -> Result<(), CliError> {
    let run = run_dir(s)?;
    let s = run_settings(s, &run)?;
    let models = load_models(&run)?;
    let items = stimuli(&s)?;
    let eval_beam: usize = s.parse_or("eval_beam", 12)?;
    if eval_beam == 0 {
        return Err(CliError::Usage("eval_beam must be positive".into()));
    }
    let jobs = jobs(&s)?;
    let vocab = &models[0].vocab;
    if models.iter().any(|m| m.vocab.hash() != vocab.hash()) {
        return Err(CliError::Data("checkpoints use different vocabularies".into()));
    }
    let [train_set, dev_set, test_set] = run_examples(&s, &run, vocab)?;

    type Scored = (SeedAccuracy, PrfTable);
    let evaluate = |m: &Loaded| -> Result<Scored, CliError> {
        let score = |set: &[Example]| -> Result<(f64, Vec<String>), CliError> {
            if set.is_empty() {
                return Ok((0.0, Vec::new()));
            }
            let preds = predict(&m.params, vocab, set, eval_beam)?;
            Ok((accuracy(&preds, set)?, preds))
        };
        let (train, _) = score(&train_set)?;
        let (dev, _) = score(&dev_set)?;
        let (test, preds) = score(&test_set)?;
        let prf = prf_from_predictions(&preds, &test_set)?;
        Ok((SeedAccuracy { seed: m.seed, train, dev, test }, prf))
    };
    let queue = Mutex::new(0usize);
    let results: Mutex<BTreeMap<usize, Result<Scored, CliError>>> = Mutex::new(BTreeMap::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(models.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut q = queue.lock().unwrap();
                    let i = *q;
                    *q += 1;
                    i
                };
                let Some(m) = models.get(i) else { break };
                let r = evaluate(m);
                results.lock().unwrap().insert(i, r);
            });
        }
    });
    let mut report = Report {
        split_sizes: Some((train_set.len(), dev_set.len(), test_set.len())),
        ..Report::default()
    };
    let mut tables = Vec::new();
    for (_, r) in results.into_inner().unwrap() {
        let (acc, prf) = r?;
        report.accuracy.push(acc);
        tables.push(prf);
    }
    report.prf = PrfTable::mean(&tables);
    report.histories = models.iter().filter(|m| !m.history.is_empty()).map(|m| (m.seed, m.history.clone())).collect();
    wug_parts(&s, &models, &items, &mut report)?;
    if let Some(path) = s.str("speakers") {
        let records = parse_speaker_csv(&read(path)?)?;
        let speaker_items = speaker_item_productions(&records, &items)?;
        if let Some(w) = &report.wug {
            report.rho = Some(compare_model_speaker(w, &speaker_items)?);
        }
        report.speaker_production = Some(speaker_production_stats(&records, &items)?);
        report.speaker_ratings = Some(rating_stats(&records, &items)?);
    }
    if let Some(m) = report.mean_accuracy() {
        println!("mean exact match: train {:.1}%, dev {:.1}%, test {:.1}%", m.train, m.dev, m.test);
    }
    let mut out = Outputs::new(&run);
    write_report(&mut out, &report, Some(&s))?;
    let seeds: Vec<u64> = models.iter().map(|m| m.seed).collect();
    out.finish("report", &s, &seeds)
}
