//! Python bindings. Build with `--features extension-module` and import the
//! resulting shared library as `wuglab`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use wuglab::corpus::{builtin_stimuli, merge_gender, parse_gender_map, parse_unimorph, Gender, Noun, NounLexicon, Vocab};
use wuglab::experiments::{encode_examples, train, Architecture, Inflector, TrainConfig, TrainedModel};
use wuglab::morph::{self, PluralClass, Suffix};
use wuglab::seq2seq::ModelParams;

fn err(e: wuglab::Error) -> PyErr {
    match e {
        wuglab::Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn suffix(label: &str) -> PyResult<Suffix> {
    Suffix::from_label(label).ok_or_else(|| PyValueError::new_err(format!("unknown suffix {label:?}")))
}

fn gender(code: &str) -> PyResult<Gender> {
    Gender::from_code(code).ok_or_else(|| PyValueError::new_err(format!("unknown gender {code:?}")))
}

/// Returns `(suffix, umlaut)` for a singular/plural pair.
#[pyfunction]
fn classify_plural(singular: &str, plural: &str) -> (&'static str, bool) {
    let c = morph::classify_plural(singular, plural);
    (c.suffix.label(), c.umlaut)
}

#[pyfunction]
fn umlautize(stem: &str) -> PyResult<String> {
    morph::umlautize(stem).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (singular, suffix_label, umlaut=false))]
fn apply_class(singular: &str, suffix_label: &str, umlaut: bool) -> PyResult<String> {
    let class = PluralClass::new(suffix(suffix_label)?, umlaut)
        .ok_or_else(|| PyValueError::new_err(format!("{suffix_label} does not take umlaut")))?;
    morph::apply_class(singular, class).map_err(err)
}

/// `(suffix, umlaut, form)` for every candidate plural.
#[pyfunction]
fn candidate_forms(singular: &str) -> Vec<(&'static str, bool, String)> {
    morph::candidate_forms(singular).into_iter().map(|(c, f)| (c.suffix.label(), c.umlaut, f)).collect()
}

#[pyfunction]
fn syllable_count(orth: &str) -> usize {
    morph::syllable_count(orth)
}

/// `None` when either input is constant.
#[pyfunction]
fn spearman_rho(x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<f64>> {
    wuglab::experiments::spearman_rho(&x, &y).map_err(err)
}

/// Class counts per corpus view: `{view: {class: count, ..., "N": n}}`.
#[pyfunction]
fn corpus_stats(corpus: PathBuf, genders: PathBuf) -> PyResult<BTreeMap<String, BTreeMap<String, usize>>> {
    let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| PyIOError::new_err(format!("{}: {e}", p.display())));
    let pairs = parse_unimorph(&read(&corpus)?).map_err(err)?;
    let map = parse_gender_map(&read(&genders)?).map_err(err)?;
    let lexicon = merge_gender(&pairs.pairs, &map).lexicon;
    let stimuli: Vec<String> = builtin_stimuli().into_iter().map(|s| s.orth).collect();
    Ok(morph::corpus_views(&lexicon.entries, &stimuli)
        .into_iter()
        .map(|(view, d)| {
            let mut row: BTreeMap<String, usize> =
                Suffix::ALL.iter().map(|s| (s.label().to_string(), d.count(*s))).collect();
            row.insert("N".into(), d.n);
            (view.to_string(), row)
        })
        .collect())
}

/// An encoder-decoder with its vocabulary.
#[pyclass(name = "Model")]
struct PyModel {
    params: ModelParams,
    vocab: Vocab,
    epochs: usize,
}

fn nouns(rows: Vec<(String, String, String)>) -> PyResult<Vec<Noun>> {
    rows.into_iter().map(|(l, p, g)| Noun::new(l, p, gender(&g)?).map_err(err)).collect()
}

#[pymethods]
impl PyModel {
    /// Fresh weights for a vocabulary covering `nouns` (lemma, plural,
    /// gender code) and the wug stimuli.
    #[new]
    #[pyo3(signature = (nouns, seed=1, emb_dim=300, dec_emb_dim=300, hidden=100, layers=2))]
    fn new(
        nouns: Vec<(String, String, String)>,
        seed: u64,
        emb_dim: usize,
        dec_emb_dim: usize,
        hidden: usize,
        layers: usize,
    ) -> PyResult<Self> {
        let nouns = self::nouns(nouns)?;
        let stimuli = builtin_stimuli();
        let vocab = Vocab::build(&nouns, stimuli.iter().map(|s| s.orth.as_str()));
        let arch = Architecture { emb_dim, dec_emb_dim, hidden, layers, ..Architecture::default() };
        let params = ModelParams::init(arch.config(vocab.len()), seed).map_err(err)?;
        Ok(PyModel { params, vocab, epochs: 0 })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.params.seed
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.params.param_count()
    }

    /// Trains on `nouns` and returns `(epoch, train_loss, dev_accuracy)` per epoch.
    #[pyo3(signature = (nouns, dev=Vec::new(), epochs=10, batch_size=20, dropout=0.3))]
    fn train(
        &mut self,
        py: Python<'_>,
        nouns: Vec<(String, String, String)>,
        dev: Vec<(String, String, String)>,
        epochs: usize,
        batch_size: usize,
        dropout: f64,
    ) -> PyResult<Vec<(usize, f64, f64)>> {
        let train_set = encode_examples(&self::nouns(nouns)?, &self.vocab).map_err(err)?;
        let dev_set = encode_examples(&self::nouns(dev)?, &self.vocab).map_err(err)?;
        let config = TrainConfig { epochs, batch_size, dropout, seeds: vec![self.params.seed], ..TrainConfig::default() };
        let params = self.params.clone();
        let vocab = &self.vocab;
        let outcome = py
            .detach(|| train(params, &train_set, &dev_set, vocab, &config, &mut |_| {}))
            .map_err(err)?;
        self.params = outcome.params;
        self.epochs += epochs;
        Ok(outcome.history.iter().map(|r| (r.epoch, r.train_loss, r.dev_accuracy)).collect())
    }

    /// The `k` best plurals with their log-probabilities.
    #[pyo3(signature = (lemma, gender, k=1, beam=12))]
    fn inflect(&self, lemma: &str, gender: &str, k: usize, beam: usize) -> PyResult<Vec<(String, f64)>> {
        let model = TrainedModel { params: self.params.clone(), vocab: self.vocab.clone(), beam_width: beam.max(k) };
        let preds = model.inflect(lemma, self::gender(gender)?, k).map_err(err)?;
        Ok(preds.into_iter().map(|p| (p.form, p.log_prob)).collect())
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        std::fs::create_dir_all(&dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
        self.params.save(&dir, &self.vocab, self.epochs).map_err(err)
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let (params, vocab, epochs) = ModelParams::load(&dir).map_err(err)?;
        Ok(PyModel { params, vocab, epochs })
    }
}

/// Reads a lexicon TSV as `(lemma, plural, gender)` rows.
#[pyfunction]
fn read_lexicon(path: PathBuf) -> PyResult<Vec<(String, String, String)>> {
    let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
    let lex = NounLexicon::from_tsv(&text).map_err(err)?;
    Ok(lex.entries.into_iter().map(|n| (n.lemma, n.plural, n.gender.code().to_string())).collect())
}

#[pymodule]
#[pyo3(name = "wuglab")]
fn wuglab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(classify_plural, m)?)?;
    m.add_function(wrap_pyfunction!(umlautize, m)?)?;
    m.add_function(wrap_pyfunction!(apply_class, m)?)?;
    m.add_function(wrap_pyfunction!(candidate_forms, m)?)?;
    m.add_function(wrap_pyfunction!(syllable_count, m)?)?;
    m.add_function(wrap_pyfunction!(spearman_rho, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats, m)?)?;
    m.add_function(wrap_pyfunction!(read_lexicon, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
