use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::numerics::{read_checkpoint, write_checkpoint, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    /// `score_t = hᵀ W e_t`
    Bilinear,
    /// `score_t = vᵀ tanh(Wq h + Wk e_t)`
    Additive,
}

impl fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionKind::Bilinear => "bilinear",
            AttentionKind::Additive => "additive",
        })
    }
}

impl FromStr for AttentionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" | "general" => Ok(AttentionKind::Bilinear),
            "additive" | "mlp" => Ok(AttentionKind::Additive),
            _ => Err(Error::Argument(format!("unknown attention kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub dec_emb_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    /// Each direction gets `hidden / 2` units; outputs are concatenated.
    pub bidirectional: bool,
    pub attention: AttentionKind,
    pub init_range: f64,
    /// Attentional layer `tanh([h; context]·Wc)` before the output
    /// projection, its value also fed into the next step's first decoder
    /// layer.
    pub input_feed: bool,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            emb_dim: 300,
            dec_emb_dim: 300,
            hidden: 100,
            layers: 2,
            bidirectional: false,
            attention: AttentionKind::Bilinear,
            init_range: 0.1,
            input_feed: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= Vocab::EOS {
            return Err(Error::Argument("vocabulary must contain the special tokens".into()));
        }
        if self.emb_dim == 0 || self.dec_emb_dim == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(Error::Argument("model dimensions must be positive".into()));
        }
        if self.bidirectional && !self.hidden.is_multiple_of(2) {
            return Err(Error::Argument("bidirectional encoder needs an even hidden size".into()));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return Err(Error::Argument("init range must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Hidden units per encoder direction.
    pub fn enc_units(&self) -> usize {
        if self.bidirectional {
            self.hidden / 2
        } else {
            self.hidden
        }
    }

    /// Parameter names and shapes in storage order.
    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let h = self.hidden;
        let u = self.enc_units();
        let v = self.vocab_size;
        let mut out = vec![("enc.emb".to_string(), vec![v, self.emb_dim])];
        let dirs: &[&str] = if self.bidirectional { &["fwd", "bwd"] } else { &[""] };
        for k in 0..self.layers {
            let input = if k == 0 { self.emb_dim } else { h };
            for d in dirs {
                let p = if d.is_empty() { format!("enc.l{k}") } else { format!("enc.l{k}.{d}") };
                out.push((format!("{p}.w"), vec![input + u, 4 * u]));
                out.push((format!("{p}.b"), vec![1, 4 * u]));
            }
        }
        out.push(("dec.emb".into(), vec![v, self.dec_emb_dim]));
        for k in 0..self.layers {
            let input = match k {
                0 if self.input_feed => self.dec_emb_dim + h,
                0 => self.dec_emb_dim,
                _ => h,
            };
            out.push((format!("dec.l{k}.w"), vec![input + h, 4 * h]));
            out.push((format!("dec.l{k}.b"), vec![1, 4 * h]));
        }
        match self.attention {
            AttentionKind::Bilinear => out.push(("attn.w".into(), vec![h, h])),
            AttentionKind::Additive => {
                out.push(("attn.wq".into(), vec![h, h]));
                out.push(("attn.wk".into(), vec![h, h]));
                out.push(("attn.v".into(), vec![h, 1]));
            }
        }
        if self.input_feed {
            out.push(("attn.out.w".into(), vec![2 * h, h]));
        }
        out.push(("out.w".into(), vec![if self.input_feed { h } else { 2 * h }, v]));
        out.push(("out.b".into(), vec![1, v]));
        out
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    fn to_pairs(self) -> Vec<(&'static str, String)> {
        vec![
            ("vocab_size", self.vocab_size.to_string()),
            ("emb_dim", self.emb_dim.to_string()),
            ("dec_emb_dim", self.dec_emb_dim.to_string()),
            ("hidden", self.hidden.to_string()),
            ("layers", self.layers.to_string()),
            ("bidirectional", self.bidirectional.to_string()),
            ("attention", self.attention.to_string()),
            ("init_range", self.init_range.to_string()),
            ("input_feed", self.input_feed.to_string()),
        ]
    }
}

/// Parameter indices grouped by role.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub enc_emb: usize,
    /// `[layer][direction] -> (w, b)`
    pub enc: Vec<Vec<(usize, usize)>>,
    pub dec_emb: usize,
    pub dec: Vec<(usize, usize)>,
    pub attn: AttnLayout,
    pub attn_out: Option<usize>,
    pub out_w: usize,
    pub out_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum AttnLayout {
    Bilinear { w: usize },
    Additive { wq: usize, wk: usize, v: usize },
}

impl Layout {
    fn new(config: &ModelConfig) -> Layout {
        let dirs = if config.bidirectional { 2 } else { 1 };
        let mut next = 0;
        let mut take = || {
            next += 1;
            next - 1
        };
        let enc_emb = take();
        let enc = (0..config.layers).map(|_| (0..dirs).map(|_| (take(), take())).collect()).collect();
        let dec_emb = take();
        let dec = (0..config.layers).map(|_| (take(), take())).collect();
        let attn = match config.attention {
            AttentionKind::Bilinear => AttnLayout::Bilinear { w: take() },
            AttentionKind::Additive => AttnLayout::Additive { wq: take(), wk: take(), v: take() },
        };
        let attn_out = config.input_feed.then(&mut take);
        Layout { enc_emb, enc, dec_emb, dec, attn, attn_out, out_w: take(), out_b: take() }
    }
}

/// Weights of one model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
    pub seed: u64,
    pub(crate) layout: Layout,
}

impl ModelParams {
    /// Uniform(-r, r) initialisation from a ChaCha8 stream seeded with `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<ModelParams> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = config.init_range;
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape) in config.shapes() {
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| if r > 0.0 { rng.random_range(-r..r) } else { 0.0 }).collect();
            names.push(name);
            tensors.push(Tensor::new(shape, data)?);
        }
        Ok(ModelParams { layout: Layout::new(&config), config, names, tensors, seed })
    }

    /// Same layout with every weight set to zero.
    pub fn zeros(config: ModelConfig) -> Result<ModelParams> {
        ModelParams::init(ModelConfig { init_range: 0.0, ..config }, 0)
    }

    pub fn from_tensors(config: ModelConfig, names: Vec<String>, tensors: Vec<Tensor>, seed: u64) -> Result<ModelParams> {
        config.validate()?;
        let expected = config.shapes();
        if expected.len() != tensors.len() || names.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(names.iter().zip(&tensors)) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {got_name} {:?} does not match {name} {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(ModelParams { layout: Layout::new(&config), config, names, tensors, seed })
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.tensors[i])
    }

    pub fn checkpoint_bytes(&self) -> Result<Vec<u8>> {
        crate::numerics::checkpoint_bytes(&self.names, &self.tensors)
    }

    /// Writes `model.ckpt`, `model.meta` and `vocab.txt` into `dir`.
    pub fn save(&self, dir: &Path, vocab: &Vocab, epoch: usize) -> Result<()> {
        if vocab.len() != self.config.vocab_size {
            return Err(Error::Argument("vocabulary size does not match the model".into()));
        }
        fs::create_dir_all(dir)?;
        let file = fs::File::create(dir.join("model.ckpt"))?;
        let mut w = std::io::BufWriter::new(file);
        write_checkpoint(&mut w, &self.names, &self.tensors)?;
        std::io::Write::flush(&mut w)?;
        let mut meta = format!("seed = {}\nepoch = {}\nvocab_hash = {}\n", self.seed, epoch, vocab.hash());
        for (k, v) in self.config.to_pairs() {
            meta.push_str(&format!("{k} = {v}\n"));
        }
        fs::write(dir.join("model.meta"), meta)?;
        fs::write(dir.join("vocab.txt"), vocab.to_text())?;
        Ok(())
    }

    /// Reads a directory written by [`ModelParams::save`]. Returns the model,
    /// its vocabulary and the recorded epoch.
    pub fn load(dir: &Path) -> Result<(ModelParams, Vocab, usize)> {
        let meta = parse_meta(&fs::read_to_string(dir.join("model.meta"))?)?;
        let vocab = Vocab::from_text(&fs::read_to_string(dir.join("vocab.txt"))?)?;
        let field = |k: &str| meta.get(k).ok_or_else(|| Error::Checkpoint(format!("metadata lacks {k}")));
        fn num<T: FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Checkpoint(format!("bad value for {k}: {v:?}")))
        }
        if field("vocab_hash")? != &vocab.hash() {
            return Err(Error::Checkpoint("vocabulary hash does not match the metadata".into()));
        }
        let config = ModelConfig {
            vocab_size: num("vocab_size", field("vocab_size")?)?,
            emb_dim: num("emb_dim", field("emb_dim")?)?,
            dec_emb_dim: num("dec_emb_dim", field("dec_emb_dim")?)?,
            hidden: num("hidden", field("hidden")?)?,
            layers: num("layers", field("layers")?)?,
            bidirectional: num("bidirectional", field("bidirectional")?)?,
            attention: field("attention")?.parse()?,
            init_range: num("init_range", field("init_range")?)?,
            input_feed: num("input_feed", field("input_feed")?)?,
        };
        let seed = num("seed", field("seed")?)?;
        let epoch = num("epoch", field("epoch")?)?;
        let file = fs::File::open(dir.join("model.ckpt"))?;
        let (names, tensors) = read_checkpoint(std::io::BufReader::new(file))?;
        let params = ModelParams::from_tensors(config, names, tensors, seed)?;
        if params.config.vocab_size != vocab.len() {
            return Err(Error::Checkpoint("vocabulary size does not match the model".into()));
        }
        Ok((params, vocab, epoch))
    }
}

fn parse_meta(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, message: "expected key = value".into() })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}
