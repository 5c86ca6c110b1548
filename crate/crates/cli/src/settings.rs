//! Layered `key = value` settings: config file, then `WUGLAB_*` environment
//! variables, then command-line flags.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::CliError;

/// Every recognised setting.
pub const KEYS: &[&str] = &[
    "corpus",
    "gender",
    "lexicon",
    "stimuli",
    "speakers",
    "run",
    "limit",
    "limit_seed",
    "split",
    "split_seed",
    "seeds",
    "seed",
    "jobs",
    "epochs",
    "batch_size",
    "dropout",
    "clip_norm",
    "gradient_norm",
    "adadelta_rho",
    "adadelta_eps",
    "beam",
    "dev_beam",
    "eval_beam",
    "rank_k",
    "emb_dim",
    "dec_emb_dim",
    "hidden",
    "layers",
    "attention",
    "bidirectional",
    "init_range",
    "input_feed",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn layered(
        file: BTreeMap<String, String>,
        env: impl IntoIterator<Item = (String, String)>,
        flags: BTreeMap<String, String>,
    ) -> Settings {
        let mut values = file;
        for (name, value) in env {
            let Some(key) = name.strip_prefix("WUGLAB_") else { continue };
            let key = key.to_ascii_lowercase();
            if KEYS.contains(&key.as_str()) {
                values.insert(key, value);
            }
        }
        values.extend(flags);
        Settings { values }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Settings {
        Settings { values: pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| CliError::Usage(format!("invalid value for {key}: {v:?}"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    /// Deterministic snapshot, one `key = value` line per set key.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// `"a..b"` (inclusive), a comma list, or a bare `N` meaning `1..N`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("invalid seed list {text:?}"));
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    if text.contains(',') {
        let seeds: Vec<u64> = text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let mut uniq = seeds.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != seeds.len() {
            return Err(CliError::Usage(format!("duplicate seeds in {text:?}")));
        }
        return Ok(seeds);
    }
    let n: u64 = text.parse().map_err(|_| bad())?;
    Ok((1..=n).collect())
}

pub fn format_seeds(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_forms() {
        assert_eq!(parse_seeds("3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4..6").unwrap(), vec![4, 5, 6]);
        assert_eq!(parse_seeds("7, 2,9").unwrap(), vec![7, 2, 9]);
        assert_eq!(parse_seeds("").unwrap(), Vec::<u64>::new());
        assert_eq!(parse_seeds("0").unwrap(), Vec::<u64>::new());
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("1,1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn layering_order() {
        let file = parse_config("epochs = 3\nbeam = 4\n# note\nhidden=50\n").unwrap();
        let env = vec![("WUGLAB_BEAM".to_string(), "6".to_string()), ("WUGLAB_NOPE".to_string(), "1".to_string())];
        let flags = BTreeMap::from([("hidden".to_string(), "80".to_string())]);
        let s = Settings::layered(file, env, flags);
        assert_eq!(s.parse::<usize>("epochs").unwrap(), Some(3));
        assert_eq!(s.parse::<usize>("beam").unwrap(), Some(6));
        assert_eq!(s.parse::<usize>("hidden").unwrap(), Some(80));
        assert!(s.str("nope").is_none());
        assert!(s.parse::<usize>("run").unwrap().is_none());
    }

    #[test]
    fn config_errors() {
        assert!(parse_config("epochs 3").is_err());
        assert!(parse_config("colour = red").is_err());
        let s = Settings::from_pairs([("epochs", "many")]);
        assert!(matches!(s.parse::<usize>("epochs"), Err(CliError::Usage(_))));
    }
}
