//! Noun ingestion, gender merging, deterministic splits and character
//! encoding.
//!
//! Forms are kept orthographic with their original capitalization; every
//! comparison downstream is case-sensitive.

mod stimuli;
mod unimorph;
mod vocab;

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use stimuli::{builtin_stimuli, parse_stimuli, WugItem};
pub use unimorph::{merge_gender, parse_gender_map, parse_unimorph, GenderMap, MergeOutcome, UnimorphPairs};
pub use vocab::{decode_tokens, encode_input, encode_target, Token, TokenSeq, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "m")]
    Masculine,
    #[serde(rename = "f")]
    Feminine,
    #[serde(rename = "n")]
    Neuter,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Masculine, Gender::Feminine, Gender::Neuter];

    pub fn code(self) -> char {
        match self {
            Gender::Masculine => 'm',
            Gender::Feminine => 'f',
            Gender::Neuter => 'n',
        }
    }

    pub fn from_code(code: &str) -> Option<Gender> {
        match code.trim() {
            "m" | "M" => Some(Gender::Masculine),
            "f" | "F" => Some(Gender::Feminine),
            "n" | "N" => Some(Gender::Neuter),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// A lexical entry: nominative singular, nominative plural and gender.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Noun {
    pub lemma: String,
    pub plural: String,
    pub gender: Gender,
}

impl Noun {
    pub fn new(lemma: impl Into<String>, plural: impl Into<String>, gender: Gender) -> Result<Noun> {
        let lemma = lemma.into();
        let plural = plural.into();
        if lemma.is_empty() || plural.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Noun { lemma, plural, gender })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NounLexicon {
    pub entries: Vec<Noun>,
    /// Identifiers of the files the entries came from.
    pub provenance: Vec<String>,
}

impl NounLexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Vec<Noun> {
        indices.iter().map(|&i| self.entries[i].clone()).collect()
    }

    /// Tab-separated `lemma plural gender` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for noun in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", noun.lemma, noun.plural, noun.gender));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<NounLexicon> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 3 tab-separated columns, found {}", cols.len()),
                });
            }
            let gender = Gender::from_code(cols[2]).ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("unknown gender {:?}", cols[2]),
            })?;
            entries.push(Noun::new(cols[0], cols[1], gender).map_err(|_| Error::Parse {
                line: i + 1,
                message: "empty form".into(),
            })?);
        }
        Ok(NounLexicon { entries, provenance: Vec::new() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitCounts {
    pub const REFERENCE: SplitCounts = SplitCounts { train: 8694, dev: 1229, test: 1320 };
    pub const REFERENCE_SIZE: usize = 11243;

    /// The reference counts for an 11,243-noun lexicon, otherwise
    /// 77.3/10.9/11.8 percent with the rounding remainder going to train.
    pub fn for_size(n: usize) -> SplitCounts {
        if n == Self::REFERENCE_SIZE {
            return Self::REFERENCE;
        }
        let dev = (n as f64 * 0.109).round() as usize;
        let test = (n as f64 * 0.118).round() as usize;
        let (dev, test) = if dev + test > n { (0, 0) } else { (dev, test) };
        SplitCounts { train: n - dev - test, dev, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitAssignment {
    /// One `index<TAB>split` line per retained index, in index order.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(usize, &str)> = Vec::new();
        rows.extend(self.train.iter().map(|&i| (i, "train")));
        rows.extend(self.dev.iter().map(|&i| (i, "dev")));
        rows.extend(self.test.iter().map(|&i| (i, "test")));
        rows.sort();
        rows.iter().map(|(i, s)| format!("{i}\t{s}\n")).collect()
    }
}

/// Seeded uniform shuffle of `0..lexicon.len()`, partitioned by `counts`.
pub fn make_splits(lexicon: &NounLexicon, counts: SplitCounts, seed: u64) -> Result<SplitAssignment> {
    if counts.total() != lexicon.len() {
        return Err(Error::Argument(format!(
            "split counts {}+{}+{} do not sum to lexicon size {}",
            counts.train,
            counts.dev,
            counts.test,
            lexicon.len()
        )));
    }
    let mut order: Vec<usize> = (0..lexicon.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let dev_end = counts.train + counts.dev;
    Ok(SplitAssignment {
        train: order[..counts.train].to_vec(),
        dev: order[counts.train..dev_end].to_vec(),
        test: order[dev_end..].to_vec(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn toy(n: usize) -> NounLexicon {
        let entries = (0..n)
            .map(|i| Noun::new(format!("Wort{i}"), format!("Wort{i}e"), Gender::Neuter).unwrap())
            .collect();
        NounLexicon { entries, provenance: vec![] }
    }

    #[test]
    fn splits_are_disjoint_and_sized() {
        let lex = toy(10);
        let s = make_splits(&lex, SplitCounts { train: 8, dev: 1, test: 1 }, 7).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 1, 1));
        let all: HashSet<usize> = s.train.iter().chain(&s.dev).chain(&s.test).copied().collect();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn splits_are_deterministic() {
        let lex = toy(50);
        let counts = SplitCounts::for_size(50);
        let a = make_splits(&lex, counts, 3).unwrap();
        let b = make_splits(&lex, counts, 3).unwrap();
        assert_eq!(a.to_tsv(), b.to_tsv());
        let c = make_splits(&lex, counts, 4).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn split_count_mismatch_is_rejected() {
        let lex = toy(10);
        let err = make_splits(&lex, SplitCounts { train: 8, dev: 1, test: 2 }, 1).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn proportional_counts() {
        assert_eq!(SplitCounts::for_size(11243), SplitCounts::REFERENCE);
        let c = SplitCounts::for_size(4000);
        assert_eq!(c.total(), 4000);
        assert_eq!(c.dev, 436);
        assert_eq!(c.test, 472);
    }

    #[test]
    fn lexicon_tsv_roundtrip() {
        let lex = toy(3);
        let back = NounLexicon::from_tsv(&lex.to_tsv()).unwrap();
        assert_eq!(back.entries, lex.entries);
    }
}
