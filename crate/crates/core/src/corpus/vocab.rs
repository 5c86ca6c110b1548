use std::collections::{BTreeSet, HashMap};


use super::{Gender, Noun};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Pad,
    Bos,
    Eos,
    Gender(Gender),
    Char(char),
}

impl Token {
    fn label(self) -> String {
        match self {
            Token::Pad => "<pad>".into(),
            Token::Bos => "<bos>".into(),
            Token::Eos => "<eos>".into(),
            Token::Gender(g) => format!("<{}>", g.code()),
            Token::Char(c) => c.to_string(),
        }
    }
}

/// Ordered list of vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSeq(pub Vec<usize>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Bijection between tokens and indices.
///
/// Layout: `<pad>`=0, `<bos>`=1, `<eos>`=2, `<m>`, `<f>`, `<n>`, then the
/// characters in code-point order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<Token>,
    chars: HashMap<char, usize>,
}

const SPECIALS: [Token; 6] = [
    Token::Pad,
    Token::Bos,
    Token::Eos,
    Token::Gender(Gender::Masculine),
    Token::Gender(Gender::Feminine),
    Token::Gender(Gender::Neuter),
];

impl Vocab {
    pub const PAD: usize = 0;
    pub const BOS: usize = 1;
    pub const EOS: usize = 2;

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Vocab {
        let set: BTreeSet<char> = chars.into_iter().collect();
        let mut tokens = SPECIALS.to_vec();
        tokens.extend(set.into_iter().map(Token::Char));
        Vocab::from_tokens(tokens)
    }

    /// Every character of the nouns' lemmas and plurals plus the extra words
    /// (typically the wug stimuli).
    pub fn build<'a>(nouns: &[Noun], extra: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut chars = BTreeSet::new();
        for n in nouns {
            chars.extend(n.lemma.chars());
            chars.extend(n.plural.chars());
        }
        for w in extra {
            chars.extend(w.chars());
        }
        Vocab::from_chars(chars)
    }

    fn from_tokens(tokens: Vec<Token>) -> Vocab {
        let chars = tokens
            .iter()
            .enumerate()
            .filter_map(|(i, t)| match t {
                Token::Char(c) => Some((*c, i)),
                _ => None,
            })
            .collect();
        Vocab { tokens, chars }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn token(&self, index: usize) -> Option<Token> {
        self.tokens.get(index).copied()
    }

    pub fn char_index(&self, c: char) -> Option<usize> {
        self.chars.get(&c).copied()
    }

    pub fn gender_index(&self, g: Gender) -> usize {
        3 + match g {
            Gender::Masculine => 0,
            Gender::Feminine => 1,
            Gender::Neuter => 2,
        }
    }

    /// Indices that may appear in a decoder output: characters and `<eos>`.
    pub fn output_mask(&self) -> Vec<bool> {
        self.tokens.iter().map(|t| matches!(t, Token::Char(_) | Token::Eos)).collect()
    }

    pub fn encode_input(&self, lemma: &str, gender: Gender) -> Result<TokenSeq> {
        if lemma.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seq = Vec::with_capacity(lemma.chars().count() + 2);
        seq.push(self.gender_index(gender));
        for c in lemma.chars() {
            seq.push(self.char_index(c).ok_or(Error::UnknownChar(c))?);
        }
        seq.push(Self::EOS);
        Ok(TokenSeq(seq))
    }

    pub fn encode_target(&self, plural: &str) -> Result<TokenSeq> {
        if plural.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seq = Vec::with_capacity(plural.chars().count() + 1);
        for c in plural.chars() {
            seq.push(self.char_index(c).ok_or(Error::UnknownChar(c))?);
        }
        seq.push(Self::EOS);
        Ok(TokenSeq(seq))
    }

    /// Characters up to the first `<eos>`; non-character tokens are skipped.
    pub fn decode(&self, seq: &[usize]) -> String {
        let mut out = String::new();
        for &i in seq {
            match self.token(i) {
                Some(Token::Eos) => break,
                Some(Token::Char(c)) => out.push(c),
                _ => {}
            }
        }
        out
    }

    /// One token label per line, index order.
    pub fn to_text(&self) -> String {
        self.tokens.iter().map(|t| t.label() + "\n").collect()
    }

    pub fn from_text(text: &str) -> Result<Vocab> {
        let lines: Vec<&str> = text.split('\n').collect();
        let lines = match lines.last() {
            Some(&"") => &lines[..lines.len() - 1],
            _ => &lines[..],
        };
        if lines.len() < SPECIALS.len() {
            return Err(Error::Parse { line: lines.len(), message: "vocabulary too short".into() });
        }
        for (i, special) in SPECIALS.iter().enumerate() {
            if lines[i] != special.label() {
                return Err(Error::Parse { line: i + 1, message: format!("expected {}", special.label()) });
            }
        }
        let mut tokens = SPECIALS.to_vec();
        for (i, line) in lines.iter().enumerate().skip(SPECIALS.len()) {
            let mut it = line.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => tokens.push(Token::Char(c)),
                _ => return Err(Error::Parse { line: i + 1, message: format!("bad token {line:?}") }),
            }
        }
        let vocab = Vocab::from_tokens(tokens);
        if vocab.chars.len() + SPECIALS.len() != vocab.tokens.len() {
            return Err(Error::Data("duplicate characters in vocabulary".into()));
        }
        Ok(vocab)
    }

    /// SHA-256 of the serialized token list, hex encoded.
    pub fn hash(&self) -> String {
        crate::util::sha256_hex(self.to_text().as_bytes())
    }
}

pub fn encode_input(noun: &Noun, vocab: &Vocab) -> Result<TokenSeq> {
    vocab.encode_input(&noun.lemma, noun.gender)
}

pub fn encode_target(noun: &Noun, vocab: &Vocab) -> Result<TokenSeq> {
    vocab.encode_target(&noun.plural)
}

pub fn decode_tokens(seq: &TokenSeq, vocab: &Vocab) -> String {
    vocab.decode(&seq.0)
}
