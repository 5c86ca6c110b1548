use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonce noun used in the wug test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WugItem {
    pub orth: String,
    /// `true` for Rhymes, `false` for Non-Rhymes.
    pub rhyme: bool,
}

const RHYMES: [&str; 12] = [
    "Bral", "Kach", "Klot", "Mur", "Nuhl", "Pind", "Pisch", "Pund", "Raun", "Spand", "Spert", "Vag",
];
const NON_RHYMES: [&str; 12] = [
    "Bnaupf", "Bneik", "Bnöhk", "Fnahf", "Fneik", "Fnöhk", "Plaupf", "Pleik", "Pläk", "Pnähf", "Pröng", "Snauk",
];

/// The 24 monosyllabic nonce nouns, Rhymes first.
pub fn builtin_stimuli() -> Vec<WugItem> {
    RHYMES
        .iter()
        .map(|s| WugItem { orth: s.to_string(), rhyme: true })
        .chain(NON_RHYMES.iter().map(|s| WugItem { orth: s.to_string(), rhyme: false }))
        .collect()
}

/// One `form,flag` (or tab-separated) line per stimulus. Flags: `R`/`NR`,
/// `rhyme`/`nonrhyme`, `1`/`0`, `true`/`false`.
pub fn parse_stimuli(text: &str) -> Result<Vec<WugItem>> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split([',', '\t']).map(str::trim);
        let (orth, flag) = match (cols.next(), cols.next(), cols.next()) {
            (Some(o), Some(f), None) if !o.is_empty() => (o, f),
            _ => {
                return Err(Error::Parse { line: i + 1, message: "expected `form,R|NR`".into() });
            }
        };
        let rhyme = match flag.to_ascii_lowercase().as_str() {
            "r" | "rhyme" | "1" | "true" => true,
            "nr" | "nonrhyme" | "non-rhyme" | "0" | "false" => false,
            other => {
                return Err(Error::Parse { line: i + 1, message: format!("unknown rhyme flag {other:?}") });
            }
        };
        items.push(WugItem { orth: orth.to_string(), rhyme });
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_twelve_per_category() {
        let s = builtin_stimuli();
        assert_eq!(s.len(), 24);
        assert_eq!(s.iter().filter(|i| i.rhyme).count(), 12);
        assert_eq!(s[0].orth, "Bral");
        assert_eq!(s[12].orth, "Bnaupf");
    }

    #[test]
    fn parses_flags() {
        let s = parse_stimuli("# header\nBral,R\nPläk\tNR\n").unwrap();
        assert_eq!(s, vec![
            WugItem { orth: "Bral".into(), rhyme: true },
            WugItem { orth: "Pläk".into(), rhyme: false },
        ]);
        assert!(parse_stimuli("Bral,maybe").is_err());
    }
}
