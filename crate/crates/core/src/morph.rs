//! Rule-based German plural classes: suffix plus umlaut.
//!
//! Classification works on orthographic strings and is case-sensitive.
//! Besides the five plain suffixes, the usual spelling allomorphs are
//! recognised: `-n` after stems in `-e`, `-el`, `-er` and `-nen` after `-in`
//! count as /-(e)n/, `-se` after `-s` counts as /-e/.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Noun;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Suffix {
    En,
    E,
    Zero,
    Er,
    S,
    Other,
}

impl Suffix {
    /// Reporting order used by every table.
    pub const ALL: [Suffix; 6] = [Suffix::En, Suffix::E, Suffix::Zero, Suffix::Er, Suffix::S, Suffix::Other];

    pub fn label(self) -> &'static str {
        match self {
            Suffix::En => "en",
            Suffix::E => "e",
            Suffix::Zero => "zero",
            Suffix::Er => "er",
            Suffix::S => "s",
            Suffix::Other => "other",
        }
    }

    pub fn index(self) -> usize {
        Suffix::ALL.iter().position(|&s| s == self).unwrap()
    }

    pub fn from_label(label: &str) -> Option<Suffix> {
        Suffix::ALL.iter().copied().find(|s| s.label() == label)
    }

    fn allows_umlaut(self) -> bool {
        matches!(self, Suffix::E | Suffix::Zero | Suffix::Er)
    }
}

impl fmt::Display for Suffix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PluralClass {
    pub suffix: Suffix,
    pub umlaut: bool,
}

impl PluralClass {
    pub const OTHER: PluralClass = PluralClass { suffix: Suffix::Other, umlaut: false };

    /// `None` for umlaut combined with anything but /-e/, zero or /-er/.
    pub fn new(suffix: Suffix, umlaut: bool) -> Option<PluralClass> {
        (!umlaut || suffix.allows_umlaut()).then_some(PluralClass { suffix, umlaut })
    }

    pub fn plain(suffix: Suffix) -> PluralClass {
        PluralClass { suffix, umlaut: false }
    }
}

impl fmt::Display for PluralClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.umlaut {
            write!(f, "{}+umlaut", self.suffix)
        } else {
            write!(f, "{}", self.suffix)
        }
    }
}

fn fronted(c: char) -> Option<char> {
    Some(match c {
        'a' => 'ä',
        'o' => 'ö',
        'u' => 'ü',
        'A' => 'Ä',
        'O' => 'Ö',
        'U' => 'Ü',
        _ => return None,
    })
}

/// Position of the character to front, if any.
fn umlaut_site(chars: &[char]) -> Option<usize> {
    for i in (0..chars.len()).rev() {
        let c = chars[i];
        if fronted(c).is_none() {
            continue;
        }
        if matches!(c, 'u' | 'U') && i > 0 {
            match chars[i - 1] {
                // au -> äu
                'a' | 'A' => return Some(i - 1),
                // eu, äu are front diphthongs; qu is a consonant cluster
                'e' | 'E' | 'ä' | 'Ä' | 'q' | 'Q' => continue,
                _ => {}
            }
        }
        return Some(i);
    }
    None
}

/// Fronts the rightmost back vowel: au→äu, a→ä, o→ö, u→ü.
pub fn umlautize(stem: &str) -> Result<String> {
    let mut chars: Vec<char> = stem.chars().collect();
    let site = umlaut_site(&chars).ok_or_else(|| Error::NoBackVowel(stem.to_string()))?;
    chars[site] = fronted(chars[site]).unwrap();
    Ok(chars.into_iter().collect())
}

pub fn has_back_vowel(stem: &str) -> bool {
    let chars: Vec<char> = stem.chars().collect();
    umlaut_site(&chars).is_some()
}

fn takes_bare_n(base: &str) -> bool {
    base.ends_with('e') || base.ends_with("el") || base.ends_with("er")
}

type SuffixRule = (&'static str, Suffix, fn(&str) -> bool);

/// Suffix strings in match order, each with the class it signals and the
/// stem condition it needs.
const SUFFIX_RULES: [SuffixRule; 7] = [
    ("er", Suffix::Er, |_| true),
    ("en", Suffix::En, |_| true),
    ("e", Suffix::E, |_| true),
    ("n", Suffix::En, takes_bare_n),
    ("nen", Suffix::En, |b| b.ends_with("in")),
    ("se", Suffix::E, |b| b.ends_with('s')),
    ("s", Suffix::S, |_| true),
];

/// Labels a singular/plural pair. Total over all string pairs.
pub fn classify_plural(singular: &str, plural: &str) -> PluralClass {
    if plural == singular {
        return PluralClass::plain(Suffix::Zero);
    }
    let umlauted = umlautize(singular).ok();
    if umlauted.as_deref() == Some(plural) {
        return PluralClass { suffix: Suffix::Zero, umlaut: true };
    }
    let bases = std::iter::once((singular, false)).chain(umlauted.as_deref().map(|u| (u, true)));
    for (base, umlaut) in bases {
        let Some(rest) = plural.strip_prefix(base) else { continue };
        for (suffix, class, applies) in SUFFIX_RULES {
            if rest == suffix && applies(base) {
                return PluralClass::new(class, umlaut).unwrap_or(PluralClass::OTHER);
            }
        }
    }
    PluralClass::OTHER
}

/// Builds the plural a class prescribes for `singular`.
pub fn apply_class(singular: &str, class: PluralClass) -> Result<String> {
    if class.suffix == Suffix::Other {
        return Err(Error::Unsupported("the `other` class has no constructive form".into()));
    }
    if class.umlaut && !class.suffix.allows_umlaut() {
        return Err(Error::Unsupported(format!("umlaut cannot combine with {}", class.suffix)));
    }
    let base = if class.umlaut { umlautize(singular)? } else { singular.to_string() };
    let ending = match class.suffix {
        Suffix::Zero => "",
        Suffix::E => "e",
        Suffix::Er => "er",
        Suffix::S => "s",
        Suffix::En if takes_bare_n(&base) => "n",
        Suffix::En if base.ends_with("in") => "nen",
        Suffix::En => "en",
        Suffix::Other => unreachable!(),
    };
    Ok(base + ending)
}

/// The candidate plurals offered for rating, in presentation order:
/// zero, zero+umlaut, e, e+umlaut, en, er, er+umlaut, s. Umlaut variants
/// are omitted when the stem has no back vowel.
pub fn candidate_forms(singular: &str) -> Vec<(PluralClass, String)> {
    let order = [
        (Suffix::Zero, false),
        (Suffix::Zero, true),
        (Suffix::E, false),
        (Suffix::E, true),
        (Suffix::En, false),
        (Suffix::Er, false),
        (Suffix::Er, true),
        (Suffix::S, false),
    ];
    order
        .iter()
        .filter_map(|&(suffix, umlaut)| {
            let class = PluralClass { suffix, umlaut };
            apply_class(singular, class).ok().map(|form| (class, form))
        })
        .collect()
}

fn is_vowel(c: char) -> bool {
    matches!(c.to_lowercase().next().unwrap_or(c), 'a' | 'e' | 'i' | 'o' | 'u' | 'ä' | 'ö' | 'ü' | 'y')
}

/// Number of maximal vowel-letter runs.
pub fn syllable_count(orth: &str) -> usize {
    let mut count = 0;
    let mut in_vowel = false;
    for c in orth.chars() {
        let v = is_vowel(c);
        if v && !in_vowel {
            count += 1;
        }
        in_vowel = v;
    }
    count
}

/// Final vowel run plus coda, lowercased, with doubled letters collapsed
/// (so `Fall` and `Bral` share the key `al`).
pub fn rhyme_key(orth: &str) -> String {
    let lower: Vec<char> = orth.to_lowercase().chars().collect();
    let mut start = None;
    let mut i = lower.len();
    while i > 0 {
        i -= 1;
        if is_vowel(lower[i]) {
            let mut s = i;
            while s > 0 && is_vowel(lower[s - 1]) {
                s -= 1;
            }
            start = Some(s);
            break;
        }
    }
    let tail = &lower[start.unwrap_or(0)..];
    let mut key = String::new();
    let mut prev = None;
    for &c in tail {
        if prev != Some(c) {
            key.push(c);
        }
        prev = Some(c);
    }
    key
}

pub fn rhymes_with_stimuli<S: AsRef<str>>(lemma: &str, stimuli: &[S]) -> bool {
    let key = rhyme_key(lemma);
    stimuli.iter().any(|s| rhyme_key(s.as_ref()) == key)
}

/// Per-suffix shares of a noun selection, umlaut folded into its suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: [usize; 6],
    pub n: usize,
}

impl ClassDistribution {
    pub fn from_classes(classes: impl IntoIterator<Item = PluralClass>) -> ClassDistribution {
        let mut counts = [0; 6];
        for c in classes {
            counts[c.suffix.index()] += 1;
        }
        ClassDistribution { counts, n: counts.iter().sum() }
    }

    /// `None` for an empty selection.
    pub fn percent(&self, suffix: Suffix) -> Option<f64> {
        (self.n > 0).then(|| 100.0 * self.counts[suffix.index()] as f64 / self.n as f64)
    }

    pub fn count(&self, suffix: Suffix) -> usize {
        self.counts[suffix.index()]
    }
}

pub fn class_distribution<'a, F>(nouns: impl IntoIterator<Item = &'a Noun>, filter: F) -> ClassDistribution
where
    F: Fn(&Noun) -> bool,
{
    ClassDistribution::from_classes(
        nouns.into_iter().filter(|n| filter(n)).map(|n| classify_plural(&n.lemma, &n.plural)),
    )
}

/// The four corpus views: all nouns, neuter nouns, nouns rhyming with a
/// stimulus, one-syllable nouns.
pub fn corpus_views<S: AsRef<str>>(nouns: &[Noun], stimuli: &[S]) -> Vec<(&'static str, ClassDistribution)> {
    use crate::corpus::Gender;
    vec![
        ("all", class_distribution(nouns, |_| true)),
        ("neuter", class_distribution(nouns, |n| n.gender == Gender::Neuter)),
        ("rhyme", class_distribution(nouns, |n| rhymes_with_stimuli(&n.lemma, stimuli))),
        ("one_syllable", class_distribution(nouns, |n| syllable_count(&n.lemma) == 1)),
    ]
}

/// Long-format CSV `view,class,percent,count`, classes in reporting order,
/// followed by an `N` row per view.
pub fn distribution_csv(views: &[(&str, ClassDistribution)]) -> String {
    let mut out = String::from("view,class,percent,count\n");
    for (name, dist) in views {
        for s in Suffix::ALL {
            let pct = dist.percent(s).map(|p| format!("{p:.1}")).unwrap_or_else(|| "NA".into());
            out.push_str(&format!("{name},{},{pct},{}\n", s.label(), dist.count(s)));
        }
        out.push_str(&format!("{name},N,,{}\n", dist.n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Gender;

    fn c(s: Suffix, u: bool) -> PluralClass {
        PluralClass::new(s, u).unwrap()
    }

    #[test]
    fn umlaut_examples() {
        assert_eq!(umlautize("Dach").unwrap(), "Däch");
        assert_eq!(umlautize("Fuss").unwrap(), "Füss");
        assert_eq!(umlautize("Haus").unwrap(), "Häus");
        assert_eq!(umlautize("Raun").unwrap(), "Räun");
        assert_eq!(umlautize("Ofen").unwrap(), "Öfen");
        assert!(matches!(umlautize("Pisch"), Err(Error::NoBackVowel(_))));
        assert!(matches!(umlautize("Beule"), Err(Error::NoBackVowel(_))));
    }

    #[test]
    fn reference_pairs() {
        assert_eq!(classify_plural("Hund", "Hunde"), c(Suffix::E, false));
        assert_eq!(classify_plural("Kuh", "Kühe"), c(Suffix::E, true));
        assert_eq!(classify_plural("Daumen", "Daumen"), c(Suffix::Zero, false));
        assert_eq!(classify_plural("Mutter", "Mütter"), c(Suffix::Zero, true));
        assert_eq!(classify_plural("Kind", "Kinder"), c(Suffix::Er, false));
        assert_eq!(classify_plural("Wald", "Wälder"), c(Suffix::Er, true));
        assert_eq!(classify_plural("Strasse", "Strassen"), c(Suffix::En, false));
        assert_eq!(classify_plural("Auto", "Autos"), c(Suffix::S, false));
        assert_eq!(classify_plural("Abstraktum", "Abstrakta"), PluralClass::OTHER);
    }

    #[test]
    fn spelling_allomorphs() {
        assert_eq!(classify_plural("Muschel", "Muscheln"), c(Suffix::En, false));
        assert_eq!(classify_plural("Leber", "Lebern"), c(Suffix::En, false));
        assert_eq!(classify_plural("Lehrerin", "Lehrerinnen"), c(Suffix::En, false));
        assert_eq!(classify_plural("Zeugnis", "Zeugnisse"), c(Suffix::E, false));
        assert_eq!(classify_plural("Hand", "Handn"), PluralClass::OTHER);
    }

    #[test]
    fn umlaut_with_en_or_s_is_other() {
        assert_eq!(classify_plural("Bral", "Brälen"), PluralClass::OTHER);
        assert_eq!(classify_plural("Bral", "Bräls"), PluralClass::OTHER);
        assert!(PluralClass::new(Suffix::S, true).is_none());
    }

    #[test]
    fn apply_examples() {
        assert_eq!(apply_class("Hund", c(Suffix::E, false)).unwrap(), "Hunde");
        assert_eq!(apply_class("Bral", c(Suffix::S, false)).unwrap(), "Brals");
        assert_eq!(apply_class("Strasse", c(Suffix::En, false)).unwrap(), "Strassen");
        assert!(matches!(apply_class("Hund", PluralClass::OTHER), Err(Error::Unsupported(_))));
        assert!(matches!(apply_class("Pisch", c(Suffix::E, true)), Err(Error::NoBackVowel(_))));
    }

    #[test]
    fn candidates() {
        let forms: Vec<String> = candidate_forms("Bral").into_iter().map(|(_, f)| f).collect();
        assert_eq!(forms, ["Bral", "Bräl", "Brale", "Bräle", "Bralen", "Braler", "Bräler", "Brals"]);
        let forms: Vec<String> = candidate_forms("Pisch").into_iter().map(|(_, f)| f).collect();
        assert_eq!(forms, ["Pisch", "Pische", "Pischen", "Pischer", "Pischs"]);
        for stim in crate::corpus::builtin_stimuli() {
            for (class, form) in candidate_forms(&stim.orth) {
                assert_eq!(classify_plural(&stim.orth, &form), class, "{} {}", stim.orth, form);
            }
        }
    }

    #[test]
    fn syllables() {
        assert_eq!(syllable_count("Bral"), 1);
        assert_eq!(syllable_count("Auto"), 2);
        assert_eq!(syllable_count("Strasse"), 2);
        assert_eq!(syllable_count("Pfff"), 0);
        assert_eq!(syllable_count("Öl"), 1);
    }

    #[test]
    fn rhymes() {
        assert!(rhymes_with_stimuli("Fall", &["Bral"]));
        assert!(rhymes_with_stimuli("Wert", &["Spert"]));
        let stimuli: Vec<String> = crate::corpus::builtin_stimuli().into_iter().map(|s| s.orth).collect();
        // brute force over the 24 keys
        let auto = rhyme_key("Auto");
        assert!(stimuli.iter().all(|s| rhyme_key(s) != auto));
        assert!(!rhymes_with_stimuli("Auto", &stimuli));
    }

    #[test]
    fn toy_distribution() {
        let nouns = vec![
            Noun::new("Hund", "Hunde", Gender::Masculine).unwrap(),
            Noun::new("Frau", "Frauen", Gender::Feminine).unwrap(),
            Noun::new("Auto", "Autos", Gender::Neuter).unwrap(),
            Noun::new("Datum", "Daten", Gender::Neuter).unwrap(),
        ];
        let d = class_distribution(&nouns, |_| true);
        assert_eq!(d.n, 4);
        for s in [Suffix::E, Suffix::En, Suffix::S, Suffix::Other] {
            assert_eq!(d.percent(s), Some(25.0));
        }
        let empty = class_distribution(&nouns, |_| false);
        assert_eq!(empty.n, 0);
        assert_eq!(empty.percent(Suffix::E), None);
    }
}
