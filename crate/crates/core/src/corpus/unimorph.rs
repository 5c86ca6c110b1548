use std::collections::HashMap;

use super::{Gender, Noun, NounLexicon};
use crate::error::{Error, Result};

/// Nominative singular/plural pairs extracted from a UniMorph table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnimorphPairs {
    pub pairs: Vec<(String, String)>,
    /// Extra NOM;PL (or NOM;SG) rows for a lemma beyond the first one.
    pub duplicate_forms: usize,
}

#[derive(Default)]
struct Cells {
    singular: Option<String>,
    plural: Option<String>,
}

/// Parses `lemma<TAB>form<TAB>features` lines, keeping nominative forms.
///
/// Pairs come out in order of each lemma's first appearance. When a lemma
/// lists several nominative plurals, the first one in file order wins.
pub fn parse_unimorph(text: &str) -> Result<UnimorphPairs> {
    let mut order: Vec<String> = Vec::new();
    let mut cells: HashMap<String, Cells> = HashMap::new();
    let mut duplicate_forms = 0;

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
        let (lemma, form, features) = (cols[0], cols[1], cols[2]);
        if lemma.is_empty() || form.is_empty() {
            return Err(Error::Parse { line: i + 1, message: "empty lemma or form".into() });
        }
        let feats: Vec<&str> = features.split(';').map(str::trim).collect();
        if !feats.contains(&"NOM") {
            continue;
        }
        let slot = if feats.contains(&"SG") {
            true
        } else if feats.contains(&"PL") {
            false
        } else {
            continue;
        };
        let entry = cells.entry(lemma.to_string()).or_insert_with(|| {
            order.push(lemma.to_string());
            Cells::default()
        });
        let target = if slot { &mut entry.singular } else { &mut entry.plural };
        if target.is_some() {
            duplicate_forms += 1;
        } else {
            *target = Some(form.to_string());
        }
    }

    let pairs = order
        .into_iter()
        .filter_map(|lemma| {
            let c = cells.remove(&lemma)?;
            Some((c.singular?, c.plural?))
        })
        .collect();
    Ok(UnimorphPairs { pairs, duplicate_forms })
}

pub type GenderMap = HashMap<String, Gender>;

/// Reads `lemma,gender` lines; the first entry for a lemma wins.
pub fn parse_gender_map(text: &str) -> Result<GenderMap> {
    let mut map = GenderMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (lemma, code) = line.rsplit_once(',').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected `lemma,gender`".into(),
        })?;
        let gender = Gender::from_code(code)
            .ok_or_else(|| Error::Data(format!("line {}: gender {:?} is not one of m, f, n", i + 1, code)))?;
        map.entry(lemma.trim().to_string()).or_insert(gender);
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub lexicon: NounLexicon,
    /// Pairs without a gender entry; never defaulted.
    pub dropped: usize,
}

pub fn merge_gender(pairs: &[(String, String)], genders: &GenderMap) -> MergeOutcome {
    let mut entries = Vec::with_capacity(pairs.len());
    let mut dropped = 0;
    for (lemma, plural) in pairs {
        match genders.get(lemma) {
            Some(&gender) => entries.push(Noun { lemma: lemma.clone(), plural: plural.clone(), gender }),
            None => dropped += 1,
        }
    }
    MergeOutcome { lexicon: NounLexicon { entries, provenance: Vec::new() }, dropped }
}
