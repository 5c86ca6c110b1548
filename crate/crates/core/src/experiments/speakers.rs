use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::wug::ItemProductions;
use crate::corpus::WugItem;
use crate::error::{Error, Result};
use crate::morph::{apply_class, candidate_forms, classify_plural, PluralClass, Suffix};

/// One participant's responses for one stimulus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerRecord {
    pub participant: String,
    pub item: String,
    pub produced: Option<String>,
    /// Candidate form to rating on a 1..=5 scale.
    pub ratings: BTreeMap<String, u8>,
}

pub const SPEAKER_HEADER: &str = "participant,item,task,form,value";

/// Parses `participant,item,task,form,value` rows. `prod` rows carry the
/// produced plural in `form`; `rate` rows carry a candidate in `form` and an
/// integer rating in `value`. Rows are grouped per participant and item in
/// order of first appearance.
pub fn parse_speaker_csv(text: &str) -> Result<Vec<SpeakerRecord>> {
    let mut records: Vec<SpeakerRecord> = Vec::new();
    let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') || (i == 0 && line == SPEAKER_HEADER) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(Error::Parse { line: lineno, message: format!("expected 5 fields, found {}", cols.len()) });
        }
        let (participant, item, task, form, value) = (cols[0], cols[1], cols[2], cols[3], cols[4]);
        if participant.is_empty() || item.is_empty() {
            return Err(Error::Parse { line: lineno, message: "empty participant or item".into() });
        }
        if form.is_empty() {
            return Err(Error::Parse { line: lineno, message: "empty form".into() });
        }
        let key = (participant.to_string(), item.to_string());
        let at = *index.entry(key).or_insert_with(|| {
            records.push(SpeakerRecord {
                participant: participant.to_string(),
                item: item.to_string(),
                produced: None,
                ratings: BTreeMap::new(),
            });
            records.len() - 1
        });
        let rec = &mut records[at];
        match task {
            "prod" => {
                if rec.produced.is_some() {
                    return Err(Error::Parse { line: lineno, message: "second production for the same item".into() });
                }
                rec.produced = Some(form.to_string());
            }
            "rate" => {
                let rating: u8 = value
                    .parse()
                    .ok()
                    .filter(|r| (1..=5).contains(r))
                    .ok_or_else(|| Error::Parse { line: lineno, message: format!("rating {value:?} not in 1..5") })?;
                if rec.ratings.insert(form.to_string(), rating).is_some() {
                    return Err(Error::Parse { line: lineno, message: format!("{form} rated twice") });
                }
            }
            other => return Err(Error::Parse { line: lineno, message: format!("unknown task {other:?}") }),
        }
    }
    Ok(records)
}

pub fn speaker_csv(records: &[SpeakerRecord]) -> String {
    let mut out = String::from(SPEAKER_HEADER);
    out.push('\n');
    for r in records {
        if let Some(p) = &r.produced {
            out.push_str(&format!("{},{},prod,{},\n", r.participant, r.item, p));
        }
        for (form, rating) in &r.ratings {
            out.push_str(&format!("{},{},rate,{},{}\n", r.participant, r.item, form, rating));
        }
    }
    out
}

fn lookup<'a>(stimuli: &'a [WugItem], item: &str) -> Result<&'a WugItem> {
    stimuli.iter().find(|s| s.orth == item).ok_or_else(|| Error::Data(format!("unknown stimulus {item:?}")))
}

/// Production class counts per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionStats {
    pub rhyme: [usize; 6],
    pub nonrhyme: [usize; 6],
}

impl ProductionStats {
    pub fn n(&self, rhyme: bool) -> usize {
        self.counts(rhyme).iter().sum()
    }

    pub fn counts(&self, rhyme: bool) -> &[usize; 6] {
        if rhyme {
            &self.rhyme
        } else {
            &self.nonrhyme
        }
    }

    pub fn percent(&self, rhyme: bool, s: Suffix) -> f64 {
        let n = self.n(rhyme);
        if n == 0 {
            0.0
        } else {
            100.0 * self.counts(rhyme)[s.index()] as f64 / n as f64
        }
    }
}

/// Classifies every production against its stimulus; unclassifiable
/// strings fall into OTHER.
pub fn speaker_production_stats(records: &[SpeakerRecord], stimuli: &[WugItem]) -> Result<ProductionStats> {
    let mut stats = ProductionStats { rhyme: [0; 6], nonrhyme: [0; 6] };
    for r in records {
        let item = lookup(stimuli, &r.item)?;
        if let Some(p) = &r.produced {
            let slot = if item.rhyme { &mut stats.rhyme } else { &mut stats.nonrhyme };
            slot[classify_plural(&item.orth, p).suffix.index()] += 1;
        }
    }
    Ok(stats)
}

/// Per-item production counts, in stimulus order.
pub fn speaker_item_productions(records: &[SpeakerRecord], stimuli: &[WugItem]) -> Result<Vec<ItemProductions>> {
    let mut items: Vec<ItemProductions> = stimuli
        .iter()
        .map(|s| ItemProductions { item: s.orth.clone(), rhyme: s.rhyme, counts: [0; 6], forms: Vec::new() })
        .collect();
    for r in records {
        lookup(stimuli, &r.item)?;
        if let Some(p) = &r.produced {
            let it = items.iter_mut().find(|i| i.item == r.item).expect("checked above");
            it.counts[classify_plural(&it.item, p).suffix.index()] += 1;
        }
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingSummary {
    pub mean: f64,
    /// Sample standard deviation over √n; 0 for a single rating.
    pub se: f64,
    pub n: usize,
}

impl RatingSummary {
    pub fn of(values: &[u8]) -> Option<RatingSummary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let se = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Some(RatingSummary { mean, se, n: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingStats {
    pub rhyme: [Option<RatingSummary>; 6],
    pub nonrhyme: [Option<RatingSummary>; 6],
    pub overall_rhyme: Option<RatingSummary>,
    pub overall_nonrhyme: Option<RatingSummary>,
}

impl RatingStats {
    pub fn get(&self, rhyme: bool, s: Suffix) -> Option<RatingSummary> {
        if rhyme {
            self.rhyme[s.index()]
        } else {
            self.nonrhyme[s.index()]
        }
    }
}

/// Mean rating and standard error per class and category; each rated form
/// is classified against its stimulus.
pub fn rating_stats(records: &[SpeakerRecord], stimuli: &[WugItem]) -> Result<RatingStats> {
    let mut buckets: [[Vec<u8>; 6]; 2] = Default::default();
    for r in records {
        let item = lookup(stimuli, &r.item)?;
        for (form, &rating) in &r.ratings {
            if !(1..=5).contains(&rating) {
                return Err(Error::Data(format!("rating {rating} for {form} outside 1..5")));
            }
            let cat = usize::from(!item.rhyme);
            buckets[cat][classify_plural(&item.orth, form).suffix.index()].push(rating);
        }
    }
    let summarise = |b: &[Vec<u8>; 6]| -> [Option<RatingSummary>; 6] { std::array::from_fn(|i| RatingSummary::of(&b[i])) };
    let overall = |b: &[Vec<u8>; 6]| RatingSummary::of(&b.concat());
    Ok(RatingStats {
        rhyme: summarise(&buckets[0]),
        nonrhyme: summarise(&buckets[1]),
        overall_rhyme: overall(&buckets[0]),
        overall_nonrhyme: overall(&buckets[1]),
    })
}

/// One survey table row; see [`SURVEY_TABLE`].
pub type SurveyRow = (Suffix, usize, usize, Option<(f64, f64)>, Option<(f64, f64)>);

/// Published survey aggregates: `(suffix, productions R, productions NR,
/// rating R (mean, se), rating NR (mean, se))` over 150 participants.
pub const SURVEY_TABLE: [SurveyRow; 6] = [
    (Suffix::E, 815, 805, Some((3.53, 0.021)), Some((3.51, 0.024))),
    (Suffix::En, 450, 624, Some((3.73, 0.026)), Some((3.84, 0.025))),
    (Suffix::Er, 314, 120, Some((3.08, 0.022)), Some((3.06, 0.024))),
    (Suffix::S, 75, 116, Some((2.39, 0.027)), Some((2.52, 0.028))),
    (Suffix::Zero, 48, 48, Some((2.24, 0.020)), Some((2.38, 0.024))),
    (Suffix::Other, 98, 87, None, None),
];

pub const SURVEY_PARTICIPANTS: usize = 150;

/// Counts `c[0..5]` of ratings 1..=5 over `n` values whose mean and
/// standard error round to `mean` (2 decimals) and `se` (3 decimals).
pub fn solve_rating_counts(n: usize, mean: f64, se: f64) -> Option<[usize; 5]> {
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean_ok = |t1: i64| ((t1 as f64 / nf) - mean).abs() < 0.005 - 1e-12;
    let se_of = |t1: i64, t2: i64| {
        let var = (t2 as f64 - (t1 as f64).powi(2) / nf) / (nf - 1.0);
        (var.max(0.0) / nf).sqrt()
    };
    let centre = (mean * nf).round() as i64;
    let mut t1s: Vec<i64> = (centre - 20..=centre + 20).filter(|&t| mean_ok(t)).collect();
    t1s.sort_by_key(|&t| (t - centre).abs());
    for t1 in t1s {
        let target = se * se * nf * (nf - 1.0) + (t1 as f64).powi(2) / nf;
        let c2 = target.round() as i64;
        let mut t2s: Vec<i64> =
            (c2 - 2000..=c2 + 2000).filter(|&t2| (se_of(t1, t2) - se).abs() < 0.0005 - 1e-12).collect();
        t2s.sort_by_key(|&t| (t - c2).abs());
        for t2 in t2s {
            if let Some(c) = counts_for_moments(n as i64, t1, t2) {
                return Some(c);
            }
        }
    }
    None
}

/// Non-negative counts of ratings 1..=5 with the given count, sum and sum of
/// squares, preferring spread-out solutions.
fn counts_for_moments(n: i64, t1: i64, t2: i64) -> Option<[usize; 5]> {
    let mut best: Option<([usize; 5], i64)> = None;
    for c1 in 0..=n {
        for c5 in 0..=n - c1 {
            let r = n - c1 - c5;
            let s1 = t1 - c1 - 5 * c5;
            let s2 = t2 - c1 - 25 * c5;
            let twice_z = s2 + 6 * r - 5 * s1;
            if twice_z < 0 || twice_z % 2 != 0 {
                continue;
            }
            let z = twice_z / 2;
            let y = s1 - 2 * r - 2 * z;
            let x = r - y - z;
            if x < 0 || y < 0 {
                continue;
            }
            let c = [c1, x, y, z, c5];
            let min = *c.iter().min().unwrap();
            if best.is_none_or(|(_, m)| min > m) {
                best = Some((c.map(|v| v as usize), min));
            }
        }
    }
    best.map(|(c, _)| c)
}

/// Builds a synthetic response file whose aggregates reproduce
/// [`SURVEY_TABLE`]: 150 participants, one production and one rating per
/// candidate form for each of 12 Rhymes and 12 Non-Rhymes. Class labels and
/// ratings are spread over participants and items with a fixed shuffle.
pub fn survey_table_records(stimuli: &[WugItem]) -> Result<Vec<SpeakerRecord>> {
    let per_cat = |r: bool| stimuli.iter().filter(|s| s.rhyme == r).count();
    if per_cat(true) != 12 || per_cat(false) != 12 {
        return Err(Error::Argument("the survey layout needs 12 Rhymes and 12 Non-Rhymes".into()));
    }
    let participants = SURVEY_PARTICIPANTS;
    let mut rng = ChaCha8Rng::seed_from_u64(1995);
    let mut records: Vec<SpeakerRecord> = Vec::with_capacity(participants * stimuli.len());
    for p in 0..participants {
        for s in stimuli {
            records.push(SpeakerRecord {
                participant: format!("P{:03}", p + 1),
                item: s.orth.clone(),
                produced: None,
                ratings: BTreeMap::new(),
            });
        }
    }
    let slot = |p: usize, item: usize| p * stimuli.len() + item;

    for rhyme in [true, false] {
        let items: Vec<usize> = (0..stimuli.len()).filter(|&i| stimuli[i].rhyme == rhyme).collect();

        let mut labels = Vec::new();
        for &(suffix, r, nr, _, _) in &SURVEY_TABLE {
            labels.extend(std::iter::repeat_n(suffix, if rhyme { r } else { nr }));
        }
        labels.shuffle(&mut rng);
        let mut next = labels.into_iter();
        for p in 0..participants {
            for &i in &items {
                let suffix = next.next().expect("1800 labels");
                let orth = &stimuli[i].orth;
                let form = match suffix {
                    Suffix::Other => format!("{orth}i"),
                    s => apply_class(orth, PluralClass::plain(s))?,
                };
                records[slot(p, i)].produced = Some(form);
            }
        }

        for &(suffix, _, _, r, nr) in &SURVEY_TABLE {
            let Some((mean, se)) = (if rhyme { r } else { nr }) else { continue };
            let mut slots = Vec::new();
            for p in 0..participants {
                for &i in &items {
                    for (_, form) in candidate_forms(&stimuli[i].orth) {
                        if classify_plural(&stimuli[i].orth, &form).suffix == suffix {
                            slots.push((slot(p, i), form));
                        }
                    }
                }
            }
            let counts = solve_rating_counts(slots.len(), mean, se).ok_or_else(|| {
                Error::Data(format!("no rating distribution for {suffix} with mean {mean} and SE {se}"))
            })?;
            let mut values: Vec<u8> = Vec::with_capacity(slots.len());
            for (k, &c) in counts.iter().enumerate() {
                values.extend(std::iter::repeat_n(k as u8 + 1, c));
            }
            values.shuffle(&mut rng);
            for ((at, form), v) in slots.into_iter().zip(values) {
                records[at].ratings.insert(form, v);
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::corpus::builtin_stimuli;

    fn rec(item: &str, produced: &str, ratings: &[(&str, u8)]) -> SpeakerRecord {
        SpeakerRecord {
            participant: "p".into(),
            item: item.into(),
            produced: Some(produced.into()),
            ratings: ratings.iter().map(|&(f, r)| (f.to_string(), r)).collect(),
        }
    }

    #[test]
    fn two_e_productions() {
        let r = [rec("Bral", "Brale", &[]), rec("Kach", "Kache", &[])];
        let s = speaker_production_stats(&r, &builtin_stimuli()).unwrap();
        assert_eq!(s.percent(true, Suffix::E), 100.0);
        assert_eq!(s.n(false), 0);
    }

    #[test]
    fn hand_counted_file() {
        let csv = "participant,item,task,form,value
a,Bral,prod,Brale,
a,Pläk,prod,Pläks,
a,Mur,prod,Müre,
a,Vag,prod,Vagen,
b,Bral,prod,Bräler,
b,Pläk,prod,Pläke,
b,Mur,prod,Mur,
b,Vag,prod,Vagx,
c,Bral,prod,Brals,
c,Pläk,prod,Pläken,
c,Mur,prod,Muren,
c,Vag,prod,Vage,
";
        let recs = parse_speaker_csv(csv).unwrap();
        assert_eq!(recs.len(), 12);
        let s = speaker_production_stats(&recs, &builtin_stimuli()).unwrap();
        // Rhymes: Brale Müre Vagen Bräler Mur Vagx Brals Muren Vage
        assert_eq!(s.rhyme, [2, 3, 1, 1, 1, 1]);
        // Non-Rhymes: Pläks Pläke Pläken
        assert_eq!(s.nonrhyme, [1, 1, 0, 0, 1, 0]);
        assert_abs_diff_eq!(s.percent(true, Suffix::E), 100.0 / 3.0, epsilon = 1e-12);
        let items = speaker_item_productions(&recs, &builtin_stimuli()).unwrap();
        assert_eq!(items.iter().find(|i| i.item == "Mur").unwrap().counts, [1, 1, 1, 0, 0, 0]);
    }

    #[test]
    fn unknown_item_is_a_data_error() {
        let r = [rec("Blick", "Blicke", &[])];
        assert!(speaker_production_stats(&r, &builtin_stimuli()).unwrap_err().is_data_error());
    }

    #[test]
    fn rating_formulas() {
        let all5 = [rec("Bral", "Brale", &[("Brale", 5), ("Bräle", 5)])];
        let s = rating_stats(&all5, &builtin_stimuli()).unwrap();
        let e = s.get(true, Suffix::E).unwrap();
        assert_eq!((e.mean, e.se, e.n), (5.0, 0.0, 2));

        let mixed = [rec("Bral", "Brale", &[("Brale", 1), ("Bräle", 5)])];
        let e = rating_stats(&mixed, &builtin_stimuli()).unwrap().get(true, Suffix::E).unwrap();
        assert_abs_diff_eq!(e.mean, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.se, 2.0, epsilon = 1e-15);

        let bad = [rec("Bral", "Brale", &[("Brale", 7)])];
        assert!(rating_stats(&bad, &builtin_stimuli()).unwrap_err().is_data_error());
    }

    #[test]
    fn parse_rejects_bad_rows() {
        assert!(parse_speaker_csv("a,Bral,rate,Brale,6\n").unwrap_err().is_data_error());
        assert!(parse_speaker_csv("a,Bral,rate,Brale,x\n").is_err());
        assert!(parse_speaker_csv("a,Bral,sing,Brale,\n").is_err());
        assert!(parse_speaker_csv("a,Bral,prod,,\n").is_err());
        assert!(parse_speaker_csv("a,Bral,prod\n").is_err());
        assert!(parse_speaker_csv("a,Bral,prod,Brale,\na,Bral,prod,Brals,\n").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let r = vec![rec("Bral", "Brale", &[("Brale", 4), ("Brals", 2)])];
        assert_eq!(parse_speaker_csv(&speaker_csv(&r)).unwrap(), r);
    }

    #[test]
    fn solver_hits_target_moments() {
        for (n, m, se) in [(3150, 3.53, 0.021), (1800, 3.73, 0.026), (3600, 2.24, 0.020)] {
            let c = solve_rating_counts(n, m, se).unwrap();
            let values: Vec<u8> = c.iter().enumerate().flat_map(|(k, &v)| std::iter::repeat_n(k as u8 + 1, v)).collect();
            let s = RatingSummary::of(&values).unwrap();
            assert_eq!(s.n, n);
            assert!((s.mean - m).abs() < 0.005 && (s.se - se).abs() < 0.0005, "{s:?}");
        }
    }
}
