use serde::{Deserialize, Serialize};

use super::wug::{ItemProductions, WugReport};
use crate::error::{Error, Result};
use crate::morph::Suffix;

/// 1-based ranks with ties sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Tie-corrected Spearman correlation: Pearson correlation of average
/// ranks. `Ok(None)` when either vector is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Argument("at least two observations required".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Argument("NaN in input".into()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoRow {
    pub suffix: Suffix,
    /// `None` when either side is constant across items.
    pub rho: Option<f64>,
    pub n: usize,
}

/// Per-class Spearman correlation between model and speaker item-level
/// production proportions.
pub fn compare_model_speaker(model: &WugReport, speakers: &[ItemProductions]) -> Result<Vec<RhoRow>> {
    let mut names_m: Vec<&str> = model.items.iter().map(|i| i.item.as_str()).collect();
    let mut names_s: Vec<&str> = speakers.iter().map(|i| i.item.as_str()).collect();
    names_m.sort_unstable();
    names_s.sort_unstable();
    if names_m != names_s {
        return Err(Error::Argument("model and speaker reports cover different items".into()));
    }
    let paired: Vec<(&ItemProductions, &ItemProductions)> = model
        .items
        .iter()
        .map(|m| (m, speakers.iter().find(|s| s.item == m.item).expect("same item set")))
        .collect();
    Suffix::ALL
        .iter()
        .map(|&suffix| {
            let x: Vec<f64> = paired.iter().map(|(m, _)| m.proportion(suffix)).collect();
            let y: Vec<f64> = paired.iter().map(|(_, s)| s.proportion(suffix)).collect();
            Ok(RhoRow { suffix, rho: spearman_rho(&x, &y)?, n: x.len() })
        })
        .collect()
}
