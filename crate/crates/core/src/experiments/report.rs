//! CSV tables and a JSON bundle keyed by table, row and column.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::metrics::PrfTable;
use super::speakers::{ProductionStats, RatingStats};
use super::stats::RhoRow;
use super::train::EpochRecord;
use super::wug::{RankProfile, WugReport};
use crate::morph::Suffix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedAccuracy {
    pub seed: u64,
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

/// Everything a run can report; absent parts are skipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Split sizes `(train, dev, test)`.
    pub split_sizes: Option<(usize, usize, usize)>,
    pub accuracy: Vec<SeedAccuracy>,
    pub histories: Vec<(u64, Vec<EpochRecord>)>,
    /// Seed-averaged test-set suffix scores.
    pub prf: Option<PrfTable>,
    pub wug: Option<WugReport>,
    pub rank_profile: Option<RankProfile>,
    pub rho: Option<Vec<RhoRow>>,
    pub speaker_production: Option<ProductionStats>,
    pub speaker_ratings: Option<RatingStats>,
}

fn f(x: f64) -> String {
    format!("{x:.4}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_else(|| "NA".into())
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn round4(x: f64) -> Value {
    json!((x * 1e4).round() / 1e4)
}

impl Report {
    pub fn mean_accuracy(&self) -> Option<SeedAccuracy> {
        let a = &self.accuracy;
        Some(SeedAccuracy {
            seed: 0,
            train: mean(a.iter().map(|s| s.train))?,
            dev: mean(a.iter().map(|s| s.dev))?,
            test: mean(a.iter().map(|s| s.test))?,
        })
    }

    /// `(file name, contents)` pairs in a fixed order.
    pub fn csv_files(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if !self.accuracy.is_empty() {
            let mut s = String::from("seed,train,dev,test\n");
            for a in &self.accuracy {
                s.push_str(&format!("{},{},{},{}\n", a.seed, f(a.train), f(a.dev), f(a.test)));
            }
            if let Some(m) = self.mean_accuracy() {
                s.push_str(&format!("mean,{},{},{}\n", f(m.train), f(m.dev), f(m.test)));
            }
            if let Some((tr, de, te)) = self.split_sizes {
                s.push_str(&format!("N,{tr},{de},{te}\n"));
            }
            out.push(("accuracy.csv".into(), s));
        }
        if !self.histories.is_empty() {
            let mut s = String::from("seed,epoch,train_loss,dev_accuracy\n");
            for (seed, h) in &self.histories {
                for r in h {
                    s.push_str(&format!("{seed},{},{},{}\n", r.epoch, f(r.train_loss), f(r.dev_accuracy)));
                }
            }
            out.push(("history.csv".into(), s));
        }
        if self.prf.is_some() || self.wug.is_some() || self.rho.is_some() {
            let mut s = String::from("class,precision,recall,f1,support,pct_r,pct_nr,rho\n");
            for suffix in Suffix::ALL {
                let p = self.prf.as_ref().map(|t| t.get(suffix));
                let (r, nr) = match &self.wug {
                    Some(w) => (Some(w.category_percent(true)[suffix.index()]), Some(w.category_percent(false)[suffix.index()])),
                    None => (None, None),
                };
                let rho = self.rho.as_ref().and_then(|rows| rows[suffix.index()].rho);
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    suffix.label(),
                    opt(p.map(|p| p.precision)),
                    opt(p.map(|p| p.recall)),
                    opt(p.map(|p| p.f1)),
                    p.map(|p| p.support.to_string()).unwrap_or_else(|| "NA".into()),
                    opt(r),
                    opt(nr),
                    opt(rho),
                ));
            }
            out.push(("model_results.csv".into(), s));
        }
        if let Some(w) = &self.wug {
            let mut s = String::from("item,category,class,proportion,count\n");
            for item in &w.items {
                let cat = if item.rhyme { "R" } else { "NR" };
                let props = item.proportions();
                for suffix in Suffix::ALL {
                    s.push_str(&format!(
                        "{},{cat},{},{},{}\n",
                        item.item,
                        suffix.label(),
                        f(props[suffix.index()]),
                        item.counts[suffix.index()]
                    ));
                }
            }
            out.push(("wug_items.csv".into(), s));
            let mut s = String::from("seed");
            for item in &w.items {
                s.push(',');
                s.push_str(&item.item);
            }
            s.push('\n');
            for (k, seed) in w.seeds.iter().enumerate() {
                s.push_str(&seed.to_string());
                for item in &w.items {
                    s.push(',');
                    s.push_str(item.forms.get(k).map(String::as_str).unwrap_or(""));
                }
                s.push('\n');
            }
            out.push(("wug_forms.csv".into(), s));
        }
        if let Some(p) = &self.rank_profile {
            let mut s = String::from("rank,class,percent,count\n");
            for rank in 1..=p.k {
                let pct = p.percent(rank);
                let counts = p.counts(rank);
                for suffix in Suffix::ALL {
                    s.push_str(&format!("{rank},{},{},{}\n", suffix.label(), f(pct[suffix.index()]), counts[suffix.index()]));
                }
            }
            out.push(("rank_profile.csv".into(), s));
        }
        if self.speaker_production.is_some() || self.speaker_ratings.is_some() {
            let mut s = String::from("class,category,prod_pct,n,rating,se\n");
            for suffix in [Suffix::E, Suffix::En, Suffix::Er, Suffix::S, Suffix::Zero, Suffix::Other] {
                for rhyme in [true, false] {
                    let (pct, n) = match &self.speaker_production {
                        Some(p) => (Some(p.percent(rhyme, suffix)), p.counts(rhyme)[suffix.index()].to_string()),
                        None => (None, "NA".into()),
                    };
                    let r = self.speaker_ratings.as_ref().and_then(|r| r.get(rhyme, suffix));
                    s.push_str(&format!(
                        "{},{},{},{n},{},{}\n",
                        suffix.label(),
                        if rhyme { "R" } else { "NR" },
                        opt(pct),
                        opt(r.map(|r| r.mean)),
                        opt(r.map(|r| r.se))
                    ));
                }
            }
            if let Some(r) = &self.speaker_ratings {
                for (cat, o) in [("R", r.overall_rhyme), ("NR", r.overall_nonrhyme)] {
                    let n = self.speaker_production.as_ref().map(|p| p.n(cat == "R").to_string()).unwrap_or_default();
                    s.push_str(&format!("overall,{cat},NA,{n},{},{}\n", opt(o.map(|o| o.mean)), opt(o.map(|o| o.se))));
                }
            }
            out.push(("survey.csv".into(), s));
        }
        out
    }

    /// Machine-readable bundle: `table -> row -> column -> value`.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        if let Some(m) = self.mean_accuracy() {
            let sizes = self.split_sizes;
            root.insert(
                "model_accuracy".into(),
                json!({
                    "train": {"percent": round4(m.train), "n": sizes.map(|s| s.0)},
                    "dev": {"percent": round4(m.dev), "n": sizes.map(|s| s.1)},
                    "test": {"percent": round4(m.test), "n": sizes.map(|s| s.2)},
                    "seeds": self.accuracy.iter().map(|a| a.seed).collect::<Vec<_>>(),
                }),
            );
        }
        if self.prf.is_some() || self.wug.is_some() || self.rho.is_some() {
            let mut table = Map::new();
            for suffix in Suffix::ALL {
                let mut row = Map::new();
                if let Some(p) = self.prf.as_ref().map(|t| t.get(suffix)) {
                    row.insert("precision".into(), round4(p.precision));
                    row.insert("recall".into(), round4(p.recall));
                    row.insert("f1".into(), round4(p.f1));
                    row.insert("support".into(), json!(p.support));
                }
                if let Some(w) = &self.wug {
                    row.insert("pct_r".into(), round4(w.category_percent(true)[suffix.index()]));
                    row.insert("pct_nr".into(), round4(w.category_percent(false)[suffix.index()]));
                }
                if let Some(rows) = &self.rho {
                    row.insert("rho".into(), rows[suffix.index()].rho.map(round4).unwrap_or(Value::Null));
                }
                table.insert(suffix.label().into(), Value::Object(row));
            }
            root.insert("model_results".into(), Value::Object(table));
        }
        if let Some(p) = &self.rank_profile {
            let ranks: Vec<Value> = (1..=p.k)
                .map(|rank| {
                    let pct = p.percent(rank);
                    Value::Object(Suffix::ALL.iter().map(|s| (s.label().to_string(), round4(pct[s.index()]))).collect())
                })
                .collect();
            root.insert("rank_profile".into(), json!(ranks));
        }
        if self.speaker_production.is_some() || self.speaker_ratings.is_some() {
            let mut table = Map::new();
            for suffix in Suffix::ALL {
                let mut row = Map::new();
                for (cat, rhyme) in [("R", true), ("NR", false)] {
                    let mut cell = Map::new();
                    if let Some(p) = &self.speaker_production {
                        cell.insert("prod_pct".into(), round4(p.percent(rhyme, suffix)));
                        cell.insert("n".into(), json!(p.counts(rhyme)[suffix.index()]));
                    }
                    if let Some(r) = self.speaker_ratings.as_ref().and_then(|r| r.get(rhyme, suffix)) {
                        cell.insert("rating".into(), round4(r.mean));
                        cell.insert("se".into(), round4(r.se));
                    }
                    row.insert(cat.into(), Value::Object(cell));
                }
                table.insert(suffix.label().into(), Value::Object(row));
            }
            root.insert("survey".into(), Value::Object(table));
        }
        Value::Object(root)
    }
}
