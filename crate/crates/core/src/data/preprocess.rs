//! One-hot encoding and z-scoring with statistics fitted on a training split.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::schema::{ColumnKind, Schema, SensitiveFeature};
use super::table::{RawTable, RawValues};
use crate::error::{Error, Result};

pub const MISSING: &str = "missing";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnStats {
    Continuous {
        name: String,
        mean: f64,
        /// Population standard deviation; zero encodes the column as 0.
        std: f64,
        median: f64,
    },
    Categorical {
        name: String,
        vocabulary: Vec<String>,
        missing_slot: bool,
    },
    /// Privileged/unprivileged indicator pair derived from `s`.
    SensitiveIndicator { name: String },
}

impl ColumnStats {
    fn width(&self) -> usize {
        match self {
            ColumnStats::Continuous { .. } => 1,
            ColumnStats::Categorical {
                vocabulary,
                missing_slot,
                ..
            } => vocabulary.len() + usize::from(*missing_slot),
            ColumnStats::SensitiveIndicator { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStats {
    pub schema: String,
    pub columns: Vec<ColumnStats>,
    pub feature_names: Vec<String>,
    pub sensitive_columns: Option<(usize, usize)>,
}

impl FittedStats {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn raw_column<'a>(raw: &'a RawTable, name: &str) -> Result<&'a RawValues> {
    raw.columns
        .iter()
        .find(|c| c.name == name)
        .map(|c| &c.values)
        .ok_or_else(|| Error::Schema(format!("raw table lacks column `{name}`")))
}

fn fit_continuous(name: &str, values: &[Option<f64>]) -> ColumnStats {
    let mut obs: Vec<f64> = values.iter().flatten().copied().collect();
    if obs.is_empty() {
        log::warn!("column `{name}` has no observed values; encoded as constant 0");
        return ColumnStats::Continuous {
            name: name.into(),
            mean: 0.0,
            std: 0.0,
            median: 0.0,
        };
    }
    obs.sort_by(f64::total_cmp);
    let k = obs.len();
    let median = if k % 2 == 1 {
        obs[k / 2]
    } else {
        0.5 * (obs[k / 2 - 1] + obs[k / 2])
    };
    let mean = obs.iter().sum::<f64>() / k as f64;
    let var = obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
    let mut std = var.sqrt();
    if std <= 1e-12 * mean.abs().max(1.0) {
        log::warn!("column `{name}` has zero variance; encoded as constant 0");
        std = 0.0;
    }
    ColumnStats::Continuous {
        name: name.into(),
        mean,
        std,
        median,
    }
}

pub fn fit(raw: &RawTable, schema: &Schema) -> Result<FittedStats> {
    let sens = schema.sensitive.column.as_str();
    let mode = schema.sensitive_feature;
    let mut columns = Vec::new();
    let mut indicator_placed = false;
    for spec in &schema.columns {
        if spec.name == sens && mode != SensitiveFeature::Keep {
            if mode == SensitiveFeature::Binary {
                columns.push(ColumnStats::SensitiveIndicator { name: spec.name.clone() });
                indicator_placed = true;
            }
            continue;
        }
        match (&spec.kind, raw_column(raw, &spec.name)) {
            (ColumnKind::Ignore, _) => {}
            (ColumnKind::Continuous, Ok(RawValues::Continuous(v))) => columns.push(fit_continuous(&spec.name, v)),
            (ColumnKind::Categorical { categories }, Ok(RawValues::Categorical(v))) => {
                let vocabulary = match categories {
                    Some(c) => c.clone(),
                    None => v.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
                };
                columns.push(ColumnStats::Categorical {
                    name: spec.name.clone(),
                    vocabulary,
                    missing_slot: v.iter().any(Option::is_none),
                });
            }
            (_, Err(e)) => return Err(e),
            _ => return Err(Error::Schema(format!("column `{}` kind differs from raw table", spec.name))),
        }
    }
    if mode == SensitiveFeature::Binary && !indicator_placed {
        columns.push(ColumnStats::SensitiveIndicator { name: sens.to_string() });
    }

    let mut feature_names = Vec::new();
    let mut sensitive_columns = None;
    for c in &columns {
        let base = feature_names.len();
        match c {
            ColumnStats::Continuous { name, .. } => feature_names.push(name.clone()),
            ColumnStats::Categorical {
                name,
                vocabulary,
                missing_slot,
            } => {
                feature_names.extend(vocabulary.iter().map(|v| format!("{name}={v}")));
                if *missing_slot {
                    feature_names.push(format!("{name}={MISSING}"));
                }
                if name == sens && !*missing_slot && vocabulary.len() == 2 {
                    let m: Vec<Option<u8>> = vocabulary.iter().map(|v| schema.sensitive.rule.map(v)).collect();
                    sensitive_columns = match (m[0], m[1]) {
                        (Some(1), Some(0)) => Some((base, base + 1)),
                        (Some(0), Some(1)) => Some((base + 1, base)),
                        _ => None,
                    };
                }
            }
            ColumnStats::SensitiveIndicator { name } => {
                feature_names.push(format!("{name}=privileged"));
                feature_names.push(format!("{name}=unprivileged"));
                sensitive_columns = Some((base, base + 1));
            }
        }
    }
    Ok(FittedStats {
        schema: schema.name.clone(),
        columns,
        feature_names,
        sensitive_columns,
    })
}

pub fn transform(raw: &RawTable, stats: &FittedStats) -> Result<Dataset> {
    let n = raw.len();
    let d: usize = stats.columns.iter().map(ColumnStats::width).sum();
    let mut x = Array2::<f64>::zeros((n, d));
    let mut at = 0;
    for c in &stats.columns {
        match c {
            ColumnStats::Continuous {
                name,
                mean,
                std,
                median,
            } => {
                let RawValues::Continuous(v) = raw_column(raw, name)? else {
                    return Err(Error::Schema(format!("column `{name}` is not continuous")));
                };
                if *std > 0.0 {
                    for (i, val) in v.iter().enumerate() {
                        x[[i, at]] = (val.unwrap_or(*median) - mean) / std;
                    }
                }
            }
            ColumnStats::Categorical {
                name,
                vocabulary,
                missing_slot,
            } => {
                let RawValues::Categorical(v) = raw_column(raw, name)? else {
                    return Err(Error::Schema(format!("column `{name}` is not categorical")));
                };
                let mut unseen = 0usize;
                for (i, val) in v.iter().enumerate() {
                    let slot = match val {
                        Some(s) => vocabulary.iter().position(|c| c == s),
                        None if *missing_slot => Some(vocabulary.len()),
                        None => None,
                    };
                    match slot {
                        Some(k) => x[[i, at + k]] = 1.0,
                        None => unseen += 1,
                    }
                }
                if unseen > 0 {
                    log::warn!("column `{name}`: {unseen} rows with unseen categories encoded as all zeros");
                }
            }
            ColumnStats::SensitiveIndicator { .. } => {
                for (i, &s) in raw.s.iter().enumerate() {
                    x[[i, at + 1 - s as usize]] = 1.0;
                }
            }
        }
        at += c.width();
    }
    Dataset::new(x, raw.y.clone(), raw.s.clone(), stats.feature_names.clone(), raw.source.clone())?
        .with_sensitive_columns(stats.sensitive_columns)
}

/// Fits statistics on `raw` unless `fit_stats` is given, then transforms.
pub fn preprocess(raw: &RawTable, schema: &Schema, fit_stats: Option<&FittedStats>) -> Result<(Dataset, FittedStats)> {
    let stats = match fit_stats {
        Some(s) => s.clone(),
        None => fit(raw, schema)?,
    };
    let ds = transform(raw, &stats)?;
    Ok((ds, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::table::read_csv;

    const SCHEMA: &str = r#"{"name":"t","columns":[
        {"name":"a","kind":"continuous"},
        {"name":"c","kind":"categorical","categories":["a","b"]},
        {"name":"sex","kind":"categorical"}],
      "label":{"column":"y","positive":["1"],"negative":["0"]},
      "sensitive":{"column":"sex","positive":["M"],"negative":["F"]}}"#;

    fn raw(text: &str, schema: &Schema) -> RawTable {
        read_csv(text.as_bytes(), Path::new("mem"), schema).unwrap()
    }

    #[test]
    fn zscore_example() {
        let s = Schema::from_json(SCHEMA).unwrap();
        let r = raw("a,c,sex,y\n1,a,M,1\n2,b,F,0\n3,a,F,1\n", &s);
        let (d, _) = preprocess(&r, &s, None).unwrap();
        let z = 1.5f64.sqrt();
        let col: Vec<f64> = d.x.column(0).to_vec();
        for (got, want) in col.iter().zip([-z, 0.0, z]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((z - 1.2247).abs() < 1e-4);
        assert_eq!(d.x.row(0).to_vec()[1..3], [1.0, 0.0]);
    }

    #[test]
    fn keep_mode_finds_binary_sex_pair() {
        let s = Schema::from_json(SCHEMA).unwrap();
        let r = raw("a,c,sex,y\n1,a,M,1\n2,b,F,0\n", &s);
        let (d, st) = preprocess(&r, &s, None).unwrap();
        assert_eq!(st.feature_names, ["a", "c=a", "c=b", "sex=F", "sex=M"]);
        assert_eq!(d.sensitive_columns, Some((4, 3)));
        let f = d.counterfactual_flip().unwrap();
        assert_eq!(f.x.row(0).to_vec()[3..], [1.0, 0.0]);
    }

    #[test]
    fn stats_reuse_is_idempotent() {
        let s = Schema::from_json(SCHEMA).unwrap();
        let r = raw("a,c,sex,y\n1,a,M,1\n2,b,F,0\n5,b,F,0\n", &s);
        let (d1, st) = preprocess(&r, &s, None).unwrap();
        let (d2, st2) = preprocess(&r, &s, Some(&st)).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(st, st2);
    }

    #[test]
    fn missing_unseen_and_constant() {
        let s = Schema::from_json(SCHEMA).unwrap();
        let train = raw("a,c,sex,y\n4,a,M,1\n4,?,F,0\n?,b,F,1\n", &s);
        let (d, st) = preprocess(&train, &s, None).unwrap();
        assert!(d.x.column(0).iter().all(|&v| v == 0.0));
        assert_eq!(d.x.row(1).to_vec()[1..4], [0.0, 0.0, 1.0]);
        let test = raw("a,c,sex,y\n1,zzz,M,1\n", &s);
        let (t, _) = preprocess(&test, &s, Some(&st)).unwrap();
        assert_eq!(t.x.row(0).to_vec()[1..4], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn median_imputation() {
        let s = Schema::from_json(SCHEMA).unwrap();
        let r = raw("a,c,sex,y\n1,a,M,1\n3,a,F,0\n?,a,F,0\n", &s);
        let (d, _) = preprocess(&r, &s, None).unwrap();
        assert!(d.x[[2, 0]].abs() < 1e-12);
    }

    #[test]
    fn one_hot_groups_sum_to_one() {
        let s = Schema::builtin("german").unwrap();
        let text = "checking_status,duration,credit_history,purpose,credit_amount,savings_status,employment,installment_commitment,personal_status,other_parties,residence_since,property_magnitude,age,other_payment_plans,housing,existing_credits,job,num_dependents,own_telephone,foreign_worker,class\n\
A11,6,A34,A43,1169,A65,A75,4,A93,A101,4,A121,67,A143,A152,2,A173,1,A192,A201,1\n\
A12,48,A32,A43,5951,A61,A73,2,A92,A101,2,A121,22,A143,A152,1,A173,1,A191,A201,2\n";
        let r = raw(text, &s);
        assert_eq!(r.s, vec![1, 0]);
        let (d, st) = preprocess(&r, &s, None).unwrap();
        let (p, u) = d.sensitive_columns.unwrap();
        assert_eq!(st.feature_names[p], "age=privileged");
        assert_eq!(st.feature_names[u], "age=unprivileged");
        assert!(!st.feature_names.iter().any(|n| n == "age"));
        let mut at = 0;
        for c in &st.columns {
            let w = c.width();
            if !matches!(c, ColumnStats::Continuous { .. }) {
                for row in d.x.rows() {
                    assert_eq!(row.slice(ndarray::s![at..at + w]).sum(), 1.0);
                }
            }
            at += w;
        }
    }

    #[test]
    fn stats_sidecar_roundtrip() {
        let s = Schema::from_json(SCHEMA).unwrap();
        let r = raw("a,c,sex,y\n1,a,M,1\n2,b,F,0\n", &s);
        let st = fit(&r, &s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stats.json");
        st.save(&p).unwrap();
        assert_eq!(FittedStats::load(&p).unwrap(), st);
    }
}
