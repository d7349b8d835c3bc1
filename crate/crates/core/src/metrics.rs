//! Utility and group-fairness metrics, Pareto frontiers and AOC.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[s][y][ŷ]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupCounts {
    pub cells: [[[usize; 2]; 2]; 2],
}

impl GroupCounts {
    pub fn new(y: &[u8], y_hat: &[u8], s: &[u8]) -> Result<Self> {
        if y.len() != y_hat.len() || y.len() != s.len() {
            return Err(Error::Shape(format!(
                "lengths differ: y {}, predictions {}, s {}",
                y.len(),
                y_hat.len(),
                s.len()
            )));
        }
        let mut c = Self::default();
        for ((&yi, &pi), &si) in y.iter().zip(y_hat).zip(s) {
            c.cells[si as usize][yi as usize][pi as usize] += 1;
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.cells.iter().flatten().flatten().sum()
    }

    /// P̂(ŷ = 1 | s, y ∈ ys).
    fn rate(&self, s: usize, ys: &[usize], what: &str) -> Result<f64> {
        let (mut n, mut pos) = (0, 0);
        for &y in ys {
            n += self.cells[s][y][0] + self.cells[s][y][1];
            pos += self.cells[s][y][1];
        }
        if n == 0 {
            return Err(Error::Empty(format!("no samples with s={s} for {what}")));
        }
        Ok(pos as f64 / n as f64)
    }

    pub fn demographic_parity(&self) -> Result<f64> {
        Ok((self.rate(1, &[0, 1], "DP")? - self.rate(0, &[0, 1], "DP")?).abs())
    }

    pub fn tpr_gap(&self) -> Result<f64> {
        Ok((self.rate(1, &[1], "TPR")? - self.rate(0, &[1], "TPR")?).abs())
    }

    pub fn fpr_gap(&self) -> Result<f64> {
        Ok((self.rate(1, &[0], "FPR")? - self.rate(0, &[0], "FPR")?).abs())
    }
}

pub fn accuracy(y: &[u8], y_hat: &[u8]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::Shape(format!("{} labels, {} predictions", y.len(), y_hat.len())));
    }
    if y.is_empty() {
        return Err(Error::Empty("accuracy of no samples".into()));
    }
    Ok(y.iter().zip(y_hat).filter(|(a, b)| a == b).count() as f64 / y.len() as f64)
}

/// |P̂(ŷ=1 | s=1) − P̂(ŷ=1 | s=0)|.
pub fn demographic_parity(y_hat: &[u8], s: &[u8]) -> Result<f64> {
    GroupCounts::new(y_hat, y_hat, s)?.demographic_parity()
}

/// |TPR(s=1) − TPR(s=0)|.
pub fn equal_opportunity(y_hat: &[u8], y: &[u8], s: &[u8]) -> Result<f64> {
    GroupCounts::new(y, y_hat, s)?.tpr_gap()
}

/// max(|TPR gap|, |FPR gap|).
pub fn equalized_odds(y_hat: &[u8], y: &[u8], s: &[u8]) -> Result<f64> {
    let c = GroupCounts::new(y, y_hat, s)?;
    Ok(c.tpr_gap()?.max(c.fpr_gap()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy: f64,
    pub dp: f64,
    /// Absent when a group has no positive (or, for EO, no negative) labels.
    pub eopp: Option<f64>,
    pub eo: Option<f64>,
}

pub fn evaluate(y: &[u8], y_hat: &[u8], s: &[u8]) -> Result<FairnessReport> {
    let c = GroupCounts::new(y, y_hat, s)?;
    let tpr = c.tpr_gap().ok();
    let fpr = c.fpr_gap().ok();
    Ok(FairnessReport {
        accuracy: accuracy(y, y_hat)?,
        dp: c.demographic_parity()?,
        eopp: tpr,
        eo: tpr.zip(fpr).map(|(a, b)| a.max(b)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub dp: f64,
    pub accuracy: f64,
    pub tag: String,
}

impl TradeoffPoint {
    pub fn new(dp: f64, accuracy: f64, tag: impl Into<String>) -> Self {
        Self {
            dp,
            accuracy,
            tag: tag.into(),
        }
    }

    /// Lower-or-equal dp and higher-or-equal accuracy, strictly better in one.
    pub fn dominates(&self, other: &Self) -> bool {
        self.dp <= other.dp
            && self.accuracy >= other.accuracy
            && (self.dp < other.dp || self.accuracy > other.accuracy)
    }
}

/// Non-dominated points sorted by dp ascending. Exact duplicates are kept.
pub fn pareto_frontier(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let mut sorted: Vec<&TradeoffPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.dp.total_cmp(&b.dp).then(b.accuracy.total_cmp(&a.accuracy)));
    let mut out: Vec<TradeoffPoint> = Vec::new();
    // Best accuracy seen so far and the smallest dp achieving it.
    let mut best: Option<(f64, f64)> = None;
    for p in sorted {
        let keep = match best {
            None => true,
            Some((acc, dp)) => match p.accuracy.total_cmp(&acc) {
                Ordering::Greater => true,
                Ordering::Equal => dp == p.dp,
                Ordering::Less => false,
            },
        };
        if keep {
            if best.is_none_or(|(acc, _)| p.accuracy > acc) {
                best = Some((p.accuracy, p.dp));
            }
            out.push(p.clone());
        }
    }
    out
}

/// Normalised area under the best-accuracy-so-far step curve over
/// `[0, dp_max]`. Left of the smallest dp the curve holds that point's
/// accuracy; points beyond `dp_max` do not contribute.
pub fn aoc(points: &[TradeoffPoint], dp_max: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("AOC of no points".into()));
    }
    if !(dp_max > 0.0) || !dp_max.is_finite() {
        return Err(Error::InvalidArgument(format!("dp_max must be positive, got {dp_max}")));
    }
    let front = pareto_frontier(points);
    let mut level = front[0].accuracy;
    let mut at = 0.0;
    let mut area = 0.0;
    for p in &front[1..] {
        if p.dp >= dp_max {
            break;
        }
        let x = p.dp.max(at);
        area += level * (x - at);
        at = x;
        level = level.max(p.accuracy);
    }
    area += level * (dp_max - at);
    Ok(area / dp_max)
}

pub fn write_points_csv(points: &[TradeoffPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_points_csv(path: &Path) -> Result<Vec<TradeoffPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|p| p.map_err(Error::from)).collect()
}
