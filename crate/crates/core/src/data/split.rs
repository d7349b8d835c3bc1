use rand::seq::SliceRandom;
use rand::Rng as _;

use super::dataset::{Dataset, SubgroupIndex};
use crate::error::{Error, Result};
use crate::nn::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified by `(y, s)`. Each cell is shuffled, its members are spread
/// evenly over `[0, 1)` and the merged order is cut into consecutive
/// pieces, so every piece holds each cell in proportion up to rounding.
/// When the fractions sum to one the test piece takes the remainder.
pub fn split_indices(y: &[u8], s: &[u8], fractions: (f64, f64, f64), seed: u64) -> Result<SplitIndices> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(*f > 0.0) || !f.is_finite()) || a + b + c > 1.0 + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be positive and sum to at most 1, got ({a}, {b}, {c})"
        )));
    }
    let n = y.len();
    let mut rng = Rng::new(seed);
    let idx = SubgroupIndex::new(y, s);
    let mut keyed: Vec<(f64, u64, usize)> = Vec::with_capacity(n);
    for (_, members) in idx.iter() {
        let mut m = members.to_vec();
        m.shuffle(&mut rng);
        let len = m.len() as f64;
        for (rank, i) in m.into_iter().enumerate() {
            keyed.push(((rank as f64 + 0.5) / len, rng.random(), i));
        }
    }
    keyed.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
    let order: Vec<usize> = keyed.into_iter().map(|k| k.2).collect();

    let n_train = (a * n as f64).round() as usize;
    let n_val = ((b * n as f64).round() as usize).min(n - n_train);
    let n_test = if (a + b + c - 1.0).abs() < 1e-9 {
        n - n_train - n_val
    } else {
        ((c * n as f64).round() as usize).min(n - n_train - n_val)
    };
    Ok(SplitIndices {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..n_train + n_val + n_test].to_vec(),
    })
}

impl Dataset {
    /// Fails when any `(y, s)` subgroup is absent from the training piece.
    pub fn split(&self, fractions: (f64, f64, f64), seed: u64) -> Result<Splits> {
        let ix = split_indices(&self.y, &self.s, fractions, seed)?;
        let train = self.subset(&ix.train);
        train.subgroup_index().require_all("the training split")?;
        Ok(Splits {
            train,
            val: self.subset(&ix.val),
            test: self.subset(&ix.test),
        })
    }
}
