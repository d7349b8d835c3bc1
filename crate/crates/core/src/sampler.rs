//! Fairness-aware positive pairs, minibatches and negative masks.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SubgroupIndex};
use crate::error::{Error, Result};
use crate::nn::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    /// Privileged favourable anchors pair with unprivileged favourable
    /// samples; everyone else pairs within their own `(y, s)` subgroup.
    #[default]
    Fair,
    /// Each anchor pairs with its sensitive-flipped twin.
    Counterfactual,
    /// Same-class pairing with no regard to `s`.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    #[default]
    Supervised,
    SelfSupervised,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPlan {
    pub positive_of: Vec<usize>,
    pub seed: u64,
    pub mode: SamplerMode,
}

/// `N` anchors and their positives. Entry `k < N` of the stacked batch is
/// anchor `k`; entry `N + k` is its positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub anchors: Vec<usize>,
    pub positives: Vec<usize>,
    pub y: Vec<u8>,
    pub s: Vec<u8>,
    pub pos_y: Vec<u8>,
    pub pos_s: Vec<u8>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Labels of the `2N` stacked entries.
    pub fn stacked_labels(&self) -> Vec<u8> {
        self.y.iter().chain(&self.pos_y).copied().collect()
    }
}

fn uniform_except(members: &[usize], me: usize, rng: &mut Rng) -> usize {
    debug_assert!(members.len() >= 2);
    let k = rng.random_range(0..members.len() - 1);
    if members[k] == me {
        members[members.len() - 1]
    } else {
        members[k]
    }
}

fn class_members(subgroups: &SubgroupIndex, y: u8) -> Vec<usize> {
    let mut v = subgroups.get(y, 0).to_vec();
    v.extend_from_slice(subgroups.get(y, 1));
    v
}

pub fn assign_positives(train: &Dataset, subgroups: &SubgroupIndex, mode: SamplerMode, rng: &mut Rng) -> Result<PairPlan> {
    let n = train.len();
    if subgroups.total() != n {
        return Err(Error::Shape(format!("subgroup index covers {} rows, dataset has {n}", subgroups.total())));
    }
    let mut positive_of = vec![usize::MAX; n];
    match mode {
        SamplerMode::Fair => {
            if !subgroups.get(1, 1).is_empty() && subgroups.get(1, 0).is_empty() {
                return Err(Error::EmptySubgroup {
                    y: 1,
                    s: 0,
                    context: "the fair sampler's cross-group pool".into(),
                });
            }
            for &i in subgroups.get(1, 1) {
                let pool = subgroups.get(1, 0);
                positive_of[i] = pool[rng.random_range(0..pool.len())];
            }
            for (y, s) in [(1, 0), (0, 1), (0, 0)] {
                let own = subgroups.get(y, s);
                if own.len() == 1 {
                    let class = class_members(subgroups, y);
                    if class.len() < 2 {
                        return Err(Error::SingletonSubgroup { y, s });
                    }
                    log::warn!("subgroup (y={y}, s={s}) has one member; pairing it within its class");
                    positive_of[own[0]] = uniform_except(&class, own[0], rng);
                } else {
                    for &i in own {
                        positive_of[i] = uniform_except(own, i, rng);
                    }
                }
            }
        }
        SamplerMode::None => {
            for y in [1, 0] {
                let class = class_members(subgroups, y);
                if class.len() == 1 {
                    return Err(Error::SingletonSubgroup {
                        y,
                        s: train.s[class[0]],
                    });
                }
                for &i in &class {
                    positive_of[i] = uniform_except(&class, i, rng);
                }
            }
        }
        SamplerMode::Counterfactual => {
            if n % 2 != 0 {
                return Err(Error::InvalidArgument(
                    "counterfactual pairing needs originals followed by their flipped twins".into(),
                ));
            }
            let half = n / 2;
            for i in 0..n {
                let twin = if i < half { i + half } else { i - half };
                if train.y[twin] != train.y[i] || train.s[twin] == train.s[i] {
                    return Err(Error::InvalidArgument(format!(
                        "row {twin} is not the counterfactual twin of row {i}"
                    )));
                }
                positive_of[i] = twin;
            }
        }
    }
    debug_assert!(positive_of.iter().enumerate().all(|(i, &p)| p != i && p < n));
    Ok(PairPlan {
        positive_of,
        seed: rng.seed(),
        mode,
    })
}

/// Originals followed by their sensitive-flipped twins.
pub fn counterfactual_augment(train: &Dataset) -> Result<Dataset> {
    train.concat(&train.counterfactual_flip()?)
}

/// Shuffles anchors and cuts them into batches of `batch_size`; a final
/// batch is kept only if it holds at least two anchors.
pub fn make_batches(plan: &PairPlan, data: &Dataset, batch_size: usize, rng: &mut Rng) -> Result<Vec<Batch>> {
    if batch_size < 2 {
        return Err(Error::InvalidArgument(format!("batch size must be at least 2, got {batch_size}")));
    }
    if plan.positive_of.len() != data.len() {
        return Err(Error::Shape(format!(
            "plan covers {} anchors, dataset has {} rows",
            plan.positive_of.len(),
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    Ok(order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(|anchors| {
            let positives: Vec<usize> = anchors.iter().map(|&a| plan.positive_of[a]).collect();
            Batch {
                y: anchors.iter().map(|&a| data.y[a]).collect(),
                s: anchors.iter().map(|&a| data.s[a]).collect(),
                pos_y: positives.iter().map(|&p| data.y[p]).collect(),
                pos_s: positives.iter().map(|&p| data.s[p]).collect(),
                anchors: anchors.to_vec(),
                positives,
            }
        })
        .collect())
}

/// `N × 2N` mask over the stacked batch. Self-supervised: everything except
/// the anchor and its own positive. Supervised: entries of the other class.
pub fn negatives_mask(batch: &Batch, mode: TrainingMode) -> Array2<bool> {
    let n = batch.len();
    let labels = batch.stacked_labels();
    Array2::from_shape_fn((n, 2 * n), |(i, k)| match mode {
        TrainingMode::SelfSupervised => k != i && k != n + i,
        TrainingMode::Supervised => labels[k] != batch.y[i],
    })
}

/// Share of favourable samples that are privileged, i.e. the fraction of
/// favourable anchors the fair sampler pairs across groups.
pub fn estimate_pi(subgroups: &SubgroupIndex) -> Result<f64> {
    let (p, u) = (subgroups.len(1, 1), subgroups.len(1, 0));
    if p + u == 0 {
        return Err(Error::Empty("no favourable (y = 1) samples".into()));
    }
    Ok(p as f64 / (p + u) as f64)
}

/// Fraction of favourable anchors whose positive has a different `s`.
pub fn cross_pair_fraction(plan: &PairPlan, data: &Dataset) -> Option<f64> {
    let (mut fav, mut cross) = (0usize, 0usize);
    for (i, &p) in plan.positive_of.iter().enumerate() {
        if data.y[i] == 1 {
            fav += 1;
            cross += usize::from(data.s[p] != data.s[i]);
        }
    }
    (fav > 0).then(|| cross as f64 / fav as f64)
}

pub fn write_plan_csv(plan: &PairPlan, data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["anchor_index", "positive_index", "anchor_y", "anchor_s", "pos_y", "pos_s"])?;
    for (i, &p) in plan.positive_of.iter().enumerate() {
        w.write_record([
            i.to_string(),
            p.to_string(),
            data.y[i].to_string(),
            data.s[i].to_string(),
            data.y[p].to_string(),
            data.s[p].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
