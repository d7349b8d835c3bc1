//! Finite joint distributions and exact information quantities (nats).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SUM_TOL: f64 = 1e-12;

/// Probability table over a product of finite supports, row-major in axis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteJoint {
    axes: Vec<String>,
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl FiniteJoint {
    pub fn new(axes: Vec<String>, sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if axes.len() != sizes.len() || axes.is_empty() {
            return Err(Error::InvalidDistribution(format!(
                "{} axis labels for {} supports",
                axes.len(),
                sizes.len()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::InvalidDistribution(format!("duplicate axis `{a}`")));
            }
        }
        let cells: usize = sizes.iter().product();
        if cells != probs.len() || cells == 0 {
            return Err(Error::InvalidDistribution(format!(
                "supports {sizes:?} need {cells} cells, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self { axes, sizes, probs })
    }

    pub fn from_fn(axes: &[&str], sizes: &[usize], f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let cells: usize = sizes.iter().product();
        let mut idx = vec![0; sizes.len()];
        let mut probs = Vec::with_capacity(cells);
        for flat in 0..cells {
            decode(flat, sizes, &mut idx);
            probs.push(f(&idx));
        }
        Self::new(axes.iter().map(|a| a.to_string()).collect(), sizes.to_vec(), probs)
    }

    /// Scales non-negative weights to sum to one.
    pub fn from_weights(axes: &[&str], sizes: &[usize], weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Self::new(
            axes.iter().map(|a| a.to_string()).collect(),
            sizes.to_vec(),
            weights.into_iter().map(|w| w / total).collect(),
        )
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn axis(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::InvalidDistribution(format!("no axis `{name}` in {:?}", self.axes)))
    }

    pub fn size_of(&self, name: &str) -> Result<usize> {
        Ok(self.sizes[self.axis(name)?])
    }

    /// Cells with non-zero mass.
    pub fn support(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(flat, &p)| {
            let mut idx = vec![0; self.sizes.len()];
            decode(flat, &self.sizes, &mut idx);
            (idx, p)
        })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut flat = 0;
        for (i, s) in idx.iter().zip(&self.sizes) {
            flat = flat * s + i;
        }
        self.probs[flat]
    }

    /// Probability that `axis == value`.
    pub fn mass(&self, axis: &str, value: usize) -> Result<f64> {
        let a = self.axis(axis)?;
        Ok(self.support().filter(|(i, _)| i[a] == value).map(|(_, p)| p).sum())
    }

    pub fn marginal(&self, keep: &[&str]) -> Result<FiniteJoint> {
        let pos = self.positions(keep)?;
        let sizes: Vec<usize> = pos.iter().map(|&p| self.sizes[p]).collect();
        let mut acc = BTreeMap::<Vec<usize>, f64>::new();
        for (idx, p) in self.support() {
            *acc.entry(pos.iter().map(|&a| idx[a]).collect()).or_default() += p;
        }
        let cells: usize = sizes.iter().product();
        let mut probs = vec![0.0; cells];
        for (k, p) in acc {
            let mut flat = 0;
            for (i, s) in k.iter().zip(&sizes) {
                flat = flat * s + i;
            }
            probs[flat] = p;
        }
        renormalized(keep.iter().map(|a| a.to_string()).collect(), sizes, probs)
    }

    /// The table restricted to `axis == value` and renormalized.
    pub fn condition(&self, axis: &str, value: usize) -> Result<FiniteJoint> {
        let a = self.axis(axis)?;
        let mass = self.mass(axis, value)?;
        if !(mass > 0.0) {
            return Err(Error::InvalidDistribution(format!("event {axis} = {value} has zero mass")));
        }
        let mut idx = vec![0; self.sizes.len()];
        let probs = (0..self.probs.len())
            .map(|flat| {
                decode(flat, &self.sizes, &mut idx);
                if idx[a] == value {
                    self.probs[flat] / mass
                } else {
                    0.0
                }
            })
            .collect();
        renormalized(self.axes.clone(), self.sizes.clone(), probs)
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.axis(n)).collect()
    }
}

/// Summation can drift from one by a few ulps; a final rescale keeps tables valid.
fn renormalized(axes: Vec<String>, sizes: Vec<usize>, mut probs: Vec<f64>) -> Result<FiniteJoint> {
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    FiniteJoint::new(axes, sizes, probs)
}

fn decode(mut flat: usize, sizes: &[usize], out: &mut [usize]) {
    for (o, s) in out.iter_mut().zip(sizes).rev() {
        *o = flat % s;
        flat /= s;
    }
}

fn check_disjoint(groups: &[&[&str]]) -> Result<()> {
    let mut seen: Vec<&str> = Vec::new();
    for g in groups {
        for a in *g {
            if seen.contains(a) {
                return Err(Error::InvalidArgument(format!("axis `{a}` appears in more than one argument")));
            }
            seen.push(a);
        }
    }
    Ok(())
}

pub fn entropy(joint: &FiniteJoint, axes: &[&str]) -> Result<f64> {
    let m = joint.marginal(axes)?;
    Ok(-m.support().map(|(_, p)| p * p.ln()).sum::<f64>())
}

/// `I(A; B) = Σ p(a,b) ln(p(a,b) / (p(a) p(b)))`.
pub fn exact_mi(joint: &FiniteJoint, a: &[&str], b: &[&str]) -> Result<f64> {
    exact_cmi(joint, a, b, &[])
}

/// `I(A; B | C) = Σ p(a,b,c) ln(p(a,b,c) p(c) / (p(a,c) p(b,c)))`.
pub fn exact_cmi(joint: &FiniteJoint, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("mutual information needs two non-empty axis sets".into()));
    }
    check_disjoint(&[a, b, c])?;
    let pa = joint.positions(a)?;
    let pb = joint.positions(b)?;
    let pc = joint.positions(c)?;
    let key = |idx: &[usize], pos: &[&[usize]]| -> Vec<usize> {
        pos.iter().flat_map(|p| p.iter().map(|&i| idx[i])).collect()
    };
    let mut abc = BTreeMap::<Vec<usize>, f64>::new();
    let mut ac = BTreeMap::<Vec<usize>, f64>::new();
    let mut bc = BTreeMap::<Vec<usize>, f64>::new();
    let mut cc = BTreeMap::<Vec<usize>, f64>::new();
    for (idx, p) in joint.support() {
        *abc.entry(key(&idx, &[&pa, &pb, &pc])).or_default() += p;
        *ac.entry(key(&idx, &[&pa, &pc])).or_default() += p;
        *bc.entry(key(&idx, &[&pb, &pc])).or_default() += p;
        *cc.entry(key(&idx, &[&pc])).or_default() += p;
    }
    let (na, nb) = (pa.len(), pb.len());
    let mut total = 0.0;
    for (k, p) in &abc {
        let (ka, rest) = k.split_at(na);
        let (kb, kc) = rest.split_at(nb);
        let p_ac = ac[&[ka, kc].concat()];
        let p_bc = bc[&[kb, kc].concat()];
        let p_c = cc[kc];
        total += p * (p * p_c / (p_ac * p_bc)).ln();
    }
    // Exact zero can come out as -1e-17.
    Ok(total.max(0.0))
}
