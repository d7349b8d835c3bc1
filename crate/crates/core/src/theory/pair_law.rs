//! Positive-pair laws over finite supports.
//!
//! A base table over `(x, y, s)` plus a deterministic encoder `x -> z` gives
//! the joint of `(z, z⁺, y, s, c)` where `c = 1` marks a cross-group pair.
//! Only favourable anchors (`y = 1`) take the cross branch; their positive is
//! drawn from `p(x | y = 1, s⁺ = 1 − s)`. Every other positive comes from
//! `p(x | y, s)`.

use serde::{Deserialize, Serialize};

use super::joint::{exact_cmi, FiniteJoint};
use crate::error::{Error, Result};

pub const WITHIN: usize = 0;
pub const CROSS: usize = 1;
/// Tolerance for the conditional independences the construction relies on.
pub const ASSUMPTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteEncoder {
    pub map: Vec<usize>,
}

impl DiscreteEncoder {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::InvalidArgument("encoder over an empty support".into()));
        }
        Ok(Self { map })
    }

    pub fn n_z(&self) -> usize {
        self.map.iter().max().map_or(0, |m| m + 1)
    }

    /// Every map from `{0..nx}` to `{0..nz}`, in lexicographic order.
    pub fn exhaustive(nx: usize, nz: usize) -> Vec<DiscreteEncoder> {
        let total = nz.pow(nx as u32);
        (0..total)
            .map(|mut k| {
                let mut map = vec![0; nx];
                for m in map.iter_mut().rev() {
                    *m = k % nz;
                    k /= nz;
                }
                DiscreteEncoder { map }
            })
            .collect()
    }
}

/// Base table over axes `x, y, s` with binary `y` and `s`.
pub fn base_joint(nx: usize, probs: Vec<f64>) -> Result<FiniteJoint> {
    FiniteJoint::new(vec!["x".into(), "y".into(), "s".into()], vec![nx, 2, 2], probs)
}

fn check_base(base: &FiniteJoint) -> Result<usize> {
    if base.axes() != ["x", "y", "s"] || base.sizes()[1] != 2 || base.sizes()[2] != 2 {
        return Err(Error::InvalidDistribution(format!(
            "base must have axes [x, y, s] with binary y and s, got {:?} with supports {:?}",
            base.axes(),
            base.sizes()
        )));
    }
    Ok(base.sizes()[0])
}

/// `Pr[S = 1 | Y = 1]`, the cross-pair fraction the sampler realises.
pub fn default_pi(base: &FiniteJoint) -> Result<f64> {
    check_base(base)?;
    let py1 = base.mass("y", 1)?;
    if !(py1 > 0.0) {
        return Err(Error::Infeasible("the favourable class has no mass".into()));
    }
    Ok((base.get_sum(|i| i[1] == 1 && i[2] == 1)) / py1)
}

impl FiniteJoint {
    fn get_sum(&self, pred: impl Fn(&[usize]) -> bool) -> f64 {
        self.support().filter(|(i, _)| pred(i)).map(|(_, p)| p).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLaw {
    /// Axes `z, zp, y, s, c`.
    pub joint: FiniteJoint,
    /// Mixture weight of the cross branch for favourable anchors, `Pr[C = cross | Y = 1]`.
    pub pi: f64,
}

impl PairLaw {
    /// `Pr[C = cross] = π · Pr[Y = 1]`.
    pub fn cross_mass(&self) -> f64 {
        self.joint.mass("c", CROSS).unwrap_or(0.0)
    }

    /// Named assumption checks; an empty list means the law is valid.
    pub fn violations(&self) -> Result<Vec<Violation>> {
        let j = &self.joint;
        let mut out = Vec::new();
        let mut check = |assumption: &'static str, quantity: &'static str, value: f64| {
            if value > ASSUMPTION_TOL {
                out.push(Violation {
                    assumption,
                    quantity,
                    value,
                });
            }
        };
        if self.cross_mass() > 0.0 {
            let cross = j.condition("c", CROSS)?;
            check("assumption 1 (cross branch)", "I(Z;Z+|Y,C=cross)", exact_cmi(&cross, &["z"], &["zp"], &["y"])?);
        }
        if j.mass("c", WITHIN)? > 0.0 {
            let within = j.condition("c", WITHIN)?;
            check(
                "assumption 1 (within branch)",
                "I(Z;Z+|Y,S,C=within)",
                exact_cmi(&within, &["z"], &["zp"], &["y", "s"])?,
            );
        }
        check("assumption 2", "I(C;Z|Y,S)", exact_cmi(j, &["c"], &["z"], &["y", "s"])?);
        check("assumption 2", "I(C;Z+|Y,S)", exact_cmi(j, &["c"], &["zp"], &["y", "s"])?);
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations()?;
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Infeasible(v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub assumption: &'static str,
    pub quantity: &'static str,
    pub value: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} violated: {} = {:.3e}", self.assumption, self.quantity, self.value)
    }
}

/// Builds the law with a constant cross probability `π` for favourable
/// anchors. Rejects bases where `X` depends on `S` given `Y = 1`, since no
/// encoder could then satisfy the cross-branch independence in general.
pub fn build_pair_law(base: &FiniteJoint, enc: &DiscreteEncoder, pi_override: Option<f64>) -> Result<PairLaw> {
    let pi = match pi_override {
        Some(p) if (0.0..=1.0).contains(&p) => p,
        Some(p) => return Err(Error::InvalidArgument(format!("pi must lie in [0, 1], got {p}"))),
        None => default_pi(base)?,
    };
    check_base(base)?;
    if pi > 0.0 {
        let fav = base.condition("y", 1)?;
        if fav.mass("s", 0)? == 0.0 || fav.mass("s", 1)? == 0.0 {
            return Err(Error::Infeasible(
                "cross pairs need favourable mass in both sensitive groups".into(),
            ));
        }
        let leak = exact_cmi(&fav, &["x"], &["s"], &[])?;
        if leak > ASSUMPTION_TOL {
            return Err(Error::Infeasible(format!(
                "assumption 1 (cross branch) cannot hold for this base: I(X;S|Y=1) = {leak:.3e}"
            )));
        }
    }
    build_pair_law_with(base, enc, |_, y, _| if y == 1 { pi } else { 0.0 })
}

/// Builds the law with an arbitrary per-anchor cross probability and no
/// feasibility screening. Used to construct counterexamples.
pub fn build_pair_law_with(
    base: &FiniteJoint,
    enc: &DiscreteEncoder,
    cross_prob: impl Fn(usize, usize, usize) -> f64,
) -> Result<PairLaw> {
    let nx = check_base(base)?;
    if enc.map.len() != nx {
        return Err(Error::InvalidArgument(format!("encoder covers {} inputs, base has {nx}", enc.map.len())));
    }
    let nz = enc.n_z();
    let mut p_ys = [[0.0; 2]; 2];
    for (i, p) in base.support() {
        p_ys[i[1]][i[2]] += p;
    }
    let mut w = vec![0.0; nz * nz * 2 * 2 * 2];
    let cell = |z: usize, zp: usize, y: usize, s: usize, c: usize| (((z * nz + zp) * 2 + y) * 2 + s) * 2 + c;
    for (i, p) in base.support() {
        let (x, y, s) = (i[0], i[1], i[2]);
        let q = cross_prob(x, y, s);
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("cross probability {q} at x={x} is not in [0, 1]")));
        }
        if q > 0.0 && y != 1 {
            return Err(Error::InvalidArgument("only favourable anchors may take the cross branch".into()));
        }
        for (branch, sp, bw) in [(CROSS, 1 - s, q), (WITHIN, s, 1.0 - q)] {
            if bw == 0.0 {
                continue;
            }
            if p_ys[y][sp] == 0.0 {
                return Err(Error::Infeasible(format!("positive subgroup (y={y}, s={sp}) has no mass")));
            }
            for xp in 0..nx {
                let cond = base.get(&[xp, y, sp]) / p_ys[y][sp];
                if cond > 0.0 {
                    w[cell(enc.map[x], enc.map[xp], y, s, branch)] += p * bw * cond;
                }
            }
        }
    }
    let joint = FiniteJoint::from_weights(&["z", "zp", "y", "s", "c"], &[nz, nz, 2, 2, 2], w)?;
    let fav = joint.mass("y", 1)?;
    let pi = if fav > 0.0 {
        joint.support().filter(|(i, _)| i[2] == 1 && i[4] == CROSS).map(|(_, p)| p).sum::<f64>() / fav
    } else {
        0.0
    };
    Ok(PairLaw { joint, pi })
}
