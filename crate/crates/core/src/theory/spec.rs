//! Declarative theory checks, read from JSON.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::checks::{ib_equivalence_check, infonce_bound_check, verify_decomposition, Critic};
use super::joint::FiniteJoint;
use super::pair_law::{base_joint, build_pair_law, build_pair_law_with, DiscreteEncoder, PairLaw};
use crate::error::{Error, Result};
use crate::nn::Rng;

/// Largest Eq.-style residual accepted as an identity.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// A counterexample must move the residual by at least this much.
pub const MATERIAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    /// `probs[x][y][s]`.
    pub probs: Vec<[[f64; 2]; 2]>,
}

impl BaseSpec {
    pub fn joint(&self) -> Result<FiniteJoint> {
        base_joint(self.probs.len(), self.probs.iter().flat_map(|t| t.iter().flatten().copied()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionCase {
    pub name: String,
    pub base: String,
    pub encoder: Vec<usize>,
    #[serde(default)]
    pub pi: Option<f64>,
    /// Per-`x` cross probability for favourable anchors; replaces the
    /// constant `π` and skips the feasibility screen.
    #[serde(default)]
    pub cross_prob: Option<Vec<f64>>,
    /// The case is a counterexample: it passes when the validator names a
    /// violated assumption and the residual is material.
    #[serde(default)]
    pub expect_violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizedCase {
    pub name: String,
    pub laws: usize,
    pub nx: usize,
    pub nz: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCase {
    pub name: String,
    pub base: String,
    pub encoder: Vec<usize>,
    #[serde(default)]
    pub pi: Option<f64>,
    pub critic: Critic,
    pub k: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// All maps from the base's `x` support onto `{0..nz}`.
    Exhaustive { nz: usize },
    List(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottleneckCase {
    pub name: String,
    pub base: String,
    pub family: Family,
    pub k: usize,
    pub critic: Critic,
    #[serde(default)]
    pub pi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    pub bases: BTreeMap<String, BaseSpec>,
    #[serde(default)]
    pub decomposition: Vec<DecompositionCase>,
    #[serde(default)]
    pub randomized: Vec<RandomizedCase>,
    #[serde(default)]
    pub bound: Vec<BoundCase>,
    #[serde(default)]
    pub bottleneck: Vec<BottleneckCase>,
}

const DEFAULT_SPEC: &str = include_str!("../../assets/theory/default.json");
const BROKEN_SPEC: &str = include_str!("../../assets/theory/broken.json");

impl TheorySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// `default` (the shipped checks) or `broken` (a spec that must fail).
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "default" => Self::from_json(DEFAULT_SPEC),
            "broken" => Self::from_json(BROKEN_SPEC),
            other => Err(Error::InvalidArgument(format!("no built-in theory spec `{other}`"))),
        }
    }

    pub fn base(&self, name: &str) -> Result<FiniteJoint> {
        self.bases
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown base `{name}`")))?
            .joint()
    }

    fn validate(&self) -> Result<()> {
        for (name, b) in &self.bases {
            b.joint().map_err(|e| Error::InvalidArgument(format!("base `{name}`: {e}")))?;
        }
        let names = self
            .decomposition
            .iter()
            .map(|c| &c.base)
            .chain(self.bound.iter().map(|c| &c.base))
            .chain(self.bottleneck.iter().map(|c| &c.base));
        for n in names {
            if !self.bases.contains_key(n) {
                return Err(Error::InvalidArgument(format!("unknown base `{n}`")));
            }
        }
        for r in &self.randomized {
            if r.laws == 0 || r.nx < 2 || r.nz < 1 {
                return Err(Error::InvalidArgument(format!("randomized case `{}` needs laws >= 1, nx >= 2", r.name)));
            }
        }
        for b in &self.bound {
            if b.k.is_empty() || b.k.contains(&0) {
                return Err(Error::InvalidArgument(format!("bound case `{}` needs K >= 1", b.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub section: String,
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub values: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub checks: Vec<CheckOutcome>,
}

impl TheoryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn section(&self, name: &str) -> impl Iterator<Item = &CheckOutcome> {
        let name = name.to_string();
        self.checks.iter().filter(move |c| c.section == name)
    }
}

fn outcome(section: &str, name: &str, passed: bool, diagnostic: Option<String>, values: Value) -> CheckOutcome {
    CheckOutcome {
        section: section.into(),
        name: name.into(),
        passed,
        diagnostic,
        values,
    }
}

/// A base where `X ⊥ S | Y = 1` holds, with random conditionals elsewhere.
pub fn random_feasible_base(nx: usize, rng: &mut Rng) -> Result<FiniteJoint> {
    let mut w = || rng.random_range(0.05f64..1.0);
    let py1 = w().clamp(0.1, 0.9);
    let ps_given_y = [w().clamp(0.1, 0.9), w().clamp(0.1, 0.9)];
    let mut simplex = |n: usize| {
        let v: Vec<f64> = (0..n).map(|_| w()).collect();
        let t: f64 = v.iter().sum();
        v.into_iter().map(|x| x / t).collect::<Vec<_>>()
    };
    let px_y0 = [simplex(nx), simplex(nx)];
    let px_y1 = simplex(nx);
    let mut probs = vec![0.0; nx * 4];
    for x in 0..nx {
        for s in 0..2 {
            let ps = |y: usize| if s == 1 { ps_given_y[y] } else { 1.0 - ps_given_y[y] };
            probs[(x * 2) * 2 + s] = (1.0 - py1) * ps(0) * px_y0[s][x];
            probs[(x * 2 + 1) * 2 + s] = py1 * ps(1) * px_y1[x];
        }
    }
    let t: f64 = probs.iter().sum();
    base_joint(nx, probs.into_iter().map(|p| p / t).collect())
}

fn decomposition_values(law: &PairLaw) -> Result<Value> {
    let d = verify_decomposition(law)?;
    Ok(serde_json::to_value(d)?)
}

pub fn run_spec(spec: &TheorySpec) -> Result<TheoryReport> {
    let mut checks = Vec::new();

    for c in &spec.decomposition {
        let base = spec.base(&c.base)?;
        let enc = DiscreteEncoder::new(c.encoder.clone())?;
        let built = match &c.cross_prob {
            Some(q) => {
                if q.len() != enc.map.len() {
                    return Err(Error::InvalidArgument(format!("case `{}`: cross_prob needs one entry per x", c.name)));
                }
                build_pair_law_with(&base, &enc, |x, y, _| if y == 1 { q[x] } else { 0.0 })
            }
            None => build_pair_law(&base, &enc, c.pi),
        };
        let law = match built {
            Ok(l) => l,
            Err(e @ Error::Infeasible(_)) => {
                checks.push(outcome("decomposition", &c.name, false, Some(e.to_string()), Value::Null));
                continue;
            }
            Err(e) => return Err(e),
        };
        let violations = law.violations()?;
        let values = decomposition_values(&law)?;
        let residual = values["residual"].as_f64().unwrap_or(f64::NAN);
        let diag = (!violations.is_empty()).then(|| violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "));
        let passed = if c.expect_violation {
            diag.is_some() && residual > MATERIAL
        } else {
            diag.is_none() && residual < RESIDUAL_TOL
        };
        let diag = diag.or_else(|| (!passed).then(|| format!("residual {residual:.3e} exceeds {RESIDUAL_TOL:e}")));
        checks.push(outcome("decomposition", &c.name, passed, diag, values));
    }

    for r in &spec.randomized {
        let mut rng = Rng::new(r.seed);
        let (mut worst, mut worst_corrected, mut valid) = (0.0f64, 0.0f64, 0usize);
        let mut per_law = Vec::with_capacity(r.laws);
        for _ in 0..r.laws {
            let base = random_feasible_base(r.nx, &mut rng)?;
            let map = (0..r.nx).map(|_| rng.random_range(0..r.nz)).collect();
            let pi = rng.random_range(0.05..0.95);
            let law = build_pair_law(&base, &DiscreteEncoder::new(map)?, Some(pi))?;
            law.validate()?;
            valid += 1;
            let d = verify_decomposition(&law)?;
            worst = worst.max(d.residual);
            worst_corrected = worst_corrected.max(d.corrected_residual);
            per_law.push(json!({"pi": pi, "residual": d.residual, "i_zs_given_y": d.i_zs_given_y,
                "corrected_residual": d.corrected_residual, "sufficiency_gap": d.sufficiency_gap}));
        }
        let passed = worst < RESIDUAL_TOL;
        let diag = (!passed).then(|| format!("max residual {worst:.3e} over {valid} valid laws exceeds {RESIDUAL_TOL:e}"));
        checks.push(outcome(
            "randomized",
            &r.name,
            passed,
            diag,
            json!({"laws": valid, "max_residual": worst, "max_corrected_residual": worst_corrected, "per_law": per_law}),
        ));
    }

    for b in &spec.bound {
        let base = spec.base(&b.base)?;
        let law = match build_pair_law(&base, &DiscreteEncoder::new(b.encoder.clone())?, b.pi) {
            Ok(l) => l,
            Err(e @ Error::Infeasible(_)) => {
                checks.push(outcome("bound", &b.name, false, Some(e.to_string()), Value::Null));
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut rng = Rng::new(b.seed);
        for &k in &b.k {
            let r = infonce_bound_check(&law, &b.critic, k, b.samples, &mut rng)?;
            let diag = (!r.holds).then(|| format!("-L + ln K = {:.6} exceeds I(Z;Z+) = {:.6} + 3 SE", r.lhs, r.rhs));
            checks.push(outcome("bound", &format!("{} K={k}", b.name), r.holds, diag, serde_json::to_value(&r)?));
        }
    }

    for c in &spec.bottleneck {
        let base = spec.base(&c.base)?;
        let family = match &c.family {
            Family::Exhaustive { nz } => DiscreteEncoder::exhaustive(base.sizes()[0], *nz),
            Family::List(maps) => maps.iter().map(|m| DiscreteEncoder::new(m.clone())).collect::<Result<_>>()?,
        };
        match ib_equivalence_check(&base, &family, c.k, &c.critic, c.pi) {
            Ok(r) => {
                let diag = (!r.coincide).then(|| {
                    format!("argmin L_NCE {:?} differs from argmax bottleneck objective {:?}", r.argmin_nce, r.argmax_ib)
                });
                checks.push(outcome("bottleneck", &c.name, r.coincide, diag, serde_json::to_value(&r)?));
            }
            Err(e @ Error::Infeasible(_)) => {
                checks.push(outcome("bottleneck", &c.name, false, Some(e.to_string()), Value::Null));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TheoryReport { checks })
}
