//! The decomposition identity, the InfoNCE bound and the bottleneck
//! equivalence, each evaluated on exact finite laws.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::joint::{exact_cmi, exact_mi, FiniteJoint};
use super::pair_law::{build_pair_law, default_pi, DiscreteEncoder, PairLaw};
use crate::error::{Error, Result};
use crate::nn::Rng;

/// Ties in the encoder rankings are resolved with this absolute tolerance.
pub const RANK_TOL: f64 = 1e-10;
const MAX_NEGATIVE_CONFIGS: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub pi: f64,
    pub i_zzp: f64,
    pub i_zy: f64,
    pub i_zs_given_y: f64,
    /// `|I(Z;Z+) − I(Z;Y) − (1−π) I(Z;S|Y)|`.
    pub residual: f64,
    /// `|I(Z;Z+) − I(Z;Y) − I(Z;S|Y)|`, the identity that holds when the
    /// positive is sufficient for `(Y, S)`.
    pub corrected_residual: f64,
    /// `I(Z;Y,S) − I(Z;Z+) ≥ 0`; zero exactly when the positive is sufficient.
    pub sufficiency_gap: f64,
}

pub fn verify_decomposition(law: &PairLaw) -> Result<Decomposition> {
    let j = &law.joint;
    let i_zzp = exact_mi(j, &["z"], &["zp"])?;
    let i_zy = exact_mi(j, &["z"], &["y"])?;
    let i_zs_given_y = exact_cmi(j, &["z"], &["s"], &["y"])?;
    let i_zys = exact_mi(j, &["z"], &["y", "s"])?;
    Ok(Decomposition {
        pi: law.pi,
        i_zzp,
        i_zy,
        i_zs_given_y,
        residual: (i_zzp - i_zy - (1.0 - law.pi) * i_zs_given_y).abs(),
        corrected_residual: (i_zzp - i_zy - i_zs_given_y).abs(),
        sufficiency_gap: i_zys - i_zzp,
    })
}

/// Positive critic `g(z, z')` used inside the InfoNCE softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Critic {
    /// `p(z, z') / (p(z) p(z'))`, the optimal critic for the law.
    DensityRatio,
    Constant,
    /// `exp(1[z = z'] / τ)`.
    OneHot { tau: f64 },
    /// `exp(<e_z, e_z'> / τ)` for a fixed embedding table.
    Dot { embedding: Vec<Vec<f64>>, tau: f64 },
}

impl Critic {
    /// Score table `g[z][z']`.
    pub fn table(&self, law: &PairLaw) -> Result<Vec<Vec<f64>>> {
        let nz = law.joint.size_of("z")?;
        let pair = law.joint.marginal(&["z", "zp"])?;
        let pz = law.joint.marginal(&["z"])?;
        let pzp = law.joint.marginal(&["zp"])?;
        let mut g = vec![vec![0.0; nz]; nz];
        for (a, row) in g.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = match self {
                    Critic::DensityRatio => {
                        let d = pz.get(&[a]) * pzp.get(&[b]);
                        if d > 0.0 {
                            pair.get(&[a, b]) / d
                        } else {
                            0.0
                        }
                    }
                    Critic::Constant => 1.0,
                    Critic::OneHot { tau } => (f64::from(u8::from(a == b)) / tau).exp(),
                    Critic::Dot { embedding, tau } => {
                        if embedding.len() != nz {
                            return Err(Error::InvalidArgument(format!(
                                "embedding has {} rows for {nz} codes",
                                embedding.len()
                            )));
                        }
                        let dot: f64 = embedding[a].iter().zip(&embedding[b]).map(|(u, v)| u * v).sum();
                        (dot / tau).exp()
                    }
                };
            }
        }
        if let Critic::OneHot { tau } | Critic::Dot { tau, .. } = self {
            if !(*tau > 0.0) {
                return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
            }
        }
        if g.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("critic scores".into()));
        }
        Ok(g)
    }
}

/// Pairs `(z, z')` with mass, and the support of the positive marginal.
fn pair_support(law: &PairLaw) -> Result<(Vec<(usize, usize, f64)>, Vec<(usize, f64)>)> {
    let pairs = law.joint.marginal(&["z", "zp"])?.support().map(|(i, p)| (i[0], i[1], p)).collect();
    let neg = law.joint.marginal(&["zp"])?.support().map(|(i, p)| (i[0], p)).collect();
    Ok((pairs, neg))
}

fn softmax_loss(g_pos: f64, g_neg_sum: f64) -> f64 {
    -(g_pos / (g_pos + g_neg_sum)).ln()
}

/// Every way of placing `k` negatives on `m` support points, with its
/// multinomial probability.
fn negative_configs(k: usize, q: &[f64]) -> Result<Vec<(Vec<usize>, f64)>> {
    let m = q.len();
    let count = binomial(k + m - 1, m - 1);
    if count > MAX_NEGATIVE_CONFIGS as f64 {
        return Err(Error::InvalidArgument(format!(
            "{count} negative configurations for K = {k} over {m} codes; exact evaluation is too large"
        )));
    }
    let ln_fact = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    let mut out = Vec::with_capacity(count as usize);
    let mut counts = vec![0usize; m];
    fn rec(
        pos: usize,
        left: usize,
        counts: &mut Vec<usize>,
        q: &[f64],
        ln_fact: &dyn Fn(usize) -> f64,
        k: usize,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        if pos + 1 == counts.len() {
            counts[pos] = left;
            let mut lp = ln_fact(k);
            for (c, qi) in counts.iter().zip(q) {
                lp += *c as f64 * qi.ln() - ln_fact(*c);
            }
            out.push((counts.clone(), lp.exp()));
            return;
        }
        for c in 0..=left {
            counts[pos] = c;
            rec(pos + 1, left - c, counts, q, ln_fact, k, out);
        }
    }
    rec(0, k, &mut counts, q, &ln_fact, k, &mut out);
    Ok(out)
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Population InfoNCE `E[−ln(g(z,z⁺) / (g(z,z⁺) + Σ_k g(z,z⁻_k)))]` with `K`
/// negatives drawn i.i.d. from the positive marginal, by exact enumeration.
pub fn exact_infonce(law: &PairLaw, critic: &Critic, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let g = critic.table(law)?;
    let (pairs, neg) = pair_support(law)?;
    let q: Vec<f64> = neg.iter().map(|n| n.1).collect();
    let configs = negative_configs(k, &q)?;
    let mut total = 0.0;
    for &(a, b, p) in &pairs {
        let mut e = 0.0;
        for (counts, pc) in &configs {
            let s: f64 = counts.iter().zip(&neg).map(|(c, (j, _))| *c as f64 * g[a][*j]).sum();
            e += pc * softmax_loss(g[a][b], s);
        }
        total += p * e;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub k: usize,
    pub samples: usize,
    /// Monte Carlo `−L + ln K`.
    pub lhs: f64,
    /// Standard error of `lhs`.
    pub se: f64,
    /// Exact `I(Z;Z+)`.
    pub rhs: f64,
    /// `−L + ln K` from exact enumeration.
    pub exact_lhs: f64,
    /// Every pair scores the same, so the critic carries no information.
    pub degenerate: bool,
    pub holds: bool,
}

pub fn infonce_bound_check(law: &PairLaw, critic: &Critic, k: usize, n_samples: usize, rng: &mut Rng) -> Result<BoundCheck> {
    if k == 0 || n_samples < 2 {
        return Err(Error::InvalidArgument(format!("need K >= 1 and at least 2 samples, got K={k}, n={n_samples}")));
    }
    let g = critic.table(law)?;
    let (pairs, neg) = pair_support(law)?;
    let pair_dist = WeightedIndex::new(pairs.iter().map(|p| p.2)).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let neg_dist = WeightedIndex::new(neg.iter().map(|n| n.1)).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let (a, b, _) = pairs[pair_dist.sample(rng)];
        let s: f64 = (0..k).map(|_| g[a][neg[neg_dist.sample(rng)].0]).sum();
        let l = softmax_loss(g[a][b], s);
        sum += l;
        sum_sq += l * l;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let se = (var / n).sqrt();
    let ln_k = (k as f64).ln();
    let lhs = -mean + ln_k;
    let rhs = exact_mi(&law.joint, &["z"], &["zp"])?;
    let exact_lhs = -exact_infonce(law, critic, k)? + ln_k;
    let first = g[pairs[0].0][pairs[0].1];
    let degenerate = pairs
        .iter()
        .flat_map(|&(a, _, _)| neg.iter().map(move |&(b, _)| (a, b)))
        .chain(pairs.iter().map(|&(a, b, _)| (a, b)))
        .all(|(a, b)| (g[a][b] - first).abs() <= 1e-15 * first.abs().max(1.0));
    if degenerate {
        log::warn!("critic is constant on the support; the bound holds trivially");
    }
    Ok(BoundCheck {
        k,
        samples: n_samples,
        lhs,
        se,
        rhs,
        exact_lhs,
        degenerate,
        holds: lhs <= rhs + 3.0 * se + 1e-12 && exact_lhs <= rhs + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbEntry {
    pub encoder: Vec<usize>,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub l_nce: f64,
    pub i_zy: f64,
    pub i_zs_given_y: f64,
    pub i_zzp: f64,
    /// `I(Z;Y) − λ I(Z;S|Y)`.
    pub ib_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbReport {
    pub pi: f64,
    pub lambda: f64,
    pub k: usize,
    pub critic: Critic,
    pub entries: Vec<IbEntry>,
    /// Indices into `entries`, ties within the ranking tolerance included.
    pub argmin_nce: Vec<usize>,
    pub argmax_ib: Vec<usize>,
    /// Entries ordered by increasing `l_nce` and by decreasing IB objective.
    pub nce_ranking: Vec<usize>,
    pub ib_ranking: Vec<usize>,
    pub coincide: bool,
}

/// Exact population InfoNCE and the bottleneck objective with `λ = 1 − π`
/// for every encoder in `family`. Encoders without a valid law are reported
/// and left out of the rankings.
pub fn ib_equivalence_check(
    base: &FiniteJoint,
    family: &[DiscreteEncoder],
    k: usize,
    critic: &Critic,
    pi_override: Option<f64>,
) -> Result<IbReport> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty encoder family".into()));
    }
    let pi = match pi_override {
        Some(p) => p,
        None => default_pi(base)?,
    };
    let lambda = 1.0 - pi;
    let entries: Vec<IbEntry> = family
        .par_iter()
        .map(|enc| {
            let infeasible = |msg: String| IbEntry {
                encoder: enc.map.clone(),
                feasible: false,
                diagnostic: Some(msg),
                l_nce: f64::NAN,
                i_zy: f64::NAN,
                i_zs_given_y: f64::NAN,
                i_zzp: f64::NAN,
                ib_objective: f64::NAN,
            };
            let law = match build_pair_law(base, enc, Some(pi)) {
                Ok(l) => l,
                Err(e) => return Ok(infeasible(e.to_string())),
            };
            if let Err(e) = law.validate() {
                return Ok(infeasible(e.to_string()));
            }
            let d = verify_decomposition(&law)?;
            Ok(IbEntry {
                encoder: enc.map.clone(),
                feasible: true,
                diagnostic: None,
                l_nce: exact_infonce(&law, critic, k)?,
                i_zy: d.i_zy,
                i_zs_given_y: d.i_zs_given_y,
                i_zzp: d.i_zzp,
                ib_objective: d.i_zy - lambda * d.i_zs_given_y,
            })
        })
        .collect::<Result<_>>()?;
    for e in entries.iter().filter(|e| !e.feasible) {
        log::warn!("encoder {:?} skipped: {}", e.encoder, e.diagnostic.as_deref().unwrap_or(""));
    }
    let feasible: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].feasible).collect();
    if feasible.is_empty() {
        return Err(Error::Infeasible("no encoder in the family admits a valid pair law".into()));
    }
    let mut nce_ranking = feasible.clone();
    nce_ranking.sort_by(|&a, &b| entries[a].l_nce.total_cmp(&entries[b].l_nce).then(a.cmp(&b)));
    let mut ib_ranking = feasible.clone();
    ib_ranking.sort_by(|&a, &b| entries[b].ib_objective.total_cmp(&entries[a].ib_objective).then(a.cmp(&b)));
    let best_l = entries[nce_ranking[0]].l_nce;
    let best_ib = entries[ib_ranking[0]].ib_objective;
    let argmin_nce: Vec<usize> = feasible.iter().copied().filter(|&i| entries[i].l_nce <= best_l + RANK_TOL).collect();
    let argmax_ib: Vec<usize> =
        feasible.iter().copied().filter(|&i| entries[i].ib_objective >= best_ib - RANK_TOL).collect();
    Ok(IbReport {
        pi,
        lambda,
        k,
        critic: critic.clone(),
        coincide: argmin_nce == argmax_ib,
        entries,
        argmin_nce,
        argmax_ib,
        nce_ranking,
        ib_ranking,
    })
}
