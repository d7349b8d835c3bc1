//! Contrastive and classification losses with analytic gradients.
//!
//! The contrastive losses share one kernel: a set of embeddings whose first
//! `n` rows are anchors, a positive set `P(i)` and a denominator set `D(i)`
//! per anchor, and the per-anchor term
//!
//! ```text
//! ℓ_i = logsumexp_{k∈D(i)} sim(z_i, z_k)/τ − mean_{p∈P(i)} sim(z_i, z_p)/τ
//! ```
//!
//! averaged over anchors with a non-empty `P(i)`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Cosine,
    Dot,
}

/// Which entries enter the InfoNCE denominator besides the masked negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// Negatives plus the anchor's own positive (loss ≥ 0).
    #[default]
    WithPositive,
    NegativesOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub tau: f64,
    pub alpha: f64,
    pub similarity: Similarity,
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("temperature must be positive, got {}", self.tau)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// A loss value and its gradient with respect to the loss inputs.
#[derive(Debug, Clone)]
pub struct LossValue<G = Array2<f64>> {
    pub value: f64,
    pub grad: G,
}

pub fn cosine_sim(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument("cosine similarity of a zero-norm vector".into()));
    }
    Ok((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

const NORM_FLOOR: f64 = 1e-12;

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

/// Shared kernel. `positives[i]` and the rows of `denom` index the rows of
/// `emb`; rows `0..positives.len()` are the anchors.
fn contrastive_kernel(
    emb: ArrayView2<'_, f64>,
    positives: &[Vec<usize>],
    denom: &Array2<bool>,
    sim: Similarity,
    tau: f64,
) -> Result<LossValue> {
    check_tau(tau)?;
    let (m, d) = emb.dim();
    let n = positives.len();
    if n == 0 || n > m {
        return Err(Error::Shape(format!("{n} anchors for {m} embeddings")));
    }
    if denom.dim() != (n, m) {
        return Err(Error::Shape(format!("denominator mask {:?}, expected ({n}, {m})", denom.dim())));
    }
    if !emb.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("embeddings".into()));
    }

    let (unit, norms) = match sim {
        Similarity::Cosine => {
            // Rows are scaled by max(‖e‖, NORM_FLOOR) so a collapsed
            // embedding contributes a zero similarity instead of failing.
            let norms: Array1<f64> = emb.map_axis(Axis(1), |r| r.dot(&r).sqrt().max(NORM_FLOOR));
            let unit = &emb / &norms.view().insert_axis(Axis(1));
            (unit, Some(norms))
        }
        Similarity::Dot => (emb.to_owned(), None),
    };
    let anchors = unit.slice(s![0..n, ..]);
    let scores = anchors.dot(&unit.t());

    let active: Vec<usize> = (0..n).filter(|&i| !positives[i].is_empty()).collect();
    if active.is_empty() {
        return Err(Error::InvalidArgument("no anchor has a positive".into()));
    }
    let n_eff = active.len() as f64;
    let mut coef = Array2::<f64>::zeros((n, m));
    let mut total = 0.0;
    for &i in &active {
        let row = scores.row(i);
        let members: Vec<usize> = (0..m).filter(|&k| denom[[i, k]]).collect();
        if members.is_empty() {
            return Err(Error::InvalidArgument(format!("anchor {i} has an empty denominator set")));
        }
        let mx = members.iter().map(|&k| row[k] / tau).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = members.iter().map(|&k| (row[k] / tau - mx).exp()).sum();
        let lse = mx + z.ln();
        let p = &positives[i];
        let pos_mean = p.iter().map(|&k| row[k]).sum::<f64>() / (p.len() as f64 * tau);
        total += lse - pos_mean;
        for &k in &members {
            coef[[i, k]] += ((row[k] / tau - mx).exp() / z) / (tau * n_eff);
        }
        for &k in p {
            coef[[i, k]] -= 1.0 / (p.len() as f64 * tau * n_eff);
        }
    }
    let value = total / n_eff;

    // scores = A · Uᵀ with A = U[0..n]
    let mut d_unit = coef.t().dot(&anchors);
    {
        let extra = coef.dot(&unit);
        let mut head = d_unit.slice_mut(s![0..n, ..]);
        head += &extra;
    }
    let grad = match norms {
        Some(norms) => {
            let mut g = Array2::<f64>::zeros((m, d));
            for r in 0..m {
                let u = unit.row(r);
                let du = d_unit.row(r);
                let mut gr = g.row_mut(r);
                if norms[r] > NORM_FLOOR {
                    let proj = u.dot(&du);
                    gr.assign(&(&du - &(&u * proj)));
                } else {
                    gr.assign(&du);
                }
                gr /= norms[r];
            }
            g
        }
        None => d_unit,
    };
    if !value.is_finite() {
        return Err(Error::NonFinite("contrastive loss".into()));
    }
    Ok(LossValue { value, grad })
}

/// Self-supervised InfoNCE over the stacked batch `[anchors; positives]`
/// (`2N` rows). `negatives` is the `N × 2N` mask from the sampler; anchor
/// `i`'s positive is row `N + i`. The gradient covers all `2N` rows.
pub fn info_nce(
    anchors: ArrayView2<'_, f64>,
    positives: ArrayView2<'_, f64>,
    negatives: ArrayView2<'_, bool>,
    tau: f64,
    sim: Similarity,
) -> Result<LossValue> {
    info_nce_with(anchors, positives, negatives, tau, sim, Denominator::WithPositive)
}

pub fn info_nce_with(
    anchors: ArrayView2<'_, f64>,
    positives: ArrayView2<'_, f64>,
    negatives: ArrayView2<'_, bool>,
    tau: f64,
    sim: Similarity,
    convention: Denominator,
) -> Result<LossValue> {
    let n = anchors.nrows();
    if positives.dim() != anchors.dim() {
        return Err(Error::Shape(format!(
            "anchors {:?} and positives {:?} differ",
            anchors.dim(),
            positives.dim()
        )));
    }
    if negatives.dim() != (n, 2 * n) {
        return Err(Error::Shape(format!("negative mask {:?}, expected ({n}, {})", negatives.dim(), 2 * n)));
    }
    let emb = ndarray::concatenate(Axis(0), &[anchors, positives]).expect("same width");
    let mut denom = negatives.to_owned();
    let mut pos = Vec::with_capacity(n);
    for i in 0..n {
        denom[[i, i]] = false;
        match convention {
            Denominator::WithPositive => denom[[i, n + i]] = true,
            Denominator::NegativesOnly => denom[[i, n + i]] = false,
        }
        pos.push(vec![n + i]);
    }
    contrastive_kernel(emb.view(), &pos, &denom, sim, tau)
}

/// Supervised contrastive loss with dot-product similarity: every sample is
/// an anchor, `P(i)` holds the other same-label samples and the denominator
/// runs over all other samples. Anchors with no same-label partner are
/// skipped.
pub fn sup_con(embeddings: ArrayView2<'_, f64>, labels: &[u8], tau: f64) -> Result<LossValue> {
    let m = embeddings.nrows();
    sup_con_anchored(embeddings, m, labels, tau, Similarity::Dot)
}

/// [`sup_con`] restricted to the first `n_anchors` rows as anchors; the
/// remaining rows only act as candidates. Used with `[anchors; positives]`.
pub fn sup_con_anchored(
    embeddings: ArrayView2<'_, f64>,
    n_anchors: usize,
    labels: &[u8],
    tau: f64,
    sim: Similarity,
) -> Result<LossValue> {
    let m = embeddings.nrows();
    if labels.len() != m {
        return Err(Error::Shape(format!("{} labels for {m} embeddings", labels.len())));
    }
    if m < 2 {
        return Err(Error::InvalidArgument("supervised contrastive loss needs at least two samples".into()));
    }
    let mut denom = Array2::from_elem((n_anchors, m), true);
    let mut pos = Vec::with_capacity(n_anchors);
    for i in 0..n_anchors {
        denom[[i, i]] = false;
        pos.push((0..m).filter(|&k| k != i && labels[k] == labels[i]).collect());
    }
    contrastive_kernel(embeddings, &pos, &denom, sim, tau)
}

/// Mean binary cross-entropy of probabilities `probs` (clamped to
/// `[1e-12, 1 − 1e-12]`). The gradient is with respect to the logits that
/// produced `probs` through a sigmoid: `(p − y) / n`.
pub fn bce(probs: ArrayView1<'_, f64>, labels: &[u8]) -> Result<LossValue<Array1<f64>>> {
    let n = probs.len();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} probabilities", labels.len())));
    }
    if n == 0 {
        return Err(Error::Empty("binary cross-entropy batch".into()));
    }
    const EPS: f64 = 1e-12;
    let mut value = 0.0;
    let mut grad = Array1::zeros(n);
    for (k, (&p, &y)) in probs.iter().zip(labels).enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite("classifier probability".into()));
        }
        let pc = p.clamp(EPS, 1.0 - EPS);
        let yf = f64::from(y);
        value -= yf * pc.ln() + (1.0 - yf) * (1.0 - pc).ln();
        grad[k] = (p - yf) / n as f64;
    }
    Ok(LossValue {
        value: value / n as f64,
        grad,
    })
}

/// `alpha · L_BCE + L_SCL`.
pub fn total_loss(alpha: f64, bce_value: f64, scl_value: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be non-negative, got {alpha}")));
    }
    Ok(alpha * bce_value + scl_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{gradient_check, Rng};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
    }

    fn all_but_self_and_positive(n: usize) -> Array2<bool> {
        Array2::from_shape_fn((n, 2 * n), |(i, k)| k != i && k != n + i)
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
    }

    /// Literal InfoNCE: −(1/N) Σ log(exp(s_ij/τ) / Σ_{k ∈ mask ∪ {j}} exp(s_ik/τ)).
    fn nce_oracle(emb: &[Vec<f64>], mask: &Array2<bool>, tau: f64) -> f64 {
        let n = emb.len() / 2;
        let mut total = 0.0;
        for i in 0..n {
            let num = (cos(&emb[i], &emb[n + i]) / tau).exp();
            let mut den = 0.0;
            for k in 0..2 * n {
                if mask[[i, k]] || k == n + i {
                    den += (cos(&emb[i], &emb[k]) / tau).exp();
                }
            }
            total += (num / den).ln();
        }
        -total / n as f64
    }

    #[test]
    fn collapsed_embedding_scores_zero() {
        // Anchor 0 is the zero vector: every similarity it enters is 0.
        let a = array![[0.0, 0.0], [1.0, 0.0]];
        let p = array![[0.0, 1.0], [1.0, 1.0]];
        let mask = Array2::from_shape_fn((2, 4), |(i, k)| k != i && k != 2 + i);
        let lv = info_nce(a.view(), p.view(), mask.view(), 1.0, Similarity::Cosine).unwrap();
        let row0 = (3.0f64).ln();
        let s = 0.5f64.sqrt();
        let row1 = -s + (1.0f64 + (0.0f64).exp() + s.exp()).ln();
        assert_abs_diff_eq!(lv.value, (row0 + row1) / 2.0, epsilon = 1e-12);
        assert!(lv.grad.iter().all(|v| v.is_finite()));
    }

    /// Literal supervised contrastive loss with dot products.
    fn supcon_oracle(emb: &[Vec<f64>], labels: &[u8], tau: f64) -> f64 {
        let m = emb.len();
        let mut total = 0.0;
        let mut used = 0;
        for i in 0..m {
            let p: Vec<usize> = (0..m).filter(|&k| k != i && labels[k] == labels[i]).collect();
            if p.is_empty() {
                continue;
            }
            used += 1;
            let den: f64 = (0..m).filter(|&q| q != i).map(|q| (dot(&emb[i], &emb[q]) / tau).exp()).sum();
            let s: f64 = p.iter().map(|&k| ((dot(&emb[i], &emb[k]) / tau).exp() / den).ln()).sum();
            total += s / p.len() as f64;
        }
        -total / used as f64
    }

    fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
        a.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn cosine_examples() {
        let z = array![0.3, -2.0, 1.1];
        assert_abs_diff_eq!(cosine_sim(z.view(), z.view()).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine_sim(array![1.0, 0.0].view(), array![0.0, 1.0].view()).unwrap(), 0.0);
        let v = cosine_sim(array![1.0, 1.0].view(), array![1.0, 0.0].view()).unwrap();
        assert_abs_diff_eq!(v, 0.7071067811865475, epsilon = 1e-15);
        assert!(cosine_sim(array![0.0, 0.0].view(), z.slice(s![0..2])).is_err());
    }

    #[test]
    fn self_supervised_denominator_counts() {
        // 4 anchors: 2N − 2 = 6 negatives plus the positive, all similarities equal
        let emb = Array2::from_elem((4, 2), 1.5);
        let mask = all_but_self_and_positive(4);
        assert!((0..4).all(|i| mask.row(i).iter().filter(|&&b| b).count() == 6));
        let lv = info_nce(emb.view(), emb.view(), mask.view(), 1.0, Similarity::Cosine).unwrap();
        assert_abs_diff_eq!(lv.value, 7f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn info_nce_log4_with_three_negatives() {
        // anchor 0 with positive and exactly three negatives
        let anchors = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let positives = anchors.clone();
        let mut mask = Array2::from_elem((3, 6), false);
        for k in [1, 2, 4] {
            mask[[0, k]] = true;
        }
        for (i, ks) in [(1, [0, 2, 3]), (2, [0, 1, 3])] {
            for k in ks {
                mask[[i, k]] = true;
            }
        }
        let lv = info_nce(anchors.view(), positives.view(), mask.view(), 1.0, Similarity::Cosine).unwrap();
        assert_abs_diff_eq!(lv.value, 4f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn info_nce_vanishes_for_separated_pairs() {
        let anchors = array![[1.0, 0.0], [-1.0, 0.0]];
        let positives = anchors.clone();
        let mut mask = Array2::from_elem((2, 4), false);
        mask[[0, 1]] = true;
        mask[[1, 0]] = true;
        let lv = info_nce(anchors.view(), positives.view(), mask.view(), 0.05, Similarity::Cosine).unwrap();
        assert!(lv.value < 1e-10, "{}", lv.value);
        assert!(lv.value >= 0.0);
    }

    #[test]
    fn info_nce_matches_direct_summation() {
        let anchors = array![[0.2, -1.0, 0.5], [1.5, 0.3, -0.7], [-0.4, 0.9, 1.2]];
        let positives = array![[0.1, -0.8, 0.9], [1.0, 0.0, -1.0], [-0.2, 1.1, 0.4]];
        let mask = all_but_self_and_positive(3);
        let lv = info_nce(anchors.view(), positives.view(), mask.view(), 0.7, Similarity::Cosine).unwrap();
        let emb = ndarray::concatenate(Axis(0), &[anchors.view(), positives.view()]).unwrap();
        assert_abs_diff_eq!(lv.value, nce_oracle(&rows(&emb), &mask, 0.7), epsilon = 1e-12);
    }

    #[test]
    fn negatives_only_convention_errors_on_empty_set() {
        let a = array![[1.0, 0.0]];
        let mask = Array2::from_elem((1, 2), false);
        let r = info_nce_with(a.view(), a.view(), mask.view(), 1.0, Similarity::Cosine, Denominator::NegativesOnly);
        assert!(r.is_err());
        let r = info_nce(a.view(), a.view(), mask.view(), 1.0, Similarity::Cosine).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sup_con_symmetric_case_is_log3() {
        let emb = Array2::from_elem((4, 3), 0.5);
        let lv = sup_con(emb.view(), &[1, 1, 1, 1], 1.0).unwrap();
        assert_abs_diff_eq!(lv.value, 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn sup_con_pair_is_zero() {
        let emb = array![[1.0, 2.0], [-0.5, 3.0]];
        let lv = sup_con(emb.view(), &[0, 0], 0.3).unwrap();
        assert_abs_diff_eq!(lv.value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sup_con_matches_direct_summation() {
        let emb = array![[0.3, -0.2], [0.5, 0.1], [-0.4, 0.6], [-0.1, -0.9]];
        let labels = [1, 1, 0, 0];
        let lv = sup_con(emb.view(), &labels, 0.5).unwrap();
        assert_abs_diff_eq!(lv.value, supcon_oracle(&rows(&emb), &labels, 0.5), epsilon = 1e-12);
    }

    #[test]
    fn sup_con_skips_lonely_anchors_and_errors_if_all_lonely() {
        let emb = array![[0.3, -0.2], [0.5, 0.1], [-0.4, 0.6]];
        let lv = sup_con(emb.view(), &[1, 1, 0], 1.0).unwrap();
        assert_abs_diff_eq!(lv.value, supcon_oracle(&rows(&emb), &[1, 1, 0], 1.0), epsilon = 1e-12);
        assert!(sup_con(emb.view(), &[0, 1, 2], 1.0).is_err());
    }

    #[test]
    fn bce_examples() {
        let v = bce(array![1.0, 0.0].view(), &[1, 0]).unwrap();
        assert!(v.value < 1e-11);
        let v = bce(array![0.5, 0.5, 0.5].view(), &[1, 0, 1]).unwrap();
        assert_abs_diff_eq!(v.value, 2f64.ln(), epsilon = 1e-15);
        let v = bce(array![0.9, 0.2].view(), &[1, 0]).unwrap();
        assert_abs_diff_eq!(v.value, -(0.9f64.ln() + 0.8f64.ln()) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.value, 0.16425, epsilon = 1e-5);
        assert_abs_diff_eq!(v.grad[0], -0.05, epsilon = 1e-15);
    }

    #[test]
    fn total_loss_is_linear() {
        assert_eq!(total_loss(0.0, 3.0, 1.25).unwrap(), 1.25);
        assert_eq!(total_loss(1.0, 0.5, 1.0).unwrap(), 1.5);
        assert!(total_loss(-1.0, 0.5, 1.0).is_err());
    }

    fn check_embedding_grad<F>(emb: &Array2<f64>, f: F) -> f64
    where
        F: Fn(ArrayView2<'_, f64>) -> LossValue,
    {
        let shape = emb.dim();
        let theta: Vec<f64> = emb.iter().copied().collect();
        let r = gradient_check(
            &theta,
            |t| {
                let e = Array2::from_shape_vec(shape, t.to_vec()).unwrap();
                let lv = f(e.view());
                (lv.value, lv.grad.iter().copied().collect())
            },
            1e-5,
            None,
            &mut Rng::new(0),
        );
        r.max_rel_error
    }

    #[test]
    fn info_nce_gradient_matches_finite_differences() {
        let mut rng = Rng::new(11);
        for sim in [Similarity::Cosine, Similarity::Dot] {
            let emb = randn(8, 5, &mut rng);
            let mask = all_but_self_and_positive(4);
            let err = check_embedding_grad(&emb, |e| {
                info_nce(e.slice(s![0..4, ..]), e.slice(s![4..8, ..]), mask.view(), 0.5, sim).unwrap()
            });
            assert!(err < 1e-6, "{sim:?}: {err}");
        }
    }

    #[test]
    fn sup_con_gradient_matches_finite_differences() {
        let mut rng = Rng::new(12);
        let emb = randn(6, 4, &mut rng);
        let labels = [1, 0, 1, 1, 0, 0];
        let err = check_embedding_grad(&emb, |e| sup_con(e, &labels, 0.8).unwrap());
        assert!(err < 1e-6, "{err}");
        let err = check_embedding_grad(&emb, |e| sup_con_anchored(e, 3, &labels, 0.8, Similarity::Cosine).unwrap());
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn scaling_invariance_cosine_but_not_dot() {
        let mut rng = Rng::new(13);
        let emb = randn(6, 3, &mut rng);
        let mask = all_but_self_and_positive(3);
        let f = |e: &Array2<f64>, sim| {
            info_nce(e.slice(s![0..3, ..]), e.slice(s![3..6, ..]), mask.view(), 0.5, sim).unwrap().value
        };
        let scaled = &emb * 3.7;
        assert_abs_diff_eq!(f(&emb, Similarity::Cosine), f(&scaled, Similarity::Cosine), epsilon = 1e-12);
        let labels = [1, 0, 1, 0, 1, 0];
        let a = sup_con(emb.view(), &labels, 1.0).unwrap().value;
        let b = sup_con(scaled.view(), &labels, 1.0).unwrap().value;
        assert!((a - b).abs() > 1e-6);
    }

    #[test]
    fn lower_temperature_sharpens_when_positive_is_closest() {
        let anchors = array![[1.0, 0.1], [0.0, 1.0]];
        let positives = array![[0.9, 0.2], [0.1, 0.95]];
        let mask = all_but_self_and_positive(2);
        let mut prev = f64::INFINITY;
        for tau in [2.0, 1.0, 0.5, 0.2, 0.1] {
            let v = info_nce(anchors.view(), positives.view(), mask.view(), tau, Similarity::Cosine).unwrap().value;
            assert!(v < prev, "tau {tau}: {v} !< {prev}");
            prev = v;
        }
    }

    proptest! {
        #[test]
        fn info_nce_is_nonnegative_and_permutation_equivariant(
            vals in proptest::collection::vec(-3.0f64..3.0, 24),
            shift in 1usize..4,
        ) {
            let emb = Array2::from_shape_vec((8, 3), vals).unwrap();
            prop_assume!(emb.rows().into_iter().all(|r| r.dot(&r) > 1e-6));
            let n = 4;
            let mask = all_but_self_and_positive(n);
            let v = info_nce(emb.slice(s![0..4, ..]), emb.slice(s![4..8, ..]), mask.view(), 0.5, Similarity::Cosine).unwrap().value;
            prop_assert!(v >= -1e-12);
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let a = emb.select(Axis(0), &perm);
            let p = emb.slice(s![4..8, ..]).select(Axis(0), &perm);
            let v2 = info_nce(a.view(), p.view(), mask.view(), 0.5, Similarity::Cosine).unwrap().value;
            prop_assert!((v - v2).abs() < 1e-12);
        }

        #[test]
        fn sup_con_is_permutation_equivariant(
            vals in proptest::collection::vec(-2.0f64..2.0, 18),
            labels in proptest::collection::vec(0u8..2, 6),
            shift in 1usize..6,
        ) {
            let emb = Array2::from_shape_vec((6, 3), vals).unwrap();
            prop_assume!(labels.iter().filter(|&&l| l == 1).count() != 1 || labels.iter().filter(|&&l| l == 0).count() > 1);
            let v = match sup_con(emb.view(), &labels, 1.0) { Ok(v) => v.value, Err(_) => return Ok(()) };
            let perm: Vec<usize> = (0..6).map(|i| (i + shift) % 6).collect();
            let e2 = emb.select(Axis(0), &perm);
            let l2: Vec<u8> = perm.iter().map(|&k| labels[k]).collect();
            let v2 = sup_con(e2.view(), &l2, 1.0).unwrap().value;
            prop_assert!((v - v2).abs() < 1e-12);
        }
    }
}
