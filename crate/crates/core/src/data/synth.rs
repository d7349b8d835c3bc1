//! Synthetic biased tabular data for offline tests and demos.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::Rng;

/// `n` rows, `d` Gaussian features plus a privileged/unprivileged indicator
/// pair. Half the rows (rounded down) have `s = 1`. Within each `s` group the
/// number of positives is fixed at `round(p_s · n_s)` with
/// `p_1 = base_rate + bias/2`, `p_0 = base_rate − bias/2`, so the realised
/// outcome-rate gap is `bias_strength` up to rounding. Feature `j` has unit
/// variance and a mean shifted by both `y` and `s`.
pub fn synth_biased(n: usize, d: usize, bias_strength: f64, base_rate: f64, seed: u64) -> Result<Dataset> {
    if n < 40 || d < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 40 and d >= 2, got n={n}, d={d}")));
    }
    if !(0.0..=1.0).contains(&bias_strength) || !(0.0..=1.0).contains(&base_rate) {
        return Err(Error::InvalidArgument("bias_strength and base_rate must lie in [0, 1]".into()));
    }
    let n1 = n / 2;
    let n0 = n - n1;
    let (p1, p0) = (base_rate + bias_strength / 2.0, base_rate - bias_strength / 2.0);
    let k1 = (p1 * n1 as f64).round() as i64;
    let k0 = (p0 * n0 as f64).round() as i64;
    for (k, m, p) in [(k1, n1 as i64, p1), (k0, n0 as i64, p0)] {
        if k < 1 || k > m - 1 {
            return Err(Error::Infeasible(format!(
                "P(y=1|s) = {p:.3} leaves a (y, s) subgroup empty (base_rate {base_rate}, bias {bias_strength})"
            )));
        }
    }

    let mut rng = Rng::new(seed);
    let mut rows: Vec<(u8, u8)> = Vec::with_capacity(n);
    rows.extend((0..n1).map(|i| (u8::from((i as i64) < k1), 1)));
    rows.extend((0..n0).map(|i| (u8::from((i as i64) < k0), 0)));
    rows.shuffle(&mut rng);

    let mut x = Array2::<f64>::zeros((n, d + 2));
    for (i, &(y, s)) in rows.iter().enumerate() {
        let (yc, sc) = (f64::from(y) - 0.5, f64::from(s) - 0.5);
        for j in 0..d {
            let label_shift = if j % 2 == 0 { 1.5 } else { 0.5 };
            let group_shift = if j % 3 == 0 { 1.0 } else { 0.25 };
            let noise: f64 = StandardNormal.sample(&mut rng);
            x[[i, j]] = label_shift * yc + group_shift * sc + noise;
        }
        x[[i, d + 1 - s as usize]] = 1.0;
    }
    let mut names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    names.push("s=privileged".into());
    names.push("s=unprivileged".into());
    let (y, s) = rows.into_iter().unzip();
    Dataset::new(
        x,
        y,
        s,
        names,
        format!("synthetic(n={n}, d={d}, bias={bias_strength}, base={base_rate}, seed={seed})"),
    )?
    .with_sensitive_columns(Some((d, d + 1)))
}
