//! Central finite-difference gradient checking.

use rand::seq::index::sample;

use super::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// max |analytic − numeric| / max(|analytic|, |numeric|, 1e-12)
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Central difference formula used for the numeric derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(x+h) − f(x−h)) / 2h`, error `O(h²)`.
    #[default]
    ThreePoint,
    /// `(−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h`, error `O(h⁴)`.
    /// Allows a larger `h`, which keeps rounding noise in `f` from swamping
    /// small gradient components.
    FivePoint,
}

/// Compares the analytic gradient returned by `f` at `theta` with central
/// differences of step `h`. With `max_params = Some(k)` only `k` randomly
/// chosen coordinates are perturbed. Never fails; a non-finite loss shows up
/// as an infinite discrepancy.
pub fn gradient_check<F>(theta: &[f64], f: F, h: f64, max_params: Option<usize>, rng: &mut Rng) -> GradCheck
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    gradient_check_with(theta, f, h, max_params, rng, Stencil::ThreePoint)
}

pub fn gradient_check_with<F>(
    theta: &[f64],
    mut f: F,
    h: f64,
    max_params: Option<usize>,
    rng: &mut Rng,
    stencil: Stencil,
) -> GradCheck
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(theta);
    let idx: Vec<usize> = match max_params {
        Some(k) if k < theta.len() => {
            let mut v = sample(rng, theta.len(), k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..theta.len()).collect(),
    };
    let mut probe = theta.to_vec();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_index: idx.first().copied().unwrap_or(0),
        checked: idx.len(),
    };
    for &i in &idx {
        let orig = probe[i];
        let mut at = |d: f64| {
            probe[i] = orig + d;
            let v = f(&probe).0;
            probe[i] = orig;
            v
        };
        let numeric = match stencil {
            Stencil::ThreePoint => (at(h) - at(-h)) / (2.0 * h),
            Stencil::FivePoint => {
                let near = at(h) - at(-h);
                let far = at(2.0 * h) - at(-2.0 * h);
                (8.0 * near - far) / (12.0 * h)
            }
        };
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        let rel = if rel.is_nan() { f64::INFINITY } else { rel };
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    report
}
