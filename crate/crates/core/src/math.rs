//! Small numeric helpers used across modules.

use crate::real::{real, Real};

/// `log(sum_i exp(x_i))` computed with the max-shift guard so that large
/// magnitudes cannot overflow. Returns negative infinity for an empty slice.
pub fn logsumexp<R: Real>(xs: &[R]) -> R {
    let m = xs.iter().cloned().fold(R::neg_infinity(), R::max);
    if !m.is_finite() {
        // All inputs -inf (or empty): the sum is zero, the log is -inf.
        // A +inf input propagates as +inf.
        return m;
    }
    let sum: R = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Quantile of an ascending-sorted slice using linear interpolation between
/// the two nearest order statistics (`h = (n - 1) q`).
pub fn quantile_sorted<R: Real>(sorted: &[R], q: f64) -> R {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    assert!((0.0..=1.0).contains(&q), "quantile level out of range");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = real::<R>(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Euclidean distance between two equally long vectors.
pub fn euclidean<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<R>()
        .sqrt()
}

/// Arithmetic mean of a nonempty slice.
pub fn mean<R: Real>(xs: &[R]) -> R {
    debug_assert!(!xs.is_empty());
    xs.iter().cloned().sum::<R>() / real(xs.len() as f64)
}
