//! Scale estimators for residual vectors.
//!
//! [`mad_scale`] is the median absolute deviation about the median, scaled by
//! 1.4826 for consistency at the normal distribution. [`qn_scale`] is the Qn
//! estimator: the k-th order statistic of the n(n-1)/2 pairwise absolute
//! differences with k = h(h-1)/2 and h = floor(n/2) + 1, scaled by 2.2219.
//! Qn does not depend on a location estimate and has a much higher
//! breakdown-adjusted efficiency than the MAD; it costs O(n^2) here, which is
//! fine for area-level residual vectors. [`rms_scale`] is the root mean
//! square about zero — not resistant to outliers, but equivariant in the tail
//! of an uncentred residual vector, which makes a winsorisation window based
//! on it track heavy-tailed residual mass instead of the bulk.
//!
//! All return an error when the data carry no spread, since callers divide
//! by the result.

use crate::error::{Error, Result};

/// Consistency factor putting the MAD on the standard deviation scale at the
/// normal distribution.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Consistency factor for the Qn estimator at the normal distribution.
pub const QN_CONSISTENCY: f64 = 2.2219;

/// Which scale estimator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    Mad,
    Qn,
    Rms,
}

impl std::fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScaleKind::Mad => write!(f, "mad"),
            ScaleKind::Qn => write!(f, "qn"),
            ScaleKind::Rms => write!(f, "rms"),
        }
    }
}

impl std::str::FromStr for ScaleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mad" => Ok(ScaleKind::Mad),
            "qn" => Ok(ScaleKind::Qn),
            "rms" => Ok(ScaleKind::Rms),
            other => Err(crate::error::invalid(format!(
                "unknown scale estimator `{other}` (expected `mad`, `qn`, or `rms`)"
            ))),
        }
    }
}

/// Median of a mutable slice, averaging the two central order statistics for
/// even lengths. Uses selection rather than a full sort.
pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    debug_assert!(!v.is_empty());
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        // After selection the left partition holds the mid smallest values;
        // its maximum is the lower of the two central order statistics.
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Median of a slice without mutating it.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median of an empty slice"));
    }
    let mut work = values.to_vec();
    Ok(median_in_place(&mut work))
}

/// Median absolute deviation about the median, normal-consistent.
pub fn mad_scale(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::Empty("mad_scale needs at least two residuals"));
    }
    let mut work = residuals.to_vec();
    let center = median_in_place(&mut work);
    for (slot, r) in work.iter_mut().zip(residuals) {
        *slot = (r - center).abs();
    }
    let s = MAD_CONSISTENCY * median_in_place(&mut work);
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::ZeroScale("more than half of the residuals coincide"))
    }
}

/// Qn pairwise-difference scale estimator, normal-consistent.
pub fn qn_scale(residuals: &[f64]) -> Result<f64> {
    let n = residuals.len();
    if n < 2 {
        return Err(Error::Empty("qn_scale needs at least two residuals"));
    }
    let mut diffs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            diffs.push((residuals[i] - residuals[j]).abs());
        }
    }
    let h = n / 2 + 1;
    let k = h * (h - 1) / 2;
    debug_assert!(k >= 1 && k <= diffs.len());
    let (_, kth, _) = diffs.select_nth_unstable_by(k - 1, f64::total_cmp);
    let s = QN_CONSISTENCY * *kth;
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::ZeroScale("the k-th smallest pairwise difference is zero"))
    }
}

/// Root mean square about zero. For a residual-like vector this is the
/// uncentred second-moment scale; heavy tails move it proportionally, unlike
/// the median-type estimators above.
pub fn rms_scale(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::Empty("rms_scale needs at least two residuals"));
    }
    let s = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    if s > 0.0 && s.is_finite() {
        Ok(s)
    } else if s == 0.0 {
        Err(Error::ZeroScale("all residuals are zero"))
    } else {
        Err(crate::error::invalid("rms_scale overflowed or saw non-finite residuals"))
    }
}

/// Dispatch on [`ScaleKind`].
pub fn robust_scale(residuals: &[f64], kind: ScaleKind) -> Result<f64> {
    match kind {
        ScaleKind::Mad => mad_scale(residuals),
        ScaleKind::Qn => qn_scale(residuals),
        ScaleKind::Rms => rms_scale(residuals),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::Distribution;

    #[test]
    fn mad_known_values() {
        assert_eq!(mad_scale(&[-1.0, 0.0, 1.0]).unwrap(), 1.4826);
        assert_eq!(mad_scale(&[-2.0, -2.0, 2.0, 2.0]).unwrap(), 2.9652);
    }

    #[test]
    fn mad_rejects_degenerate_input() {
        assert!(matches!(mad_scale(&[0.0, 0.0, 0.0]), Err(Error::ZeroScale(_))));
        assert!(matches!(mad_scale(&[1.0]), Err(Error::Empty(_))));
    }

    #[test]
    fn qn_two_points() {
        assert_eq!(qn_scale(&[0.0, 1.0]).unwrap(), 2.2219);
    }

    #[test]
    fn qn_rejects_constant_input() {
        assert!(matches!(qn_scale(&[3.0, 3.0, 3.0, 3.0]), Err(Error::ZeroScale(_))));
    }

    #[test]
    fn qn_is_consistent_at_the_normal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let normal = rand_distr::Normal::new(0.0, 3.0).unwrap();
        let draws: Vec<f64> = (0..500).map(|_| normal.sample(&mut rng)).collect();
        let s = qn_scale(&draws).unwrap();
        assert!((s - 3.0).abs() < 0.4, "qn on N(0,3) draws gave {s}");
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
    }

    #[test]
    fn rms_known_values_and_degenerate_input() {
        assert_eq!(rms_scale(&[3.0, -4.0]).unwrap(), (12.5f64).sqrt());
        assert!(matches!(rms_scale(&[0.0, 0.0]), Err(Error::ZeroScale(_))));
        assert!(matches!(rms_scale(&[1.0]), Err(Error::Empty(_))));
    }

    proptest! {
        #[test]
        fn rms_is_scale_equivariant(
            mut base in proptest::collection::vec(-100.0f64..100.0, 2..40),
            factor in 0.01f64..100.0,
        ) {
            for (i, b) in base.iter_mut().enumerate() {
                *b += i as f64 * 0.37 + 0.1;
            }
            let s0 = rms_scale(&base).unwrap();
            let scaled: Vec<f64> = base.iter().map(|x| x * factor).collect();
            let s1 = rms_scale(&scaled).unwrap();
            prop_assert!((s1 - factor * s0).abs() <= 1e-9 * (factor * s0).max(1.0));
        }
    }

    proptest! {
        #[test]
        fn both_scales_are_translation_invariant_and_scale_equivariant(
            mut base in proptest::collection::vec(-100.0f64..100.0, 5..40),
            shift in -1000.0f64..1000.0,
            factor in 0.01f64..100.0,
        ) {
            // Spread the values out so the scale cannot degenerate.
            for (i, b) in base.iter_mut().enumerate() {
                *b += i as f64 * 0.37;
            }
            for kind in [ScaleKind::Mad, ScaleKind::Qn] {
                let s0 = robust_scale(&base, kind).unwrap();
                let shifted: Vec<f64> = base.iter().map(|x| x + shift).collect();
                let scaled: Vec<f64> = base.iter().map(|x| x * factor).collect();
                let s1 = robust_scale(&shifted, kind).unwrap();
                let s2 = robust_scale(&scaled, kind).unwrap();
                prop_assert!((s1 - s0).abs() <= 1e-9 * s0.max(1.0));
                prop_assert!((s2 - factor * s0).abs() <= 1e-9 * (factor * s0).max(1.0));
            }
        }
    }
}
