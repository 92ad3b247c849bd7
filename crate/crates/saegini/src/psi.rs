//! Bounded influence functions and the skewness/quantile correspondence.
//!
//! Three psi functions are provided. `huber_psi` is the usual symmetric
//! truncation at `c`. `asym_huber_psi` attaches different slopes to the two
//! sides of zero, controlled by a skewness parameter `gamma`:
//!
//! * left of zero the slope is `2 / (gamma^2 + 1)`, truncated at
//!   `-2c / (gamma^2 + 1)`,
//! * right of zero the slope is `2 gamma^2 / (gamma^2 + 1)`, truncated at
//!   `+2c gamma^2 / (gamma^2 + 1)`.
//!
//! `gamma = 1` gives equal slopes of one on both sides, recovering
//! `huber_psi` exactly. `gamma > 1` lets positive residuals through with more
//! weight, which preserves a right tail instead of shrinking it.
//!
//! `mq_psi` is the same shape parameterised by an asymmetry quantile
//! `q in (0, 1)`: `2 q` on the positive side and `2 (1 - q)` on the negative
//! side. The two parameterisations coincide under `q = gamma^2 / (gamma^2 + 1)`,
//! exposed as [`gamma_to_q`] and its inverse [`q_to_gamma`].

/// Symmetric Huber psi: the identity inside `[-c, c]`, clamped outside.
#[inline]
pub fn huber_psi(r: f64, c: f64) -> f64 {
    debug_assert!(c > 0.0, "huber_psi requires c > 0");
    r.clamp(-c, c)
}

/// Asymmetric Huber psi with half-width `c` and skewness `gamma > 0`.
#[inline]
pub fn asym_huber_psi(r: f64, c: f64, gamma: f64) -> f64 {
    debug_assert!(c > 0.0, "asym_huber_psi requires c > 0");
    debug_assert!(gamma > 0.0, "asym_huber_psi requires gamma > 0");
    let g2 = gamma * gamma;
    let slope = if r < 0.0 { 2.0 / (g2 + 1.0) } else { 2.0 * g2 / (g2 + 1.0) };
    slope * huber_psi(r, c)
}

/// M-quantile psi: `2 q huber(r)` for positive residuals, `2 (1 - q) huber(r)`
/// for the rest.
#[inline]
pub fn mq_psi(r: f64, c: f64, q: f64) -> f64 {
    debug_assert!(q > 0.0 && q < 1.0, "mq_psi requires q in (0, 1)");
    let w = if r > 0.0 { q } else { 1.0 - q };
    2.0 * w * huber_psi(r, c)
}

/// Asymmetry quantile matching a skewness parameter: `q = gamma^2 / (gamma^2 + 1)`.
#[inline]
pub fn gamma_to_q(gamma: f64) -> f64 {
    debug_assert!(gamma > 0.0, "gamma_to_q requires gamma > 0");
    let g2 = gamma * gamma;
    g2 / (g2 + 1.0)
}

/// Inverse of [`gamma_to_q`]: `gamma = sqrt(q / (1 - q))`.
#[inline]
pub fn q_to_gamma(q: f64) -> f64 {
    debug_assert!(q > 0.0 && q < 1.0, "q_to_gamma requires q in (0, 1)");
    (q / (1.0 - q)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn huber_identity_inside_and_clamped_outside() {
        assert_eq!(huber_psi(0.5, 2.0), 0.5);
        assert_eq!(huber_psi(3.0, 2.0), 2.0);
        assert_eq!(huber_psi(-3.0, 2.0), -2.0);
        assert_eq!(huber_psi(0.0, 1.345), 0.0);
    }

    #[test]
    fn asymmetric_slopes_and_truncation() {
        // gamma = 2: positive slope 8/5, negative slope 2/5.
        assert_eq!(asym_huber_psi(0.5, 2.0, 2.0), 0.8);
        // r = -3 clips at -c = -2, scaled by 2/5.
        assert_eq!(asym_huber_psi(-3.0, 2.0, 2.0), -0.8);
        // Positive clip: r = 5 clips at 2, scaled by 8/5.
        assert_eq!(asym_huber_psi(5.0, 2.0, 2.0), 3.2);
    }

    #[test]
    fn gamma_one_recovers_symmetric_huber() {
        for r in [-4.0, -1.3449, -0.2, 0.0, 0.7, 1.345, 10.0] {
            assert_eq!(asym_huber_psi(r, 1.345, 1.0), huber_psi(r, 1.345));
        }
    }

    #[test]
    fn mq_matches_asymmetric_parameterisation_at_gamma_one() {
        for r in [-4.0, -0.5, 0.0, 0.5, 4.0] {
            assert_eq!(mq_psi(r, 2.0, 0.5), huber_psi(r, 2.0));
        }
    }

    #[test]
    fn quantile_correspondence() {
        assert_eq!(gamma_to_q(2.0), 0.8);
        assert_eq!(gamma_to_q(1.0), 0.5);
        assert!((q_to_gamma(0.8) - 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn q_gamma_roundtrip(gamma in 0.05f64..20.0) {
            let q = gamma_to_q(gamma);
            prop_assert!((q_to_gamma(q) - gamma).abs() <= 1e-12 * gamma.max(1.0));
        }

        #[test]
        fn asym_psi_is_bounded_monotone_and_sign_preserving(
            r1 in -50.0f64..50.0,
            r2 in -50.0f64..50.0,
            c in 0.1f64..10.0,
            gamma in 0.2f64..5.0,
        ) {
            let g2 = gamma * gamma;
            let lo = -2.0 * c / (g2 + 1.0);
            let hi = 2.0 * c * g2 / (g2 + 1.0);
            let p1 = asym_huber_psi(r1, c, gamma);
            prop_assert!(p1 >= lo - 1e-12 && p1 <= hi + 1e-12);
            prop_assert!(p1 * r1 >= 0.0);
            let p2 = asym_huber_psi(r2, c, gamma);
            if r1 <= r2 {
                prop_assert!(p1 <= p2 + 1e-12);
            } else {
                prop_assert!(p2 <= p1 + 1e-12);
            }
        }

        #[test]
        fn mq_equals_asym_under_correspondence_at_exact_halves(r in -20.0f64..20.0, c in 0.1f64..5.0) {
            // q = 0.5 <-> gamma = 1 is exact in floating point.
            prop_assert_eq!(mq_psi(r, c, 0.5), asym_huber_psi(r, c, 1.0));
        }
    }
}
