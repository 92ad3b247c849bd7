//! The Gini functional, its linearisation, and influence-function-based
//! bias calibration.
//!
//! For a nonnegative population vector with positive mean, the empirical
//! Gini coefficient uses the rank form
//!
//! `T = 2 sum_i i y_(i) / (N sum_i y_i) - 1`
//!
//! with ascending 1-based ranks. On a [`WeightedCdf`] the same functional is
//! `T(F) = 2 integral t F(t) dF(t) / mean(F) - 1`, evaluated with the
//! right-continuous `F` at every atom. The two agree whenever the support
//! points are distinct; under ties they are different conventions and each
//! is used consistently on its own side (vectors vs estimated CDFs). Both
//! hand a degenerate single-atom distribution the value 1, and the rank form
//! gives a constant vector `1/N`; no clamping is applied anywhere.
//!
//! The linearisation of the rank form produces one pseudo-value per unit,
//!
//! `z_(i) = (1/N) sum_{h >= i} y_(h) + (i/N) y_(i)`,
//!
//! satisfying the reconstruction identity
//! `T = -T - 2 + (2/mu) mean_i(z_i)` exactly, because
//! `sum_i z_i = (2/N) sum_i i y_(i)`. Tied observations receive equal
//! pseudo-values automatically.
//!
//! [`linearized_calibrate`] implements bias calibration for any functional
//! exposing this structure through [`LinearizedFunctional`]: compare the
//! pseudo-values of the observed composite population `{y_s, yhat_r}` with
//! those of the fitted composite `{yhat_s, yhat_r}`, winsorise the sampled
//! differences asymmetrically, and add the rescaled correction back into the
//! plug-in assembly. The Gini instance is [`if_calibrated_gini`]; the mean
//! functional reduces to the familiar bias-corrected predicted mean and
//! serves as a cross-check that the engine is functional-agnostic.

use crate::cdf::{ConstantMap, WeightedCdf};
use crate::data::{AreaId, Population};
use crate::error::{invalid, Error, Result};
use crate::fit::FittedModel;
use crate::psi::asym_huber_psi;
use crate::scale::{robust_scale, ScaleKind};

fn check_support(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("population vector"));
    }
    let mut sum = 0.0;
    for v in values {
        if !v.is_finite() || *v < 0.0 {
            return Err(invalid(format!(
                "the Gini coefficient needs finite nonnegative values, got {v}"
            )));
        }
        sum += v;
    }
    if sum <= 0.0 {
        return Err(invalid("the Gini coefficient needs a positive mean"));
    }
    Ok(sum)
}

/// Rank-form Gini coefficient of a value vector.
pub fn empirical_gini(values: &[f64]) -> Result<f64> {
    let sum = check_support(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weighted_ranks: f64 =
        sorted.iter().enumerate().map(|(i, y)| (i + 1) as f64 * y).sum();
    let b = values.len() as f64 * sum;
    Ok((2.0 * weighted_ranks - b) / b)
}

/// Gini coefficient of a weighted discrete distribution.
pub fn gini_from_cdf(cdf: &WeightedCdf) -> Result<f64> {
    if cdf.points()[0] < 0.0 {
        return Err(invalid(format!(
            "the Gini coefficient needs nonnegative support, found {}",
            cdf.points()[0]
        )));
    }
    let mut s = 0.0;
    let mut mu = 0.0;
    for ((t, w), f) in cdf.points().iter().zip(cdf.weights()).zip(cdf.cumulative()) {
        s += t * w * f;
        mu += t * w;
    }
    if mu <= 0.0 {
        return Err(invalid("the Gini coefficient needs a positive mean"));
    }
    Ok((2.0 * s - mu) / mu)
}

/// Linearisation pseudo-values of a population vector.
#[derive(Debug, Clone)]
pub struct PseudoValues {
    /// Pseudo-values aligned with the ascending sort of the input.
    pub z: Vec<f64>,
    /// `order[k]` is the input index of the k-th smallest value.
    pub order: Vec<usize>,
    /// Rank-form Gini of the input.
    pub t_tilde: f64,
    /// Mean of the input.
    pub mu_tilde: f64,
}

/// Computes Gini pseudo-values `z_(i) = (1/N) sum_{h>=i} y_(h) + (i/N) y_(i)`.
pub fn pseudo_values(values: &[f64]) -> Result<PseudoValues> {
    let sum = check_support(values)?;
    let n = values.len();
    let nf = n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]).then(a.cmp(b)));
    let sorted: Vec<f64> = order.iter().map(|i| values[*i]).collect();

    let mut suffix = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += sorted[i];
        suffix[i] = acc;
    }
    let z = (0..n)
        .map(|i| suffix[i] / nf + ((i + 1) as f64 / nf) * sorted[i])
        .collect();

    let weighted_ranks: f64 =
        sorted.iter().enumerate().map(|(i, y)| (i + 1) as f64 * y).sum();
    let b = nf * sum;
    Ok(PseudoValues {
        z,
        order,
        t_tilde: (2.0 * weighted_ranks - b) / b,
        mu_tilde: sum / nf,
    })
}

fn influence_from_cdf(y: f64, cdf: &WeightedCdf) -> Result<f64> {
    if y < 0.0 || !y.is_finite() {
        return Err(invalid(format!("influence is defined for finite y >= 0, got {y}")));
    }
    if cdf.points()[0] < 0.0 {
        return Err(invalid("influence needs nonnegative support"));
    }
    let mut i_term = 0.0;
    let mut mu = 0.0;
    for ((t, w), f) in cdf.points().iter().zip(cdf.weights()).zip(cdf.cumulative()) {
        i_term += t * w * f;
        mu += t * w;
    }
    if mu <= 0.0 {
        return Err(invalid("influence needs a positive mean"));
    }
    let start = cdf.points().partition_point(|p| *p < y);
    let tail: f64 = cdf.points()[start..]
        .iter()
        .zip(&cdf.weights()[start..])
        .map(|(t, w)| t * w)
        .sum();
    let f_y = cdf.eval(y);
    Ok(2.0 * (tail - i_term) / mu + 2.0 * y * (f_y - i_term / mu) / mu)
}

/// Influence function of the Gini coefficient at `y` against the equal-mass
/// distribution of `values`.
pub fn gini_influence(y: f64, values: &[f64]) -> Result<f64> {
    influence_from_cdf(y, &WeightedCdf::from_values(values)?)
}

/// A functional equipped with the structure needed by the calibration
/// engine: a plug-in rule, per-unit linearisation pseudo-values, and the
/// assembly recovering the estimate from a calibrated bracket mean.
///
/// Law: for every valid vector `v`,
/// `assemble(plug_in(v).0, plug_in(v).1, mean(linearization_values(v)))`
/// equals `plug_in(v).0` (up to rounding), making calibration vanish under a
/// perfect model.
pub trait LinearizedFunctional: Send + Sync {
    fn name(&self) -> &'static str;
    /// Value of the functional on a weighted distribution.
    fn evaluate(&self, cdf: &WeightedCdf) -> Result<f64>;
    /// Influence function at `y` against a weighted distribution.
    fn influence(&self, y: f64, cdf: &WeightedCdf) -> Result<f64>;
    /// Plug-in value and mean of a population vector.
    fn plug_in(&self, values: &[f64]) -> Result<(f64, f64)>;
    /// Pseudo-values aligned with the input order.
    fn linearization_values(&self, values: &[f64]) -> Result<Vec<f64>>;
    /// Pseudo-value of an arbitrary point `y` against the distribution of
    /// `values`: what the member pseudo-value would be if the point sat at
    /// its rank, so a point equal to a member reproduces that member's
    /// value and the map is nondecreasing in `y`.
    fn linearization_at(&self, y: f64, values: &[f64]) -> Result<f64>;
    /// Recovers the estimate from the plug-in Gini/mean pair and the mean of
    /// the calibrated bracket.
    fn assemble(&self, t_plug: f64, mu: f64, bracket_mean: f64) -> f64;
}

/// The Gini coefficient as a [`LinearizedFunctional`].
pub struct GiniFunctional;

impl LinearizedFunctional for GiniFunctional {
    fn name(&self) -> &'static str {
        "gini"
    }

    fn evaluate(&self, cdf: &WeightedCdf) -> Result<f64> {
        gini_from_cdf(cdf)
    }

    fn influence(&self, y: f64, cdf: &WeightedCdf) -> Result<f64> {
        influence_from_cdf(y, cdf)
    }

    fn plug_in(&self, values: &[f64]) -> Result<(f64, f64)> {
        let t = empirical_gini(values)?;
        Ok((t, values.iter().sum::<f64>() / values.len() as f64))
    }

    fn linearization_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        let pv = pseudo_values(values)?;
        let mut out = vec![0.0; values.len()];
        for (k, idx) in pv.order.iter().enumerate() {
            out[*idx] = pv.z[k];
        }
        Ok(out)
    }

    /// `z(v) = (1/N) [sum_{y_(h) > v} y_(h) + v * (#{y_(h) <= v} + 1)]`: the
    /// pseudo-value the point would have as a member of the distribution —
    /// the strict upper-tail value sum plus the point times its own
    /// (inclusive) rank. A point equal to a member reproduces that member's
    /// pseudo-value exactly, at every tie multiplicity, so the gap
    /// `z(y) - z(yhat)` vanishes under a perfect fit and carries the sign of
    /// `y - yhat` (the underlying function is nondecreasing in the point).
    fn linearization_at(&self, y: f64, values: &[f64]) -> Result<f64> {
        check_support(values)?;
        if !y.is_finite() || y < 0.0 {
            return Err(invalid(format!(
                "pseudo-values are defined for finite nonnegative points, got {y}"
            )));
        }
        let n = values.len() as f64;
        let mut tail = 0.0;
        let mut rank = 1usize;
        for v in values {
            if *v > y {
                tail += v;
            } else {
                rank += 1;
            }
        }
        Ok((tail + y * rank as f64) / n)
    }

    fn assemble(&self, t_plug: f64, mu: f64, bracket_mean: f64) -> f64 {
        -t_plug - 2.0 + 2.0 * bracket_mean / mu
    }
}

/// The population mean as a [`LinearizedFunctional`]. Calibrating it yields
/// the classical bias-corrected predicted mean, which makes it a transparent
/// cross-check of the engine.
pub struct MeanFunctional;

impl LinearizedFunctional for MeanFunctional {
    fn name(&self) -> &'static str {
        "mean"
    }

    fn evaluate(&self, cdf: &WeightedCdf) -> Result<f64> {
        Ok(cdf.mean())
    }

    fn influence(&self, y: f64, cdf: &WeightedCdf) -> Result<f64> {
        if !y.is_finite() {
            return Err(invalid("influence is defined for finite y"));
        }
        Ok(y - cdf.mean())
    }

    fn plug_in(&self, values: &[f64]) -> Result<(f64, f64)> {
        if values.is_empty() {
            return Err(Error::Empty("population vector"));
        }
        let mu = values.iter().sum::<f64>() / values.len() as f64;
        Ok((mu, mu))
    }

    fn linearization_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.is_empty() {
            return Err(Error::Empty("population vector"));
        }
        Ok(values.to_vec())
    }

    fn linearization_at(&self, y: f64, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::Empty("population vector"));
        }
        if !y.is_finite() {
            return Err(invalid("pseudo-values are defined for finite points"));
        }
        Ok(y)
    }

    fn assemble(&self, _t_plug: f64, _mu: f64, bracket_mean: f64) -> f64 {
        bracket_mean
    }
}

/// Which vector the winsorisation yardstick `w_j` is estimated from.
///
/// The correction passes small pseudo-residuals through untouched either way
/// (`w·psi(z/w) = z` inside the linear window), so this choice only moves the
/// clipping threshold `c·w_j`. Pseudo-residuals are rank-contracted in the
/// bulk but agree with the raw fit residuals in the tail, so the fit-residual
/// yardstick widens the window by roughly the inverse contraction factor; it
/// is kept as a sensitivity knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WinsorBase {
    /// `w_j` from the pseudo-residuals themselves.
    #[default]
    PseudoResiduals,
    /// `w_j` from the fit residuals `y − ŷ` of the same sampled units.
    FitResiduals,
}

/// Reference distribution for the pseudo-residuals `zeta_ij = z_ij − ẑ_ij`
/// that the linearized calibration winsorises.
///
/// The correction term's first sums are always the member pseudo-values the
/// plug-in construction defines; only the gap between an observed value's
/// pseudo-value and its fitted value's pseudo-value needs a reference CDF,
/// and that choice is not pinned by the estimator's definition. All three
/// variants agree under a perfect fit (all gaps vanish).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZetaReference {
    /// One shared reference: the composite with observations replaced by
    /// their fitted values. Both `z_ij` and `ẑ_ij` are evaluated against it,
    /// so each pseudo-residual carries its raw residual's sign through one
    /// monotone map. Because the fitted composite's spread comes from the
    /// model part alone, an observed tail value far above it passes at
    /// nearly full size: the pseudo-residuals retain the tail mass that the
    /// downward-biased plug-in is missing, which is what the winsorised
    /// correction exists to restore.
    #[default]
    SharedFitted,
    /// One shared reference: the observed composite. Sign-carrying like
    /// [`ZetaReference::SharedFitted`], but each gap is contracted through
    /// the observed composite's CDF level, which shrinks the correction when
    /// predictions cluster below the observed tail.
    SharedComposite,
    /// Two references: each observed unit's member pseudo-value in the
    /// observed composite minus its fitted value's member pseudo-value in
    /// the all-fitted composite. The second sort re-ranks units, so these
    /// gaps pick up rank-reshuffling noise on top of the residual signal;
    /// kept as a sensitivity variant.
    SubstitutedComposite,
    /// One shared reference: the sampled observations alone. Sampled units
    /// are the only ones whose gap is evaluated, and at the sample's own
    /// distribution the gap is the residual weighted by the empirical CDF
    /// level — the natural sample-level linearisation, inflated to the
    /// population by the correction's `(N_j − n_j)/n_j` factor.
    SampleEcdf,
}

/// Constants for influence-function calibration.
#[derive(Debug, Clone)]
pub struct IfSpec {
    pub c: ConstantMap,
    pub gamma: ConstantMap,
    pub scale: ScaleKind,
    pub scale_base: WinsorBase,
    pub reference: ZetaReference,
}

/// A calibrated functional estimate together with its plug-in value.
#[derive(Debug, Clone, Copy)]
pub struct CalibratedValue {
    pub value: f64,
    pub plug_in: f64,
}

struct AreaVectors {
    y_tilde: Vec<f64>,
    y_hat: Vec<f64>,
    n: usize,
}

fn composite_vectors(fit: &FittedModel, pop: &Population, area: AreaId) -> Result<AreaVectors> {
    let a = pop.area(area)?;
    let preds = fit.predict_unsampled(pop, area)?;
    let mut y_tilde: Vec<f64> = a.sampled.iter().map(|u| u.y).collect();
    let mut y_hat = fit.fitted_sampled(&a.sampled, area)?;
    y_tilde.extend(&preds.values);
    y_hat.extend(&preds.values);
    Ok(AreaVectors { y_tilde, y_hat, n: a.n() })
}

/// Winsorised calibration sum `sum_i w psi_{c,gamma}(zeta_i / w)`; zero when
/// every pseudo-residual is exactly zero (perfect model). `yardstick` is the
/// vector the scale `w` is estimated from (the pseudo-residuals themselves or
/// the fit residuals behind them, per [`WinsorBase`]).
fn calibration_sum(
    zeta: &[f64],
    yardstick: &[f64],
    c: f64,
    gamma: f64,
    scale: ScaleKind,
) -> Result<f64> {
    if zeta.iter().all(|z| *z == 0.0) {
        return Ok(0.0);
    }
    let w = robust_scale(yardstick, scale)?;
    Ok(zeta.iter().map(|z| w * asym_huber_psi(z / w, c, gamma)).sum())
}

/// One area's linearisation pieces: the winsorisation inputs and the
/// uncorrected bracket sum (observed-unit pseudo-values plus prediction
/// pseudo-values), computed under a [`ZetaReference`].
struct AreaLinearization {
    zeta: Vec<f64>,
    resid: Vec<f64>,
    base_sum: f64,
}

fn area_linearization(
    functional: &dyn LinearizedFunctional,
    v: &AreaVectors,
    reference: ZetaReference,
) -> Result<AreaLinearization> {
    let z_tilde = functional.linearization_values(&v.y_tilde)?;
    let resid: Vec<f64> = (0..v.n).map(|i| v.y_tilde[i] - v.y_hat[i]).collect();
    match reference {
        ZetaReference::SharedFitted => {
            let base_sum = z_tilde.iter().sum();
            let zeta = (0..v.n)
                .map(|i| {
                    Ok(functional.linearization_at(v.y_tilde[i], &v.y_hat)?
                        - functional.linearization_at(v.y_hat[i], &v.y_hat)?)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(AreaLinearization { zeta, resid, base_sum })
        }
        ZetaReference::SharedComposite => {
            let base_sum = z_tilde.iter().sum();
            let zeta = (0..v.n)
                .map(|i| Ok(z_tilde[i] - functional.linearization_at(v.y_hat[i], &v.y_tilde)?))
                .collect::<Result<Vec<f64>>>()?;
            Ok(AreaLinearization { zeta, resid, base_sum })
        }
        ZetaReference::SubstitutedComposite => {
            let z_hat = functional.linearization_values(&v.y_hat)?;
            let base_sum =
                z_tilde[..v.n].iter().sum::<f64>() + z_hat[v.n..].iter().sum::<f64>();
            let zeta = (0..v.n).map(|i| z_tilde[i] - z_hat[i]).collect();
            Ok(AreaLinearization { zeta, resid, base_sum })
        }
        ZetaReference::SampleEcdf => {
            let base_sum = z_tilde.iter().sum();
            let sample = &v.y_tilde[..v.n];
            let zeta = (0..v.n)
                .map(|i| {
                    Ok(functional.linearization_at(v.y_tilde[i], sample)?
                        - functional.linearization_at(v.y_hat[i], sample)?)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(AreaLinearization { zeta, resid, base_sum })
        }
    }
}

/// Influence-function bias calibration with area-own pseudo-residuals.
///
/// Takes the pseudo-value gap between each sampled unit's observed and
/// fitted value (per [`IfSpec::reference`]), winsorises it with the
/// area's `(c_j, gamma_j)` on a robust scale, and assembles the calibrated
/// estimate. Errors for areas without sampled units; use
/// [`linearized_calibrate_full`] for those.
pub fn linearized_calibrate(
    functional: &dyn LinearizedFunctional,
    fit: &FittedModel,
    pop: &Population,
    area: AreaId,
    spec: &IfSpec,
) -> Result<CalibratedValue> {
    let a = pop.area(area)?;
    if a.n() == 0 {
        return Err(Error::NoSampledUnits(area));
    }
    let v = composite_vectors(fit, pop, area)?;
    let (t_tilde, mu_tilde) = functional.plug_in(&v.y_tilde)?;
    if v.y_tilde == v.y_hat {
        // Perfect model: every pseudo-residual is identically zero, the
        // correction term vanishes, and in exact arithmetic the linearized
        // estimate reconstructs the plug-in value. Returning it directly
        // keeps that identity exact instead of leaving rounding crumbs.
        return Ok(CalibratedValue { value: t_tilde, plug_in: t_tilde });
    }
    let lin = area_linearization(functional, &v, spec.reference)?;
    let big_n = v.y_tilde.len();
    let calib = if big_n == v.n {
        0.0
    } else {
        let yardstick = match spec.scale_base {
            WinsorBase::PseudoResiduals => &lin.zeta,
            WinsorBase::FitResiduals => &lin.resid,
        };
        let s = calibration_sum(
            &lin.zeta,
            yardstick,
            spec.c.get(area)?,
            spec.gamma.get(area)?,
            spec.scale,
        )?;
        (big_n - v.n) as f64 / v.n as f64 * s
    };
    let bracket_mean = (lin.base_sum + calib) / big_n as f64;
    Ok(CalibratedValue {
        value: functional.assemble(t_tilde, mu_tilde, bracket_mean),
        plug_in: t_tilde,
    })
}

/// Influence-function bias calibration with pseudo-residuals pooled over all
/// sampled areas, on a pooled robust scale with scalar `(c, gamma)`.
///
/// Defined for every area. For an area without sampled units the composite
/// populations coincide (predictions only) and the correction enters with
/// the factor `N_j / n`.
pub fn linearized_calibrate_full(
    functional: &dyn LinearizedFunctional,
    fit: &FittedModel,
    pop: &Population,
    area: AreaId,
    spec: &IfSpec,
) -> Result<CalibratedValue> {
    let c = spec.c.scalar()?;
    let gamma = spec.gamma.scalar()?;
    let mut zeta = Vec::with_capacity(pop.total_n());
    let mut resid = Vec::with_capacity(pop.total_n());
    for h in pop.areas().iter().filter(|h| h.is_sampled()) {
        let vh = composite_vectors(fit, pop, h.id)?;
        let lin = area_linearization(functional, &vh, spec.reference)?;
        zeta.extend(lin.zeta);
        resid.extend(lin.resid);
    }
    if zeta.is_empty() {
        return Err(Error::Empty("no sampled areas to pool pseudo-residuals from"));
    }
    let n_total = zeta.len();

    let v = composite_vectors(fit, pop, area)?;
    let (t_tilde, mu_tilde) = functional.plug_in(&v.y_tilde)?;
    let lin = area_linearization(functional, &v, spec.reference)?;
    let big_n = v.y_tilde.len();
    let calib = if big_n == v.n {
        0.0
    } else {
        let yardstick = match spec.scale_base {
            WinsorBase::PseudoResiduals => &zeta,
            WinsorBase::FitResiduals => &resid,
        };
        let s = calibration_sum(&zeta, yardstick, c, gamma, spec.scale)?;
        (big_n - v.n) as f64 / n_total as f64 * s
    };
    let bracket_mean = (lin.base_sum + calib) / big_n as f64;
    Ok(CalibratedValue {
        value: functional.assemble(t_tilde, mu_tilde, bracket_mean),
        plug_in: t_tilde,
    })
}

/// A calibrated Gini estimate. Values outside `[0, 1]` are possible because
/// the correction is additive; they are flagged, never clamped.
#[derive(Debug, Clone, Copy)]
pub struct GiniEstimate {
    pub value: f64,
    pub plug_in: f64,
    pub out_of_range: bool,
}

impl GiniEstimate {
    fn from_calibrated(cv: CalibratedValue) -> GiniEstimate {
        GiniEstimate {
            value: cv.value,
            plug_in: cv.plug_in,
            out_of_range: !(0.0..=1.0).contains(&cv.value),
        }
    }
}

/// Asymmetrically calibrated Gini estimator with area-own pseudo-residuals.
pub fn if_calibrated_gini(
    fit: &FittedModel,
    pop: &Population,
    area: AreaId,
    spec: &IfSpec,
) -> Result<GiniEstimate> {
    linearized_calibrate(&GiniFunctional, fit, pop, area, spec).map(GiniEstimate::from_calibrated)
}

/// The Gini pseudo-residuals `zeta_ij = z_ij − ẑ_ij` of one area's sampled
/// units: the gap between each unit's observed pseudo-value and its fitted
/// value's pseudo-value, under the given [`ZetaReference`]. This is the
/// vector the linearized calibration winsorises, and the one its skewness
/// constant is counted from.
pub fn gini_pseudo_residuals(
    fit: &FittedModel,
    pop: &Population,
    area: AreaId,
    reference: ZetaReference,
) -> Result<Vec<f64>> {
    let v = composite_vectors(fit, pop, area)?;
    if v.n == 0 {
        return Err(Error::NoSampledUnits(area));
    }
    Ok(area_linearization(&GiniFunctional, &v, reference)?.zeta)
}

/// Asymmetrically calibrated Gini estimator with pooled pseudo-residuals.
pub fn if_calibrated_gini_full(
    fit: &FittedModel,
    pop: &Population,
    area: AreaId,
    spec: &IfSpec,
) -> Result<GiniEstimate> {
    linearized_calibrate_full(&GiniFunctional, fit, pop, area, spec)
        .map(GiniEstimate::from_calibrated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Area, CensusUnit, SampledUnit};
    use crate::fit::{FitDiagnostics, ReblupFit};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn rank_form_known_values() {
        assert_eq!(empirical_gini(&[1.0, 2.0, 3.0]).unwrap(), 5.0 / 9.0);
        assert_eq!(empirical_gini(&[0.0, 7.0]).unwrap(), 1.0);
        assert_eq!(empirical_gini(&[4.0]).unwrap(), 1.0);
        // A constant vector scores 1/N under the rank convention.
        assert!((empirical_gini(&[2.0, 2.0, 2.0, 2.0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rank_form_rejects_bad_input() {
        assert!(empirical_gini(&[]).is_err());
        assert!(empirical_gini(&[1.0, -0.1]).is_err());
        assert!(empirical_gini(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn cdf_form_matches_rank_form_on_distinct_values() {
        let values = [1.0, 2.0, 3.0];
        let cdf = WeightedCdf::from_values(&values).unwrap();
        let g = gini_from_cdf(&cdf).unwrap();
        assert!((g - 5.0 / 9.0).abs() < 1e-15);
        let single = WeightedCdf::from_values(&[3.0]).unwrap();
        assert_eq!(gini_from_cdf(&single).unwrap(), 1.0);
    }

    #[test]
    fn pseudo_values_worked_example() {
        let pv = pseudo_values(&[2.0, 1.0, 3.0]).unwrap();
        assert_eq!(pv.order, vec![1, 0, 2]);
        let expected = [6.0 / 3.0 + 1.0 / 3.0, 5.0 / 3.0 + 4.0 / 3.0, 1.0 + 3.0];
        for (z, e) in pv.z.iter().zip(expected) {
            assert!((z - e).abs() < 1e-14, "{z} vs {e}");
        }
        assert_eq!(pv.t_tilde, 5.0 / 9.0);
        assert_eq!(pv.mu_tilde, 2.0);
    }

    #[test]
    fn tied_values_share_pseudo_values() {
        let pv = pseudo_values(&[5.0, 1.0, 5.0, 2.0]).unwrap();
        // The two fives occupy ranks 3 and 4 but get identical z.
        assert_eq!(pv.z[2], pv.z[3]);
    }

    #[test]
    fn influence_hand_value_and_zero_mean() {
        let values = [1.0, 2.0, 3.0];
        let inf = gini_influence(2.0, &values).unwrap();
        assert!((inf - (-1.0 / 9.0)).abs() < 1e-14, "{inf}");
        let mean: f64 =
            values.iter().map(|y| gini_influence(*y, &values).unwrap()).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-14, "{mean}");
    }

    #[test]
    fn influence_constant_distribution_is_finite() {
        let inf = gini_influence(2.0, &[2.0, 2.0, 2.0]).unwrap();
        assert!(inf.is_finite());
    }

    proptest! {
        #[test]
        fn scale_invariance_and_translation_decrease(
            mut values in proptest::collection::vec(0.1f64..50.0, 3..30),
            k in 0.01f64..100.0,
        ) {
            values[0] += 17.0; // guarantee spread
            let g = empirical_gini(&values).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
            prop_assert!((empirical_gini(&scaled).unwrap() - g).abs() < 1e-12);
            let shifted: Vec<f64> = values.iter().map(|v| v + 5.0).collect();
            prop_assert!(empirical_gini(&shifted).unwrap() < g);
        }

        #[test]
        fn reconstruction_identity_holds(
            values in proptest::collection::vec(0.1f64..100.0, 2..40),
        ) {
            let pv = pseudo_values(&values).unwrap();
            let mean_z: f64 = pv.z.iter().sum::<f64>() / values.len() as f64;
            let rebuilt = -pv.t_tilde - 2.0 + 2.0 * mean_z / pv.mu_tilde;
            prop_assert!((rebuilt - pv.t_tilde).abs() < 1e-12);
        }

        #[test]
        fn functional_assembly_law(values in proptest::collection::vec(0.1f64..100.0, 2..30)) {
            for f in [&GiniFunctional as &dyn LinearizedFunctional, &MeanFunctional] {
                let (t, mu) = f.plug_in(&values).unwrap();
                let z = f.linearization_values(&values).unwrap();
                let mean_z = z.iter().sum::<f64>() / values.len() as f64;
                prop_assert!((f.assemble(t, mu, mean_z) - t).abs() < 1e-12);
            }
        }
    }

    fn toy_setup() -> (FittedModel, Population) {
        let pop = Population::new(vec![Area {
            id: 1,
            sampled: vec![
                SampledUnit { x: vec![1.0, 1.0], y: 2.0 },
                SampledUnit { x: vec![1.0, 2.0], y: 2.5 },
                SampledUnit { x: vec![1.0, 3.0], y: 5.0 },
            ],
            unsampled: vec![
                CensusUnit { x: vec![1.0, 1.5], y: None },
                CensusUnit { x: vec![1.0, 2.5], y: None },
                CensusUnit { x: vec![1.0, 4.0], y: None },
            ],
        }])
        .unwrap();
        let mut u = BTreeMap::new();
        u.insert(1u32, 0.1);
        let fit = FittedModel::Reblup(ReblupFit {
            beta: vec![1.0, 0.8],
            sigma2_u: 0.5,
            sigma2_e: 1.0,
            u,
            c: 1.345,
            diagnostics: FitDiagnostics { converged: true, ..Default::default() },
        });
        (fit, pop)
    }

    fn scalar_spec(c: f64, gamma: f64) -> IfSpec {
        IfSpec {
            c: ConstantMap::Scalar(c),
            gamma: ConstantMap::Scalar(gamma),
            scale: ScaleKind::Mad,
            scale_base: WinsorBase::PseudoResiduals,
            reference: ZetaReference::default(),
        }
    }

    #[test]
    fn calibrated_mean_reduces_to_bias_corrected_mean_at_huge_c() {
        let (fit, pop) = toy_setup();
        let got = linearized_calibrate(&MeanFunctional, &fit, &pop, 1, &scalar_spec(1e9, 1.0))
            .unwrap()
            .value;
        // By hand: (1/N) [sum_s y + sum_r yhat + ((N-n)/n) sum_s (y - yhat)].
        let area = pop.area(1).unwrap();
        let fitted = fit.fitted_sampled(&area.sampled, 1).unwrap();
        let preds = fit.predict_unsampled(&pop, 1).unwrap().values;
        let sum_s: f64 = area.sampled.iter().map(|u| u.y).sum();
        let sum_r: f64 = preds.iter().sum();
        let corr: f64 = area
            .sampled
            .iter()
            .zip(&fitted)
            .map(|(u, f)| u.y - f)
            .sum::<f64>();
        let expected = (sum_s + sum_r + corr) / 6.0;
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }

    #[test]
    fn perfect_model_calibration_vanishes() {
        let (fit, mut_pop) = toy_setup();
        // Rebuild outcomes exactly on the fitted surface.
        let mut areas = vec![mut_pop.area(1).unwrap().clone()];
        let fitted = fit.fitted_sampled(&areas[0].sampled, 1).unwrap();
        for (unit, f) in areas[0].sampled.iter_mut().zip(&fitted) {
            unit.y = *f;
        }
        let pop = Population::new(areas).unwrap();
        let est = if_calibrated_gini(&fit, &pop, 1, &scalar_spec(2.0, 1.7)).unwrap();
        assert_eq!(est.value, est.plug_in);
    }

    #[test]
    fn gini_wrapper_matches_engine_and_full_reduces_with_one_area() {
        let (fit, pop) = toy_setup();
        let spec = scalar_spec(2.0, 1.3);
        let wrapped = if_calibrated_gini(&fit, &pop, 1, &spec).unwrap();
        let engine =
            linearized_calibrate(&GiniFunctional, &fit, &pop, 1, &spec).unwrap();
        assert_eq!(wrapped.value, engine.value);
        // One sampled area: pooling adds nothing but the divisor matches, so
        // partial and full coincide.
        let full = if_calibrated_gini_full(&fit, &pop, 1, &spec).unwrap();
        assert!((full.value - wrapped.value).abs() < 1e-12);
    }

    #[test]
    fn partial_scope_rejects_unsampled_areas_but_full_serves_them() {
        let (fit, pop) = toy_setup();
        let mut areas = vec![pop.area(1).unwrap().clone()];
        areas.push(Area {
            id: 2,
            sampled: vec![],
            unsampled: vec![
                CensusUnit { x: vec![1.0, 2.0], y: None },
                CensusUnit { x: vec![1.0, 3.0], y: None },
            ],
        });
        let pop2 = Population::new(areas).unwrap();
        let spec = scalar_spec(2.0, 1.0);
        assert!(matches!(
            if_calibrated_gini(&fit, &pop2, 2, &spec),
            Err(Error::NoSampledUnits(2))
        ));
        let full = if_calibrated_gini_full(&fit, &pop2, 2, &spec).unwrap();
        assert!(full.value.is_finite());
    }

    #[test]
    fn pseudo_value_at_members_reproduces_member_values() {
        for values in [
            vec![3.0, 1.0, 4.0, 1.5, 9.2, 2.6],
            vec![2.0, 2.0, 5.0, 2.0, 7.5], // ties
        ] {
            let members = GiniFunctional.linearization_values(&values).unwrap();
            for (i, &v) in values.iter().enumerate() {
                let at = GiniFunctional.linearization_at(v, &values).unwrap();
                assert!(
                    (at - members[i]).abs() < 1e-12,
                    "point {v}: {at} vs member {}",
                    members[i]
                );
            }
        }
    }

    #[test]
    fn shared_reference_zeta_is_a_sign_carrying_contraction() {
        let (fit, pop) = toy_setup();
        let area = pop.area(1).unwrap();
        let fitted = fit.fitted_sampled(&area.sampled, 1).unwrap();
        let zeta =
            gini_pseudo_residuals(&fit, &pop, 1, ZetaReference::SharedComposite).unwrap();
        let big_n = 6.0;
        for ((unit, f), z) in area.sampled.iter().zip(&fitted).zip(&zeta) {
            let resid = unit.y - f;
            assert_eq!(z.signum(), resid.signum(), "resid {resid} gave zeta {z}");
            assert!(z.abs() <= resid.abs() * (1.0 + 1.0 / big_n) + 1e-12);
        }

        // A perfect fit has vanishing pseudo-residuals (not merely a
        // short-circuited estimate); only summation-order crumbs remain.
        let mut areas = vec![area.clone()];
        for (unit, f) in areas[0].sampled.iter_mut().zip(&fitted) {
            unit.y = *f;
        }
        let perfect = Population::new(areas).unwrap();
        let zeros =
            gini_pseudo_residuals(&fit, &perfect, 1, ZetaReference::SharedComposite).unwrap();
        assert!(zeros.iter().all(|z| z.abs() < 1e-12), "{zeros:?}");
    }

    #[test]
    fn shared_reference_base_sums_reconstruct_plug_in() {
        // With an effectively infinite clip the winsorisation is the
        // identity, so under either shared reference the estimate collapses
        // to plug-in + (2 / (mu N)) * ((N - n)/n) * sum(zeta).
        let (fit, pop) = toy_setup();
        for reference in [ZetaReference::SharedFitted, ZetaReference::SharedComposite] {
            let mut spec = scalar_spec(1e12, 1.0);
            spec.reference = reference;
            let est = if_calibrated_gini(&fit, &pop, 1, &spec).unwrap();
            let v = composite_vectors(&fit, &pop, 1).unwrap();
            let (t_tilde, mu_tilde) = GiniFunctional.plug_in(&v.y_tilde).unwrap();
            let zeta = gini_pseudo_residuals(&fit, &pop, 1, reference).unwrap();
            let big_n = v.y_tilde.len() as f64;
            let corr = (big_n - v.n as f64) / v.n as f64 * zeta.iter().sum::<f64>();
            let expected = t_tilde + 2.0 / (mu_tilde * big_n) * corr;
            assert!(
                (est.value - expected).abs() < 1e-10,
                "{reference:?}: {} vs {expected}",
                est.value
            );
        }
    }

    #[test]
    fn fitted_reference_zeta_is_sign_carrying_and_residual_bounded() {
        // The fitted-composite pseudo-value map is strictly increasing with
        // slope at most (N + 1)/N, so each gap carries its residual's sign
        // and cannot exceed the residual by more than that factor.
        let (fit, pop) = toy_setup();
        let area = pop.area(1).unwrap();
        let fitted = fit.fitted_sampled(&area.sampled, 1).unwrap();
        let zeta = gini_pseudo_residuals(&fit, &pop, 1, ZetaReference::SharedFitted).unwrap();
        let big_n = 6.0;
        for ((unit, f), z) in area.sampled.iter().zip(&fitted).zip(&zeta) {
            let resid = unit.y - f;
            assert_eq!(z.signum(), resid.signum(), "resid {resid} gave zeta {z}");
            assert!(z.abs() <= resid.abs() * (1.0 + 1.0 / big_n) + 1e-12);
        }

        let mut areas = vec![area.clone()];
        for (unit, f) in areas[0].sampled.iter_mut().zip(&fitted) {
            unit.y = *f;
        }
        let perfect = Population::new(areas).unwrap();
        let zeros =
            gini_pseudo_residuals(&fit, &perfect, 1, ZetaReference::SharedFitted).unwrap();
        assert!(zeros.iter().all(|z| z.abs() < 1e-12), "{zeros:?}");
    }
}
