//! Area-level distribution function estimators.
//!
//! All estimators produce a [`WeightedCdf`]: a discrete distribution on a
//! merged ascending support with strictly positive weights summing to one.
//! Evaluation is right-continuous (atoms count at their own location).
//!
//! For an area `j` with sampled units `s_j` (size `n_j`), unsampled units
//! `r_j`, frame size `N_j`, predictions `yhat_k` and residuals `e_i`, the
//! families are, as mixtures of point masses:
//!
//! * `naive`: mass `1/N_j` on every observed `y_i` and every prediction;
//! * `cd`: mass `1/N_j` on each `y_i`, and mass `1/(n_j N_j)` on each
//!   `yhat_k + e_i`, so each prediction is smeared with the full empirical
//!   residual distribution;
//! * `wr`: like `cd` with winsorised residual adjustments
//!   `w huber(e_i/w, c)` in place of `e_i`, where `w` is a robust scale of
//!   the area residuals;
//! * `bc`: mass `1/(n_j (N_j - n_j + 1))` on each `y_i` and on each
//!   `yhat_k + e_i`; the observed part calibrates the bias of the
//!   prediction-based part;
//! * `sbc`: `bc` with symmetric winsorisation `w huber(e_i/w, c)`;
//! * `abc`: `bc` with asymmetric winsorisation `w asym_huber(e_i/w, c_j, gamma_j)`,
//!   which keeps a long right tail instead of shrinking both tails equally.
//!
//! [`cdf_abc_full`] extends `abc` by pooling residuals and their scale over
//! every sampled area: mass `1/D_j` on each observed `y_i` of area `j` and on
//! each `yhat_k + w psi(e_ih/w)` over all pooled residuals `e_ih`, with
//! `D_j = n_j + n (N_j - n_j)` and `n` the total sample size. Pooling borrows
//! strength and is the only family defined for areas without sampled units.

use std::collections::BTreeMap;

use crate::data::{AreaId, AreaResiduals, Population};
use crate::error::{invalid, Error, Result};
use crate::fit::FittedModel;
use crate::psi::{asym_huber_psi, huber_psi};
use crate::scale::{robust_scale, ScaleKind};

/// A discrete distribution with merged, strictly ascending support.
#[derive(Debug, Clone)]
pub struct WeightedCdf {
    points: Vec<f64>,
    weights: Vec<f64>,
    cum: Vec<f64>,
}

impl WeightedCdf {
    /// Builds from `(value, count)` atoms over a common integer denominator.
    /// Counts of equal values are merged by integer addition, so evaluations
    /// are exactly `total_count / denominator` with a single rounding.
    pub fn from_counts(mut atoms: Vec<(f64, u64)>, denom: u64) -> Result<WeightedCdf> {
        if atoms.is_empty() {
            return Err(Error::Empty("distribution with no atoms"));
        }
        if denom == 0 {
            return Err(invalid("distribution denominator must be positive"));
        }
        if atoms.iter().any(|(v, _)| !v.is_finite()) {
            return Err(invalid("non-finite support point"));
        }
        let total: u64 = atoms.iter().map(|(_, c)| c).sum();
        if total != denom {
            return Err(invalid(format!(
                "atom counts sum to {total} but the denominator is {denom}"
            )));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points = Vec::with_capacity(atoms.len());
        let mut counts: Vec<u64> = Vec::with_capacity(atoms.len());
        for (v, c) in atoms {
            if c == 0 {
                continue;
            }
            match points.last() {
                Some(last) if *last == v => *counts.last_mut().expect("nonempty") += c,
                _ => {
                    points.push(v);
                    counts.push(c);
                }
            }
        }
        let d = denom as f64;
        let mut running = 0u64;
        let mut weights = Vec::with_capacity(points.len());
        let mut cum = Vec::with_capacity(points.len());
        for c in counts {
            running += c;
            weights.push(c as f64 / d);
            cum.push(running as f64 / d);
        }
        Ok(WeightedCdf { points, weights, cum })
    }

    /// Equal-mass distribution of a value vector.
    pub fn from_values(values: &[f64]) -> Result<WeightedCdf> {
        WeightedCdf::from_counts(values.iter().map(|v| (*v, 1u64)).collect(), values.len() as u64)
    }

    /// Builds from real-weighted atoms; weights must be positive and sum to
    /// one within `1e-9`. Intended for mixtures, for example contaminated
    /// distributions in derivative checks.
    pub fn from_weighted_points(atoms: &[(f64, f64)]) -> Result<WeightedCdf> {
        if atoms.is_empty() {
            return Err(Error::Empty("distribution with no atoms"));
        }
        if atoms.iter().any(|(v, w)| !v.is_finite() || !w.is_finite() || *w <= 0.0) {
            return Err(invalid("atoms need finite support points and positive weights"));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("atom weights sum to {total}, expected 1")));
        }
        let mut sorted = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut weights: Vec<f64> = Vec::with_capacity(sorted.len());
        for (v, w) in sorted {
            match points.last() {
                Some(last) if *last == v => *weights.last_mut().expect("nonempty") += w,
                _ => {
                    points.push(v);
                    weights.push(w);
                }
            }
        }
        let mut running = 0.0;
        let cum = weights
            .iter()
            .map(|w| {
                running += w;
                running
            })
            .collect();
        Ok(WeightedCdf { points, weights, cum })
    }

    /// Ascending support.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Atom masses aligned with [`points`](Self::points).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cumulative masses aligned with [`points`](Self::points).
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `F(t) = P(Y <= t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|p| *p <= t);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| p * w).sum()
    }
}

/// Positive constants keyed by area, or one constant for every area.
#[derive(Debug, Clone)]
pub enum ConstantMap {
    Scalar(f64),
    PerArea(BTreeMap<AreaId, f64>),
}

impl ConstantMap {
    pub fn get(&self, area: AreaId) -> Result<f64> {
        let v = match self {
            ConstantMap::Scalar(v) => *v,
            ConstantMap::PerArea(map) => *map
                .get(&area)
                .ok_or_else(|| invalid(format!("no tuning constant supplied for area {area}")))?,
        };
        if v > 0.0 {
            Ok(v)
        } else {
            Err(invalid(format!("tuning constant for area {area} must be positive, got {v}")))
        }
    }

    /// The single scalar, required by pooled (full-scope) estimators.
    pub fn scalar(&self) -> Result<f64> {
        match self {
            ConstantMap::Scalar(v) if *v > 0.0 => Ok(*v),
            ConstantMap::Scalar(v) => {
                Err(invalid(format!("tuning constant must be positive, got {v}")))
            }
            ConstantMap::PerArea(_) => {
                Err(invalid("pooled estimation requires a single scalar tuning constant"))
            }
        }
    }
}

/// CDF estimator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdfMethod {
    Naive,
    Cd,
    Wr,
    Bc,
    Sbc,
    Abc,
}

/// Whether calibration residuals come from the target area alone or are
/// pooled over every sampled area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Partial,
    Full,
}

impl std::str::FromStr for Scope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partial" => Ok(Scope::Partial),
            "full" => Ok(Scope::Full),
            other => Err(invalid(format!("unknown scope `{other}` (expected `partial` or `full`)"))),
        }
    }
}

/// Everything needed to pick and parameterise a CDF estimator.
#[derive(Debug, Clone)]
pub struct CalibrationSpec {
    pub method: CdfMethod,
    pub c: ConstantMap,
    pub gamma: ConstantMap,
    pub scale: ScaleKind,
    pub scope: Scope,
}

fn area_residuals<'a>(residuals: &'a AreaResiduals, area: AreaId) -> Result<&'a [f64]> {
    residuals
        .get(&area)
        .map(Vec::as_slice)
        .ok_or_else(|| invalid(format!("no residuals supplied for area {area}")))
}

fn require_sampled(n: usize, area: AreaId) -> Result<()> {
    if n == 0 {
        Err(Error::NoSampledUnits(area))
    } else {
        Ok(())
    }
}

/// All estimators in this module target the distribution of a nonnegative
/// outcome. Synthetic support points (predictions, with or without residual
/// adjustments) are floored at zero: with heavy-tailed residuals a downward
/// adjustment can exceed the prediction, and the resulting mass belongs at
/// the support boundary, not below it. Observed outcomes pass through
/// unchanged so that invalid input data still surfaces as an error
/// downstream instead of being silently altered.
fn floor_at_zero(v: f64) -> f64 {
    v.max(0.0)
}

/// Plug-in estimator: observed outcomes next to model predictions, all with
/// frame weight `1/N_j`. The only family that needs no residuals, so it also
/// serves areas without sampled units (through the median-effect prediction).
pub fn cdf_naive(fit: &FittedModel, pop: &Population, area: AreaId) -> Result<WeightedCdf> {
    let a = pop.area(area)?;
    let preds = fit.predict_unsampled(pop, area)?;
    let mut atoms: Vec<(f64, u64)> = Vec::with_capacity(a.big_n());
    atoms.extend(a.sampled.iter().map(|u| (u.y, 1u64)));
    atoms.extend(preds.values.iter().map(|v| (floor_at_zero(*v), 1u64)));
    WeightedCdf::from_counts(atoms, a.big_n() as u64)
}

/// Smears every prediction with the empirical residual distribution of the
/// area, on the denominator `n_j N_j`.
pub fn cdf_cd(
    fit: &FittedModel,
    residuals: &AreaResiduals,
    pop: &Population,
    area: AreaId,
) -> Result<WeightedCdf> {
    grid_family(fit, residuals, pop, area, GridWeights::FrameShare, |e| e)
}

/// Like [`cdf_cd`] with winsorised residual adjustments.
pub fn cdf_wr(
    fit: &FittedModel,
    residuals: &AreaResiduals,
    pop: &Population,
    area: AreaId,
    c: f64,
    scale: ScaleKind,
) -> Result<WeightedCdf> {
    if !(c > 0.0) {
        return Err(invalid(format!("tuning constant c must be positive, got {c}")));
    }
    let resid = area_residuals(residuals, area)?;
    let w = adjustment_scale(resid, scale)?;
    grid_family(fit, residuals, pop, area, GridWeights::FrameShare, move |e| match w {
        Some(w) => w * huber_psi(e / w, c),
        None => 0.0,
    })
}

/// Bias-calibrated estimator with raw residual adjustments.
pub fn cdf_bc(
    fit: &FittedModel,
    residuals: &AreaResiduals,
    pop: &Population,
    area: AreaId,
) -> Result<WeightedCdf> {
    grid_family(fit, residuals, pop, area, GridWeights::Calibrated, |e| e)
}

/// Bias-calibrated estimator with symmetric winsorisation.
pub fn cdf_sbc(
    fit: &FittedModel,
    residuals: &AreaResiduals,
    pop: &Population,
    area: AreaId,
    c: f64,
    scale: ScaleKind,
) -> Result<WeightedCdf> {
    cdf_abc(fit, residuals, pop, area, c, 1.0, scale)
}

/// Bias-calibrated estimator with asymmetric winsorisation.
pub fn cdf_abc(
    fit: &FittedModel,
    residuals: &AreaResiduals,
    pop: &Population,
    area: AreaId,
    c: f64,
    gamma: f64,
    scale: ScaleKind,
) -> Result<WeightedCdf> {
    if !(c > 0.0) {
        return Err(invalid(format!("tuning constant c must be positive, got {c}")));
    }
    if !(gamma > 0.0) {
        return Err(invalid(format!("skewness parameter gamma must be positive, got {gamma}")));
    }
    let resid = area_residuals(residuals, area)?;
    let w = adjustment_scale(resid, scale)?;
    grid_family(fit, residuals, pop, area, GridWeights::Calibrated, move |e| match w {
        Some(w) => w * asym_huber_psi(e / w, c, gamma),
        None => 0.0,
    })
}

/// Robust scale for winsorisation; `None` when every residual is exactly
/// zero, in which case adjustments vanish identically.
fn adjustment_scale(resid: &[f64], scale: ScaleKind) -> Result<Option<f64>> {
    if resid.iter().all(|r| *r == 0.0) {
        Ok(None)
    } else {
        robust_scale(resid, scale).map(Some)
    }
}

enum GridWeights {
    /// Observed atoms carry count `n_j`, grid atoms count 1, denominator `n_j N_j`.
    FrameShare,
    /// Every atom carries count 1, denominator `n_j (N_j - n_j + 1)`.
    Calibrated,
}

fn grid_family(
    fit: &FittedModel,
    residuals: &AreaResiduals,
    pop: &Population,
    area: AreaId,
    weights: GridWeights,
    adjust: impl Fn(f64) -> f64,
) -> Result<WeightedCdf> {
    let a = pop.area(area)?;
    require_sampled(a.n(), area)?;
    let resid = area_residuals(residuals, area)?;
    if resid.len() != a.n() {
        return Err(invalid(format!(
            "area {area}: {} residuals for {} sampled units",
            resid.len(),
            a.n()
        )));
    }
    let preds = fit.predict_unsampled(pop, area)?;
    let n = a.n() as u64;
    let big_n = a.big_n() as u64;
    let adjustments: Vec<f64> = resid.iter().map(|e| adjust(*e)).collect();
    let (obs_count, denom) = match weights {
        GridWeights::FrameShare => (n, n * big_n),
        GridWeights::Calibrated => (1, n * (big_n - n + 1)),
    };
    let mut atoms: Vec<(f64, u64)> =
        Vec::with_capacity(a.n() + preds.values.len() * adjustments.len());
    atoms.extend(a.sampled.iter().map(|u| (u.y, obs_count)));
    for yhat in &preds.values {
        for adj in &adjustments {
            atoms.push((floor_at_zero(yhat + adj), 1));
        }
    }
    WeightedCdf::from_counts(atoms, denom)
}

/// Asymmetric bias calibration with residuals pooled across all sampled
/// areas. Works for any target area, sampled or not; the scale and the
/// asymmetric winsorisation use the pooled residual vector.
pub fn cdf_abc_full(
    fit: &FittedModel,
    residuals: &AreaResiduals,
    pop: &Population,
    area: AreaId,
    c: f64,
    gamma: f64,
    scale: ScaleKind,
) -> Result<WeightedCdf> {
    if !(c > 0.0) {
        return Err(invalid(format!("tuning constant c must be positive, got {c}")));
    }
    if !(gamma > 0.0) {
        return Err(invalid(format!("skewness parameter gamma must be positive, got {gamma}")));
    }
    let a = pop.area(area)?;
    let pooled = crate::data::pooled_residuals(residuals);
    if pooled.is_empty() {
        return Err(Error::Empty("pooled residuals"));
    }
    let w = adjustment_scale(&pooled, scale)?;
    let adjustments: Vec<f64> = pooled
        .iter()
        .map(|e| match w {
            Some(w) => w * asym_huber_psi(e / w, c, gamma),
            None => 0.0,
        })
        .collect();
    let preds = fit.predict_unsampled(pop, area)?;
    let n = pooled.len() as u64;
    let nj = a.n() as u64;
    let denom = nj + n * (a.big_n() as u64 - nj);
    let mut atoms: Vec<(f64, u64)> =
        Vec::with_capacity(a.n() + preds.values.len() * adjustments.len());
    atoms.extend(a.sampled.iter().map(|u| (u.y, 1u64)));
    for yhat in &preds.values {
        for adj in &adjustments {
            atoms.push((floor_at_zero(yhat + adj), 1));
        }
    }
    WeightedCdf::from_counts(atoms, denom)
}

/// Dispatches on a [`CalibrationSpec`].
pub fn estimate_cdf(
    fit: &FittedModel,
    residuals: &AreaResiduals,
    pop: &Population,
    area: AreaId,
    spec: &CalibrationSpec,
) -> Result<WeightedCdf> {
    match spec.scope {
        Scope::Partial => match spec.method {
            CdfMethod::Naive => cdf_naive(fit, pop, area),
            CdfMethod::Cd => cdf_cd(fit, residuals, pop, area),
            CdfMethod::Wr => cdf_wr(fit, residuals, pop, area, spec.c.get(area)?, spec.scale),
            CdfMethod::Bc => cdf_bc(fit, residuals, pop, area),
            CdfMethod::Sbc => cdf_sbc(fit, residuals, pop, area, spec.c.get(area)?, spec.scale),
            CdfMethod::Abc => cdf_abc(
                fit,
                residuals,
                pop,
                area,
                spec.c.get(area)?,
                spec.gamma.get(area)?,
                spec.scale,
            ),
        },
        Scope::Full => match spec.method {
            CdfMethod::Sbc => {
                cdf_abc_full(fit, residuals, pop, area, spec.c.scalar()?, 1.0, spec.scale)
            }
            CdfMethod::Abc => cdf_abc_full(
                fit,
                residuals,
                pop,
                area,
                spec.c.scalar()?,
                spec.gamma.scalar()?,
                spec.scale,
            ),
            other => Err(invalid(format!(
                "full scope is defined for the sbc and abc families, not {other:?}"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Area, CensusUnit, SampledUnit};
    use crate::fit::{FitDiagnostics, ReblupFit};
    use proptest::prelude::*;

    fn toy_model_and_pop() -> (FittedModel, AreaResiduals, Population) {
        // One area, beta = (0, 1), u = 0, so predictions equal x1.
        let pop = Population::new(vec![Area {
            id: 1,
            sampled: vec![
                SampledUnit { x: vec![1.0, 1.0], y: 1.5 },
                SampledUnit { x: vec![1.0, 2.0], y: 1.0 },
            ],
            unsampled: vec![
                CensusUnit { x: vec![1.0, 3.0], y: None },
                CensusUnit { x: vec![1.0, 5.0], y: None },
            ],
        }])
        .unwrap();
        let mut u = BTreeMap::new();
        u.insert(1u32, 0.0);
        let fit = FittedModel::Reblup(ReblupFit {
            beta: vec![0.0, 1.0],
            sigma2_u: 0.5,
            sigma2_e: 1.0,
            u,
            c: 1.345,
            diagnostics: FitDiagnostics { converged: true, ..Default::default() },
        });
        let mut resid = AreaResiduals::new();
        resid.insert(1, vec![0.5, -1.0]);
        (fit, resid, pop)
    }

    #[test]
    fn eval_is_right_continuous_and_merges_ties() {
        let cdf =
            WeightedCdf::from_counts(vec![(1.0, 1), (1.0, 2), (2.0, 1)], 4).unwrap();
        assert_eq!(cdf.len(), 2);
        assert_eq!(cdf.eval(0.99), 0.0);
        assert_eq!(cdf.eval(1.0), 0.75);
        assert_eq!(cdf.eval(1.5), 0.75);
        assert_eq!(cdf.eval(2.0), 1.0);
        assert_eq!(cdf.eval(9.0), 1.0);
        assert_eq!(cdf.mean(), 1.25);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        assert!(WeightedCdf::from_counts(vec![(1.0, 1)], 2).is_err());
        assert!(WeightedCdf::from_counts(vec![], 0).is_err());
    }

    #[test]
    fn naive_uses_frame_weights() {
        let (fit, _, pop) = toy_model_and_pop();
        let cdf = cdf_naive(&fit, &pop, 1).unwrap();
        // Support: observed {1.5, 1.0}, predictions {3, 5}.
        assert_eq!(cdf.points(), &[1.0, 1.5, 3.0, 5.0]);
        assert!(cdf.weights().iter().all(|w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn cd_smears_predictions_with_residuals() {
        let (fit, resid, pop) = toy_model_and_pop();
        let cdf = cdf_cd(&fit, &resid, &pop, 1).unwrap();
        // Grid: {3, 5} + {0.5, -1} = {3.5, 2, 5.5, 4}; observed {1.5, 1}.
        // Denominator 2 * 4 = 8; observed atoms carry 2/8.
        assert_eq!(cdf.points(), &[1.0, 1.5, 2.0, 3.5, 4.0, 5.5]);
        assert_eq!(cdf.eval(1.5), 0.5);
        assert_eq!(cdf.eval(10.0), 1.0);
    }

    #[test]
    fn bc_weights_every_atom_equally() {
        let (fit, resid, pop) = toy_model_and_pop();
        let cdf = cdf_bc(&fit, &resid, &pop, 1).unwrap();
        // Denominator n (N - n + 1) = 2 * 3 = 6, six atoms of 1/6.
        assert_eq!(cdf.len(), 6);
        assert!(cdf.weights().iter().all(|w| (w - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn sbc_equals_abc_at_gamma_one_and_bc_at_huge_c() {
        let (fit, resid, pop) = toy_model_and_pop();
        let sbc = cdf_sbc(&fit, &resid, &pop, 1, 2.0, ScaleKind::Mad).unwrap();
        let abc = cdf_abc(&fit, &resid, &pop, 1, 2.0, 1.0, ScaleKind::Mad).unwrap();
        assert_eq!(sbc.points(), abc.points());
        assert_eq!(sbc.weights(), abc.weights());

        let sbc_wide = cdf_sbc(&fit, &resid, &pop, 1, 1e6, ScaleKind::Mad).unwrap();
        let bc = cdf_bc(&fit, &resid, &pop, 1).unwrap();
        for (a, b) in sbc_wide.points().iter().zip(bc.points()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn full_pooling_reduces_to_partial_with_one_area() {
        let (fit, resid, pop) = toy_model_and_pop();
        let full = cdf_abc_full(&fit, &resid, &pop, 1, 2.0, 1.5, ScaleKind::Mad).unwrap();
        let partial = cdf_abc(&fit, &resid, &pop, 1, 2.0, 1.5, ScaleKind::Mad).unwrap();
        assert_eq!(full.points(), partial.points());
        assert_eq!(full.weights(), partial.weights());
    }

    #[test]
    fn calibrated_families_need_sampled_units_but_naive_does_not() {
        let (fit, resid, pop) = toy_model_and_pop();
        let pop2 = Population::new(vec![
            pop.area(1).unwrap().clone(),
            Area {
                id: 2,
                sampled: vec![],
                unsampled: vec![CensusUnit { x: vec![1.0, 4.0], y: None }],
            },
        ])
        .unwrap();
        assert!(matches!(
            cdf_cd(&fit, &resid, &pop2, 2),
            Err(Error::NoSampledUnits(2))
        ));
        assert!(cdf_naive(&fit, &pop2, 2).is_ok());
        // Full-scope abc pools residuals from area 1 and serves area 2.
        let full = cdf_abc_full(&fit, &resid, &pop2, 2, 3.0, 1.0, ScaleKind::Mad).unwrap();
        assert_eq!(full.len(), 2);
    }

    #[test]
    fn downward_adjustments_are_floored_at_zero() {
        let (fit, _, pop) = toy_model_and_pop();
        let mut resid = AreaResiduals::new();
        // Raw adjustment -10 would push both grid atoms (3, 5) negative.
        resid.insert(1, vec![-10.0, 0.5]);
        let cdf = cdf_bc(&fit, &resid, &pop, 1).unwrap();
        assert!(cdf.points().iter().all(|p| *p >= 0.0));
        assert_eq!(cdf.points()[0], 0.0);
        // The floored mass stays in the distribution: 2 of 6 atoms at zero.
        assert!((cdf.weights()[0] - 2.0 / 6.0).abs() < 1e-15);

        let full = cdf_abc_full(&fit, &resid, &pop, 1, 1e6, 1.0, ScaleKind::Mad).unwrap();
        assert!(full.points().iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn zero_residuals_turn_calibration_off() {
        let (fit, _, pop) = toy_model_and_pop();
        let mut resid = AreaResiduals::new();
        resid.insert(1, vec![0.0, 0.0]);
        let wr = cdf_wr(&fit, &resid, &pop, 1, 2.0, ScaleKind::Mad).unwrap();
        let cd = cdf_cd(&fit, &resid, &pop, 1).unwrap();
        assert_eq!(wr.points(), cd.points());
    }

    proptest! {
        #[test]
        fn weights_are_positive_and_sum_to_one(
            values in proptest::collection::vec(-50.0f64..50.0, 1..40),
        ) {
            let cdf = WeightedCdf::from_values(&values).unwrap();
            prop_assert!(cdf.weights().iter().all(|w| *w > 0.0));
            let total: f64 = cdf.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for pair in cdf.points().windows(2) {
                prop_assert!(pair[0] < pair[1]);
            }
            let last = *cdf.cumulative().last().unwrap();
            prop_assert!((last - 1.0).abs() < 1e-12);
        }
    }
}
