//! Fitted unit-level models and their prediction interface.
//!
//! Two model families are supported: the robustified nested-error regression
//! fit of [`reblup::fit_reblup`] and the M-quantile regression fit of
//! [`mq::fit_mq`]. Both expose the same downstream surface through
//! [`FittedModel`]: fitted values for sampled units, predictions for
//! unsampled units, and residuals by area.
//!
//! Predictions for an area absent from the fit (no sampled units) substitute
//! the median of the estimated area effects (or M-quantile area coefficients)
//! and mark the result, so callers can surface the weaker extrapolation.

pub mod mq;
pub mod reblup;

pub use mq::{fit_mq, MqOptions};
pub use reblup::{fit_reblup, ReblupOptions, EBLUP_C};

use std::collections::BTreeMap;

use crate::data::{AreaId, AreaResiduals, Population, Sample, SampledUnit};
use crate::error::{Error, Result};
use crate::scale::median;

/// Model family of a [`FittedModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FitKind {
    Reblup,
    Mq,
}

/// Convergence bookkeeping shared by both fitters.
#[derive(Debug, Clone, Copy, Default)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// The data admit an exact fit (all residuals numerically zero); variance
    /// components degenerate and are reported as zero.
    pub degenerate: bool,
    /// A variance iterate was clamped at the boundary of the parameter space.
    pub variance_clamped: bool,
}

/// Robustified nested-error model fit: `y_ij = x_ij' beta + u_j + e_ij`.
#[derive(Debug, Clone)]
pub struct ReblupFit {
    pub beta: Vec<f64>,
    /// Area-effect variance (sigma_u^2).
    pub sigma2_u: f64,
    /// Unit-error variance (sigma_e^2).
    pub sigma2_e: f64,
    /// Predicted area effects for the sampled areas.
    pub u: BTreeMap<AreaId, f64>,
    /// Huber tuning constant used during fitting.
    pub c: f64,
    pub diagnostics: FitDiagnostics,
}

/// M-quantile regression fit over a grid of asymmetry quantiles.
#[derive(Debug, Clone)]
pub struct MqFit {
    /// Ascending grid of quantiles, always containing 0.5.
    pub grid: Vec<f64>,
    /// `coef[k]` is the coefficient vector for `grid[k]`.
    pub coef: Vec<Vec<f64>>,
    /// Area-level quantile: mean of the unit-level quantile scores.
    pub theta: BTreeMap<AreaId, f64>,
    /// Huber tuning constant used during fitting.
    pub c: f64,
    pub diagnostics: FitDiagnostics,
}

impl MqFit {
    /// Coefficient vector at `q`, linearly interpolated between grid points
    /// and clamped to the grid range.
    pub fn beta_at(&self, q: f64) -> Vec<f64> {
        let grid = &self.grid;
        if q <= grid[0] {
            return self.coef[0].clone();
        }
        if q >= grid[grid.len() - 1] {
            return self.coef[grid.len() - 1].clone();
        }
        let hi = grid.partition_point(|g| *g < q);
        if grid[hi] == q {
            return self.coef[hi].clone();
        }
        let lo = hi - 1;
        let t = (q - grid[lo]) / (grid[hi] - grid[lo]);
        self.coef[lo]
            .iter()
            .zip(&self.coef[hi])
            .map(|(a, b)| a + t * (b - a))
            .collect()
    }
}

/// Predicted outcomes for the unsampled units of one area.
#[derive(Debug, Clone)]
pub struct Predictions {
    /// One prediction per unsampled unit, in frame order.
    pub values: Vec<f64>,
    /// True when the area was not in the sample and the median area effect
    /// was substituted.
    pub used_median_effect: bool,
}

/// A fitted model of either family.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Reblup(ReblupFit),
    Mq(MqFit),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl FittedModel {
    pub fn kind(&self) -> FitKind {
        match self {
            FittedModel::Reblup(_) => FitKind::Reblup,
            FittedModel::Mq(_) => FitKind::Mq,
        }
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        match self {
            FittedModel::Reblup(f) => &f.diagnostics,
            FittedModel::Mq(f) => &f.diagnostics,
        }
    }

    /// True when predictions for `area` fall back to the median area effect.
    pub fn uses_median_effect(&self, area: AreaId) -> bool {
        match self {
            FittedModel::Reblup(f) => !f.u.contains_key(&area),
            FittedModel::Mq(f) => !f.theta.contains_key(&area),
        }
    }

    fn reblup_effect(f: &ReblupFit, area: AreaId) -> Result<(f64, bool)> {
        if let Some(u) = f.u.get(&area) {
            return Ok((*u, false));
        }
        let effects: Vec<f64> = f.u.values().copied().collect();
        Ok((median(&effects)?, true))
    }

    fn mq_theta(f: &MqFit, area: AreaId) -> Result<(f64, bool)> {
        if let Some(t) = f.theta.get(&area) {
            return Ok((*t, false));
        }
        let thetas: Vec<f64> = f.theta.values().copied().collect();
        Ok((median(&thetas)?, true))
    }

    /// Fitted values for the given sampled units of `area`.
    pub fn fitted_sampled(&self, units: &[SampledUnit], area: AreaId) -> Result<Vec<f64>> {
        match self {
            FittedModel::Reblup(f) => {
                let (u, _) = Self::reblup_effect(f, area)?;
                Ok(units.iter().map(|unit| dot(&unit.x, &f.beta) + u).collect())
            }
            FittedModel::Mq(f) => {
                let (theta, _) = Self::mq_theta(f, area)?;
                let beta = f.beta_at(theta);
                Ok(units.iter().map(|unit| dot(&unit.x, &beta)).collect())
            }
        }
    }

    /// Predictions for the unsampled units of `area` within `pop`.
    pub fn predict_unsampled(&self, pop: &Population, area: AreaId) -> Result<Predictions> {
        let a = pop.area(area)?;
        match self {
            FittedModel::Reblup(f) => {
                let (u, used_median) = Self::reblup_effect(f, area)?;
                Ok(Predictions {
                    values: a.unsampled.iter().map(|unit| dot(&unit.x, &f.beta) + u).collect(),
                    used_median_effect: used_median,
                })
            }
            FittedModel::Mq(f) => {
                let (theta, used_median) = Self::mq_theta(f, area)?;
                let beta = f.beta_at(theta);
                Ok(Predictions {
                    values: a.unsampled.iter().map(|unit| dot(&unit.x, &beta)).collect(),
                    used_median_effect: used_median,
                })
            }
        }
    }

    /// Residuals `y - fitted` for every sampled area.
    pub fn residuals(&self, sample: &Sample) -> Result<AreaResiduals> {
        let mut out = AreaResiduals::new();
        for area in sample.areas() {
            let fitted = self.fitted_sampled(&area.units, area.id)?;
            let r = area.units.iter().zip(&fitted).map(|(u, f)| u.y - f).collect();
            out.insert(area.id, r);
        }
        Ok(out)
    }
}

/// Ensures every sampled area satisfies the minimum size for fitting.
pub(crate) fn check_min_area_size(sample: &Sample, min: usize) -> Result<()> {
    for area in sample.areas() {
        if area.n() < min {
            return Err(Error::Invalid(format!(
                "area {} has {} sampled units; fitting needs at least {}",
                area.id,
                area.n(),
                min
            )));
        }
    }
    Ok(())
}
