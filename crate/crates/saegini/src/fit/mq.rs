//! M-quantile regression fitting.
//!
//! For each quantile `q` on a grid, an IRLS loop solves the M-quantile
//! estimating equation `sum_i mq_psi((y_i - x_i' beta_q)/s, c, q) x_i = 0`,
//! where `s` is the uncentered median absolute residual rescaled by 1.4826
//! and recomputed at every iteration. Each unit is then assigned the
//! quantile score `q_ij` at which its outcome sits exactly on the fitted
//! plane, found by scanning the grid for a sign change of
//! `y_ij - x_ij' beta_q` and interpolating linearly. The area-level quantile
//! `theta_j` is the mean score of the area's units, and predictions use the
//! coefficient vector interpolated at `theta_j`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::psi::mq_psi;
use crate::scale::{median_in_place, MAD_CONSISTENCY};

use super::{check_min_area_size, FitDiagnostics, FittedModel, MqFit};

/// Options for [`fit_mq`].
#[derive(Debug, Clone)]
pub struct MqOptions {
    /// Huber tuning constant inside the asymmetric psi.
    pub c: f64,
    /// Quantile grid; `None` selects {0.01, 0.02, ..., 0.99}.
    pub grid: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MqOptions {
    fn default() -> Self {
        MqOptions { c: 1.345, grid: None, tol: 1e-6, max_iter: 200 }
    }
}

fn default_grid() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("M-quantile grid"));
    }
    for pair in grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Invalid("M-quantile grid must be strictly increasing".into()));
        }
    }
    if grid.iter().any(|q| *q <= 0.0 || *q >= 1.0) {
        return Err(Error::Invalid("M-quantile grid values must lie in (0, 1)".into()));
    }
    if !grid.contains(&0.5) {
        return Err(Error::Invalid("M-quantile grid must contain 0.5".into()));
    }
    Ok(())
}

struct Flat {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    p: usize,
}

/// IRLS for one quantile. Returns the coefficients, whether the loop
/// converged, and whether the residual scale collapsed to zero.
fn irls_one_q(
    flat: &Flat,
    q: f64,
    c: f64,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, bool, bool)> {
    let p = flat.p;
    let y_mag = flat.y.iter().map(|y| y.abs()).fold(0.0f64, f64::max);
    let mut beta = start.to_vec();
    for _ in 0..max_iter {
        let mut abs_resid: Vec<f64> = flat
            .x
            .iter()
            .zip(&flat.y)
            .map(|(row, y)| (y - row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).abs())
            .collect();
        let s = MAD_CONSISTENCY * median_in_place(&mut abs_resid);
        if s <= 1e-12 * (1.0 + y_mag) {
            // Majority of units sit exactly on the plane; nothing to reweight.
            return Ok((beta, true, true));
        }
        let mut lhs = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        for (row, &y) in flat.x.iter().zip(&flat.y) {
            let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let r = (y - fit) / s;
            let w = if r.abs() < 1e-12 { 1.0 } else { mq_psi(r, c, q) / r };
            for a in 0..p {
                rhs[a] += w * row[a] * y;
                for b in 0..p {
                    lhs[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        let next = lhs.cholesky().ok_or(Error::RankDeficient)?.solve(&rhs);
        let delta = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let scale = 1.0 + beta.iter().map(|b| b.abs()).fold(0.0f64, f64::max);
        beta = next.iter().copied().collect();
        if delta <= tol * scale {
            return Ok((beta, true, false));
        }
    }
    Ok((beta, false, false))
}

/// Quantile score of one unit: where its outcome crosses the fitted planes.
fn unit_score(grid: &[f64], planes: &[f64], y: f64) -> f64 {
    let lo = planes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = planes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-12 * (1.0 + y.abs() + hi.abs()) {
        // All planes coincide (for instance after an exact fit); the unit
        // carries no asymmetry information.
        return 0.5;
    }
    if let Some(k) = planes.iter().position(|f| *f == y) {
        return grid[k];
    }
    for k in 0..planes.len() - 1 {
        let d0 = planes[k] - y;
        let d1 = planes[k + 1] - y;
        if d0 * d1 < 0.0 {
            return grid[k] + (grid[k + 1] - grid[k]) * d0 / (d0 - d1);
        }
    }
    if planes[0] > y {
        grid[0]
    } else {
        grid[grid.len() - 1]
    }
}

/// Fits M-quantile regressions over the grid and assigns area quantiles.
pub fn fit_mq(sample: &Sample, opts: &MqOptions) -> Result<FittedModel> {
    if !(opts.c > 0.0) {
        return Err(Error::Invalid(format!("tuning constant c must be positive, got {}", opts.c)));
    }
    let grid = opts.grid.clone().unwrap_or_else(default_grid);
    validate_grid(&grid)?;
    check_min_area_size(sample, 1)?;

    let p = sample.p();
    let mut flat = Flat { x: Vec::new(), y: Vec::new(), p };
    for area in sample.areas() {
        for unit in &area.units {
            flat.x.push(unit.x.clone());
            flat.y.push(unit.y);
        }
    }
    if flat.y.len() <= p {
        return Err(Error::Invalid(format!(
            "{} observations cannot identify {} coefficients",
            flat.y.len(),
            p
        )));
    }

    // OLS start, then warm starts along the grid.
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for (row, &y) in flat.x.iter().zip(&flat.y) {
        for a in 0..p {
            xty[a] += row[a] * y;
            for b in 0..p {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    let ols: Vec<f64> = xtx
        .cholesky()
        .ok_or(Error::RankDeficient)?
        .solve(&xty)
        .iter()
        .copied()
        .collect();

    let mut coef = Vec::with_capacity(grid.len());
    let mut all_converged = true;
    let mut all_degenerate = true;
    let mut start = ols;
    for &q in &grid {
        let (beta, converged, degenerate) =
            irls_one_q(&flat, q, opts.c, &start, opts.tol, opts.max_iter)?;
        all_converged &= converged;
        all_degenerate &= degenerate;
        start = beta.clone();
        coef.push(beta);
    }

    let mut theta = BTreeMap::new();
    for area in sample.areas() {
        let mut sum = 0.0;
        for unit in &area.units {
            let planes: Vec<f64> = coef
                .iter()
                .map(|b| unit.x.iter().zip(b).map(|(a, v)| a * v).sum())
                .collect();
            sum += unit_score(&grid, &planes, unit.y);
        }
        theta.insert(area.id, sum / area.n() as f64);
    }

    Ok(FittedModel::Mq(MqFit {
        grid,
        coef,
        theta,
        c: opts.c,
        diagnostics: FitDiagnostics {
            iterations: 0,
            converged: all_converged,
            degenerate: all_degenerate,
            variance_clamped: false,
        },
    }))
}
