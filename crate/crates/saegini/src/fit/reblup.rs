//! Robustified fitting of the nested-error regression model.
//!
//! The model is `y_ij = x_ij' beta + u_j + e_ij` with independent area
//! effects `u_j ~ (0, sigma_u^2)` and unit errors `e_ij ~ (0, sigma_e^2)`.
//! Estimation robustifies the maximum-likelihood estimating equations by
//! passing standardised residuals through a Huber psi function and rescuing
//! Fisher consistency with the normal-model correction `E[psi_c(Z)^2]`:
//!
//! * fixed effects solve `sum_j X_j' V_j^-1 U_j^{1/2} psi_c(r_j) = 0` with
//!   `r_j = U_j^{-1/2}(y_j - X_j beta)` and `U_j = diag(V_j)`,
//! * variance components solve, for `l in {u, e}` and `phi_j = U_j^{1/2} psi_c(r_j)`,
//!   `phi_j' V_j^-1 (dV_j/dtheta_l) V_j^-1 phi_j = E[psi_c(Z)^2] tr(V_j^-1 dV_j/dtheta_l)`,
//! * area effects solve the robustified mixed-model equation
//!   `(1/s_e) sum_i psi_c((y_ij - x_ij' beta - u_j)/s_e) = (1/s_u) psi_c(u_j/s_u)`.
//!
//! With a very large tuning constant psi is the identity, the correction is
//! one, and the three blocks collapse to ML scores and the usual BLUP, so the
//! classical EBLUP is the `c -> infinity` special case (use [`EBLUP_C`]).
//!
//! The exchangeable structure keeps everything closed-form per area:
//! `V_j^-1 = (I - alpha_j J)/sigma_e^2` with
//! `alpha_j = sigma_u^2 / (sigma_e^2 + n_j sigma_u^2)`, so no matrix larger
//! than p x p is ever factored. The solver alternates an inner IRLS for beta
//! with a damped Newton step (numerical Jacobian) on the two variance
//! equations, clamping negative iterates at the boundary. Area effects are
//! found afterwards by bisection; the equation is monotone in `u_j`, so the
//! root is unique.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::psi::huber_psi;

use super::{check_min_area_size, FitDiagnostics, FittedModel, ReblupFit};

/// Tuning constant that makes the robust fit numerically indistinguishable
/// from maximum likelihood and the classical EBLUP.
pub const EBLUP_C: f64 = 1.0e6;

/// Options for [`fit_reblup`].
#[derive(Debug, Clone)]
pub struct ReblupOptions {
    /// Huber tuning constant for all three estimating-equation blocks.
    pub c: f64,
    /// Relative tolerance on parameter updates.
    pub tol: f64,
    /// Maximum outer iterations.
    pub max_iter: usize,
    /// Fixes `(sigma_u^2, sigma_e^2)` and skips the variance search; only
    /// beta and the area effects are estimated. Used by bootstrap refits
    /// that recycle the variance components of an initial fit.
    pub fixed_variance: Option<(f64, f64)>,
}

impl Default for ReblupOptions {
    fn default() -> Self {
        ReblupOptions { c: 1.345, tol: 1e-6, max_iter: 200, fixed_variance: None }
    }
}

impl ReblupOptions {
    pub fn with_c(c: f64) -> Self {
        ReblupOptions { c, ..Default::default() }
    }
}

/// Normal-model consistency correction `E[psi_c(Z)^2]` for standard normal Z.
pub fn psi_square_expectation(c: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let cdf = n.cdf(c);
    (2.0 * cdf - 1.0) - 2.0 * c * n.pdf(c) + 2.0 * c * c * (1.0 - cdf)
}

struct Design {
    /// Row-major unit covariates, grouped by area in sample order.
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    /// Half-open row ranges per area, aligned with `ids`.
    slices: Vec<(usize, usize)>,
    ids: Vec<u32>,
    p: usize,
}

impl Design {
    fn from_sample(sample: &Sample) -> Design {
        let p = sample.p();
        let mut x = Vec::with_capacity(sample.total_n());
        let mut y = Vec::with_capacity(sample.total_n());
        let mut slices = Vec::with_capacity(sample.areas().len());
        let mut ids = Vec::with_capacity(sample.areas().len());
        for area in sample.areas() {
            let start = x.len();
            for unit in &area.units {
                x.push(unit.x.clone());
                y.push(unit.y);
            }
            slices.push((start, x.len()));
            ids.push(area.id);
        }
        Design { x, y, slices, ids, p }
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn fitted_fixed(&self, beta: &[f64]) -> Vec<f64> {
        self.x.iter().map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum()).collect()
    }
}

fn solve_ols(design: &Design) -> Result<Vec<f64>> {
    let p = design.p;
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for (row, &y) in design.x.iter().zip(&design.y) {
        for a in 0..p {
            xty[a] += row[a] * y;
            for b in 0..p {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    xtx.cholesky()
        .ok_or(Error::RankDeficient)
        .map(|ch| ch.solve(&xty).iter().copied().collect())
}

/// One IRLS pass to convergence for beta at fixed variance components.
fn irls_beta(
    design: &Design,
    s2u: f64,
    s2e: f64,
    c: f64,
    start: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, usize)> {
    let p = design.p;
    let a = (s2u + s2e).sqrt();
    let mut beta = start.to_vec();
    for iter in 0..100 {
        let fitted = design.fitted_fixed(&beta);
        // w_i = psi(r_i)/r_i turns the psi equation into weighted least
        // squares against V^-1; the system is not symmetric because V^-1 and
        // the weights do not commute.
        let mut lhs = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        for &(start_i, end_i) in &design.slices {
            let nj = (end_i - start_i) as f64;
            let alpha = s2u / (s2e + nj * s2u);
            let mut sum_x = vec![0.0; p];
            let mut sum_wx = vec![0.0; p];
            let mut sum_wy = 0.0;
            for i in start_i..end_i {
                let r = (design.y[i] - fitted[i]) / a;
                let w = if r.abs() < 1e-12 { 1.0 } else { huber_psi(r, c) / r };
                let row = &design.x[i];
                for b in 0..p {
                    sum_x[b] += row[b];
                    sum_wx[b] += w * row[b];
                    rhs[b] += w * row[b] * design.y[i];
                    for d in 0..p {
                        lhs[(b, d)] += w * row[b] * row[d];
                    }
                }
                sum_wy += w * design.y[i];
            }
            for b in 0..p {
                rhs[b] -= alpha * sum_x[b] * sum_wy;
                for d in 0..p {
                    lhs[(b, d)] -= alpha * sum_x[b] * sum_wx[d];
                }
            }
        }
        let next = lhs.lu().solve(&rhs).ok_or(Error::RankDeficient)?;
        let delta = next
            .iter()
            .zip(&beta)
            .map(|(n, o)| (n - o).abs())
            .fold(0.0f64, f64::max);
        let scale = 1.0 + beta.iter().map(|b| b.abs()).fold(0.0f64, f64::max);
        beta = next.iter().copied().collect();
        if delta <= tol * scale {
            return Ok((beta, iter + 1));
        }
    }
    Ok((beta, 100))
}

/// Robustified variance scores `(g_u, g_e)` for fixed-effect residuals.
fn variance_score(resid: &[f64], slices: &[(usize, usize)], s2u: f64, s2e: f64, c: f64, ck: f64) -> (f64, f64) {
    let a = (s2u + s2e).sqrt();
    let mut gu = 0.0;
    let mut ge = 0.0;
    let mut phis: Vec<f64> = Vec::new();
    for &(start_i, end_i) in slices {
        let nj = (end_i - start_i) as f64;
        let alpha = s2u / (s2e + nj * s2u);
        let mut sum_phi = 0.0;
        phis.clear();
        for r in &resid[start_i..end_i] {
            let phi = a * huber_psi(r / a, c);
            sum_phi += phi;
            phis.push(phi);
        }
        let sv = sum_phi / (s2e + nj * s2u);
        gu += sv * sv - ck * nj / (s2e + nj * s2u);
        let mut sq = 0.0;
        for phi in &phis {
            let v = (phi - alpha * sum_phi) / s2e;
            sq += v * v;
        }
        ge += sq - ck * nj * (1.0 - alpha) / s2e;
    }
    (gu, ge)
}

/// Root of `g_e(. ; s2u) = 0` in the unit variance, by bracketed bisection.
///
/// The score tends to +infinity as `s2e -> 0` (the standardised within-area
/// variation blows up) and approaches zero from below as `s2e -> infinity`,
/// so a sign-changing bracket always exists; bisection cannot run away the
/// way a Newton step chasing the vanishing tail can.
fn solve_unit_variance(
    resid: &[f64],
    slices: &[(usize, usize)],
    s2u: f64,
    c: f64,
    ck: f64,
    hint: f64,
    floor: f64,
) -> f64 {
    let g = |s2e: f64| variance_score(resid, slices, s2u, s2e, c, ck).1;
    let mut lo = (hint * 1e-3).max(floor);
    let mut tries = 0;
    while g(lo) <= 0.0 && lo > floor && tries < 400 {
        lo *= 0.1;
        tries += 1;
    }
    lo = lo.max(floor);
    let mut hi = (hint * 2.0).max(lo * 4.0);
    tries = 0;
    while g(hi) >= 0.0 && tries < 200 {
        hi *= 4.0;
        tries += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-11 * (1.0 + mid) {
            return mid;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of `g_u(. ; s2e) = 0` in the area variance. Returns the boundary
/// solution zero (flagged) when the score is already nonpositive there,
/// meaning the between-area variation is no larger than sampling noise.
fn solve_area_variance(
    resid: &[f64],
    slices: &[(usize, usize)],
    s2e: f64,
    c: f64,
    ck: f64,
    hint: f64,
) -> (f64, bool) {
    let g = |s2u: f64| variance_score(resid, slices, s2u, s2e, c, ck).0;
    if g(0.0) <= 0.0 {
        return (0.0, true);
    }
    let mut lo = 0.0;
    let mut hi = hint.max(s2e).max(1e-8);
    let mut tries = 0;
    while g(hi) >= 0.0 && tries < 200 {
        hi *= 4.0;
        tries += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-11 * (1.0 + mid) {
            return (mid, false);
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), false)
}

/// Robustified mixed-model equation for one area effect, solved by bisection.
fn area_effect(fixed_resid: &[f64], s2u: f64, s2e: f64, c: f64) -> f64 {
    if s2u <= 0.0 {
        return 0.0;
    }
    let su = s2u.sqrt();
    let se = s2e.sqrt().max(1e-150);
    let h = |u: f64| -> f64 {
        let data: f64 = fixed_resid.iter().map(|r| huber_psi((r - u) / se, c)).sum::<f64>() / se;
        data - huber_psi(u / su, c) / su
    };
    let rmin = fixed_resid.iter().copied().fold(f64::INFINITY, f64::min);
    let rmax = fixed_resid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = 3.0 * (su + se) + 1.0;
    let mut lo = rmin.min(0.0) - margin;
    let mut hi = rmax.max(0.0) + margin;
    // h is nonincreasing with h(lo) > 0 > h(hi); bisect.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
            return mid;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fits the robustified nested-error model.
///
/// Every sampled area needs at least two units and the pooled design must
/// have full column rank. Non-convergence is reported through
/// [`FitDiagnostics::converged`] rather than as an error, so long simulation
/// runs can count and keep going.
pub fn fit_reblup(sample: &Sample, opts: &ReblupOptions) -> Result<FittedModel> {
    if !(opts.c > 0.0) {
        return Err(Error::Invalid(format!("tuning constant c must be positive, got {}", opts.c)));
    }
    check_min_area_size(sample, 2)?;
    let design = Design::from_sample(sample);
    if design.n() <= design.p {
        return Err(Error::Invalid(format!(
            "{} observations cannot identify {} coefficients plus variance components",
            design.n(),
            design.p
        )));
    }

    let beta_ols = solve_ols(&design)?;
    let fitted = design.fitted_fixed(&beta_ols);
    let y_mag = design.y.iter().map(|y| y.abs()).fold(0.0f64, f64::max);
    let resid_mag = design
        .y
        .iter()
        .zip(&fitted)
        .map(|(y, f)| (y - f).abs())
        .fold(0.0f64, f64::max);
    if resid_mag <= 1e-10 * (1.0 + y_mag) {
        // Exact linear fit: the variance components degenerate to zero.
        let u = design.ids.iter().map(|id| (*id, 0.0)).collect();
        return Ok(FittedModel::Reblup(ReblupFit {
            beta: beta_ols,
            sigma2_u: 0.0,
            sigma2_e: 0.0,
            u,
            c: opts.c,
            diagnostics: FitDiagnostics {
                iterations: 0,
                converged: true,
                degenerate: true,
                variance_clamped: false,
            },
        }));
    }

    // Method-of-moments start from the OLS residuals.
    let d = design.slices.len();
    let n = design.n();
    let mut within_ss = 0.0;
    let mut area_means = Vec::with_capacity(d);
    let mut inv_n_sum = 0.0;
    for &(s, e) in &design.slices {
        let nj = (e - s) as f64;
        let mean = (s..e).map(|i| design.y[i] - fitted[i]).sum::<f64>() / nj;
        within_ss += (s..e).map(|i| (design.y[i] - fitted[i] - mean).powi(2)).sum::<f64>();
        area_means.push(mean);
        inv_n_sum += 1.0 / nj;
    }
    let mut s2e = (within_ss / (n - d) as f64).max(1e-12 * (1.0 + y_mag * y_mag));
    let mut s2u = if d > 1 {
        let grand = area_means.iter().sum::<f64>() / d as f64;
        let between =
            area_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (d - 1) as f64;
        (between - s2e * inv_n_sum / d as f64).max(0.05 * s2e)
    } else {
        0.5 * s2e
    };
    let s2e_floor = 1e-10 * s2e;

    if let Some((fu, fe)) = opts.fixed_variance {
        if !(fe > 0.0) || fu < 0.0 {
            return Err(Error::Invalid(format!(
                "fixed variance components must satisfy sigma_u^2 >= 0 and sigma_e^2 > 0, got ({fu}, {fe})"
            )));
        }
        let (beta, iters) = irls_beta(&design, fu, fe, opts.c, &beta_ols, opts.tol)?;
        let fitted = design.fitted_fixed(&beta);
        let u = collect_effects(&design, &fitted, fu, fe, opts.c);
        return Ok(FittedModel::Reblup(ReblupFit {
            beta,
            sigma2_u: fu,
            sigma2_e: fe,
            u,
            c: opts.c,
            diagnostics: FitDiagnostics {
                iterations: iters,
                converged: true,
                degenerate: false,
                variance_clamped: false,
            },
        }));
    }

    let ck = psi_square_expectation(opts.c);
    let mut beta = beta_ols.clone();
    let mut converged = false;
    let mut clamped = false;
    let mut iterations = 0;
    let mut resid = vec![0.0; design.n()];
    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let (beta_new, _) = irls_beta(&design, s2u, s2e, opts.c, &beta, opts.tol)?;
        let fitted = design.fitted_fixed(&beta_new);
        for (r, (y, f)) in resid.iter_mut().zip(design.y.iter().zip(&fitted)) {
            *r = y - f;
        }

        // Solve the two score equations by alternating one-dimensional
        // bracketed root finds. Each score has a guaranteed sign change in
        // its own coordinate, so the update can neither overshoot nor chase
        // the vanishing tail of the scores at infinity.
        let (mut s2u_new, mut s2e_new) = (s2u, s2e);
        for _ in 0..30 {
            let se_next =
                solve_unit_variance(&resid, &design.slices, s2u_new, opts.c, ck, s2e_new, s2e_floor);
            let (su_next, at_boundary) =
                solve_area_variance(&resid, &design.slices, se_next, opts.c, ck, s2u_new);
            clamped = at_boundary;
            let delta = (se_next - s2e_new).abs() + (su_next - s2u_new).abs();
            s2e_new = se_next;
            s2u_new = su_next;
            if delta <= 0.1 * opts.tol * (1.0 + s2u_new + s2e_new) {
                break;
            }
        }

        let beta_delta = beta_new
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
            / (1.0 + beta.iter().map(|b| b.abs()).fold(0.0f64, f64::max));
        let theta_delta = ((s2u_new - s2u).abs() + (s2e_new - s2e).abs()) / (1.0 + s2u + s2e);
        beta = beta_new;
        s2u = s2u_new;
        s2e = s2e_new;
        if beta_delta.max(theta_delta) <= opts.tol {
            converged = true;
            break;
        }
    }

    let fitted = design.fitted_fixed(&beta);
    let u = collect_effects(&design, &fitted, s2u, s2e, opts.c);
    Ok(FittedModel::Reblup(ReblupFit {
        beta,
        sigma2_u: s2u,
        sigma2_e: s2e,
        u,
        c: opts.c,
        diagnostics: FitDiagnostics {
            iterations,
            converged,
            degenerate: false,
            variance_clamped: clamped,
        },
    }))
}

fn collect_effects(
    design: &Design,
    fitted: &[f64],
    s2u: f64,
    s2e: f64,
    c: f64,
) -> BTreeMap<u32, f64> {
    design
        .ids
        .iter()
        .zip(&design.slices)
        .map(|(id, &(s, e))| {
            let resid: Vec<f64> = (s..e).map(|i| design.y[i] - fitted[i]).collect();
            (*id, area_effect(&resid, s2u, s2e, c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SampleArea, SampledUnit};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal as RandNormal};

    fn simulate_sample(
        seed: u64,
        d: usize,
        nj: usize,
        s_u: f64,
        s_e: f64,
        contaminate: bool,
    ) -> Sample {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nu = RandNormal::new(0.0, s_u).unwrap();
        let ne = RandNormal::new(0.0, s_e).unwrap();
        let areas = (0..d)
            .map(|j| {
                let u = nu.sample(&mut rng);
                let units = (0..nj)
                    .map(|_| {
                        let x1: f64 = rng.gen_range(-2.0..2.0);
                        let mut e = ne.sample(&mut rng);
                        if contaminate && rng.gen::<f64>() < 0.07 {
                            e += 25.0;
                        }
                        SampledUnit { x: vec![1.0, x1], y: 3.0 + 2.0 * x1 + u + e }
                    })
                    .collect();
                SampleArea { id: j as u32, units }
            })
            .collect();
        Sample::new(areas).unwrap()
    }

    #[test]
    fn consistency_correction_limits() {
        assert!((psi_square_expectation(EBLUP_C) - 1.0).abs() < 1e-12);
        let ck = psi_square_expectation(1.345);
        assert!(ck > 0.5 && ck < 1.0, "got {ck}");
    }

    #[test]
    fn recovers_parameters_on_clean_data() {
        let sample = simulate_sample(7, 30, 12, 1.0, 1.5, false);
        let FittedModel::Reblup(fit) = fit_reblup(&sample, &ReblupOptions::default()).unwrap()
        else {
            unreachable!()
        };
        assert!(fit.diagnostics.converged);
        assert!((fit.beta[0] - 3.0).abs() < 0.3, "beta0 {}", fit.beta[0]);
        assert!((fit.beta[1] - 2.0).abs() < 0.15, "beta1 {}", fit.beta[1]);
        assert!((fit.sigma2_u - 1.0).abs() < 0.6, "s2u {}", fit.sigma2_u);
        assert!((fit.sigma2_e - 2.25).abs() < 0.5, "s2e {}", fit.sigma2_e);
    }

    #[test]
    fn eblup_limit_matches_blup_closed_form() {
        let sample = simulate_sample(11, 10, 8, 0.8, 1.0, false);
        let FittedModel::Reblup(fit) =
            fit_reblup(&sample, &ReblupOptions::with_c(EBLUP_C)).unwrap()
        else {
            unreachable!()
        };
        for area in sample.areas() {
            let nj = area.n() as f64;
            let rbar = area
                .units
                .iter()
                .map(|unit| {
                    unit.y - unit.x.iter().zip(&fit.beta).map(|(a, b)| a * b).sum::<f64>()
                })
                .sum::<f64>()
                / nj;
            let blup = nj * fit.sigma2_u * rbar / (fit.sigma2_e + nj * fit.sigma2_u);
            assert!(
                (fit.u[&area.id] - blup).abs() < 1e-8,
                "area {}: {} vs {}",
                area.id,
                fit.u[&area.id],
                blup
            );
        }
    }

    #[test]
    fn robust_fit_resists_contamination_better_than_ml() {
        let sample = simulate_sample(23, 25, 12, 1.0, 1.0, true);
        let FittedModel::Reblup(robust) =
            fit_reblup(&sample, &ReblupOptions::default()).unwrap()
        else {
            unreachable!()
        };
        let FittedModel::Reblup(ml) = fit_reblup(&sample, &ReblupOptions::with_c(EBLUP_C)).unwrap()
        else {
            unreachable!()
        };
        let err = |b: &[f64]| (b[0] - 3.0).abs() + (b[1] - 2.0).abs();
        assert!(
            err(&robust.beta) < err(&ml.beta),
            "robust {:?} vs ml {:?}",
            robust.beta,
            ml.beta
        );
        // The outliers inflate the ML unit variance far more than the robust one.
        assert!(robust.sigma2_e < ml.sigma2_e);
    }

    #[test]
    fn exact_linear_data_degenerates_cleanly() {
        let areas = (0..3)
            .map(|j| SampleArea {
                id: j,
                units: (0..4)
                    .map(|i| {
                        let x1 = i as f64;
                        SampledUnit { x: vec![1.0, x1], y: 2.0 + 0.5 * x1 }
                    })
                    .collect(),
            })
            .collect();
        let sample = Sample::new(areas).unwrap();
        let FittedModel::Reblup(fit) = fit_reblup(&sample, &ReblupOptions::default()).unwrap()
        else {
            unreachable!()
        };
        assert!(fit.diagnostics.degenerate);
        assert_eq!(fit.sigma2_u, 0.0);
        assert_eq!(fit.sigma2_e, 0.0);
        assert!((fit.beta[0] - 2.0).abs() < 1e-9 && (fit.beta[1] - 0.5).abs() < 1e-9);
        assert!(fit.u.values().all(|u| *u == 0.0));
    }

    #[test]
    fn rejects_undersized_areas() {
        let sample = Sample::new(vec![SampleArea {
            id: 0,
            units: vec![SampledUnit { x: vec![1.0, 0.0], y: 1.0 }],
        }])
        .unwrap();
        assert!(fit_reblup(&sample, &ReblupOptions::default()).is_err());
    }

    #[test]
    fn fixed_variance_refit_reuses_components() {
        let sample = simulate_sample(3, 8, 6, 1.0, 1.0, false);
        let opts = ReblupOptions {
            fixed_variance: Some((0.7, 1.3)),
            ..ReblupOptions::default()
        };
        let FittedModel::Reblup(fit) = fit_reblup(&sample, &opts).unwrap() else {
            unreachable!()
        };
        assert_eq!(fit.sigma2_u, 0.7);
        assert_eq!(fit.sigma2_e, 1.3);
        assert!(fit.diagnostics.converged);
    }
}
