//! Data-driven choice of the calibration constants.
//!
//! Two complementary tools:
//!
//! * [`estimate_gamma`] — a closed-form estimate of the skewness constant
//!   from the sign imbalance of residuals, `gamma = sqrt(n_neg / n_pos)`.
//!   Cheap enough to run per area inside a simulation loop.
//! * [`bootstrap_tune`] — a nonparametric bootstrap grid search over
//!   `(c, gamma)` pairs that rebuilds synthetic populations from winsorised
//!   model residuals, re-estimates on each, and picks the pair with the
//!   smallest relative root-mean-squared error per area.
//!
//! Both are deterministic: the bootstrap derives one independent RNG stream
//! per (grid cell, replicate) pair from a single master seed, so results do
//! not depend on thread scheduling.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cdf::{cdf_abc, ConstantMap};
use crate::data::{AreaId, AreaResiduals, Population, Sample, SampleArea, SampledUnit};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_reblup, FittedModel, ReblupOptions};
use crate::functional::{if_calibrated_gini, IfSpec, WinsorBase, ZetaReference};
use crate::psi::huber_psi;
use crate::scale::{robust_scale, ScaleKind};

/// How residuals are centred before counting signs.
///
/// The default is no centring: residuals from a fitted model already have
/// their location absorbed into the intercept and area effects, and
/// re-centring by the median would force the two sign counts to balance,
/// pinning the estimate at one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    #[default]
    None,
    Mean,
    Median,
}

impl std::str::FromStr for Centering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Centering::None),
            "mean" => Ok(Centering::Mean),
            "median" => Ok(Centering::Median),
            other => Err(invalid(format!(
                "unknown centering `{other}` (expected `none`, `mean`, or `median`)"
            ))),
        }
    }
}

/// Clamp range guarding the gamma estimate against tiny samples.
pub const GAMMA_CLAMP: (f64, f64) = (0.2, 5.0);

/// Skewness estimates per area plus the pooled variant, with clamp flags.
#[derive(Debug, Clone)]
pub struct GammaEstimate {
    /// Per-area estimates, clamped to [`GAMMA_CLAMP`].
    pub per_area: BTreeMap<AreaId, f64>,
    /// One estimate over the concatenated residuals of all areas.
    pub pooled: f64,
    /// Areas whose estimate hit the clamp range.
    pub clamped: BTreeSet<AreaId>,
    /// Whether the pooled estimate hit the clamp range.
    pub pooled_clamped: bool,
}

/// `sqrt(n_neg / n_pos)` over the (optionally centred) residual signs.
///
/// Exact zeros are split evenly between the two counts so the result is
/// deterministic on data with ties. An empty sign class clamps to the
/// corresponding end of [`GAMMA_CLAMP`] and sets the flag.
pub fn gamma_from_residuals(residuals: &[f64], centering: Centering) -> Result<(f64, bool)> {
    if residuals.is_empty() {
        return Err(Error::Empty("residuals for gamma estimation"));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(invalid("residuals for gamma estimation must be finite"));
    }
    let center = match centering {
        Centering::None => 0.0,
        Centering::Mean => residuals.iter().sum::<f64>() / residuals.len() as f64,
        Centering::Median => crate::scale::median(residuals)?,
    };
    let mut neg = 0.0f64;
    let mut pos = 0.0f64;
    for r in residuals {
        let v = r - center;
        if v < 0.0 {
            neg += 1.0;
        } else if v > 0.0 {
            pos += 1.0;
        } else {
            neg += 0.5;
            pos += 0.5;
        }
    }
    let (lo, hi) = GAMMA_CLAMP;
    if pos == 0.0 {
        return Ok((hi, true));
    }
    if neg == 0.0 {
        return Ok((lo, true));
    }
    let raw = (neg / pos).sqrt();
    let clamped = raw.clamp(lo, hi);
    Ok((clamped, clamped != raw))
}

/// Per-area and pooled skewness estimates from model residuals.
pub fn estimate_gamma(residuals: &AreaResiduals, centering: Centering) -> Result<GammaEstimate> {
    if residuals.is_empty() {
        return Err(Error::Empty("area residuals for gamma estimation"));
    }
    let mut per_area = BTreeMap::new();
    let mut clamped = BTreeSet::new();
    for (&area, r) in residuals {
        let (g, was_clamped) = gamma_from_residuals(r, centering)?;
        per_area.insert(area, g);
        if was_clamped {
            clamped.insert(area);
        }
    }
    let pooled_resid = crate::data::pooled_residuals(residuals);
    let (pooled, pooled_clamped) = gamma_from_residuals(&pooled_resid, centering)?;
    Ok(GammaEstimate { per_area, pooled, clamped, pooled_clamped })
}

/// The mesh of `(c, gamma)` pairs searched by [`bootstrap_tune`].
#[derive(Debug, Clone)]
pub struct TuningGrid {
    pairs: Vec<(f64, f64)>,
}

impl Default for TuningGrid {
    /// `c` in {1, 2, 3} crossed with `gamma` in {0.5, 0.75, 1, 1.25, 1.5, 2}.
    fn default() -> Self {
        TuningGrid::new(&[1.0, 2.0, 3.0], &[0.5, 0.75, 1.0, 1.25, 1.5, 2.0])
            .expect("default grid is valid")
    }
}

impl TuningGrid {
    /// Full cross of the two constant lists, in (c-major, gamma-minor) order.
    pub fn new(cs: &[f64], gammas: &[f64]) -> Result<TuningGrid> {
        if cs.is_empty() || gammas.is_empty() {
            return Err(Error::Empty("tuning grid axes"));
        }
        if cs.iter().chain(gammas).any(|v| !(*v > 0.0)) {
            return Err(invalid("tuning grid constants must be positive"));
        }
        let mut pairs = Vec::with_capacity(cs.len() * gammas.len());
        for &c in cs {
            for &g in gammas {
                pairs.push((c, g));
            }
        }
        Ok(TuningGrid { pairs })
    }

    /// An explicit list of pairs, kept in the given order (ties in the
    /// final argmin resolve to the earlier pair).
    pub fn from_pairs(pairs: Vec<(f64, f64)>) -> Result<TuningGrid> {
        if pairs.is_empty() {
            return Err(Error::Empty("tuning grid"));
        }
        if pairs.iter().any(|(c, g)| !(*c > 0.0) || !(*g > 0.0)) {
            return Err(invalid("tuning grid constants must be positive"));
        }
        Ok(TuningGrid { pairs })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn max_c(&self) -> f64 {
        self.pairs.iter().map(|(c, _)| *c).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which calibrated estimator the bootstrap evaluates on each grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneTarget {
    /// Asymmetrically calibrated CDF estimator, Gini read off the CDF.
    CdfAbc,
    /// Influence-function linearized estimator with asymmetric calibration.
    IfAbc,
}

impl TuneTarget {
    fn default_scale(self) -> ScaleKind {
        match self {
            TuneTarget::CdfAbc => ScaleKind::Qn,
            TuneTarget::IfAbc => ScaleKind::Mad,
        }
    }
}

/// Knobs for [`bootstrap_tune`].
#[derive(Debug, Clone)]
pub struct TuneOptions {
    /// Bootstrap replicates per grid cell.
    pub replicates: usize,
    /// Winsorisation constant; must exceed every grid `c`. `None` picks
    /// `max grid c + 1`.
    pub c2: Option<f64>,
    /// Master seed; every (cell, replicate) pair derives its own stream.
    pub seed: u64,
    /// Scale estimate used to winsorise residuals before resampling.
    pub winsor_scale: ScaleKind,
    /// Scale inside the evaluated estimator. `None` picks the target's
    /// default (Qn for the CDF path, MAD for the linearized path).
    pub estimator_scale: Option<ScaleKind>,
    /// Options for the model refits on bootstrap samples.
    pub fit: ReblupOptions,
    /// Reuse the original variance components in refits instead of
    /// re-solving the variance score equations. Approximate but much
    /// faster; beta and the area effects are still re-estimated.
    pub fast_refit: bool,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            replicates: 100,
            c2: None,
            seed: 0,
            winsor_scale: ScaleKind::Mad,
            estimator_scale: None,
            fit: ReblupOptions::default(),
            fast_refit: false,
        }
    }
}

/// Bootstrap error summaries for one area under one grid cell.
#[derive(Debug, Clone, Copy)]
pub struct CellStats {
    /// `sqrt(mean of squared relative errors)`.
    pub rrmse: f64,
    /// The mean of squared relative errors itself (the displayed surface;
    /// the argmin is the same either way).
    pub mean_sq_rel_err: f64,
    /// Mean relative error.
    pub bias: f64,
}

/// The error surface of one grid cell.
#[derive(Debug, Clone)]
pub struct CellSurface {
    pub c: f64,
    pub gamma: f64,
    pub per_area: BTreeMap<AreaId, CellStats>,
    /// Replicates dropped because a refit or re-estimate failed.
    pub dropped: usize,
}

/// Output of [`bootstrap_tune`].
#[derive(Debug, Clone)]
pub struct TuningResult {
    /// One surface per grid cell, in grid order.
    pub surfaces: Vec<CellSurface>,
    /// Argmin-RRMSE pair per area.
    pub chosen: BTreeMap<AreaId, (f64, f64)>,
    /// Areas excluded because an original estimate was too close to zero
    /// for relative errors to make sense.
    pub excluded: BTreeSet<AreaId>,
    /// Replicates requested per cell.
    pub replicates: usize,
}

/// Derives the RNG seed for one (cell, replicate) pair from the master
/// seed, via three rounds of the splitmix64 finalizer. Public so that
/// byte-for-byte external re-implementations can consume identical streams.
pub fn replicate_seed(master: u64, cell: u64, replicate: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(master).wrapping_add(cell)).wrapping_add(replicate))
}

/// One calibrated area estimate for the tuned target.
fn estimate_target(
    target: TuneTarget,
    fit: &FittedModel,
    residuals: &AreaResiduals,
    pop: &Population,
    area: AreaId,
    c: f64,
    gamma: f64,
    scale: ScaleKind,
) -> Result<f64> {
    match target {
        TuneTarget::CdfAbc => {
            crate::functional::gini_from_cdf(&cdf_abc(fit, residuals, pop, area, c, gamma, scale)?)
        }
        TuneTarget::IfAbc => {
            let spec = IfSpec {
                c: ConstantMap::Scalar(c),
                gamma: ConstantMap::Scalar(gamma),
                scale,
                scale_base: WinsorBase::default(),
                reference: ZetaReference::default(),
            };
            Ok(if_calibrated_gini(fit, pop, area, &spec)?.value)
        }
    }
}

/// Near-zero original estimates cannot anchor relative errors.
const DENOM_EPS: f64 = 1e-12;

/// Nonparametric bootstrap grid search for `(c, gamma)`.
///
/// For every grid cell: compute the original calibrated estimates; winsorise
/// the model residuals per area (`psi_{c2,1}` on a robust per-area scale);
/// then, per replicate, resample winsorised residuals with replacement
/// within each area, rebuild outcomes as fitted value plus resampled
/// residual, refit the model, re-estimate every area against a synthetic
/// population that keeps the original observed outcomes next to the
/// bootstrap predictions (calibrated with the bootstrap model's residuals),
/// and record the relative error against the original estimate. Surfaces
/// are per-area means of the (squared) relative errors; the chosen pair per
/// area minimizes the RRMSE.
///
/// Replicates whose refit or re-estimate fails are dropped and counted; a
/// cell that loses more than 10% of its replicates is an error. Areas whose
/// original estimate is numerically zero are excluded and flagged.
pub fn bootstrap_tune(
    sample: &Sample,
    pop: &Population,
    fit: &FittedModel,
    grid: &TuningGrid,
    target: TuneTarget,
    opts: &TuneOptions,
) -> Result<TuningResult> {
    let reblup = match fit {
        FittedModel::Reblup(f) => f,
        _ => {
            return Err(invalid(
                "bootstrap tuning refits the random-effects model; fit the sample with \
                 the robust mixed-model fitter first",
            ))
        }
    };
    if opts.replicates == 0 {
        return Err(invalid("bootstrap tuning needs at least one replicate"));
    }
    let max_c = grid.max_c();
    let c2 = opts.c2.unwrap_or(max_c + 1.0);
    if !(c2 > max_c) {
        return Err(invalid(format!(
            "winsorisation constant c2 = {c2} must exceed every grid c (max {max_c})"
        )));
    }
    let est_scale = opts.estimator_scale.unwrap_or_else(|| target.default_scale());

    let residuals = fit.residuals(sample)?;
    let areas: Vec<AreaId> = sample.areas().iter().map(|a| a.id).collect();

    // Fitted values and winsorised residual pools, both per area and in
    // sample order. The pools are what gets resampled, so the bound
    // |res| <= c2 * scale caps every synthetic outcome's displacement.
    let mut fitted_by_area: Vec<Vec<f64>> = Vec::with_capacity(areas.len());
    let mut pools: Vec<Vec<f64>> = Vec::with_capacity(areas.len());
    for a in sample.areas() {
        let fitted = fit.fitted_sampled(&a.units, a.id)?;
        let resid = residuals
            .get(&a.id)
            .ok_or_else(|| invalid(format!("no residuals for area {}", a.id)))?;
        let pool = if resid.iter().all(|r| *r == 0.0) {
            vec![0.0; resid.len()]
        } else {
            let w = robust_scale(resid, opts.winsor_scale)?;
            resid.iter().map(|e| w * huber_psi(e / w, c2)).collect()
        };
        fitted_by_area.push(fitted);
        pools.push(pool);
    }

    let refit_opts = ReblupOptions {
        fixed_variance: opts
            .fast_refit
            .then_some((reblup.sigma2_u, reblup.sigma2_e)),
        ..opts.fit.clone()
    };

    // Original estimates per cell; areas with a numerically zero original
    // estimate are excluded from that search entirely.
    let mut excluded = BTreeSet::new();
    let mut originals: Vec<BTreeMap<AreaId, f64>> = Vec::with_capacity(grid.pairs().len());
    for &(c, g) in grid.pairs() {
        let mut per_area = BTreeMap::new();
        for &area in &areas {
            let value = estimate_target(target, fit, &residuals, pop, area, c, g, est_scale)?;
            if value.abs() < DENOM_EPS {
                excluded.insert(area);
            } else {
                per_area.insert(area, value);
            }
        }
        originals.push(per_area);
    }

    // One task per (cell, replicate) with its own derived seed, so the
    // outcome is identical for any thread count or schedule.
    let tasks: Vec<(usize, usize)> = (0..grid.pairs().len())
        .flat_map(|cell| (0..opts.replicates).map(move |rep| (cell, rep)))
        .collect();
    let runs: Vec<(usize, Option<BTreeMap<AreaId, f64>>)> = tasks
        .par_iter()
        .map(|&(cell, rep)| {
            let (c, g) = grid.pairs()[cell];
            let seed = replicate_seed(opts.seed, cell as u64, rep as u64);
            let est = bootstrap_replicate(
                sample,
                pop,
                &areas,
                &fitted_by_area,
                &pools,
                &refit_opts,
                target,
                c,
                g,
                est_scale,
                seed,
            );
            (cell, est.ok())
        })
        .collect();

    let n_cells = grid.pairs().len();
    let mut sums: Vec<BTreeMap<AreaId, (f64, f64, usize)>> = vec![BTreeMap::new(); n_cells];
    let mut dropped = vec![0usize; n_cells];
    for (cell, est) in runs {
        match est {
            Some(per_area) => {
                for (&area, &star) in &per_area {
                    let Some(&orig) = originals[cell].get(&area) else { continue };
                    let e = (star - orig) / orig;
                    let entry = sums[cell].entry(area).or_insert((0.0, 0.0, 0));
                    entry.0 += e * e;
                    entry.1 += e;
                    entry.2 += 1;
                }
            }
            None => dropped[cell] += 1,
        }
    }

    let mut surfaces = Vec::with_capacity(n_cells);
    for (cell, &(c, g)) in grid.pairs().iter().enumerate() {
        if dropped[cell] * 10 > opts.replicates {
            return Err(Error::Numerical(format!(
                "bootstrap cell (c = {c}, gamma = {g}) dropped {} of {} replicates",
                dropped[cell], opts.replicates
            )));
        }
        let per_area = sums[cell]
            .iter()
            .map(|(&area, &(sq, lin, k))| {
                let mean_sq = sq / k as f64;
                (area, CellStats { rrmse: mean_sq.sqrt(), mean_sq_rel_err: mean_sq, bias: lin / k as f64 })
            })
            .collect();
        surfaces.push(CellSurface { c, gamma: g, per_area, dropped: dropped[cell] });
    }

    let mut chosen = BTreeMap::new();
    for &area in &areas {
        if excluded.contains(&area) {
            continue;
        }
        let mut best: Option<(f64, (f64, f64))> = None;
        for s in &surfaces {
            let Some(stats) = s.per_area.get(&area) else { continue };
            if best.map_or(true, |(r, _)| stats.rrmse < r) {
                best = Some((stats.rrmse, (s.c, s.gamma)));
            }
        }
        if let Some((_, pair)) = best {
            chosen.insert(area, pair);
        }
    }

    Ok(TuningResult { surfaces, chosen, excluded, replicates: opts.replicates })
}

/// One bootstrap replicate: resample, rebuild, refit, re-estimate.
#[allow(clippy::too_many_arguments)]
fn bootstrap_replicate(
    sample: &Sample,
    pop: &Population,
    areas: &[AreaId],
    fitted_by_area: &[Vec<f64>],
    pools: &[Vec<f64>],
    refit_opts: &ReblupOptions,
    target: TuneTarget,
    c: f64,
    gamma: f64,
    est_scale: ScaleKind,
    seed: u64,
) -> Result<BTreeMap<AreaId, f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot_areas = Vec::with_capacity(sample.areas().len());
    for ((a, fitted), pool) in sample.areas().iter().zip(fitted_by_area).zip(pools) {
        let units = a
            .units
            .iter()
            .zip(fitted)
            .map(|(u, f)| SampledUnit {
                x: u.x.clone(),
                y: f + pool[rng.gen_range(0..pool.len())],
            })
            .collect();
        boot_areas.push(SampleArea { id: a.id, units });
    }
    let boot_sample = Sample::new(boot_areas)?;
    let boot_fit = fit_reblup(&boot_sample, refit_opts)?;
    let boot_resid = boot_fit.residuals(&boot_sample)?;
    let mut out = BTreeMap::new();
    for &area in areas {
        let value =
            estimate_target(target, &boot_fit, &boot_resid, pop, area, c, gamma, est_scale)?;
        out.insert(area, value);
    }
    Ok(out)
}
