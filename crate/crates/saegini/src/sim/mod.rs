//! Monte Carlo harness: synthetic censuses, repeated sampling, and
//! per-area error summaries for every registered estimation method.
//!
//! The design follows the fixed-census paradigm: one population is
//! generated per scenario, then `replicates` independent samples are drawn
//! from it. Every (replicate) job gets a pre-derived seed, so runs are
//! bit-reproducible for a fixed master seed regardless of thread count.

pub mod population;
pub mod skewt;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::AreaId;
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_mq, fit_reblup, FittedModel, MqOptions, ReblupOptions, EBLUP_C};
use crate::functional::{WinsorBase, ZetaReference};
use crate::methods::{
    FitFlavor, GammaPooling, GammaSpec, MethodContext, MethodRegistry, MethodSettings,
};
use crate::scale::ScaleKind;
use crate::tuning::replicate_seed;

pub use population::{draw_srswor, gen_census, Census, CensusArea};
pub use skewt::{abs_t_mean, skew_t_centering, skew_t_draw, skew_t_sample};

fn default_areas() -> usize {
    40
}
fn default_units_per_area() -> usize {
    300
}
fn default_sample_per_area() -> usize {
    15
}
fn default_nu() -> f64 {
    3.0
}
fn default_beta0() -> f64 {
    100.0
}
fn default_beta1() -> f64 {
    5.0
}
fn default_sigma_u() -> f64 {
    1.0
}
fn default_x_meanlog() -> f64 {
    1.0
}
fn default_x_sdlog() -> f64 {
    0.5
}

/// One data-generating design.
///
/// Outcomes follow `y = beta0 + beta1 * x + u_j + eps` with log-normal
/// covariates, normal area effects, and two-piece skewed-t errors whose
/// skewness `lambda` (optionally mean-centered) is the scenario's handle on
/// inequality.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Skewness of the error law; 1 = symmetric t.
    pub lambda: f64,
    /// Subtract the analytic error mean so the errors are centered.
    pub centered: bool,
    #[serde(default = "default_areas")]
    pub areas: usize,
    #[serde(default = "default_units_per_area")]
    pub units_per_area: usize,
    #[serde(default = "default_sample_per_area")]
    pub sample_per_area: usize,
    /// Degrees of freedom of the error law.
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_beta0")]
    pub beta0: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    /// Standard deviation of the area effects.
    #[serde(default = "default_sigma_u")]
    pub sigma_u: f64,
    #[serde(default = "default_x_meanlog")]
    pub x_meanlog: f64,
    #[serde(default = "default_x_sdlog")]
    pub x_sdlog: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.areas == 0 || self.units_per_area == 0 {
            return Err(invalid("scenario needs at least one area and one unit per area"));
        }
        if self.sample_per_area == 0 || self.sample_per_area > self.units_per_area {
            return Err(invalid(format!(
                "sample size per area must lie in 1..={}, got {}",
                self.units_per_area, self.sample_per_area
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.nu > 2.0) {
            return Err(invalid(format!("nu must exceed 2, got {}", self.nu)));
        }
        if !(self.sigma_u >= 0.0) || !(self.x_sdlog >= 0.0) {
            return Err(invalid("sigma_u and x_sdlog must be nonnegative"));
        }
        Ok(())
    }
}

/// The six benchmark designs: centered errors with lambda 40/70/100 and
/// non-centered errors with lambda 70/150/400, all at the default sizes
/// (40 areas of 300 units, 15 sampled each).
pub fn paper_scenarios() -> Vec<Scenario> {
    let base = Scenario {
        name: String::new(),
        lambda: 1.0,
        centered: true,
        areas: default_areas(),
        units_per_area: default_units_per_area(),
        sample_per_area: default_sample_per_area(),
        nu: default_nu(),
        beta0: default_beta0(),
        beta1: default_beta1(),
        sigma_u: default_sigma_u(),
        x_meanlog: default_x_meanlog(),
        x_sdlog: default_x_sdlog(),
    };
    [("1a", 40.0, true), ("1b", 70.0, true), ("1c", 100.0, true), ("2a", 70.0, false), ("2b", 150.0, false), ("2c", 400.0, false)]
        .into_iter()
        .map(|(name, lambda, centered)| Scenario {
            name: name.to_string(),
            lambda,
            centered,
            ..base.clone()
        })
        .collect()
}

/// Knobs for [`run_scenario`].
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Registered method names to evaluate.
    pub methods: Vec<String>,
    /// Monte Carlo samples drawn from the fixed census.
    pub replicates: usize,
    /// Master seed; the census and every replicate derive their own streams.
    pub seed: u64,
    /// Huber constant of the robust and M-quantile fits.
    pub fit_c: f64,
    /// Robust scale for the CDF-path calibration.
    pub cdf_scale: ScaleKind,
    /// Robust scale for the linearized-path calibration.
    pub if_scale: ScaleKind,
    /// Vector the linearized-path scale is estimated from.
    pub if_scale_base: WinsorBase,
    /// Reference distribution for the linearized-path pseudo-values.
    pub zeta_reference: ZetaReference,
    /// Overrides every method's default calibration constant when set.
    pub c_override: Option<f64>,
    /// Skewness source for the asymmetric methods; the default estimates
    /// it from each replicate's residual blocks on the fly.
    pub gamma: Option<GammaSpec>,
    /// Block choice for on-the-fly skewness estimation: pooled over areas
    /// (default) or per target area.
    pub gamma_pooling: GammaPooling,
    /// Keep per-replicate raw estimates in the result.
    pub keep_raw: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            methods: ["eblup", "reblup", "reblup-sbc", "reblup-abc", "mq-sbc", "mq-abc", "if-sbc", "if-abc"]
                .map(String::from)
                .to_vec(),
            replicates: 100,
            seed: 0,
            fit_c: 1.345,
            cdf_scale: ScaleKind::Qn,
            if_scale: ScaleKind::Qn,
            if_scale_base: WinsorBase::default(),
            zeta_reference: ZetaReference::default(),
            c_override: None,
            gamma: None,
            gamma_pooling: GammaPooling::default(),
            keep_raw: false,
        }
    }
}

/// Error summaries of one (method, area) pair over the replicates.
#[derive(Debug, Clone, Copy)]
pub struct AreaMethodStats {
    /// Mean relative prediction error.
    pub rel_bias: f64,
    /// Root of the mean squared relative prediction error.
    pub rrmse: f64,
    /// Replicates that produced an estimate.
    pub ok_reps: usize,
}

/// Median-over-areas summary of one method.
#[derive(Debug, Clone, Copy)]
pub struct MethodSummary {
    pub median_rel_bias: f64,
    pub median_rrmse: f64,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    /// Target value per area, computed on the census.
    pub true_gini: BTreeMap<AreaId, f64>,
    pub median_true_gini: f64,
    /// Census units floored at zero, and whether that crossed 0.1%.
    pub floored_units: usize,
    pub flooring_flagged: bool,
    /// Per method, per area: bias and RRMSE over the replicates.
    pub stats: BTreeMap<String, BTreeMap<AreaId, AreaMethodStats>>,
    /// Median-over-areas per method.
    pub summary: BTreeMap<String, MethodSummary>,
    /// Failed replicates per method.
    pub failures: BTreeMap<String, usize>,
    /// Methods dropped because more than 10% of replicates failed.
    pub aborted: BTreeSet<String>,
    /// Raw estimates per method and replicate (when `keep_raw` is set);
    /// `None` marks a failed replicate.
    pub raw: BTreeMap<String, Vec<Option<BTreeMap<AreaId, f64>>>>,
    pub replicates: usize,
}

/// Per-replicate fit bundle shared by the methods of one flavor.
struct FlavorData {
    fit: FittedModel,
    residuals: crate::data::AreaResiduals,
    gamma: GammaSpec,
}

/// Runs one scenario: generate the census once, then draw, fit, and
/// estimate per replicate, and aggregate relative errors per (method, area).
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<ScenarioResult> {
    scenario.validate()?;
    if opts.replicates == 0 {
        return Err(invalid("a scenario run needs at least one replicate"));
    }
    if opts.methods.is_empty() {
        return Err(Error::Empty("method list"));
    }
    let registry = MethodRegistry::with_builtins();
    for name in &opts.methods {
        if registry.get(name).is_none() {
            return Err(invalid(format!(
                "unknown method `{name}` (registered: {})",
                registry.names().join(", ")
            )));
        }
    }

    let census = gen_census(scenario, replicate_seed(opts.seed, 0, 0))?;
    let true_gini: BTreeMap<AreaId, f64> =
        census.areas.iter().map(|a| (a.id, a.true_gini)).collect();
    if true_gini.values().any(|g| *g <= 0.0) {
        return Err(Error::Numerical(
            "census produced a nonpositive true Gini; relative errors are undefined".into(),
        ));
    }
    let median_true_gini = census.median_true_gini()?;

    let flavors: BTreeSet<FitFlavor> = opts
        .methods
        .iter()
        .map(|n| registry.get(n).expect("validated").fit_flavor())
        .collect();

    // One job per replicate with its own seed; estimates come back keyed by
    // method name, `None` marking a failure of the fit or any area estimate.
    let reps: Vec<BTreeMap<String, Option<BTreeMap<AreaId, f64>>>> = (0..opts.replicates)
        .into_par_iter()
        .map(|h| -> Result<BTreeMap<String, Option<BTreeMap<AreaId, f64>>>> {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(opts.seed, 1, h as u64));
            let (sample, pop) = draw_srswor(&census, scenario.sample_per_area, &mut rng)?;

            let mut flavor_data: BTreeMap<FitFlavor, Option<FlavorData>> = BTreeMap::new();
            for &flavor in &flavors {
                let fit = match flavor {
                    FitFlavor::Reblup => {
                        fit_reblup(&sample, &ReblupOptions::with_c(opts.fit_c))
                    }
                    FitFlavor::Eblup => fit_reblup(&sample, &ReblupOptions::with_c(EBLUP_C)),
                    FitFlavor::Mq => {
                        fit_mq(&sample, &MqOptions { c: opts.fit_c, ..Default::default() })
                    }
                };
                let data = fit.ok().and_then(|fit| {
                    let residuals = fit.residuals(&sample).ok()?;
                    // Skewness constants default to on-the-fly sign counts;
                    // each route counts the block it winsorises.
                    let gamma = opts.gamma.clone().unwrap_or(GammaSpec::Auto);
                    Some(FlavorData { fit, residuals, gamma })
                });
                flavor_data.insert(flavor, data);
            }

            let mut out = BTreeMap::new();
            for name in &opts.methods {
                let method = registry.get(name).expect("validated");
                let estimates = flavor_data[&method.fit_flavor()].as_ref().and_then(|data| {
                    let settings = MethodSettings {
                        c: opts.c_override,
                        gamma: data.gamma.clone(),
                        cdf_scale: opts.cdf_scale,
                        if_scale: opts.if_scale,
                        if_scale_base: opts.if_scale_base,
                        zeta_reference: opts.zeta_reference,
                        gamma_pooling: opts.gamma_pooling,
                        ..Default::default()
                    };
                    let ctx = MethodContext {
                        fit: &data.fit,
                        residuals: &data.residuals,
                        population: &pop,
                        settings: &settings,
                    };
                    let mut per_area = BTreeMap::new();
                    for area in pop.sampled_area_ids() {
                        per_area.insert(area, method.estimate_area(&ctx, area).ok()?.value);
                    }
                    Some(per_area)
                });
                out.insert(name.clone(), estimates);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut stats = BTreeMap::new();
    let mut summary = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut aborted = BTreeSet::new();
    let mut raw = BTreeMap::new();
    for name in &opts.methods {
        let per_rep: Vec<Option<BTreeMap<AreaId, f64>>> =
            reps.iter().map(|r| r[name].clone()).collect();
        let failed = per_rep.iter().filter(|r| r.is_none()).count();
        failures.insert(name.clone(), failed);
        if opts.keep_raw {
            raw.insert(name.clone(), per_rep.clone());
        }
        if failed * 10 > opts.replicates {
            aborted.insert(name.clone());
            continue;
        }

        let mut per_area_stats = BTreeMap::new();
        for (&area, &truth) in &true_gini {
            let errors: Vec<f64> = per_rep
                .iter()
                .filter_map(|r| r.as_ref().map(|m| (m[&area] - truth) / truth))
                .collect();
            let k = errors.len() as f64;
            let rel_bias = errors.iter().sum::<f64>() / k;
            let rrmse = (errors.iter().map(|e| e * e).sum::<f64>() / k).sqrt();
            per_area_stats.insert(area, AreaMethodStats { rel_bias, rrmse, ok_reps: errors.len() });
        }
        let biases: Vec<f64> = per_area_stats.values().map(|s| s.rel_bias).collect();
        let rrmses: Vec<f64> = per_area_stats.values().map(|s| s.rrmse).collect();
        summary.insert(
            name.clone(),
            MethodSummary {
                median_rel_bias: crate::scale::median(&biases)?,
                median_rrmse: crate::scale::median(&rrmses)?,
            },
        );
        stats.insert(name.clone(), per_area_stats);
    }

    Ok(ScenarioResult {
        scenario: scenario.clone(),
        true_gini,
        median_true_gini,
        floored_units: census.floored_units,
        flooring_flagged: census.flooring_flagged,
        stats,
        summary,
        failures,
        aborted,
        raw,
        replicates: opts.replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_options(methods: &[&str], reps: usize, seed: u64) -> RunOptions {
        RunOptions {
            methods: methods.iter().map(|s| s.to_string()).collect(),
            replicates: reps,
            seed,
            keep_raw: true,
            ..Default::default()
        }
    }

    fn tiny_scenario() -> Scenario {
        Scenario {
            areas: 6,
            units_per_area: 60,
            sample_per_area: 10,
            ..paper_scenarios()[0].clone()
        }
    }

    #[test]
    fn scenario_validation_catches_bad_sizes() {
        let mut sc = tiny_scenario();
        sc.sample_per_area = 61;
        assert!(sc.validate().is_err());
        sc.sample_per_area = 10;
        sc.lambda = 0.0;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn paper_catalog_has_six_designs() {
        let scs = paper_scenarios();
        assert_eq!(scs.len(), 6);
        assert_eq!(
            scs.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(),
            vec!["1a", "1b", "1c", "2a", "2b", "2c"]
        );
        assert!(scs.iter().take(3).all(|s| s.centered));
        assert!(scs.iter().skip(3).all(|s| !s.centered));
        assert_eq!(scs[2].lambda, 100.0);
        for s in &scs {
            assert_eq!((s.areas, s.units_per_area, s.sample_per_area), (40, 300, 15));
            s.validate().expect("catalog scenarios are valid");
        }
    }

    #[test]
    fn run_is_reproducible_and_consistent() {
        let sc = tiny_scenario();
        let opts = tiny_options(&["reblup", "reblup-abc"], 5, 77);
        let a = run_scenario(&sc, &opts).expect("run");
        let b = run_scenario(&sc, &opts).expect("run");
        assert_eq!(a.median_true_gini, b.median_true_gini);
        for (m, per_area) in &a.stats {
            for (area, s) in per_area {
                let o = &b.stats[m][area];
                assert_eq!(s.rel_bias, o.rel_bias);
                assert_eq!(s.rrmse, o.rrmse);
                // Variance decomposition: the RRMSE dominates the bias.
                assert!(s.rrmse >= s.rel_bias.abs() - 1e-15);
            }
        }
        assert_eq!(a.raw["reblup"].len(), 5);
        assert!(a.aborted.is_empty());
    }

    #[test]
    fn gamma_fixed_at_one_reproduces_sbc_replicate_by_replicate() {
        let sc = tiny_scenario();
        let mut opts = tiny_options(&["reblup-sbc", "reblup-abc", "if-sbc", "if-abc"], 4, 13);
        opts.gamma = Some(GammaSpec::Fixed(1.0));
        let res = run_scenario(&sc, &opts).expect("run");
        for (abc, sbc) in [("reblup-abc", "reblup-sbc"), ("if-abc", "if-sbc")] {
            for (ra, rs) in res.raw[abc].iter().zip(&res.raw[sbc]) {
                match (ra, rs) {
                    (Some(ma), Some(ms)) => assert_eq!(ma, ms),
                    (a, s) => panic!("replicate mismatch: {a:?} vs {s:?}"),
                }
            }
        }
    }

    #[test]
    fn unknown_method_is_rejected() {
        let sc = tiny_scenario();
        let opts = tiny_options(&["no-such-method"], 2, 1);
        assert!(matches!(run_scenario(&sc, &opts), Err(Error::Invalid(_))));
    }

    #[test]
    fn robust_methods_beat_plugin_on_skewed_data() {
        // Sanity check of the study's headline direction on a small grid:
        // the uncalibrated robust plug-in underestimates inequality badly,
        // calibration pulls it back.
        let sc = Scenario { areas: 8, units_per_area: 80, sample_per_area: 12, ..paper_scenarios()[0].clone() };
        let opts = tiny_options(&["reblup", "reblup-abc"], 10, 4242);
        let res = run_scenario(&sc, &opts).expect("run");
        let plugin = res.summary["reblup"].median_rel_bias;
        let calibrated = res.summary["reblup-abc"].median_rel_bias;
        assert!(plugin < -0.5, "plug-in bias {plugin}");
        assert!(calibrated.abs() < plugin.abs(), "calibrated {calibrated} vs {plugin}");
    }
}
