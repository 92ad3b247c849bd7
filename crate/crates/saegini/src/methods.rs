//! A by-name registry of ready-made estimation pipelines.
//!
//! Each method bundles a model-fit flavor (robust, non-robust, or
//! M-quantile) with an estimation route: either a distribution-function
//! estimator read off with the Gini functional, or the influence-function
//! linearized estimator. The registry maps stable string names (the ones
//! accepted by the CLI and the simulation config) to trait objects, so new
//! methods can be added without touching the dispatch sites.

use std::collections::BTreeMap;

use crate::cdf::{estimate_cdf, CalibrationSpec, CdfMethod, ConstantMap, Scope};
use crate::data::{AreaId, AreaResiduals, Population};
use crate::error::{invalid, Error, Result};
use crate::fit::{FitKind, FittedModel};
use crate::functional::{
    gini_from_cdf, gini_pseudo_residuals, if_calibrated_gini, if_calibrated_gini_full, IfSpec,
    WinsorBase, ZetaReference,
};
use crate::scale::ScaleKind;
use crate::tuning::{gamma_from_residuals, Centering};

/// Which model fit a method expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FitFlavor {
    /// Robust mixed-model fit.
    Reblup,
    /// Non-robust baseline: the same fitter with an effectively infinite
    /// tuning constant.
    Eblup,
    /// M-quantile fit.
    Mq,
}

/// Where a method's skewness constant comes from.
#[derive(Debug, Clone)]
pub enum GammaSpec {
    /// One value for every area.
    Fixed(f64),
    /// A per-area map (for example from bootstrap tuning or a prior
    /// [`crate::tuning::estimate_gamma`] call).
    PerArea(BTreeMap<AreaId, f64>),
    /// Estimate on the fly from the context's residuals: per area under
    /// partial calibration, pooled under full calibration.
    Auto,
}

/// Which residual block feeds the sign counts behind [`GammaSpec::Auto`]
/// when the calibration itself is per-area (partial scope).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaPooling {
    /// Count signs over the residuals of every sampled area. Under the
    /// nested-error model the unit-level errors share one distribution, so
    /// the sign imbalance is a population quantity; pooling removes the
    /// small-sample noise of per-area counts, which otherwise rises exactly
    /// in the samples that over-represent the tail and inflates the variance
    /// of the asymmetric estimators.
    #[default]
    Pooled,
    /// Count signs within the target area only. For settings where the error
    /// law plausibly differs across areas.
    PerArea,
}

/// Runtime knobs shared by all methods.
#[derive(Debug, Clone)]
pub struct MethodSettings {
    /// Partial (own-area residuals) or full (pooled) calibration.
    pub scope: Scope,
    /// Overrides the method's default calibration constant when set.
    pub c: Option<f64>,
    /// Skewness constant source for asymmetric methods.
    pub gamma: GammaSpec,
    /// Robust scale inside the CDF-path calibration.
    pub cdf_scale: ScaleKind,
    /// Robust scale inside the linearized-path calibration.
    pub if_scale: ScaleKind,
    /// Vector the linearized-path scale is estimated from.
    pub if_scale_base: WinsorBase,
    /// Reference distribution the linearized-path pseudo-values are
    /// evaluated against.
    pub zeta_reference: ZetaReference,
    /// How residual blocks are centred before the sign counts behind
    /// [`GammaSpec::Auto`]. Mean centring keeps the sign imbalance that a
    /// skewed block carries; median centring balances the counts by
    /// construction and is only useful as a degenerate reference.
    pub gamma_centering: Centering,
    /// Block choice for [`GammaSpec::Auto`] under partial scope.
    pub gamma_pooling: GammaPooling,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            scope: Scope::Partial,
            c: None,
            gamma: GammaSpec::Auto,
            cdf_scale: ScaleKind::Qn,
            if_scale: ScaleKind::Qn,
            if_scale_base: WinsorBase::default(),
            zeta_reference: ZetaReference::default(),
            gamma_centering: Centering::Mean,
            gamma_pooling: GammaPooling::default(),
        }
    }
}

/// Everything a method needs to produce an area estimate.
pub struct MethodContext<'a> {
    pub fit: &'a FittedModel,
    pub residuals: &'a AreaResiduals,
    pub population: &'a Population,
    pub settings: &'a MethodSettings,
}

/// One area's estimate with the constants that produced it.
#[derive(Debug, Clone)]
pub struct AreaEstimate {
    pub area: AreaId,
    pub value: f64,
    /// Calibration constant actually used, when the route has one.
    pub c: Option<f64>,
    /// Skewness constant actually used, when the route has one.
    pub gamma: Option<f64>,
    /// Estimate fell outside [0, 1].
    pub out_of_range: bool,
    /// The area had no own random-effect estimate and used the median of
    /// the others (out-of-sample areas).
    pub used_median_effect: bool,
}

/// A named estimation pipeline.
pub trait GiniMethod: Send + Sync {
    /// Stable name used by CLIs and configs.
    fn name(&self) -> &'static str;
    /// The model fit this method consumes.
    fn fit_flavor(&self) -> FitFlavor;
    /// Estimate one area from a prepared context.
    fn estimate_area(&self, ctx: &MethodContext<'_>, area: AreaId) -> Result<AreaEstimate>;
}

/// The estimation route of a built-in method.
#[derive(Debug, Clone, Copy)]
enum Route {
    /// Uncalibrated model plug-in: the Gini of the fitted values for sampled
    /// units and the predictions for unsampled ones. The baseline whose
    /// downward bias the calibrated routes exist to repair.
    PlugIn,
    /// Distribution-function estimator + Gini read-off.
    Cdf { method: CdfMethod, default_c: Option<f64>, asymmetric: bool },
    /// Influence-function linearized estimator.
    If { default_c: f64, asymmetric: bool },
}

/// Built-in method: a (name, fit flavor, route) triple.
struct BuiltinMethod {
    name: &'static str,
    flavor: FitFlavor,
    route: Route,
}

impl BuiltinMethod {
    /// The block of values whose sign imbalance sets `GammaSpec::Auto`: the
    /// fit residuals for CDF-route methods, the pseudo-residuals of the
    /// linearization for IF-route methods (each route counts the vector it
    /// winsorises). Full scope always pools; partial scope follows
    /// [`MethodSettings::gamma_pooling`].
    fn gamma_block(&self, ctx: &MethodContext<'_>, area: AreaId) -> Result<Vec<f64>> {
        let pooled = ctx.settings.scope == Scope::Full
            || ctx.settings.gamma_pooling == GammaPooling::Pooled;
        match (self.route, pooled) {
            (Route::PlugIn, _) => Err(invalid("the plug-in route has no skewness constant")),
            (Route::Cdf { .. }, false) => ctx
                .residuals
                .get(&area)
                .cloned()
                .ok_or(Error::NoSampledUnits(area)),
            (Route::Cdf { .. }, true) => Ok(crate::data::pooled_residuals(ctx.residuals)),
            (Route::If { .. }, false) => {
                gini_pseudo_residuals(ctx.fit, ctx.population, area, ctx.settings.zeta_reference)
            }
            (Route::If { .. }, true) => {
                let mut pooled = Vec::new();
                for h in ctx.population.areas().iter().filter(|h| h.is_sampled()) {
                    pooled.extend(gini_pseudo_residuals(
                        ctx.fit,
                        ctx.population,
                        h.id,
                        ctx.settings.zeta_reference,
                    )?);
                }
                if pooled.is_empty() {
                    return Err(Error::Empty("no sampled areas to pool pseudo-residuals from"));
                }
                Ok(pooled)
            }
        }
    }

    /// Resolves the skewness constant. `Fixed` and `PerArea` values pass
    /// through untouched. `Auto` counts the block's sign imbalance and
    /// orients the window per route: the distribution-function route applies
    /// the window *against* the block's long tail (the reciprocal of the
    /// count ratio), truncating the heavy side harder and keeping the full
    /// reach of the short side — the grid adjustments reproduce the residual
    /// distribution, so leaning against its long tail is what keeps lucky
    /// tail draws from blowing up the calibrated spread. The linearized
    /// route applies the window *with* the long tail (the count ratio
    /// itself), because there the winsorised term is an additive correction
    /// whose job is to restore exactly the tail mass a symmetric clip
    /// removes.
    fn resolve_gamma(&self, ctx: &MethodContext<'_>, area: AreaId) -> Result<f64> {
        match &ctx.settings.gamma {
            GammaSpec::Fixed(g) => Ok(*g),
            GammaSpec::PerArea(map) => map.get(&area).copied().ok_or_else(|| {
                invalid(format!("no skewness constant supplied for area {area}"))
            }),
            GammaSpec::Auto => {
                let block = self.gamma_block(ctx, area)?;
                let counted = gamma_from_residuals(&block, ctx.settings.gamma_centering)?.0;
                Ok(match self.route {
                    Route::Cdf { .. } => 1.0 / counted,
                    _ => counted,
                })
            }
        }
    }
}

impl GiniMethod for BuiltinMethod {
    fn name(&self) -> &'static str {
        self.name
    }

    fn fit_flavor(&self) -> FitFlavor {
        self.flavor
    }

    fn estimate_area(&self, ctx: &MethodContext<'_>, area: AreaId) -> Result<AreaEstimate> {
        let expected = match self.flavor {
            FitFlavor::Mq => FitKind::Mq,
            FitFlavor::Reblup | FitFlavor::Eblup => FitKind::Reblup,
        };
        if ctx.fit.kind() != expected {
            return Err(invalid(format!(
                "method `{}` needs a {:?} fit, got {:?}",
                self.name,
                expected,
                ctx.fit.kind()
            )));
        }
        let (value, c_used, gamma_used) = match self.route {
            Route::PlugIn => {
                let a = ctx.population.area(area)?;
                let mut values = ctx.fit.fitted_sampled(&a.sampled, area)?;
                values.extend(ctx.fit.predict_unsampled(ctx.population, area)?.values);
                (crate::functional::empirical_gini(&values)?, None, None)
            }
            Route::Cdf { method, default_c, asymmetric } => {
                let c = ctx.settings.c.or(default_c);
                let gamma = if asymmetric { self.resolve_gamma(ctx, area)? } else { 1.0 };
                let cdf = if method == CdfMethod::Naive {
                    // The mixed plug-in needs no residuals, so it is
                    // scope-free and also serves areas without sampled units.
                    crate::cdf::cdf_naive(ctx.fit, ctx.population, area)?
                } else {
                    let spec = CalibrationSpec {
                        method,
                        c: ConstantMap::Scalar(c.unwrap_or(1.0)),
                        gamma: ConstantMap::Scalar(gamma),
                        scale: ctx.settings.cdf_scale,
                        scope: ctx.settings.scope,
                    };
                    estimate_cdf(ctx.fit, ctx.residuals, ctx.population, area, &spec)?
                };
                let needs_constants =
                    matches!(method, CdfMethod::Wr | CdfMethod::Sbc | CdfMethod::Abc);
                (
                    gini_from_cdf(&cdf)?,
                    if needs_constants { c } else { None },
                    if asymmetric { Some(gamma) } else { None },
                )
            }
            Route::If { default_c, asymmetric } => {
                let c = ctx.settings.c.unwrap_or(default_c);
                let gamma = if asymmetric { self.resolve_gamma(ctx, area)? } else { 1.0 };
                let spec = IfSpec {
                    c: ConstantMap::Scalar(c),
                    gamma: ConstantMap::Scalar(gamma),
                    scale: ctx.settings.if_scale,
                    scale_base: ctx.settings.if_scale_base,
                    reference: ctx.settings.zeta_reference,
                };
                let est = match ctx.settings.scope {
                    Scope::Partial => if_calibrated_gini(ctx.fit, ctx.population, area, &spec)?,
                    Scope::Full => if_calibrated_gini_full(ctx.fit, ctx.population, area, &spec)?,
                };
                (est.value, Some(c), if asymmetric { Some(gamma) } else { None })
            }
        };
        Ok(AreaEstimate {
            area,
            value,
            c: c_used,
            gamma: gamma_used,
            out_of_range: !(0.0..=1.0).contains(&value),
            used_median_effect: ctx.fit.uses_median_effect(area),
        })
    }
}

/// Name-keyed method registry.
pub struct MethodRegistry {
    methods: BTreeMap<&'static str, Box<dyn GiniMethod>>,
}

impl MethodRegistry {
    /// Empty registry.
    pub fn new() -> Self {
        MethodRegistry { methods: BTreeMap::new() }
    }

    /// Registry with every built-in method.
    ///
    /// | name | fit | estimator |
    /// |------|-----|-----------|
    /// | `eblup` | non-robust | model plug-in (fitted + predicted values) |
    /// | `reblup` | robust | model plug-in (fitted + predicted values) |
    /// | `reblup-naive` | robust | mixed plug-in CDF (observed + predicted) |
    /// | `reblup-cd` | robust | residual-smeared CDF |
    /// | `reblup-wr` | robust | winsorised-residual CDF (c = 3) |
    /// | `reblup-bc` | robust | bias-calibrated CDF, raw residuals |
    /// | `reblup-sbc` | robust | symmetric calibration (c = 3) |
    /// | `reblup-abc` | robust | asymmetric calibration (c = 3) |
    /// | `mq-sbc` | M-quantile | symmetric calibration (c = 3) |
    /// | `mq-abc` | M-quantile | asymmetric calibration (c = 3) |
    /// | `if-sbc` | robust | linearized, symmetric (c = 2) |
    /// | `if-abc` | robust | linearized, asymmetric (c = 2) |
    pub fn with_builtins() -> Self {
        let mut r = MethodRegistry::new();
        let cdf = |name, flavor, method, default_c, asymmetric| BuiltinMethod {
            name,
            flavor,
            route: Route::Cdf { method, default_c, asymmetric },
        };
        let linearized = |name, default_c, asymmetric| BuiltinMethod {
            name,
            flavor: FitFlavor::Reblup,
            route: Route::If { default_c, asymmetric },
        };
        r.register(Box::new(BuiltinMethod {
            name: "eblup",
            flavor: FitFlavor::Eblup,
            route: Route::PlugIn,
        }));
        r.register(Box::new(BuiltinMethod {
            name: "reblup",
            flavor: FitFlavor::Reblup,
            route: Route::PlugIn,
        }));
        r.register(Box::new(cdf("reblup-naive", FitFlavor::Reblup, CdfMethod::Naive, None, false)));
        r.register(Box::new(cdf("reblup-cd", FitFlavor::Reblup, CdfMethod::Cd, None, false)));
        r.register(Box::new(cdf("reblup-wr", FitFlavor::Reblup, CdfMethod::Wr, Some(3.0), false)));
        r.register(Box::new(cdf("reblup-bc", FitFlavor::Reblup, CdfMethod::Bc, None, false)));
        r.register(Box::new(cdf("reblup-sbc", FitFlavor::Reblup, CdfMethod::Sbc, Some(3.0), false)));
        r.register(Box::new(cdf("reblup-abc", FitFlavor::Reblup, CdfMethod::Abc, Some(3.0), true)));
        r.register(Box::new(cdf("mq-sbc", FitFlavor::Mq, CdfMethod::Sbc, Some(3.0), false)));
        r.register(Box::new(cdf("mq-abc", FitFlavor::Mq, CdfMethod::Abc, Some(3.0), true)));
        r.register(Box::new(linearized("if-sbc", 2.0, false)));
        r.register(Box::new(linearized("if-abc", 2.0, true)));
        r
    }

    /// Adds or replaces a method under its own name.
    pub fn register(&mut self, method: Box<dyn GiniMethod>) {
        self.methods.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Option<&dyn GiniMethod> {
        self.methods.get(name).map(|b| b.as_ref())
    }

    /// Registered names, sorted.
    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        MethodRegistry::with_builtins()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Area, CensusUnit, Sample, SampledUnit};
    use crate::fit::{fit_mq, fit_reblup, MqOptions, ReblupOptions, EBLUP_C};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn toy() -> (Sample, Population) {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let norm = Normal::new(0.0f64, 1.0).expect("normal");
        let mut areas = Vec::new();
        for j in 0..4u32 {
            let u = norm.sample(&mut rng);
            let mut sampled = Vec::new();
            let mut unsampled = Vec::new();
            for i in 0..25 {
                let x = (1.0 + 0.5 * norm.sample(&mut rng)).exp();
                let y = (20.0 + 3.0 * x + u + norm.sample(&mut rng)).max(0.0);
                if i < 8 {
                    sampled.push(SampledUnit { x: vec![1.0, x], y });
                } else {
                    unsampled.push(CensusUnit { x: vec![1.0, x], y: None });
                }
            }
            areas.push(Area { id: j, sampled, unsampled });
        }
        let pop = Population::new(areas).expect("population");
        let sample = Sample::from_population(&pop).expect("sample");
        (sample, pop)
    }

    #[test]
    fn registry_lists_all_builtins() {
        let reg = MethodRegistry::with_builtins();
        assert_eq!(
            reg.names(),
            vec![
                "eblup",
                "if-abc",
                "if-sbc",
                "mq-abc",
                "mq-sbc",
                "reblup",
                "reblup-abc",
                "reblup-bc",
                "reblup-cd",
                "reblup-naive",
                "reblup-sbc",
                "reblup-wr",
            ]
        );
        assert!(reg.get("nonexistent").is_none());
    }

    #[test]
    fn every_builtin_estimates_the_toy() {
        let (sample, pop) = toy();
        let reg = MethodRegistry::with_builtins();
        let reblup = fit_reblup(&sample, &ReblupOptions::default()).expect("reblup");
        let eblup = fit_reblup(&sample, &ReblupOptions::with_c(EBLUP_C)).expect("eblup");
        let mq = fit_mq(&sample, &MqOptions::default()).expect("mq");
        let settings = MethodSettings::default();
        for name in reg.names() {
            let method = reg.get(name).expect("registered");
            let fit = match method.fit_flavor() {
                FitFlavor::Reblup => &reblup,
                FitFlavor::Eblup => &eblup,
                FitFlavor::Mq => &mq,
            };
            let residuals = fit.residuals(&sample).expect("residuals");
            let ctx = MethodContext { fit, residuals: &residuals, population: &pop, settings: &settings };
            for area in pop.sampled_area_ids() {
                let est = method.estimate_area(&ctx, area).expect(name);
                assert!(est.value.is_finite(), "{name} area {area}");
                assert!(!est.used_median_effect);
            }
        }
    }

    #[test]
    fn abc_with_gamma_one_matches_sbc_exactly() {
        let (sample, pop) = toy();
        let reg = MethodRegistry::with_builtins();
        let fit = fit_reblup(&sample, &ReblupOptions::default()).expect("fit");
        let residuals = fit.residuals(&sample).expect("residuals");
        let symmetric = MethodSettings { gamma: GammaSpec::Fixed(1.0), ..Default::default() };
        let ctx = MethodContext { fit: &fit, residuals: &residuals, population: &pop, settings: &symmetric };
        for (abc, sbc) in [("reblup-abc", "reblup-sbc"), ("if-abc", "if-sbc")] {
            let a = reg.get(abc).expect("abc");
            let s = reg.get(sbc).expect("sbc");
            for area in pop.sampled_area_ids() {
                let ea = a.estimate_area(&ctx, area).expect(abc);
                let es = s.estimate_area(&ctx, area).expect(sbc);
                assert_eq!(ea.value, es.value, "{abc} vs {sbc} area {area}");
            }
        }
    }

    #[test]
    fn gamma_sources_resolve_per_area_and_auto() {
        let (sample, pop) = toy();
        let reg = MethodRegistry::with_builtins();
        let fit = fit_reblup(&sample, &ReblupOptions::default()).expect("fit");
        let residuals = fit.residuals(&sample).expect("residuals");
        let auto = MethodSettings::default();
        let ctx = MethodContext { fit: &fit, residuals: &residuals, population: &pop, settings: &auto };
        let method = reg.get("reblup-abc").expect("abc");
        let est = method.estimate_area(&ctx, 0).expect("estimate");
        let pooled = crate::data::pooled_residuals(&residuals);
        let expected = 1.0 / gamma_from_residuals(&pooled, Centering::Mean).expect("gamma").0;
        assert_eq!(est.gamma, Some(expected));
        assert_eq!(est.c, Some(3.0));

        let per_area =
            MethodSettings { gamma_pooling: GammaPooling::PerArea, ..Default::default() };
        let ctx_pa =
            MethodContext { fit: &fit, residuals: &residuals, population: &pop, settings: &per_area };
        let est_pa = method.estimate_area(&ctx_pa, 0).expect("estimate");
        let own = 1.0 / gamma_from_residuals(&residuals[&0], Centering::Mean).expect("gamma").0;
        assert_eq!(est_pa.gamma, Some(own));

        let mut map = BTreeMap::new();
        for area in pop.sampled_area_ids() {
            map.insert(area, 1.25);
        }
        let fixed = MethodSettings { gamma: GammaSpec::PerArea(map), ..Default::default() };
        let ctx2 = MethodContext { fit: &fit, residuals: &residuals, population: &pop, settings: &fixed };
        let est2 = method.estimate_area(&ctx2, 0).expect("estimate");
        assert_eq!(est2.gamma, Some(1.25));
    }

    #[test]
    fn mq_methods_reject_mixed_model_fit() {
        let (sample, pop) = toy();
        let reg = MethodRegistry::with_builtins();
        let fit = fit_reblup(&sample, &ReblupOptions::default()).expect("fit");
        let residuals = fit.residuals(&sample).expect("residuals");
        let settings = MethodSettings::default();
        let ctx = MethodContext { fit: &fit, residuals: &residuals, population: &pop, settings: &settings };
        let err = reg.get("mq-abc").expect("mq").estimate_area(&ctx, 0).expect_err("wrong fit");
        assert!(matches!(err, Error::Invalid(_)));
    }
}
