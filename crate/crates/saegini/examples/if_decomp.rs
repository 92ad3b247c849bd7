//! Scratch probe: decompose the linearized estimator on one replicate.

use saegini::cdf::ConstantMap;
use saegini::fit::{fit_reblup, ReblupOptions};
use saegini::functional::{
    gini_pseudo_residuals, if_calibrated_gini, GiniFunctional, IfSpec, LinearizedFunctional,
    WinsorBase, ZetaReference,
};
use saegini::scale::{robust_scale, ScaleKind};
use saegini::sim::{draw_srswor, gen_census, paper_scenarios, Scenario};
use saegini::tuning::replicate_seed;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn probe(sc: &Scenario) {
    let seed = 20260815u64;
    let census = gen_census(sc, replicate_seed(seed, 0, 0)).expect("census");
    let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(seed, 1, 0));
    let (sample, pop) = draw_srswor(&census, sc.sample_per_area, &mut rng).expect("sample");
    let fit = fit_reblup(&sample, &ReblupOptions::with_c(1.345)).expect("fit");

    let mut rows = Vec::new();
    for ca in &census.areas {
        let area = ca.id;
        let truth = ca.true_gini;
        let a = pop.area(area).expect("area");
        let mut y_tilde: Vec<f64> = a.sampled.iter().map(|u| u.y).collect();
        y_tilde.extend(fit.predict_unsampled(&pop, area).expect("preds").values);
        let (t_tilde, mu_tilde) = GiniFunctional.plug_in(&y_tilde).expect("plug");
        let zeta = gini_pseudo_residuals(&fit, &pop, area, ZetaReference::SharedComposite)
            .expect("zeta");
        let w = robust_scale(&zeta, ScaleKind::Qn).expect("w");
        let n = a.n() as f64;
        let big_n = y_tilde.len() as f64;
        let factor = 2.0 / (mu_tilde * big_n) * (big_n - n) / n;
        let sum_raw: f64 = zeta.iter().sum();
        let ceiling = t_tilde + factor * sum_raw;
        let spec_c = |c: f64, g: f64| IfSpec {
            c: ConstantMap::Scalar(c),
            gamma: ConstantMap::Scalar(g),
            scale: ScaleKind::Qn,
            scale_base: WinsorBase::PseudoResiduals,
            reference: ZetaReference::SharedComposite,
        };
        let at = |c: f64, g: f64| {
            if_calibrated_gini(&fit, &pop, area, &spec_c(c, g)).expect("est").value
        };
        rows.push([
            truth,
            t_tilde,
            ceiling,
            at(2.0, 1.0),
            at(5.0, 1.0),
            at(10.0, 1.0),
            at(2.0, 2.0),
            at(2.0, 4.0),
            w / mu_tilde,
            sum_raw / (n * mu_tilde),
        ]);
    }
    let med = |k: usize| {
        let mut v: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    println!(
        "{}: truth {:.3} | T~ {:.3} | ceiling {:.3} | c2 {:.3} c5 {:.3} c10 {:.3} | c2g2 {:.3} c2g4 {:.3} | w/mu {:.4} zbar/mu {:.4}",
        sc.name,
        med(0),
        med(1),
        med(2),
        med(3),
        med(4),
        med(5),
        med(6),
        med(7),
        med(8),
        med(9),
    );
}

fn main() {
    let scenarios = paper_scenarios();
    for idx in [0usize, 4, 5] {
        probe(&scenarios[idx]);
    }
}
