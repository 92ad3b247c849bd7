//! Scratch probe: full six-scenario scorecard at 100 replicates.

use saegini::sim::{paper_scenarios, run_scenario, RunOptions};

fn main() {
    let methods =
        ["reblup", "reblup-sbc", "reblup-abc", "if-sbc", "if-abc"].map(String::from).to_vec();
    let opts = RunOptions { methods, replicates: 100, seed: 20260815, ..Default::default() };

    let truth_targets = [0.20, 0.34, 0.49, 0.20, 0.30, 0.40];
    let abc_rrmse_targets = [0.198, 0.165, 0.159, 0.206, 0.174, 0.164];
    let ifa_bias_targets = [-0.023, -0.059, -0.058, -0.027, -0.050, -0.039];

    for (k, sc) in paper_scenarios().iter().enumerate() {
        let t0 = std::time::Instant::now();
        let res = run_scenario(sc, &opts).expect("run");
        println!(
            "=== {} ({:?}, lambda {}) {:.1}s floored={} flagged={}",
            sc.name,
            sc.centered,
            sc.lambda,
            t0.elapsed().as_secs_f64(),
            res.floored_units,
            res.flooring_flagged
        );
        println!(
            "  true gini {:.4} (target {} +-0.03) {}",
            res.median_true_gini,
            truth_targets[k],
            if (res.median_true_gini - truth_targets[k]).abs() <= 0.03 { "OK" } else { "FAIL" }
        );
        if !res.aborted.is_empty() {
            println!("  ABORTED: {:?} failures {:?}", res.aborted, res.failures);
        }
        let s = |m: &str| res.summary.get(m);
        if let Some(r) = s("reblup") {
            println!(
                "  reblup      bias {:+.3} rrmse {:.3}  (bias <= -0.75) {}",
                r.median_rel_bias,
                r.median_rrmse,
                if r.median_rel_bias <= -0.75 { "OK" } else { "FAIL" }
            );
        }
        if let (Some(sbc), Some(abc)) = (s("reblup-sbc"), s("reblup-abc")) {
            println!("  reblup-sbc  bias {:+.3} rrmse {:.3}", sbc.median_rel_bias, sbc.median_rrmse);
            println!(
                "  reblup-abc  bias {:+.3} rrmse {:.3}  (<= sbc rrmse) {}  (rrmse in {}+-0.05) {}",
                abc.median_rel_bias,
                abc.median_rrmse,
                if abc.median_rrmse <= sbc.median_rrmse { "OK" } else { "FAIL" },
                abc_rrmse_targets[k],
                if (abc.median_rrmse - abc_rrmse_targets[k]).abs() <= 0.05 { "OK" } else { "FAIL" }
            );
        }
        if let (Some(ifs), Some(ifa)) = (s("if-sbc"), s("if-abc")) {
            println!("  if-sbc      bias {:+.3} rrmse {:.3}", ifs.median_rel_bias, ifs.median_rrmse);
            println!(
                "  if-abc      bias {:+.3} rrmse {:.3}  (|bias| <= |sbc bias|) {}  (bias in {}+-0.05) {}",
                ifa.median_rel_bias,
                ifa.median_rrmse,
                if ifa.median_rel_bias.abs() <= ifs.median_rel_bias.abs() { "OK" } else { "FAIL" },
                ifa_bias_targets[k],
                if (ifa.median_rel_bias - ifa_bias_targets[k]).abs() <= 0.05 { "OK" } else { "FAIL" }
            );
        }
    }
}
