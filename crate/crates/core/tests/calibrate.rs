//! Manual calibration probes (run with --ignored). These justify the shipped
//! experiment constants; the acceptance suite freezes their outcomes.

use zerocurrents_core::bergman::check_bergman_bounds;
use zerocurrents_core::discrepancy::{rate_fit, run_samples, summarize, ZeroExperiment};
use zerocurrents_core::ensembles::EnsembleSpec;
use zerocurrents_core::grid::build_grid;
use zerocurrents_core::metrics::{BundleSequence, LimitCurrent, MetricWeight, Psi0};
use zerocurrents_core::space::ModelSpace;
use zerocurrents_core::testfn::cp1_dictionary;

fn powers_sequence(p_list: &[u32], tau0: f64, grid: &zerocurrents_core::grid::QuadratureGrid) -> BundleSequence {
    let weights: Vec<MetricWeight> = p_list
        .iter()
        .map(|&p| {
            MetricWeight::new(
                ModelSpace::Cp1,
                [p, 0],
                tau0 * p as f64,
                Psi0::Cap { amp: 1.0 },
            )
            .unwrap()
        })
        .collect();
    let scales: Vec<f64> = p_list.iter().map(|&p| p as f64).collect();
    BundleSequence::new(
        ModelSpace::Cp1,
        p_list.to_vec(),
        vec![weights],
        vec![scales],
        vec![LimitCurrent {
            fs: [1.0, 0.0],
            cap: [tau0, 0.0],
        }],
        vec![1.0],
        1.0,
        grid,
    )
    .unwrap()
}

#[test]
#[ignore]
fn calibrate_powers_rate() {
    let p_list = vec![25u32, 50, 100, 200, 400];
    let n_samples = 500usize;
    for tau0 in [0.49f64, 0.45] {
        let grid = build_grid(ModelSpace::Cp1, 512).unwrap();
        let dict = cp1_dictionary(&grid);
        let seq = powers_sequence(&p_list, tau0, &grid);
        let spec = EnsembleSpec::fs(1, 20260808);
        let mut means = Vec::new();
        let mut bounds = Vec::new();
        println!("=== tau0 = {tau0} ===");
        for (ip, &p) in p_list.iter().enumerate() {
            let t0 = std::time::Instant::now();
            let exp = ZeroExperiment::build(&seq, &grid, ip).unwrap();
            let t1 = std::time::Instant::now();
            let stats = run_samples(&exp, &spec, &dict, n_samples).unwrap();
            let dt = t1.elapsed().as_secs_f64();
            let summary = summarize(&stats);
            let bound = (p as f64).ln() / p as f64;
            println!(
                "p={p}: frame {:.2}s solve {:.3}s/sample mean={:.6e} median={:.6e} bound={:.4e} C={:.4} rej={}",
                (t1 - t0).as_secs_f64(),
                dt / n_samples as f64,
                summary.mean,
                summary.median,
                bound,
                summary.mean / bound,
                stats.rejected
            );
            means.push(summary.mean);
            bounds.push(bound);
        }
        let fit = rate_fit(&means, &bounds).unwrap();
        println!(
            "tau0={tau0}: slope {:.4} +- {:.4}, C {:.4}, stability {:.4}",
            fit.slope, fit.slope_se, fit.c_fit, fit.c_stability
        );
    }
}

#[test]
#[ignore]
fn calibrate_exceptions() {
    let p_list = vec![25u32, 50, 100, 200, 400];
    let grid = build_grid(ModelSpace::Cp1, 512).unwrap();
    let dict = cp1_dictionary(&grid);
    let seq = powers_sequence(&p_list, 0.49, &grid);
    let spec = EnsembleSpec::fs(1, 20260808);
    let mut all_stats = Vec::new();
    for (ip, _) in p_list.iter().enumerate() {
        let exp = ZeroExperiment::build(&seq, &grid, ip).unwrap();
        all_stats.push(run_samples(&exp, &spec, &dict, 500).unwrap());
    }
    for c4 in [0.025f64, 0.03, 0.032, 0.035, 0.04] {
        let (rows, alpha) =
            zerocurrents_core::discrepancy::exception_rate(&seq, &grid, &all_stats, c4).unwrap();
        let freqs: Vec<String> = rows
            .iter()
            .map(|r| format!("{}/{}", r.exceed_count, r.n))
            .collect();
        println!("C4={c4}: freqs {:?} alpha_hat {:?}", freqs, alpha);
    }
}

#[test]
#[ignore]
fn calibrate_bergman_bound_m0() {
    let grid = build_grid(ModelSpace::Cp1, 256).unwrap();
    let p_list = vec![25u32, 50, 100, 200];
    let weights: Vec<MetricWeight> = p_list
        .iter()
        .map(|&p| MetricWeight::new(ModelSpace::Cp1, [p, 0], 1.0, Psi0::Cap { amp: 0.5 }).unwrap())
        .collect();
    let scales: Vec<f64> = p_list.iter().map(|&p| p as f64).collect();
    let seq = BundleSequence::new(
        ModelSpace::Cp1,
        p_list.clone(),
        vec![weights],
        vec![scales],
        vec![LimitCurrent::fs_cp1()],
        vec![1.0],
        0.625,
        &grid,
    )
    .unwrap();
    let rep = check_bergman_bounds(&seq, &grid, &p_list).unwrap();
    println!(
        "M0 = {:.6}, bound e^(2*0.5)*1.1 = {:.6}, trend {:.4}",
        rep.m0_estimate,
        (1.0f64).exp() * 1.1,
        rep.trend_slope
    );
    for r in &rep.rows {
        println!("  p={} min B/A={:.6} max B/A={:.6}", r.p, r.min_ratio, r.max_ratio);
    }
}
