//! Acceptance suite: every shipped claim of the laboratory, one test per
//! criterion, each printing a PASS/FAIL line (run with `-- --nocapture` to
//! see them). The heavy metric-powers Monte Carlo (5 degrees x 2000 samples,
//! companion solves up to degree 400) runs once and feeds the count, rate,
//! and exception criteria; expect tens of minutes on one core.

mod common;

use std::sync::OnceLock;

use num_complex::Complex64;
use zerocurrents_core::basis::SectionBasis;
use zerocurrents_core::bergman::{check_bergman_bounds, OrthonormalFrame};
use zerocurrents_core::discrepancy::{
    degrees, exception_rate, expected_zero_current_check, fs_current_discrepancy, rate_fit,
    run_samples, summarize, RunStats, ZeroExperiment,
};
use zerocurrents_core::ensembles::{sample_fs, EnsembleSpec};
use zerocurrents_core::grid::{build_grid, QuadratureGrid};
use zerocurrents_core::growth::verify_growth;
use zerocurrents_core::metrics::{
    check_curvature_convergence, BundleSequence, LimitCurrent, MetricWeight, Psi0,
};
use zerocurrents_core::rng::stream_rng;
use zerocurrents_core::space::ModelSpace;
use zerocurrents_core::testfn::{cp1_dictionary, cp1xcp1_dictionary, TestFunction};
use zerocurrents_core::zeros::common_zeros_p1xp1;

const SEED: u64 = 20260808;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

// ---------------------------------------------------------------------------
// shared metric-powers run (criteria 3, 5, 8)
// ---------------------------------------------------------------------------

struct PowersRun {
    grid: QuadratureGrid,
    seq: BundleSequence,
    dict: Vec<TestFunction>,
    stats: Vec<RunStats>,
}

fn powers_sequence(grid: &QuadratureGrid) -> BundleSequence {
    let p_list = vec![25u32, 50, 100, 200, 400];
    let tau0 = 0.49;
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
        p_list,
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

fn powers_run() -> &'static PowersRun {
    static RUN: OnceLock<PowersRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let grid = build_grid(ModelSpace::Cp1, 512).unwrap();
        let seq = powers_sequence(&grid);
        let dict = cp1_dictionary(&grid);
        let spec = EnsembleSpec::fs(1, SEED);
        let mut stats = Vec::new();
        for ip in 0..seq.p_list.len() {
            let exp = ZeroExperiment::build(&seq, &grid, ip).unwrap();
            stats.push(run_samples(&exp, &spec, &dict, 2000).unwrap());
        }
        PowersRun {
            grid,
            seq,
            dict,
            stats,
        }
    })
}

// ---------------------------------------------------------------------------
// shared m = 2 Monte Carlo (criteria 3 and 4)
// ---------------------------------------------------------------------------

struct M2Run {
    stats: RunStats,
    dict: Vec<TestFunction>,
}

fn m2run() -> &'static M2Run {
    static RUN: OnceLock<M2Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let grid = build_grid(ModelSpace::Cp1xCp1, 16).unwrap();
        let dict = cp1xcp1_dictionary(&grid);
        let p_list = vec![1u32];
        let w1 = MetricWeight::pure_fs(ModelSpace::Cp1xCp1, [2, 1]).unwrap();
        let w2 = MetricWeight::pure_fs(ModelSpace::Cp1xCp1, [1, 2]).unwrap();
        let seq = BundleSequence::new(
            ModelSpace::Cp1xCp1,
            p_list,
            vec![vec![w1], vec![w2]],
            vec![vec![3.0], vec![3.0]],
            vec![
                LimitCurrent {
                    fs: [2.0 / 3.0, 1.0 / 3.0],
                    cap: [0.0, 0.0],
                },
                LimitCurrent {
                    fs: [1.0 / 3.0, 2.0 / 3.0],
                    cap: [0.0, 0.0],
                },
            ],
            vec![1.0, 1.0],
            1.0,
            &grid,
        )
        .unwrap();
        let exp = ZeroExperiment::build(&seq, &grid, 0).unwrap();
        let spec = EnsembleSpec::fs(2, SEED);
        let stats = run_samples(&exp, &spec, &dict, 2000).unwrap();
        M2Run { stats, dict }
    })
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_bergman_constancy_and_trace() {
    let grid = build_grid(ModelSpace::Cp1, 256).unwrap();
    let mut worst_const: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for d in [5u32, 20, 100] {
        let basis = SectionBasis::new(ModelSpace::Cp1, [d, 0]).unwrap();
        let w = MetricWeight::pure_fs(ModelSpace::Cp1, [d, 0]).unwrap();
        let frame = OrthonormalFrame::build(basis, w, &grid).unwrap();
        let b = frame.bergman_on_grid(&grid);
        let target = (d + 1) as f64;
        for v in &b {
            worst_const = worst_const.max((v - target).abs() / target);
        }
        let integral = grid.integrate(&b);
        worst_trace = worst_trace.max((integral - target).abs());
    }
    verdict(
        "1 (Bergman constancy & trace identity)",
        worst_const <= 1e-5 && worst_trace <= 1e-5,
        &format!("max |B-(d+1)|/(d+1) = {worst_const:.3e}, max |int B - (d+1)| = {worst_trace:.3e}"),
    );
}

fn assump_sequence(grid: &QuadratureGrid) -> BundleSequence {
    let p_list = vec![25u32, 50, 100, 200];
    let weights: Vec<MetricWeight> = p_list
        .iter()
        .map(|&p| MetricWeight::new(ModelSpace::Cp1, [p, 0], 1.0, Psi0::Cap { amp: 0.5 }).unwrap())
        .collect();
    let scales: Vec<f64> = p_list.iter().map(|&p| p as f64).collect();
    BundleSequence::new(
        ModelSpace::Cp1,
        p_list,
        vec![weights],
        vec![scales],
        vec![LimitCurrent::fs_cp1()],
        vec![1.0],
        0.625,
        grid,
    )
    .unwrap()
}

#[test]
fn criterion_02_assumption_verification() {
    let grid = build_grid(ModelSpace::Cp1, 256).unwrap();
    let seq = assump_sequence(&grid);
    let rep1 = check_bergman_bounds(&seq, &grid, &seq.p_list.clone()).unwrap();
    let m0_bound = (2.0f64 * 0.5).exp() * 1.1;
    let rep2 = check_curvature_convergence(&seq, &grid, &seq.p_list.clone()).unwrap();
    verdict(
        "2 (Bergman bounds & curvature convergence)",
        rep1.pass && rep1.m0_estimate <= m0_bound && rep2.pass,
        &format!(
            "M0 = {:.4} (bound {:.4}), curvature convergence pass = {}, first_fail = {:?}",
            rep1.m0_estimate, m0_bound, rep2.pass, rep2.first_fail
        ),
    );
}

#[test]
fn criterion_03_zero_count_hard_assertion() {
    let run = powers_run();
    let m2 = m2run();
    let mut total = 0usize;
    let mut counts = true;
    let mut max_res: f64 = 0.0;
    for st in &run.stats {
        total += st.accepted;
        counts &= st.counts_exact;
        max_res = max_res.max(st.max_residual);
    }
    total += m2.stats.accepted;
    counts &= m2.stats.counts_exact;
    max_res = max_res.max(m2.stats.max_residual);
    verdict(
        "3 (exact zero counts over >= 1e4 samples)",
        counts && total >= 10_000 && max_res <= 1e-8,
        &format!("{total} accepted samples, counts exact = {counts}, max residual = {max_res:.3e}"),
    );
}

#[test]
fn criterion_04_expected_zero_current_identity() {
    // m = 1, d = 20, FS metric and ensemble
    let grid = build_grid(ModelSpace::Cp1, 256).unwrap();
    let dict = cp1_dictionary(&grid);
    let p_list = vec![20u32];
    let w = MetricWeight::pure_fs(ModelSpace::Cp1, [20, 0]).unwrap();
    let seq = BundleSequence::new(
        ModelSpace::Cp1,
        p_list,
        vec![vec![w]],
        vec![vec![20.0]],
        vec![LimitCurrent::fs_cp1()],
        vec![1.0],
        1.0,
        &grid,
    )
    .unwrap();
    let exp = ZeroExperiment::build(&seq, &grid, 0).unwrap();
    let stats = run_samples(&exp, &EnsembleSpec::fs(1, SEED), &dict, 2000).unwrap();
    let rows = expected_zero_current_check(&stats, &dict);
    let m1_pass = rows.iter().all(|r| r.pass);
    let m1_worst = rows
        .iter()
        .map(|r| (r.mc_mean - r.gamma_pair).abs() / r.tol.max(1e-300))
        .fold(0.0f64, f64::max);

    // m = 2, bidegrees (2,1) and (1,2)
    let m2 = m2run();
    let rows2 = expected_zero_current_check(&m2.stats, &m2.dict);
    let m2_pass = rows2.iter().all(|r| r.pass);
    let m2_worst = rows2
        .iter()
        .map(|r| (r.mc_mean - r.gamma_pair).abs() / r.tol.max(1e-300))
        .fold(0.0f64, f64::max);

    verdict(
        "4 (Monte Carlo expected-zero-current identity)",
        m1_pass && m2_pass,
        &format!("worst |diff|/tol: m=1 {m1_worst:.3}, m=2 {m2_worst:.3} (3 sigma bands)"),
    );
}

#[test]
fn criterion_05_rate_shape_powers_run() {
    let run = powers_run();
    let mut means = Vec::new();
    let mut bounds = Vec::new();
    for (ip, st) in run.stats.iter().enumerate() {
        let s = summarize(st);
        means.push(s.mean);
        let sum_a = run.seq.scale_sum(ip);
        bounds.push(sum_a.ln() / sum_a);
    }
    let fit = rate_fit(&means, &bounds).unwrap();
    verdict(
        "5 (discrepancy rate shape, metric-power scenario)",
        (0.7..=1.3).contains(&fit.slope) && fit.c_stability <= 2.0 && !fit.trivial,
        &format!(
            "log-log slope = {:.4} (band [0.7, 1.3]), fitted C = {:.4}, C stability = {:.4} (<= 2)",
            fit.slope, fit.c_fit, fit.c_stability
        ),
    );
}

#[test]
fn criterion_06_fs_current_convergence() {
    let grid = build_grid(ModelSpace::Cp1, 256).unwrap();
    let dict = cp1_dictionary(&grid);
    let seq = assump_sequence(&grid);
    let p_list = seq.p_list.clone();
    let rows = fs_current_discrepancy(&seq, &grid, &p_list, &dict).unwrap();
    // fitted C against log A/A + A^{-1}
    let cs: Vec<f64> = rows.iter().map(|r| r.fitted_c).collect();
    let cmax = cs.iter().fold(0.0f64, |a, &b| a.max(b));
    let cmin = cs.iter().fold(f64::INFINITY, |a, &b| a.min(b));

    // pure-FS control rows
    let control_weights: Vec<MetricWeight> = p_list
        .iter()
        .map(|&p| MetricWeight::pure_fs(ModelSpace::Cp1, [p, 0]).unwrap())
        .collect();
    let control = BundleSequence::new(
        ModelSpace::Cp1,
        p_list.clone(),
        vec![control_weights],
        vec![p_list.iter().map(|&p| p as f64).collect()],
        vec![LimitCurrent::fs_cp1()],
        vec![1.0],
        0.625,
        &grid,
    )
    .unwrap();
    let control_rows = fs_current_discrepancy(&control, &grid, &p_list, &dict).unwrap();
    let control_max = control_rows
        .iter()
        .map(|r| r.max_discrepancy)
        .fold(0.0f64, f64::max);

    verdict(
        "6 (FS-current convergence rate)",
        cmax / cmin <= 2.0 && control_max <= 1e-3,
        &format!(
            "fitted C in [{cmin:.4}, {cmax:.4}] (ratio {:.3} <= 2), pure-FS control max = {control_max:.3e} (<= 1e-3)",
            cmax / cmin
        ),
    );
}

#[test]
fn criterion_07_intermediate_degree_comparability() {
    let grid = build_grid(ModelSpace::Cp1xCp1, 20).unwrap();
    let p_list = vec![2u32, 3, 4, 6, 8];
    let mut w1 = Vec::new();
    let mut w2 = Vec::new();
    let mut scales = Vec::new();
    for &p in &p_list {
        w1.push(MetricWeight::pure_fs(ModelSpace::Cp1xCp1, [2 * p, p]).unwrap());
        w2.push(MetricWeight::pure_fs(ModelSpace::Cp1xCp1, [p, 2 * p]).unwrap());
        scales.push(p as f64);
    }
    let seq = BundleSequence::new(
        ModelSpace::Cp1xCp1,
        p_list.clone(),
        vec![w1, w2],
        vec![scales.clone(), scales],
        vec![
            LimitCurrent {
                fs: [2.0, 1.0],
                cap: [0.0, 0.0],
            },
            LimitCurrent {
                fs: [1.0, 2.0],
                cap: [0.0, 0.0],
            },
        ],
        vec![1.0, 1.0],
        1.0,
        &grid,
    )
    .unwrap();
    let mut d1_window = (f64::INFINITY, 0.0f64);
    let mut d2_window = (f64::INFINITY, 0.0f64);
    for &p in &p_list {
        let d = degrees(&seq, &grid, p).unwrap();
        d1_window = (d1_window.0.min(d.delta1_over_prod), d1_window.1.max(d.delta1_over_prod));
        d2_window = (
            d2_window.0.min(d.delta2_comparability),
            d2_window.1.max(d.delta2_comparability),
        );
    }
    verdict(
        "7 (intermediate degree comparability)",
        d1_window.1 / d1_window.0 <= 2.0 && d2_window.1 / d2_window.0 <= 2.0,
        &format!(
            "delta1/prodA window [{:.4}, {:.4}], delta2*sumA/prodA window [{:.4}, {:.4}]",
            d1_window.0, d1_window.1, d2_window.0, d2_window.1
        ),
    );
}

#[test]
fn criterion_08_exception_frequencies() {
    let run = powers_run();
    let (rows, alpha) = exception_rate(&run.seq, &run.grid, &run.stats, 0.032).unwrap();
    let freqs: Vec<f64> = rows.iter().map(|r| r.frequency).collect();
    let nonincreasing = freqs.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let nonzero = rows.iter().filter(|r| r.exceed_count > 0).count();
    let alpha_ok = nonzero < 2 || alpha.map(|a| a > 0.0).unwrap_or(false);
    let zero_rows_bounded = rows
        .iter()
        .filter(|r| r.exceed_count == 0)
        .all(|r| (r.freq_upper - 3.0 / r.n as f64).abs() < 1e-15);
    verdict(
        "8 (exception-set exceedance frequencies)",
        nonincreasing && alpha_ok && zero_rows_bounded,
        &format!("frequencies {freqs:?}, alpha_hat = {alpha:?}"),
    );
}

#[test]
fn criterion_09_dimension_growth() {
    // CP^1: d_p = A_p = p
    let entries1: Vec<(u32, f64, u64)> = [25u32, 50, 100, 200, 400]
        .iter()
        .map(|&p| (p, p as f64, p as u64 + 1))
        .collect();
    let g1 = verify_growth(&entries1, 1, 0.5).unwrap();
    // CP^1 x CP^1: bidegree (p, p), A_p = p
    let entries2: Vec<(u32, f64, u64)> = [50u32, 100, 200, 400]
        .iter()
        .map(|&p| (p, p as f64, (p as u64 + 1) * (p as u64 + 1)))
        .collect();
    let g2 = verify_growth(&entries2, 2, 0.5).unwrap();
    verdict(
        "9 (dimension growth & jet bound)",
        g1.converged_1pct
            && g2.converged_1pct
            && g1.c3 >= 0.9
            && g2.c3 >= 0.9
            && g1.jet_bound_ok
            && g2.jet_bound_ok,
        &format!(
            "CP1: C3 = {:.4}, tail var {:.4e}; CP1xCP1: C3 = {:.4}, tail var {:.4e}",
            g1.c3, g1.tail_variation, g2.c3, g2.tail_variation
        ),
    );
}

#[test]
fn criterion_10_oracle_equivalence() {
    // 100 random instances with total count <= 6 against the brute-force
    // grid + Newton oracle
    let cases: Vec<([u32; 2], [u32; 2])> = vec![
        ([1, 1], [1, 1]), // 2 zeros
        ([2, 1], [1, 2]), // 5 zeros
        ([1, 0], [0, 1]), // 1 zero
        ([2, 0], [0, 2]), // 4 zeros
    ];
    let mut worst: f64 = 0.0;
    let mut instances = 0usize;
    for (ci, (deg1, deg2)) in cases.iter().cycle().take(100).enumerate() {
        let b1 = SectionBasis::new(ModelSpace::Cp1xCp1, *deg1).unwrap();
        let b2 = SectionBasis::new(ModelSpace::Cp1xCp1, *deg2).unwrap();
        let mut r1 = stream_rng(SEED, 31, ci as u32, 0);
        let mut r2 = stream_rng(SEED, 32, ci as u32, 0);
        let c1 = sample_fs(b1.n(), &mut r1);
        let c2 = sample_fs(b2.n(), &mut r2);
        let zs = common_zeros_p1xp1(&b1, &c1, &b2, &c2).unwrap();
        // raw coefficient matrices for the oracle
        let raw = |basis: &SectionBasis, c: &[Complex64]| -> Vec<Vec<Complex64>> {
            let rows = basis.degrees[0] as usize + 1;
            let cols = basis.degrees[1] as usize + 1;
            let mut a = vec![vec![Complex64::new(0.0, 0.0); cols]; rows];
            for (idx, e) in basis.exps.iter().enumerate() {
                a[e[0] as usize][e[1] as usize] = c[idx] * basis.monomial_scale(idx);
            }
            a
        };
        let oracle = common::brute_force_common_zeros(
            &raw(&b1, &c1),
            (deg1[0], deg1[1]),
            &raw(&b2, &c2),
            (deg2[0], deg2[1]),
        );
        assert_eq!(
            oracle.len() as u64,
            zs.total_multiplicity(),
            "oracle found {} zeros, solver {} (instance {ci})",
            oracle.len(),
            zs.total_multiplicity()
        );
        // Hausdorff distance between the point sets (chordal, max over factors)
        let mut h: f64 = 0.0;
        for (p, _) in &zs.points {
            let z1 = p.factor(0);
            let z2 = p.factor(1);
            let best = oracle
                .iter()
                .map(|(w1, w2)| {
                    let d1 = zerocurrents_core::space::FactorPoint::from_z(*w1)
                        .chordal_distance(z1);
                    let d2 = zerocurrents_core::space::FactorPoint::from_z(*w2)
                        .chordal_distance(z2);
                    d1.max(d2)
                })
                .fold(f64::INFINITY, f64::min);
            h = h.max(best);
        }
        for (w1, w2) in &oracle {
            let o1 = zerocurrents_core::space::FactorPoint::from_z(*w1);
            let o2 = zerocurrents_core::space::FactorPoint::from_z(*w2);
            let best = zs
                .points
                .iter()
                .map(|(p, _)| {
                    p.factor(0)
                        .chordal_distance(o1)
                        .max(p.factor(1).chordal_distance(o2))
                })
                .fold(f64::INFINITY, f64::min);
            h = h.max(best);
        }
        worst = worst.max(h);
        instances += 1;
    }
    verdict(
        "10 (resultant vs brute-force oracle)",
        instances == 100 && worst <= 1e-8,
        &format!("{instances} instances, worst Hausdorff distance = {worst:.3e}"),
    );
}
