//! Pairings, discrepancy statistics, rate fits, intermediate degrees, and
//! exception-set frequency estimation.
//!
//! The per-sample discrepancy is D(s_p, phi) =
//! |<[s_p = 0]/prod A - omega_1 ^...^ omega_m, phi>|; experiments aggregate
//! the max over a fixed test-function dictionary, compare per-p means to the
//! theoretical bound shape, and count threshold exceedances against
//! eps_p = C4 log(sum A)/(sum A) with the delta^1 normalization of the
//! exception-set definition.

use rayon::prelude::*;

use crate::basis::SectionBasis;
use crate::bergman::OrthonormalFrame;
use crate::ensembles::{sample_tuple, EnsembleSpec, SectionTuple};
use crate::error::{CoreError, Result};
use crate::grid::QuadratureGrid;
use crate::metrics::BundleSequence;
use crate::numeric::{linear_fit, pairwise_sum};
use crate::space::ModelSpace;
use crate::testfn::TestFunction;
use crate::zeros::{common_zeros_p1xp1, roots_cp1, zero_measure, AtomicMeasure, ZeroSet};

/// <atomic measure, phi> = sum of mass * phi(point).
pub fn pair_atomic(measure: &AtomicMeasure, phi: &TestFunction) -> f64 {
    let vals: Vec<f64> = measure
        .points
        .iter()
        .map(|(p, mass)| mass * phi.eval(p))
        .collect();
    pairwise_sum(&vals)
}

/// <density, phi> over the grid: sum of weight * density * phi.
pub fn pair_smooth(density: &[f64], phi: &TestFunction, grid: &QuadratureGrid) -> Result<f64> {
    if density.len() != grid.n_nodes() {
        return Err(CoreError::GridMismatch("density vs grid".into()));
    }
    let vals: Vec<f64> = (0..density.len())
        .map(|i| grid.weight(i) * density[i] * phi.eval(&grid.point(i)))
        .collect();
    Ok(pairwise_sum(&vals))
}

/// |<atomic - limit, phi>| for one sample.
pub fn sample_discrepancy(
    atomic: &AtomicMeasure,
    limit_pairing: f64,
    phi: &TestFunction,
) -> f64 {
    (pair_atomic(atomic, phi) - limit_pairing).abs()
}

/// Everything needed to run zero-set experiments at one schedule position.
pub struct ZeroExperiment<'a> {
    pub seq: &'a BundleSequence,
    pub grid: &'a QuadratureGrid,
    pub ip: usize,
    pub frames: Vec<OrthonormalFrame>,
}

impl<'a> ZeroExperiment<'a> {
    pub fn build(seq: &'a BundleSequence, grid: &'a QuadratureGrid, ip: usize) -> Result<Self> {
        let mut frames = Vec::with_capacity(seq.m);
        for k in 0..seq.m {
            let w = seq.weights[k][ip];
            let basis = SectionBasis::new(seq.space, w.degrees)?;
            frames.push(OrthonormalFrame::build(basis, w, grid)?);
        }
        Ok(ZeroExperiment {
            seq,
            grid,
            ip,
            frames,
        })
    }

    /// Same, but with frames supplied by the caller (cache path).
    pub fn with_frames(
        seq: &'a BundleSequence,
        grid: &'a QuadratureGrid,
        ip: usize,
        frames: Vec<OrthonormalFrame>,
    ) -> Self {
        ZeroExperiment {
            seq,
            grid,
            ip,
            frames,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.n()).collect()
    }

    pub fn scale_product(&self) -> f64 {
        self.seq.scale_product(self.ip)
    }

    pub fn solve_tuple(&self, tuple: &SectionTuple) -> Result<ZeroSet> {
        match (self.seq.space, self.seq.m) {
            (ModelSpace::Cp1, 1) => {
                let mono = self.frames[0].monomial_coeffs(&tuple.coeffs[0]);
                roots_cp1(&self.frames[0].basis, &mono)
            }
            (ModelSpace::Cp1xCp1, 2) => {
                let m1 = self.frames[0].monomial_coeffs(&tuple.coeffs[0]);
                let m2 = self.frames[1].monomial_coeffs(&tuple.coeffs[1]);
                common_zeros_p1xp1(&self.frames[0].basis, &m1, &self.frames[1].basis, &m2)
            }
            _ => Err(CoreError::InvalidInput(
                "zero experiments need m = n on the model space".into(),
            )),
        }
    }

    /// Normalized atomic measure [s_p = 0] / prod_k A_kp.
    pub fn atomic(&self, zs: &ZeroSet) -> Result<AtomicMeasure> {
        zero_measure(zs, self.scale_product())
    }

    /// The Fubini-Study product current gamma_1 ^ ... ^ gamma_m / prod A as a
    /// top-degree density against the grid measure.
    pub fn gamma_wedge_density(&self) -> Result<Vec<f64>> {
        let scale = 1.0 / self.scale_product();
        match (self.seq.space, self.seq.m) {
            (ModelSpace::Cp1, 1) => {
                let gamma = self.frames[0].fs_current(self.grid)?;
                Ok(gamma
                    .trace_density(self.grid)?
                    .iter()
                    .map(|v| v * scale)
                    .collect())
            }
            (ModelSpace::Cp1xCp1, 2) => {
                let g1 = self.frames[0].fs_current(self.grid)?;
                let g2 = self.frames[1].fs_current(self.grid)?;
                Ok(g1
                    .wedge_density(&g2, self.grid)?
                    .iter()
                    .map(|v| v * scale)
                    .collect())
            }
            _ => Err(CoreError::InvalidInput("m = n required".into())),
        }
    }
}

/// Monte Carlo statistics of one (p, ensemble, dictionary) run.
#[derive(Debug, Clone)]
pub struct RunStats {
    pub p: u32,
    pub requested: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Per-phi Monte Carlo mean of the atomic pairing.
    pub phi_mc_mean: Vec<f64>,
    /// Per-phi sample standard deviation of the atomic pairing.
    pub phi_mc_std: Vec<f64>,
    /// Per-phi pairing of gamma-wedge / prod A.
    pub phi_gamma_pair: Vec<f64>,
    /// Per-phi pairing of the limit current wedge.
    pub phi_limit_pair: Vec<f64>,
    /// Per accepted sample: max over the dictionary of D(s, phi).
    pub sample_max_d: Vec<f64>,
    /// Per accepted sample and phi: atomic pairings (row-major by sample).
    pub sample_pairings: Vec<Vec<f64>>,
    /// Hard zero-count identity held for every accepted sample.
    pub counts_exact: bool,
    pub max_residual: f64,
}

/// Run N samples at schedule position ip: solve zero sets, pair against the
/// dictionary, and aggregate. Rejections are logged, excluded, and reported.
/// Deterministic for fixed (spec.seed, p, index): parallel map in index
/// order, sequential reduction.
pub fn run_samples(
    exp: &ZeroExperiment,
    spec: &EnsembleSpec,
    dict: &[TestFunction],
    n_samples: usize,
) -> Result<RunStats> {
    let p = exp.seq.p_list[exp.ip];
    let dims = exp.dims();
    let limit_density = exp.seq.limit_wedge_density(exp.grid)?;
    let phi_limit_pair: Vec<f64> = dict
        .iter()
        .map(|phi| pair_smooth(&limit_density, phi, exp.grid))
        .collect::<Result<_>>()?;
    let gamma_density = exp.gamma_wedge_density()?;
    let phi_gamma_pair: Vec<f64> = dict
        .iter()
        .map(|phi| pair_smooth(&gamma_density, phi, exp.grid))
        .collect::<Result<_>>()?;

    let expected_count = intersection_count(exp.seq, exp.ip)?;

    let results: Vec<Result<(Vec<f64>, f64, u64)>> = (0..n_samples)
        .into_par_iter()
        .map(|idx| -> Result<(Vec<f64>, f64, u64)> {
            let tuple = sample_tuple(spec, &dims, p, idx as u64)?;
            let zs = exp.solve_tuple(&tuple)?;
            let atomic = exp.atomic(&zs)?;
            let pairings: Vec<f64> = dict.iter().map(|phi| pair_atomic(&atomic, phi)).collect();
            Ok((pairings, zs.max_residual, zs.total_multiplicity()))
        })
        .collect();

    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut counts_exact = true;
    let mut max_residual: f64 = 0.0;
    let mut sample_pairings: Vec<Vec<f64>> = Vec::with_capacity(n_samples);
    let mut sample_max_d: Vec<f64> = Vec::with_capacity(n_samples);
    for r in results {
        match r {
            Ok((pairings, res, count)) => {
                accepted += 1;
                max_residual = max_residual.max(res);
                if count != expected_count {
                    counts_exact = false;
                }
                let mut mx: f64 = 0.0;
                for (i, v) in pairings.iter().enumerate() {
                    mx = mx.max((v - phi_limit_pair[i]).abs());
                }
                sample_max_d.push(mx);
                sample_pairings.push(pairings);
            }
            Err(CoreError::RejectedSample(_)) => {
                rejected += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if accepted == 0 {
        return Err(CoreError::Numeric("no sample was accepted".into()));
    }
    let nphi = dict.len();
    let mut phi_mc_mean = vec![0.0; nphi];
    let mut phi_mc_std = vec![0.0; nphi];
    for i in 0..nphi {
        let col: Vec<f64> = sample_pairings.iter().map(|row| row[i]).collect();
        let mean = pairwise_sum(&col) / accepted as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (accepted.max(2) - 1) as f64;
        phi_mc_mean[i] = mean;
        phi_mc_std[i] = var.sqrt();
    }
    Ok(RunStats {
        p,
        requested: n_samples,
        accepted,
        rejected,
        phi_mc_mean,
        phi_mc_std,
        phi_gamma_pair,
        phi_limit_pair,
        sample_max_d,
        sample_pairings,
        counts_exact,
        max_residual,
    })
}

/// Exact intersection count of the schedule position: d on CP^1,
/// a1 b2 + a2 b1 on CP^1 x CP^1.
pub fn intersection_count(seq: &BundleSequence, ip: usize) -> Result<u64> {
    match (seq.space, seq.m) {
        (ModelSpace::Cp1, 1) => Ok(seq.weights[0][ip].degrees[0] as u64),
        (ModelSpace::Cp1xCp1, 2) => {
            let d1 = seq.weights[0][ip].degrees;
            let d2 = seq.weights[1][ip].degrees;
            Ok((d1[0] * d2[1] + d2[0] * d1[1]) as u64)
        }
        _ => Err(CoreError::InvalidInput("m = n required".into())),
    }
}

/// One row of the expected-zero-current identity check (exact for the FS
/// product ensemble): |MC mean - gamma pairing| <= 3 std / sqrt(N).
#[derive(Debug, Clone)]
pub struct ExpectedCheckRow {
    pub phi: String,
    pub mc_mean: f64,
    pub gamma_pair: f64,
    pub std: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn expected_zero_current_check(stats: &RunStats, dict: &[TestFunction]) -> Vec<ExpectedCheckRow> {
    dict.iter()
        .enumerate()
        .map(|(i, phi)| {
            let tol = 3.0 * stats.phi_mc_std[i] / (stats.accepted as f64).sqrt();
            let diff = (stats.phi_mc_mean[i] - stats.phi_gamma_pair[i]).abs();
            ExpectedCheckRow {
                phi: phi.id.clone(),
                mc_mean: stats.phi_mc_mean[i],
                gamma_pair: stats.phi_gamma_pair[i],
                std: stats.phi_mc_std[i],
                tol,
                pass: diff <= tol,
            }
        })
        .collect()
}

/// Per-p row of the Fubini-Study current convergence table.
#[derive(Debug, Clone)]
pub struct FsCurrentRow {
    pub p: u32,
    pub max_discrepancy: f64,
    /// sum_k (log A_kp / A_kp + A_kp^{-a_k})
    pub bound: f64,
    pub fitted_c: f64,
}

/// |<gamma-wedge / prod A - limit wedge, phi>| maxed over the dictionary,
/// per p, with the convergence bound column.
pub fn fs_current_discrepancy(
    seq: &BundleSequence,
    grid: &QuadratureGrid,
    p_range: &[u32],
    dict: &[TestFunction],
) -> Result<Vec<FsCurrentRow>> {
    let limit_density = seq.limit_wedge_density(grid)?;
    let mut rows = Vec::new();
    for &p in p_range {
        let ip = seq
            .index_of_p(p)
            .ok_or_else(|| CoreError::InvalidInput(format!("p = {p} not in sequence")))?;
        let exp = ZeroExperiment::build(seq, grid, ip)?;
        let gamma = exp.gamma_wedge_density()?;
        let mut mx: f64 = 0.0;
        for phi in dict {
            let a = pair_smooth(&gamma, phi, grid)?;
            let b = pair_smooth(&limit_density, phi, grid)?;
            mx = mx.max((a - b).abs());
        }
        let mut bound = 0.0;
        for k in 0..seq.m {
            let a = seq.scales[k][ip];
            bound += a.ln() / a + a.powf(-seq.a_rates[k]);
        }
        rows.push(FsCurrentRow {
            p,
            max_discrepancy: mx,
            bound,
            fitted_c: mx / bound,
        });
    }
    Ok(rows)
}

/// Intermediate degrees delta^1, delta^2 of the induced transform at one
/// schedule position, via the curvature-wedge integrals; the bounded
/// normalizing sequence inside delta^2 is taken as 1.
#[derive(Debug, Clone)]
pub struct DegreePair {
    pub p: u32,
    pub delta1: f64,
    pub delta2: f64,
    pub ratio: f64,
    /// delta1 / prod A
    pub delta1_over_prod: f64,
    /// delta2 * sum A / prod A
    pub delta2_comparability: f64,
}

pub fn degrees(seq: &BundleSequence, grid: &QuadratureGrid, p: u32) -> Result<DegreePair> {
    let ip = seq
        .index_of_p(p)
        .ok_or_else(|| CoreError::InvalidInput(format!("p = {p} not in sequence")))?;
    let delta1 = match (seq.space, seq.m) {
        (ModelSpace::Cp1, 1) => seq.weights[0][ip].curvature(grid)?.mass(grid)?,
        (ModelSpace::Cp1xCp1, 2) => {
            let c1 = seq.weights[0][ip].curvature(grid)?;
            let c2 = seq.weights[1][ip].curvature(grid)?;
            grid.integrate(&c1.wedge_density(&c2, grid)?)
        }
        _ => return Err(CoreError::InvalidInput("m = n required".into())),
    };
    // delta^2 = sum_k (d_kp / d_p) int omega ^ (product without k) ^ omega^{n-m}
    let mut dims = Vec::with_capacity(seq.m);
    for k in 0..seq.m {
        let degs = seq.weights[k][ip].degrees;
        let n = match seq.space {
            ModelSpace::Cp1 => (degs[0] + 1) as f64,
            ModelSpace::Cp1xCp1 => ((degs[0] + 1) * (degs[1] + 1)) as f64,
        };
        dims.push(n - 1.0);
    }
    let d_p: f64 = dims.iter().sum();
    let delta2 = match (seq.space, seq.m) {
        (ModelSpace::Cp1, 1) => 1.0,
        (ModelSpace::Cp1xCp1, 2) => {
            let mut acc = 0.0;
            for k in 0..seq.m {
                let other = 1 - k;
                let c_other = seq.weights[other][ip].curvature(grid)?;
                // c_other ^ omega mass = trace mass
                acc += dims[k] / d_p * c_other.mass(grid)?;
            }
            acc
        }
        _ => unreachable!(),
    };
    if delta1 <= 0.0 || delta2 <= 0.0 {
        return Err(CoreError::Numeric(format!(
            "nonpositive intermediate degree (delta1 = {delta1}, delta2 = {delta2})"
        )));
    }
    let prod = seq.scale_product(ip);
    let sum = seq.scale_sum(ip);
    Ok(DegreePair {
        p,
        delta1,
        delta2,
        ratio: delta2 / delta1,
        delta1_over_prod: delta1 / prod,
        delta2_comparability: delta2 * sum / prod,
    })
}

/// Per-p exceedance of the exception-set threshold.
#[derive(Debug, Clone)]
pub struct ExceptionRow {
    pub p: u32,
    pub sum_a: f64,
    pub eps: f64,
    pub threshold: f64,
    pub exceed_count: usize,
    pub n: usize,
    pub frequency: f64,
    /// rule-of-three upper bound reported for zero rows
    pub freq_upper: f64,
}

/// Count samples whose dictionary-sup discrepancy reaches
/// eps_p * delta^1 / prod A with eps_p = c4 log(sum A)/(sum A).
pub fn exception_rate(
    seq: &BundleSequence,
    grid: &QuadratureGrid,
    stats: &[RunStats],
    c4: f64,
) -> Result<(Vec<ExceptionRow>, Option<f64>)> {
    let mut rows = Vec::new();
    for st in stats {
        let ip = seq
            .index_of_p(st.p)
            .ok_or_else(|| CoreError::InvalidInput(format!("p = {} missing", st.p)))?;
        let sum_a = seq.scale_sum(ip);
        let prod_a = seq.scale_product(ip);
        let eps = c4 * sum_a.ln() / sum_a;
        let d1 = degrees(seq, grid, st.p)?.delta1;
        let threshold = eps * d1 / prod_a;
        let exceed = st
            .sample_max_d
            .iter()
            .filter(|v| **v >= threshold)
            .count();
        let n = st.sample_max_d.len();
        let freq = exceed as f64 / n as f64;
        rows.push(ExceptionRow {
            p: st.p,
            sum_a,
            eps,
            threshold,
            exceed_count: exceed,
            n,
            frequency: freq,
            freq_upper: if exceed == 0 { 3.0 / n as f64 } else { freq },
        });
    }
    // log-log fit of frequency against sum A over nonzero rows
    let nz: Vec<&ExceptionRow> = rows.iter().filter(|r| r.exceed_count > 0).collect();
    let alpha_hat = if nz.len() >= 2 {
        let x: Vec<f64> = nz.iter().map(|r| r.sum_a.ln()).collect();
        let y: Vec<f64> = nz.iter().map(|r| r.frequency.ln()).collect();
        Some(-linear_fit(&x, &y).0)
    } else {
        None
    };
    Ok((rows, alpha_hat))
}

/// Least-squares fit of log(mean) against log(bound): slope near one with a
/// stable multiplicative constant certifies the rate shape.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub slope: f64,
    pub slope_se: f64,
    pub c_fit: f64,
    pub c_per_p: Vec<f64>,
    pub c_stability: f64,
    pub trivial: bool,
}

pub fn rate_fit(means: &[f64], bounds: &[f64]) -> Result<RateFit> {
    if means.len() != bounds.len() || means.len() < 4 {
        return Err(CoreError::InvalidInput(
            "rate_fit needs at least 4 aligned (mean, bound) pairs".into(),
        ));
    }
    if means.iter().any(|v| *v == 0.0) {
        return Ok(RateFit {
            slope: 0.0,
            slope_se: 0.0,
            c_fit: 0.0,
            c_per_p: vec![0.0; means.len()],
            c_stability: 1.0,
            trivial: true,
        });
    }
    let x: Vec<f64> = bounds.iter().map(|b| b.ln()).collect();
    let y: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let (slope, intercept, se) = linear_fit(&x, &y);
    let c_per_p: Vec<f64> = means.iter().zip(bounds).map(|(m, b)| m / b).collect();
    let cmax = c_per_p.iter().fold(0.0f64, |a, &b| a.max(b));
    let cmin = c_per_p.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(RateFit {
        slope,
        slope_se: se,
        c_fit: intercept.exp(),
        c_per_p,
        c_stability: cmax / cmin,
        trivial: false,
    })
}

/// Bound terms of the main rate statement at one schedule position:
/// sum_k log A/A, log(sum A)/sum A, sum_k A^{-a_k}.
pub fn bound_terms(seq: &BundleSequence, ip: usize) -> (f64, f64, f64) {
    let mut t1 = 0.0;
    let mut t3 = 0.0;
    for k in 0..seq.m {
        let a = seq.scales[k][ip];
        t1 += a.ln() / a;
        t3 += a.powf(-seq.a_rates[k]);
    }
    let s = seq.scale_sum(ip);
    (t1, s.ln() / s, t3)
}

/// Summary quantiles of the per-sample dictionary-sup discrepancy.
#[derive(Debug, Clone)]
pub struct DiscrepancySummary {
    pub p: u32,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub accepted: usize,
    pub rejected: usize,
}

pub fn summarize(stats: &RunStats) -> DiscrepancySummary {
    let mut v = stats.sample_max_d.clone();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |f: f64| -> f64 {
        if v.is_empty() {
            return f64::NAN;
        }
        let idx = ((v.len() - 1) as f64 * f).round() as usize;
        v[idx]
    };
    DiscrepancySummary {
        p: stats.p,
        mean: pairwise_sum(&v) / v.len() as f64,
        median: q(0.5),
        q10: q(0.1),
        q90: q(0.9),
        accepted: stats.accepted,
        rejected: stats.rejected,
    }
}
