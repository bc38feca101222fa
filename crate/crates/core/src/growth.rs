//! Dimension bookkeeping and the growth lower bound for bundle sequences:
//! exact section-space dimensions, the jet-count combinatorial bound, and
//! the dim / A^n ratio tracking.

use crate::error::{CoreError, Result};
use crate::numeric::binomial_u128;
use crate::space::ModelSpace;

/// dim H^0 = d+1 on CP^1, (a+1)(b+1) on CP^1 x CP^1.
pub fn exact_dimension(space: ModelSpace, degrees: [u32; 2]) -> Result<u64> {
    match space {
        ModelSpace::Cp1 => Ok(degrees[0] as u64 + 1),
        ModelSpace::Cp1xCp1 => Ok((degrees[0] as u64 + 1) * (degrees[1] as u64 + 1)),
    }
}

/// Jet-space dimension count: binom([b A_p], n) - 1, the lower bound
/// certified by the jet surjectivity argument. Returns 0 with the warning
/// flag when [b A_p] < n (bound vacuous).
pub fn jet_lower_bound(a_p: f64, b: f64, n: u32) -> Result<(u64, bool)> {
    if n == 0 {
        return Err(CoreError::InvalidInput(
            "manifold dimension must be at least 1".into(),
        ));
    }
    if !(b > 0.0) || !(a_p > 0.0) {
        return Err(CoreError::InvalidInput("need b > 0 and A_p > 0".into()));
    }
    let ba = (b * a_p).floor() as u64;
    if ba < n as u64 {
        return Ok((0, true));
    }
    let bin = binomial_u128(ba, n as u64)
        .ok_or_else(|| CoreError::Numeric("jet binomial overflow".into()))?;
    let val = bin.saturating_sub(1);
    Ok((u64::try_from(val).map_err(|_| CoreError::Numeric("jet bound overflow".into()))?, false))
}

/// Per-p record of the growth experiment.
#[derive(Debug, Clone)]
pub struct GrowthRecord {
    pub p: u32,
    pub a_p: f64,
    pub dim: u64,
    pub jet_bound: u64,
    pub jet_vacuous: bool,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct GrowthSummary {
    pub records: Vec<GrowthRecord>,
    /// C3 estimate: min over p of dim / A_p^n.
    pub c3: f64,
    /// Max relative change of the ratio over the last three p values.
    pub tail_variation: f64,
    pub converged_1pct: bool,
    /// jet bound <= exact dimension at every p.
    pub jet_bound_ok: bool,
}

/// Track dim / A_p^n across an increasing schedule and compare against the
/// jet lower bound with the given b.
pub fn verify_growth(
    entries: &[(u32, f64, u64)],
    n: u32,
    b: f64,
) -> Result<GrowthSummary> {
    if entries.len() < 3 {
        return Err(CoreError::InvalidInput(
            "growth verification needs at least 3 schedule points".into(),
        ));
    }
    for w in entries.windows(2) {
        if w[1].1 <= w[0].1 {
            return Err(CoreError::InvalidInput("A_p must be increasing".into()));
        }
    }
    let mut records = Vec::with_capacity(entries.len());
    let mut c3 = f64::INFINITY;
    let mut jet_ok = true;
    for &(p, a_p, dim) in entries {
        let ratio = dim as f64 / a_p.powi(n as i32);
        c3 = c3.min(ratio);
        let (jet, vacuous) = jet_lower_bound(a_p, b, n)?;
        if jet > dim {
            jet_ok = false;
        }
        records.push(GrowthRecord {
            p,
            a_p,
            dim,
            jet_bound: jet,
            jet_vacuous: vacuous,
            ratio,
        });
    }
    let tail = &records[records.len() - 3..];
    let mut var: f64 = 0.0;
    for w in tail.windows(2) {
        var = var.max((w[1].ratio - w[0].ratio).abs() / w[0].ratio.abs().max(1e-300));
    }
    Ok(GrowthSummary {
        c3,
        tail_variation: var,
        converged_1pct: var < 0.01,
        jet_bound_ok: jet_ok,
        records,
    })
}
