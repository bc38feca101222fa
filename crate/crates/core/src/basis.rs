//! Monomial section bases of O(d) and O(a, b), pre-scaled by the closed-form
//! FS norms so the pure-FS Gram matrix is exactly the identity.
//!
//! The scaled monomial on one factor is sqrt((d+1) C(d,j)) z^j; its FS-metric
//! pointwise norm is
//!
//!   |s_j(z)| e^{-(d/2) log(1+|z|^2)}
//!     = sqrt((d+1) C(d,j)) t^{j/2} (1-t)^{(d-j)/2},
//!
//! bounded and evaluated in log space, which keeps degree ~400 assemblies
//! away from overflow entirely. Raw monomial Grams are catastrophically
//! ill-conditioned at high degree; these are identity plus a well-conditioned
//! perturbation.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::metrics::MetricWeight;
use crate::numeric::ln_binomial;
use crate::space::{ChartPoint, FactorPoint, ModelSpace};

#[derive(Debug, Clone)]
pub struct SectionBasis {
    pub space: ModelSpace,
    pub degrees: [u32; 2],
    /// Exponent per factor for each basis element, row-major in the second
    /// factor: index = j1 * (d2+1) + j2.
    pub exps: Vec<[u32; 2]>,
    /// ln of the FS scaling factor per element.
    pub ln_scales: Vec<f64>,
}

impl SectionBasis {
    pub fn new(space: ModelSpace, degrees: [u32; 2]) -> Result<Self> {
        if space == ModelSpace::Cp1 && degrees[1] != 0 {
            return Err(CoreError::InvalidInput("CP1 basis takes one degree".into()));
        }
        let mut exps = Vec::new();
        let mut ln_scales = Vec::new();
        match space {
            ModelSpace::Cp1 => {
                let d = degrees[0];
                for j in 0..=d {
                    exps.push([j, 0]);
                    ln_scales.push(0.5 * (((d + 1) as f64).ln() + ln_binomial(d, j)));
                }
            }
            ModelSpace::Cp1xCp1 => {
                let (a, b) = (degrees[0], degrees[1]);
                for j1 in 0..=a {
                    for j2 in 0..=b {
                        exps.push([j1, j2]);
                        let ls = 0.5
                            * (((a + 1) as f64).ln()
                                + ln_binomial(a, j1)
                                + ((b + 1) as f64).ln()
                                + ln_binomial(b, j2));
                        exps_check(a, b, j1, j2);
                        ln_scales.push(ls);
                    }
                }
            }
        }
        Ok(SectionBasis {
            space,
            degrees,
            exps,
            ln_scales,
        })
    }

    pub fn n(&self) -> usize {
        self.exps.len()
    }

    /// Multiplicative scale of element `i` (can be ~1e60 at degree 400; fits
    /// in f64 comfortably).
    pub fn monomial_scale(&self, i: usize) -> f64 {
        self.ln_scales[i].exp()
    }

    /// All scaled monomials times e^{-psi(weight)} at a point, the
    /// metric-normalized section values used for Gram assembly, Bergman
    /// kernels, and Kodaira maps.
    pub fn eval_normalized(&self, weight: &MetricWeight, p: &ChartPoint) -> Vec<Complex64> {
        self.eval_impl(weight, p, None)
    }

    /// Values plus per-factor holomorphic z-derivative values, each
    /// normalized by the same e^{-psi}. Needed by the analytic Fubini-Study
    /// current formulas.
    pub fn eval_normalized_with_derivs(
        &self,
        weight: &MetricWeight,
        p: &ChartPoint,
    ) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
        let mut derivs = vec![Vec::new(); self.space.factors()];
        let vals = self.eval_impl(weight, p, Some(&mut derivs));
        (vals, derivs)
    }

    fn eval_impl(
        &self,
        weight: &MetricWeight,
        p: &ChartPoint,
        mut derivs: Option<&mut Vec<Vec<Complex64>>>,
    ) -> Vec<Complex64> {
        assert_eq!(weight.space, self.space);
        assert_eq!(weight.degrees, self.degrees);
        let nf = self.space.factors();
        let extra = -weight.tau * weight.psi0.eval(p);
        // per-factor t, arg z, and ln t / ln(1-t)
        let mut tf = [0.0f64; 2];
        let mut argz = [0.0f64; 2];
        for f in 0..nf {
            let fp: FactorPoint = p.factor(f);
            tf[f] = fp.t();
            argz[f] = if fp.chart == 0 {
                fp.coord.arg()
            } else {
                -fp.coord.arg()
            };
        }
        let n = self.n();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        if let Some(ds) = derivs.as_deref_mut() {
            for d in ds.iter_mut() {
                *d = vec![Complex64::new(0.0, 0.0); n];
            }
        }
        for i in 0..n {
            let e = self.exps[i];
            // value: ln_scale + sum_f [ (j/2) ln t + ((d-j)/2) ln(1-t) ] + extra
            let mut ln_mag = self.ln_scales[i] + extra;
            let mut phase = 0.0;
            let mut degenerate_zero = false;
            for f in 0..nf {
                let j = e[f] as f64;
                let d = self.degrees[f] as f64;
                let t = tf[f];
                if t <= 0.0 {
                    if e[f] > 0 {
                        degenerate_zero = true;
                    }
                } else if t >= 1.0 {
                    if e[f] < self.degrees[f] {
                        degenerate_zero = true;
                    }
                } else {
                    ln_mag += 0.5 * (j * t.ln() + (d - j) * (1.0 - t).ln());
                }
                phase += j * argz[f];
            }
            out[i] = if degenerate_zero {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(ln_mag.exp(), phase)
            };
            if let Some(ds) = derivs.as_deref_mut() {
                for f in 0..nf {
                    let j = e[f];
                    if j == 0 {
                        continue;
                    }
                    // d/dz_f : j z^{j-1} * (others), same e^{-psi}
                    let mut lm = self.ln_scales[i] + extra + (j as f64).ln();
                    let mut ph = 0.0;
                    let mut dead = false;
                    for g in 0..nf {
                        let jg = if g == f { j - 1 } else { e[g] } as f64;
                        let dg = self.degrees[g] as f64;
                        let t = tf[g];
                        if t <= 0.0 {
                            if jg > 0.0 {
                                dead = true;
                            }
                        } else if t >= 1.0 {
                            if g == f || (e[g] as f64) < dg {
                                dead = true;
                            }
                        } else {
                            lm += 0.5 * (jg * t.ln() + (dg - jg) * (1.0 - t).ln());
                        }
                        ph += jg * argz[g];
                    }
                    ds[f][i] = if dead {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::from_polar(lm.exp(), ph)
                    };
                }
            }
        }
        out
    }
}

fn exps_check(a: u32, b: u32, j1: u32, j2: u32) {
    debug_assert!(j1 <= a && j2 <= b);
}
