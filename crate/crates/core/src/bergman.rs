//! L^2 Gram matrices, orthonormal frames, Bergman kernel functions, Kodaira
//! maps, and Fubini-Study currents of the section spaces.
//!
//! The frame is the scaled monomial row vector times (L^H)^{-1}, where
//! G = L L^H is the Cholesky factorization of the Gram matrix in the scaled
//! basis. Radial weights (the shipped families) have exactly diagonal Gram
//! matrices by angular orthogonality, so their orthonormalization is an
//! entrywise square root: lossless regardless of the diagonal's dynamic
//! range. The dense path carries a conditioning guard instead.
//!
//! Fubini-Study currents are computed analytically from the frame's local
//! holomorphic data: with S = sum |s_j|^2, F_a = sum (d_a s_j) conj(s_j),
//! K_ab = sum (d_a s_j) conj(d_b s_j),
//!
//!   (gamma)_ab = 1/2 (K_ab / S - F_a conj(F_b) / S^2),
//!
//! every ratio invariant under the per-point metric normalization, so the
//! log-space evaluations never overflow at degree ~400.

use num_complex::Complex64;

use crate::basis::SectionBasis;
use crate::error::{CoreError, Result};
use crate::field::OneOneCurrent;
use crate::grid::{factor_point_from_params, QuadratureGrid};
use crate::linalg::{cholesky, solve_lower, solve_lower_adjoint, CMat};
use crate::metrics::{fnv1a, BundleSequence, MetricWeight};
use crate::space::{ChartPoint, ModelSpace};

/// Hard conditioning limit for the dense orthonormalization path.
pub const COND_LIMIT: f64 = 1e10;

#[derive(Debug, Clone)]
pub enum FrameFactor {
    Dense { gram: CMat, chol: CMat },
    Diagonal { gram_diag: Vec<f64>, inv_sqrt: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct OrthonormalFrame {
    pub basis: SectionBasis,
    pub weight: MetricWeight,
    pub resolution: usize,
    pub factor: FrameFactor,
    pub cond_estimate: f64,
}

/// Dense Gram matrix of the scaled monomial basis under a weight:
/// G[i][j] = sum_nodes w * m_i conj(m_j) e^{-2 psi}. Works for any smooth
/// weight; requires enough angular nodes to avoid aliasing the phases.
pub fn gram_matrix(
    basis: &SectionBasis,
    weight: &MetricWeight,
    grid: &QuadratureGrid,
) -> Result<CMat> {
    if weight.space != grid.space || basis.space != grid.space {
        return Err(CoreError::GridMismatch("basis/weight/grid space".into()));
    }
    for f in 0..grid.space.factors() {
        let need = 2 * basis.degrees[f] as usize + 1;
        if grid.axes[f].n_theta < need {
            return Err(CoreError::InvalidInput(format!(
                "angular resolution {} aliases degree {} phases (need >= {need})",
                grid.axes[f].n_theta, basis.degrees[f]
            )));
        }
    }
    let n = basis.n();
    let mut g = CMat::zeros(n);
    for idx in 0..grid.n_nodes() {
        let p = grid.point(idx);
        let w = grid.weight(idx);
        let vals = basis.eval_normalized(weight, &p);
        for i in 0..n {
            let vi = vals[i];
            if vi.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..=i {
                let prod = vi * vals[j].conj() * w;
                let cur = g.get(i, j);
                g.set(i, j, cur + prod);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = g.get(i, j);
            g.set(j, i, v.conj());
        }
        let d = g.get(i, i);
        g.set(i, i, Complex64::new(d.re, 0.0));
    }
    Ok(g)
}

/// Diagonal Gram entries for radial weights, with the angular integrals done
/// exactly (they vanish off the diagonal). Only the t quadrature remains.
pub fn gram_diagonal_radial(
    basis: &SectionBasis,
    weight: &MetricWeight,
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    if !weight.is_radial() {
        return Err(CoreError::InvalidInput(
            "radial Gram path called with a non-radial weight".into(),
        ));
    }
    let nf = grid.space.factors();
    let n = basis.n();
    let mut out = vec![0.0f64; n];
    // iterate the t-grid product only
    let t_counts: Vec<usize> = grid.axes.iter().map(|a| a.n_t()).collect();
    let total: usize = t_counts.iter().product();
    for flat in 0..total {
        let mut rest = flat;
        let mut ti = [0usize; 2];
        for f in (0..nf).rev() {
            ti[f] = rest % t_counts[f];
            rest /= t_counts[f];
        }
        let mut wq = 1.0;
        let mut ts = [0.0f64; 2];
        for f in 0..nf {
            wq *= grid.axes[f].t_weights[ti[f]];
            ts[f] = grid.axes[f].t_nodes[ti[f]];
        }
        // psi0 at this radius (radial: any angle)
        let point = match grid.space {
            ModelSpace::Cp1 => ChartPoint::cp1(factor_point_from_params(ts[0], 0.0)),
            ModelSpace::Cp1xCp1 => ChartPoint::product(
                factor_point_from_params(ts[0], 0.0),
                factor_point_from_params(ts[1], 0.0),
            ),
        };
        let expo_extra = -2.0 * weight.tau * weight.psi0.eval(&point);
        for i in 0..n {
            let e = basis.exps[i];
            let mut ln_mag = 2.0 * basis.ln_scales[i] + expo_extra;
            for f in 0..nf {
                let j = e[f] as f64;
                let d = basis.degrees[f] as f64;
                ln_mag += j * ts[f].ln() + (d - j) * (1.0 - ts[f]).ln();
            }
            out[i] += wq * ln_mag.exp();
        }
    }
    for (i, v) in out.iter().enumerate() {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(CoreError::Indefinite {
                pivot: *v,
                context: format!("radial Gram entry {i}"),
            });
        }
    }
    Ok(out)
}

/// Orthonormalize a dense Gram matrix. The produced frame's Gram is the
/// identity within quadrature error; Cholesky breakdown reports the failing
/// pivot.
pub fn orthonormal_frame_from_gram(
    basis: SectionBasis,
    weight: MetricWeight,
    resolution: usize,
    gram: CMat,
) -> Result<OrthonormalFrame> {
    let (chol, min_pivot) = cholesky(&gram)?;
    let cond = gram.gershgorin_max() / min_pivot.max(1e-300);
    if cond > COND_LIMIT {
        return Err(CoreError::IllConditioned {
            cond,
            limit: COND_LIMIT,
        });
    }
    Ok(OrthonormalFrame {
        basis,
        weight,
        resolution,
        factor: FrameFactor::Dense { gram, chol },
        cond_estimate: cond,
    })
}

impl OrthonormalFrame {
    /// Build the orthonormal frame for a weight over a grid, picking the
    /// radial fast path when available.
    pub fn build(
        basis: SectionBasis,
        weight: MetricWeight,
        grid: &QuadratureGrid,
    ) -> Result<OrthonormalFrame> {
        let resolution = grid.axes[0].n_t();
        if weight.is_radial() {
            let gram_diag = gram_diagonal_radial(&basis, &weight, grid)?;
            let mut mx: f64 = 0.0;
            let mut mn = f64::INFINITY;
            for &v in &gram_diag {
                mx = mx.max(v);
                mn = mn.min(v);
            }
            // Diagonal orthonormalization is entrywise and lossless, so the
            // dense conditioning abort does not apply here; the estimate is
            // still reported.
            let inv_sqrt = gram_diag.iter().map(|v| 1.0 / v.sqrt()).collect();
            Ok(OrthonormalFrame {
                basis,
                weight,
                resolution,
                factor: FrameFactor::Diagonal {
                    gram_diag,
                    inv_sqrt,
                },
                cond_estimate: mx / mn,
            })
        } else {
            let gram = gram_matrix(&basis, &weight, grid)?;
            orthonormal_frame_from_gram(basis, weight, resolution, gram)
        }
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    /// Projective dimension d_kp = N - 1.
    pub fn proj_dim(&self) -> usize {
        self.n() - 1
    }

    /// Metric-normalized frame section values at a point:
    /// s_j(x) e^{-psi(x)} in the orthonormal basis.
    pub fn section_values(&self, p: &ChartPoint) -> Vec<Complex64> {
        let raw = self.basis.eval_normalized(&self.weight, p);
        self.apply_inverse_factor(raw)
    }

    /// Values and per-factor holomorphic derivative values, both normalized.
    pub fn section_values_with_derivs(
        &self,
        p: &ChartPoint,
    ) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
        let (raw, draw) = self.basis.eval_normalized_with_derivs(&self.weight, p);
        let vals = self.apply_inverse_factor(raw);
        let derivs = draw
            .into_iter()
            .map(|d| self.apply_inverse_factor(d))
            .collect();
        (vals, derivs)
    }

    fn apply_inverse_factor(&self, v: Vec<Complex64>) -> Vec<Complex64> {
        match &self.factor {
            FrameFactor::Dense { chol, .. } => solve_lower(chol, &v),
            FrameFactor::Diagonal { inv_sqrt, .. } => v
                .into_iter()
                .zip(inv_sqrt)
                .map(|(x, s)| x * *s)
                .collect(),
        }
    }

    /// Frame coefficients -> scaled-monomial coefficients. A section
    /// written as sum c_j S_j in the frame has the scaled-monomial
    /// coefficient vector (L^H)^{-1} c.
    pub fn monomial_coeffs(&self, frame_coeffs: &[Complex64]) -> Vec<Complex64> {
        match &self.factor {
            FrameFactor::Dense { chol, .. } => solve_lower_adjoint(chol, frame_coeffs),
            FrameFactor::Diagonal { inv_sqrt, .. } => frame_coeffs
                .iter()
                .zip(inv_sqrt)
                .map(|(c, s)| c * *s)
                .collect(),
        }
    }

    /// Bergman kernel function B(x) = sum_j |S_j(x)|^2_h; basis-independent.
    pub fn bergman_function(&self, p: &ChartPoint) -> f64 {
        self.section_values(p).iter().map(|v| v.norm_sqr()).sum()
    }

    /// B sampled over a whole grid, with a radial shortcut when the weight
    /// allows (B depends on the t parameters only).
    pub fn bergman_on_grid(&self, grid: &QuadratureGrid) -> Vec<f64> {
        if self.weight.is_radial() {
            let nf = grid.space.factors();
            let t_counts: Vec<usize> = grid.axes.iter().map(|a| a.n_t()).collect();
            let total: usize = t_counts.iter().product();
            let mut memo = vec![0.0f64; total];
            for (flat, slot) in memo.iter_mut().enumerate() {
                let mut rest = flat;
                let mut ti = [0usize; 2];
                for f in (0..nf).rev() {
                    ti[f] = rest % t_counts[f];
                    rest /= t_counts[f];
                }
                let point = match grid.space {
                    ModelSpace::Cp1 => {
                        ChartPoint::cp1(factor_point_from_params(grid.axes[0].t_nodes[ti[0]], 0.0))
                    }
                    ModelSpace::Cp1xCp1 => ChartPoint::product(
                        factor_point_from_params(grid.axes[0].t_nodes[ti[0]], 0.0),
                        factor_point_from_params(grid.axes[1].t_nodes[ti[1]], 0.0),
                    ),
                };
                *slot = self.bergman_function(&point);
            }
            (0..grid.n_nodes())
                .map(|idx| {
                    let parts = grid.split_index(idx);
                    let mut flat = 0usize;
                    for f in 0..nf {
                        flat = flat * t_counts[f] + parts[f].0;
                    }
                    memo[flat]
                })
                .collect()
        } else {
            (0..grid.n_nodes())
                .map(|i| self.bergman_function(&grid.point(i)))
                .collect()
        }
    }

    /// int B dmu - 1; equals N - 1 within quadrature tolerance.
    pub fn dimension_from_bergman(&self, grid: &QuadratureGrid) -> f64 {
        let b = self.bergman_on_grid(grid);
        grid.integrate(&b) - 1.0
    }

    /// Kodaira map: the projective vector of frame section values, rescaled
    /// by the running max so components stay order one. Degree-zero bundles
    /// have nowhere to map.
    pub fn kodaira_map(&self, p: &ChartPoint) -> Result<Vec<Complex64>> {
        if self.basis.degrees.iter().take(self.basis.space.factors()).all(|&d| d == 0) {
            return Err(CoreError::InvalidInput(
                "Kodaira map rejected for a degree-zero bundle".into(),
            ));
        }
        let vals = self.section_values(p);
        let mx = vals.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        if mx == 0.0 || !mx.is_finite() {
            return Err(CoreError::Numeric(
                "Kodaira map hit a zero/non-finite section vector".into(),
            ));
        }
        Ok(vals.into_iter().map(|v| v / mx).collect())
    }

    /// Fubini-Study current gamma = Phi^*(omega_FS) of the frame as a
    /// grid-sampled (1,1)-current, computed analytically.
    pub fn fs_current(&self, grid: &QuadratureGrid) -> Result<OneOneCurrent> {
        if grid.space != self.basis.space {
            return Err(CoreError::GridMismatch("frame vs grid space".into()));
        }
        let nf = grid.space.factors();
        let n_nodes = grid.n_nodes();
        let mut cur = OneOneCurrent::zero(grid.space, n_nodes);
        if self.weight.is_radial() {
            // gamma is theta-independent (diagonal H, zero mixed term for the
            // separable shipped weights); evaluate per t tuple and broadcast.
            let t_counts: Vec<usize> = grid.axes.iter().map(|a| a.n_t()).collect();
            let total: usize = t_counts.iter().product();
            let mut memo = vec![[0.0f64; 2]; total];
            for (flat, slot) in memo.iter_mut().enumerate() {
                let mut rest = flat;
                let mut ti = [0usize; 2];
                for f in (0..nf).rev() {
                    ti[f] = rest % t_counts[f];
                    rest /= t_counts[f];
                }
                let point = match grid.space {
                    ModelSpace::Cp1 => {
                        ChartPoint::cp1(factor_point_from_params(grid.axes[0].t_nodes[ti[0]], 0.0))
                    }
                    ModelSpace::Cp1xCp1 => ChartPoint::product(
                        factor_point_from_params(grid.axes[0].t_nodes[ti[0]], 0.0),
                        factor_point_from_params(grid.axes[1].t_nodes[ti[1]], 0.0),
                    ),
                };
                let h = self.fs_hessian_at(&point);
                slot[0] = h[0];
                slot[1] = h[3];
            }
            for idx in 0..n_nodes {
                let parts = grid.split_index(idx);
                let mut flat = 0usize;
                for f in 0..nf {
                    flat = flat * t_counts[f] + parts[f].0;
                }
                cur.h11[idx] = memo[flat][0];
                if nf == 2 {
                    cur.h22[idx] = memo[flat][1];
                }
            }
        } else {
            for idx in 0..n_nodes {
                let p = grid.point(idx);
                let h = self.fs_hessian_at(&p);
                cur.h11[idx] = h[0];
                if nf == 2 {
                    cur.h22[idx] = h[3];
                    cur.h12[idx] = Complex64::new(h[1], h[2]);
                }
            }
        }
        for v in cur.h11.iter().chain(cur.h22.iter()) {
            if !v.is_finite() {
                return Err(CoreError::Numeric(
                    "non-finite FS-current density (underflow guard tripped)".into(),
                ));
            }
        }
        Ok(cur)
    }

    /// [h11, Re h12, Im h12, h22] of gamma at one point.
    fn fs_hessian_at(&self, p: &ChartPoint) -> [f64; 4] {
        let nf = self.basis.space.factors();
        let (vals, derivs) = self.section_values_with_derivs(p);
        let s: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
        let mut out = [0.0f64; 4];
        if s <= 0.0 {
            return out;
        }
        let mut f = [Complex64::new(0.0, 0.0); 2];
        for a in 0..nf {
            for i in 0..vals.len() {
                f[a] += derivs[a][i] * vals[i].conj();
            }
        }
        let mut k = [[Complex64::new(0.0, 0.0); 2]; 2];
        for a in 0..nf {
            for b in 0..nf {
                for i in 0..vals.len() {
                    k[a][b] += derivs[a][i] * derivs[b][i].conj();
                }
            }
        }
        let h = |a: usize, b: usize| -> Complex64 {
            0.5 * (k[a][b] / s - f[a] * f[b].conj() / (s * s))
        };
        out[0] = h(0, 0).re;
        if nf == 2 {
            let h12 = h(0, 1);
            out[1] = h12.re;
            out[2] = h12.im;
            out[3] = h(1, 1).re;
        }
        out
    }

    /// Cache key: (space, bidegree, weight hash, grid resolution).
    pub fn cache_key(&self) -> u64 {
        frame_cache_key(&self.basis, &self.weight, self.resolution)
    }
}

pub fn frame_cache_key(basis: &SectionBasis, weight: &MetricWeight, resolution: usize) -> u64 {
    let mut h = fnv1a(0xcbf29ce484222325, basis.space.tag().as_bytes());
    h = fnv1a(h, &basis.degrees[0].to_le_bytes());
    h = fnv1a(h, &basis.degrees[1].to_le_bytes());
    h = fnv1a(h, &weight.hash64().to_le_bytes());
    h = fnv1a(h, &(resolution as u64).to_le_bytes());
    h
}

// ---------------------------------------------------------------------------
// frame cache: header + row-major factor in 64-bit floats
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &[u8; 4] = b"ZCFR";
const CACHE_VERSION: u32 = 1;

pub fn write_frame_cache(frame: &OrthonormalFrame, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&frame.cache_key().to_le_bytes());
    buf.extend_from_slice(&(frame.n() as u64).to_le_bytes());
    match &frame.factor {
        FrameFactor::Diagonal { gram_diag, .. } => {
            buf.push(1);
            for v in gram_diag {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        FrameFactor::Dense { gram, chol } => {
            buf.push(0);
            for m in [gram, chol] {
                for v in &m.a {
                    buf.extend_from_slice(&v.re.to_le_bytes());
                    buf.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_frame_cache(
    basis: SectionBasis,
    weight: MetricWeight,
    resolution: usize,
    path: &std::path::Path,
) -> Result<OrthonormalFrame> {
    let data = std::fs::read(path)?;
    let key = frame_cache_key(&basis, &weight, resolution);
    let fail = |msg: &str| CoreError::CacheMismatch(format!("{}: {msg}", path.display()));
    if data.len() < 25 || &data[0..4] != CACHE_MAGIC {
        return Err(fail("bad magic"));
    }
    let ver = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if ver != CACHE_VERSION {
        return Err(fail("version mismatch"));
    }
    let stored_key = u64::from_le_bytes(data[8..16].try_into().unwrap());
    if stored_key != key {
        return Err(fail("key mismatch"));
    }
    let n = u64::from_le_bytes(data[16..24].try_into().unwrap()) as usize;
    if n != basis.n() {
        return Err(fail("dimension mismatch"));
    }
    let tag = data[24];
    let body = &data[25..];
    let rd = |bytes: &[u8], at: usize| -> f64 {
        f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
    };
    match tag {
        1 => {
            if body.len() != 8 * n {
                return Err(fail("diagonal payload size"));
            }
            let gram_diag: Vec<f64> = (0..n).map(|i| rd(body, 8 * i)).collect();
            let mut mx: f64 = 0.0;
            let mut mn = f64::INFINITY;
            for &v in &gram_diag {
                if !(v > 0.0) {
                    return Err(fail("nonpositive diagonal entry"));
                }
                mx = mx.max(v);
                mn = mn.min(v);
            }
            let inv_sqrt = gram_diag.iter().map(|v| 1.0 / v.sqrt()).collect();
            Ok(OrthonormalFrame {
                basis,
                weight,
                resolution,
                factor: FrameFactor::Diagonal {
                    gram_diag,
                    inv_sqrt,
                },
                cond_estimate: mx / mn,
            })
        }
        0 => {
            if body.len() != 2 * 2 * 8 * n * n {
                return Err(fail("dense payload size"));
            }
            let read_mat = |offset: usize| -> CMat {
                let mut m = CMat::zeros(n);
                for i in 0..n * n {
                    let at = offset + 16 * i;
                    m.a[i] = Complex64::new(rd(body, at), rd(body, at + 8));
                }
                m
            };
            let gram = read_mat(0);
            let chol = read_mat(16 * n * n);
            let mut min_pivot = f64::INFINITY;
            for i in 0..n {
                min_pivot = min_pivot.min(chol.get(i, i).re * chol.get(i, i).re);
            }
            let cond = gram.gershgorin_max() / min_pivot.max(1e-300);
            Ok(OrthonormalFrame {
                basis,
                weight,
                resolution,
                factor: FrameFactor::Dense { gram, chol },
                cond_estimate: cond,
            })
        }
        _ => Err(fail("unknown payload tag")),
    }
}

// ---------------------------------------------------------------------------
// two-sided Bergman bounds
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BergmanBoundRow {
    pub k: usize,
    pub p: u32,
    pub a_kp: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct BergmanBoundReport {
    pub rows: Vec<BergmanBoundRow>,
    /// sup over rows of max(max B / A^n, A^n / min B).
    pub m0_estimate: f64,
    /// Log-log trend of the per-p constant; a clear upward trend fails.
    pub trend_slope: f64,
    pub pass: bool,
}

/// Verify the two-sided Bergman bound A^n/M0 <= B <= M0 A^n across a p-range
/// and estimate M0. Pass requires a finite estimate with no growth trend.
pub fn check_bergman_bounds(
    seq: &BundleSequence,
    grid: &QuadratureGrid,
    p_range: &[u32],
) -> Result<BergmanBoundReport> {
    let n_dim = seq.space.dim() as i32;
    let mut rows = Vec::new();
    let mut per_p_m0: Vec<(f64, f64)> = Vec::new();
    for &p in p_range {
        let ip = seq
            .index_of_p(p)
            .ok_or_else(|| CoreError::InvalidInput(format!("p = {p} not in the sequence")))?;
        let mut worst_at_p: f64 = 0.0;
        for k in 0..seq.m {
            let w = seq.weights[k][ip];
            let basis = SectionBasis::new(seq.space, w.degrees)?;
            let frame = OrthonormalFrame::build(basis, w, grid)?;
            let b = frame.bergman_on_grid(grid);
            let an = seq.scales[k][ip].powi(n_dim);
            let mut mn = f64::INFINITY;
            let mut mx: f64 = 0.0;
            for v in &b {
                mn = mn.min(*v);
                mx = mx.max(*v);
            }
            let row = BergmanBoundRow {
                k,
                p,
                a_kp: seq.scales[k][ip],
                min_ratio: mn / an,
                max_ratio: mx / an,
            };
            worst_at_p = worst_at_p.max(row.max_ratio.max(1.0 / row.min_ratio));
            rows.push(row);
        }
        per_p_m0.push((p as f64, worst_at_p));
    }
    let m0 = per_p_m0.iter().map(|v| v.1).fold(0.0f64, f64::max);
    let trend = if per_p_m0.len() >= 3 {
        let x: Vec<f64> = per_p_m0.iter().map(|v| v.0.ln()).collect();
        let y: Vec<f64> = per_p_m0.iter().map(|v| v.1.ln()).collect();
        crate::numeric::linear_fit(&x, &y).0
    } else {
        0.0
    };
    let pass = m0.is_finite() && m0 > 0.0 && trend < 0.15;
    Ok(BergmanBoundReport {
        rows,
        m0_estimate: m0,
        trend_slope: trend,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::metrics::{LimitCurrent, Psi0};

    #[test]
    fn pure_fs_gram_is_identity() {
        let g = build_grid(ModelSpace::Cp1, 64).unwrap();
        let basis = SectionBasis::new(ModelSpace::Cp1, [12, 0]).unwrap();
        let w = MetricWeight::pure_fs(ModelSpace::Cp1, [12, 0]).unwrap();
        let gram = gram_matrix(&basis, &w, &g).unwrap();
        for i in 0..gram.n {
            for j in 0..gram.n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram.get(i, j) - Complex64::new(expect, 0.0)).norm() < 1e-12,
                    "({i},{j}): {}",
                    gram.get(i, j)
                );
            }
        }
    }

    #[test]
    fn degree_zero_gram_is_one() {
        let g = build_grid(ModelSpace::Cp1, 16).unwrap();
        let basis = SectionBasis::new(ModelSpace::Cp1, [0, 0]).unwrap();
        let w = MetricWeight::pure_fs(ModelSpace::Cp1, [0, 0]).unwrap();
        let gram = gram_matrix(&basis, &w, &g).unwrap();
        assert_eq!(gram.n, 1);
        assert!((gram.get(0, 0).re - 1.0).abs() < 1e-13);
    }

    #[test]
    fn bidegree_one_zero_symmetric_diagonal() {
        let g = build_grid(ModelSpace::Cp1xCp1, 12).unwrap();
        let basis = SectionBasis::new(ModelSpace::Cp1xCp1, [1, 0]).unwrap();
        let w = MetricWeight::pure_fs(ModelSpace::Cp1xCp1, [1, 0]).unwrap();
        let gram = gram_matrix(&basis, &w, &g).unwrap();
        assert_eq!(gram.n, 2);
        assert!((gram.get(0, 0).re - gram.get(1, 1).re).abs() < 1e-12);
        assert!(gram.get(0, 1).norm() < 1e-13);
    }

    #[test]
    fn radial_path_matches_dense() {
        let g = build_grid(ModelSpace::Cp1, 64).unwrap();
        let basis = SectionBasis::new(ModelSpace::Cp1, [9, 0]).unwrap();
        let w = MetricWeight::new(ModelSpace::Cp1, [9, 0], 1.0, Psi0::Cap { amp: 0.5 }).unwrap();
        let dense = gram_matrix(&basis, &w, &g).unwrap();
        let diag = gram_diagonal_radial(&basis, &w, &g).unwrap();
        for i in 0..basis.n() {
            assert!(
                (dense.get(i, i).re - diag[i]).abs() < 1e-12 * diag[i],
                "entry {i}"
            );
            for j in 0..i {
                assert!(dense.get(i, j).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn bergman_constant_for_fs() {
        let g = build_grid(ModelSpace::Cp1, 64).unwrap();
        for d in [0u32, 5, 20] {
            let basis = SectionBasis::new(ModelSpace::Cp1, [d, 0]).unwrap();
            let w = MetricWeight::pure_fs(ModelSpace::Cp1, [d, 0]).unwrap();
            let frame = OrthonormalFrame::build(basis, w, &g).unwrap();
            let b = frame.bergman_on_grid(&g);
            for v in &b {
                assert!((v - (d + 1) as f64).abs() < 1e-6 * (d + 1) as f64, "d={d}: {v}");
            }
            let dim = frame.dimension_from_bergman(&g);
            assert!((dim - d as f64).abs() < 1e-6, "d={d}: dim {dim}");
        }
    }

    #[test]
    fn bergman_product_space() {
        let g = build_grid(ModelSpace::Cp1xCp1, 12).unwrap();
        let basis = SectionBasis::new(ModelSpace::Cp1xCp1, [3, 2, ][..2].try_into().unwrap()).unwrap();
        let w = MetricWeight::pure_fs(ModelSpace::Cp1xCp1, [3, 2]).unwrap();
        let frame = OrthonormalFrame::build(basis, w, &g).unwrap();
        let p = ChartPoint::product_z(Complex64::new(0.4, 0.2), Complex64::new(-0.1, 0.9));
        assert!((frame.bergman_function(&p) - 12.0).abs() < 1e-9);
        assert!((frame.dimension_from_bergman(&g) - 11.0).abs() < 1e-5);
    }

    #[test]
    fn gram_invariance_of_bergman() {
        // mix the basis by a non-unitary invertible matrix M: the Gram of the
        // mixed basis is M G M^H; the orthonormalized Bergman function must
        // agree with the original
        let g = build_grid(ModelSpace::Cp1, 48).unwrap();
        let d = 5u32;
        let basis = SectionBasis::new(ModelSpace::Cp1, [d, 0]).unwrap();
        let w = MetricWeight::new(ModelSpace::Cp1, [d, 0], 1.0, Psi0::Cap { amp: 0.4 }).unwrap();
        let gram = gram_matrix(&basis, &w, &g).unwrap();
        let frame = orthonormal_frame_from_gram(basis.clone(), w, 48, gram.clone()).unwrap();

        let n = basis.n();
        let mut m = CMat::identity(n);
        // a deterministic shear + scaling mix
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m.set(
                        i,
                        j,
                        Complex64::new(0.1 * ((i + 2 * j) as f64).sin(), 0.05 * (j as f64)),
                    );
                } else {
                    m.set(i, j, Complex64::new(1.0 + 0.2 * i as f64, 0.0));
                }
            }
        }
        let mut mixed = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        s += m.get(i, a) * gram.get(a, b) * m.get(j, b).conj();
                    }
                }
                mixed.set(i, j, s);
            }
        }
        // mixed-basis evaluation: values_mixed = M * values_scaled; the
        // orthonormal frame of (mixed basis, mixed gram) must give the same B
        let (lant, _) = cholesky(&mixed).unwrap();
        for z in [Complex64::new(0.3, 0.4), Complex64::new(2.0, -1.0)] {
            let p = ChartPoint::cp1_z(z);
            let raw = basis.eval_normalized(&w, &p);
            let mixed_vals: Vec<Complex64> = (0..n)
                .map(|i| {
                    let mut s = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        s += m.get(i, j) * raw[j];
                    }
                    s
                })
                .collect();
            let ortho = solve_lower(&l_ant_alias(&lant), &mixed_vals);
            let b_mixed: f64 = ortho.iter().map(|v| v.norm_sqr()).sum();
            let b_orig = frame.bergman_function(&p);
            assert!(
                (b_mixed - b_orig).abs() <= 1e-10 * b_orig,
                "z={z}: {b_mixed} vs {b_orig}"
            );
        }
    }

    fn l_ant_alias(l: &CMat) -> CMat {
        l.clone()
    }

    #[test]
    fn kodaira_map_examples() {
        let g = build_grid(ModelSpace::Cp1, 32).unwrap();
        let w = MetricWeight::pure_fs(ModelSpace::Cp1, [1, 0]).unwrap();
        let basis = SectionBasis::new(ModelSpace::Cp1, [1, 0]).unwrap();
        let frame = OrthonormalFrame::build(basis, w, &g).unwrap();
        let v = frame.kodaira_map(&ChartPoint::cp1_z(Complex64::new(0.0, 0.0))).unwrap();
        assert!(v[0].norm() > 0.0);
        assert!(v[1].norm() < 1e-14);

        let w2 = MetricWeight::pure_fs(ModelSpace::Cp1, [2, 0]).unwrap();
        let basis2 = SectionBasis::new(ModelSpace::Cp1, [2, 0]).unwrap();
        let frame2 = OrthonormalFrame::build(basis2, w2, &g).unwrap();
        let v2 = frame2.kodaira_map(&ChartPoint::cp1_z(Complex64::new(1.0, 0.0))).unwrap();
        assert!(v2.iter().all(|c| c.norm() > 1e-6));

        let w0 = MetricWeight::pure_fs(ModelSpace::Cp1, [0, 0]).unwrap();
        let basis0 = SectionBasis::new(ModelSpace::Cp1, [0, 0]).unwrap();
        let frame0 = OrthonormalFrame::build(basis0, w0, &g).unwrap();
        assert!(frame0.kodaira_map(&ChartPoint::cp1_z(Complex64::new(0.0, 0.0))).is_err());
    }

    #[test]
    fn fs_current_of_fs_frame_is_d_times_fs() {
        let g = build_grid(ModelSpace::Cp1, 64).unwrap();
        let d = 7u32;
        let basis = SectionBasis::new(ModelSpace::Cp1, [d, 0]).unwrap();
        let w = MetricWeight::pure_fs(ModelSpace::Cp1, [d, 0]).unwrap();
        let frame = OrthonormalFrame::build(basis, w, &g).unwrap();
        let gamma = frame.fs_current(&g).unwrap();
        let dens = gamma.trace_density(&g).unwrap();
        for v in &dens {
            assert!((v - d as f64).abs() < 1e-3 * d as f64, "{v}");
        }
        let mass = gamma.mass(&g).unwrap();
        assert!((mass - d as f64).abs() < 1e-4);
    }

    #[test]
    fn fs_current_mass_is_degree_for_perturbed_weight() {
        let g = build_grid(ModelSpace::Cp1, 96).unwrap();
        let d = 11u32;
        let basis = SectionBasis::new(ModelSpace::Cp1, [d, 0]).unwrap();
        let w = MetricWeight::new(ModelSpace::Cp1, [d, 0], 1.0, Psi0::Cap { amp: 0.5 }).unwrap();
        let frame = OrthonormalFrame::build(basis, w, &g).unwrap();
        let mass = frame.fs_current(&g).unwrap().mass(&g).unwrap();
        assert!((mass - d as f64).abs() < 1e-4, "mass {mass}");

        // gamma decomposition: gamma = c1 + 1/2 ddc log B, checked in grid
        // density units on the uniform grid
        let gu = crate::grid::build_uniform_grid(ModelSpace::Cp1, 256).unwrap();
        let frame_u = OrthonormalFrame::build(
            SectionBasis::new(ModelSpace::Cp1, [d, 0]).unwrap(),
            w,
            &g,
        )
        .unwrap();
        let logb: Vec<f64> = frame_u.bergman_on_grid(&gu).iter().map(|v| v.ln()).collect();
        let half_ddc_logb: Vec<f64> = crate::ddc::ddc_fd(&gu, &logb)
            .unwrap()
            .iter()
            .map(|v| 0.5 * v)
            .collect();
        let curv = w.curvature(&gu).unwrap().trace_density(&gu).unwrap();
        let gamma_u = frame_u.fs_current(&gu).unwrap().trace_density(&gu).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..gu.n_nodes() {
            let t = gu.params(i)[0].0;
            if t <= 0.9 {
                worst = worst.max((gamma_u[i] - curv[i] - half_ddc_logb[i]).abs() / d as f64);
            }
        }
        assert!(worst < 1e-3, "decomposition defect {worst}");
    }

    #[test]
    fn frame_gram_identity_after_orthonormalization() {
        // integrate the frame's own Gram over the grid: identity within 1e-8
        let g = build_grid(ModelSpace::Cp1, 64).unwrap();
        let d = 6u32;
        let basis = SectionBasis::new(ModelSpace::Cp1, [d, 0]).unwrap();
        let w = MetricWeight::new(
            ModelSpace::Cp1,
            [d, 0],
            1.0,
            Psi0::EquatorX { amp: 0.3, factor: 0 },
        )
        .unwrap();
        let frame = OrthonormalFrame::build(basis, w, &g).unwrap();
        let n = frame.n();
        let mut acc = CMat::zeros(n);
        for idx in 0..g.n_nodes() {
            let p = g.point(idx);
            let vals = frame.section_values(&p);
            let wq = g.weight(idx);
            for i in 0..n {
                for j in 0..n {
                    let v = acc.get(i, j) + vals[i] * vals[j].conj() * wq;
                    acc.set(i, j, v);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (acc.get(i, j) - Complex64::new(expect, 0.0)).norm() < 1e-8,
                    "({i},{j}): {}",
                    acc.get(i, j)
                );
            }
        }
    }

    #[test]
    fn bergman_bounds_fs_powers() {
        let g = build_grid(ModelSpace::Cp1, 64).unwrap();
        let p_list = vec![10u32, 20, 40, 80];
        let weights: Vec<MetricWeight> = p_list
            .iter()
            .map(|&p| MetricWeight::pure_fs(ModelSpace::Cp1, [p, 0]).unwrap())
            .collect();
        let scales: Vec<f64> = p_list.iter().map(|&p| p as f64).collect();
        let seq = BundleSequence::new(
            ModelSpace::Cp1,
            p_list.clone(),
            vec![weights],
            vec![scales],
            vec![LimitCurrent::fs_cp1()],
            vec![1.0],
            1.0,
            &g,
        )
        .unwrap();
        let rep = check_bergman_bounds(&seq, &g, &p_list).unwrap();
        assert!(rep.pass, "m0={} trend={}", rep.m0_estimate, rep.trend_slope);
        // B/A = (p+1)/p, so the estimate sits near 1 + 1/p_min
        assert!(rep.m0_estimate < 1.11 && rep.m0_estimate > 1.0);
    }

    #[test]
    fn bergman_bounds_detect_wrong_normalization() {
        let g = build_grid(ModelSpace::Cp1, 64).unwrap();
        let p_list = vec![10u32, 20, 40, 80];
        let weights: Vec<MetricWeight> = p_list
            .iter()
            .map(|&p| MetricWeight::pure_fs(ModelSpace::Cp1, [p, 0]).unwrap())
            .collect();
        let scales: Vec<f64> = p_list.iter().map(|&p| (p as f64).powi(2)).collect();
        let seq = BundleSequence::new(
            ModelSpace::Cp1,
            p_list.clone(),
            vec![weights],
            vec![scales],
            vec![LimitCurrent::fs_cp1()],
            vec![1.0],
            1.0,
            &g,
        )
        .unwrap();
        let rep = check_bergman_bounds(&seq, &g, &p_list).unwrap();
        assert!(!rep.pass, "mis-specified A should fail");
    }

    #[test]
    fn conditioning_guard_tau_one_family() {
        // pre-scaled monomials keep the tau = 1 Gram condition far below 1e6
        // up to degree 300; the 1e10 abort applies to the dense path
        let g = build_grid(ModelSpace::Cp1, 512).unwrap();
        for d in [100u32, 300] {
            let basis = SectionBasis::new(ModelSpace::Cp1, [d, 0]).unwrap();
            let w = MetricWeight::new(ModelSpace::Cp1, [d, 0], 1.0, Psi0::Cap { amp: 0.5 }).unwrap();
            let frame = OrthonormalFrame::build(basis, w, &g).unwrap();
            assert!(
                frame.cond_estimate < 1e6,
                "d={d}: condition {}",
                frame.cond_estimate
            );
        }
    }

    #[test]
    fn dense_path_conditioning_abort() {
        // an identity-scale matrix with one catastrophically tiny pivot trips
        // the guard with the IllConditioned error
        let basis = SectionBasis::new(ModelSpace::Cp1, [1, 0]).unwrap();
        let w = MetricWeight::pure_fs(ModelSpace::Cp1, [1, 0]).unwrap();
        let mut gram = CMat::identity(2);
        gram.set(1, 1, Complex64::new(1e-12, 0.0));
        match orthonormal_frame_from_gram(basis, w, 64, gram) {
            Err(CoreError::IllConditioned { cond, .. }) => assert!(cond > COND_LIMIT),
            other => panic!("expected conditioning abort, got {other:?}"),
        }
    }

    #[test]
    fn cache_roundtrip() {
        let dir = std::env::temp_dir().join("zc_frame_cache_test");
        std::fs::create_dir_all(&dir).unwrap();
        let g = build_grid(ModelSpace::Cp1, 32).unwrap();
        let d = 8u32;
        let basis = SectionBasis::new(ModelSpace::Cp1, [d, 0]).unwrap();
        let w = MetricWeight::new(ModelSpace::Cp1, [d, 0], 1.0, Psi0::Cap { amp: 0.5 }).unwrap();
        let frame = OrthonormalFrame::build(basis.clone(), w, &g).unwrap();
        let path = dir.join("f1.zcfr");
        write_frame_cache(&frame, &path).unwrap();
        let loaded = read_frame_cache(basis.clone(), w, 32, &path).unwrap();
        let p = ChartPoint::cp1_z(Complex64::new(0.3, -0.6));
        assert!((loaded.bergman_function(&p) - frame.bergman_function(&p)).abs() < 1e-12);
        // key change invalidates
        let w2 = MetricWeight::new(ModelSpace::Cp1, [d, 0], 1.0, Psi0::Cap { amp: 0.6 }).unwrap();
        assert!(matches!(
            read_frame_cache(basis, w2, 32, &path),
            Err(CoreError::CacheMismatch(_))
        ));
        std::fs::remove_file(&path).ok();
    }
}
