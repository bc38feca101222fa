//! Dense complex linear algebra for small matrices: Hermitian Cholesky,
//! triangular solves, and a balanced Hessenberg QR eigensolver used on
//! companion matrices. Sizes stay below ~500, so straightforward row-major
//! loops are fast enough and keep the dependencies flat.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub a: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            a: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.a[i * self.n + j] = v;
    }

    /// Max |G - G^H| entry; Hermitian check.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    /// Gershgorin upper bound on the spectral radius (for Hermitian input,
    /// an upper bound on the largest eigenvalue).
    pub fn gershgorin_max(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            let mut s = 0.0;
            for j in 0..self.n {
                s += self.get(i, j).norm();
            }
            m = m.max(s);
        }
        m
    }
}

/// Cholesky factor of a Hermitian positive definite matrix: G = L L^H with
/// L lower triangular (positive real diagonal). Returns (L, min pivot).
pub fn cholesky(g: &CMat) -> Result<(CMat, f64)> {
    let n = g.n;
    let defect = g.hermitian_defect();
    let scale = g.gershgorin_max().max(1e-300);
    if defect > 1e-12 * scale {
        return Err(CoreError::InvalidInput(format!(
            "matrix not Hermitian (defect {defect:.3e})"
        )));
    }
    let mut l = CMat::zeros(n);
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut s = g.get(j, j).re;
        for k in 0..j {
            s -= l.get(j, k).norm_sqr();
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(CoreError::Indefinite {
                pivot: s,
                context: format!("Cholesky breakdown at column {j} of {n}"),
            });
        }
        min_pivot = min_pivot.min(s);
        let d = s.sqrt();
        l.set(j, j, C64::new(d, 0.0));
        for i in (j + 1)..n {
            let mut v = g.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, v / d);
        }
    }
    Ok((l, min_pivot))
}

/// Solve L y = b with L lower triangular (in place on a copy).
pub fn solve_lower(l: &CMat, b: &[C64]) -> Vec<C64> {
    let n = l.n;
    let mut y = b.to_vec();
    for i in 0..n {
        let mut v = y[i];
        for k in 0..i {
            v -= l.get(i, k) * y[k];
        }
        y[i] = v / l.get(i, i);
    }
    y
}

/// Solve L^H x = b with L lower triangular.
pub fn solve_lower_adjoint(l: &CMat, b: &[C64]) -> Vec<C64> {
    let n = l.n;
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in (i + 1)..n {
            v -= l.get(k, i).conj() * x[k];
        }
        x[i] = v / l.get(i, i).conj();
    }
    x
}

/// Eigenvalues of the (balanced) companion matrix of the monic polynomial
/// z^n + b_{n-1} z^{n-1} + ... + b_0, i.e. the roots. `monic_low_to_high`
/// holds b_0..b_{n-1}.
pub fn companion_eigenvalues(monic_low_to_high: &[C64]) -> Result<Vec<C64>> {
    let n = monic_low_to_high.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![-monic_low_to_high[0]]);
    }
    if n == 2 {
        let (b0, b1) = (monic_low_to_high[0], monic_low_to_high[1]);
        let disc = (b1 * b1 - 4.0 * b0).sqrt();
        // stable quadratic: pick the sign that avoids cancellation
        let q = if ((-b1) + disc).norm() >= ((-b1) - disc).norm() {
            ((-b1) + disc) * 0.5
        } else {
            ((-b1) - disc) * 0.5
        };
        let r0 = q;
        let r1 = if q.norm() > 0.0 { b0 / q } else { -b1 - q };
        return Ok(vec![r0, r1]);
    }
    let mut h = CMat::zeros(n);
    for j in 0..n {
        h.set(j, n - 1, -monic_low_to_high[j]);
        if j + 1 < n {
            h.set(j + 1, j, C64::new(1.0, 0.0));
        }
    }
    balance_in_place(&mut h);
    hessenberg_qr_eigenvalues(h)
}

/// Parlett-Reinsch balancing with powers of two (exact in floating point);
/// diagonal similarity, preserves the Hessenberg pattern.
fn balance_in_place(h: &mut CMat) {
    let n = h.n;
    let radix = 2.0f64;
    let sq = radix * radix;
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += h.get(j, i).norm();
                    r += h.get(i, j).norm();
                }
            }
            if c == 0.0 || r == 0.0 || !c.is_finite() || !r.is_finite() {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sq;
            }
            g = r * radix;
            while c >= g {
                f /= radix;
                c /= sq;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                let ginv = 1.0 / f;
                for j in 0..n {
                    let v = h.get(i, j);
                    h.set(i, j, v * ginv);
                }
                for j in 0..n {
                    let v = h.get(j, i);
                    h.set(j, i, v * f);
                }
            }
        }
        if converged {
            break;
        }
    }
}

struct Givens {
    c: f64,
    s: C64,
}

fn givens(f: C64, g: C64) -> Givens {
    let fn_ = f.norm();
    let gn = g.norm();
    if gn == 0.0 {
        return Givens { c: 1.0, s: ZERO };
    }
    if fn_ == 0.0 {
        return Givens {
            c: 0.0,
            s: g.conj() / gn,
        };
    }
    let h = fn_.hypot(gn);
    let c = fn_ / h;
    let s = (f / fn_) * (g.conj() / h);
    Givens { c, s }
}

/// Shifted QR iteration with deflation on a complex upper Hessenberg matrix;
/// returns all n eigenvalues. Wilkinson shifts, occasional exceptional
/// shifts, bulge chasing with Givens rotations.
fn hessenberg_qr_eigenvalues(mut h: CMat) -> Result<Vec<C64>> {
    let n = h.n;
    let mut eigs = vec![ZERO; n];
    let mut hi = n - 1;
    let eps = f64::EPSILON;
    let max_total = 60 * n;
    let mut total_iters = 0usize;
    let mut iters_since_deflate = 0usize;

    loop {
        // deflate tiny subdiagonals
        let mut lo = 0;
        for i in (1..=hi).rev() {
            let sub = h.get(i, i - 1).norm();
            let local = h.get(i - 1, i - 1).norm() + h.get(i, i).norm();
            if sub <= eps * local.max(1e-300) {
                h.set(i, i - 1, ZERO);
                if i == hi {
                    // converged eigenvalue at hi
                } else {
                    lo = lo.max(i);
                }
            }
        }
        if h.get(hi, hi - 1) == ZERO || hi == 0 {
            eigs[hi] = h.get(hi, hi);
            if hi == 0 {
                break;
            }
            hi -= 1;
            iters_since_deflate = 0;
            if hi == 0 {
                eigs[0] = h.get(0, 0);
                break;
            }
            continue;
        }
        // active block [lo..=hi]: find its real start
        let mut start = hi;
        while start > 0 && h.get(start, start - 1) != ZERO {
            start -= 1;
        }
        let lo = start;
        if lo == hi {
            eigs[hi] = h.get(hi, hi);
            if hi == 0 {
                break;
            }
            hi -= 1;
            iters_since_deflate = 0;
            continue;
        }

        total_iters += 1;
        iters_since_deflate += 1;
        if total_iters > max_total {
            return Err(CoreError::Numeric(format!(
                "Hessenberg QR did not converge within {max_total} sweeps (n = {n})"
            )));
        }

        // Wilkinson shift from the trailing 2x2, exceptional every 12 sweeps
        let shift = if iters_since_deflate % 12 == 0 {
            let mag = h.get(hi, hi - 1).norm() + if hi >= 2 { h.get(hi - 1, hi - 2).norm() } else { 0.0 };
            h.get(hi, hi) + C64::new(0.75 * mag, 0.0)
        } else {
            let a = h.get(hi - 1, hi - 1);
            let b = h.get(hi - 1, hi);
            let c = h.get(hi, hi - 1);
            let d = h.get(hi, hi);
            let tr2 = (a + d) * 0.5;
            let disc = ((a - d) * 0.5).powu(2) + b * c;
            let sq = disc.sqrt();
            let l1 = tr2 + sq;
            let l2 = tr2 - sq;
            if (l1 - d).norm() <= (l2 - d).norm() {
                l1
            } else {
                l2
            }
        };

        // bulge chase
        let mut f = h.get(lo, lo) - shift;
        let mut g = h.get(lo + 1, lo);
        for k in lo..hi {
            let rot = givens(f, g);
            // rows k, k+1 over columns (k saturating back one)..=hi
            let jstart = k.saturating_sub(1).max(lo);
            for j in jstart..n.min(hi + 1) {
                let x = h.get(k, j);
                let y = h.get(k + 1, j);
                h.set(k, j, rot.c * x + rot.s * y);
                h.set(k + 1, j, -rot.s.conj() * x + rot.c * y);
            }
            // columns k, k+1 over rows lo..=min(k+2, hi)
            let iend = (k + 2).min(hi);
            for i in lo..=iend {
                let x = h.get(i, k);
                let y = h.get(i, k + 1);
                h.set(i, k, rot.c * x + rot.s.conj() * y);
                h.set(i, k + 1, -rot.s * x + rot.c * y);
            }
            if k + 2 <= hi {
                f = h.get(k + 1, k);
                g = h.get(k + 2, k);
            }
        }
    }
    Ok(eigs)
}

/// Aberth-Ehrlich simultaneous iteration; fallback solver for very high
/// degree. `poly_low_to_high` need not be monic; the caller guarantees a
/// nonzero leading coefficient. Initial guesses follow the FS radial law so
/// random-section polynomials start near their root belt.
pub fn aberth_roots(poly_low_to_high: &[C64], max_iter: usize) -> Result<Vec<C64>> {
    let d = poly_low_to_high.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = poly_low_to_high[d];
    if lead.norm() == 0.0 {
        return Err(CoreError::InvalidInput("zero leading coefficient".into()));
    }
    let mut z: Vec<C64> = (0..d)
        .map(|k| {
            let t = (k as f64 + 0.5) / d as f64;
            let r = (t / (1.0 - t)).sqrt();
            let ang = 2.0 * std::f64::consts::PI * (k as f64) * 0.6180339887498949 + 0.35;
            C64::from_polar(r, ang)
        })
        .collect();
    let eval = |x: C64| -> (C64, C64) {
        // Horner for p and p'
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in poly_low_to_high.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    };
    let eval_rev = |x: C64| -> (C64, C64) {
        // reversed-polynomial evaluation at w = 1/x for |x| > 1:
        // N = p/p' = x q(w) / (d q(w) - w q'(w))
        let w = 1.0 / x;
        let mut q = ZERO;
        let mut dq = ZERO;
        for &c in poly_low_to_high.iter() {
            dq = dq * w + q;
            q = q * w + c;
        }
        (q, dq)
    };
    for _ in 0..max_iter {
        let mut moved: f64 = 0.0;
        for i in 0..d {
            let zi = z[i];
            let newton = if zi.norm() <= 1.0 {
                let (p, dp) = eval(zi);
                if dp.norm() == 0.0 {
                    continue;
                }
                p / dp
            } else {
                let (q, dq) = eval_rev(zi);
                let w = 1.0 / zi;
                let den = q * (d as f64) - w * dq;
                if den.norm() == 0.0 {
                    continue;
                }
                zi * q / den
            };
            let mut s = ZERO;
            for (j, &zj) in z.iter().enumerate() {
                if j != i {
                    let diff = zi - zj;
                    if diff.norm() > 0.0 {
                        s += 1.0 / diff;
                    }
                }
            }
            let denom = C64::new(1.0, 0.0) - newton * s;
            let step = if denom.norm() > 1e-300 { newton / denom } else { newton };
            z[i] = zi - step;
            moved = moved.max(step.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-14 {
            break;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cholesky_roundtrip() {
        // G = B B^H + I is Hermitian positive definite
        let n = 6;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut b = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                b.set(i, j, c(rand(), rand()));
            }
        }
        let mut g = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { c(1.0, 0.0) } else { ZERO };
                for k in 0..n {
                    s += b.get(i, k) * b.get(j, k).conj();
                }
                g.set(i, j, s);
            }
        }
        let (l, min_pivot) = cholesky(&g).unwrap();
        assert!(min_pivot > 0.0);
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for k in 0..=i.min(j) {
                    s += l.get(i, k) * l.get(j, k).conj();
                }
                assert!((s - g.get(i, j)).norm() < 1e-12);
            }
        }
        // solve check: L y = b0 then L^H x = y reproduces G^{-1} b0
        let b0: Vec<C64> = (0..n).map(|i| c(i as f64, 1.0)).collect();
        let y = solve_lower(&l, &b0);
        let x = solve_lower_adjoint(&l, &y);
        for i in 0..n {
            let mut s = ZERO;
            for j in 0..n {
                s += g.get(i, j) * x[j];
            }
            assert!((s - b0[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut g = CMat::identity(3);
        g.set(2, 2, c(-1.0, 0.0));
        assert!(matches!(cholesky(&g), Err(CoreError::Indefinite { .. })));
    }

    #[test]
    fn companion_roots_of_unity() {
        for d in [3usize, 8, 17] {
            // z^d - 1
            let mut monic = vec![ZERO; d];
            monic[0] = c(-1.0, 0.0);
            let mut eigs = companion_eigenvalues(&monic).unwrap();
            assert_eq!(eigs.len(), d);
            eigs.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
            for e in &eigs {
                assert!((e.norm() - 1.0).abs() < 1e-8, "d={d}: |root| {}", e.norm());
                let p = e.powu(d as u32) - 1.0;
                assert!(p.norm() < 1e-7, "d={d}: residual {}", p.norm());
            }
        }
    }

    #[test]
    fn companion_matches_aberth_on_random_poly() {
        let d = 40usize;
        let mut state = 123456789u64;
        let mut rand = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let coeffs: Vec<C64> = (0..=d).map(|_| c(rand(), rand())).collect();
        let lead = coeffs[d];
        let monic: Vec<C64> = coeffs[..d].iter().map(|&v| v / lead).collect();
        let mut a = companion_eigenvalues(&monic).unwrap();
        let mut b = aberth_roots(&coeffs, 200).unwrap();
        let key = |z: &C64| (z.re * 1e6) as i64 ^ (z.im * 1e6) as i64;
        a.sort_by_key(key);
        b.sort_by_key(key);
        // match by nearest neighbor: for each companion root there must be an
        // Aberth root within 1e-6 chordally
        for ra in &a {
            let best = b
                .iter()
                .map(|rb| {
                    let num = (ra - rb).norm();
                    num / ((1.0 + ra.norm_sqr()) * (1.0 + rb.norm_sqr())).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "unmatched root {ra}: nearest {best}");
        }
    }

    #[test]
    fn quadratic_edge_cases() {
        // (z - 2)(z + 3) = z^2 + z - 6
        let roots = companion_eigenvalues(&[c(-6.0, 0.0), c(1.0, 0.0)]).unwrap();
        let mut r: Vec<f64> = roots.iter().map(|z| z.re).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((r[0] + 3.0).abs() < 1e-12);
        assert!((r[1] - 2.0).abs() < 1e-12);
    }
}
