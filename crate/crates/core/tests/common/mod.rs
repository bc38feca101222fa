//! Independent oracles for the integration and acceptance tests. These stay
//! deliberately naive: adaptive 1-D quadrature for closed-form integrals,
//! dense-grid minimization plus a self-contained two-variable Newton for
//! common zeros, and a deflation-based root finder for tiny degrees. None of
//! them share code with the solver paths they validate.

use num_complex::Complex64;

pub type C64 = Complex64;

/// Adaptive Simpson quadrature on [a, b].
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    rec(f, a, b, simpson(f, a, b), tol, 40)
}

/// Bivariate section evaluation from a raw coefficient matrix a[i][j] z1^i z2^j.
pub fn eval_bivariate(a: &[Vec<C64>], z1: C64, z2: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for row in a.iter().rev() {
        let mut r = C64::new(0.0, 0.0);
        for c in row.iter().rev() {
            r = r * z2 + c;
        }
        acc = acc * z1 + r;
    }
    acc
}

fn partials(a: &[Vec<C64>], z1: C64, z2: C64) -> (C64, C64, C64) {
    let h = 1e-7;
    let v = eval_bivariate(a, z1, z2);
    let d1 = (eval_bivariate(a, z1 + h, z2) - eval_bivariate(a, z1 - h, z2)) / (2.0 * h);
    let d2 = (eval_bivariate(a, z1, z2 + h) - eval_bivariate(a, z1, z2 - h)) / (2.0 * h);
    (v, d1, d2)
}

/// Brute-force common zeros: dense chart grid scan of the normalized section
/// moduli, Newton refinement of local minima, dedup. Only meant for tiny
/// intersection counts.
pub fn brute_force_common_zeros(
    a1: &[Vec<C64>],
    deg1: (u32, u32),
    a2: &[Vec<C64>],
    deg2: (u32, u32),
) -> Vec<(C64, C64)> {
    // chart scan: t, theta per factor; both charts covered through t > 1/2
    let nt = 20usize;
    let nth = 18usize;
    let coord = |it: usize, ith: usize| -> C64 {
        let t = (it as f64 + 0.5) / nt as f64;
        let th = 2.0 * std::f64::consts::PI * (ith as f64 + 0.5) / nth as f64;
        let r = (t / (1.0 - t)).sqrt();
        C64::from_polar(r, th)
    };
    let norm_at = |z1: C64, z2: C64| -> f64 {
        let w1 = (1.0 + z1.norm_sqr()).powi(-(deg1.0 as i32)) * (1.0 + z2.norm_sqr()).powi(-(deg1.1 as i32));
        let w2 = (1.0 + z1.norm_sqr()).powi(-(deg2.0 as i32)) * (1.0 + z2.norm_sqr()).powi(-(deg2.1 as i32));
        eval_bivariate(a1, z1, z2).norm_sqr() * w1 + eval_bivariate(a2, z1, z2).norm_sqr() * w2
    };
    let mut seeds: Vec<(C64, C64, f64)> = Vec::new();
    for i1 in 0..nt {
        for j1 in 0..nth {
            for i2 in 0..nt {
                for j2 in 0..nth {
                    let z1 = coord(i1, j1);
                    let z2 = coord(i2, j2);
                    seeds.push((z1, z2, norm_at(z1, z2)));
                }
            }
        }
    }
    seeds.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    let mut zeros: Vec<(C64, C64)> = Vec::new();
    for (z1s, z2s, _) in seeds.into_iter().take(2500) {
        // independent 2-variable Newton with FD Jacobian
        let mut z1 = z1s;
        let mut z2 = z2s;
        let mut ok = false;
        for _ in 0..60 {
            let (v1, a11, a12) = partials(a1, z1, z2);
            let (v2, a21, a22) = partials(a2, z1, z2);
            let det = a11 * a22 - a12 * a21;
            if det.norm() < 1e-300 {
                break;
            }
            let d1 = (v1 * a22 - v2 * a12) / det;
            let d2 = (a11 * v2 - a21 * v1) / det;
            z1 -= d1;
            z2 -= d2;
            if d1.norm() + d2.norm() < 1e-13 * (1.0 + z1.norm() + z2.norm()) {
                ok = true;
                break;
            }
            if z1.norm() > 1e8 || z2.norm() > 1e8 {
                break;
            }
        }
        if !ok {
            continue;
        }
        let scale1: f64 = a1.iter().flatten().map(|c| c.norm()).sum::<f64>()
            * (1.0 + z1.norm()).powi(deg1.0 as i32)
            * (1.0 + z2.norm()).powi(deg1.1 as i32);
        let scale2: f64 = a2.iter().flatten().map(|c| c.norm()).sum::<f64>()
            * (1.0 + z1.norm()).powi(deg2.0 as i32)
            * (1.0 + z2.norm()).powi(deg2.1 as i32);
        if eval_bivariate(a1, z1, z2).norm() > 1e-10 * scale1
            || eval_bivariate(a2, z1, z2).norm() > 1e-10 * scale2
        {
            continue;
        }
        let dup = zeros.iter().any(|(w1, w2)| {
            chordal(*w1, z1) < 1e-6 && chordal(*w2, z2) < 1e-6
        });
        if !dup {
            zeros.push((z1, z2));
        }
    }
    zeros
}

pub fn chordal(a: C64, b: C64) -> f64 {
    (a - b).norm() / ((1.0 + a.norm_sqr()) * (1.0 + b.norm_sqr())).sqrt()
}

/// Roots of a tiny-degree polynomial by many-start Newton plus synthetic
/// deflation; cross-validation oracle for the companion path, d <= 5.
pub fn brute_force_roots(coeffs: &[C64]) -> Vec<C64> {
    let mut work: Vec<C64> = coeffs.to_vec();
    while work.last().map(|c| c.norm() == 0.0).unwrap_or(false) {
        work.pop();
    }
    let mut roots = Vec::new();
    while work.len() > 1 {
        let mut best: Option<C64> = None;
        'starts: for it in 0..9 {
            for ith in 0..9 {
                let t = (it as f64 + 0.5) / 9.0;
                let th = 2.0 * std::f64::consts::PI * (ith as f64 + 0.5) / 9.0;
                let mut z = C64::from_polar((t / (1.0 - t)).sqrt(), th);
                for _ in 0..200 {
                    let (p, dp) = horner_pair(&work, z);
                    if dp.norm() == 0.0 {
                        break;
                    }
                    let step = p / dp;
                    z -= step;
                    if step.norm() < 1e-14 * (1.0 + z.norm()) {
                        let scale: f64 = work
                            .iter()
                            .enumerate()
                            .map(|(j, c)| c.norm() * z.norm().powi(j as i32))
                            .sum();
                        if horner_pair(&work, z).0.norm() <= 1e-10 * scale.max(1e-300) {
                            best = Some(z);
                            break 'starts;
                        }
                        break;
                    }
                }
            }
        }
        let z = match best {
            Some(z) => z,
            None => break,
        };
        roots.push(z);
        // synthetic division by (x - z)
        let mut next = vec![C64::new(0.0, 0.0); work.len() - 1];
        let mut carry = C64::new(0.0, 0.0);
        for j in (0..work.len() - 1).rev() {
            carry = work[j + 1] + carry * z;
            next[j] = carry;
        }
        work = next;
    }
    // polish on the original polynomial
    for z in roots.iter_mut() {
        for _ in 0..50 {
            let (p, dp) = horner_pair(coeffs, *z);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            *z -= step;
            if step.norm() < 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
    }
    roots
}

fn horner_pair(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}
