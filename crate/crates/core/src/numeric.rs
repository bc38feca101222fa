//! Small numerical building blocks: Gauss–Legendre rules on [0, 1],
//! deterministic pairwise summation, binomial coefficients in log space.

/// Gauss–Legendre nodes and weights on [0, 1].
///
/// Nodes are computed by Newton iteration on the Legendre polynomial with
/// the usual Chebyshev-based initial guesses; weights sum to 1 to machine
/// precision. Exact for polynomials of degree <= 2n - 1, which is what makes
/// Gram matrices of scaled monomials exact in the t variable.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        // map [-1, 1] -> [0, 1]; symmetric counterpart
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Midpoint nodes and equal weights on [0, 1]; second-order accurate.
/// Used by the uniform grid kind, where finite differences need equal spacing.
pub fn midpoint_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / n as f64;
    let nodes = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let weights = vec![h; n];
    (nodes, weights)
}

/// Pairwise (cascade) summation. Deterministic for a fixed input order and
/// independent of worker count, which the reduction contract requires.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Weighted dot product with pairwise reduction.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    fn go(a: &[f64], b: &[f64]) -> f64 {
        match a.len() {
            0 => 0.0,
            1 => a[0] * b[0],
            2 => a[0] * b[0] + a[1] * b[1],
            len => {
                let mid = len / 2;
                go(&a[..mid], &b[..mid]) + go(&a[mid..], &b[mid..])
            }
        }
    }
    go(a, b)
}

/// ln of the binomial coefficient C(n, k).
pub fn ln_binomial(n: u32, k: u32) -> f64 {
    assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// ln(n!) via lgamma-free summation. Degrees stay below a few thousand, so a
/// cached running sum is plenty fast and exact to double rounding.
pub fn ln_factorial(n: u32) -> f64 {
    let mut acc = 0.0;
    for i in 2..=n as u64 {
        acc += (i as f64).ln();
    }
    acc
}

/// Exact binomial coefficient, saturating errors via checked u128 arithmetic.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num.checked_mul((n - i) as u128)?;
        num /= (i + 1) as u128;
    }
    Some(num)
}

/// Ordinary least squares fit y = intercept + slope * x.
/// Returns (slope, intercept, residual standard error of the slope).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    assert!(x.len() >= 2);
    let mx = pairwise_sum(x) / n;
    let my = pairwise_sum(y) / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut sse = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let r = yi - intercept - slope * xi;
        sse += r * r;
    }
    let dof = (x.len().max(3) - 2) as f64;
    let se = (sse / dof / sxx).sqrt();
    (slope, intercept, se)
}
