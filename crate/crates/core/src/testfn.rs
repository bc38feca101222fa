//! C^2 test functions on the model spaces.
//!
//! The sup over all C^2-normalized test forms in the exception-set
//! definition is not computable, so the experiments fix a reproducible
//! dictionary: radial functions, low-order spherical harmonics, and bump
//! functions per factor, each rescaled so the certified C^2 seminorm is ~1.
//!
//! Seminorm convention: every CP^1 factor is covered by the two standard
//! affine charts restricted to the closed unit disk, and the C^0/C^1/C^2
//! seminorms are the sampled maxima of the value, Euclidean gradient, and
//! Frobenius Hessian norms over the certification grid in each point's own
//! chart. The stored bounds carry a 5% pad so re-sampling on any grid of the
//! shipped resolutions stays below them.

use crate::grid::QuadratureGrid;
use crate::space::{ChartPoint, FactorPoint, ModelSpace};

/// Ambient sphere coordinates of a factor point:
/// X = 2 Re z / (1+|z|^2), Y = 2 Im z / (1+|z|^2), Z = (1-|z|^2)/(1+|z|^2).
pub fn sphere_xyz(fp: FactorPoint) -> (f64, f64, f64) {
    let c = fp.coord;
    let s = 1.0 + c.norm_sqr();
    let x = 2.0 * c.re / s;
    let y = 2.0 * c.im / s;
    let z = (1.0 - c.norm_sqr()) / s;
    if fp.chart == 0 {
        (x, y, z)
    } else {
        // w = 1/z flips Y and Z
        (x, -y, -z)
    }
}

/// Closed-form evaluation rules. `f` is the factor index.
#[derive(Debug, Clone)]
pub enum TestRule {
    One,
    X(usize),
    Y(usize),
    Z(usize),
    Z2(usize),
    Xy(usize),
    Xz(usize),
    Yz(usize),
    X2mY2(usize),
    /// t(1-t) = (1 - Z^2)/4, radial
    TOneMinusT(usize),
    CosPiZ(usize),
    /// exp(-kappa (1 - Z)), a bump at the chart origin
    BumpZ(usize, f64),
    /// exp(-kappa (1 - X)), a bump at an equator point
    BumpX(usize, f64),
    Product(Box<TestRule>, Box<TestRule>),
}

impl TestRule {
    pub fn eval(&self, p: &ChartPoint) -> f64 {
        match self {
            TestRule::One => 1.0,
            TestRule::X(f) => sphere_xyz(p.factor(*f)).0,
            TestRule::Y(f) => sphere_xyz(p.factor(*f)).1,
            TestRule::Z(f) => sphere_xyz(p.factor(*f)).2,
            TestRule::Z2(f) => {
                let z = sphere_xyz(p.factor(*f)).2;
                z * z
            }
            TestRule::Xy(f) => {
                let (x, y, _) = sphere_xyz(p.factor(*f));
                x * y
            }
            TestRule::Xz(f) => {
                let (x, _, z) = sphere_xyz(p.factor(*f));
                x * z
            }
            TestRule::Yz(f) => {
                let (_, y, z) = sphere_xyz(p.factor(*f));
                y * z
            }
            TestRule::X2mY2(f) => {
                let (x, y, _) = sphere_xyz(p.factor(*f));
                x * x - y * y
            }
            TestRule::TOneMinusT(f) => {
                let z = sphere_xyz(p.factor(*f)).2;
                (1.0 - z * z) / 4.0
            }
            TestRule::CosPiZ(f) => (std::f64::consts::PI * sphere_xyz(p.factor(*f)).2).cos(),
            TestRule::BumpZ(f, k) => (-k * (1.0 - sphere_xyz(p.factor(*f)).2)).exp(),
            TestRule::BumpX(f, k) => (-k * (1.0 - sphere_xyz(p.factor(*f)).0)).exp(),
            TestRule::Product(a, b) => a.eval(p) * b.eval(p),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestFunction {
    pub id: String,
    pub rule: TestRule,
    /// Multiplicative normalization applied to the rule.
    pub scale: f64,
    /// Certified seminorm bounds of the scaled function.
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl TestFunction {
    pub fn eval(&self, p: &ChartPoint) -> f64 {
        self.scale * self.rule.eval(p)
    }

    pub fn c2_norm(&self) -> f64 {
        self.c0.max(self.c1).max(self.c2)
    }

    /// The constant function 1: C^0 norm 1, no derivatives.
    pub fn one() -> TestFunction {
        TestFunction {
            id: "one".into(),
            rule: TestRule::One,
            scale: 1.0,
            c0: 1.0,
            c1: 0.0,
            c2: 0.0,
        }
    }

    /// Certify and normalize a rule over a grid. The returned function has
    /// sampled max(value, gradient, Hessian) magnitudes ~<= 1.
    pub fn certified(id: &str, rule: TestRule, grid: &QuadratureGrid) -> TestFunction {
        let (m0, m1, m2) = sample_seminorms(&rule, grid);
        let top = m0.max(m1).max(m2).max(1e-300);
        let scale = 1.0 / top;
        let pad = 1.05;
        TestFunction {
            id: id.into(),
            rule,
            scale,
            c0: m0 * scale * pad,
            c1: m1 * scale * pad,
            c2: m2 * scale * pad,
        }
    }
}

/// Sampled seminorm maxima of a rule: value, chart-Euclidean gradient norm,
/// Frobenius Hessian norm, by central differences in each node's own chart.
pub fn sample_seminorms(rule: &TestRule, grid: &QuadratureGrid) -> (f64, f64, f64) {
    let nf = grid.space.factors();
    let h = 1e-4;
    let mut m0: f64 = 0.0;
    let mut m1: f64 = 0.0;
    let mut m2: f64 = 0.0;
    for idx in 0..grid.n_nodes() {
        let p = grid.point(idx);
        let f0 = rule.eval(&p);
        m0 = m0.max(f0.abs());
        // real coordinates: (re, im) per factor
        let ncoord = 2 * nf;
        let shift = |i: usize, d: f64| -> ChartPoint {
            let mut q = p;
            let f = i / 2;
            if i % 2 == 0 {
                q.factors[f].coord.re += d;
            } else {
                q.factors[f].coord.im += d;
            }
            q
        };
        let mut grad2 = 0.0;
        let mut hess2 = 0.0;
        for i in 0..ncoord {
            let fp = rule.eval(&shift(i, h));
            let fm = rule.eval(&shift(i, -h));
            let g = (fp - fm) / (2.0 * h);
            grad2 += g * g;
            let dii = (fp - 2.0 * f0 + fm) / (h * h);
            hess2 += dii * dii;
            for j in (i + 1)..ncoord {
                let shift2 = |di: f64, dj: f64| -> ChartPoint {
                    let mut q = shift(i, di);
                    let fj = j / 2;
                    if j % 2 == 0 {
                        q.factors[fj].coord.re += dj;
                    } else {
                        q.factors[fj].coord.im += dj;
                    }
                    q
                };
                let dij = (rule.eval(&shift2(h, h)) - rule.eval(&shift2(h, -h))
                    - rule.eval(&shift2(-h, h))
                    + rule.eval(&shift2(-h, -h)))
                    / (4.0 * h * h);
                hess2 += 2.0 * dij * dij;
            }
        }
        m1 = m1.max(grad2.sqrt());
        m2 = m2.max(hess2.sqrt());
    }
    (m0, m1, m2)
}

/// The 12-element CP^1 dictionary: radial, angular-harmonic, and bump types.
pub fn cp1_dictionary(grid: &QuadratureGrid) -> Vec<TestFunction> {
    assert_eq!(grid.space, ModelSpace::Cp1);
    let rules: Vec<(&str, TestRule)> = vec![
        ("z", TestRule::Z(0)),
        ("x", TestRule::X(0)),
        ("y", TestRule::Y(0)),
        ("z2", TestRule::Z2(0)),
        ("xz", TestRule::Xz(0)),
        ("yz", TestRule::Yz(0)),
        ("x2-y2", TestRule::X2mY2(0)),
        ("xy", TestRule::Xy(0)),
        ("t(1-t)", TestRule::TOneMinusT(0)),
        ("cos_pi_z", TestRule::CosPiZ(0)),
        ("bump_z", TestRule::BumpZ(0, 2.0)),
        ("bump_x", TestRule::BumpX(0, 2.0)),
    ];
    rules
        .into_iter()
        .map(|(id, r)| TestFunction::certified(id, r, grid))
        .collect()
}

/// The 12-element CP^1 x CP^1 dictionary.
pub fn cp1xcp1_dictionary(grid: &QuadratureGrid) -> Vec<TestFunction> {
    assert_eq!(grid.space, ModelSpace::Cp1xCp1);
    let prod = |a: TestRule, b: TestRule| TestRule::Product(Box::new(a), Box::new(b));
    let rules: Vec<(&str, TestRule)> = vec![
        ("z1", TestRule::Z(0)),
        ("z2", TestRule::Z(1)),
        ("x1", TestRule::X(0)),
        ("y2", TestRule::Y(1)),
        ("z1*z2", prod(TestRule::Z(0), TestRule::Z(1))),
        ("x1*z2", prod(TestRule::X(0), TestRule::Z(1))),
        ("x1*x2", prod(TestRule::X(0), TestRule::X(1))),
        ("y1*y2", prod(TestRule::Y(0), TestRule::Y(1))),
        ("tt1*tt2", prod(TestRule::TOneMinusT(0), TestRule::TOneMinusT(1))),
        ("cos_pi_z1", TestRule::CosPiZ(0)),
        ("bump_z1*bump_z2", prod(TestRule::BumpZ(0, 2.0), TestRule::BumpZ(1, 2.0))),
        ("z1^2", TestRule::Z2(0)),
    ];
    rules
        .into_iter()
        .map(|(id, r)| TestFunction::certified(id, r, grid))
        .collect()
}

/// Dictionary selection by name, as referenced from experiment configs.
pub fn dictionary(name: &str, grid: &QuadratureGrid) -> Option<Vec<TestFunction>> {
    match (name, grid.space) {
        ("cp1_default", ModelSpace::Cp1) => Some(cp1_dictionary(grid)),
        ("cp1xcp1_default", ModelSpace::Cp1xCp1) => Some(cp1xcp1_dictionary(grid)),
        _ => None,
    }
}
