//! Hermitian metric weights, curvature currents, bundle sequences, and the
//! curvature-convergence verification.
//!
//! A weight is psi(z) = sum_f (d_f/2) log(1+|z_f|^2) + tau * psi0(z) with
//! h = e^{-2 psi}; the perturbation psi0 comes from a small catalog of global
//! smooth functions with closed-form complex Hessians, so curvature densities
//! never go through finite differences. Only smooth weights are supported;
//! singular metrics are out of scope.


use crate::error::{CoreError, Result};
use crate::field::{current_norm_distance, OneOneCurrent};
use crate::grid::QuadratureGrid;
use crate::space::{ChartPoint, ModelSpace};
use crate::testfn::sphere_xyz;

/// Smooth global perturbation potentials with closed-form dd^c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psi0 {
    Zero,
    /// amp * sum_f t_f, a radial "polar tilt" per factor; min 0, sup amp * n.
    Cap { amp: f64 },
    /// amp * X on one factor (first spherical harmonic); not radial.
    EquatorX { amp: f64, factor: usize },
}

impl Psi0 {
    pub fn eval(&self, p: &ChartPoint) -> f64 {
        match *self {
            Psi0::Zero => 0.0,
            Psi0::Cap { amp } => {
                let mut s = 0.0;
                for f in 0..p.space.factors() {
                    s += p.factor(f).t();
                }
                amp * s
            }
            Psi0::EquatorX { amp, factor } => amp * sphere_xyz(p.factor(factor)).0,
        }
    }

    /// sup |psi0| over the space.
    pub fn sup_norm(&self, space: ModelSpace) -> f64 {
        match *self {
            Psi0::Zero => 0.0,
            Psi0::Cap { amp } => amp.abs() * space.factors() as f64,
            Psi0::EquatorX { amp, .. } => amp.abs(),
        }
    }

    /// sup of |dd^c psi0| in FS-density units (used by the curvature
    /// positivity precondition).
    pub fn ddc_sup_fs(&self, space: ModelSpace) -> f64 {
        match *self {
            Psi0::Zero => 0.0,
            Psi0::Cap { amp } => 2.0 * amp.abs() * space.factors() as f64,
            Psi0::EquatorX { amp, .. } => 4.0 * amp.abs(),
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Psi0::Zero | Psi0::Cap { .. })
    }

    /// z-chart complex Hessian contribution of psi0 at a node, added onto a
    /// OneOneCurrent under assembly.
    fn add_hessian(&self, grid: &QuadratureGrid, idx: usize, cur: &mut OneOneCurrent) {
        match *self {
            Psi0::Zero => {}
            Psi0::Cap { amp } => {
                let params = grid.params(idx);
                for (f, (t, _)) in params.iter().enumerate() {
                    // dzdzbar t = (1-2t)(1-t)^2 in the z chart
                    let h = amp * (1.0 - 2.0 * t) * (1.0 - t) * (1.0 - t);
                    if f == 0 {
                        cur.h11[idx] += h;
                    } else {
                        cur.h22[idx] += h;
                    }
                }
            }
            Psi0::EquatorX { amp, factor } => {
                let p = grid.point(idx);
                let t = grid.params(idx)[factor].0;
                let x = sphere_xyz(p.factor(factor)).0;
                // dzdzbar X = -2 X (1-t)^2 in the z chart
                let h = amp * (-2.0) * x * (1.0 - t) * (1.0 - t);
                if factor == 0 {
                    cur.h11[idx] += h;
                } else {
                    cur.h22[idx] += h;
                }
            }
        }
    }
}

/// A smooth Hermitian metric weight on O(d) or O(d1, d2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricWeight {
    pub space: ModelSpace,
    pub degrees: [u32; 2],
    pub tau: f64,
    pub psi0: Psi0,
}

impl MetricWeight {
    pub fn new(space: ModelSpace, degrees: [u32; 2], tau: f64, psi0: Psi0) -> Result<Self> {
        if space == ModelSpace::Cp1 && degrees[1] != 0 {
            return Err(CoreError::InvalidInput(
                "CP1 weights carry a single degree".into(),
            ));
        }
        let w = MetricWeight {
            space,
            degrees,
            tau,
            psi0,
        };
        // When the perturbation is dominated by the degree, curvature must be
        // pointwise nonnegative; verify on a coarse grid at construction.
        let min_deg = (0..space.factors()).map(|f| degrees[f]).min().unwrap() as f64;
        if w.tau.abs() * psi0.ddc_sup_fs(space) <= min_deg {
            let grid = crate::grid::build_grid(space, 16)?;
            let cur = w.curvature(&grid)?;
            let dens = cur.trace_density(&grid)?;
            if let Some(v) = dens.iter().find(|v| **v < -1e-9) {
                return Err(CoreError::InvalidInput(format!(
                    "curvature not nonnegative despite dominated perturbation (min density {v})"
                )));
            }
        }
        Ok(w)
    }

    pub fn pure_fs(space: ModelSpace, degrees: [u32; 2]) -> Result<Self> {
        Self::new(space, degrees, 0.0, Psi0::Zero)
    }

    pub fn total_degree(&self) -> u32 {
        (0..self.space.factors()).map(|f| self.degrees[f]).sum()
    }

    /// z-chart weight value psi at a point (can be large; callers combine it
    /// with monomial logs before exponentiating).
    pub fn psi(&self, p: &ChartPoint) -> f64 {
        let mut s = 0.0;
        for f in 0..self.space.factors() {
            // (d/2) log(1+|z|^2) = -(d/2) log(1-t)
            let t = p.factor(f).t().min(1.0 - 1e-300);
            s += -(self.degrees[f] as f64 / 2.0) * (1.0 - t).ln();
        }
        s + self.tau * self.psi0.eval(p)
    }

    pub fn is_radial(&self) -> bool {
        self.psi0.is_radial() || self.tau == 0.0
    }

    /// Curvature current c1(L, h) = dd^c psi as a grid-sampled (1,1)-current.
    pub fn curvature(&self, grid: &QuadratureGrid) -> Result<OneOneCurrent> {
        if grid.space != self.space {
            return Err(CoreError::GridMismatch("weight vs grid space".into()));
        }
        let n = grid.n_nodes();
        let mut cur = OneOneCurrent::zero(self.space, n);
        for idx in 0..n {
            let params = grid.params(idx);
            for (f, (t, _)) in params.iter().enumerate() {
                // FS part: (d/2) (1+|z|^2)^{-2} = (d/2)(1-t)^2
                let h = (self.degrees[f] as f64 / 2.0) * (1.0 - t) * (1.0 - t);
                if f == 0 {
                    cur.h11[idx] += h;
                } else {
                    cur.h22[idx] += h;
                }
            }
        }
        if self.tau != 0.0 {
            let scaled = match self.psi0 {
                Psi0::Zero => Psi0::Zero,
                Psi0::Cap { amp } => Psi0::Cap { amp: amp * self.tau },
                Psi0::EquatorX { amp, factor } => Psi0::EquatorX {
                    amp: amp * self.tau,
                    factor,
                },
            };
            for idx in 0..n {
                scaled.add_hessian(grid, idx, &mut cur);
            }
        }
        for v in cur.h11.iter().chain(cur.h22.iter()) {
            if !v.is_finite() {
                return Err(CoreError::Numeric("non-finite curvature density".into()));
            }
        }
        Ok(cur)
    }

    /// 64-bit FNV-1a hash of the weight, part of the frame cache key.
    pub fn hash64(&self) -> u64 {
        let mut h = fnv1a(0xcbf29ce484222325, self.space.tag().as_bytes());
        h = fnv1a(h, &self.degrees[0].to_le_bytes());
        h = fnv1a(h, &self.degrees[1].to_le_bytes());
        h = fnv1a(h, &self.tau.to_bits().to_le_bytes());
        match self.psi0 {
            Psi0::Zero => h = fnv1a(h, b"zero"),
            Psi0::Cap { amp } => {
                h = fnv1a(h, b"cap");
                h = fnv1a(h, &amp.to_bits().to_le_bytes());
            }
            Psi0::EquatorX { amp, factor } => {
                h = fnv1a(h, b"eqx");
                h = fnv1a(h, &amp.to_bits().to_le_bytes());
                h = fnv1a(h, &(factor as u64).to_le_bytes());
            }
        }
        h
    }
}

pub fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Closed-form limit current descriptor:
/// omega_k = sum_f fs[f] * omega_FS_f + cap[f] * dd^c(t_f).
#[derive(Debug, Clone, Copy)]
pub struct LimitCurrent {
    pub fs: [f64; 2],
    pub cap: [f64; 2],
}

impl LimitCurrent {
    pub fn fs_cp1() -> Self {
        LimitCurrent {
            fs: [1.0, 0.0],
            cap: [0.0, 0.0],
        }
    }

    pub fn sample(&self, grid: &QuadratureGrid) -> OneOneCurrent {
        let n = grid.n_nodes();
        let mut cur = OneOneCurrent::zero(grid.space, n);
        for idx in 0..n {
            let params = grid.params(idx);
            for (f, (t, _)) in params.iter().enumerate() {
                let omt = 1.0 - t;
                let h = self.fs[f] * 0.5 * omt * omt
                    + self.cap[f] * (1.0 - 2.0 * t) * omt * omt;
                if f == 0 {
                    cur.h11[idx] += h;
                } else {
                    cur.h22[idx] += h;
                }
            }
        }
        cur
    }
}

/// A family {(L_kp, h_kp)}: for each of the m sequences, a weight per p,
/// the scale factors A_kp, the limit current, and the convergence data
/// (a_k, C0) the curvature-convergence check verifies.
#[derive(Debug, Clone)]
pub struct BundleSequence {
    pub space: ModelSpace,
    pub m: usize,
    pub p_list: Vec<u32>,
    /// weights[k][ip]
    pub weights: Vec<Vec<MetricWeight>>,
    /// scales[k][ip] = A_kp
    pub scales: Vec<Vec<f64>>,
    pub limits: Vec<LimitCurrent>,
    pub a_rates: Vec<f64>,
    pub c0: f64,
    /// Reported "same order" constant: all A ratios across k
    /// lie in [1/m1, m1].
    pub same_order_m1: f64,
}

impl BundleSequence {
    pub fn new(
        space: ModelSpace,
        p_list: Vec<u32>,
        weights: Vec<Vec<MetricWeight>>,
        scales: Vec<Vec<f64>>,
        limits: Vec<LimitCurrent>,
        a_rates: Vec<f64>,
        c0: f64,
        grid: &QuadratureGrid,
    ) -> Result<Self> {
        let m = weights.len();
        if m == 0 || m > space.dim() {
            return Err(CoreError::InvalidInput(format!(
                "m = {m} sequences on a space of dimension {}",
                space.dim()
            )));
        }
        if scales.len() != m || limits.len() != m || a_rates.len() != m {
            return Err(CoreError::InvalidInput(
                "schedule lengths inconsistent across k".into(),
            ));
        }
        for k in 0..m {
            if weights[k].len() != p_list.len() || scales[k].len() != p_list.len() {
                return Err(CoreError::InvalidInput(format!(
                    "sequence k={k} schedule length does not match the p list"
                )));
            }
            for (ip, &a) in scales[k].iter().enumerate() {
                if a <= 0.0 {
                    return Err(CoreError::InvalidInput(format!(
                        "A_kp must be positive (k={k}, p={})",
                        p_list[ip]
                    )));
                }
                if ip > 0 && a < scales[k][ip - 1] {
                    return Err(CoreError::InvalidInput(format!(
                        "A_kp not nondecreasing at k={k}, p={}",
                        p_list[ip]
                    )));
                }
            }
        }
        // Same-order constant across the m scale sequences.
        let mut m1: f64 = 1.0;
        for ip in 0..p_list.len() {
            for k in 0..m {
                for j in 0..m {
                    let r = scales[k][ip] / scales[j][ip];
                    m1 = m1.max(r).max(1.0 / r);
                }
            }
        }
        // Limit currents must be positive with positive mass, and all mixed
        // products must have positive mass.
        for (k, lim) in limits.iter().enumerate() {
            let cur = lim.sample(grid);
            let dens = cur.trace_density(grid)?;
            if dens.iter().any(|v| *v < -1e-10) {
                return Err(CoreError::InvalidInput(format!(
                    "limit current {k} is not nonnegative on the grid"
                )));
            }
            if grid.integrate(&dens) <= 0.0 {
                return Err(CoreError::InvalidInput(format!(
                    "limit current {k} has nonpositive mass"
                )));
            }
        }
        if space == ModelSpace::Cp1xCp1 && m == 2 {
            let c1 = limits[0].sample(grid);
            let c2 = limits[1].sample(grid);
            let wedge = c1.wedge_density(&c2, grid)?;
            if grid.integrate(&wedge) <= 0.0 {
                return Err(CoreError::InvalidInput(
                    "mixed limit product has nonpositive mass".into(),
                ));
            }
        }
        Ok(BundleSequence {
            space,
            m,
            p_list,
            weights,
            scales,
            limits,
            a_rates,
            c0,
            same_order_m1: m1,
        })
    }

    /// Default A_kp: curvature mass over limit mass.
    pub fn default_scale(
        weight: &MetricWeight,
        limit: &LimitCurrent,
        grid: &QuadratureGrid,
    ) -> Result<f64> {
        let num = weight.curvature(grid)?.mass(grid)?;
        let den = limit.sample(grid).mass(grid)?;
        if den <= 0.0 {
            return Err(CoreError::InvalidInput("limit current with zero mass".into()));
        }
        Ok(num / den)
    }

    pub fn index_of_p(&self, p: u32) -> Option<usize> {
        self.p_list.iter().position(|&q| q == p)
    }

    /// Product of A_kp over k at schedule position ip.
    pub fn scale_product(&self, ip: usize) -> f64 {
        (0..self.m).map(|k| self.scales[k][ip]).product()
    }

    /// Sum of A_kp over k at schedule position ip.
    pub fn scale_sum(&self, ip: usize) -> f64 {
        (0..self.m).map(|k| self.scales[k][ip]).sum()
    }

    /// The limit wedge omega_1 ^ ... ^ omega_m as a top-degree density
    /// against the grid measure (m = n cases only).
    pub fn limit_wedge_density(&self, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        match (self.space, self.m) {
            (ModelSpace::Cp1, 1) => self.limits[0].sample(grid).trace_density(grid),
            (ModelSpace::Cp1xCp1, 2) => {
                let c1 = self.limits[0].sample(grid);
                let c2 = self.limits[1].sample(grid);
                c1.wedge_density(&c2, grid)
            }
            _ => Err(CoreError::InvalidInput(
                "limit wedge needs m = n on the model space".into(),
            )),
        }
    }
}

/// One row of the curvature-convergence table.
#[derive(Debug, Clone)]
pub struct CurvatureConvergenceRow {
    pub k: usize,
    pub p: u32,
    pub a_kp: f64,
    pub distance: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct CurvatureConvergenceReport {
    pub rows: Vec<CurvatureConvergenceRow>,
    pub mixed_products_positive: bool,
    pub first_fail: Option<(usize, u32)>,
    pub pass: bool,
}

/// Verify || c1(L_kp, h_kp)/A_kp - omega_k || <= C0 A_kp^{-a_k} on the grid
/// for every (k, p) in the requested range.
pub fn check_curvature_convergence(
    seq: &BundleSequence,
    grid: &QuadratureGrid,
    p_range: &[u32],
) -> Result<CurvatureConvergenceReport> {
    let mut rows = Vec::new();
    let mut first_fail = None;
    for &p in p_range {
        let ip = seq
            .index_of_p(p)
            .ok_or_else(|| CoreError::InvalidInput(format!("p = {p} not in the sequence")))?;
        for k in 0..seq.m {
            let a = seq.scales[k][ip];
            let cur = seq.weights[k][ip].curvature(grid)?;
            let scaled = cur.scaled(1.0 / a);
            let lim = seq.limits[k].sample(grid);
            let distance = current_norm_distance(&scaled, &lim, grid)?;
            let bound = seq.c0 * a.powf(-seq.a_rates[k]);
            let pass = distance <= bound;
            if !pass && first_fail.is_none() {
                first_fail = Some((k, p));
            }
            rows.push(CurvatureConvergenceRow {
                k,
                p,
                a_kp: a,
                distance,
                bound,
                pass,
            });
        }
    }
    // positivity of all mixed limit products
    let mixed_ok = match (seq.space, seq.m) {
        (ModelSpace::Cp1xCp1, 2) => {
            let c1 = seq.limits[0].sample(grid);
            let c2 = seq.limits[1].sample(grid);
            let w = c1.wedge_density(&c2, grid)?;
            grid.integrate(&w) > 0.0
                && c1.mass(grid)? > 0.0
                && c2.mass(grid)? > 0.0
        }
        _ => seq
            .limits
            .iter()
            .map(|l| l.sample(grid).mass(grid))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .all(|&v| v > 0.0),
    };
    let pass = first_fail.is_none() && mixed_ok;
    Ok(CurvatureConvergenceReport {
        rows,
        mixed_products_positive: mixed_ok,
        first_fail,
        pass,
    })
}

/// Evaluate e^{-2 psi} |s(z)|^2-type quantities stably: returns psi so that
/// callers subtract it inside exponents.
pub fn weight_log_factor(weight: &MetricWeight, p: &ChartPoint) -> f64 {
    weight.psi(p)
}
