//! Quadrature grids on the model spaces.
//!
//! Each CP^1 factor is parametrized by the measure-preserving substitution
//! t = r^2 / (1 + r^2), theta = arg z, under which the normalized
//! Fubini-Study measure becomes dt dtheta / 2pi on [0,1) x [0,2pi). The
//! production grid places Gauss-Legendre nodes in t (so FS integrals of the
//! polynomial-type integrands appearing in Gram matrices are exact to
//! machine precision) and equispaced midpoints in theta (trapezoid on a
//! periodic function, exact for trigonometric degree below the node count).
//!
//! A uniform-midpoint grid kind is kept alongside for the finite-difference
//! dd^c operator, which needs equal spacing in t.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::numeric::{gauss_legendre_01, midpoint_01, pairwise_sum};
use crate::space::{ChartPoint, FactorPoint, ModelSpace};

pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    GaussLegendre,
    UniformMidpoint,
}

/// One CP^1 factor's 1-D rules: t nodes/weights and the angular count.
#[derive(Debug, Clone)]
pub struct Axis {
    pub t_nodes: Vec<f64>,
    pub t_weights: Vec<f64>,
    pub n_theta: usize,
}

impl Axis {
    pub fn n_t(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn theta(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * (i as f64 + 0.5) / self.n_theta as f64
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub space: ModelSpace,
    pub kind: GridKind,
    pub axes: Vec<Axis>,
}

/// Build the production (Gauss-Legendre) grid: `resolution` t nodes and
/// `resolution` angles per factor, so CP^1 gets resolution^2 nodes.
pub fn build_grid(space: ModelSpace, resolution: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::new(space, resolution, GridKind::GaussLegendre)
}

/// Uniform-midpoint variant used by the finite-difference dd^c.
pub fn build_uniform_grid(space: ModelSpace, resolution: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::new(space, resolution, GridKind::UniformMidpoint)
}

impl QuadratureGrid {
    pub fn new(space: ModelSpace, resolution: usize, kind: GridKind) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(CoreError::ResolutionTooLow {
                got: resolution,
                min: MIN_RESOLUTION,
            });
        }
        let (t_nodes, t_weights) = match kind {
            GridKind::GaussLegendre => gauss_legendre_01(resolution),
            GridKind::UniformMidpoint => midpoint_01(resolution),
        };
        let axis = Axis {
            t_nodes,
            t_weights,
            n_theta: resolution,
        };
        let axes = vec![axis; space.factors()];
        Ok(QuadratureGrid { space, kind, axes })
    }

    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.n_t() * a.n_theta).product()
    }

    /// Decompose a flat node index into per-factor (i_t, i_theta) pairs.
    /// Layout is row-major: factor 1 outermost, theta innermost per factor.
    pub fn split_index(&self, idx: usize) -> [(usize, usize); 2] {
        let mut out = [(0usize, 0usize); 2];
        let mut rest = idx;
        for f in (0..self.axes.len()).rev() {
            let a = &self.axes[f];
            let block = a.n_t() * a.n_theta;
            let local = rest % block;
            rest /= block;
            out[f] = (local / a.n_theta, local % a.n_theta);
        }
        out
    }

    pub fn flat_index(&self, parts: &[(usize, usize)]) -> usize {
        let mut idx = 0usize;
        for (f, a) in self.axes.iter().enumerate() {
            idx = idx * (a.n_t() * a.n_theta) + parts[f].0 * a.n_theta + parts[f].1;
        }
        idx
    }

    /// Node weight: the product of per-factor t weights over the angular count.
    pub fn weight(&self, idx: usize) -> f64 {
        let parts = self.split_index(idx);
        let mut w = 1.0;
        for (f, a) in self.axes.iter().enumerate() {
            w *= a.t_weights[parts[f].0] / a.n_theta as f64;
        }
        w
    }

    /// Per-factor (t, theta) parameters of a node.
    pub fn params(&self, idx: usize) -> Vec<(f64, f64)> {
        let parts = self.split_index(idx);
        self.axes
            .iter()
            .enumerate()
            .map(|(f, a)| (a.t_nodes[parts[f].0], a.theta(parts[f].1)))
            .collect()
    }

    pub fn point(&self, idx: usize) -> ChartPoint {
        let parts = self.split_index(idx);
        let mut fps = [FactorPoint::from_z(Complex64::new(0.0, 0.0)); 2];
        for (f, a) in self.axes.iter().enumerate() {
            fps[f] = factor_point_from_params(a.t_nodes[parts[f].0], a.theta(parts[f].1));
        }
        match self.space {
            ModelSpace::Cp1 => ChartPoint::cp1(fps[0]),
            ModelSpace::Cp1xCp1 => ChartPoint::product(fps[0], fps[1]),
        }
    }

    /// Integral of a node-sampled field against the grid measure
    /// (the normalized FS volume). Deterministic pairwise reduction.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.n_nodes(), "field length mismatch");
        let weighted: Vec<f64> = (0..values.len()).map(|i| values[i] * self.weight(i)).collect();
        pairwise_sum(&weighted)
    }

    pub fn integrate_fn(&self, f: impl Fn(&ChartPoint) -> f64) -> f64 {
        let values: Vec<f64> = (0..self.n_nodes()).map(|i| f(&self.point(i))).collect();
        self.integrate(&values)
    }

    pub fn sample_fn(&self, f: impl Fn(&ChartPoint) -> f64) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| f(&self.point(i))).collect()
    }

    /// Total mass of the grid measure; 1 up to rounding by construction.
    pub fn total_mass(&self) -> f64 {
        let ones = vec![1.0; self.n_nodes()];
        self.integrate(&ones)
    }

    pub fn same_layout(&self, other: &QuadratureGrid) -> bool {
        self.space == other.space
            && self.kind == other.kind
            && self.axes.len() == other.axes.len()
            && self
                .axes
                .iter()
                .zip(&other.axes)
                .all(|(a, b)| a.n_t() == b.n_t() && a.n_theta == b.n_theta)
    }

    pub fn require_same(&self, other: &QuadratureGrid) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(CoreError::GridMismatch(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.space, self.kind, other.space, other.kind
            )))
        }
    }

    /// (1 + |z_f|^2) at a node, computed from t: 1 / (1 - t).
    pub fn one_plus_r2(&self, idx: usize, f: usize) -> f64 {
        let parts = self.split_index(idx);
        1.0 / (1.0 - self.axes[f].t_nodes[parts[f].0])
    }

    /// CSV snapshot of a sampled field: node coordinates, weight, value.
    pub fn snapshot_csv<W: std::io::Write>(&self, values: &[f64], out: &mut W) -> Result<()> {
        assert_eq!(values.len(), self.n_nodes());
        match self.space {
            ModelSpace::Cp1 => writeln!(out, "t,theta,chart,re,im,weight,value")?,
            ModelSpace::Cp1xCp1 => writeln!(
                out,
                "t1,theta1,chart1,re1,im1,t2,theta2,chart2,re2,im2,weight,value"
            )?,
        }
        for i in 0..self.n_nodes() {
            let p = self.point(i);
            let params = self.params(i);
            let mut cols: Vec<String> = Vec::new();
            for (f, (t, th)) in params.iter().enumerate() {
                let fp = p.factor(f);
                cols.push(format!("{t}"));
                cols.push(format!("{th}"));
                cols.push(format!("{}", fp.chart));
                cols.push(format!("{}", fp.coord.re));
                cols.push(format!("{}", fp.coord.im));
            }
            cols.push(format!("{}", self.weight(i)));
            cols.push(format!("{}", values[i]));
            writeln!(out, "{}", cols.join(","))?;
        }
        Ok(())
    }
}

/// Chart point from (t, theta): r = sqrt(t/(1-t)), placed in the chart that
/// keeps the stored coordinate inside the unit disk.
pub fn factor_point_from_params(t: f64, theta: f64) -> FactorPoint {
    let (s, c) = theta.sin_cos();
    if t <= 0.5 {
        let r = (t / (1.0 - t)).sqrt();
        FactorPoint {
            chart: 0,
            coord: Complex64::new(r * c, r * s),
        }
    } else {
        // w = 1/z = (1/r) e^{-i theta}
        let rinv = ((1.0 - t) / t).sqrt();
        FactorPoint {
            chart: 1,
            coord: Complex64::new(rinv * c, -rinv * s),
        }
    }
}

/// Density of the normalized FS volume against Lebesgue measure of the
/// point's own chart coordinates: (1/pi) (1+|c|^2)^{-2} per factor.
pub fn fs_density(space: ModelSpace, point: &ChartPoint) -> f64 {
    let mut d = 1.0;
    for f in 0..space.factors() {
        let c = point.factor(f).coord;
        d *= (1.0 / std::f64::consts::PI) * (1.0 + c.norm_sqr()).powi(-2);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_low_resolution() {
        assert!(build_grid(ModelSpace::Cp1, 4).is_err());
        assert!(build_grid(ModelSpace::Cp1, 8).is_ok());
    }

    #[test]
    fn grid_mass_is_one() {
        for res in [8, 64, 128] {
            let g = build_grid(ModelSpace::Cp1, res).unwrap();
            assert!((g.total_mass() - 1.0).abs() < 1e-12, "res {res}");
            let u = build_uniform_grid(ModelSpace::Cp1, res).unwrap();
            assert!((u.total_mass() - 1.0).abs() < 1e-12);
        }
        let g2 = build_grid(ModelSpace::Cp1xCp1, 12).unwrap();
        assert!((g2.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(g2.n_nodes(), 12usize.pow(4));
    }

    #[test]
    fn node_count_cp1() {
        let g = build_grid(ModelSpace::Cp1, 64).unwrap();
        assert_eq!(g.n_nodes(), 64 * 64);
    }

    #[test]
    fn radial_moment_is_half() {
        // int t dmu = 1/2 (closed-form beta integral)
        let g = build_grid(ModelSpace::Cp1, 128).unwrap();
        let v = g.integrate_fn(|p| p.factor(0).t());
        assert!((v - 0.5).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn fs_density_values() {
        let p0 = ChartPoint::cp1_z(Complex64::new(0.0, 0.0));
        assert!((fs_density(ModelSpace::Cp1, &p0) - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        // density in the z chart decays at large |z|; read it in chart 0
        let pfar = ChartPoint::cp1(crate::space::FactorPoint {
            chart: 0,
            coord: Complex64::new(100.0, 0.0),
        });
        assert!(fs_density(ModelSpace::Cp1, &pfar) < 1e-6);
        let pp = ChartPoint::product_z(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let expect = 1.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert!((fs_density(ModelSpace::Cp1xCp1, &pp) - expect).abs() < 1e-15);
    }

    #[test]
    fn fs_density_integrates_to_one() {
        // cross-check: integrate fs_density against chart Lebesgue measure via
        // the grid (density x Lebesgue-to-grid Jacobian = 1 identically)
        let g = build_grid(ModelSpace::Cp1, 64).unwrap();
        let v = g.integrate_fn(|p| {
            let c = p.factor(0).coord;
            let lhs = fs_density(ModelSpace::Cp1, p);
            // dLeb/dmu at the node in the same chart
            let jac = std::f64::consts::PI * (1.0 + c.norm_sqr()).powi(2);
            lhs * jac
        });
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn index_roundtrip() {
        let g = build_grid(ModelSpace::Cp1xCp1, 9).unwrap();
        for idx in [0usize, 1, 80, 81, 3000, 9usize.pow(4) - 1] {
            let parts = g.split_index(idx);
            assert_eq!(g.flat_index(&parts), idx);
        }
    }

    #[test]
    fn refinement_second_order_on_uniform_grid() {
        // doubling resolution shrinks the error of a smooth integrand ~4x
        let exact = {
            // int exp(t) dmu = e - 1 in the t parameter
            std::f64::consts::E - 1.0
        };
        let err = |res: usize| {
            let g = build_uniform_grid(ModelSpace::Cp1, res).unwrap();
            (g.integrate_fn(|p| p.factor(0).t().exp()) - exact).abs()
        };
        let r1 = err(32) / err(64);
        let r2 = err(64) / err(128);
        assert!((3.0..5.0).contains(&r1), "{r1}");
        assert!((3.0..5.0).contains(&r2), "{r2}");
    }
}
