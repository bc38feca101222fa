//! Grid-sampled (1,1)-currents.
//!
//! A (1,1)-current with continuous coefficients is stored through the
//! Hermitian coefficient matrix H_ab = coefficient of (i/pi) dz_a ^ dzbar_b,
//! sampled at the grid nodes in the z-chart of every factor. On CP^1 only
//! h11 is populated. All mass/pairing conversions against the grid measure
//! (the normalized FS volume) happen here, so the conventions live in one
//! place:
//!
//!   density of T wedge omega^{n-1} against the grid measure
//!     = 2 sum_f h_ff (1 + |z_f|^2)^2,
//!   density of T wedge S (top degree, n = 2) against the grid measure
//!     = 4 mixdet(H, G) prod_f (1 + |z_f|^2)^2,
//!
//! with mixdet(H, G) = h11 g22 + h22 g11 - 2 Re(h12 conj(g12)).

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::grid::QuadratureGrid;
use crate::space::ModelSpace;

#[derive(Debug, Clone)]
pub struct OneOneCurrent {
    pub space: ModelSpace,
    pub h11: Vec<f64>,
    pub h22: Vec<f64>,
    pub h12: Vec<Complex64>,
}

impl OneOneCurrent {
    pub fn zero(space: ModelSpace, n_nodes: usize) -> Self {
        let (h22, h12) = match space {
            ModelSpace::Cp1 => (Vec::new(), Vec::new()),
            ModelSpace::Cp1xCp1 => (vec![0.0; n_nodes], vec![Complex64::new(0.0, 0.0); n_nodes]),
        };
        OneOneCurrent {
            space,
            h11: vec![0.0; n_nodes],
            h22,
            h12,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.h11.len()
    }

    pub fn check_grid(&self, grid: &QuadratureGrid) -> Result<()> {
        if self.space != grid.space || self.n_nodes() != grid.n_nodes() {
            return Err(CoreError::GridMismatch(
                "current sampled on a different grid".into(),
            ));
        }
        Ok(())
    }

    /// a*self + b*other, exact linear combination node by node.
    pub fn linear_comb(&self, a: f64, other: &OneOneCurrent, b: f64) -> OneOneCurrent {
        assert_eq!(self.space, other.space);
        assert_eq!(self.n_nodes(), other.n_nodes());
        let comb = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(&u, &v)| a * u + b * v).collect()
        };
        let h12 = self
            .h12
            .iter()
            .zip(&other.h12)
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        OneOneCurrent {
            space: self.space,
            h11: comb(&self.h11, &other.h11),
            h22: comb(&self.h22, &other.h22),
            h12,
        }
    }

    pub fn scaled(&self, a: f64) -> OneOneCurrent {
        let z = Self::zero(self.space, self.n_nodes());
        self.linear_comb(a, &z, 0.0)
    }

    /// Density of T wedge omega^{n-1} against the grid measure at each node.
    /// For a positive current this is a nonnegative field whose integral is
    /// the mass used throughout (total degree for curvature forms).
    pub fn trace_density(&self, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        let n = self.n_nodes();
        let mut out = vec![0.0; n];
        match self.space {
            ModelSpace::Cp1 => {
                for i in 0..n {
                    let s = grid.one_plus_r2(i, 0);
                    out[i] = 2.0 * self.h11[i] * s * s;
                }
            }
            ModelSpace::Cp1xCp1 => {
                for i in 0..n {
                    let s1 = grid.one_plus_r2(i, 0);
                    let s2 = grid.one_plus_r2(i, 1);
                    out[i] = 2.0 * self.h11[i] * s1 * s1 + 2.0 * self.h22[i] * s2 * s2;
                }
            }
        }
        Ok(out)
    }

    pub fn mass(&self, grid: &QuadratureGrid) -> Result<f64> {
        Ok(grid.integrate(&self.trace_density(grid)?))
    }

    /// Pointwise wedge with another (1,1)-current on CP^1 x CP^1; returns the
    /// top-degree density against the grid measure. The wedge of a pullback
    /// from one factor with itself vanishes identically through mixdet.
    pub fn wedge_density(&self, other: &OneOneCurrent, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        if self.space != ModelSpace::Cp1xCp1 {
            return Err(CoreError::InvalidInput(
                "wedge_density needs two (1,1)-currents on CP1 x CP1".into(),
            ));
        }
        self.check_grid(grid)?;
        other.check_grid(grid)?;
        let n = self.n_nodes();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mix = self.h11[i] * other.h22[i] + self.h22[i] * other.h11[i]
                - 2.0 * (self.h12[i] * other.h12[i].conj()).re;
            let s1 = grid.one_plus_r2(i, 0);
            let s2 = grid.one_plus_r2(i, 1);
            out[i] = 4.0 * mix * s1 * s1 * s2 * s2;
        }
        Ok(out)
    }
}

/// Mass norm of the difference of two currents: total variation of
/// (T - S) wedge omega^{n-1} over the grid. The computable order-zero
/// current distance used by the curvature-convergence checks.
pub fn current_norm_distance(
    t: &OneOneCurrent,
    s: &OneOneCurrent,
    grid: &QuadratureGrid,
) -> Result<f64> {
    t.check_grid(grid)?;
    s.check_grid(grid)?;
    let diff = t.linear_comb(1.0, s, -1.0);
    let dens = diff.trace_density(grid)?;
    let abs: Vec<f64> = dens.iter().map(|v| v.abs()).collect();
    Ok(grid.integrate(&abs))
}
