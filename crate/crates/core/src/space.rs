//! Model spaces (CP^1 and CP^1 x CP^1) and chart points.
//!
//! Every point is stored in whichever standard affine chart keeps its
//! coordinate inside the closed unit disk: chart 0 carries the coordinate z,
//! chart 1 carries w = 1/z. This keeps all stored coordinates finite and
//! lets root polishing work at a uniform scale.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSpace {
    Cp1,
    Cp1xCp1,
}

impl ModelSpace {
    /// Complex dimension n.
    pub fn dim(self) -> usize {
        match self {
            ModelSpace::Cp1 => 1,
            ModelSpace::Cp1xCp1 => 2,
        }
    }

    /// Number of CP^1 factors (equals the complex dimension here).
    pub fn factors(self) -> usize {
        self.dim()
    }

    pub fn tag(self) -> &'static str {
        match self {
            ModelSpace::Cp1 => "cp1",
            ModelSpace::Cp1xCp1 => "cp1xcp1",
        }
    }
}

/// A point on one CP^1 factor, in the chart that keeps |coord| <= 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorPoint {
    /// 0: coordinate is z; 1: coordinate is w = 1/z.
    pub chart: u8,
    pub coord: Complex64,
}

impl FactorPoint {
    /// Build from a z-chart value, swapping charts when |z| > 1.
    pub fn from_z(z: Complex64) -> Self {
        let n = z.norm();
        if n.is_finite() && n <= 1.0 {
            FactorPoint { chart: 0, coord: z }
        } else if n.is_finite() {
            FactorPoint {
                chart: 1,
                coord: 1.0 / z,
            }
        } else {
            // the point at infinity is w = 0
            FactorPoint {
                chart: 1,
                coord: Complex64::new(0.0, 0.0),
            }
        }
    }

    /// The point z = infinity (w = 0 in chart 1).
    pub fn infinity() -> Self {
        FactorPoint {
            chart: 1,
            coord: Complex64::new(0.0, 0.0),
        }
    }

    /// z-chart value; infinite when the point is z = infinity.
    pub fn z(self) -> Complex64 {
        if self.chart == 0 {
            self.coord
        } else if self.coord.norm() > 0.0 {
            1.0 / self.coord
        } else {
            Complex64::new(f64::INFINITY, 0.0)
        }
    }

    /// t = |z|^2 / (1 + |z|^2), the measure-preserving radial parameter.
    pub fn t(self) -> f64 {
        let s = self.coord.norm_sqr();
        if self.chart == 0 {
            s / (1.0 + s)
        } else {
            1.0 / (1.0 + s)
        }
    }

    /// Chordal (projective) distance, scale-free across charts:
    /// |z1 - z2| / sqrt((1+|z1|^2)(1+|z2|^2)) extended continuously to infinity.
    pub fn chordal_distance(self, other: FactorPoint) -> f64 {
        let (a, b) = (self.homogeneous(), other.homogeneous());
        // |z1 w2 - z2 w1| for unit homogeneous representatives
        (a.0 * b.1 - b.0 * a.1).norm()
    }

    /// Unit homogeneous representative [z : w] with |z|^2 + |w|^2 = 1.
    pub fn homogeneous(self) -> (Complex64, Complex64) {
        let s = (1.0 + self.coord.norm_sqr()).sqrt();
        if self.chart == 0 {
            (self.coord / s, Complex64::new(1.0, 0.0) / s)
        } else {
            (Complex64::new(1.0, 0.0) / s, self.coord / s)
        }
    }

    /// Conjugate point (coordinate-wise complex conjugation).
    pub fn conj(self) -> Self {
        FactorPoint {
            chart: self.chart,
            coord: self.coord.conj(),
        }
    }
}

/// A point of the model space: one factor point per CP^1 factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub space: ModelSpace,
    pub factors: [FactorPoint; 2],
}

impl ChartPoint {
    pub fn cp1(f: FactorPoint) -> Self {
        ChartPoint {
            space: ModelSpace::Cp1,
            factors: [f, FactorPoint::from_z(Complex64::new(0.0, 0.0))],
        }
    }

    pub fn cp1_z(z: Complex64) -> Self {
        Self::cp1(FactorPoint::from_z(z))
    }

    pub fn product(f1: FactorPoint, f2: FactorPoint) -> Self {
        ChartPoint {
            space: ModelSpace::Cp1xCp1,
            factors: [f1, f2],
        }
    }

    pub fn product_z(z1: Complex64, z2: Complex64) -> Self {
        Self::product(FactorPoint::from_z(z1), FactorPoint::from_z(z2))
    }

    pub fn factor(&self, i: usize) -> FactorPoint {
        self.factors[i]
    }

    /// Validates that stored coordinates are finite.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.space.factors() {
            let c = self.factors[i].coord;
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(CoreError::InvalidInput(format!(
                    "non-finite coordinate in factor {i}"
                )));
            }
        }
        Ok(())
    }

    /// Max of per-factor chordal distances; the chart metric used for
    /// multiplicity clustering and Hausdorff comparisons.
    pub fn chordal_distance(&self, other: &ChartPoint) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.space.factors() {
            d = d.max(self.factors[i].chordal_distance(other.factors[i]));
        }
        d
    }
}
