//! Physical parameters and data fields of the coupled problem.

use std::fmt;
use std::sync::Arc;

use crate::basis::ElementGeometry;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::triangle_rule;

pub type Tensor2 = [[f64; 2]; 2];
pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;
pub type TensorField = Arc<dyn Fn(Point) -> Tensor2 + Send + Sync>;
pub type ConcentrationForce = Arc<dyn Fn(f64) -> Point + Send + Sync>;

#[derive(Clone)]
pub struct PhysicalParams {
    pub mu: f64,
    pub rho: f64,
    /// Forchheimer number.
    pub beta: f64,
    /// Diffusion coefficient.
    pub alpha: f64,
    /// Reaction coefficient.
    pub r0: f64,
    /// Damping of the Picard iteration.
    pub gamma: f64,
    /// Inverse permeability tensor field.
    pub k_inv: TensorField,
    /// Declared eigenvalue range of `k_inv`.
    pub k_inv_range: (f64, f64),
}

impl fmt::Debug for PhysicalParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhysicalParams")
            .field("mu", &self.mu)
            .field("rho", &self.rho)
            .field("beta", &self.beta)
            .field("alpha", &self.alpha)
            .field("r0", &self.r0)
            .field("gamma", &self.gamma)
            .field("k_inv_range", &self.k_inv_range)
            .finish_non_exhaustive()
    }
}

pub fn identity_tensor() -> TensorField {
    Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]])
}

impl PhysicalParams {
    /// All coefficients one, `K = I`, no Forchheimer drag.
    pub fn unit() -> Self {
        PhysicalParams {
            mu: 1.0,
            rho: 1.0,
            beta: 0.0,
            alpha: 1.0,
            r0: 1.0,
            gamma: 1.0,
            k_inv: identity_tensor(),
            k_inv_range: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("mu", self.mu), ("rho", self.rho), ("alpha", self.alpha)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        // gamma = 0 is undamped Picard
        if !(self.beta >= 0.0) || !(self.r0 >= 0.0) || !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig("beta, r0 and gamma must be non-negative".into()));
        }
        let (lo, hi) = self.k_inv_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidConfig(format!("invalid K^-1 range ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Spot-checks symmetry and the declared eigenvalue range of `K^-1` at
    /// the degree-2 quadrature points of every triangle.
    pub fn check_permeability(&self, mesh: &Mesh) -> Result<()> {
        let rule = triangle_rule(2)?;
        let (lo, hi) = self.k_inv_range;
        for t in 0..mesh.n_triangles() {
            let geom = ElementGeometry::of(mesh, t);
            for (bary, _) in rule.iter() {
                let k = (self.k_inv)(geom.map(bary));
                let scale = k[0][0].abs().max(k[1][1].abs()).max(1.0);
                if (k[0][1] - k[1][0]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidConfig(format!("K^-1 not symmetric in triangle {t}")));
                }
                let mean = 0.5 * (k[0][0] + k[1][1]);
                let rad = (0.25 * (k[0][0] - k[1][1]).powi(2) + k[0][1] * k[1][0]).sqrt();
                let tol = 1e-12 * scale;
                if mean - rad < lo - tol || mean + rad > hi + tol {
                    return Err(Error::InvalidConfig(format!(
                        "K^-1 eigenvalues [{}, {}] outside declared range in triangle {t}",
                        mean - rad,
                        mean + rad
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Source terms and boundary data. The momentum source is split as
/// `f(x, C) = f0(x) + f1(C)` with `f1(0) = 0`.
#[derive(Clone)]
pub struct ProblemData {
    pub f0: VectorField,
    pub f1: ConcentrationForce,
    /// Declared Lipschitz constant of `f1` (diagnostic only).
    pub f1_lipschitz: f64,
    pub g: ScalarField,
    pub concentration_boundary: ScalarField,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("f1_lipschitz", &self.f1_lipschitz)
            .finish_non_exhaustive()
    }
}

impl ProblemData {
    /// Everything identically zero.
    pub fn zero() -> Self {
        ProblemData {
            f0: Arc::new(|_| [0.0, 0.0]),
            f1: Arc::new(|_| [0.0, 0.0]),
            f1_lipschitz: 0.0,
            g: Arc::new(|_| 0.0),
            concentration_boundary: Arc::new(|_| 0.0),
        }
    }

    pub fn force(&self, x: Point, c: f64) -> Point {
        let a = (self.f0)(x);
        let b = (self.f1)(c);
        [a[0] + b[0], a[1] + b[1]]
    }

    pub fn validate(&self) -> Result<()> {
        let z = (self.f1)(0.0);
        if z != [0.0, 0.0] {
            return Err(Error::InvalidConfig(format!("f1(0) must vanish, got {z:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_unit_square;

    #[test]
    fn params_validation() {
        let mut p = PhysicalParams::unit();
        p.validate().unwrap();
        p.alpha = 0.0;
        assert!(p.validate().is_err());
        let mut p = PhysicalParams::unit();
        p.beta = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn permeability_spot_check() {
        let m = build_uniform_unit_square(2).unwrap();
        let mut p = PhysicalParams::unit();
        p.check_permeability(&m).unwrap();
        p.k_inv = Arc::new(|x| [[2.0 + x[0], 0.5], [0.5, 2.0]]);
        p.k_inv_range = (1.0, 4.0);
        p.check_permeability(&m).unwrap();
        p.k_inv = Arc::new(|_| [[1.0, 0.5], [0.0, 1.0]]);
        assert!(p.check_permeability(&m).is_err());
        p.k_inv = Arc::new(|_| [[10.0, 0.0], [0.0, 1.0]]);
        assert!(p.check_permeability(&m).is_err());
    }

    #[test]
    fn f1_must_vanish_at_zero() {
        let mut d = ProblemData::zero();
        d.validate().unwrap();
        d.f1 = Arc::new(|c| [1.0 + c, 0.0]);
        assert!(d.validate().is_err());
    }
}
