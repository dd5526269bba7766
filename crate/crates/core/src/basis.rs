//! P1 and bubble shape functions on a physical triangle.

use crate::mesh::{Mesh, Point};

/// Affine geometry of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub coords: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates (constant on the element).
    pub grad_lambda: [Point; 3],
}

impl ElementGeometry {
    pub fn new(coords: [Point; 3]) -> Self {
        let [a, b, c] = coords;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let area = 0.5 * det;
        // grad lambda_i = rot(x_{i+2} - x_{i+1}) / det
        let mut grad_lambda = [[0.0; 2]; 3];
        for (i, g) in grad_lambda.iter_mut().enumerate() {
            let p = coords[(i + 1) % 3];
            let q = coords[(i + 2) % 3];
            *g = [(p[1] - q[1]) / det, (q[0] - p[0]) / det];
        }
        ElementGeometry { coords, area, grad_lambda }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        Self::new(mesh.triangle_coords(t))
    }

    /// Physical point of a barycentric coordinate triple.
    pub fn map(&self, bary: &[f64; 3]) -> Point {
        let [a, b, c] = self.coords;
        [
            bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
            bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
        ]
    }

    /// Jacobian factor turning reference-triangle weights into physical ones.
    pub fn jacobian(&self) -> f64 {
        2.0 * self.area
    }
}

/// Values, gradients and Laplacians of the four local scalar functions
/// `lambda_0, lambda_1, lambda_2, b` at one point; index 3 is the bubble.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    pub values: [f64; 4],
    pub grads: [Point; 4],
    pub laplacians: [f64; 4],
}

pub const BUBBLE: usize = 3;

impl BasisEval {
    pub fn at(geom: &ElementGeometry, bary: &[f64; 3]) -> Self {
        let [l0, l1, l2] = *bary;
        let g = geom.grad_lambda;
        let bubble = l0 * l1 * l2;
        let gb = [
            l1 * l2 * g[0][0] + l0 * l2 * g[1][0] + l0 * l1 * g[2][0],
            l1 * l2 * g[0][1] + l0 * l2 * g[1][1] + l0 * l1 * g[2][1],
        ];
        let dot = |a: Point, b: Point| a[0] * b[0] + a[1] * b[1];
        let lap_b = 2.0 * (l2 * dot(g[0], g[1]) + l1 * dot(g[0], g[2]) + l0 * dot(g[1], g[2]));
        BasisEval {
            values: [l0, l1, l2, bubble],
            grads: [g[0], g[1], g[2], gb],
            laplacians: [0.0, 0.0, 0.0, lap_b],
        }
    }

    /// Value of a P1 field with the given vertex coefficients.
    pub fn p1_value(&self, c: &[f64; 3]) -> f64 {
        self.values[0] * c[0] + self.values[1] * c[1] + self.values[2] * c[2]
    }

    pub fn p1_grad(&self, c: &[f64; 3]) -> Point {
        let mut g = [0.0; 2];
        for i in 0..3 {
            g[0] += c[i] * self.grads[i][0];
            g[1] += c[i] * self.grads[i][1];
        }
        g
    }

    pub fn p1_laplacian(&self, c: &[f64; 3]) -> f64 {
        (0..3).map(|i| c[i] * self.laplacians[i]).sum()
    }

    /// Value of a P1 + bubble field; `c[3]` is the bubble coefficient.
    pub fn enriched_value(&self, c: &[f64; 4]) -> f64 {
        (0..4).map(|i| c[i] * self.values[i]).sum()
    }

    pub fn enriched_grad(&self, c: &[f64; 4]) -> Point {
        let mut g = [0.0; 2];
        for i in 0..4 {
            g[0] += c[i] * self.grads[i][0];
            g[1] += c[i] * self.grads[i][1];
        }
        g
    }
}
