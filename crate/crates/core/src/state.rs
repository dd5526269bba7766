//! Discrete fields on a mesh and their element-local evaluation.

use crate::basis::BasisEval;
use crate::dofmap::DofMap;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshId, Point, Refinement};

/// Coefficient vectors of `(u_h, p_h, C_h)` on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    mesh_id: MeshId,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub concentration: Vec<f64>,
}

impl DiscreteState {
    /// Zero velocity and pressure; zero concentration except for the
    /// Dirichlet values on the boundary.
    pub fn initial(dofmap: &DofMap) -> Self {
        let concentration = (0..dofmap.n_concentration())
            .map(|v| if dofmap.is_dirichlet(v) { dofmap.dirichlet_value(v) } else { 0.0 })
            .collect();
        DiscreteState {
            mesh_id: dofmap.mesh_id(),
            velocity: vec![0.0; dofmap.n_velocity()],
            pressure: vec![0.0; dofmap.n_pressure()],
            concentration,
        }
    }

    pub fn from_parts(
        dofmap: &DofMap,
        velocity: Vec<f64>,
        pressure: Vec<f64>,
        concentration: Vec<f64>,
    ) -> Result<Self> {
        let s = DiscreteState { mesh_id: dofmap.mesh_id(), velocity, pressure, concentration };
        s.check(dofmap)?;
        Ok(s)
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    /// Verifies that the state lives on the dofmap's mesh with matching lengths.
    pub fn check(&self, dofmap: &DofMap) -> Result<()> {
        if self.mesh_id != dofmap.mesh_id() {
            return Err(Error::Structure("discrete state belongs to a different mesh".into()));
        }
        if self.velocity.len() != dofmap.n_velocity()
            || self.pressure.len() != dofmap.n_pressure()
            || self.concentration.len() != dofmap.n_concentration()
        {
            return Err(Error::Dimension("discrete state lengths do not match the dofmap".into()));
        }
        Ok(())
    }

    pub fn local(&self, mesh: &Mesh, dofmap: &DofMap, t: usize) -> LocalFields {
        let tri = mesh.triangle(t);
        let idx = dofmap.element_velocity(tri, t);
        LocalFields {
            u: [idx[0].map(|i| self.velocity[i]), idx[1].map(|i| self.velocity[i])],
            p: tri.map(|v| self.pressure[v]),
            c: tri.map(|v| self.concentration[v]),
        }
    }

    /// `∫_Ω p_h dx`.
    pub fn pressure_mean_integral(&self, mesh: &Mesh) -> f64 {
        (0..mesh.n_triangles())
            .map(|t| {
                let tri = mesh.triangle(t);
                mesh.area(t) / 3.0 * tri.iter().map(|&v| self.pressure[v]).sum::<f64>()
            })
            .sum()
    }

    /// Shifts the pressure so that `∫_Ω p_h dx = 0`.
    pub fn recenter_pressure(&mut self, mesh: &Mesh) {
        let shift = self.pressure_mean_integral(mesh) / mesh.total_area();
        self.pressure.iter_mut().for_each(|p| *p -= shift);
    }

    /// Transfers the state to a refined mesh: vertex values are kept, new
    /// vertices take the mean of the bisected edge (exact for P1 traces),
    /// bubbles restart from zero and the pressure is re-centred. Concentration
    /// Dirichlet values are re-imposed from `dofmap`.
    pub fn prolongate(&self, refinement: &Refinement, old_dofmap: &DofMap, dofmap: &DofMap) -> Result<Self> {
        self.check(old_dofmap)?;
        let old_nv = old_dofmap.n_pressure();
        let nv = refinement.mesh.n_vertices();
        let extend = |old: &[f64]| {
            let mut out = Vec::with_capacity(nv);
            out.extend_from_slice(old);
            for &[a, b] in &refinement.new_vertices {
                out.push(0.5 * (out[a] + out[b]));
            }
            out
        };
        let mut velocity = vec![0.0; dofmap.n_velocity()];
        for comp in 0..2 {
            let start = comp * old_dofmap.n_velocity_component();
            let vals = extend(&self.velocity[start..start + old_nv]);
            for (v, val) in vals.into_iter().enumerate() {
                velocity[dofmap.velocity_vertex(comp, v)] = val;
            }
        }
        let mut concentration = extend(&self.concentration);
        for (v, c) in concentration.iter_mut().enumerate() {
            if dofmap.is_dirichlet(v) {
                *c = dofmap.dirichlet_value(v);
            }
        }
        let mut out = DiscreteState::from_parts(dofmap, velocity, extend(&self.pressure), concentration)?;
        out.recenter_pressure(&refinement.mesh);
        Ok(out)
    }
}

/// Coefficients of the three fields restricted to one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFields {
    /// Per component: vertex coefficients then the bubble coefficient.
    pub u: [[f64; 4]; 2],
    pub p: [f64; 3],
    pub c: [f64; 3],
}

impl LocalFields {
    pub fn velocity(&self, b: &BasisEval) -> Point {
        [b.enriched_value(&self.u[0]), b.enriched_value(&self.u[1])]
    }

    pub fn divergence(&self, b: &BasisEval) -> f64 {
        b.enriched_grad(&self.u[0])[0] + b.enriched_grad(&self.u[1])[1]
    }

    pub fn pressure_grad(&self, b: &BasisEval) -> Point {
        b.p1_grad(&self.p)
    }

    pub fn pressure(&self, b: &BasisEval) -> f64 {
        b.p1_value(&self.p)
    }

    pub fn concentration(&self, b: &BasisEval) -> f64 {
        b.p1_value(&self.c)
    }

    pub fn concentration_grad(&self, b: &BasisEval) -> Point {
        b.p1_grad(&self.c)
    }

    pub fn concentration_laplacian(&self, b: &BasisEval) -> f64 {
        b.p1_laplacian(&self.c)
    }

    /// Difference `self - other`, field by field.
    pub fn minus(&self, other: &LocalFields) -> LocalFields {
        let mut out = *self;
        for comp in 0..2 {
            for k in 0..4 {
                out.u[comp][k] -= other.u[comp][k];
            }
        }
        for k in 0..3 {
            out.p[k] -= other.p[k];
            out.c[k] -= other.c[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofmap::build_dofmap;
    use crate::mesh::{build_uniform_unit_square, refine, MarkSet};

    #[test]
    fn initial_state_respects_dirichlet() {
        let m = build_uniform_unit_square(3).unwrap();
        let d = build_dofmap(&m, |p| p[0] + 2.0);
        let s = DiscreteState::initial(&d);
        for v in 0..m.n_vertices() {
            let expected = if m.is_boundary_vertex(v) { m.vertex(v)[0] + 2.0 } else { 0.0 };
            assert_eq!(s.concentration[v], expected);
        }
    }

    #[test]
    fn mismatched_mesh_detected() {
        let m1 = build_uniform_unit_square(2).unwrap();
        let m2 = build_uniform_unit_square(2).unwrap();
        let s = DiscreteState::initial(&build_dofmap(&m1, |_| 0.0));
        assert!(matches!(s.check(&build_dofmap(&m2, |_| 0.0)), Err(Error::Structure(_))));
    }

    #[test]
    fn prolongation_keeps_vertex_values_and_interpolates_linear_fields() {
        let m = build_uniform_unit_square(3).unwrap();
        let d = build_dofmap(&m, |_| 0.0);
        let mut s = DiscreteState::initial(&d);
        let lin = |p: Point| 1.0 + 2.0 * p[0] - 0.5 * p[1];
        for v in 0..m.n_vertices() {
            let x = m.vertex(v);
            s.velocity[d.velocity_vertex(0, v)] = lin(x);
            s.velocity[d.velocity_vertex(1, v)] = -lin(x);
            s.pressure[v] = lin(x);
        }
        for t in 0..m.n_triangles() {
            s.velocity[d.velocity_bubble(0, t)] = 3.0;
        }
        let marks: MarkSet = [0, 5, 11].into_iter().collect();
        let r = refine(&m, &marks).unwrap();
        let d2 = build_dofmap(&r.mesh, |_| 0.0);
        let s2 = s.prolongate(&r, &d, &d2).unwrap();
        for v in 0..r.mesh.n_vertices() {
            let x = r.mesh.vertex(v);
            assert!((s2.velocity[d2.velocity_vertex(0, v)] - lin(x)).abs() < 1e-14);
            assert!((s2.velocity[d2.velocity_vertex(1, v)] + lin(x)).abs() < 1e-14);
        }
        for v in 0..m.n_vertices() {
            assert_eq!(s2.velocity[d2.velocity_vertex(0, v)], s.velocity[d.velocity_vertex(0, v)]);
        }
        assert!((0..r.mesh.n_triangles()).all(|t| s2.velocity[d2.velocity_bubble(0, t)] == 0.0));
        assert!(s2.pressure_mean_integral(&r.mesh).abs() < 1e-14);
    }
}
