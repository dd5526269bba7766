//! Degree-of-freedom numbering for the MINI velocity, P1 pressure and P1
//! concentration spaces.
//!
//! Velocity coefficients are component-blocked: for each component the
//! vertex values come first, then one bubble coefficient per triangle.
//! The monolithic flow system is ordered `[u_x | u_y | p | multiplier]`.

use crate::mesh::{Mesh, MeshId, Point};

#[derive(Debug, Clone)]
pub struct DofMap {
    mesh_id: MeshId,
    n_vertices: usize,
    n_triangles: usize,
    dirichlet_mask: Vec<bool>,
    dirichlet_values: Vec<f64>,
}

pub fn build_dofmap(mesh: &Mesh, dirichlet: impl Fn(Point) -> f64) -> DofMap {
    let mask = mesh.boundary_vertices().to_vec();
    let values = (0..mesh.n_vertices())
        .map(|v| if mask[v] { dirichlet(mesh.vertex(v)) } else { 0.0 })
        .collect();
    DofMap {
        mesh_id: mesh.id(),
        n_vertices: mesh.n_vertices(),
        n_triangles: mesh.n_triangles(),
        dirichlet_mask: mask,
        dirichlet_values: values,
    }
}

impl DofMap {
    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    /// Coefficients per velocity component.
    pub fn n_velocity_component(&self) -> usize {
        self.n_vertices + self.n_triangles
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.n_velocity_component()
    }

    pub fn n_pressure(&self) -> usize {
        self.n_vertices
    }

    pub fn n_concentration(&self) -> usize {
        self.n_vertices
    }

    /// Velocity, pressure and concentration unknowns together.
    pub fn total_dof(&self) -> usize {
        self.n_velocity() + self.n_pressure() + self.n_concentration()
    }

    /// Index of the vertex coefficient of velocity component `comp`.
    pub fn velocity_vertex(&self, comp: usize, v: usize) -> usize {
        comp * self.n_velocity_component() + v
    }

    /// Index of the bubble coefficient of velocity component `comp` on triangle `t`.
    pub fn velocity_bubble(&self, comp: usize, t: usize) -> usize {
        comp * self.n_velocity_component() + self.n_vertices + t
    }

    /// The eight velocity indices of a triangle: component-major, local
    /// functions `lambda_0, lambda_1, lambda_2, b`.
    pub fn element_velocity(&self, tri: [usize; 3], t: usize) -> [[usize; 4]; 2] {
        let mut out = [[0; 4]; 2];
        for (comp, row) in out.iter_mut().enumerate() {
            for k in 0..3 {
                row[k] = self.velocity_vertex(comp, tri[k]);
            }
            row[3] = self.velocity_bubble(comp, t);
        }
        out
    }

    pub fn pressure_offset(&self) -> usize {
        self.n_velocity()
    }

    pub fn multiplier_index(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    /// Size of the monolithic flow system.
    pub fn n_flow_system(&self) -> usize {
        self.n_velocity() + self.n_pressure() + 1
    }

    pub fn is_dirichlet(&self, v: usize) -> bool {
        self.dirichlet_mask[v]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet_mask
    }

    pub fn dirichlet_value(&self, v: usize) -> f64 {
        self.dirichlet_values[v]
    }
}
