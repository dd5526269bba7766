//! Element-loop assembly of the two linear systems solved per Picard step.
//!
//! Flow step, for all `v` in the MINI space and `q` in the P1 space:
//!
//! ```text
//! γ(u,v) + (μ/ρ)(K⁻¹u,v) + (β/ρ)(|uⁱ|u,v) + (∇p,v) + λ·0 = γ(uⁱ,v) + (f0 + f1(Cⁱ), v)
//! (∇q,u) + λ ∫q = 0
//! ∫p = 0
//! ```
//!
//! Transport step, for all P1 `S` vanishing on the boundary:
//!
//! ```text
//! α(∇C,∇S) + (u·∇C,S) + ½(div u C,S) + r0(C,S) = (g,S)
//! ```
//!
//! with identity rows at the Dirichlet vertices.

use rayon::prelude::*;

use crate::basis::{BasisEval, ElementGeometry};
use crate::dofmap::DofMap;
use crate::error::{Error, Result};
use crate::linsolve::{CsrMatrix, TripletBuilder};
use crate::mesh::{Mesh, Point};
use crate::problem::{PhysicalParams, ProblemData};
use crate::quadrature::{triangle_rule, TriangleRule};
use crate::state::DiscreteState;

/// Mesh, numbering, coefficients and data of one discrete problem.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub mesh: &'a Mesh,
    pub dofmap: &'a DofMap,
    pub params: &'a PhysicalParams,
    pub data: &'a ProblemData,
}

impl<'a> Problem<'a> {
    pub fn new(
        mesh: &'a Mesh,
        dofmap: &'a DofMap,
        params: &'a PhysicalParams,
        data: &'a ProblemData,
    ) -> Result<Self> {
        if dofmap.mesh_id() != mesh.id() {
            return Err(Error::Structure("dofmap was built for a different mesh".into()));
        }
        Ok(Problem { mesh, dofmap, params, data })
    }

    pub(crate) fn check_state(&self, state: &DiscreteState) -> Result<()> {
        state.check(self.dofmap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Triangle quadrature degree for all volume integrals.
    pub degree: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { degree: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockLayout {
    /// `[velocity | pressure | multiplier]`
    Flow { n_velocity: usize, n_pressure: usize },
    Transport { n: usize },
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub layout: BlockLayout,
}

struct FlowLocal {
    vel: [usize; 8],
    pres: [usize; 3],
    a: [[f64; 8]; 8],
    b: [[f64; 3]; 8],
    m: [f64; 3],
    rhs: [f64; 8],
}

fn flow_local(problem: &Problem, state: &DiscreteState, rule: &TriangleRule, t: usize) -> FlowLocal {
    let Problem { mesh, dofmap, params, data } = *problem;
    let geom = ElementGeometry::of(mesh, t);
    let tri = mesh.triangle(t);
    let idx = dofmap.element_velocity(tri, t);
    let fields = state.local(mesh, dofmap, t);
    let mut loc = FlowLocal {
        vel: [
            idx[0][0], idx[0][1], idx[0][2], idx[0][3], idx[1][0], idx[1][1], idx[1][2], idx[1][3],
        ],
        pres: tri.map(|v| dofmap.pressure_offset() + v),
        a: [[0.0; 8]; 8],
        b: [[0.0; 3]; 8],
        m: [0.0; 3],
        rhs: [0.0; 8],
    };
    let drag = params.mu / params.rho;
    let forch = params.beta / params.rho;
    for (bary, w) in rule.iter() {
        let wq = w * geom.jacobian();
        let x = geom.map(bary);
        let basis = BasisEval::at(&geom, bary);
        let u_old = fields.velocity(&basis);
        let speed = u_old[0].hypot(u_old[1]);
        let k_inv = (params.k_inv)(x);
        let f = data.force(x, fields.concentration(&basis));
        let mut coef = [[0.0; 2]; 2];
        for c in 0..2 {
            for d in 0..2 {
                coef[c][d] = drag * k_inv[c][d];
            }
            coef[c][c] += params.gamma + forch * speed;
        }
        let phi = basis.values;
        for c in 0..2 {
            for a in 0..4 {
                let row = 4 * c + a;
                for d in 0..2 {
                    for b in 0..4 {
                        loc.a[row][4 * d + b] += wq * coef[c][d] * phi[a] * phi[b];
                    }
                }
                for j in 0..3 {
                    loc.b[row][j] += wq * phi[a] * basis.grads[j][c];
                }
                loc.rhs[row] += wq * (params.gamma * u_old[c] + f[c]) * phi[a];
            }
        }
        for j in 0..3 {
            loc.m[j] += wq * phi[j];
        }
    }
    loc
}

/// Assembles the linearised Darcy-Forchheimer system around `state`.
pub fn assemble_darcy_step(
    problem: &Problem,
    state: &DiscreteState,
    options: &AssemblyOptions,
) -> Result<LinearSystem> {
    problem.check_state(state)?;
    let rule = triangle_rule(options.degree)?;
    let dofmap = problem.dofmap;
    let n = dofmap.n_flow_system();
    let locals: Vec<FlowLocal> = (0..problem.mesh.n_triangles())
        .into_par_iter()
        .map(|t| flow_local(problem, state, &rule, t))
        .collect();

    let lambda = dofmap.multiplier_index();
    let mut trip = TripletBuilder::with_capacity(n, locals.len() * (64 + 48 + 6));
    let mut rhs = vec![0.0; n];
    for loc in &locals {
        for (r, &gi) in loc.vel.iter().enumerate() {
            for (c, &gj) in loc.vel.iter().enumerate() {
                trip.push(gi, gj, loc.a[r][c]);
            }
            for (j, &pj) in loc.pres.iter().enumerate() {
                trip.push(gi, pj, loc.b[r][j]);
                trip.push(pj, gi, loc.b[r][j]);
            }
            rhs[gi] += loc.rhs[r];
        }
        for (j, &pj) in loc.pres.iter().enumerate() {
            trip.push(pj, lambda, loc.m[j]);
            trip.push(lambda, pj, loc.m[j]);
        }
    }
    Ok(LinearSystem {
        matrix: trip.build(),
        rhs,
        layout: BlockLayout::Flow { n_velocity: dofmap.n_velocity(), n_pressure: dofmap.n_pressure() },
    })
}

struct TransportLocal {
    nodes: [usize; 3],
    a: [[f64; 3]; 3],
    rhs: [f64; 3],
}

fn transport_local(problem: &Problem, flow: &DiscreteState, rule: &TriangleRule, t: usize) -> TransportLocal {
    let Problem { mesh, dofmap, params, data } = *problem;
    let geom = ElementGeometry::of(mesh, t);
    let fields = flow.local(mesh, dofmap, t);
    let mut loc = TransportLocal { nodes: mesh.triangle(t), a: [[0.0; 3]; 3], rhs: [0.0; 3] };
    let dot = |a: Point, b: Point| a[0] * b[0] + a[1] * b[1];
    for (bary, w) in rule.iter() {
        let wq = w * geom.jacobian();
        let basis = BasisEval::at(&geom, bary);
        let u = fields.velocity(&basis);
        let div = fields.divergence(&basis);
        let g = (data.g)(geom.map(bary));
        let (phi, grad) = (basis.values, basis.grads);
        for i in 0..3 {
            for j in 0..3 {
                loc.a[i][j] += wq
                    * (params.alpha * dot(grad[j], grad[i])
                        + dot(u, grad[j]) * phi[i]
                        + (0.5 * div + params.r0) * phi[j] * phi[i]);
            }
            loc.rhs[i] += wq * g * phi[i];
        }
    }
    loc
}

/// Assembles the transport system with the velocity of `flow`.
pub fn assemble_transport_step(
    problem: &Problem,
    flow: &DiscreteState,
    options: &AssemblyOptions,
) -> Result<LinearSystem> {
    problem.check_state(flow)?;
    let rule = triangle_rule(options.degree)?;
    let dofmap = problem.dofmap;
    let n = dofmap.n_concentration();
    let locals: Vec<TransportLocal> = (0..problem.mesh.n_triangles())
        .into_par_iter()
        .map(|t| transport_local(problem, flow, &rule, t))
        .collect();
    let mut trip = TripletBuilder::with_capacity(n, locals.len() * 9 + n);
    let mut rhs = vec![0.0; n];
    for loc in &locals {
        for (i, &gi) in loc.nodes.iter().enumerate() {
            if dofmap.is_dirichlet(gi) {
                continue;
            }
            for (j, &gj) in loc.nodes.iter().enumerate() {
                trip.push(gi, gj, loc.a[i][j]);
            }
            rhs[gi] += loc.rhs[i];
        }
    }
    for v in 0..n {
        if dofmap.is_dirichlet(v) {
            trip.push(v, v, 1.0);
            rhs[v] = dofmap.dirichlet_value(v);
        }
    }
    Ok(LinearSystem { matrix: trip.build(), rhs, layout: BlockLayout::Transport { n } })
}

/// Quadrature means of a per-element field over every triangle.
///
/// The closure receives the triangle index, the barycentric point and the
/// physical point.
pub fn element_means<const N: usize>(
    mesh: &Mesh,
    degree: usize,
    f: impl Fn(usize, &[f64; 3], Point) -> [f64; N] + Sync,
) -> Result<Vec<[f64; N]>> {
    let rule = triangle_rule(degree)?;
    Ok((0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = ElementGeometry::of(mesh, t);
            let mut acc = [0.0; N];
            for (bary, w) in rule.iter() {
                let v = f(t, bary, geom.map(bary));
                for k in 0..N {
                    acc[k] += w * v[k];
                }
            }
            // weights sum to 1/2 on the reference triangle
            acc.map(|a| 2.0 * a)
        })
        .collect())
}

/// Element means of a scalar field.
pub fn element_mean(field: impl Fn(Point) -> f64 + Sync, mesh: &Mesh, degree: usize) -> Result<Vec<f64>> {
    Ok(element_means(mesh, degree, |_, _, x| [field(x)])?.into_iter().map(|[v]| v).collect())
}

/// Element means of `f0 + f1(C_h)` for the concentration of `state`.
pub fn force_means(problem: &Problem, state: &DiscreteState, degree: usize) -> Result<Vec<Point>> {
    problem.check_state(state)?;
    element_means(problem.mesh, degree, |t, bary, x| {
        let tri = problem.mesh.triangle(t);
        let c: f64 = (0..3).map(|k| bary[k] * state.concentration[tri[k]]).sum();
        problem.data.force(x, c)
    })
}
