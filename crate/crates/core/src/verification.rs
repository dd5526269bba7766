//! Manufactured solution, exact-error norms and derived metrics.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::basis::{BasisEval, ElementGeometry};
use crate::dofmap::{build_dofmap, DofMap};
use crate::error::{Error, Result};
use crate::mesh::{build_uniform_unit_square, Mesh, Point};
use crate::problem::{PhysicalParams, ProblemData, Tensor2};
use crate::quadrature::triangle_rule;
use crate::state::DiscreteState;

/// Gaussian vortex `u = curl ψ` with `ψ = exp(-δ|x - (½,½)|²)`, the
/// polynomial pressure `x(x-⅔)y(y-⅔)` and the concentration
/// `x²(x-1)²y²(y-1)² ψ`.
#[derive(Debug)]
pub struct ExactSolution {
    pub delta: f64,
    norms: OnceLock<ExactNorms>,
}

impl Clone for ExactSolution {
    fn clone(&self) -> Self {
        ExactSolution { delta: self.delta, norms: self.norms.clone() }
    }
}

fn bump(s: f64) -> [f64; 3] {
    let t = s * (s - 1.0);
    [t * t, 2.0 * t * (2.0 * s - 1.0), 12.0 * s * s - 12.0 * s + 2.0]
}

impl ExactSolution {
    pub fn new(delta: f64) -> Self {
        ExactSolution { delta, norms: OnceLock::new() }
    }

    pub fn psi(&self, x: Point) -> f64 {
        let (dx, dy) = (x[0] - 0.5, x[1] - 0.5);
        (-self.delta * (dx * dx + dy * dy)).exp()
    }

    pub fn psi_grad(&self, x: Point) -> Point {
        let e = self.psi(x);
        [-2.0 * self.delta * (x[0] - 0.5) * e, -2.0 * self.delta * (x[1] - 0.5) * e]
    }

    /// `(∂ψ/∂y, -∂ψ/∂x)`
    pub fn velocity(&self, x: Point) -> Point {
        let g = self.psi_grad(x);
        [g[1], -g[0]]
    }

    /// `[[∂x u0, ∂y u0], [∂x u1, ∂y u1]]`
    pub fn velocity_grad(&self, x: Point) -> Tensor2 {
        let d = self.delta;
        let (dx, dy) = (x[0] - 0.5, x[1] - 0.5);
        let e = self.psi(x);
        [
            [4.0 * d * d * dx * dy * e, (-2.0 * d + 4.0 * d * d * dy * dy) * e],
            [(2.0 * d - 4.0 * d * d * dx * dx) * e, -4.0 * d * d * dx * dy * e],
        ]
    }

    pub fn divergence(&self, x: Point) -> f64 {
        let g = self.velocity_grad(x);
        g[0][0] + g[1][1]
    }

    pub fn pressure(&self, x: Point) -> f64 {
        x[0] * (x[0] - 2.0 / 3.0) * x[1] * (x[1] - 2.0 / 3.0)
    }

    pub fn pressure_grad(&self, x: Point) -> Point {
        [
            (2.0 * x[0] - 2.0 / 3.0) * x[1] * (x[1] - 2.0 / 3.0),
            x[0] * (x[0] - 2.0 / 3.0) * (2.0 * x[1] - 2.0 / 3.0),
        ]
    }

    pub fn concentration(&self, x: Point) -> f64 {
        bump(x[0])[0] * bump(x[1])[0] * self.psi(x)
    }

    pub fn concentration_grad(&self, x: Point) -> Point {
        let (bx, by) = (bump(x[0]), bump(x[1]));
        let q = bx[0] * by[0];
        let e = self.psi(x);
        let d = self.delta;
        [
            e * (bx[1] * by[0] - 2.0 * d * (x[0] - 0.5) * q),
            e * (bx[0] * by[1] - 2.0 * d * (x[1] - 0.5) * q),
        ]
    }

    pub fn concentration_laplacian(&self, x: Point) -> f64 {
        let (bx, by) = (bump(x[0]), bump(x[1]));
        let (dx, dy) = (x[0] - 0.5, x[1] - 0.5);
        let d = self.delta;
        let q = bx[0] * by[0];
        let lap_q = bx[2] * by[0] + bx[0] * by[2];
        let r2 = dx * dx + dy * dy;
        self.psi(x) * (lap_q - 4.0 * d * (dx * bx[1] * by[0] + dy * bx[0] * by[1]) + q * (4.0 * d * d * r2 - 4.0 * d))
    }

    /// Norms of the exact fields entering the relative error, computed once
    /// on a fine uniform mesh.
    pub fn norms(&self) -> ExactNorms {
        *self.norms.get_or_init(|| exact_norms(self, EXACT_NORM_GRID))
    }
}

/// Grid used for the cached exact norms.
pub const EXACT_NORM_GRID: usize = 64;

/// Concentration coupling of the manufactured momentum source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceCoupling {
    /// `f1(C) = (2 + C, 2 + 2 sin C)`, split as `(2, 2)` in `f0` plus
    /// `(C, 2 sin C)` so that `f1(0) = 0`.
    Standard,
    /// `f1 ≡ 0`.
    Decoupled,
}

/// Sources `f0`, `f1`, `g` making the exact solution solve the continuous
/// problem with the given coefficients; zero concentration on the boundary.
pub fn manufactured_data(params: &PhysicalParams, exact: &ExactSolution, coupling: ForceCoupling) -> ProblemData {
    let ex = exact.clone();
    let p = params.clone();
    let f1 = match coupling {
        ForceCoupling::Standard => Arc::new(|c: f64| [c, 2.0 * c.sin()]) as Arc<dyn Fn(f64) -> Point + Send + Sync>,
        ForceCoupling::Decoupled => Arc::new(|_| [0.0, 0.0]),
    };
    let f1_for_f0 = f1.clone();
    let f0 = Arc::new(move |x: Point| {
        let u = ex.velocity(x);
        let k = (p.k_inv)(x);
        let speed = u[0].hypot(u[1]);
        let gp = ex.pressure_grad(x);
        let f1c = f1_for_f0(ex.concentration(x));
        [0, 1].map(|c| {
            p.mu / p.rho * (k[c][0] * u[0] + k[c][1] * u[1]) + p.beta / p.rho * speed * u[c] + gp[c] - f1c[c]
        })
    });
    let ex = exact.clone();
    let p = params.clone();
    let g = Arc::new(move |x: Point| {
        let u = ex.velocity(x);
        let gc = ex.concentration_grad(x);
        -p.alpha * ex.concentration_laplacian(x) + u[0] * gc[0] + u[1] * gc[1] + p.r0 * ex.concentration(x)
    });
    ProblemData {
        f0,
        f1,
        f1_lipschitz: match coupling {
            ForceCoupling::Standard => 5f64.sqrt(),
            ForceCoupling::Decoupled => 0.0,
        },
        g,
        concentration_boundary: Arc::new(|_| 0.0),
    }
}

/// Coefficients of the manufactured case: `δ = 50`, `γ = β = 10`, all other
/// coefficients one, `K = I`.
pub fn manufactured_params() -> PhysicalParams {
    PhysicalParams { beta: 10.0, gamma: 10.0, ..PhysicalParams::unit() }
}

pub const MANUFACTURED_DELTA: f64 = 50.0;

/// `‖u‖_{L³}`, `‖∇p‖_{L^{3/2}}`, `‖C‖_{H¹}` of a set of fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactNorms {
    pub u_l3: f64,
    pub grad_p_l32: f64,
    pub c_h1: f64,
}

impl ExactNorms {
    pub fn sum(&self) -> f64 {
        self.u_l3 + self.grad_p_l32 + self.c_h1
    }
}

/// Pointwise values needed for the three norms.
struct NormSample {
    u: Point,
    grad_p: Point,
    c: f64,
    grad_c: Point,
}

fn accumulate(mesh: &Mesh, degree: usize, sample: impl Fn(usize, &[f64; 3], Point, &BasisEval) -> NormSample + Sync) -> Result<ExactNorms> {
    let rule = triangle_rule(degree)?;
    let parts: Vec<[f64; 3]> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = ElementGeometry::of(mesh, t);
            let mut acc = [0.0; 3];
            for (bary, w) in rule.iter() {
                let b = BasisEval::at(&geom, bary);
                let s = sample(t, bary, geom.map(bary), &b);
                let wq = w * geom.jacobian();
                acc[0] += wq * (s.u[0] * s.u[0] + s.u[1] * s.u[1]).powf(1.5);
                acc[1] += wq * (s.grad_p[0] * s.grad_p[0] + s.grad_p[1] * s.grad_p[1]).powf(0.75);
                acc[2] += wq * (s.c * s.c + s.grad_c[0] * s.grad_c[0] + s.grad_c[1] * s.grad_c[1]);
            }
            acc
        })
        .collect();
    let mut tot = [0.0; 3];
    for p in &parts {
        for k in 0..3 {
            tot[k] += p[k];
        }
    }
    Ok(ExactNorms { u_l3: tot[0].cbrt(), grad_p_l32: tot[1].powf(2.0 / 3.0), c_h1: tot[2].sqrt() })
}

fn exact_norms(exact: &ExactSolution, n: usize) -> ExactNorms {
    let mesh = build_uniform_unit_square(n).expect("positive grid size");
    accumulate(&mesh, 10, |_, _, x, _| NormSample {
        u: exact.velocity(x),
        grad_p: exact.pressure_grad(x),
        c: exact.concentration(x),
        grad_c: exact.concentration_grad(x),
    })
    .expect("degree 10 rule exists")
}

/// Norms of the discrete fields themselves.
pub fn discrete_norms(mesh: &Mesh, dofmap: &DofMap, state: &DiscreteState, degree: usize) -> Result<ExactNorms> {
    state.check(dofmap)?;
    accumulate(mesh, degree, |t, _, _, b| {
        let f = state.local(mesh, dofmap, t);
        NormSample { u: f.velocity(b), grad_p: f.pressure_grad(b), c: f.concentration(b), grad_c: f.concentration_grad(b) }
    })
}

/// Exact-error norms of a discrete state and the relative total error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub err_u_l3: f64,
    pub err_grad_p_l32: f64,
    pub err_c_h1: f64,
    pub exact: ExactNorms,
    /// `(sum of error norms) / (sum of exact norms)`.
    pub err: f64,
    pub dof: usize,
}

impl ErrorReport {
    pub fn error_sum(&self) -> f64 {
        self.err_u_l3 + self.err_grad_p_l32 + self.err_c_h1
    }

    /// `(η^L + η^D) / (sum of error norms)`.
    pub fn effectivity_index(&self, eta_l: f64, eta_d: f64) -> f64 {
        effectivity_index(eta_l, eta_d, self.error_sum())
    }
}

pub fn effectivity_index(eta_l: f64, eta_d: f64, error_sum: f64) -> f64 {
    (eta_l + eta_d) / error_sum
}

/// Errors of `state` against `exact` with `degree` quadrature.
pub fn error_norms(mesh: &Mesh, dofmap: &DofMap, state: &DiscreteState, exact: &ExactSolution, degree: usize) -> Result<ErrorReport> {
    state.check(dofmap)?;
    let e = accumulate(mesh, degree, |t, _, x, b| {
        let f = state.local(mesh, dofmap, t);
        let (u, uh) = (exact.velocity(x), f.velocity(b));
        let (gp, gph) = (exact.pressure_grad(x), f.pressure_grad(b));
        let (gc, gch) = (exact.concentration_grad(x), f.concentration_grad(b));
        NormSample {
            u: [u[0] - uh[0], u[1] - uh[1]],
            grad_p: [gp[0] - gph[0], gp[1] - gph[1]],
            c: exact.concentration(x) - f.concentration(b),
            grad_c: [gc[0] - gch[0], gc[1] - gch[1]],
        }
    })?;
    let exact_norms = exact.norms();
    Ok(ErrorReport {
        err_u_l3: e.u_l3,
        err_grad_p_l32: e.grad_p_l32,
        err_c_h1: e.c_h1,
        exact: exact_norms,
        err: e.sum() / exact_norms.sum(),
        dof: dofmap.total_dof(),
    })
}

/// `η^D / (‖u_h‖_{L³} + ‖∇p_h‖_{L^{3/2}} + ‖C_h‖_{H¹})`; NaN for a zero
/// solution with zero indicator.
pub fn relative_indicator_error(eta_d: f64, norms: &ExactNorms) -> f64 {
    eta_d / norms.sum()
}

/// Consecutive slopes `Δlog10(err) / Δlog10(dof)`.
pub fn rate_table(points: &[(usize, f64)]) -> Vec<f64> {
    points
        .windows(2)
        .map(|w| ((w[1].1).log10() - (w[0].1).log10()) / ((w[1].0 as f64).log10() - (w[0].0 as f64).log10()))
        .collect()
}

/// Nodal interpolant of the exact solution: P1 values at vertices, zero
/// bubbles, boundary concentration from `dofmap`.
pub fn interpolate(mesh: &Mesh, dofmap: &DofMap, exact: &ExactSolution) -> Result<DiscreteState> {
    if dofmap.mesh_id() != mesh.id() {
        return Err(Error::Structure("dofmap was built for a different mesh".into()));
    }
    let mut s = DiscreteState::initial(dofmap);
    for v in 0..mesh.n_vertices() {
        let x = mesh.vertex(v);
        let u = exact.velocity(x);
        s.velocity[dofmap.velocity_vertex(0, v)] = u[0];
        s.velocity[dofmap.velocity_vertex(1, v)] = u[1];
        s.pressure[v] = exact.pressure(x);
        if !dofmap.is_dirichlet(v) {
            s.concentration[v] = exact.concentration(x);
        }
    }
    Ok(s)
}

/// Uniform `n × n` mesh with its dofmap for the zero-boundary manufactured case.
pub fn manufactured_mesh(n: usize) -> Result<(Mesh, DofMap)> {
    let mesh = build_uniform_unit_square(n)?;
    let dofmap = build_dofmap(&mesh, |_| 0.0);
    Ok((mesh, dofmap))
}
