//! Element-wise a posteriori indicators and the Picard stopping test.
//!
//! Linearisation indicators measure the change between two iterates,
//! discretisation indicators the residuals of the discrete equations:
//!
//! ```text
//! L1 = ‖u⁺ - u‖_{L²(κ)}
//! L2 = ‖C⁺ - C‖_{H¹(κ)}
//! D1 = h_κ ‖αΔC⁺ - u⁺·∇C⁺ - ½ div u⁺ C⁺ - r0 C⁺ + g_h‖_{L²(κ)} + ½ Σ_e h_e^½ ‖α[∇C⁺·n]‖_{L²(e)}
//! D2 = ‖-∇p⁺ - γ(u⁺ - u) - (μ/ρ)K⁻¹u⁺ - (β/ρ)|u|u⁺ + f_h(·, C)‖_{L²(κ)}
//! D3 = h_κ ‖div u⁺‖_{L³(κ)} + Σ_e h_e^⅓ ‖φ_e‖_{L³(e)}
//! ```
//!
//! The D1 edge sum runs over interior edges, the D3 sum over all edges with
//! `φ_e = ½[u⁺·n]` inside and `u⁺·n` on the boundary.

use std::io::Write;

use rayon::prelude::*;

use crate::assembly::{element_mean, force_means, Problem};
use crate::basis::{BasisEval, ElementGeometry};
use crate::dofmap::DofMap;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{edge_rule, gauss_legendre, triangle_rule, TriangleRule};
use crate::state::{DiscreteState, LocalFields};

/// How per-element values are combined into global indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// `Σ_κ (Σ_k η_k²)^½`
    #[default]
    ElementSum,
    /// `(Σ_κ Σ_k η_k²)^½`
    L2,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Aggregation::ElementSum),
            "l2" => Ok(Aggregation::L2),
            other => Err(Error::InvalidConfig(format!("unknown aggregation '{other}'"))),
        }
    }
}

/// Integration of the D2 residual when `β > 0` makes it non-polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ResidualQuadrature {
    /// The volume rule on the whole element, `|uⁱ|` sampled at its points.
    #[default]
    Fixed,
    /// Recursive four-way subdivision until parent and children agree to
    /// `rel_tol` relative to the element integral.
    Adaptive { rel_tol: f64, max_depth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    pub degree: usize,
    pub edge_degree: usize,
    pub aggregation: Aggregation,
    pub residual_quadrature: ResidualQuadrature,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            degree: 10,
            edge_degree: 7,
            aggregation: Aggregation::ElementSum,
            residual_quadrature: ResidualQuadrature::Fixed,
        }
    }
}

/// Edge traces used by the jump terms.
///
/// Interior jumps are `trace(first) - trace(second)` along the stored edge
/// normal, which points from the first adjacent triangle into the second.
#[derive(Debug, Clone)]
pub struct EdgeJumpField {
    /// Edge quadrature parameters; the point is `(1-t) a + t b` for edge `[a, b]`.
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    phi: Vec<f64>,
    flux_jump: Vec<f64>,
    phi_ends: Vec<[f64; 2]>,
}

impl EdgeJumpField {
    fn nq(&self) -> usize {
        self.params.len()
    }

    /// `½[u·n]` (interior) or `u·n` (boundary) at the quadrature points.
    pub fn phi(&self, e: usize) -> &[f64] {
        &self.phi[e * self.nq()..(e + 1) * self.nq()]
    }

    /// `φ_e` at the two edge endpoints.
    pub fn phi_ends(&self, e: usize) -> [f64; 2] {
        self.phi_ends[e]
    }

    /// `[∇C·n]` at the quadrature points; zero on boundary edges.
    pub fn flux_jump(&self, e: usize) -> &[f64] {
        &self.flux_jump[e * self.nq()..(e + 1) * self.nq()]
    }

    pub fn n_edges(&self) -> usize {
        self.phi_ends.len()
    }
}

/// Barycentric coordinates in triangle `t` of the point `(1-s) a + s b`.
fn edge_point_bary(tri: [usize; 3], [a, b]: [usize; 2], s: f64) -> [f64; 3] {
    let mut bary = [0.0; 3];
    for k in 0..3 {
        if tri[k] == a {
            bary[k] = 1.0 - s;
        } else if tri[k] == b {
            bary[k] = s;
        }
    }
    bary
}

/// Normal traces of `u_h` and `∇C_h` on every edge.
pub fn compute_phi(mesh: &Mesh, dofmap: &DofMap, state: &DiscreteState, edge_degree: usize) -> Result<EdgeJumpField> {
    state.check(dofmap)?;
    let rule = edge_rule(edge_degree)?;
    let params: Vec<f64> = rule.points.iter().map(|p| p[1]).collect();
    let mut ends = params.clone();
    ends.extend([0.0, 1.0]);
    let nq = params.len();
    let per_edge: Vec<(Vec<f64>, Vec<f64>)> = (0..mesh.n_edges())
        .into_par_iter()
        .map(|e| {
            let edge = mesh.edge(e);
            let n = mesh.edge_normal(e);
            let adj = mesh.edge_triangles(e);
            let trace = |t: usize| {
                let geom = ElementGeometry::of(mesh, t);
                let tri = mesh.triangle(t);
                let f = state.local(mesh, dofmap, t);
                ends.iter()
                    .map(|&s| {
                        let b = BasisEval::at(&geom, &edge_point_bary(tri, edge, s));
                        let u = f.velocity(&b);
                        let g = f.concentration_grad(&b);
                        (u[0] * n[0] + u[1] * n[1], g[0] * n[0] + g[1] * n[1])
                    })
                    .collect::<Vec<_>>()
            };
            let first = trace(adj.first);
            match adj.second {
                None => (first.iter().map(|v| v.0).collect(), vec![0.0; nq + 2]),
                Some(t2) => {
                    let second = trace(t2);
                    first
                        .iter()
                        .zip(&second)
                        .map(|(a, b)| (0.5 * (a.0 - b.0), a.1 - b.1))
                        .unzip()
                }
            }
        })
        .collect();
    let mut field = EdgeJumpField {
        params,
        weights: rule.weights.clone(),
        phi: Vec::with_capacity(nq * mesh.n_edges()),
        flux_jump: Vec::with_capacity(nq * mesh.n_edges()),
        phi_ends: Vec::with_capacity(mesh.n_edges()),
    };
    for (phi, flux) in per_edge {
        field.phi.extend_from_slice(&phi[..nq]);
        field.flux_jump.extend_from_slice(&flux[..nq]);
        field.phi_ends.push([phi[nq], phi[nq + 1]]);
    }
    Ok(field)
}

fn check_pair(dofmap: &DofMap, prev: &DiscreteState, next: &DiscreteState) -> Result<()> {
    prev.check(dofmap)?;
    next.check(dofmap)
}

/// `∫_κ f` for every triangle, `f` evaluated on the local field difference.
fn per_element<F>(mesh: &Mesh, rule: &TriangleRule, f: F) -> Vec<f64>
where
    F: Fn(usize, &ElementGeometry, &[f64; 3], &BasisEval) -> f64 + Sync,
{
    (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = ElementGeometry::of(mesh, t);
            rule.iter()
                .map(|(bary, w)| w * f(t, &geom, bary, &BasisEval::at(&geom, bary)))
                .sum::<f64>()
                * geom.jacobian()
        })
        .collect()
}

fn diff_fields(mesh: &Mesh, dofmap: &DofMap, prev: &DiscreteState, next: &DiscreteState, t: usize) -> LocalFields {
    next.local(mesh, dofmap, t).minus(&prev.local(mesh, dofmap, t))
}

/// `‖u⁺ - u‖_{L²(κ)}` per element.
pub fn eta_l1(mesh: &Mesh, dofmap: &DofMap, prev: &DiscreteState, next: &DiscreteState, degree: usize) -> Result<Vec<f64>> {
    check_pair(dofmap, prev, next)?;
    let rule = triangle_rule(degree)?;
    let sq = per_element(mesh, &rule, |t, _, _, b| {
        let u = diff_fields(mesh, dofmap, prev, next, t).velocity(b);
        u[0] * u[0] + u[1] * u[1]
    });
    Ok(sq.into_iter().map(|v| v.max(0.0).sqrt()).collect())
}

/// `‖C⁺ - C‖_{H¹(κ)}` per element (full norm).
pub fn eta_l2(mesh: &Mesh, dofmap: &DofMap, prev: &DiscreteState, next: &DiscreteState, degree: usize) -> Result<Vec<f64>> {
    check_pair(dofmap, prev, next)?;
    let rule = triangle_rule(degree)?;
    let sq = per_element(mesh, &rule, |t, _, _, b| {
        let d = diff_fields(mesh, dofmap, prev, next, t);
        let c = d.concentration(b);
        let g = d.concentration_grad(b);
        c * c + g[0] * g[0] + g[1] * g[1]
    });
    Ok(sq.into_iter().map(|v| v.max(0.0).sqrt()).collect())
}

/// Transport residual indicator. `g_mean` holds the element means of `g`.
pub fn eta_d1(
    problem: &Problem,
    next: &DiscreteState,
    jumps: &EdgeJumpField,
    g_mean: &[f64],
    degree: usize,
) -> Result<Vec<f64>> {
    let Problem { mesh, dofmap, params, .. } = *problem;
    next.check(dofmap)?;
    if g_mean.len() != mesh.n_triangles() || jumps.n_edges() != mesh.n_edges() {
        return Err(Error::Dimension("element or edge data does not match the mesh".into()));
    }
    let rule = triangle_rule(degree)?;
    let vol = per_element(mesh, &rule, |t, _, _, b| {
        let f = next.local(mesh, dofmap, t);
        let u = f.velocity(b);
        let g = f.concentration_grad(b);
        let c = f.concentration(b);
        let r = params.alpha * f.concentration_laplacian(b) - (u[0] * g[0] + u[1] * g[1])
            - 0.5 * f.divergence(b) * c
            - params.r0 * c
            + g_mean[t];
        r * r
    });
    Ok((0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let edges: f64 = mesh
                .triangle_edges(t)
                .iter()
                .filter(|&&e| !mesh.is_boundary_edge(e))
                .map(|&e| {
                    let h = mesh.h_edge(e);
                    let sq: f64 = jumps
                        .flux_jump(e)
                        .iter()
                        .zip(&jumps.weights)
                        .map(|(j, w)| w * (params.alpha * j).powi(2))
                        .sum::<f64>()
                        * h;
                    0.5 * h.sqrt() * sq.max(0.0).sqrt()
                })
                .sum();
            mesh.h_elem(t) * vol[t].max(0.0).sqrt() + edges
        })
        .collect())
}

/// Adaptive integral over the reference triangle (area ½) by recursive
/// four-way subdivision, comparing each parent against its children.
pub fn adaptive_reference_integral(
    f: &(dyn Fn(&[f64; 3]) -> f64 + Sync),
    rule: &TriangleRule,
    rel_tol: f64,
    max_depth: usize,
) -> f64 {
    fn on(f: &(dyn Fn(&[f64; 3]) -> f64 + Sync), rule: &TriangleRule, c: &[[f64; 3]; 3], scale: f64) -> f64 {
        rule.iter()
            .map(|(p, w)| {
                let mut x = [0.0; 3];
                for k in 0..3 {
                    for j in 0..3 {
                        x[j] += p[k] * c[k][j];
                    }
                }
                w * f(&x)
            })
            .sum::<f64>()
            * scale
    }
    fn recurse(
        f: &(dyn Fn(&[f64; 3]) -> f64 + Sync),
        rule: &TriangleRule,
        c: [[f64; 3]; 3],
        scale: f64,
        parent: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let mid = |a: usize, b: usize| [0, 1, 2].map(|j| 0.5 * (c[a][j] + c[b][j]));
        let (m01, m12, m20) = (mid(0, 1), mid(1, 2), mid(2, 0));
        let kids = [[c[0], m01, m20], [m01, c[1], m12], [m20, m12, c[2]], [m12, m20, m01]];
        let s = 0.25 * scale;
        let vals = kids.map(|k| on(f, rule, &k, s));
        let sum: f64 = vals.iter().sum();
        if depth == 0 || (sum - parent).abs() <= tol {
            return sum;
        }
        kids.iter()
            .zip(vals)
            .map(|(k, v)| recurse(f, rule, *k, s, v, 0.5 * tol, depth - 1))
            .sum()
    }
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let whole = on(f, rule, &corners, 1.0);
    let tol = rel_tol * whole.abs() + f64::MIN_POSITIVE;
    recurse(f, rule, corners, 1.0, whole, tol, max_depth)
}

/// Momentum residual indicator. `f_mean` holds the element means of
/// `f0 + f1(C)` for the concentration of `prev`.
pub fn eta_d2(
    problem: &Problem,
    prev: &DiscreteState,
    next: &DiscreteState,
    f_mean: &[Point],
    options: &EstimatorOptions,
) -> Result<Vec<f64>> {
    let Problem { mesh, dofmap, params, .. } = *problem;
    check_pair(dofmap, prev, next)?;
    if f_mean.len() != mesh.n_triangles() {
        return Err(Error::Dimension("f_mean does not match the mesh".into()));
    }
    let rule = triangle_rule(options.degree)?;
    let drag = params.mu / params.rho;
    let forch = params.beta / params.rho;
    Ok((0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = ElementGeometry::of(mesh, t);
            let fo = prev.local(mesh, dofmap, t);
            let fn_ = next.local(mesh, dofmap, t);
            let integrand = |bary: &[f64; 3]| {
                let b = BasisEval::at(&geom, bary);
                let uo = fo.velocity(&b);
                let un = fn_.velocity(&b);
                let gp = fn_.pressure_grad(&b);
                let k = (params.k_inv)(geom.map(bary));
                let speed = uo[0].hypot(uo[1]);
                let r = [0, 1].map(|c| {
                    -gp[c] - params.gamma * (un[c] - uo[c]) - drag * (k[c][0] * un[0] + k[c][1] * un[1])
                        - forch * speed * un[c]
                        + f_mean[t][c]
                });
                r[0] * r[0] + r[1] * r[1]
            };
            let i = match options.residual_quadrature {
                ResidualQuadrature::Adaptive { rel_tol, max_depth } if forch != 0.0 => {
                    adaptive_reference_integral(&integrand, &rule, rel_tol, max_depth)
                }
                _ => rule.iter().map(|(p, w)| w * integrand(p)).sum(),
            };
            (i * geom.jacobian()).max(0.0).sqrt()
        })
        .collect())
}

/// Real roots of `a x² + b x + c` strictly inside `(0, 1)`.
fn roots_in_unit(a: f64, b: f64, c: f64, out: &mut Vec<f64>) {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return;
    }
    let mut push = |r: f64| {
        if r > 0.0 && r < 1.0 && r.is_finite() {
            out.push(r);
        }
    };
    if a.abs() <= 1e-15 * scale {
        if b != 0.0 {
            push(-c / b);
        }
        return;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        push(0.0);
        return;
    }
    push(q / a);
    push(c / q);
}

/// `∫ |q|³` over the reference triangle `{ξ, η ≥ 0, ξ + η ≤ 1}` for
/// `q = c0 + c1 ξ + c2 η + c3 ξ² + c4 ξη + c5 η²`.
///
/// Uses collapsed coordinates `ξ = s(1-t)`, `η = st`. For fixed `t` the
/// integrand is a polynomial in `s` between the roots of `q`, so the inner
/// integral is exact. The outer integrand is smooth between the parameters
/// where a root crosses `s = 1` or two roots meet, and Gauss rules are
/// applied piecewise between those.
pub fn reference_abs_cube_integral(c: [f64; 6]) -> f64 {
    let [c0, c1, c2, c3, c4, c5] = c;
    let (gs, gw) = gauss_legendre(4);
    let (gt, gtw) = gauss_legendre(12);
    let q0 = c3;
    let q1 = c4 - 2.0 * c3;
    let q2 = c3 - c4 + c5;
    let d = c2 - c1;
    let inner = |t: f64| {
        let a = q0 + q1 * t + q2 * t * t;
        let b = c1 + d * t;
        let mut cuts = vec![0.0];
        roots_in_unit(a, b, c0, &mut cuts);
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2)
            .map(|w| {
                let len = w[1] - w[0];
                gs.iter()
                    .zip(&gw)
                    .map(|(x, wt)| {
                        let s = w[0] + len * x;
                        let q = c0 + s * (b + s * a);
                        wt * (q * q * q).abs() * s
                    })
                    .sum::<f64>()
                    * len
            })
            .sum::<f64>()
    };
    let mut breaks = vec![0.0];
    roots_in_unit(q2, c2 - c1 + q1, c0 + c1 + c3, &mut breaks);
    roots_in_unit(d * d - 4.0 * c0 * q2, 2.0 * c1 * d - 4.0 * c0 * q1, c1 * c1 - 4.0 * c0 * q0, &mut breaks);
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    let piece = |a: f64, b: f64| gt.iter().zip(&gtw).map(|(x, wt)| wt * inner(a + (b - a) * x)).sum::<f64>() * (b - a);
    let parts: Vec<(f64, f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1], piece(w[0], w[1]))).collect();
    let total: f64 = parts.iter().map(|p| p.2).sum();
    // breakpoints found from nearly tangent roots can be lost to rounding,
    // so each piece is bisected until it settles
    let tol = 1e-13 * total.abs() + f64::MIN_POSITIVE;
    parts.iter().map(|&(a, b, whole)| refine_piece(&piece, a, b, whole, tol, 30)).sum()
}

fn refine_piece(piece: &dyn Fn(f64, f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let (l, r) = (piece(a, m), piece(m, b));
    if depth == 0 || (l + r - whole).abs() <= tol {
        l + r
    } else {
        refine_piece(piece, a, m, l, 0.5 * tol, depth - 1) + refine_piece(piece, m, b, r, 0.5 * tol, depth - 1)
    }
}

/// Coefficients of the quadratic through the six P2 nodes of the
/// reference triangle, ordered vertices `(0,0), (1,0), (0,1)`, then
/// midpoints `(½,0), (½,½), (0,½)`.
pub fn quadratic_from_p2_nodes(v: [f64; 6]) -> [f64; 6] {
    let c0 = v[0];
    let c3 = 2.0 * (v[1] - 2.0 * v[3] + c0);
    let c1 = v[1] - c0 - c3;
    let c5 = 2.0 * (v[2] - 2.0 * v[5] + c0);
    let c2 = v[2] - c0 - c5;
    let c4 = 4.0 * (v[4] - c0 - 0.5 * (c1 + c2)) - c3 - c5;
    [c0, c1, c2, c3, c4, c5]
}

/// `|a|³ + ... ` integral of a linear function with endpoint values `a`, `b` over `[0, 1]`.
pub fn unit_abs_cube_linear(a: f64, b: f64) -> f64 {
    let (x, y) = (a.abs(), b.abs());
    if a * b < 0.0 {
        (x.powi(4) + y.powi(4)) / (4.0 * (x + y))
    } else {
        (x.powi(3) + x * x * y + x * y * y + y.powi(3)) / 4.0
    }
}

/// Mass-conservation indicator.
pub fn eta_d3(mesh: &Mesh, dofmap: &DofMap, next: &DiscreteState, jumps: &EdgeJumpField) -> Result<Vec<f64>> {
    next.check(dofmap)?;
    if jumps.n_edges() != mesh.n_edges() {
        return Err(Error::Dimension("edge data does not match the mesh".into()));
    }
    const NODES: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ];
    Ok((0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = ElementGeometry::of(mesh, t);
            let f = next.local(mesh, dofmap, t);
            let vals = NODES.map(|bary| f.divergence(&BasisEval::at(&geom, &bary)));
            let cube = reference_abs_cube_integral(quadratic_from_p2_nodes(vals)) * geom.jacobian();
            let edges: f64 = mesh
                .triangle_edges(t)
                .iter()
                .map(|&e| {
                    let h = mesh.h_edge(e);
                    let [a, b] = jumps.phi_ends(e);
                    h.cbrt() * (h * unit_abs_cube_linear(a, b)).cbrt()
                })
                .sum();
            mesh.h_elem(t) * cube.cbrt() + edges
        })
        .collect())
}

/// Per-element indicators of one Picard step and their global aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTable {
    pub eta_l1: Vec<f64>,
    pub eta_l2: Vec<f64>,
    pub eta_d1: Vec<f64>,
    pub eta_d2: Vec<f64>,
    pub eta_d3: Vec<f64>,
    /// `(D1² + D2² + D3²)^½` per element, used for marking.
    pub eta_d_elem: Vec<f64>,
    pub eta_l: f64,
    pub eta_d: f64,
    pub aggregation: Aggregation,
}

/// Combines per-element rows into one global value.
pub fn aggregate_rows<const N: usize>(rows: impl Iterator<Item = [f64; N]>, aggregation: Aggregation) -> f64 {
    let sq = rows.map(|r| r.iter().map(|v| v * v).sum::<f64>());
    match aggregation {
        Aggregation::ElementSum => sq.map(f64::sqrt).sum(),
        Aggregation::L2 => sq.sum::<f64>().sqrt(),
    }
}

impl IndicatorTable {
    pub fn from_parts(
        eta_l1: Vec<f64>,
        eta_l2: Vec<f64>,
        eta_d1: Vec<f64>,
        eta_d2: Vec<f64>,
        eta_d3: Vec<f64>,
        aggregation: Aggregation,
    ) -> Result<Self> {
        let n = eta_l1.len();
        if [eta_l2.len(), eta_d1.len(), eta_d2.len(), eta_d3.len()].iter().any(|&l| l != n) {
            return Err(Error::Dimension("indicator columns differ in length".into()));
        }
        let eta_d_elem = (0..n)
            .map(|t| (eta_d1[t].powi(2) + eta_d2[t].powi(2) + eta_d3[t].powi(2)).sqrt())
            .collect();
        let mut table = IndicatorTable {
            eta_l1,
            eta_l2,
            eta_d1,
            eta_d2,
            eta_d3,
            eta_d_elem,
            eta_l: 0.0,
            eta_d: 0.0,
            aggregation,
        };
        (table.eta_l, table.eta_d) = table.aggregate(aggregation);
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.eta_l1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta_l1.is_empty()
    }

    /// Global `(η^L, η^D)` under the given aggregation.
    pub fn aggregate(&self, aggregation: Aggregation) -> (f64, f64) {
        let n = self.len();
        let l = aggregate_rows((0..n).map(|t| [self.eta_l1[t], self.eta_l2[t]]), aggregation);
        let d = aggregate_rows((0..n).map(|t| [self.eta_d1[t], self.eta_d2[t], self.eta_d3[t]]), aggregation);
        (l, d)
    }

    /// One row per element: id, centroid, five indicators, marker value.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, mut out: W) -> std::io::Result<()> {
        writeln!(out, "element,cx,cy,eta_L1,eta_L2,eta_D1,eta_D2,eta_D3,eta_D_elem")?;
        for t in 0..self.len() {
            let c = mesh.centroid(t);
            writeln!(
                out,
                "{t},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                c[0], c[1], self.eta_l1[t], self.eta_l2[t], self.eta_d1[t], self.eta_d2[t], self.eta_d3[t], self.eta_d_elem[t]
            )?;
        }
        Ok(())
    }
}

/// `η^L ≤ γ̄ η^D`.
pub fn stopping(eta_l: f64, eta_d: f64, gamma_bar: f64) -> bool {
    eta_l <= gamma_bar * eta_d
}

/// Element means `g_h` and `f_h(·, C)` for `C` taken from `prev`.
pub fn data_means(problem: &Problem, prev: &DiscreteState, degree: usize) -> Result<(Vec<f64>, Vec<Point>)> {
    let g = problem.data.g.clone();
    Ok((element_mean(move |x| g(x), problem.mesh, degree)?, force_means(problem, prev, degree)?))
}

/// All five indicators for the step `prev → next`.
pub fn estimate(
    problem: &Problem,
    prev: &DiscreteState,
    next: &DiscreteState,
    options: &EstimatorOptions,
) -> Result<IndicatorTable> {
    let Problem { mesh, dofmap, .. } = *problem;
    check_pair(dofmap, prev, next)?;
    let (g_mean, f_mean) = data_means(problem, prev, options.degree)?;
    let jumps = compute_phi(mesh, dofmap, next, options.edge_degree)?;
    IndicatorTable::from_parts(
        eta_l1(mesh, dofmap, prev, next, options.degree)?,
        eta_l2(mesh, dofmap, prev, next, options.degree)?,
        eta_d1(problem, next, &jumps, &g_mean, options.degree)?,
        eta_d2(problem, prev, next, &f_mean, options)?,
        eta_d3(mesh, dofmap, next, &jumps)?,
        options.aggregation,
    )
}

/// Data oscillation per element: `(h_κ‖g - g_h‖, ‖f(·,C) - f_h(·,C)‖)`.
pub fn oscillation(problem: &Problem, state: &DiscreteState, degree: usize) -> Result<Vec<[f64; 2]>> {
    let Problem { mesh, dofmap, data, .. } = *problem;
    let (g_mean, f_mean) = data_means(problem, state, degree)?;
    let rule = triangle_rule(degree)?;
    let g_sq = per_element(mesh, &rule, |t, geom, bary, _| (((data.g)(geom.map(bary))) - g_mean[t]).powi(2));
    let f_sq = per_element(mesh, &rule, |t, geom, bary, b| {
        let c = state.local(mesh, dofmap, t).concentration(b);
        let f = data.force(geom.map(bary), c);
        (f[0] - f_mean[t][0]).powi(2) + (f[1] - f_mean[t][1]).powi(2)
    });
    Ok((0..mesh.n_triangles())
        .map(|t| [mesh.h_elem(t) * g_sq[t].max(0.0).sqrt(), f_sq[t].max(0.0).sqrt()])
        .collect())
}
