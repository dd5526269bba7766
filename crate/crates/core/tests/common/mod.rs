//! Independent reference implementations shared by the integration tests.
//! Nothing here calls the crate's basis, assembly or estimator code.

#![allow(dead_code)]

use std::collections::HashMap;

use darcy_afem::dofmap::DofMap;
use darcy_afem::mesh::{Mesh, Point};
use darcy_afem::problem::{PhysicalParams, ProblemData};
use darcy_afem::state::DiscreteState;

/// Gauss-Legendre nodes and weights on `[0, 1]` by Newton iteration on the
/// three-term recurrence.
pub fn gauss01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// Collapsed-coordinate rule on the reference triangle (area ½) as
/// barycentric points; exact for total degree `2n - 2`.
pub fn collapsed_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let g = gauss01(n);
    let mut out = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            let xi = u;
            let eta = v * (1.0 - u);
            out.push(([1.0 - xi - eta, xi, eta], wu * wv * (1.0 - u)));
        }
    }
    out
}

/// Degree-16 triangle rule.
pub fn rule16() -> Vec<([f64; 3], f64)> {
    collapsed_rule(9)
}

fn sub_rule(rule: &[([f64; 3], f64)], c: &[[f64; 3]; 3], f: &dyn Fn([f64; 3]) -> f64) -> f64 {
    rule.iter()
        .map(|(p, w)| {
            let mut x = [0.0; 3];
            for k in 0..3 {
                for j in 0..3 {
                    x[j] += p[k] * c[k][j];
                }
            }
            w * f(x)
        })
        .sum()
}

/// `∫` over the reference triangle (area ½) of `f(bary)`, recursively
/// splitting into four until parent and children agree to `tol`.
pub fn adaptive(f: &dyn Fn([f64; 3]) -> f64, rel_tol: f64, max_depth: usize) -> f64 {
    let rule = rule16();
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let whole = sub_rule(&rule, &corners, f);
    fn rec(
        rule: &[([f64; 3], f64)],
        f: &dyn Fn([f64; 3]) -> f64,
        c: [[f64; 3]; 3],
        scale: f64,
        parent: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = |a: usize, b: usize| [0, 1, 2].map(|j| 0.5 * (c[a][j] + c[b][j]));
        let (m01, m12, m20) = (m(0, 1), m(1, 2), m(2, 0));
        let kids = [[c[0], m01, m20], [m01, c[1], m12], [m20, m12, c[2]], [m12, m20, m01]];
        let s = scale * 0.25;
        let vals: Vec<f64> = kids.iter().map(|k| s * sub_rule(rule, k, f)).collect();
        let total: f64 = vals.iter().sum();
        if depth == 0 || (total - parent).abs() <= tol {
            return total;
        }
        kids.iter().zip(vals).map(|(k, v)| rec(rule, f, *k, s, v, tol * 0.5, depth - 1)).sum()
    }
    rec(&rule, f, corners, 1.0, whole, rel_tol * whole.abs() + 1e-300, max_depth)
}

/// Single application of the degree-16 rule.
pub fn plain16(f: &dyn Fn([f64; 3]) -> f64) -> f64 {
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    sub_rule(&rule16(), &corners, f)
}

/// P1 + bubble calculus on one triangle, written from scratch.
#[derive(Clone, Copy)]
pub struct Tri {
    pub x: [Point; 3],
    pub area: f64,
    pub grad: [Point; 3],
}

impl Tri {
    pub fn new(x: [Point; 3]) -> Self {
        let d = (x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[1][1] - x[0][1]) * (x[2][0] - x[0][0]);
        let mut grad = [[0.0; 2]; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            grad[i] = [(x[j][1] - x[k][1]) / d, (x[k][0] - x[j][0]) / d];
        }
        Tri { x, area: 0.5 * d.abs(), grad }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        let v = mesh.triangle(t);
        Tri::new(v.map(|i| mesh.vertex(i)))
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        [0, 1].map(|d| l[0] * self.x[0][d] + l[1] * self.x[1][d] + l[2] * self.x[2][d])
    }

    /// Values of `λ0, λ1, λ2, λ0λ1λ2`.
    pub fn values(&self, l: [f64; 3]) -> [f64; 4] {
        [l[0], l[1], l[2], l[0] * l[1] * l[2]]
    }

    pub fn grads(&self, l: [f64; 3]) -> [Point; 4] {
        let g = self.grad;
        let b = [0, 1].map(|d| l[1] * l[2] * g[0][d] + l[0] * l[2] * g[1][d] + l[0] * l[1] * g[2][d]);
        [g[0], g[1], g[2], b]
    }

    pub fn longest_edge(&self) -> f64 {
        (0..3)
            .map(|i| {
                let (a, b) = (self.x[i], self.x[(i + 1) % 3]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max)
    }
}

/// Coefficients of one state restricted to a triangle.
pub struct Local {
    pub u: [[f64; 4]; 2],
    pub p: [f64; 3],
    pub c: [f64; 3],
}

pub fn local(mesh: &Mesh, d: &DofMap, s: &DiscreteState, t: usize) -> Local {
    let v = mesh.triangle(t);
    let mut u = [[0.0; 4]; 2];
    for comp in 0..2 {
        for k in 0..3 {
            u[comp][k] = s.velocity[d.velocity_vertex(comp, v[k])];
        }
        u[comp][3] = s.velocity[d.velocity_bubble(comp, t)];
    }
    Local { u, p: v.map(|i| s.pressure[i]), c: v.map(|i| s.concentration[i]) }
}

impl Local {
    pub fn vel(&self, tri: &Tri, l: [f64; 3]) -> Point {
        let phi = tri.values(l);
        [0, 1].map(|c| (0..4).map(|a| self.u[c][a] * phi[a]).sum())
    }

    pub fn div(&self, tri: &Tri, l: [f64; 3]) -> f64 {
        let g = tri.grads(l);
        (0..4).map(|a| self.u[0][a] * g[a][0] + self.u[1][a] * g[a][1]).sum()
    }

    pub fn conc(&self, l: [f64; 3]) -> f64 {
        (0..3).map(|k| self.c[k] * l[k]).sum()
    }

    pub fn conc_grad(&self, tri: &Tri) -> Point {
        [0, 1].map(|d| (0..3).map(|k| self.c[k] * tri.grad[k][d]).sum())
    }

    pub fn pres_grad(&self, tri: &Tri) -> Point {
        [0, 1].map(|d| (0..3).map(|k| self.p[k] * tri.grad[k][d]).sum())
    }
}

/// Dense LU with partial pivoting.
pub fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        assert!(a[k][k] != 0.0, "singular matrix");
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            if m != 0.0 {
                for j in k..n {
                    a[i][j] -= m * a[k][j];
                }
                b[i] -= m * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Dense flow matrix and right-hand side linearised around `state`, using
/// the supplied reference-triangle rule (weights summing to ½).
pub fn dense_flow_system(
    mesh: &Mesh,
    d: &DofMap,
    params: &PhysicalParams,
    data: &ProblemData,
    state: &DiscreteState,
    rule: &[([f64; 3], f64)],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = d.n_flow_system();
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    let lambda = d.multiplier_index();
    for t in 0..mesh.n_triangles() {
        let tri = Tri::of(mesh, t);
        let loc = local(mesh, d, state, t);
        let verts = mesh.triangle(t);
        let vel_index = |c: usize, a: usize| if a < 3 { d.velocity_vertex(c, verts[a]) } else { d.velocity_bubble(c, t) };
        for &(l, w) in rule {
            let wq = w * 2.0 * tri.area;
            let x = tri.point(l);
            let phi = tri.values(l);
            let u_old = loc.vel(&tri, l);
            let speed = (u_old[0] * u_old[0] + u_old[1] * u_old[1]).sqrt();
            let k = (params.k_inv)(x);
            let f0 = (data.f0)(x);
            let f1 = (data.f1)(loc.conc(l));
            for c in 0..2 {
                for ai in 0..4 {
                    let i = vel_index(c, ai);
                    for dd in 0..2 {
                        let coef = params.mu / params.rho * k[c][dd]
                            + if c == dd { params.gamma + params.beta / params.rho * speed } else { 0.0 };
                        for bj in 0..4 {
                            a[i][vel_index(dd, bj)] += wq * coef * phi[ai] * phi[bj];
                        }
                    }
                    for (j, &v) in verts.iter().enumerate() {
                        let val = wq * phi[ai] * tri.grad[j][c];
                        a[i][d.pressure_offset() + v] += val;
                        a[d.pressure_offset() + v][i] += val;
                    }
                    rhs[i] += wq * (params.gamma * u_old[c] + f0[c] + f1[c]) * phi[ai];
                }
            }
            for (j, &v) in verts.iter().enumerate() {
                a[d.pressure_offset() + v][lambda] += wq * l[j];
                a[lambda][d.pressure_offset() + v] += wq * l[j];
            }
        }
    }
    (a, rhs)
}

/// Reference indicators per element, in the order L1, L2, D1, D2, D3.
pub struct ReferenceIndicators {
    pub values: Vec<[f64; 5]>,
}

/// For each mesh edge: the adjacent triangles (ascending), found by
/// matching vertex pairs.
fn edge_adjacency(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut by_pair: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
    for t in 0..mesh.n_triangles() {
        let v = mesh.triangle(t);
        for k in 0..3 {
            let (a, b) = (v[k], v[(k + 1) % 3]);
            by_pair.entry([a.min(b), a.max(b)]).or_default().push(t);
        }
    }
    (0..mesh.n_edges())
        .map(|e| {
            let [a, b] = mesh.edge(e);
            let mut adj = by_pair[&[a.min(b), a.max(b)]].clone();
            adj.sort();
            adj
        })
        .collect()
}

/// Per-edge data: the two adjacent triangles (first has the lower index),
/// the edge endpoints and the unit normal pointing out of the first.
fn edge_info(mesh: &Mesh, adj: &[usize], e: usize) -> (usize, Option<usize>, Point, Point, Point) {
    let [a, b] = mesh.edge(e);
    let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
    let first = adj[0];
    let second = adj.get(1).copied();
    let third = mesh.triangle(first).into_iter().find(|&v| v != a && v != b).unwrap();
    let pc = mesh.vertex(third);
    let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
    let mut n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
    if n[0] * (pc[0] - mid[0]) + n[1] * (pc[1] - mid[1]) > 0.0 {
        n = [-n[0], -n[1]];
    }
    (first, second, pa, pb, n)
}

/// Barycentric coordinates of a physical point in a triangle.
fn bary_of(tri: &Tri, x: Point) -> [f64; 3] {
    let l1 = tri.grad[1][0] * (x[0] - tri.x[0][0]) + tri.grad[1][1] * (x[1] - tri.x[0][1]);
    let l2 = tri.grad[2][0] * (x[0] - tri.x[0][0]) + tri.grad[2][1] * (x[1] - tri.x[0][1]);
    [1.0 - l1 - l2, l1, l2]
}

/// `∫_0^1 |a(1-s) + b s|³ ds`, split at the root and integrated by Gauss.
fn abs_cube_linear(a: f64, b: f64) -> f64 {
    let g = gauss01(4);
    let piece = |s0: f64, s1: f64| -> f64 {
        g.iter()
            .map(|&(s, w)| {
                let x = s0 + (s1 - s0) * s;
                (w * (s1 - s0)) * (a * (1.0 - x) + b * x).abs().powi(3)
            })
            .sum()
    };
    if a * b < 0.0 {
        let r = a / (a - b);
        piece(0.0, r) + piece(r, 1.0)
    } else {
        piece(0.0, 1.0)
    }
}

/// `∫` over the reference triangle (area ½) of `|q|³` for `q` quadratic in
/// the barycentric coordinates. The inner integral in `eta` is split at the
/// roots of the restricted quadratic; the outer one in `xi` is adaptive Gauss.
pub fn abs_cube_quadratic(q: &dyn Fn([f64; 3]) -> f64) -> f64 {
    let g = gauss01(8);
    let inner = |xi: f64| -> f64 {
        let len = 1.0 - xi;
        if len <= 0.0 {
            return 0.0;
        }
        let at = |eta: f64| q([1.0 - xi - eta, xi, eta]);
        // q(xi, len*s) = c0 + c1 s + c2 s² on s in [0, 1]
        let (f0, fh, f1) = (at(0.0), at(0.5 * len), at(len));
        let c0 = f0;
        let c2 = 2.0 * f1 - 4.0 * fh + 2.0 * f0;
        let c1 = f1 - f0 - c2;
        let mut cuts = vec![0.0, 1.0];
        if c2.abs() > 1e-300 {
            let disc = c1 * c1 - 4.0 * c2 * c0;
            if disc > 0.0 {
                let r = disc.sqrt();
                let qq = -0.5 * (c1 + c1.signum() * r);
                for root in [qq / c2, if qq != 0.0 { c0 / qq } else { f64::NAN }] {
                    if root > 0.0 && root < 1.0 {
                        cuts.push(root);
                    }
                }
            }
        } else if c1 != 0.0 {
            let root = -c0 / c1;
            if root > 0.0 && root < 1.0 {
                cuts.push(root);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            for &(s, wt) in &g {
                let x = a + (b - a) * s;
                acc += wt * (b - a) * (c0 + c1 * x + c2 * x * x).abs().powi(3);
            }
        }
        acc * len
    };
    fn outer(f: &dyn Fn(f64) -> f64, g: &[(f64, f64)], a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let piece = |a: f64, b: f64| g.iter().map(|&(s, w)| w * (b - a) * f(a + (b - a) * s)).sum::<f64>();
        let (l, r) = (piece(a, m), piece(m, b));
        if depth == 0 || ((l + r) - whole).abs() <= tol {
            l + r
        } else {
            outer(f, g, a, m, l, 0.5 * tol, depth - 1) + outer(f, g, m, b, r, 0.5 * tol, depth - 1)
        }
    }
    let whole = g.iter().map(|&(s, w)| w * inner(s)).sum::<f64>();
    outer(&inner, &g, 0.0, 1.0, whole, 1e-15 * whole.abs() + 1e-300, 24)
}

/// Brute-force evaluation of the five indicators for the step
/// `prev -> next`, with `tol`/`depth` controlling the adaptive integration of
/// the non-polynomial integrands (`depth = 0`: one degree-16 rule).
pub fn reference_indicators(
    mesh: &Mesh,
    d: &DofMap,
    params: &PhysicalParams,
    data: &ProblemData,
    prev: &DiscreteState,
    next: &DiscreteState,
    tol: f64,
    depth: usize,
) -> ReferenceIndicators {
    let nt = mesh.n_triangles();
    let mut edge_d1 = vec![0.0; nt];
    let mut edge_d3 = vec![0.0; nt];
    let adjacency = edge_adjacency(mesh);
    for e in 0..mesh.n_edges() {
        let (first, second, pa, pb, n) = edge_info(mesh, &adjacency[e], e);
        let h = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let t1 = Tri::of(mesh, first);
        let l1 = local(mesh, d, next, first);
        let un = |tri: &Tri, loc: &Local, x: Point| {
            let u = loc.vel(tri, bary_of(tri, x));
            u[0] * n[0] + u[1] * n[1]
        };
        let phi_ends: [f64; 2] = match second {
            Some(s) => {
                let t2 = Tri::of(mesh, s);
                let l2 = local(mesh, d, next, s);
                let g1 = l1.conc_grad(&t1);
                let g2 = l2.conc_grad(&t2);
                let jump = params.alpha * ((g1[0] - g2[0]) * n[0] + (g1[1] - g2[1]) * n[1]);
                let term = 0.5 * h.sqrt() * (jump * jump * h).sqrt();
                edge_d1[first] += term;
                edge_d1[s] += term;
                [pa, pb].map(|x| 0.5 * (un(&t1, &l1, x) - un(&t2, &l2, x)))
            }
            None => [pa, pb].map(|x| un(&t1, &l1, x)),
        };
        let term = h.cbrt() * (h * abs_cube_linear(phi_ends[0], phi_ends[1])).cbrt();
        edge_d3[first] += term;
        if let Some(s) = second {
            edge_d3[s] += term;
        }
    }

    let values = (0..nt)
        .map(|t| {
            let tri = Tri::of(mesh, t);
            let jac = 2.0 * tri.area;
            let hk = tri.longest_edge();
            let lp = local(mesh, d, prev, t);
            let ln = local(mesh, d, next, t);
            let g_mean = jac * plain16(&|l| (data.g)(tri.point(l))) / tri.area;
            let f_mean = [0, 1].map(|c| {
                jac * plain16(&|l| {
                    let x = tri.point(l);
                    (data.f0)(x)[c] + (data.f1)(lp.conc(l))[c]
                }) / tri.area
            });

            let l1 = jac
                * plain16(&|l| {
                    let (a, b) = (ln.vel(&tri, l), lp.vel(&tri, l));
                    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
                });
            let gc = [0, 1].map(|k| ln.conc_grad(&tri)[k] - lp.conc_grad(&tri)[k]);
            let l2 = jac * plain16(&|l| (ln.conc(l) - lp.conc(l)).powi(2) + gc[0] * gc[0] + gc[1] * gc[1]);

            let gcn = ln.conc_grad(&tri);
            let d1_vol = jac
                * plain16(&|l| {
                    let u = ln.vel(&tri, l);
                    let c = ln.conc(l);
                    let r = -(u[0] * gcn[0] + u[1] * gcn[1]) - 0.5 * ln.div(&tri, l) * c - params.r0 * c + g_mean;
                    r * r
                });
            let d1 = hk * d1_vol.sqrt() + edge_d1[t];

            let gp = ln.pres_grad(&tri);
            let d2_int = |l: [f64; 3]| {
                let x = tri.point(l);
                let un = ln.vel(&tri, l);
                let uo = lp.vel(&tri, l);
                let k = (params.k_inv)(x);
                let speed = (uo[0] * uo[0] + uo[1] * uo[1]).sqrt();
                let r = [0, 1].map(|c| {
                    -gp[c] - params.gamma * (un[c] - uo[c])
                        - params.mu / params.rho * (k[c][0] * un[0] + k[c][1] * un[1])
                        - params.beta / params.rho * speed * un[c]
                        + f_mean[c]
                });
                r[0] * r[0] + r[1] * r[1]
            };
            let d2 = (jac * if depth == 0 { plain16(&d2_int) } else { adaptive(&d2_int, tol, depth) }).sqrt();

            let div3 = |l: [f64; 3]| ln.div(&tri, l).abs().powi(3);
            let d3_vol = jac * if depth == 0 { plain16(&div3) } else { abs_cube_quadratic(&|l| ln.div(&tri, l)) };
            let d3 = hk * d3_vol.cbrt() + edge_d3[t];
            [l1.sqrt(), l2.sqrt(), d1, d2, d3]
        })
        .collect();
    ReferenceIndicators { values }
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}
