//! Conforming triangulations of polygonal domains.
//!
//! Triangles are stored counter-clockwise with the bisection (refinement)
//! edge between local vertices 0 and 1; local vertex 2 is the newest vertex.
//! Local edge `k` of a triangle is the edge opposite local vertex `k`, so the
//! refinement edge is always local edge 2.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Process-unique tag of a mesh; discrete fields carry it to detect mismatches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshId(u64);

impl MeshId {
    fn fresh() -> Self {
        MeshId(NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// Triangles adjacent to an edge. `second` is `None` on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeAdjacency {
    pub first: usize,
    pub second: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    id: MeshId,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<EdgeAdjacency>,
    triangle_edges: Vec<[usize; 3]>,
    edge_normals: Vec<Point>,
    boundary_vertex: Vec<bool>,
    h_elem: Vec<f64>,
    h_edge: Vec<f64>,
}

/// How the bisection edge of each input triangle is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementEdgeRule {
    /// Longest edge; ties go to the lexicographically smallest sorted vertex pair.
    Longest,
    /// Keep the edge between the first two listed vertices.
    AsGiven,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

impl Mesh {
    /// Builds a mesh from raw vertices and triangles, fixing orientation and
    /// constructing the edge topology.
    pub fn from_triangles(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        rule: RefinementEdgeRule,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        let mut tris = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.into_iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Structure(format!("triangle {t} references a missing vertex")));
            }
            let mut tri = match rule {
                RefinementEdgeRule::AsGiven => tri,
                RefinementEdgeRule::Longest => {
                    let mut best = 2;
                    let key = |k: usize| {
                        let a = tri[(k + 1) % 3];
                        let b = tri[(k + 2) % 3];
                        (dist(vertices[a], vertices[b]), sorted_pair(a, b))
                    };
                    for k in 0..2 {
                        let (lk, pk) = key(k);
                        let (lb, pb) = key(best);
                        if lk > lb || (lk == lb && pk < pb) {
                            best = k;
                        }
                    }
                    // rotate so that the edge opposite `best` sits between local 0 and 1
                    [tri[(best + 1) % 3], tri[(best + 2) % 3], tri[best]]
                }
            };
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area == 0.0 {
                return Err(Error::Structure(format!("triangle {t} is degenerate")));
            }
            if area < 0.0 {
                tri.swap(0, 1);
            }
            tris.push(tri);
        }
        let mut mesh = Mesh {
            id: MeshId::fresh(),
            vertices,
            triangles: tris,
            edges: Vec::new(),
            edge_triangles: Vec::new(),
            triangle_edges: Vec::new(),
            edge_normals: Vec::new(),
            boundary_vertex: Vec::new(),
            h_elem: Vec::new(),
            h_edge: Vec::new(),
        };
        build_edge_topology(&mut mesh)?;
        Ok(mesh)
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_coords(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edge_triangles(&self, e: usize) -> EdgeAdjacency {
        self.edge_triangles[e]
    }

    /// Edge indices of a triangle; entry `k` is opposite local vertex `k`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    /// Unit normal of an edge. Interior edges point from the lower-index
    /// adjacent triangle into the higher-index one; boundary edges point outward.
    pub fn edge_normal(&self, e: usize) -> Point {
        self.edge_normals[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_triangles[e].second.is_none()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_vertices(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.edge_triangles.iter().filter(|a| a.second.is_none()).count()
    }

    /// Diameter of a triangle (its longest edge).
    pub fn h_elem(&self, t: usize) -> f64 {
        self.h_elem[t]
    }

    pub fn h_edge(&self, e: usize) -> f64 {
        self.h_edge[e]
    }

    /// The designated bisection edge of a triangle, as a vertex pair.
    pub fn refinement_edge(&self, t: usize) -> [usize; 2] {
        let tri = self.triangles[t];
        [tri[0], tri[1]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_coords(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.triangle_coords(t);
            for k in 0..3 {
                let o = p[k];
                let a = p[(k + 1) % 3];
                let b = p[(k + 2) % 3];
                let u = [a[0] - o[0], a[1] - o[1]];
                let v = [b[0] - o[0], b[1] - o[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (dist(o, a) * dist(o, b));
                min = min.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        min
    }

    /// V - E + T.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64
    }

    /// Exhaustive structural check: positive areas, manifold edge incidence,
    /// matching orientation across interior edges and no hanging vertices.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            if self.area(t) <= 0.0 {
                return Err(Error::Structure(format!("triangle {t} has non-positive area")));
            }
        }
        for (e, adj) in self.edge_triangles.iter().enumerate() {
            if let Some(second) = adj.second {
                // neighbours must traverse the shared edge in opposite directions
                let dir = |t: usize| {
                    let tri = self.triangles[t];
                    let k = (0..3).find(|&k| self.triangle_edges[t][k] == e).unwrap();
                    (tri[(k + 1) % 3], tri[(k + 2) % 3])
                };
                let (a0, b0) = dir(adj.first);
                let (a1, b1) = dir(second);
                if a0 != b1 || b0 != a1 {
                    return Err(Error::Structure(format!("edge {e} has inconsistent orientation")));
                }
            }
        }
        for e in 0..self.n_edges() {
            if !self.is_boundary_edge(e) {
                continue;
            }
            let [a, b] = self.edges[e];
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let len = dist(pa, pb);
            for (v, &p) in self.vertices.iter().enumerate() {
                if v == a || v == b {
                    continue;
                }
                let cross = signed_area(pa, pb, p).abs() * 2.0 / len;
                let t = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1]))
                    / (len * len);
                if cross <= 1e-12 * len && t > 1e-12 && t < 1.0 - 1e-12 {
                    return Err(Error::Structure(format!(
                        "vertex {v} hangs on boundary edge {e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump: a `V vertices T triangles E edges` header, then
    /// coordinate rows, triangle rows and edge rows (0-based indices).
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "{} vertices {} triangles {} edges",
            self.n_vertices(),
            self.n_triangles(),
            self.n_edges()
        )?;
        for p in &self.vertices {
            writeln!(out, "{:.17e} {:.17e}", p[0], p[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        for e in &self.edges {
            writeln!(out, "{} {}", e[0], e[1])?;
        }
        Ok(())
    }
}

/// Rebuilds edges, adjacency, normals, boundary flags and element sizes from
/// the vertex and triangle lists. Edge indices follow first appearance in
/// triangle order.
pub fn build_edge_topology(mesh: &mut Mesh) -> Result<()> {
    let nt = mesh.triangles.len();
    let mut lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(nt * 2);
    let mut edges = Vec::new();
    let mut adjacency: Vec<EdgeAdjacency> = Vec::new();
    let mut triangle_edges = vec![[0usize; 3]; nt];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let key = sorted_pair(tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let e = match lookup.get(&key) {
                Some(&e) => {
                    let adj = &mut adjacency[e];
                    if adj.second.is_some() {
                        return Err(Error::Structure(format!(
                            "non-manifold edge {:?}: three or more adjacent triangles",
                            key
                        )));
                    }
                    adj.second = Some(t);
                    e
                }
                None => {
                    let e = edges.len();
                    edges.push(key);
                    adjacency.push(EdgeAdjacency { first: t, second: None });
                    lookup.insert(key, e);
                    e
                }
            };
            triangle_edges[t][k] = e;
        }
    }

    let mut normals = Vec::with_capacity(edges.len());
    let mut h_edge = Vec::with_capacity(edges.len());
    let mut boundary_vertex = vec![false; mesh.vertices.len()];
    for (e, &[a, b]) in edges.iter().enumerate() {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = dist(pa, pb);
        h_edge.push(len);
        let owner = adjacency[e].first;
        let tri = mesh.triangles[owner];
        let k = (0..3).find(|&k| triangle_edges[owner][k] == e).unwrap();
        // CCW traversal of the owner: outward normal is the tangent rotated clockwise
        let (s, f) = (mesh.vertices[tri[(k + 1) % 3]], mesh.vertices[tri[(k + 2) % 3]]);
        normals.push([(f[1] - s[1]) / len, -(f[0] - s[0]) / len]);
        if adjacency[e].second.is_none() {
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
        }
    }
    let h_elem = (0..nt)
        .map(|t| triangle_edges[t].iter().map(|&e| h_edge[e]).fold(0.0, f64::max))
        .collect();

    mesh.edges = edges;
    mesh.edge_triangles = adjacency;
    mesh.triangle_edges = triangle_edges;
    mesh.edge_normals = normals;
    mesh.boundary_vertex = boundary_vertex;
    mesh.h_elem = h_elem;
    mesh.h_edge = h_edge;
    Ok(())
}

/// Structured mesh of the unit square: `n x n` squares, each cut along the
/// diagonal from its lower-left to its upper-right corner.
pub fn build_uniform_unit_square(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidConfig("grid size N must be at least 1".into()));
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_triangles(vertices, triangles, RefinementEdgeRule::Longest)
}

/// Triangles selected for refinement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkSet {
    marked: BTreeSet<usize>,
}

impl MarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn all(mesh: &Mesh) -> Self {
        (0..mesh.n_triangles()).collect()
    }

    pub fn insert(&mut self, t: usize) {
        self.marked.insert(t);
    }

    pub fn contains(&self, t: usize) -> bool {
        self.marked.contains(&t)
    }

    pub fn len(&self) -> usize {
        self.marked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marked.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.marked.iter().copied()
    }
}

impl FromIterator<usize> for MarkSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        MarkSet { marked: iter.into_iter().collect() }
    }
}

/// Result of a refinement: the new mesh plus the maps needed for field transfer.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub mesh: Mesh,
    /// For every triangle of the new mesh, the triangle of the old mesh it came from.
    pub parent: Vec<usize>,
    /// For every vertex created by the refinement (indices `old_nv..`), the
    /// endpoints of the bisected edge.
    pub new_vertices: Vec<[usize; 2]>,
}

impl Refinement {
    pub fn unchanged(mesh: &Mesh) -> Self {
        Refinement {
            mesh: mesh.clone(),
            parent: (0..mesh.n_triangles()).collect(),
            new_vertices: Vec::new(),
        }
    }

    /// Children of every old triangle, in new-mesh index order.
    pub fn children(&self, n_old: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n_old];
        for (child, &p) in self.parent.iter().enumerate() {
            out[p].push(child);
        }
        out
    }
}

const MAX_BISECTION_DEPTH: usize = 8;

/// Newest-vertex bisection of every marked triangle, followed by closure so
/// that the output is conforming.
pub fn refine(mesh: &Mesh, marks: &MarkSet) -> Result<Refinement> {
    if let Some(bad) = marks.iter().find(|&t| t >= mesh.n_triangles()) {
        return Err(Error::InvalidConfig(format!("marked triangle {bad} does not exist")));
    }
    if marks.is_empty() {
        return Ok(Refinement::unchanged(mesh));
    }

    let ne = mesh.n_edges();
    let mut edge_marked = vec![false; ne];
    let mut queue = VecDeque::new();
    for t in marks.iter() {
        let e = mesh.triangle_edges[t][2];
        if !edge_marked[e] {
            edge_marked[e] = true;
            queue.push_back(e);
        }
    }
    // closure: any triangle with a marked edge must also bisect its refinement edge
    while let Some(e) = queue.pop_front() {
        let adj = mesh.edge_triangles[e];
        for t in std::iter::once(adj.first).chain(adj.second) {
            let r = mesh.triangle_edges[t][2];
            if !edge_marked[r] {
                edge_marked[r] = true;
                queue.push_back(r);
            }
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<[usize; 2], usize> = HashMap::new();
    let mut new_vertices = Vec::new();
    for (e, _) in edge_marked.iter().enumerate().filter(|(_, &m)| m) {
        let [a, b] = mesh.edges[e];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        midpoint.insert([a, b], vertices.len());
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        new_vertices.push([a, b]);
    }

    let mut triangles = Vec::with_capacity(mesh.n_triangles() + 2 * midpoint.len());
    let mut parent = Vec::with_capacity(triangles.capacity());
    let mut stack: Vec<([usize; 3], usize)> = Vec::new();
    for t in 0..mesh.n_triangles() {
        stack.push((mesh.triangles[t], 0));
        // children pushed in reverse so the first child is emitted first
        while let Some((tri, depth)) = stack.pop() {
            match midpoint.get(&sorted_pair(tri[0], tri[1])) {
                Some(&m) => {
                    if depth >= MAX_BISECTION_DEPTH {
                        return Err(Error::Structure(format!(
                            "bisection depth exceeded {MAX_BISECTION_DEPTH} in triangle {t}"
                        )));
                    }
                    stack.push(([tri[1], tri[2], m], depth + 1));
                    stack.push(([tri[2], tri[0], m], depth + 1));
                }
                None => {
                    triangles.push(tri);
                    parent.push(t);
                }
            }
        }
    }

    let mesh = Mesh::from_triangles(vertices, triangles, RefinementEdgeRule::AsGiven)?;
    Ok(Refinement { mesh, parent, new_vertices })
}
