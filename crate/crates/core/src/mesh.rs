//! Triangulated planar domains with tagged boundary edges.
//!
//! Generated rectangle meshes use a fixed-diagonal split: every cell is cut
//! along its lower-left to upper-right diagonal, giving `(nx+1)(ny+1)` nodes
//! and `2 nx ny` triangles. The fixed orientation keeps crack paths
//! reproducible across runs.

use crate::error::{Error, Result};
use crate::tensor::Sym2;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Kinematic/loading role of a tagged boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagKind {
    /// Traction (Neumann) boundary.
    Traction,
    /// Zero normal displacement, free tangential sliding.
    NormalSliding,
    /// Both displacement components fixed to zero.
    Fixed,
    /// Traction-free, unconstrained.
    Free,
}

/// Named boundary tag. Tag names are unique within a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTag {
    pub name: String,
    pub kind: TagKind,
}

/// Boundary edge: node pair plus the index of its tag in `Mesh2D::tags`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: usize,
}

/// Immutable triangulated 2-D domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub region_tags: Vec<u32>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub tags: Vec<BoundaryTag>,
}

/// Per-triangle geometry for P1 interpolation: constant shape-function
/// gradients and the (positive) element area.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub grads: [[f64; 2]; 3],
    pub area: f64,
}

impl Mesh2D {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Twice the signed area of triangle `t`.
    pub fn signed_area2(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pc = self.nodes[c];
        (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1])
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * self.signed_area2(t)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn tag_index(&self, name: &str) -> Option<usize> {
        self.tags.iter().position(|t| t.name == name)
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        let a = self.nodes[e.nodes[0]];
        let b = self.nodes[e.nodes[1]];
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    /// Outward unit normal of a boundary edge (the mesh boundary is traversed
    /// so that the interior lies to the left of `nodes[0] -> nodes[1]`).
    pub fn edge_normal(&self, e: &BoundaryEdge) -> [f64; 2] {
        let a = self.nodes[e.nodes[0]];
        let b = self.nodes[e.nodes[1]];
        let len = self.edge_length(e);
        [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
    }

    /// Nodes lying on edges of a given tag.
    pub fn tagged_nodes(&self, tag: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.nodes)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Inradius-based element size `2 * area / semiperimeter` (the inscribed
    /// circle diameter), minimized over all elements.
    pub fn min_inradius_size(&self) -> f64 {
        let mut h = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let [a, b, c] = self.triangles[t];
            let dist = |p: [f64; 2], q: [f64; 2]| {
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            };
            let peri = dist(self.nodes[a], self.nodes[b])
                + dist(self.nodes[b], self.nodes[c])
                + dist(self.nodes[c], self.nodes[a]);
            let r = 2.0 * self.area(t) / peri;
            h = h.min(2.0 * r);
        }
        h
    }

    /// Validate the structural invariants: positive areas, index ranges,
    /// unique tag names, boundary edges belonging to exactly one triangle.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        for (i, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!("triangle {i} references node out of range")));
            }
            let a2 = self.signed_area2(i);
            if a2 <= 0.0 {
                return Err(Error::DegenerateTriangle { index: i, area: 0.5 * a2 });
            }
        }
        if self.region_tags.len() != self.triangles.len() {
            return Err(Error::Mesh("region tag count mismatch".into()));
        }
        let mut names = std::collections::HashSet::new();
        for t in &self.tags {
            if !names.insert(t.name.as_str()) {
                return Err(Error::Mesh(format!("duplicate tag name `{}`", t.name)));
            }
        }
        // Count triangle adjacency per undirected edge.
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        for (i, e) in self.boundary_edges.iter().enumerate() {
            if e.nodes.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!("boundary edge {i} references node out of range")));
            }
            if e.tag >= self.tags.len() {
                return Err(Error::Mesh(format!("boundary edge {i} references unknown tag")));
            }
            let key = (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]));
            match edge_count.get(&key) {
                Some(1) => {}
                Some(k) => {
                    return Err(Error::Mesh(format!(
                        "boundary edge {i} belongs to {k} triangles, expected exactly 1"
                    )))
                }
                None => {
                    return Err(Error::Mesh(format!("boundary edge {i} is not a triangle edge")))
                }
            }
        }
        Ok(())
    }
}

/// Structured rectangle mesh on `[0,Lx] x [0,Ly]` with `nx x ny` cells, each
/// split along the fixed lower-left to upper-right diagonal. The four sides
/// are tagged `left`, `right`, `bottom`, `top` (all `Free` until a run
/// configuration assigns kinds). Tag assignment compares coordinates with
/// absolute tolerance `1e-12 * max(Lx, Ly)`.
pub fn generate_rect_mesh(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh2D> {
    if nx < 1 || ny < 1 {
        return Err(Error::Mesh(format!("cell counts must be >= 1, got {nx} x {ny}")));
    }
    if !(lx > 0.0) || !(ly > 0.0) {
        return Err(Error::Mesh(format!("side lengths must be positive, got {lx} x {ly}")));
    }
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let n00 = node(i, j);
            let n10 = node(i + 1, j);
            let n01 = node(i, j + 1);
            let n11 = node(i + 1, j + 1);
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }
    let tags = vec![
        BoundaryTag { name: "left".into(), kind: TagKind::Free },
        BoundaryTag { name: "right".into(), kind: TagKind::Free },
        BoundaryTag { name: "bottom".into(), kind: TagKind::Free },
        BoundaryTag { name: "top".into(), kind: TagKind::Free },
    ];
    let tol = 1e-12 * lx.max(ly);
    let mut boundary_edges = Vec::new();
    // Perimeter walked counterclockwise so outward normals come out right.
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge { nodes: [node(i, 0), node(i + 1, 0)], tag: 2 });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge { nodes: [node(nx, j), node(nx, j + 1)], tag: 1 });
    }
    for i in (0..nx).rev() {
        boundary_edges.push(BoundaryEdge { nodes: [node(i + 1, ny), node(i, ny)], tag: 3 });
    }
    for j in (0..ny).rev() {
        boundary_edges.push(BoundaryEdge { nodes: [node(0, j + 1), node(0, j)], tag: 0 });
    }
    // Geometric check of the tag assignment.
    let mesh = Mesh2D {
        nodes,
        triangles,
        region_tags: vec![0; 2 * nx * ny],
        boundary_edges,
        tags,
    };
    for e in &mesh.boundary_edges {
        let ok = match mesh.tags[e.tag].name.as_str() {
            "left" => e.nodes.iter().all(|&v| mesh.nodes[v][0].abs() <= tol),
            "right" => e.nodes.iter().all(|&v| (mesh.nodes[v][0] - lx).abs() <= tol),
            "bottom" => e.nodes.iter().all(|&v| mesh.nodes[v][1].abs() <= tol),
            "top" => e.nodes.iter().all(|&v| (mesh.nodes[v][1] - ly).abs() <= tol),
            _ => false,
        };
        debug_assert!(ok, "boundary tag assignment inconsistent");
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Constant gradients of the three P1 shape functions on every triangle,
/// along with element areas. The three gradients of each element sum to zero
/// (partition of unity) and reproduce derivatives of affine fields exactly.
pub fn element_shape_gradients(mesh: &Mesh2D) -> Result<Vec<ElementGeometry>> {
    let mut out = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let a2 = mesh.signed_area2(t);
        if a2 <= 0.0 {
            return Err(Error::DegenerateTriangle { index: t, area: 0.5 * a2 });
        }
        let [i, j, k] = mesh.triangles[t];
        let p = [mesh.nodes[i], mesh.nodes[j], mesh.nodes[k]];
        let mut grads = [[0.0; 2]; 3];
        for v in 0..3 {
            let q = p[(v + 1) % 3];
            let r = p[(v + 2) % 3];
            grads[v] = [(q[1] - r[1]) / a2, (r[0] - q[0]) / a2];
        }
        out.push(ElementGeometry { grads, area: 0.5 * a2 });
    }
    Ok(out)
}

/// Symmetric gradient (small strain) of an interleaved nodal displacement
/// field on element `t`.
pub fn element_strain(mesh: &Mesh2D, geo: &[ElementGeometry], t: usize, u: &[f64]) -> Sym2 {
    let tri = mesh.triangles[t];
    let g = &geo[t].grads;
    let mut exx = 0.0;
    let mut eyy = 0.0;
    let mut exy = 0.0;
    for v in 0..3 {
        let ux = u[2 * tri[v]];
        let uy = u[2 * tri[v] + 1];
        exx += g[v][0] * ux;
        eyy += g[v][1] * uy;
        exy += 0.5 * (g[v][1] * ux + g[v][0] * uy);
    }
    Sym2::new(exx, eyy, exy)
}

/// Gradient of a nodal scalar field on element `t`.
pub fn element_scalar_gradient(
    mesh: &Mesh2D,
    geo: &[ElementGeometry],
    t: usize,
    a: &[f64],
) -> [f64; 2] {
    let tri = mesh.triangles[t];
    let g = &geo[t].grads;
    let mut gx = 0.0;
    let mut gy = 0.0;
    for v in 0..3 {
        gx += g[v][0] * a[tri[v]];
        gy += g[v][1] * a[tri[v]];
    }
    [gx, gy]
}

/// Mean of the three nodal values on element `t`.
pub fn element_mean(mesh: &Mesh2D, t: usize, a: &[f64]) -> f64 {
    let tri = mesh.triangles[t];
    (a[tri[0]] + a[tri[1]] + a[tri[2]]) / 3.0
}

/// Serialize to the ASCII mesh format:
/// `nodes N` / N lines `x y` / `triangles M` / M lines `i j k region` /
/// `boundary B` / B lines `i j tagname`, all indices 0-based.
pub fn write_mesh_string(mesh: &Mesh2D) -> String {
    let mut s = String::new();
    writeln!(s, "nodes {}", mesh.n_nodes()).unwrap();
    for p in &mesh.nodes {
        writeln!(s, "{:.17e} {:.17e}", p[0], p[1]).unwrap();
    }
    writeln!(s, "triangles {}", mesh.n_triangles()).unwrap();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], mesh.region_tags[t]).unwrap();
    }
    writeln!(s, "boundary {}", mesh.boundary_edges.len()).unwrap();
    for e in &mesh.boundary_edges {
        writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], mesh.tags[e.tag].name).unwrap();
    }
    s
}

/// Parse the ASCII mesh format written by [`write_mesh_string`]. Tags are
/// created in order of first appearance with kind `Free`.
pub fn parse_mesh(text: &str) -> Result<Mesh2D> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut expect_header = |word: &str| -> Result<usize> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Mesh(format!("missing `{word}` header")))?;
        let mut it = line.split_whitespace();
        match (it.next(), it.next()) {
            (Some(w), Some(n)) if w == word => n
                .parse()
                .map_err(|_| Error::Mesh(format!("bad count in `{word}` header"))),
            _ => Err(Error::Mesh(format!("expected `{word} N`, got `{line}`"))),
        }
    };
    let n_nodes = expect_header("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let line = lines.next().ok_or_else(|| Error::Mesh("truncated node list".into()))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| Error::Mesh(format!("bad node line `{line}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != 2 {
            return Err(Error::Mesh(format!("node line needs 2 values: `{line}`")));
        }
        nodes.push([vals[0], vals[1]]);
    }
    let mut lines2 = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .skip(1 + n_nodes);
    let tri_header = lines2.next().ok_or_else(|| Error::Mesh("missing `triangles` header".into()))?;
    let n_tri: usize = {
        let mut it = tri_header.split_whitespace();
        match (it.next(), it.next()) {
            (Some("triangles"), Some(n)) => n
                .parse()
                .map_err(|_| Error::Mesh("bad count in `triangles` header".into()))?,
            _ => return Err(Error::Mesh(format!("expected `triangles M`, got `{tri_header}`"))),
        }
    };
    let mut triangles = Vec::with_capacity(n_tri);
    let mut region_tags = Vec::with_capacity(n_tri);
    for _ in 0..n_tri {
        let line = lines2.next().ok_or_else(|| Error::Mesh("truncated triangle list".into()))?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| Error::Mesh(format!("bad triangle line `{line}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != 4 {
            return Err(Error::Mesh(format!("triangle line needs 4 values: `{line}`")));
        }
        triangles.push([vals[0], vals[1], vals[2]]);
        region_tags.push(vals[3] as u32);
    }
    let b_header = lines2.next().ok_or_else(|| Error::Mesh("missing `boundary` header".into()))?;
    let n_bnd: usize = {
        let mut it = b_header.split_whitespace();
        match (it.next(), it.next()) {
            (Some("boundary"), Some(n)) => n
                .parse()
                .map_err(|_| Error::Mesh("bad count in `boundary` header".into()))?,
            _ => return Err(Error::Mesh(format!("expected `boundary B`, got `{b_header}`"))),
        }
    };
    let mut tags: Vec<BoundaryTag> = Vec::new();
    let mut boundary_edges = Vec::with_capacity(n_bnd);
    for _ in 0..n_bnd {
        let line = lines2.next().ok_or_else(|| Error::Mesh("truncated boundary list".into()))?;
        let mut it = line.split_whitespace();
        let a: usize = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Mesh(format!("bad boundary line `{line}`")))?;
        let b: usize = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Mesh(format!("bad boundary line `{line}`")))?;
        let name = it
            .next()
            .ok_or_else(|| Error::Mesh(format!("boundary line missing tag name: `{line}`")))?;
        let tag = match tags.iter().position(|t| t.name == name) {
            Some(i) => i,
            None => {
                tags.push(BoundaryTag { name: name.into(), kind: TagKind::Free });
                tags.len() - 1
            }
        };
        boundary_edges.push(BoundaryEdge { nodes: [a, b], tag });
    }
    let mesh = Mesh2D { nodes, triangles, region_tags, boundary_edges, tags };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smallest_mesh() {
        let m = generate_rect_mesh(1, 1, 1.0, 1.0).unwrap();
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert_relative_eq!(m.total_area(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn perimeter_edge_count_by_walk() {
        let m = generate_rect_mesh(2, 1, 2.0, 1.0).unwrap();
        assert_relative_eq!(m.total_area(), 2.0, max_relative = 1e-12);
        // Brute-force walk: count undirected triangle edges used exactly once.
        let mut count: std::collections::HashMap<(usize, usize), usize> = Default::default();
        for tri in &m.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let perimeter = count.values().filter(|&&c| c == 1).count();
        assert_eq!(perimeter, 6);
        assert_eq!(m.boundary_edges.len(), 6);
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(generate_rect_mesh(1, 1, 1.0, -1.0).is_err());
        assert!(generate_rect_mesh(0, 1, 1.0, 1.0).is_err());
        assert!(generate_rect_mesh(1, 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn unit_right_triangle_gradients() {
        let m = Mesh2D {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            region_tags: vec![0],
            boundary_edges: vec![],
            tags: vec![],
        };
        let geo = element_shape_gradients(&m).unwrap();
        assert_eq!(geo[0].grads[0], [-1.0, -1.0]);
        assert_eq!(geo[0].grads[1], [1.0, 0.0]);
        assert_eq!(geo[0].grads[2], [0.0, 1.0]);
        assert_relative_eq!(geo[0].area, 0.5);
    }

    #[test]
    fn partition_of_unity_and_affine_reproduction() {
        let m = generate_rect_mesh(3, 2, 1.5, 0.8).unwrap();
        let geo = element_shape_gradients(&m).unwrap();
        // w(x, y) = 2x + 3y sampled at nodes.
        let w: Vec<f64> = m.nodes.iter().map(|p| 2.0 * p[0] + 3.0 * p[1]).collect();
        for t in 0..m.n_triangles() {
            let sum = geo[t].grads.iter().fold([0.0, 0.0], |s, g| [s[0] + g[0], s[1] + g[1]]);
            assert!(sum[0].abs() <= 1e-12 && sum[1].abs() <= 1e-12);
            let g = element_scalar_gradient(&m, &geo, t, &w);
            assert_relative_eq!(g[0], 2.0, max_relative = 1e-12);
            assert_relative_eq!(g[1], 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn degenerate_triangle_reported_with_index() {
        let m = Mesh2D {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            region_tags: vec![0],
            boundary_edges: vec![],
            tags: vec![],
        };
        match element_shape_gradients(&m) {
            Err(Error::DegenerateTriangle { index: 0, .. }) => {}
            other => panic!("expected degenerate-triangle error, got {other:?}"),
        }
    }

    #[test]
    fn mesh_file_round_trip() {
        let m = generate_rect_mesh(2, 3, 1.0, 2.0).unwrap();
        let text = write_mesh_string(&m);
        let back = parse_mesh(&text).unwrap();
        assert_eq!(back.nodes.len(), m.nodes.len());
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_edges.len(), m.boundary_edges.len());
        assert_relative_eq!(back.total_area(), m.total_area(), max_relative = 1e-14);
    }

    #[test]
    fn boundary_normals_point_outward() {
        let m = generate_rect_mesh(2, 2, 1.0, 1.0).unwrap();
        for e in &m.boundary_edges {
            let n = m.edge_normal(e);
            let expect = match m.tags[e.tag].name.as_str() {
                "left" => [-1.0, 0.0],
                "right" => [1.0, 0.0],
                "bottom" => [0.0, -1.0],
                "top" => [0.0, 1.0],
                _ => unreachable!(),
            };
            assert_relative_eq!(n[0], expect[0], epsilon = 1e-12);
            assert_relative_eq!(n[1], expect[1], epsilon = 1e-12);
        }
    }
}
