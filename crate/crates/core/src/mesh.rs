//! Conforming triangulations of the square `(-1, 1)^2`.
//!
//! Structured meshes are built on an `(N+1) x (N+1)` grid whose squares are
//! split by the diagonal running from the lower-left to the upper-right corner.
//! With that split the mesh is invariant under the half turn about the origin.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::MeshError;
use crate::point::{self, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub on_boundary: bool,
}

impl Vertex {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Triangle with counterclockwise vertex ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Triangle {
    pub id: usize,
    pub v: [usize; 3],
}

/// Mesh edge with `v0 < v1`. `tri_left` is the first triangle seen in scan order.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub v0: usize,
    pub v1: usize,
    pub tri_left: usize,
    pub tri_right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tri_right.is_none()
    }

    pub fn other_triangle(&self, t: usize) -> Option<usize> {
        if self.tri_left == t {
            self.tri_right
        } else if self.tri_right == Some(t) {
            Some(self.tri_left)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// `tri_edges[t][k]` joins `v[k]` and `v[(k + 1) % 3]` of triangle `t`.
    pub tri_edges: Vec<[usize; 3]>,
    /// Grid subdivision count for structured meshes.
    pub subdivisions: Option<usize>,
    /// Mesh size: the grid step `2/N` for structured meshes.
    pub h: f64,
}

impl Mesh {
    /// Structured mesh of `(-1, 1)^2` with `2 N^2` congruent right triangles.
    pub fn structured(n: usize) -> Result<Mesh, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroSubdivisions);
        }
        let coord = |i: usize| -1.0 + 2.0 * i as f64 / n as f64;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut points = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                points.push(Point::new(coord(i), coord(j)));
            }
        }
        let mut tris = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            }
        }
        let mut mesh = Mesh::from_triangles(&points, &tris, 2.0 / n as f64)?;
        mesh.subdivisions = Some(n);
        for v in &mut mesh.vertices {
            v.on_boundary = v.x.abs().max(v.y.abs()) == 1.0;
        }
        Ok(mesh)
    }

    /// General conforming mesh from points and counterclockwise triangles.
    /// Boundary vertices are the endpoints of edges with a single triangle.
    pub fn from_triangles(
        points: &[Point],
        triangles: &[[usize; 3]],
        h: f64,
    ) -> Result<Mesh, MeshError> {
        let vertices: Vec<Vertex> = points
            .iter()
            .enumerate()
            .map(|(id, p)| Vertex {
                id,
                x: p.x,
                y: p.y,
                on_boundary: false,
            })
            .collect();
        let mut tris = Vec::with_capacity(triangles.len());
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        for (id, v) in triangles.iter().enumerate() {
            if let Some(&bad) = v.iter().find(|&&k| k >= points.len()) {
                return Err(MeshError::UnknownVertex {
                    triangle: id,
                    vertex: bad,
                });
            }
            if v[0] == v[1] || v[1] == v[2] || v[0] == v[2] {
                return Err(MeshError::RepeatedVertex(id));
            }
            if point::signed_area2(points[v[0]], points[v[1]], points[v[2]]) <= 0.0 {
                return Err(MeshError::NonPositiveArea(id));
            }
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                te[k] = match lookup.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.tri_right.is_some() {
                            return Err(MeshError::NonManifoldEdge(key.0, key.1));
                        }
                        edge.tri_right = Some(id);
                        e
                    }
                    None => {
                        let e = edges.len();
                        edges.push(Edge {
                            id: e,
                            v0: key.0,
                            v1: key.1,
                            tri_left: id,
                            tri_right: None,
                        });
                        lookup.insert(key, e);
                        e
                    }
                };
            }
            tris.push(Triangle { id, v: *v });
            tri_edges.push(te);
        }
        let mut mesh = Mesh {
            vertices,
            triangles: tris,
            edges,
            tri_edges,
            subdivisions: None,
            h,
        };
        for e in 0..mesh.edges.len() {
            if mesh.edges[e].is_boundary() {
                let (a, b) = (mesh.edges[e].v0, mesh.edges[e].v1);
                mesh.vertices[a].on_boundary = true;
                mesh.vertices[b].on_boundary = true;
            }
        }
        Ok(mesh)
    }

    pub fn point(&self, v: usize) -> Point {
        self.vertices[v].point()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let v = self.triangles[t].v;
        [self.point(v[0]), self.point(v[1]), self.point(v[2])]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        point::triangle_area(&self.triangle_points(t))
    }

    pub fn edge_points(&self, e: usize) -> (Point, Point) {
        (self.point(self.edges[e].v0), self.point(self.edges[e].v1))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edge_points(e);
        a.distance(b)
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    /// Local index (0..3) of edge `e` in triangle `t`.
    pub fn local_edge(&self, t: usize, e: usize) -> Option<usize> {
        self.tri_edges[t].iter().position(|&x| x == e)
    }

    /// Vertex map of the half turn about the origin (structured meshes only).
    pub fn half_turn_vertex_map(&self) -> Option<Vec<usize>> {
        let n = self.subdivisions?;
        Some(
            (0..self.vertices.len())
                .map(|v| {
                    let (i, j) = (v % (n + 1), v / (n + 1));
                    (n - j) * (n + 1) + (n - i)
                })
                .collect(),
        )
    }

    /// Triangle containing `p`, if any. O(1) on structured meshes.
    pub fn locate(&self, p: Point) -> Option<usize> {
        if let Some(n) = self.subdivisions {
            if p.x.abs() > 1.0 || p.y.abs() > 1.0 {
                return None;
            }
            let step = 2.0 / n as f64;
            let i = (((p.x + 1.0) / step).floor() as usize).min(n - 1);
            let j = (((p.y + 1.0) / step).floor() as usize).min(n - 1);
            let base = 2 * (j * n + i);
            for t in [base, base + 1] {
                if contains(&self.triangle_points(t), p) {
                    return Some(t);
                }
            }
        }
        (0..self.triangles.len()).find(|&t| contains(&self.triangle_points(t), p))
    }

    pub fn quality_report(&self) -> QualityReport {
        let min_inradius = (0..self.triangles.len())
            .map(|t| point::inradius(&self.triangle_points(t)))
            .fold(f64::INFINITY, f64::min);
        QualityReport {
            h: self.h,
            min_inradius,
            h_over_rho: self.h / min_inradius,
            min_intersection_fraction: None,
            min_cut_edge_ratio: None,
            edge_aligned_triangles: 0,
            snapped_vertices: 0,
        }
    }

    /// Plain-text dump: `vertices V triangles T`, then `v` and `t` lines.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "vertices {} triangles {}",
            self.vertices.len(),
            self.triangles.len()
        );
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {:?} {:?}", v.id, v.x, v.y);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "t {} {} {} {}", t.id, t.v[0], t.v[1], t.v[2]);
        }
        s
    }

    /// Parses the output of [`Mesh::dump`]. The mesh size is recomputed as the longest edge.
    pub fn parse_dump(text: &str) -> Result<Mesh, MeshError> {
        let err = |line: usize, message: &str| MeshError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "vertices" || h[2] != "triangles" {
            return Err(err(1, "expected `vertices <V> triangles <T>`"));
        }
        let nv: usize = h[1].parse().map_err(|_| err(1, "bad vertex count"))?;
        let nt: usize = h[3].parse().map_err(|_| err(1, "bad triangle count"))?;
        let mut points = vec![None; nv];
        let mut tris = vec![None; nt];
        for (i, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = i + 1;
            match f.first() {
                Some(&"v") if f.len() == 4 => {
                    let id: usize = f[1].parse().map_err(|_| err(num, "bad id"))?;
                    let x: f64 = f[2].parse().map_err(|_| err(num, "bad x"))?;
                    let y: f64 = f[3].parse().map_err(|_| err(num, "bad y"))?;
                    *points.get_mut(id).ok_or_else(|| err(num, "id out of range"))? =
                        Some(Point::new(x, y));
                }
                Some(&"t") if f.len() == 5 => {
                    let id: usize = f[1].parse().map_err(|_| err(num, "bad id"))?;
                    let mut v = [0usize; 3];
                    for k in 0..3 {
                        v[k] = f[2 + k].parse().map_err(|_| err(num, "bad vertex id"))?;
                    }
                    *tris.get_mut(id).ok_or_else(|| err(num, "id out of range"))? = Some(v);
                }
                _ => return Err(err(num, "unrecognised line")),
            }
        }
        let points: Vec<Point> = points
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| err(0, "missing vertex"))?;
        let tris: Vec<[usize; 3]> = tris
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| err(0, "missing triangle"))?;
        let mut mesh = Mesh::from_triangles(&points, &tris, 0.0)?;
        mesh.h = (0..mesh.edges.len())
            .map(|e| mesh.edge_length(e))
            .fold(0.0, f64::max);
        Ok(mesh)
    }
}

fn contains(tri: &[Point; 3], p: Point) -> bool {
    let l = point::barycentric(tri, p);
    l.iter().all(|&x| x >= -1e-14)
}

/// Shape diagnostics. Never used to reject a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub h: f64,
    /// Smallest inscribed radius over all (sub)triangles.
    pub min_inradius: f64,
    pub h_over_rho: f64,
    /// Smallest distance of a cut point to the ends of its edge, as a fraction of the edge length.
    pub min_intersection_fraction: Option<f64>,
    /// Shortest cut edge divided by `h`.
    pub min_cut_edge_ratio: Option<f64>,
    pub edge_aligned_triangles: usize,
    pub snapped_vertices: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_subdivisions() {
        assert_eq!(Mesh::structured(0).unwrap_err(), MeshError::ZeroSubdivisions);
    }

    #[test]
    fn smallest_grid() {
        let m = Mesh::structured(1).unwrap();
        assert_eq!(
            (m.vertices.len(), m.triangles.len(), m.edges.len()),
            (4, 2, 5)
        );
        assert_eq!(m.boundary_edge_count(), 4);
    }

    #[test]
    fn ten_by_ten_counts() {
        let m = Mesh::structured(10).unwrap();
        assert_eq!(m.vertices.len(), 121);
        assert_eq!(m.triangles.len(), 200);
    }

    #[test]
    fn three_by_three_counts() {
        // horizontal 3*4 = 12, vertical 4*3 = 12, one diagonal per square = 9
        let m = Mesh::structured(3).unwrap();
        assert_eq!((m.vertices.len(), m.triangles.len()), (16, 18));
        assert_eq!(m.edges.len(), 12 + 12 + 9);
        let euler = m.vertices.len() as i64 - m.edges.len() as i64 + m.triangles.len() as i64;
        assert_eq!(euler, 1);
    }

    #[test]
    fn uniform_quality_ratio() {
        // legs L = 2/N: inradius L / (2 + sqrt 2), so h / rho = 2 + sqrt 2 with h = L.
        let m = Mesh::structured(10).unwrap();
        let q = m.quality_report();
        let legs = 0.2;
        let rho = legs / (2.0 + 2f64.sqrt());
        assert!((q.min_inradius - rho).abs() < 1e-14);
        assert!((q.h_over_rho - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((q.h_over_rho - 3.414).abs() < 1e-3);
    }

    #[test]
    fn rejects_clockwise_triangles() {
        let p = [
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 0.0),
        ];
        assert_eq!(
            Mesh::from_triangles(&p, &[[0, 1, 2]], 1.0).unwrap_err(),
            MeshError::NonPositiveArea(0)
        );
    }

    #[test]
    fn locate_finds_containing_triangle() {
        let m = Mesh::structured(8).unwrap();
        for &(x, y) in &[(0.01, 0.02), (-0.99, 0.99), (0.3, -0.7), (1.0, 1.0)] {
            let p = Point::new(x, y);
            let t = m.locate(p).unwrap();
            let l = point::barycentric(&m.triangle_points(t), p);
            assert!(l.iter().all(|&v| v >= -1e-12));
        }
        assert!(m.locate(Point::new(1.5, 0.0)).is_none());
    }

    #[test]
    fn dump_round_trip() {
        let m = Mesh::structured(3).unwrap();
        let text = m.dump();
        assert!(text.starts_with("vertices 16 triangles 18\n"));
        let back = Mesh::parse_dump(&text).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.edges.len(), m.edges.len());
    }
}
