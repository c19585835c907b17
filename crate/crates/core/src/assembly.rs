//! Linear systems for the standard, fitted and hybrid discretizations.
//!
//! Enriched unknowns use a hierarchical basis: the function attached to a cut
//! point is the hat on the fitted elements of the cut triangle(s) that equals
//! one at the cut point and vanishes at every original vertex. A discrete
//! function therefore takes the value `(1 - t) u0 + t u1 + w` at the cut point
//! of edge `(v0, v1)`.
//!
//! Systems are first assembled over all vertices followed by the enriched
//! dofs; Dirichlet elimination then drops the boundary vertices.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{FittedMesh, FittedNode, LevelSetInterface, ScalarFn, Side, SubTriangle};
use crate::mesh::Mesh;
use crate::point::{self, Point};
use crate::sparse::{CsrMatrix, TripletMatrix};

/// Scalar field on the plane, shared across threads.
pub type Field<'a> = &'a (dyn Fn(Point) -> f64 + Sync);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Standard,
    Fitted,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Standard, Method::Fitted, Method::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Fitted => "fitted",
            Method::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s {
            "standard" => Ok(Method::Standard),
            "fitted" => Ok(Method::Fitted),
            "hybrid" => Ok(Method::Hybrid),
            other => Err(Error::Invalid(format!(
                "method: unknown method `{other}` (expected standard, fitted or hybrid)"
            ))),
        }
    }
}

/// Diffusion coefficient given by smooth extensions of its inside and
/// outside parts to the whole domain.
#[derive(Clone)]
pub struct CoefficientField {
    plus: ScalarFn,
    minus: ScalarFn,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField").finish_non_exhaustive()
    }
}

impl CoefficientField {
    pub fn new(
        plus: impl Fn(Point) -> f64 + Send + Sync + 'static,
        minus: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CoefficientField {
            plus: Arc::new(plus),
            minus: Arc::new(minus),
        }
    }

    /// `alpha` inside, `beta` outside.
    pub fn piecewise_constant(alpha: f64, beta: f64) -> Self {
        CoefficientField::new(move |_| alpha, move |_| beta)
    }

    pub fn uniform(a: f64) -> Self {
        CoefficientField::piecewise_constant(a, a)
    }

    pub fn value(&self, side: Side, p: Point) -> f64 {
        match side {
            Side::Plus => (self.plus)(p),
            Side::Minus => (self.minus)(p),
        }
    }
}

/// Nodal values of the extension belonging to the element's side; the
/// discrete coefficient is their linear interpolant.
pub fn element_coefficient(element: &SubTriangle, coeff: &CoefficientField) -> [f64; 3] {
    element.points.map(|p| coeff.value(element.side, p))
}

/// Nodal coefficient values for every element of the fitted mesh, in
/// [`FittedMesh::elements`] order.
pub fn build_discrete_coefficient(fitted: &FittedMesh, coeff: &CoefficientField) -> Vec<[f64; 3]> {
    fitted
        .elements()
        .iter()
        .map(|k| element_coefficient(k, coeff))
        .collect()
}

/// Gradients of the barycentric coordinates.
pub fn shape_gradients(p: &[Point; 3]) -> [Point; 3] {
    let d = point::signed_area2(p[0], p[1], p[2]);
    [0, 1, 2].map(|i| {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        Point::new(a.y - b.y, b.x - a.x) * (1.0 / d)
    })
}

/// P1 stiffness matrix with a linear coefficient given by nodal values. The
/// integrand is linear, so the vertex mean of the coefficient is exact.
pub fn local_stiffness(p: &[Point; 3], coeff: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let area = point::triangle_area(p);
    if area <= 0.0 {
        return Err(Error::Invalid(format!(
            "element has non-positive area {area:e}"
        )));
    }
    let g = shape_gradients(p);
    let scale = area * (coeff[0] + coeff[1] + coeff[2]) / 3.0;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = scale * g[i].dot(g[j]);
        }
    }
    Ok(k)
}

/// `∫ f λ_i` by the edge-midpoint rule (exact for quadratics).
pub fn local_load(p: &[Point; 3], f: Field) -> [f64; 3] {
    let area = point::triangle_area(p).abs();
    let mut out = [0.0; 3];
    for k in 0..3 {
        // midpoint of edge (k, k+1): λ_k = λ_{k+1} = 1/2, the third is 0
        let fm = f(p[k].midpoint(p[(k + 1) % 3]));
        out[k] += 0.5 * fm;
        out[(k + 1) % 3] += 0.5 * fm;
    }
    out.map(|v| v * area / 3.0)
}

/// Enriched unknown attached to the cut point of `edge`; hybrid dofs also
/// carry the cut triangle they live on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnrichedDof {
    pub edge: usize,
    pub triangle: Option<usize>,
    pub point: Point,
}

/// Numbering of vertex, enriched and multiplier unknowns.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub method: Method,
    pub n_vertices: usize,
    /// Reduced index -> vertex id, interior vertices only.
    pub free_vertices: Vec<usize>,
    /// Vertex id -> reduced index; `None` on the boundary.
    pub vertex_index: Vec<Option<usize>>,
    pub enriched: Vec<EnrichedDof>,
    /// Cut edge carrying each multiplier.
    pub multipliers: Vec<usize>,
    lookup: HashMap<(Option<usize>, usize), usize>,
}

impl DofMap {
    fn vertices(method: Method, mesh: &Mesh) -> DofMap {
        let mut vertex_index = vec![None; mesh.vertices.len()];
        let mut free_vertices = Vec::new();
        for v in &mesh.vertices {
            if !v.on_boundary {
                vertex_index[v.id] = Some(free_vertices.len());
                free_vertices.push(v.id);
            }
        }
        DofMap {
            method,
            n_vertices: mesh.vertices.len(),
            free_vertices,
            vertex_index,
            enriched: Vec::new(),
            multipliers: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    pub fn standard(mesh: &Mesh) -> DofMap {
        DofMap::vertices(Method::Standard, mesh)
    }

    /// One enriched dof per cut edge.
    pub fn fitted(fitted: &FittedMesh) -> DofMap {
        let mut map = DofMap::vertices(Method::Fitted, &fitted.base);
        for &e in &fitted.cut_edges {
            map.add_enriched(None, e, fitted);
        }
        map
    }

    /// One enriched dof per (cut triangle, cut edge) pair, grouped by
    /// triangle, and one multiplier per cut edge.
    pub fn hybrid(fitted: &FittedMesh) -> DofMap {
        let mut map = DofMap::vertices(Method::Hybrid, &fitted.base);
        for &t in &fitted.band {
            for cut in fitted.classes[t].cut_points() {
                map.add_enriched(Some(t), cut.edge, fitted);
            }
        }
        map.multipliers = fitted.cut_edges.clone();
        map
    }

    fn add_enriched(&mut self, triangle: Option<usize>, edge: usize, fitted: &FittedMesh) {
        self.lookup.insert((triangle, edge), self.enriched.len());
        self.enriched.push(EnrichedDof {
            edge,
            triangle,
            point: fitted.node_point(FittedNode::Cut(edge)),
        });
    }

    /// Enriched dof for the cut point of `edge` as seen from triangle `t`.
    pub fn enriched_index(&self, t: usize, edge: usize) -> Option<usize> {
        let key = match self.method {
            Method::Hybrid => (Some(t), edge),
            _ => (None, edge),
        };
        self.lookup.get(&key).copied()
    }

    pub fn n_free_vertices(&self) -> usize {
        self.free_vertices.len()
    }

    pub fn n_enriched(&self) -> usize {
        self.enriched.len()
    }

    pub fn n_multipliers(&self) -> usize {
        self.multipliers.len()
    }

    /// Size of the system after Dirichlet elimination, multipliers included.
    pub fn dimension(&self) -> usize {
        self.n_free_vertices() + self.n_enriched() + self.n_multipliers()
    }
}

/// System over all vertices followed by the enriched dofs, before boundary
/// conditions.
#[derive(Clone, Debug)]
pub struct FullSystem {
    pub dofs: DofMap,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Symmetric positive definite system over interior vertices followed by the
/// enriched dofs.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub dofs: DofMap,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Prescribed values at boundary vertices (zero at interior ones).
    pub boundary_values: Vec<f64>,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Combines a reduced solution vector with the boundary data.
    pub fn solution(&self, x: &[f64]) -> DiscreteSolution {
        assert_eq!(x.len(), self.dim());
        let nu = self.dofs.n_free_vertices();
        let mut vertex_values = self.boundary_values.clone();
        for (k, &v) in self.dofs.free_vertices.iter().enumerate() {
            vertex_values[v] = x[k];
        }
        DiscreteSolution {
            dofs: self.dofs.clone(),
            vertex_values,
            enriched_values: x[nu..].to_vec(),
        }
    }
}

/// Enriched-block of one cut triangle.
#[derive(Clone, Debug)]
pub struct DBlock {
    pub triangle: usize,
    /// Enriched dof indices, contiguous.
    pub dofs: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

/// Blocks of the hybrid saddle-point system
/// `[A C 0; Cᵀ D B; 0 Bᵀ 0] (u, v, λ) = (b, c, 0)`.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub dofs: DofMap,
    pub a: CsrMatrix,
    pub c: CsrMatrix,
    pub d: CsrMatrix,
    pub d_blocks: Vec<DBlock>,
    pub b: CsrMatrix,
    pub rhs_u: Vec<f64>,
    pub rhs_v: Vec<f64>,
    pub boundary_values: Vec<f64>,
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        self.dofs.dimension()
    }

    /// The whole saddle-point matrix.
    pub fn saddle_matrix(&self) -> CsrMatrix {
        let (nu, nv) = (self.a.rows, self.d.rows);
        let n = self.dim();
        let mut t = TripletMatrix::new(n, n);
        let mut put = |m: &CsrMatrix, r0: usize, c0: usize, transpose: bool| {
            for i in 0..m.rows {
                for (j, v) in m.row(i) {
                    if transpose {
                        t.push(r0 + j, c0 + i, v);
                    } else {
                        t.push(r0 + i, c0 + j, v);
                    }
                }
            }
        };
        put(&self.a, 0, 0, false);
        put(&self.c, 0, nu, false);
        put(&self.c, nu, 0, true);
        put(&self.d, nu, nu, false);
        put(&self.b, nu, nu + nv, false);
        put(&self.b, nu + nv, nu, true);
        t.finalize()
    }

    pub fn saddle_rhs(&self) -> Vec<f64> {
        let mut r = self.rhs_u.clone();
        r.extend_from_slice(&self.rhs_v);
        r.resize(self.dim(), 0.0);
        r
    }

    pub fn solution(&self, u: &[f64], v: &[f64]) -> DiscreteSolution {
        let mut vertex_values = self.boundary_values.clone();
        for (k, &vid) in self.dofs.free_vertices.iter().enumerate() {
            vertex_values[vid] = u[k];
        }
        DiscreteSolution {
            dofs: self.dofs.clone(),
            vertex_values,
            enriched_values: v.to_vec(),
        }
    }
}

/// A discrete function in one of the three spaces.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub dofs: DofMap,
    /// Values at every mesh vertex, boundary included.
    pub vertex_values: Vec<f64>,
    pub enriched_values: Vec<f64>,
}

impl DiscreteSolution {
    /// Value at a node of an element of triangle `t`.
    pub fn node_value(&self, fitted: &FittedMesh, t: usize, node: FittedNode) -> f64 {
        match node {
            FittedNode::Vertex(v) => self.vertex_values[v],
            FittedNode::Cut(e) => {
                let edge = &fitted.base.edges[e];
                let cut = fitted.sampling.cut_point(e).expect("cut edge");
                let w = self
                    .dofs
                    .enriched_index(t, e)
                    .map_or(0.0, |k| self.enriched_values[k]);
                (1.0 - cut.t) * self.vertex_values[edge.v0] + cut.t * self.vertex_values[edge.v1] + w
            }
        }
    }

    /// Nodal values on a fitted element.
    pub fn element_values(&self, fitted: &FittedMesh, element: &SubTriangle) -> [f64; 3] {
        element.nodes.map(|n| self.node_value(fitted, element.parent, n))
    }

    /// Constant gradient on a fitted element.
    pub fn element_gradient(&self, fitted: &FittedMesh, element: &SubTriangle) -> Point {
        let vals = self.element_values(fitted, element);
        let g = shape_gradients(&element.points);
        g[0] * vals[0] + g[1] * vals[1] + g[2] * vals[2]
    }

    /// Largest `|w_T - w_T'|` over cut edges (hybrid only).
    pub fn max_jump(&self, fitted: &FittedMesh) -> f64 {
        fitted
            .orientation
            .iter()
            .map(|(&e, o)| {
                let a = self.dofs.enriched_index(o.from, e);
                let b = self.dofs.enriched_index(o.to, e);
                match (a, b) {
                    (Some(a), Some(b)) if a != b => {
                        (self.enriched_values[a] - self.enriched_values[b]).abs()
                    }
                    _ => 0.0,
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Local dof list and the 3×L map from local dofs to element nodal values.
struct ElementMap {
    dofs: Vec<usize>,
    g: Vec<[f64; 3]>,
}

fn element_map(fitted: &FittedMesh, dofs: &DofMap, element: &SubTriangle) -> ElementMap {
    let t = element.parent;
    let tv = fitted.base.triangles[t].v;
    let nv = dofs.n_vertices;
    let mut local: Vec<usize> = tv.to_vec();
    let mut g: Vec<[f64; 3]> = vec![[0.0; 3]; 3];
    for (n, node) in element.nodes.iter().enumerate() {
        match *node {
            FittedNode::Vertex(v) => {
                let k = tv.iter().position(|&x| x == v).expect("vertex of parent");
                g[k][n] = 1.0;
            }
            FittedNode::Cut(e) => {
                let edge = &fitted.base.edges[e];
                let cut = fitted.sampling.cut_point(e).expect("cut edge");
                let k0 = tv.iter().position(|&x| x == edge.v0).unwrap();
                let k1 = tv.iter().position(|&x| x == edge.v1).unwrap();
                g[k0][n] += 1.0 - cut.t;
                g[k1][n] += cut.t;
                if let Some(j) = dofs.enriched_index(t, e) {
                    let gi = nv + j;
                    let slot = match local.iter().position(|&x| x == gi) {
                        Some(s) => s,
                        None => {
                            local.push(gi);
                            g.push([0.0; 3]);
                            local.len() - 1
                        }
                    };
                    g[slot][n] = 1.0;
                }
            }
        }
    }
    ElementMap { dofs: local, g }
}

fn assemble_elements(
    fitted: &FittedMesh,
    dofs: DofMap,
    coeff: &CoefficientField,
    f: Field,
) -> Result<FullSystem> {
    let n = dofs.n_vertices + dofs.n_enriched();
    let mut t = TripletMatrix::new(n, n);
    let mut rhs = vec![0.0; n];
    for tri in 0..fitted.base.triangles.len() {
        for element in fitted.triangle_elements(tri) {
            let k = local_stiffness(&element.points, element_coefficient(&element, coeff))?;
            let load = local_load(&element.points, f);
            let map = element_map(fitted, &dofs, &element);
            let l = map.dofs.len();
            for a in 0..l {
                rhs[map.dofs[a]] += (0..3).map(|i| map.g[a][i] * load[i]).sum::<f64>();
                for b in 0..l {
                    let mut v = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            v += map.g[a][i] * k[i][j] * map.g[b][j];
                        }
                    }
                    t.push(map.dofs[a], map.dofs[b], v);
                }
            }
        }
    }
    Ok(FullSystem {
        dofs,
        matrix: t.finalize(),
        rhs,
    })
}

/// Standard P1 system on the unfitted mesh. Each triangle takes the
/// coefficient at its barycenter, from the side the barycenter lies on.
pub fn assemble_standard_full(
    mesh: &Mesh,
    coeff: &CoefficientField,
    iface: &LevelSetInterface,
    f: Field,
) -> Result<FullSystem> {
    let dofs = DofMap::standard(mesh);
    let n = mesh.vertices.len();
    let mut t = TripletMatrix::new(n, n);
    let mut rhs = vec![0.0; n];
    for tri in &mesh.triangles {
        let p = mesh.triangle_points(tri.id);
        let c = point::centroid(&p);
        let a = coeff.value(iface.side(c), c);
        let k = local_stiffness(&p, [a; 3])?;
        let load = local_load(&p, f);
        for i in 0..3 {
            rhs[tri.v[i]] += load[i];
            for j in 0..3 {
                t.push(tri.v[i], tri.v[j], k[i][j]);
            }
        }
    }
    Ok(FullSystem {
        dofs,
        matrix: t.finalize(),
        rhs,
    })
}

/// Conforming enriched system over the fitted mesh, before boundary conditions.
pub fn assemble_fitted_full(fitted: &FittedMesh, coeff: &CoefficientField, f: Field) -> Result<FullSystem> {
    assemble_elements(fitted, DofMap::fitted(fitted), coeff, f)
}

/// Primal part of the hybrid system (vertex and duplicated enriched dofs),
/// before boundary conditions.
pub fn assemble_hybrid_full(fitted: &FittedMesh, coeff: &CoefficientField, f: Field) -> Result<FullSystem> {
    assemble_elements(fitted, DofMap::hybrid(fitted), coeff, f)
}

/// Eliminates the boundary vertices: their values are fixed to `g` and their
/// columns moved to the right-hand side.
pub fn apply_dirichlet(full: &FullSystem, mesh: &Mesh, g: Field) -> LinearSystem {
    let dofs = &full.dofs;
    let nv = dofs.n_vertices;
    let nu = dofs.n_free_vertices();
    let boundary_values: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|v| if v.on_boundary { g(v.point()) } else { 0.0 })
        .collect();
    let reduced = |i: usize| -> Option<usize> {
        if i < nv {
            dofs.vertex_index[i]
        } else {
            Some(nu + i - nv)
        }
    };
    let n = nu + dofs.n_enriched();
    let mut t = TripletMatrix::new(n, n);
    let mut rhs = vec![0.0; n];
    for i in 0..full.matrix.rows {
        let Some(ri) = reduced(i) else { continue };
        rhs[ri] += full.rhs[i];
        for (j, v) in full.matrix.row(i) {
            match reduced(j) {
                Some(rj) => t.push(ri, rj, v),
                None => rhs[ri] -= v * boundary_values[j],
            }
        }
    }
    LinearSystem {
        dofs: dofs.clone(),
        matrix: t.finalize(),
        rhs,
        boundary_values,
    }
}

pub fn assemble_standard(
    mesh: &Mesh,
    coeff: &CoefficientField,
    iface: &LevelSetInterface,
    f: Field,
    g: Field,
) -> Result<LinearSystem> {
    Ok(apply_dirichlet(&assemble_standard_full(mesh, coeff, iface, f)?, mesh, g))
}

pub fn assemble_fitted(fitted: &FittedMesh, coeff: &CoefficientField, f: Field, g: Field) -> Result<LinearSystem> {
    Ok(apply_dirichlet(&assemble_fitted_full(fitted, coeff, f)?, &fitted.base, g))
}

/// Constraint block: the multiplier column of cut edge `e` holds
/// `+|e|/2` on the dof of the triangle the interface leaves through `e` and
/// `-|e|/2` on the dof of the triangle it enters.
pub fn constraint_matrix(fitted: &FittedMesh, dofs: &DofMap) -> CsrMatrix {
    let mut t = TripletMatrix::new(dofs.n_enriched(), dofs.n_multipliers());
    for (m, &e) in dofs.multipliers.iter().enumerate() {
        let half = 0.5 * fitted.base.edge_length(e);
        let o = fitted.orientation[&e];
        if let (Some(from), Some(to)) = (dofs.enriched_index(o.from, e), dofs.enriched_index(o.to, e)) {
            t.push(from, m, half);
            t.push(to, m, -half);
        }
    }
    t.finalize()
}

pub fn assemble_hybrid(fitted: &FittedMesh, coeff: &CoefficientField, f: Field, g: Field) -> Result<BlockSystem> {
    let sys = apply_dirichlet(&assemble_hybrid_full(fitted, coeff, f)?, &fitted.base, g);
    Ok(split_blocks(fitted, sys))
}

fn split_blocks(fitted: &FittedMesh, sys: LinearSystem) -> BlockSystem {
    let nu = sys.dofs.n_free_vertices();
    let n = sys.dim();
    let u_idx: Vec<usize> = (0..nu).collect();
    let v_idx: Vec<usize> = (nu..n).collect();
    let a = sys.matrix.submatrix(&u_idx, &u_idx);
    let c = sys.matrix.submatrix(&u_idx, &v_idx);
    let d = sys.matrix.submatrix(&v_idx, &v_idx);
    let mut d_blocks: Vec<DBlock> = Vec::with_capacity(fitted.band.len());
    for (j, dof) in sys.dofs.enriched.iter().enumerate() {
        let t = dof.triangle.expect("hybrid dof has a triangle");
        match d_blocks.last_mut() {
            Some(b) if b.triangle == t => b.dofs.push(j),
            _ => d_blocks.push(DBlock {
                triangle: t,
                dofs: vec![j],
                matrix: DMatrix::zeros(0, 0),
            }),
        }
    }
    for block in &mut d_blocks {
        let k = block.dofs.len();
        block.matrix = DMatrix::from_fn(k, k, |i, j| d.get(block.dofs[i], block.dofs[j]).unwrap_or(0.0));
    }
    let b = constraint_matrix(fitted, &sys.dofs);
    BlockSystem {
        a,
        c,
        d,
        d_blocks,
        b,
        rhs_u: sys.rhs[..nu].to_vec(),
        rhs_v: sys.rhs[nu..].to_vec(),
        boundary_values: sys.boundary_values,
        dofs: sys.dofs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> [Point; 3] {
        [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]
    }

    #[test]
    fn unit_triangle_stiffness() {
        let k = local_stiffness(&unit(), [1.0; 3]).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expect[i][j]).abs() < 1e-15);
            }
            assert!(k[i].iter().sum::<f64>().abs() < 1e-15);
        }
        let k3 = local_stiffness(&unit(), [3.0; 3]).unwrap();
        assert!((k3[0][0] - 3.0).abs() < 1e-15);
        let mut cw = unit();
        cw.swap(1, 2);
        assert!(local_stiffness(&cw, [1.0; 3]).is_err());
    }

    #[test]
    fn unit_triangle_loads() {
        let l = local_load(&unit(), &|_| 1.0);
        assert!(l.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
        // ∫ x λ_i over the reference triangle: x^a y^b λ-moments a! b! c! / (a+b+c+2)!
        let moment = |a: u32, b: u32, c: u32| -> f64 {
            let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
            fact(a) * fact(b) * fact(c) / fact(a + b + c + 2)
        };
        // λ0 = 1 - x - y, λ1 = x, λ2 = y; x λ0 = λ1 λ0, x λ1 = λ1², x λ2 = λ1 λ2
        let oracle = [moment(1, 1, 0), moment(2, 0, 0), moment(1, 0, 1)];
        let l = local_load(&unit(), &|p| p.x);
        for i in 0..3 {
            assert!((l[i] - oracle[i]).abs() < 1e-15, "{i}: {} vs {}", l[i], oracle[i]);
        }
        assert!((oracle[0] - 1.0 / 24.0).abs() < 1e-15 && (oracle[1] - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn linear_coefficient_integrates_exactly() {
        let p = [Point::new(0.0, 0.0), Point::new(0.5, 0.0), Point::new(0.0, 0.5)];
        let coeff = CoefficientField::new(|p| 2.0 + p.x, |_| 1.0);
        let element = SubTriangle {
            parent: 0,
            label: None,
            nodes: [FittedNode::Vertex(0), FittedNode::Vertex(1), FittedNode::Vertex(2)],
            points: p,
            side: Side::Plus,
        };
        let a = element_coefficient(&element, &coeff);
        assert_eq!(a, [2.0, 2.5, 2.0]);
        // ∫ (2 + x) = |K| (2 + mean x) with mean x = 1/6
        let exact = 0.125 * (2.0 + 1.0 / 6.0);
        let k = local_stiffness(&p, a).unwrap();
        let k1 = local_stiffness(&p, [1.0; 3]).unwrap();
        assert!((k[0][0] / k1[0][0] * 0.125 - exact).abs() < 1e-15);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("mixed".parse::<Method>().is_err());
    }
}
