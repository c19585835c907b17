//! Interface geometry: level sets, edge crossings, classification of
//! triangles against the interface, and the fitted subtriangulation.
//!
//! The interface is the zero set of a level-set function `phi`, negative on
//! the inside (the `+` side) and positive outside (the `-` side). The curve is
//! oriented counterclockwise, so the `+` side is always on the left of the
//! interpolating polyline.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::GeometryError;
use crate::mesh::{Mesh, QualityReport};
use crate::point::{self, Point};

/// Cut points closer than this (as a fraction of the edge length) to an
/// endpoint are moved onto the vertex.
pub const SNAP_TOLERANCE: f64 = 1e-9;
/// Vertices with `|phi| < VERTEX_TOLERANCE` lie on the interface.
pub const VERTEX_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// Inside, `phi < 0`.
    Plus,
    /// Outside, `phi >= 0`.
    Minus,
}

impl Side {
    pub fn from_phi(phi: f64) -> Side {
        if phi < 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Plus => "+",
            Side::Minus => "-",
        })
    }
}

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum InterfaceShape {
    Circle { center: Point, radius: f64 },
    Implicit(ScalarFn),
}

/// Closed interface given as the zero set of a level-set function.
#[derive(Clone)]
pub struct LevelSetInterface {
    pub shape: InterfaceShape,
}

impl fmt::Debug for LevelSetInterface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            InterfaceShape::Circle { center, radius } => f
                .debug_struct("Circle")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            InterfaceShape::Implicit(_) => f.write_str("Implicit"),
        }
    }
}

impl LevelSetInterface {
    pub fn circle(center: Point, radius: f64) -> Self {
        LevelSetInterface {
            shape: InterfaceShape::Circle { center, radius },
        }
    }

    pub fn implicit(phi: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        LevelSetInterface {
            shape: InterfaceShape::Implicit(Arc::new(phi)),
        }
    }

    /// The same circle evaluated through the generic bisection path.
    pub fn as_implicit(&self) -> Self {
        let this = self.clone();
        LevelSetInterface::implicit(move |p| this.phi(p))
    }

    pub fn phi(&self, p: Point) -> f64 {
        match &self.shape {
            InterfaceShape::Circle { center, radius } => (p - *center).norm() - radius,
            InterfaceShape::Implicit(f) => f(p),
        }
    }

    pub fn side(&self, p: Point) -> Side {
        Side::from_phi(self.phi(p))
    }

    /// Parameter `t` in `[0, 1]` where `phi(a + t (b - a)) = 0`, given a sign
    /// change between `a` and `b`. `scale` sets the bisection stopping
    /// tolerance `|phi| <= 1e-13 scale`.
    pub fn segment_root(&self, a: Point, b: Point, scale: f64) -> Option<f64> {
        match &self.shape {
            InterfaceShape::Circle { center, radius } => {
                circle_segment_root(a - *center, b - a, *radius)
            }
            InterfaceShape::Implicit(_) => self.bisect(a, b, scale),
        }
    }

    fn bisect(&self, a: Point, b: Point, scale: f64) -> Option<f64> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut f_lo = self.phi(a);
        let f_hi = self.phi(b);
        if f_lo == 0.0 {
            return Some(0.0);
        }
        if f_hi == 0.0 {
            return Some(1.0);
        }
        if f_lo.signum() == f_hi.signum() {
            return None;
        }
        let tol = 1e-13 * scale;
        let mut mid = 0.5;
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let f_mid = self.phi(a.lerp(b, mid));
            if f_mid.abs() <= tol || hi - lo <= f64::EPSILON {
                break;
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        Some(mid)
    }
}

/// Root in `[0, 1]` of `|a + t d| = r` (coordinates relative to the center).
fn circle_segment_root(a: Point, d: Point, r: f64) -> Option<f64> {
    let qa = d.norm_squared();
    let qb = 2.0 * d.dot(a);
    let qc = a.norm_squared() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if qa == 0.0 || disc < 0.0 {
        return None;
    }
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let mut roots = [q / qa, if q != 0.0 { qc / q } else { q / qa }];
    roots.sort_by(|x, y| x.total_cmp(y));
    const SLACK: f64 = 1e-12;
    roots
        .into_iter()
        .find(|t| (-SLACK..=1.0 + SLACK).contains(t))
        .map(|t| t.clamp(0.0, 1.0))
}

/// Point where the interface crosses the interior of a mesh edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutPoint {
    pub edge: usize,
    /// Parameter from `v0` to `v1` of the edge.
    pub t: f64,
    pub point: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeCrossing {
    None,
    /// The crossing sits on (or was snapped to) this vertex.
    AtVertex(usize),
    Interior(CutPoint),
}

/// Crossing of edge `e` computed from the level set alone.
pub fn edge_intersection(
    mesh: &Mesh,
    e: usize,
    iface: &LevelSetInterface,
) -> Result<EdgeCrossing, GeometryError> {
    let edge = &mesh.edges[e];
    let (a, b) = mesh.edge_points(e);
    let (pa, pb) = (iface.phi(a), iface.phi(b));
    let (on_a, on_b) = (pa.abs() < VERTEX_TOLERANCE, pb.abs() < VERTEX_TOLERANCE);
    match (on_a, on_b) {
        (true, true) => return Ok(EdgeCrossing::None),
        (true, false) => return Ok(EdgeCrossing::AtVertex(edge.v0)),
        (false, true) => return Ok(EdgeCrossing::AtVertex(edge.v1)),
        _ => {}
    }
    if Side::from_phi(pa) == Side::from_phi(pb) {
        return Ok(EdgeCrossing::None);
    }
    let t = iface
        .segment_root(a, b, mesh.h)
        .ok_or(GeometryError::NoBracket { edge: e })?;
    Ok(snap(edge.v0, edge.v1, e, t, a, b))
}

fn snap(v0: usize, v1: usize, e: usize, t: f64, a: Point, b: Point) -> EdgeCrossing {
    if t < SNAP_TOLERANCE {
        EdgeCrossing::AtVertex(v0)
    } else if t > 1.0 - SNAP_TOLERANCE {
        EdgeCrossing::AtVertex(v1)
    } else {
        EdgeCrossing::Interior(CutPoint {
            edge: e,
            t,
            point: a.lerp(b, t),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexState {
    On,
    Off(Side),
}

impl VertexState {
    pub fn side(self) -> Option<Side> {
        match self {
            VertexState::On => None,
            VertexState::Off(s) => Some(s),
        }
    }
}

/// Node of the fitted mesh: an original vertex or the cut point of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FittedNode {
    Vertex(usize),
    Cut(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TriangleClass {
    /// The interface misses the triangle.
    Uncut { side: Side },
    /// The interface meets the triangle only in a vertex or along an edge.
    EdgeAligned { side: Side },
    /// The interface crosses two edges. `apex` is the vertex shared by the
    /// two crossed edges; the interface enters through `entry` and leaves
    /// through `exit`.
    CutTwoEdges {
        entry: CutPoint,
        exit: CutPoint,
        apex: usize,
        remaining_edge: usize,
    },
    /// The interface crosses one edge and passes through the opposite vertex.
    /// `vertex_first` is true when the oriented interface runs from the vertex
    /// to the cut point.
    CutEdgeVertex {
        cut: CutPoint,
        vertex: usize,
        vertex_first: bool,
    },
}

impl TriangleClass {
    pub fn is_cut(&self) -> bool {
        matches!(
            self,
            TriangleClass::CutTwoEdges { .. } | TriangleClass::CutEdgeVertex { .. }
        )
    }

    /// Side of an uncut triangle.
    pub fn uncut_side(&self) -> Option<Side> {
        match self {
            TriangleClass::Uncut { side } | TriangleClass::EdgeAligned { side } => Some(*side),
            _ => None,
        }
    }

    /// Oriented piece of the interpolated interface inside the triangle.
    pub fn gamma_segment(&self) -> Option<(FittedNode, FittedNode)> {
        match self {
            TriangleClass::CutTwoEdges { entry, exit, .. } => {
                Some((FittedNode::Cut(entry.edge), FittedNode::Cut(exit.edge)))
            }
            TriangleClass::CutEdgeVertex {
                cut,
                vertex,
                vertex_first,
            } => {
                let (v, c) = (FittedNode::Vertex(*vertex), FittedNode::Cut(cut.edge));
                Some(if *vertex_first { (v, c) } else { (c, v) })
            }
            _ => None,
        }
    }

    /// Cut points on the triangle's edges, in (entry, exit) order when both exist.
    pub fn cut_points(&self) -> Vec<CutPoint> {
        match self {
            TriangleClass::CutTwoEdges { entry, exit, .. } => vec![*entry, *exit],
            TriangleClass::CutEdgeVertex { cut, .. } => vec![*cut],
            _ => Vec::new(),
        }
    }
}

/// Vertex states and edge crossings for a whole mesh, with snapping applied
/// consistently: a vertex snapped from any incident edge is on the interface
/// for every triangle that contains it.
#[derive(Clone, Debug)]
pub struct InterfaceSampling {
    pub phi: Vec<f64>,
    pub vertex_states: Vec<VertexState>,
    pub crossings: Vec<EdgeCrossing>,
}

impl InterfaceSampling {
    pub fn new(mesh: &Mesh, iface: &LevelSetInterface) -> Result<Self, GeometryError> {
        let phi: Vec<f64> = mesh.vertices.iter().map(|v| iface.phi(v.point())).collect();
        let mut states: Vec<VertexState> = phi
            .iter()
            .map(|&p| {
                if p.abs() < VERTEX_TOLERANCE {
                    VertexState::On
                } else {
                    VertexState::Off(Side::from_phi(p))
                }
            })
            .collect();
        let mut roots = vec![None; mesh.edges.len()];
        for (e, edge) in mesh.edges.iter().enumerate() {
            if let (VertexState::Off(s0), VertexState::Off(s1)) =
                (states[edge.v0], states[edge.v1])
            {
                if s0 != s1 {
                    let (a, b) = mesh.edge_points(e);
                    let t = iface
                        .segment_root(a, b, mesh.h)
                        .ok_or(GeometryError::NoBracket { edge: e })?;
                    roots[e] = Some(t);
                }
            }
        }
        for (e, edge) in mesh.edges.iter().enumerate() {
            if let Some(t) = roots[e] {
                if t < SNAP_TOLERANCE {
                    states[edge.v0] = VertexState::On;
                } else if t > 1.0 - SNAP_TOLERANCE {
                    states[edge.v1] = VertexState::On;
                }
            }
        }
        let crossings = mesh
            .edges
            .iter()
            .enumerate()
            .map(|(e, edge)| match (states[edge.v0], states[edge.v1], roots[e]) {
                (VertexState::Off(s0), VertexState::Off(s1), Some(t)) if s0 != s1 => {
                    let (a, b) = mesh.edge_points(e);
                    EdgeCrossing::Interior(CutPoint {
                        edge: e,
                        t,
                        point: a.lerp(b, t),
                    })
                }
                _ => EdgeCrossing::None,
            })
            .collect();
        Ok(InterfaceSampling {
            phi,
            vertex_states: states,
            crossings,
        })
    }

    pub fn cut_point(&self, e: usize) -> Option<CutPoint> {
        match self.crossings[e] {
            EdgeCrossing::Interior(c) => Some(c),
            _ => None,
        }
    }
}

/// Classifies triangle `t` from consistent vertex states and edge crossings.
pub fn classify_triangle(
    mesh: &Mesh,
    sampling: &InterfaceSampling,
    t: usize,
) -> Result<TriangleClass, GeometryError> {
    let v = mesh.triangles[t].v;
    let te = mesh.tri_edges[t];
    let states = v.map(|k| sampling.vertex_states[k]);
    let on: Vec<usize> = (0..3).filter(|&k| states[k] == VertexState::On).collect();
    let crossed: Vec<usize> = (0..3)
        .filter(|&k| sampling.cut_point(te[k]).is_some())
        .collect();
    if crossed.len() == 3 {
        return Err(GeometryError::TooManyCrossings { triangle: t });
    }
    let p = mesh.triangle_points(t);
    match on.len() {
        0 => match crossed.len() {
            0 => Ok(TriangleClass::Uncut {
                side: states[0].side().expect("vertex off the interface"),
            }),
            2 => {
                // crossed edges k and j; shared local vertex
                let (k, j) = (crossed[0], crossed[1]);
                let apex_local = shared_local_vertex(k, j);
                let apex = v[apex_local];
                let apex_side = states[apex_local].side().expect("vertex off the interface");
                let c0 = sampling.cut_point(te[k]).unwrap();
                let c1 = sampling.cut_point(te[j]).unwrap();
                // the + side lies to the left of entry -> exit
                let left = (c1.point - c0.point).cross(p[apex_local] - c0.point) > 0.0;
                let (entry, exit) = if left == (apex_side == Side::Plus) {
                    (c0, c1)
                } else {
                    (c1, c0)
                };
                let remaining_edge = te[(0..3).find(|&m| m != k && m != j).unwrap()];
                Ok(TriangleClass::CutTwoEdges {
                    entry,
                    exit,
                    apex,
                    remaining_edge,
                })
            }
            n => Err(GeometryError::InconsistentCrossings {
                triangle: t,
                crossed: n,
            }),
        },
        1 => {
            let k = on[0];
            // edge opposite local vertex k joins k+1 and k+2
            let opposite = (k + 1) % 3;
            match (crossed.as_slice(), sampling.cut_point(te[opposite])) {
                ([m], Some(cut)) if *m == opposite => {
                    let a_local = (k + 1) % 3;
                    let a_side = states[a_local].side().expect("vertex off the interface");
                    let left = (cut.point - p[k]).cross(p[a_local] - p[k]) > 0.0;
                    let vertex_first = left == (a_side == Side::Plus);
                    Ok(TriangleClass::CutEdgeVertex {
                        cut,
                        vertex: v[k],
                        vertex_first,
                    })
                }
                ([], _) => Ok(TriangleClass::EdgeAligned {
                    side: states[(k + 1) % 3].side().expect("vertex off the interface"),
                }),
                (c, _) => Err(GeometryError::InconsistentCrossings {
                    triangle: t,
                    crossed: c.len(),
                }),
            }
        }
        2 => {
            let k = (0..3).find(|k| !on.contains(k)).unwrap();
            Ok(TriangleClass::EdgeAligned {
                side: states[k].side().expect("vertex off the interface"),
            })
        }
        _ => Err(GeometryError::AllVerticesOnInterface { triangle: t }),
    }
}

/// Local vertex shared by local edges `k` and `j` (edge `k` joins `k` and `k+1`).
fn shared_local_vertex(k: usize, j: usize) -> usize {
    let a = [k, (k + 1) % 3];
    let b = [j, (j + 1) % 3];
    *a.iter().find(|x| b.contains(x)).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubLabel {
    K1,
    K2,
    K3,
}

/// Element of the fitted mesh: an uncut triangle or a piece of a cut one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubTriangle {
    pub parent: usize,
    /// `None` for uncut triangles.
    pub label: Option<SubLabel>,
    pub nodes: [FittedNode; 3],
    pub points: [Point; 3],
    pub side: Side,
}

impl SubTriangle {
    pub fn area(&self) -> f64 {
        point::triangle_area(&self.points)
    }

    fn new_ccw(
        parent: usize,
        label: SubLabel,
        mut nodes: [FittedNode; 3],
        mut points: [Point; 3],
        side: Side,
    ) -> Self {
        if point::triangle_area(&points) < 0.0 {
            nodes.swap(1, 2);
            points.swap(1, 2);
        }
        SubTriangle {
            parent,
            label: Some(label),
            nodes,
            points,
            side,
        }
    }
}

/// Splits a cut triangle along its interface chord.
///
/// Two crossed edges give `K1 = (p, q, apex)` and a quadrilateral split into
/// `K2` (which shares the chord with `K1`) and `K3`; the quadrilateral
/// diagonal maximises the smaller minimum angle of the two pieces, ties going
/// to the far vertex with the lower id. An edge-vertex crossing gives two
/// pieces and no `K3`.
pub fn subtriangulate(
    mesh: &Mesh,
    t: usize,
    class: &TriangleClass,
    sampling: &InterfaceSampling,
) -> Result<Vec<SubTriangle>, GeometryError> {
    use FittedNode::{Cut, Vertex};
    let tri_area = mesh.triangle_area(t);
    let side_of = |v: usize| sampling.vertex_states[v].side().expect("vertex off the interface");
    let subs = match class {
        TriangleClass::CutTwoEdges {
            entry, exit, apex, ..
        } => {
            let c = *apex;
            let far = |cut: &CutPoint| {
                let e = &mesh.edges[cut.edge];
                if e.v0 == c {
                    e.v1
                } else {
                    e.v0
                }
            };
            let (p, q) = (entry, exit);
            let (a, b) = (far(p), far(q));
            let (pa, pb) = (mesh.point(a), mesh.point(b));
            let inner = side_of(c);
            let outer = inner.opposite();
            let k1 = SubTriangle::new_ccw(
                t,
                SubLabel::K1,
                [Cut(p.edge), Cut(q.edge), Vertex(c)],
                [p.point, q.point, mesh.point(c)],
                inner,
            );
            // diagonal p-b: (p, q, b) + (p, b, a); diagonal q-a: (p, q, a) + (q, b, a)
            let via_b = [[p.point, q.point, pb], [p.point, pb, pa]];
            let via_a = [[p.point, q.point, pa], [q.point, pb, pa]];
            let quality = |pair: &[[Point; 3]; 2]| point::min_angle(&pair[0]).min(point::min_angle(&pair[1]));
            let (qb, qa) = (quality(&via_b), quality(&via_a));
            let use_b = if (qb - qa).abs() <= 1e-12 * qb.max(qa) {
                b < a
            } else {
                qb > qa
            };
            let (k2, k3) = if use_b {
                (
                    SubTriangle::new_ccw(t, SubLabel::K2, [Cut(p.edge), Cut(q.edge), Vertex(b)], via_b[0], outer),
                    SubTriangle::new_ccw(t, SubLabel::K3, [Cut(p.edge), Vertex(b), Vertex(a)], via_b[1], outer),
                )
            } else {
                (
                    SubTriangle::new_ccw(t, SubLabel::K2, [Cut(p.edge), Cut(q.edge), Vertex(a)], via_a[0], outer),
                    SubTriangle::new_ccw(t, SubLabel::K3, [Cut(q.edge), Vertex(b), Vertex(a)], via_a[1], outer),
                )
            };
            vec![k1, k2, k3]
        }
        TriangleClass::CutEdgeVertex { cut, vertex, .. } => {
            let e = &mesh.edges[cut.edge];
            let (a, b) = (e.v0, e.v1);
            let (sa, sb) = (side_of(a), side_of(b));
            let pv = mesh.point(*vertex);
            let piece = |label, w: usize, side| {
                SubTriangle::new_ccw(
                    t,
                    label,
                    [Vertex(*vertex), Vertex(w), Cut(cut.edge)],
                    [pv, mesh.point(w), cut.point],
                    side,
                )
            };
            let (plus, minus) = if sa == Side::Plus { (a, b) } else { (b, a) };
            debug_assert_ne!(sa, sb);
            vec![piece(SubLabel::K1, plus, Side::Plus), piece(SubLabel::K2, minus, Side::Minus)]
        }
        _ => return Ok(Vec::new()),
    };
    for s in &subs {
        let area = s.area();
        if area < 1e-14 * tri_area {
            return Err(GeometryError::DegenerateSubtriangle { triangle: t, area });
        }
    }
    Ok(subs)
}

/// Vertex of the interface polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaVertex {
    pub node: FittedNode,
    pub point: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutEdgeOrientation {
    /// Triangle the oriented interface leaves through the edge.
    pub from: usize,
    /// Triangle the oriented interface enters through the edge; the edge normal points into it.
    pub to: usize,
}

/// Mesh with every cut triangle split along the interpolated interface.
#[derive(Clone, Debug)]
pub struct FittedMesh {
    pub base: Mesh,
    pub interface: LevelSetInterface,
    pub sampling: InterfaceSampling,
    pub classes: Vec<TriangleClass>,
    /// Subtriangles per triangle; empty for uncut triangles.
    pub subtriangles: Vec<Vec<SubTriangle>>,
    /// Closed counterclockwise polyline; the last vertex repeats the first.
    pub gamma_h: Vec<GammaVertex>,
    /// Edges whose interior is crossed by the interface.
    pub cut_edges: Vec<usize>,
    /// Cut triangles.
    pub band: Vec<usize>,
    pub snapped_vertices: Vec<usize>,
    pub orientation: HashMap<usize, CutEdgeOrientation>,
}

impl FittedMesh {
    pub fn build(mesh: &Mesh, iface: &LevelSetInterface) -> Result<FittedMesh, GeometryError> {
        let sampling = InterfaceSampling::new(mesh, iface)?;
        for v in &mesh.vertices {
            if v.on_boundary && sampling.vertex_states[v.id] == VertexState::On {
                return Err(GeometryError::TouchesBoundary { vertex: v.id });
            }
        }
        for e in mesh.edges.iter().filter(|e| e.is_boundary()) {
            if sampling.cut_point(e.id).is_some() {
                return Err(GeometryError::TouchesBoundary { vertex: e.v0 });
            }
        }
        let classes = (0..mesh.triangles.len())
            .map(|t| classify_triangle(mesh, &sampling, t))
            .collect::<Result<Vec<_>, _>>()?;
        let subtriangles = classes
            .iter()
            .enumerate()
            .map(|(t, c)| subtriangulate(mesh, t, c, &sampling))
            .collect::<Result<Vec<_>, _>>()?;
        let band: Vec<usize> = (0..classes.len()).filter(|&t| classes[t].is_cut()).collect();
        let cut_edges: Vec<usize> = (0..mesh.edges.len())
            .filter(|&e| sampling.cut_point(e).is_some())
            .collect();
        let snapped_vertices: Vec<usize> = (0..mesh.vertices.len())
            .filter(|&v| sampling.vertex_states[v] == VertexState::On)
            .collect();

        let mut orientation: HashMap<usize, (Option<usize>, Option<usize>)> = HashMap::new();
        for &t in &band {
            let (start, end) = classes[t].gamma_segment().unwrap();
            if let FittedNode::Cut(e) = start {
                orientation.entry(e).or_default().1 = Some(t);
            }
            if let FittedNode::Cut(e) = end {
                orientation.entry(e).or_default().0 = Some(t);
            }
        }
        let orientation = orientation
            .into_iter()
            .map(|(e, (from, to))| match (from, to) {
                (Some(from), Some(to)) => Ok((e, CutEdgeOrientation { from, to })),
                _ => Err(GeometryError::OpenPolyline(format!(
                    "cut edge {e} is not traversed in both directions"
                ))),
            })
            .collect::<Result<HashMap<_, _>, _>>()?;

        let gamma_h = assemble_polyline(mesh, &sampling, &classes, &band)?;
        Ok(FittedMesh {
            base: mesh.clone(),
            interface: iface.clone(),
            sampling,
            classes,
            subtriangles,
            gamma_h,
            cut_edges,
            band,
            snapped_vertices,
            orientation,
        })
    }

    pub fn node_point(&self, node: FittedNode) -> Point {
        match node {
            FittedNode::Vertex(v) => self.base.point(v),
            FittedNode::Cut(e) => self.sampling.cut_point(e).expect("cut edge").point,
        }
    }

    /// All elements of the fitted mesh in triangle order.
    pub fn elements(&self) -> Vec<SubTriangle> {
        let mut out = Vec::with_capacity(self.base.triangles.len() + 2 * self.band.len());
        for t in 0..self.base.triangles.len() {
            out.extend(self.triangle_elements(t));
        }
        out
    }

    /// Elements covering triangle `t`: itself when uncut, its pieces otherwise.
    pub fn triangle_elements(&self, t: usize) -> Vec<SubTriangle> {
        match self.classes[t].uncut_side() {
            Some(side) => {
                let v = self.base.triangles[t].v;
                vec![SubTriangle {
                    parent: t,
                    label: None,
                    nodes: v.map(FittedNode::Vertex),
                    points: self.base.triangle_points(t),
                    side,
                }]
            }
            None => self.subtriangles[t].clone(),
        }
    }

    pub fn gamma_length(&self) -> f64 {
        self.gamma_h
            .windows(2)
            .map(|w| w[0].point.distance(w[1].point))
            .sum()
    }

    /// Which side of the interpolated interface `p` lies on; points on the
    /// polyline count as `+`.
    pub fn side_of_point(&self, p: Point) -> Option<Side> {
        let t = self.base.locate(p)?;
        Some(match &self.classes[t] {
            TriangleClass::Uncut { side } | TriangleClass::EdgeAligned { side } => *side,
            class => {
                let (s, e) = class.gamma_segment().unwrap();
                let (a, b) = (self.node_point(s), self.node_point(e));
                if (b - a).cross(p - a) >= 0.0 {
                    Side::Plus
                } else {
                    Side::Minus
                }
            }
        })
    }

    pub fn count_case(&self, pred: impl Fn(&TriangleClass) -> bool) -> usize {
        self.classes.iter().filter(|c| pred(c)).count()
    }

    pub fn quality_report(&self) -> QualityReport {
        let mesh = &self.base;
        let min_inradius = self
            .elements()
            .iter()
            .map(|s| point::inradius(&s.points))
            .fold(f64::INFINITY, f64::min);
        let min_fraction = self
            .cut_edges
            .iter()
            .map(|&e| {
                let t = self.sampling.cut_point(e).unwrap().t;
                t.min(1.0 - t)
            })
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))));
        let min_ratio = self
            .cut_edges
            .iter()
            .map(|&e| mesh.edge_length(e) / mesh.h)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))));
        QualityReport {
            h: mesh.h,
            min_inradius,
            h_over_rho: mesh.h / min_inradius,
            min_intersection_fraction: min_fraction,
            min_cut_edge_ratio: min_ratio,
            edge_aligned_triangles: self
                .count_case(|c| matches!(c, TriangleClass::EdgeAligned { .. })),
            snapped_vertices: self.snapped_vertices.len(),
        }
    }
}

/// Chains the oriented chords of the cut triangles (and of interface-aligned
/// edges separating opposite sides) into one closed polyline.
fn assemble_polyline(
    mesh: &Mesh,
    sampling: &InterfaceSampling,
    classes: &[TriangleClass],
    band: &[usize],
) -> Result<Vec<GammaVertex>, GeometryError> {
    let mut segments: Vec<(FittedNode, FittedNode)> =
        band.iter().map(|&t| classes[t].gamma_segment().unwrap()).collect();
    for edge in &mesh.edges {
        let both_on = sampling.vertex_states[edge.v0] == VertexState::On
            && sampling.vertex_states[edge.v1] == VertexState::On;
        let Some(right) = edge.tri_right else { continue };
        if !both_on {
            continue;
        }
        let (l, r) = (classes[edge.tri_left].uncut_side(), classes[right].uncut_side());
        if let (Some(sl), Some(sr)) = (l, r) {
            if sl != sr {
                // orient with the + triangle on the left
                let plus_tri = if sl == Side::Plus { edge.tri_left } else { right };
                let third = mesh.triangles[plus_tri]
                    .v
                    .into_iter()
                    .find(|&v| v != edge.v0 && v != edge.v1)
                    .unwrap();
                let (a, b) = (mesh.point(edge.v0), mesh.point(edge.v1));
                let seg = if (b - a).cross(mesh.point(third) - a) > 0.0 {
                    (edge.v0, edge.v1)
                } else {
                    (edge.v1, edge.v0)
                };
                segments.push((FittedNode::Vertex(seg.0), FittedNode::Vertex(seg.1)));
            }
        }
    }
    if segments.is_empty() {
        return Ok(Vec::new());
    }
    let mut next: HashMap<FittedNode, FittedNode> = HashMap::with_capacity(segments.len());
    for &(s, e) in &segments {
        if next.insert(s, e).is_some() {
            return Err(GeometryError::OpenPolyline(format!(
                "node {s:?} starts more than one segment"
            )));
        }
    }
    let node_point = |n: FittedNode| match n {
        FittedNode::Vertex(v) => mesh.point(v),
        FittedNode::Cut(e) => sampling.cut_point(e).unwrap().point,
    };
    // deterministic start: the smallest node
    let start = *next.keys().min().unwrap();
    let mut poly = vec![GammaVertex {
        node: start,
        point: node_point(start),
    }];
    let mut cur = start;
    for _ in 0..segments.len() {
        let nxt = *next.get(&cur).ok_or_else(|| {
            GeometryError::OpenPolyline(format!("polyline stops at node {cur:?}"))
        })?;
        poly.push(GammaVertex {
            node: nxt,
            point: node_point(nxt),
        });
        cur = nxt;
        if cur == start {
            break;
        }
    }
    if cur != start {
        return Err(GeometryError::OpenPolyline("walk did not return to its start".into()));
    }
    if poly.len() - 1 != segments.len() {
        // count the remaining loops for the message
        let mut seen: std::collections::HashSet<FittedNode> =
            poly.iter().map(|g| g.node).collect();
        let mut components = 1;
        for &(s, _) in &segments {
            if seen.insert(s) {
                components += 1;
                let mut c = next[&s];
                while seen.insert(c) {
                    c = next[&c];
                }
            }
        }
        return Err(GeometryError::MultipleComponents { components });
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle(p: [(f64, f64); 3]) -> Mesh {
        let pts: Vec<Point> = p.iter().map(|&(x, y)| Point::new(x, y)).collect();
        Mesh::from_triangles(&pts, &[[0, 1, 2]], 0.2).unwrap()
    }

    fn origin_circle(r: f64) -> LevelSetInterface {
        LevelSetInterface::circle(Point::new(0.0, 0.0), r)
    }

    #[test]
    fn vertex_on_circle_snaps() {
        let m = single_triangle([(0.3, 0.4), (0.5, 0.4), (0.4, 0.6)]);
        let e = m.edges.iter().position(|e| (e.v0, e.v1) == (0, 1)).unwrap();
        assert_eq!(
            edge_intersection(&m, e, &origin_circle(0.5)).unwrap(),
            EdgeCrossing::AtVertex(0)
        );
    }

    #[test]
    fn axis_crossing_is_midpoint() {
        let m = single_triangle([(0.4, 0.0), (0.6, 0.0), (0.4, 0.2)]);
        let e = m.edges.iter().position(|e| (e.v0, e.v1) == (0, 1)).unwrap();
        match edge_intersection(&m, e, &origin_circle(0.5)).unwrap() {
            EdgeCrossing::Interior(c) => {
                assert!((c.t - 0.5).abs() < 1e-14);
                assert!((c.point.x - 0.5).abs() < 1e-14 && c.point.y.abs() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn off_axis_crossing_matches_independent_root() {
        // (0.4 + 0.2 t)^2 + 0.04 = 0.25, solved by plain bisection on the polynomial
        let f = |t: f64| (0.4 + 0.2 * t).powi(2) + 0.04 - 0.25;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((oracle - 0.291_287_847_477_920_1).abs() < 1e-12);
        let m = single_triangle([(0.4, 0.2), (0.6, 0.2), (0.5, 0.4)]);
        let e = m.edges.iter().position(|e| (e.v0, e.v1) == (0, 1)).unwrap();
        for iface in [origin_circle(0.5), origin_circle(0.5).as_implicit()] {
            match edge_intersection(&m, e, &iface).unwrap() {
                EdgeCrossing::Interior(c) => assert!((c.t - oracle).abs() < 1e-12),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn bisection_requires_bracket() {
        let m = single_triangle([(0.0, 0.0), (0.1, 0.0), (0.0, 0.1)]);
        let iface = LevelSetInterface::implicit(|p| p.x * p.x + 1.0);
        assert!(iface.segment_root(m.point(0), m.point(1), 0.1).is_none());
    }

    #[test]
    fn classify_uncut_inside() {
        let m = single_triangle([(0.0, 0.0), (0.2, 0.0), (0.0, 0.2)]);
        let s = InterfaceSampling::new(&m, &origin_circle(0.5)).unwrap();
        assert_eq!(
            classify_triangle(&m, &s, 0).unwrap(),
            TriangleClass::Uncut { side: Side::Plus }
        );
    }

    #[test]
    fn classify_two_crossed_edges() {
        let m = single_triangle([(0.4, 0.0), (0.6, 0.0), (0.4, 0.2)]);
        let s = InterfaceSampling::new(&m, &origin_circle(0.5)).unwrap();
        let crossed: Vec<(usize, usize)> = m
            .edges
            .iter()
            .filter(|e| s.cut_point(e.id).is_some())
            .map(|e| (e.v0, e.v1))
            .collect();
        assert_eq!(crossed, vec![(0, 1), (1, 2)]);
        match classify_triangle(&m, &s, 0).unwrap() {
            TriangleClass::CutTwoEdges { apex, entry, exit, .. } => {
                assert_eq!(apex, 1);
                // apex is outside, so it must lie right of entry -> exit
                assert!((exit.point - entry.point).cross(m.point(1) - entry.point) < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn classify_edge_vertex() {
        // vertex (0.3, 0.4) lies on the circle; the opposite edge crosses it
        let m = single_triangle([(0.3, 0.4), (0.4, 0.2), (0.6, 0.6)]);
        let s = InterfaceSampling::new(&m, &origin_circle(0.5)).unwrap();
        match classify_triangle(&m, &s, 0).unwrap() {
            TriangleClass::CutEdgeVertex { vertex, .. } => assert_eq!(vertex, 0),
            other => panic!("{other:?}"),
        }
    }

    fn unit_triangle_two_cuts() -> (Mesh, InterfaceSampling, TriangleClass) {
        let m = single_triangle([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        // phi < 0 near the origin, zero crossing at x + y = 0.5
        let iface = LevelSetInterface::implicit(|p| p.x + p.y - 0.5);
        let s = InterfaceSampling::new(&m, &iface).unwrap();
        let c = classify_triangle(&m, &s, 0).unwrap();
        (m, s, c)
    }

    #[test]
    fn subtriangles_partition_unit_triangle() {
        let (m, s, c) = unit_triangle_two_cuts();
        let subs = subtriangulate(&m, 0, &c, &s).unwrap();
        assert_eq!(subs.len(), 3);
        let total: f64 = subs.iter().map(|k| k.area()).sum();
        assert!((total - 0.5).abs() < 1e-15);
        let k1 = subs[0];
        assert_eq!(k1.label, Some(SubLabel::K1));
        assert_eq!(k1.side, Side::Plus);
        let mut pts: Vec<(f64, f64)> = k1.points.iter().map(|p| (p.x, p.y)).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.0)]);
        for k in &subs {
            assert!(k.area() > 0.0);
        }
    }

    #[test]
    fn k2_shares_exactly_the_chord_with_k1() {
        let (m, s, c) = unit_triangle_two_cuts();
        let subs = subtriangulate(&m, 0, &c, &s).unwrap();
        let (k1, k2, k3) = (subs[0], subs[1], subs[2]);
        let common = |a: &SubTriangle, b: &SubTriangle| -> Vec<FittedNode> {
            a.nodes.iter().filter(|n| b.nodes.contains(n)).copied().collect()
        };
        let mut shared = common(&k1, &k2);
        shared.sort();
        assert_eq!(shared.len(), 2);
        assert!(shared.iter().all(|n| matches!(n, FittedNode::Cut(_))));
        // K3 meets K1 in at most one node
        assert!(common(&k1, &k3).len() <= 1);
        assert_eq!(k2.side, Side::Minus);
        assert_eq!(k3.side, Side::Minus);
    }

    #[test]
    fn edge_vertex_split_has_no_k3() {
        let m = single_triangle([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        // zero set through (0, 1) and (0.5, 0)
        let iface = LevelSetInterface::implicit(|p| 2.0 * p.x + p.y - 1.0);
        let s = InterfaceSampling::new(&m, &iface).unwrap();
        let c = classify_triangle(&m, &s, 0).unwrap();
        assert!(matches!(c, TriangleClass::CutEdgeVertex { vertex: 2, .. }));
        let subs = subtriangulate(&m, 0, &c, &s).unwrap();
        assert_eq!(subs.len(), 2);
        assert!(subs.iter().all(|k| k.label != Some(SubLabel::K3)));
        let total: f64 = subs.iter().map(|k| k.area()).sum();
        assert!((total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn snapping_near_vertex() {
        let m = single_triangle([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        // crossing at t = 1e-10 on the bottom edge: snapped to vertex 0
        let iface = LevelSetInterface::implicit(|p| p.x - 1e-10);
        let s = InterfaceSampling::new(&m, &iface).unwrap();
        assert_eq!(s.vertex_states[0], VertexState::On);
        assert!(s.crossings.iter().all(|c| *c == EdgeCrossing::None));
        assert!(matches!(
            classify_triangle(&m, &s, 0).unwrap(),
            TriangleClass::EdgeAligned { .. }
        ));
    }

    #[test]
    fn diamond_midpoint_cuts() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(-1.0, 0.0),
            Point::new(0.0, -1.0),
        ];
        let m = Mesh::from_triangles(&pts, &[[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]], 1.0)
            .unwrap();
        let f = FittedMesh::build(&m, &origin_circle(0.5)).unwrap();
        assert_eq!(f.cut_edges.len(), 4);
        assert_eq!(f.band.len(), 4);
        let q = f.quality_report();
        assert!((q.min_intersection_fraction.unwrap() - 0.5).abs() < 1e-15);
        let f = FittedMesh::build(&m, &origin_circle(0.01)).unwrap();
        assert!((f.quality_report().min_intersection_fraction.unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(f.gamma_h.first().unwrap().node, f.gamma_h.last().unwrap().node);
    }

    #[test]
    fn side_of_point_uses_the_chord() {
        let mesh = Mesh::structured(10).unwrap();
        let f = FittedMesh::build(&mesh, &origin_circle(0.5)).unwrap();
        assert_eq!(f.side_of_point(Point::new(0.0, 0.0)), Some(Side::Plus));
        assert_eq!(f.side_of_point(Point::new(0.9, 0.9)), Some(Side::Minus));
        // a point just right of a chord is still inside the circle but belongs to -
        let t = f.band[0];
        let (s, e) = f.classes[t].gamma_segment().unwrap();
        let (a, b) = (f.node_point(s), f.node_point(e));
        let mid = a.midpoint(b);
        let outward = Point::new(-(b - a).y, (b - a).x) * -1.0; // right of a -> b
        let probe = mid + outward * (1e-6 / (b - a).norm());
        assert!(f.interface.phi(probe) < 0.0, "probe lies inside the true circle");
        assert_eq!(f.side_of_point(probe), Some(Side::Minus));
        assert_eq!(f.side_of_point(mid - outward * (1e-6 / (b - a).norm())), Some(Side::Plus));
    }
}
