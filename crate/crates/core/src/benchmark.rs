//! Radial benchmark with a known solution, discrete error norms and
//! convergence studies.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::assembly::{self, CoefficientField, DiscreteSolution, Method};
use crate::error::{Error, Result};
use crate::geometry::{FittedMesh, LevelSetInterface, ScalarFn, Side, SubTriangle};
use crate::mesh::Mesh;
use crate::point::{self, Point};
use crate::solver::{self, CgReport, HybridReport, HybridSolution, SolverConfig};

/// A solution known in closed form.
pub trait ExactSolution: Send + Sync {
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> Point;
    /// Gradient of the smooth extension of the solution on `side`.
    fn side_gradient(&self, _side: Side, p: Point) -> Point {
        self.gradient(p)
    }
    /// Conormal flux `a ∇u`.
    fn flux(&self, p: Point) -> Point;
}

/// Piecewise quadratic radial solution with a coefficient jump on the circle
/// `|x - c| = r1` and `u = 0` on `|x - c|² = r2_sq`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialProblem {
    pub alpha: f64,
    pub beta: f64,
    pub r1: f64,
    pub r2_sq: f64,
    pub center: Point,
}

impl RadialProblem {
    pub fn new(alpha: f64, beta: f64) -> Self {
        RadialProblem {
            alpha,
            beta,
            r1: 0.5,
            r2_sq: 2.0,
            center: Point::new(0.0, 0.0),
        }
    }

    pub fn with_radius(mut self, r1: f64) -> Self {
        self.r1 = r1;
        self
    }

    pub fn with_center(mut self, center: Point) -> Self {
        self.center = center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Invalid(format!("alpha: must be positive, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Invalid(format!("beta: must be positive, got {}", self.beta)));
        }
        if !(self.r1 > 0.0 && self.r1 < 1.0) {
            return Err(Error::Invalid(format!("r1: must lie in (0, 1), got {}", self.r1)));
        }
        let reach = self.center.x.abs().max(self.center.y.abs()) + self.r1;
        if !self.center.x.is_finite() || !self.center.y.is_finite() || reach >= 1.0 {
            return Err(Error::Invalid(format!(
                "cx/cy: the circle of radius {} around ({}, {}) must lie inside the square",
                self.r1, self.center.x, self.center.y
            )));
        }
        Ok(())
    }

    /// The coefficient ratio `alpha / beta`.
    pub fn p(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn interface(&self) -> LevelSetInterface {
        LevelSetInterface::circle(self.center, self.r1)
    }

    pub fn coefficient(&self) -> CoefficientField {
        CoefficientField::piecewise_constant(self.alpha, self.beta)
    }

    fn inside(&self, p: Point) -> bool {
        (p - self.center).norm() < self.r1
    }

    pub fn problem(&self) -> TransmissionProblem {
        let exact = *self;
        TransmissionProblem {
            interface: self.interface(),
            coefficient: self.coefficient(),
            source: Arc::new(|_| 1.0),
            boundary: Arc::new(move |p| exact.value(p)),
            exact: Some(Arc::new(*self)),
        }
    }
}

impl ExactSolution for RadialProblem {
    fn value(&self, p: Point) -> f64 {
        let r2 = (p - self.center).norm_squared();
        let r1_sq = self.r1 * self.r1;
        if self.inside(p) {
            (r1_sq - r2) / (4.0 * self.alpha) + (self.r2_sq - r1_sq) / (4.0 * self.beta)
        } else {
            (self.r2_sq - r2) / (4.0 * self.beta)
        }
    }

    fn gradient(&self, p: Point) -> Point {
        let side = if self.inside(p) { Side::Plus } else { Side::Minus };
        self.side_gradient(side, p)
    }

    fn side_gradient(&self, side: Side, p: Point) -> Point {
        let a = match side {
            Side::Plus => self.alpha,
            Side::Minus => self.beta,
        };
        (p - self.center) * (-0.5 / a)
    }

    fn flux(&self, p: Point) -> Point {
        (p - self.center) * -0.5
    }
}

/// `u = c0 + c1 x + c2 y` with unit coefficient and no source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearPatch {
    pub c: [f64; 3],
}

impl LinearPatch {
    /// Keeps the circle of the radial problem so that enrichment is active.
    pub fn problem(&self, interface: LevelSetInterface) -> TransmissionProblem {
        let this = *self;
        TransmissionProblem {
            interface,
            coefficient: CoefficientField::uniform(1.0),
            source: Arc::new(|_| 0.0),
            boundary: Arc::new(move |p| this.value(p)),
            exact: Some(Arc::new(*self)),
        }
    }
}

impl ExactSolution for LinearPatch {
    fn value(&self, p: Point) -> f64 {
        self.c[0] + self.c[1] * p.x + self.c[2] * p.y
    }

    fn gradient(&self, _p: Point) -> Point {
        Point::new(self.c[1], self.c[2])
    }

    fn flux(&self, p: Point) -> Point {
        self.gradient(p)
    }
}

/// Data of an interface problem on the square.
#[derive(Clone)]
pub struct TransmissionProblem {
    pub interface: LevelSetInterface,
    pub coefficient: CoefficientField,
    pub source: ScalarFn,
    pub boundary: ScalarFn,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

impl fmt::Debug for TransmissionProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransmissionProblem")
            .field("interface", &self.interface)
            .finish_non_exhaustive()
    }
}

/// Everything produced by one mesh-assemble-solve pipeline.
#[derive(Clone, Debug)]
pub struct Run {
    pub method: Method,
    pub n: usize,
    pub mesh: Mesh,
    /// Absent for the standard method.
    pub fitted: Option<FittedMesh>,
    pub solution: DiscreteSolution,
    pub dimension: usize,
    pub cg: Option<CgReport>,
    pub hybrid: Option<HybridSolution>,
    pub elapsed: Duration,
}

impl Run {
    pub fn hybrid_report(&self) -> Option<&HybridReport> {
        self.hybrid.as_ref().map(|h| &h.report)
    }
}

/// Builds the mesh, assembles and solves with the chosen method.
pub fn run(problem: &TransmissionProblem, n: usize, method: Method, config: &SolverConfig) -> Result<Run> {
    let start = Instant::now();
    let mesh = Mesh::structured(n)?;
    let f = &*problem.source;
    let g = &*problem.boundary;
    let (fitted, solution, dimension, cg, hybrid) = match method {
        Method::Standard => {
            let sys = assembly::assemble_standard(&mesh, &problem.coefficient, &problem.interface, f, g)?;
            let (sol, report) = solver::solve_standard(&sys, config)?;
            (None, sol, sys.dim(), Some(report), None)
        }
        Method::Fitted => {
            let fitted = FittedMesh::build(&mesh, &problem.interface)?;
            let sys = assembly::assemble_fitted(&fitted, &problem.coefficient, f, g)?;
            let (sol, report) = solver::solve_fitted(&sys, config)?;
            (Some(fitted), sol, sys.dim(), Some(report), None)
        }
        Method::Hybrid => {
            let fitted = FittedMesh::build(&mesh, &problem.interface)?;
            let block = assembly::assemble_hybrid(&fitted, &problem.coefficient, f, g)?;
            let hs = solver::solve_hybrid(&block, config)?;
            (Some(fitted), hs.solution.clone(), block.dim(), None, Some(hs))
        }
    };
    Ok(Run {
        method,
        n,
        mesh,
        fitted,
        solution,
        dimension,
        cg,
        hybrid,
        elapsed: start.elapsed(),
    })
}

/// How the gradient error compares the discrete gradient on each element.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum NormVariant {
    /// Linear interpolant of the exact gradient from the vertices of the
    /// original triangle, integrated over every element of that triangle.
    Parent,
    /// Linear interpolant, on each element, of the gradient extension
    /// belonging to the element's side.
    Sub,
    /// Gradient of the nodal interpolant of the exact solution on each element.
    #[default]
    Interpolant,
}

impl NormVariant {
    pub fn name(self) -> &'static str {
        match self {
            NormVariant::Parent => "parent",
            NormVariant::Sub => "sub",
            NormVariant::Interpolant => "interp",
        }
    }
}

impl fmt::Display for NormVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<NormVariant> {
        match s {
            "parent" => Ok(NormVariant::Parent),
            "sub" => Ok(NormVariant::Sub),
            "interp" => Ok(NormVariant::Interpolant),
            other => Err(Error::Invalid(format!(
                "norm-variant: unknown variant `{other}` (expected parent, sub or interp)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub method: Method,
    pub n: usize,
    pub p: f64,
    /// Number of mesh nodes.
    pub m: usize,
    pub e0h: f64,
    pub e0inf: f64,
    pub e1h: f64,
}

/// `∫_K |l - c|²` for `l` linear with the given vertex values and constant `c`,
/// by the edge-midpoint rule (exact for quadratics).
fn integrate_sq_diff(points: &[Point; 3], vertex_values: [Point; 3], c: Point) -> f64 {
    let area = point::triangle_area(points).abs();
    (0..3)
        .map(|k| {
            let mid = (vertex_values[k] + vertex_values[(k + 1) % 3]) * 0.5;
            (mid - c).norm_squared()
        })
        .sum::<f64>()
        * area
        / 3.0
}

fn gradient_of(points: &[Point; 3], values: [f64; 3]) -> Point {
    let g = assembly::shape_gradients(points);
    g[0] * values[0] + g[1] * values[1] + g[2] * values[2]
}

fn element_error(
    exact: &dyn ExactSolution,
    parent: &[Point; 3],
    element: &SubTriangle,
    grad_h: Point,
    variant: NormVariant,
) -> f64 {
    match variant {
        NormVariant::Parent => {
            let nodal = parent.map(|p| exact.gradient(p));
            let area_k = point::triangle_area(&element.points);
            // evaluate the parent interpolant at the element's edge midpoints
            (0..3)
                .map(|k| {
                    let m = element.points[k].midpoint(element.points[(k + 1) % 3]);
                    let l = point::barycentric(parent, m);
                    let gi = nodal[0] * l[0] + nodal[1] * l[1] + nodal[2] * l[2];
                    (gi - grad_h).norm_squared()
                })
                .sum::<f64>()
                * area_k
                / 3.0
        }
        NormVariant::Sub => {
            let nodal = element.points.map(|p| exact.side_gradient(element.side, p));
            integrate_sq_diff(&element.points, nodal, grad_h)
        }
        NormVariant::Interpolant => {
            let values = element.points.map(|p| exact.value(p));
            let gi = gradient_of(&element.points, values);
            (gi - grad_h).norm_squared() * point::triangle_area(&element.points)
        }
    }
}

/// Discrete nodal L2 and max errors over all mesh nodes and the element-wise
/// gradient error.
pub fn error_norms(run: &Run, exact: &dyn ExactSolution, p: f64, variant: NormVariant) -> ErrorReport {
    let mesh = &run.mesh;
    let m = mesh.vertices.len();
    let mut sum_sq = 0.0;
    let mut max_err: f64 = 0.0;
    for v in &mesh.vertices {
        let e = (exact.value(v.point()) - run.solution.vertex_values[v.id]).abs();
        sum_sq += e * e;
        max_err = max_err.max(e);
    }
    // the side extension is only meaningful on fitted elements
    let variant = match (&run.fitted, variant) {
        (None, NormVariant::Sub) => NormVariant::Parent,
        _ => variant,
    };
    let mut h1_sq = 0.0;
    for t in 0..mesh.triangles.len() {
        let parent = mesh.triangle_points(t);
        let elements = match &run.fitted {
            Some(f) => f.triangle_elements(t),
            None => vec![SubTriangle {
                parent: t,
                label: None,
                nodes: mesh.triangles[t].v.map(crate::geometry::FittedNode::Vertex),
                points: parent,
                side: Side::Minus,
            }],
        };
        for element in &elements {
            let grad_h = match &run.fitted {
                Some(f) => run.solution.element_gradient(f, element),
                None => gradient_of(&parent, mesh.triangles[t].v.map(|v| run.solution.vertex_values[v])),
            };
            h1_sq += element_error(exact, &parent, element, grad_h, variant);
        }
    }
    ErrorReport {
        method: run.method,
        n: run.n,
        p,
        m,
        e0h: (sum_sq / m as f64).sqrt(),
        e0inf: max_err,
        e1h: h1_sq.sqrt(),
    }
}

/// `log2(coarse / fine)`
pub fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub n: usize,
    pub result: std::result::Result<ErrorReport, String>,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub method: Method,
    pub p: f64,
    pub rows: Vec<ConvergenceRow>,
}

pub const CSV_HEADER: &str = "method,p,N,e0h,rate0h,e0inf,rateinf,e1h,rate1h";

impl ConvergenceTable {
    pub fn report(&self, i: usize) -> Option<&ErrorReport> {
        self.rows.get(i).and_then(|r| r.result.as_ref().ok())
    }

    /// Rates of row `i` against row `i - 1` for (e0h, e0inf, e1h).
    pub fn rates(&self, i: usize) -> Option<[f64; 3]> {
        if i == 0 {
            return None;
        }
        let (a, b) = (self.report(i - 1)?, self.report(i)?);
        Some([rate(a.e0h, b.e0h), rate(a.e0inf, b.e0inf), rate(a.e1h, b.e1h)])
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }

    /// CSV rows without the header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            match &row.result {
                Ok(e) => {
                    let r = self.rates(i).map(|r| r.map(|x| format!("{x}")));
                    let cell = |k: usize| r.as_ref().map_or(String::new(), |r| r[k].clone());
                    writeln!(
                        s,
                        "{},{},{},{:e},{},{:e},{},{:e},{}",
                        self.method,
                        self.p,
                        row.n,
                        e.e0h,
                        cell(0),
                        e.e0inf,
                        cell(1),
                        e.e1h,
                        cell(2)
                    )
                    .unwrap();
                }
                Err(msg) => {
                    writeln!(s, "{},{},{},,,,,,  # failed: {}", self.method, self.p, row.n, msg.replace(',', ";")).unwrap();
                }
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows())
    }

    /// Table with one row per refinement, errors to three digits and rates to one decimal.
    pub fn to_markdown(&self) -> String {
        let mut s = format!("### {} method, p = {}\n\n", self.method, self.p);
        s.push_str("| 1/h | e_0,h | rate | e_0,inf | rate | e_1,h | rate |\n");
        s.push_str("|---:|---:|---:|---:|---:|---:|---:|\n");
        for (i, row) in self.rows.iter().enumerate() {
            match &row.result {
                Ok(e) => {
                    let r = self.rates(i);
                    let cell = |k: usize| r.map_or(String::new(), |r| format!("{:.1}", r[k]));
                    writeln!(
                        s,
                        "| {} | {:.2e} | {} | {:.2e} | {} | {:.2e} | {} |",
                        row.n,
                        e.e0h,
                        cell(0),
                        e.e0inf,
                        cell(1),
                        e.e1h,
                        cell(2)
                    )
                    .unwrap();
                }
                Err(msg) => writeln!(s, "| {} | failed: {} | | | | | |", row.n, msg).unwrap(),
            }
        }
        s
    }
}

/// Checks that every entry doubles the previous one.
pub fn validate_refinements(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::Invalid("n-list: must not be empty".into()));
    }
    if ns.contains(&0) {
        return Err(Error::Invalid("n-list: subdivision counts must be at least 1".into()));
    }
    if let Some(w) = ns.windows(2).find(|w| w[1] != 2 * w[0]) {
        return Err(Error::Invalid(format!(
            "n-list: each N must double the previous one ({} -> {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Runs the pipeline for every N (in parallel) and collects the error table.
/// A failing row is recorded and the others still run.
pub fn convergence_study(
    problem: &RadialProblem,
    method: Method,
    ns: &[usize],
    config: &SolverConfig,
    variant: NormVariant,
) -> Result<ConvergenceTable> {
    problem.validate()?;
    validate_refinements(ns)?;
    let tp = problem.problem();
    let rows: Vec<ConvergenceRow> = ns
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let result = run(&tp, n, method, config)
                .map(|r| error_norms(&r, problem, problem.p(), variant))
                .map_err(|e| e.to_string());
            ConvergenceRow {
                n,
                result,
                elapsed: start.elapsed(),
            }
        })
        .collect();
    Ok(ConvergenceTable {
        method,
        p: problem.p(),
        rows,
    })
}

/// Multiplier against the exact conormal flux averaged over one cut edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeFlux {
    pub edge: usize,
    pub lambda: f64,
    /// Edge average of `-a ∂u/∂n` with `n` pointing into the triangle the
    /// oriented interface enters through the edge.
    pub exact: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluxReport {
    pub edges: Vec<EdgeFlux>,
    pub max_abs: f64,
    pub mean_abs: f64,
}

/// Compares each multiplier with the exact flux through its edge.
pub fn flux_diagnostic(fitted: &FittedMesh, hybrid: &HybridSolution, exact: &dyn ExactSolution) -> FluxReport {
    // three-point Gauss rule on [0, 1]
    const NODES: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
    const WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let mesh = &fitted.base;
    let edges: Vec<EdgeFlux> = hybrid
        .solution
        .dofs
        .multipliers
        .iter()
        .zip(&hybrid.lambda)
        .map(|(&e, &lambda)| {
            let (a, b) = mesh.edge_points(e);
            let tangent = (b - a) * (1.0 / (b - a).norm());
            let mut normal = Point::new(tangent.y, -tangent.x);
            let to = fitted.orientation[&e].to;
            if normal.dot(point::centroid(&mesh.triangle_points(to)) - a) < 0.0 {
                normal = -normal;
            }
            let avg: f64 = NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(&s, w)| w * exact.flux(a.lerp(b, s)).dot(normal))
                .sum();
            EdgeFlux {
                edge: e,
                lambda,
                exact: -avg,
            }
        })
        .collect();
    let diffs: Vec<f64> = edges.iter().map(|f| (f.lambda - f.exact).abs()).collect();
    let max_abs = diffs.iter().copied().fold(0.0, f64::max);
    let mean_abs = if diffs.is_empty() {
        0.0
    } else {
        diffs.iter().sum::<f64>() / diffs.len() as f64
    };
    FluxReport {
        edges,
        max_abs,
        mean_abs,
    }
}
