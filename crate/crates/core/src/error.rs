use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("subdivision count N must be at least 1")]
    ZeroSubdivisions,
    #[error("triangle {0} has non-positive signed area")]
    NonPositiveArea(usize),
    #[error("triangle {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("triangle {triangle} references unknown vertex {vertex}")]
    UnknownVertex { triangle: usize, vertex: usize },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("dump parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("no sign change of the level set along edge {edge}")]
    NoBracket { edge: usize },
    #[error("triangle {triangle} is crossed on all three edges; the mesh is too coarse for the interface")]
    TooManyCrossings { triangle: usize },
    #[error("triangle {triangle} has all vertices on the interface")]
    AllVerticesOnInterface { triangle: usize },
    #[error("triangle {triangle} has inconsistent crossing data ({crossed} crossed edges)")]
    InconsistentCrossings { triangle: usize, crossed: usize },
    #[error("degenerate subtriangle in triangle {triangle} (area {area:e})")]
    DegenerateSubtriangle { triangle: usize, area: f64 },
    #[error("interface touches the domain boundary at vertex {vertex}")]
    TouchesBoundary { vertex: usize },
    #[error("interface polyline is not closed: {0}")]
    OpenPolyline(String),
    #[error("interface polyline has {components} components; exactly one closed curve is supported")]
    MultipleComponents { components: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("multiplier iteration did not converge in {iterations} iterations (relative residual {residual:e})")]
    OuterNotConverged { iterations: usize, residual: f64 },
    #[error("singular enrichment block on cut triangle {triangle}")]
    SingularBlock { triangle: usize },
    #[error("dense solve refused: dimension {dim} exceeds the limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },
    #[error("dense saddle-point matrix is singular")]
    SingularMatrix,
    #[error("operator breakdown: non-positive curvature {0:e}")]
    Breakdown(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
