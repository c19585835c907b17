//! Conjugate gradients, element-level condensation of the enriched unknowns,
//! an outer conjugate-gradient iteration on the multipliers, and a dense
//! direct solve used as an oracle.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{BlockSystem, DiscreteSolution, LinearSystem};
use crate::error::SolverError;
use crate::sparse::{CsrMatrix, TripletMatrix};

/// Largest system the dense oracle accepts.
pub const DENSE_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relative residual target for primal solves.
    pub cg_tolerance: f64,
    pub cg_max_iter: usize,
    /// Relative residual target for the multiplier iteration.
    pub outer_tolerance: f64,
    pub outer_max_iter: usize,
    /// Diagonal preconditioning for primal solves.
    pub jacobi: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cg_tolerance: 1e-10,
            cg_max_iter: 50_000,
            outer_tolerance: 1e-10,
            outer_max_iter: 5_000,
            jacobi: false,
        }
    }
}

/// Symmetric positive definite operator.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<(), SolverError>;
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<(), SolverError> {
        self.mul_vec_into(x, y);
        Ok(())
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(CsrMatrix::diagonal(self))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final relative residual `‖b - Ax‖ / ‖b‖`.
    pub residual: f64,
    /// Relative (preconditioned-free) residual after every iteration.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradients from a zero initial guess.
pub fn cg_solve(
    op: &dyn LinearOperator,
    rhs: &[f64],
    tolerance: f64,
    max_iter: usize,
    jacobi: bool,
) -> Result<(Vec<f64>, CgReport), SolverError> {
    let n = op.dim();
    assert_eq!(rhs.len(), n);
    let mut x = vec![0.0; n];
    let b_norm = norm(rhs);
    let mut report = CgReport::default();
    if b_norm == 0.0 {
        return Ok((x, report));
    }
    let inv_diag: Option<Vec<f64>> = if jacobi {
        op.diagonal()
            .map(|d| d.into_iter().map(|v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect())
    } else {
        None
    };
    let precondition = |r: &[f64]| -> Vec<f64> {
        match &inv_diag {
            Some(m) => r.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => r.to_vec(),
        }
    };
    let mut r = rhs.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        op.apply(&p, &mut ap)?;
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(SolverError::Breakdown(curvature));
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / b_norm;
        report.history.push(rel);
        report.iterations = it;
        report.residual = rel;
        if rel <= tolerance {
            return Ok((x, report));
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NotConverged {
        iterations: max_iter,
        residual: rel,
    })
}

/// Solves a standard or fitted system.
pub fn solve_linear(
    system: &LinearSystem,
    config: &SolverConfig,
) -> Result<(DiscreteSolution, CgReport), SolverError> {
    let (x, report) = cg_solve(
        &system.matrix,
        &system.rhs,
        config.cg_tolerance,
        config.cg_max_iter,
        config.jacobi,
    )?;
    Ok((system.solution(&x), report))
}

pub fn solve_standard(
    system: &LinearSystem,
    config: &SolverConfig,
) -> Result<(DiscreteSolution, CgReport), SolverError> {
    solve_linear(system, config)
}

pub fn solve_fitted(
    system: &LinearSystem,
    config: &SolverConfig,
) -> Result<(DiscreteSolution, CgReport), SolverError> {
    solve_linear(system, config)
}

/// Inverse of a small SPD block, refused when the determinant is tiny
/// relative to the entries.
fn invert_block(m: &DMatrix<f64>, triangle: usize) -> Result<DMatrix<f64>, SolverError> {
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let singular = SolverError::SingularBlock { triangle };
    match m.nrows() {
        1 => {
            if m[(0, 0)] <= 1e-14 * scale.max(f64::MIN_POSITIVE) || m[(0, 0)] <= 0.0 {
                return Err(singular);
            }
            Ok(DMatrix::from_element(1, 1, 1.0 / m[(0, 0)]))
        }
        2 => {
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            if det <= 1e-14 * scale * scale || m[(0, 0)] <= 0.0 {
                return Err(singular);
            }
            Ok(DMatrix::from_row_slice(
                2,
                2,
                &[m[(1, 1)] / det, -m[(0, 1)] / det, -m[(1, 0)] / det, m[(0, 0)] / det],
            ))
        }
        _ => m.clone().try_inverse().ok_or(singular),
    }
}

/// Hybrid system with the enriched unknowns eliminated triangle by triangle.
#[derive(Clone, Debug)]
pub struct CondensedOperator {
    /// `A - C D⁻¹ Cᵀ`
    pub s_u: CsrMatrix,
    /// `b - C D⁻¹ c`
    pub rhs: Vec<f64>,
    /// Inverted diagonal blocks with their enriched dof indices.
    pub d_inv: Vec<(Vec<usize>, DMatrix<f64>)>,
    c: CsrMatrix,
    b: CsrMatrix,
    rhs_v: Vec<f64>,
    n_enriched: usize,
}

/// Folds `-C_T D_T⁻¹ C_Tᵀ` of every cut triangle into `A`.
pub fn condense(block: &BlockSystem) -> Result<CondensedOperator, SolverError> {
    let ct = block.c.transpose();
    let mut t = block.a.to_triplets();
    let mut d_inv = Vec::with_capacity(block.d_blocks.len());
    for db in &block.d_blocks {
        let inv = invert_block(&db.matrix, db.triangle)?;
        let cols: Vec<Vec<(usize, f64)>> = db.dofs.iter().map(|&j| ct.row(j).collect()).collect();
        for (a, ca) in cols.iter().enumerate() {
            for (b, cb) in cols.iter().enumerate() {
                let w = inv[(a, b)];
                for &(i1, v1) in ca {
                    for &(i2, v2) in cb {
                        t.push(i1, i2, -v1 * w * v2);
                    }
                }
            }
        }
        d_inv.push((db.dofs.clone(), inv));
    }
    let mut op = CondensedOperator {
        s_u: t.finalize(),
        rhs: Vec::new(),
        d_inv,
        c: block.c.clone(),
        b: block.b.clone(),
        rhs_v: block.rhs_v.clone(),
        n_enriched: block.d.rows,
    };
    let dc = op.apply_d_inv(&block.rhs_v);
    let cdc = op.c.mul_vec(&dc);
    op.rhs = block.rhs_u.iter().zip(&cdc).map(|(b, x)| b - x).collect();
    Ok(op)
}

impl CondensedOperator {
    pub fn apply_d_inv(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_enriched];
        for (dofs, inv) in &self.d_inv {
            for (a, &ja) in dofs.iter().enumerate() {
                y[ja] = dofs.iter().enumerate().map(|(b, &jb)| inv[(a, b)] * x[jb]).sum();
            }
        }
        y
    }

    pub fn n_multipliers(&self) -> usize {
        self.b.cols
    }

    /// Primal unknowns for a given multiplier vector.
    pub fn recover(
        &self,
        lambda: &[f64],
        config: &SolverConfig,
    ) -> Result<(Vec<f64>, Vec<f64>, CgReport), SolverError> {
        let g = self.apply_d_inv(&self.b.mul_vec(lambda));
        let cg = self.c.mul_vec(&g);
        let rhs: Vec<f64> = self.rhs.iter().zip(&cg).map(|(a, b)| a + b).collect();
        let (u, report) = cg_solve(&self.s_u, &rhs, config.cg_tolerance, config.cg_max_iter, config.jacobi)?;
        let ctu = self.c.transpose_mul_vec(&u);
        let bl = self.b.mul_vec(lambda);
        let r: Vec<f64> = (0..self.n_enriched)
            .map(|j| self.rhs_v[j] - ctu[j] - bl[j])
            .collect();
        let v = self.apply_d_inv(&r);
        Ok((u, v, report))
    }

    /// Multiplier Schur complement `Bᵀ D⁻¹ B + Gᵀ Cᵀ S_u⁻¹ C G` with `G = D⁻¹ B`,
    /// applied with an inner conjugate-gradient solve.
    pub fn schur(&self, config: SolverConfig) -> MultiplierSchur<'_> {
        MultiplierSchur {
            op: self,
            config,
            inner_iterations: std::cell::Cell::new(0),
        }
    }

    /// Right-hand side `Bᵀ D⁻¹ c - Gᵀ Cᵀ S_u⁻¹ b̂` of the multiplier equation.
    pub fn schur_rhs(&self, config: &SolverConfig) -> Result<(Vec<f64>, usize), SolverError> {
        let (y, report) = cg_solve(&self.s_u, &self.rhs, config.cg_tolerance, config.cg_max_iter, config.jacobi)?;
        let cy = self.c.transpose_mul_vec(&y);
        let r: Vec<f64> = self.rhs_v.iter().zip(&cy).map(|(c, x)| c - x).collect();
        Ok((self.b.transpose_mul_vec(&self.apply_d_inv(&r)), report.iterations))
    }
}

pub struct MultiplierSchur<'a> {
    op: &'a CondensedOperator,
    config: SolverConfig,
    inner_iterations: std::cell::Cell<usize>,
}

impl MultiplierSchur<'_> {
    pub fn inner_iterations(&self) -> usize {
        self.inner_iterations.get()
    }
}

impl LinearOperator for MultiplierSchur<'_> {
    fn dim(&self) -> usize {
        self.op.n_multipliers()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<(), SolverError> {
        let op = self.op;
        let g = op.apply_d_inv(&op.b.mul_vec(x));
        let btg = op.b.transpose_mul_vec(&g);
        let cg = op.c.mul_vec(&g);
        let (z, report) = cg_solve(&op.s_u, &cg, self.config.cg_tolerance, self.config.cg_max_iter, self.config.jacobi)?;
        self.inner_iterations.set(self.inner_iterations.get() + report.iterations);
        let ctz = op.c.transpose_mul_vec(&z);
        let gtctz = op.b.transpose_mul_vec(&op.apply_d_inv(&ctz));
        for i in 0..y.len() {
            y[i] = btg[i] + gtctz[i];
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HybridReport {
    pub outer_iterations: usize,
    pub outer_residual: f64,
    pub inner_iterations: usize,
    /// `‖Bᵀ v‖∞` of the recovered solution.
    pub constraint_residual: f64,
    pub condensed_nnz: usize,
}

#[derive(Clone, Debug)]
pub struct HybridSolution {
    pub solution: DiscreteSolution,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// One value per cut edge, in [`crate::assembly::DofMap::multipliers`] order.
    pub lambda: Vec<f64>,
    pub report: HybridReport,
}

/// Condensation followed by conjugate gradients on the multipliers. Inner
/// solves run at a hundredth of the outer tolerance.
pub fn solve_hybrid(block: &BlockSystem, config: &SolverConfig) -> Result<HybridSolution, SolverError> {
    let op = condense(block)?;
    let inner = SolverConfig {
        cg_tolerance: config.cg_tolerance.min(0.01 * config.outer_tolerance),
        ..*config
    };
    let (rhs, rhs_iters) = op.schur_rhs(&inner)?;
    let schur = op.schur(inner);
    let (lambda, outer) = match cg_solve(&schur, &rhs, config.outer_tolerance, config.outer_max_iter, false) {
        Ok(r) => r,
        Err(SolverError::NotConverged { iterations, residual }) => {
            return Err(SolverError::OuterNotConverged { iterations, residual })
        }
        Err(e) => return Err(e),
    };
    let (u, v, rec) = op.recover(&lambda, &inner)?;
    let constraint_residual = block
        .b
        .transpose_mul_vec(&v)
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(HybridSolution {
        solution: block.solution(&u, &v),
        report: HybridReport {
            outer_iterations: outer.iterations,
            outer_residual: outer.residual,
            inner_iterations: rhs_iters + schur.inner_iterations() + rec.iterations,
            constraint_residual,
            condensed_nnz: op.s_u.nnz(),
        },
        u,
        v,
        lambda,
    })
}

fn dense_lu_solve(m: DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
    let lu = m.lu();
    let x = lu
        .solve(&DVector::from_column_slice(rhs))
        .ok_or(SolverError::SingularMatrix)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::SingularMatrix);
    }
    Ok(x.as_slice().to_vec())
}

/// Monolithic dense solve of the saddle-point system by LU with partial pivoting.
pub fn dense_direct_solve(block: &BlockSystem) -> Result<HybridSolution, SolverError> {
    let n = block.dim();
    if n > DENSE_LIMIT {
        return Err(SolverError::DimensionTooLarge { dim: n, limit: DENSE_LIMIT });
    }
    let x = dense_lu_solve(block.saddle_matrix().to_dense(), &block.saddle_rhs())?;
    let (nu, nv) = (block.a.rows, block.d.rows);
    let (u, v, lambda) = (x[..nu].to_vec(), x[nu..nu + nv].to_vec(), x[nu + nv..].to_vec());
    let constraint_residual = block
        .b
        .transpose_mul_vec(&v)
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(HybridSolution {
        solution: block.solution(&u, &v),
        report: HybridReport {
            constraint_residual,
            ..HybridReport::default()
        },
        u,
        v,
        lambda,
    })
}

/// Dense solve of a standard or fitted system.
pub fn dense_solve_linear(system: &LinearSystem) -> Result<DiscreteSolution, SolverError> {
    let n = system.dim();
    if n > DENSE_LIMIT {
        return Err(SolverError::DimensionTooLarge { dim: n, limit: DENSE_LIMIT });
    }
    let x = dense_lu_solve(system.matrix.to_dense(), &system.rhs)?;
    Ok(system.solution(&x))
}

/// Explicit Schur complement `A - C D⁻¹ Cᵀ` from dense blocks.
pub fn dense_schur(a: &CsrMatrix, c: &CsrMatrix, d: &CsrMatrix) -> Option<DMatrix<f64>> {
    let d_inv = d.to_dense().try_inverse()?;
    let c = c.to_dense();
    Some(a.to_dense() - &c * d_inv * c.transpose())
}

/// Builds a CSR matrix from a dense one, dropping exact zeros.
pub fn csr_from_dense(m: &DMatrix<f64>) -> CsrMatrix {
    let mut t = TripletMatrix::new(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                t.push(i, j, m[(i, j)]);
            }
        }
    }
    t.finalize()
}
