use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;

use ifem_core::assembly::{self, DofMap, Method};
use ifem_core::{CoefficientField, FittedMesh, LevelSetInterface, Mesh, Point, RadialProblem};

fn radial(n: usize, center: Point) -> (FittedMesh, RadialProblem) {
    let rp = RadialProblem::new(1.0, 10.0).with_center(center);
    (FittedMesh::build(&Mesh::structured(n).unwrap(), &rp.interface()).unwrap(), rp)
}

fn zero(_: Point) -> f64 {
    0.0
}

#[test]
fn standard_dimension_counts_interior_vertices() {
    let mesh = Mesh::structured(10).unwrap();
    let rp = RadialProblem::new(1.0, 10.0);
    let sys = assembly::assemble_standard(&mesh, &rp.coefficient(), &rp.interface(), &zero, &zero).unwrap();
    assert_eq!(sys.dim(), 81);
    assert_eq!(sys.dofs.method, Method::Standard);
}

#[test]
fn enriched_counts_follow_the_cut_edges() {
    let (f, _) = radial(10, Point::new(0.0, 0.0));
    let e = f.cut_edges.len();
    assert_eq!(DofMap::fitted(&f).n_enriched(), e);
    let hybrid = DofMap::hybrid(&f);
    assert_eq!(hybrid.n_enriched(), 2 * e);
    assert_eq!(hybrid.n_multipliers(), e);
    assert_eq!(hybrid.dimension(), 81 + 3 * e);
    for &edge in &f.cut_edges {
        let o = f.orientation[&edge];
        assert!(hybrid.enriched_index(o.from, edge).is_some());
        assert!(hybrid.enriched_index(o.to, edge).is_some());
    }
}

#[test]
fn constants_lie_in_the_kernel_of_the_full_matrices() {
    let (f, rp) = radial(10, Point::new(0.013, 0.007));
    let coeff = rp.coefficient();
    for full in [
        assembly::assemble_fitted_full(&f, &coeff, &zero).unwrap(),
        assembly::assemble_hybrid_full(&f, &coeff, &zero).unwrap(),
    ] {
        let n = full.matrix.rows;
        let nv = full.dofs.n_vertices;
        let ones: Vec<f64> = (0..n).map(|i| if i < nv { 1.0 } else { 0.0 }).collect();
        let r = full.matrix.mul_vec(&ones);
        assert!(r.iter().all(|x| x.abs() < 1e-12), "{:?}", r.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
}

#[test]
fn reduced_matrices_are_symmetric_positive_definite() {
    let (f, rp) = radial(10, Point::new(0.013, 0.007));
    let sys = assembly::assemble_fitted(&f, &rp.coefficient(), &zero, &zero).unwrap();
    let scale = sys.matrix.max_abs();
    assert!(sys.matrix.asymmetry().unwrap() <= 1e-14 * scale);
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..50 {
        let x: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ax = sys.matrix.mul_vec(&x);
        let q: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        assert!(q > 0.0);
    }
    assert!(sys.matrix.to_dense().cholesky().is_some());
}

#[test]
fn diagonal_blocks_are_positive_definite() {
    for center in [Point::new(0.0, 0.0), Point::new(0.013, 0.007)] {
        let (f, rp) = radial(20, center);
        let block = assembly::assemble_hybrid(&f, &rp.coefficient(), &zero, &zero).unwrap();
        assert_eq!(block.d_blocks.len(), f.band.len());
        for db in &block.d_blocks {
            assert!(db.matrix.clone().cholesky().is_some(), "triangle {}", db.triangle);
            assert_eq!(db.matrix, db.matrix.transpose());
        }
        // D is block diagonal: no coupling between triangles
        for i in 0..block.d.rows {
            let ti = block.dofs.enriched[i].triangle;
            for (j, _) in block.d.row(i) {
                assert_eq!(block.dofs.enriched[j].triangle, ti);
            }
        }
    }
}

#[test]
fn constraint_columns_have_opposite_half_lengths() {
    let (f, rp) = radial(20, Point::new(0.013, 0.007));
    let block = assembly::assemble_hybrid(&f, &rp.coefficient(), &zero, &zero).unwrap();
    let bt = block.b.transpose();
    for (m, &e) in block.dofs.multipliers.iter().enumerate() {
        let col: Vec<(usize, f64)> = bt.row(m).collect();
        assert_eq!(col.len(), 2);
        let half = f.base.edge_length(e) / 2.0;
        let o = f.orientation[&e];
        let from = block.dofs.enriched_index(o.from, e).unwrap();
        let to = block.dofs.enriched_index(o.to, e).unwrap();
        assert_eq!(bt.get(m, from), Some(half));
        assert_eq!(bt.get(m, to), Some(-half));
    }
}

#[test]
fn hybrid_with_merged_dofs_is_the_fitted_system() {
    // summing the two copies of each enriched dof turns Y_h into X_h
    let (f, rp) = radial(10, Point::new(0.013, 0.007));
    let coeff = rp.coefficient();
    let g = |p: Point| p.x + 2.0 * p.y;
    let fitted = assembly::assemble_fitted(&f, &coeff, &|_| 1.0, &g).unwrap();
    let block = assembly::assemble_hybrid(&f, &coeff, &|_| 1.0, &g).unwrap();
    let nu = block.a.rows;
    assert_eq!(block.a, fitted.matrix.submatrix(&(0..nu).collect::<Vec<_>>(), &(0..nu).collect::<Vec<_>>()));
    let fd = DofMap::fitted(&f);
    let mut merged = vec![0.0; fd.n_enriched()];
    for (j, dof) in block.dofs.enriched.iter().enumerate() {
        merged[fd.enriched_index(0, dof.edge).unwrap()] += block.rhs_v[j];
    }
    for (k, v) in merged.iter().enumerate() {
        assert!((v - fitted.rhs[nu + k]).abs() < 1e-14);
    }
}

#[test]
fn standard_solution_is_symmetric_under_half_turn() {
    let mesh = Mesh::structured(10).unwrap();
    let rp = RadialProblem::new(1.0, 10.0);
    let tp = rp.problem();
    let sys = assembly::assemble_standard(&mesh, &tp.coefficient, &tp.interface, &*tp.source, &*tp.boundary).unwrap();
    let sol = ifem_core::solver::dense_solve_linear(&sys).unwrap();
    let map = mesh.half_turn_vertex_map().unwrap();
    for (v, &w) in map.iter().enumerate() {
        assert!((sol.vertex_values[v] - sol.vertex_values[w]).abs() < 1e-12);
    }
}

#[test]
fn uniform_coefficient_gives_the_same_matrix_for_every_circle() {
    let mesh = Mesh::structured(8).unwrap();
    let one = CoefficientField::uniform(1.0);
    let a = assembly::assemble_standard(&mesh, &one, &LevelSetInterface::circle(Point::new(0.0, 0.0), 0.5), &zero, &zero)
        .unwrap();
    let b = assembly::assemble_standard(&mesh, &one, &LevelSetInterface::circle(Point::new(0.1, 0.2), 0.3), &zero, &zero)
        .unwrap();
    assert_eq!(a.matrix, b.matrix);
    // five-point stencil on the right-angled grid
    let centre = a.dofs.vertex_index[4 * 9 + 4].unwrap();
    assert!((a.matrix.get(centre, centre).unwrap() - 4.0).abs() < 1e-14);
}
