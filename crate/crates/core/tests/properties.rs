use proptest::prelude::*;

use ifem_core::assembly::{self, local_stiffness, Method};
use ifem_core::benchmark::{self, LinearPatch};
use ifem_core::sparse::TripletMatrix;
use ifem_core::{FittedMesh, LevelSetInterface, Mesh, Point, SolverConfig};

fn circle() -> impl Strategy<Value = (usize, Point, f64)> {
    (4usize..32, -0.2f64..0.2, -0.2f64..0.2, 0.15f64..0.6)
        .prop_map(|(n, cx, cy, r)| (n, Point::new(cx, cy), r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fitted_mesh_invariants((n, center, r) in circle()) {
        let mesh = Mesh::structured(n).unwrap();
        let iface = LevelSetInterface::circle(center, r);
        let f = FittedMesh::build(&mesh, &iface).unwrap();
        for t in 0..mesh.triangles.len() {
            let whole = mesh.triangle_area(t);
            let parts: f64 = f.triangle_elements(t).iter().map(|s| s.area()).sum();
            prop_assert!(((parts - whole) / whole).abs() <= 1e-12);
            for s in f.triangle_elements(t) {
                prop_assert!(s.area() > 0.0);
            }
        }
        for &e in &f.cut_edges {
            let c = f.sampling.cut_point(e).unwrap();
            prop_assert!(iface.phi(c.point).abs() <= 1e-12);
            prop_assert!(c.t > 0.0 && c.t < 1.0);
        }
        if !f.cut_edges.is_empty() {
            prop_assert_eq!(f.gamma_h.first(), f.gamma_h.last());
            prop_assert_eq!(f.gamma_h.len() - 1, f.cut_edges.len() + f.snapped_vertices.len());
        }
        if f.snapped_vertices.is_empty() {
            prop_assert_eq!(f.cut_edges.len(), f.band.len());
        }
    }

    #[test]
    fn local_stiffness_is_symmetric_with_zero_row_sums(
        pts in prop::array::uniform3((-1.0f64..1.0, -1.0f64..1.0)),
        a in prop::array::uniform3(0.1f64..10.0),
    ) {
        let mut p = pts.map(|(x, y)| Point::new(x, y));
        let area = ifem_core::point::triangle_area(&p);
        prop_assume!(area.abs() > 1e-3);
        if area < 0.0 {
            p.swap(1, 2);
        }
        let k = local_stiffness(&p, a).unwrap();
        for i in 0..3 {
            prop_assert!(k[i].iter().sum::<f64>().abs() <= 1e-10 * k[i][i].abs().max(1.0));
            prop_assert!(k[i][i] >= 0.0);
            for j in 0..3 {
                prop_assert!((k[i][j] - k[j][i]).abs() <= 1e-12 * k[i][i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn csr_products_match_dense(
        entries in prop::collection::vec((0usize..7, 0usize..5, -10.0f64..10.0), 0..40),
        x in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let mut t = TripletMatrix::new(7, 5);
        for &(i, j, v) in &entries {
            t.push(i, j, v);
        }
        let m = t.finalize();
        let dense = m.to_dense();
        let y = m.mul_vec(&x);
        let expected = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..7 {
            prop_assert!((y[i] - expected[i]).abs() <= 1e-12);
        }
        prop_assert_eq!(m.transpose().transpose(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn every_method_passes_the_patch_test(
        (n, center, r) in circle(),
        c in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let patch = LinearPatch { c };
        let tp = patch.problem(LevelSetInterface::circle(center, r));
        let cfg = SolverConfig::default();
        for method in Method::ALL {
            let run = benchmark::run(&tp, n, method, &cfg).unwrap();
            for v in &run.mesh.vertices {
                let p = v.point();
                let exact = c[0] + c[1] * p.x + c[2] * p.y;
                prop_assert!((run.solution.vertex_values[v.id] - exact).abs() <= 1e-9, "{:?} N={}", method, n);
            }
        }
    }

    #[test]
    fn hybrid_and_fitted_agree(
        (n, center, r) in circle(),
        beta in 1.0f64..100.0,
    ) {
        let coeff = ifem_core::CoefficientField::piecewise_constant(1.0, beta);
        let mesh = Mesh::structured(n).unwrap();
        let f = FittedMesh::build(&mesh, &LevelSetInterface::circle(center, r)).unwrap();
        let one = |_: Point| 1.0;
        let g = |p: Point| p.x * p.y;
        let cfg = SolverConfig::default();
        let fitted = assembly::assemble_fitted(&f, &coeff, &one, &g).unwrap();
        let (uf, _) = ifem_core::solver::solve_fitted(&fitted, &cfg).unwrap();
        let block = assembly::assemble_hybrid(&f, &coeff, &one, &g).unwrap();
        let uh = ifem_core::solver::solve_hybrid(&block, &cfg).unwrap();
        for (a, b) in uf.vertex_values.iter().zip(&uh.solution.vertex_values) {
            prop_assert!((a - b).abs() <= 1e-7);
        }
    }
}
