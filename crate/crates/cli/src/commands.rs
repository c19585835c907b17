use std::fmt::Write as _;
use std::path::Path;

use ifem_core::assembly::{self, Method};
use ifem_core::benchmark::{self, ConvergenceTable, LinearPatch, CSV_HEADER};
use ifem_core::geometry::TriangleClass;
use ifem_core::solver::{self, DENSE_LIMIT};
use ifem_core::{FittedMesh, LevelSetInterface, Mesh, RadialProblem, SolverConfig};

use crate::config::{OutputFormat, RunConfig, DEFAULT_N_LIST};
use crate::CliError;

/// Coefficients of the linear solution used by patch tests.
const PATCH: [f64; 3] = [0.3, -1.2, 0.7];
const VERIFY_N: [usize; 3] = [4, 10, 20];

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("out: cannot write {}: {e}", path.display())))
}

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let method = cfg.method()?.unwrap_or(Method::Hybrid);
    let n = cfg.n(40)?;
    let solver_cfg = cfg.solver()?;
    if cfg.patch_test.unwrap_or(false) {
        return patch_solve(cfg, method, n, &solver_cfg);
    }
    let rp = cfg.problem(cfg.beta.unwrap_or(10.0))?;
    let run = benchmark::run(&rp.problem(), n, method, &solver_cfg)?;
    let report = benchmark::error_norms(&run, &rp, rp.p(), cfg.norm_variant()?);

    println!("method      {method}");
    println!("N           {n}");
    println!("p           {}", rp.p());
    println!("nodes       {}", report.m);
    println!("dimension   {}", run.dimension);
    println!("e0h         {:.6e}", report.e0h);
    println!("e0inf       {:.6e}", report.e0inf);
    println!("e1h         {:.6e}  ({} norm)", report.e1h, cfg.norm_variant()?);
    if let Some(cg) = &run.cg {
        println!("cg          {} iterations, relative residual {:.3e}", cg.iterations, cg.residual);
    }
    if let Some(h) = run.hybrid_report() {
        println!(
            "multiplier  {} outer / {} inner iterations, relative residual {:.3e}",
            h.outer_iterations, h.inner_iterations, h.outer_residual
        );
        println!("constraint  {:.3e}", h.constraint_residual);
        println!("condensed   {} nonzeros", h.condensed_nnz);
    }
    println!("elapsed     {:.3} s", run.elapsed.as_secs_f64());

    if let Some(path) = &cfg.out {
        let mut s = String::from("# x y u_h\n");
        for v in &run.mesh.vertices {
            writeln!(s, "{:?} {:?} {:?}", v.x, v.y, run.solution.vertex_values[v.id]).unwrap();
        }
        write_file(path, &s)?;
    }
    Ok(())
}

fn circle(cfg: &RunConfig) -> Result<LevelSetInterface, CliError> {
    // validates the circle through the benchmark's checks
    Ok(cfg.problem(cfg.beta.unwrap_or(10.0))?.interface())
}

fn patch_error(iface: LevelSetInterface, n: usize, method: Method, cfg: &SolverConfig) -> Result<f64, CliError> {
    let patch = LinearPatch { c: PATCH };
    let run = benchmark::run(&patch.problem(iface), n, method, cfg)?;
    Ok(run
        .mesh
        .vertices
        .iter()
        .map(|v| (run.solution.vertex_values[v.id] - (PATCH[0] + PATCH[1] * v.x + PATCH[2] * v.y)).abs())
        .fold(0.0, f64::max))
}

fn patch_solve(cfg: &RunConfig, method: Method, n: usize, solver_cfg: &SolverConfig) -> Result<(), CliError> {
    let err = patch_error(circle(cfg)?, n, method, solver_cfg)?;
    println!("patch test: method {method}, N {n}, u = {} + {} x + {} y", PATCH[0], PATCH[1], PATCH[2]);
    println!("max nodal error {err:.3e}");
    if err > 1e-9 {
        return Err(CliError::Verify(1));
    }
    Ok(())
}

pub fn convergence(cfg: &RunConfig) -> Result<(), CliError> {
    let methods = cfg.method()?.map_or_else(|| Method::ALL.to_vec(), |m| vec![m]);
    let ns = cfg.n_list(&DEFAULT_N_LIST)?;
    let variant = cfg.norm_variant()?;
    let solver_cfg = cfg.solver()?;
    let problems: Vec<RadialProblem> = cfg.betas().into_iter().map(|b| cfg.problem(b)).collect::<Result<_, _>>()?;

    let mut tables: Vec<ConvergenceTable> = Vec::new();
    for &method in &methods {
        for rp in &problems {
            tables.push(benchmark::convergence_study(rp, method, &ns, &solver_cfg, variant)?);
        }
    }
    let csv = std::iter::once(format!("{CSV_HEADER}\n"))
        .chain(tables.iter().map(ConvergenceTable::csv_rows))
        .collect::<String>();
    let markdown = tables.iter().map(ConvergenceTable::to_markdown).collect::<Vec<_>>().join("\n");
    match cfg.format.unwrap_or(OutputFormat::Md) {
        OutputFormat::Csv => print!("{csv}"),
        OutputFormat::Md => print!("{markdown}"),
    }
    if let Some(path) = &cfg.out {
        write_file(path, &csv)?;
        write_file(&path.with_extension("md"), &markdown)?;
    }
    let failed: usize = tables.iter().map(ConvergenceTable::failures).sum();
    if failed > 0 {
        return Err(CliError::RowsFailed(failed));
    }
    Ok(())
}

struct Check {
    name: String,
    ok: bool,
    detail: String,
}

fn check(checks: &mut Vec<Check>, name: String, ok: bool, detail: String) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    checks.push(Check { name, ok, detail });
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let solver_cfg = cfg.solver()?;
    let ns: Vec<usize> = cfg.n.map_or_else(|| VERIFY_N.to_vec(), |n| vec![n]);
    let rp = cfg.problem(cfg.beta.unwrap_or(10.0))?;
    let tp = rp.problem();
    let mut checks = Vec::new();
    for &n in &ns {
        let mesh = Mesh::structured(n)?;
        let fitted = FittedMesh::build(&mesh, &tp.interface)?;

        let partition = (0..mesh.triangles.len())
            .map(|t| {
                let whole = mesh.triangle_area(t);
                let parts: f64 = fitted.triangle_elements(t).iter().map(|s| s.area()).sum();
                ((parts - whole) / whole).abs()
            })
            .fold(0.0, f64::max);
        check(&mut checks, format!("N={n} area partition"), partition <= 1e-12, format!("max relative defect {partition:.2e}"));

        let residual = fitted
            .cut_edges
            .iter()
            .map(|&e| tp.interface.phi(fitted.sampling.cut_point(e).unwrap().point).abs())
            .fold(0.0, f64::max);
        check(&mut checks, format!("N={n} cut-point residual"), residual <= 1e-12, format!("max |phi| {residual:.2e}"));

        let g = &fitted.gamma_h;
        let closed = g.len() > 3 && g.first() == g.last();
        check(&mut checks, format!("N={n} polyline closure"), closed, format!("{} vertices", g.len().saturating_sub(1)));

        let (e, t, snapped) = (fitted.cut_edges.len(), fitted.band.len(), fitted.snapped_vertices.len());
        check(
            &mut checks,
            format!("N={n} cut edges vs band"),
            snapped > 0 || e == t,
            if snapped > 0 {
                format!("|E|={e}, |T|={t}; {snapped} snapped vertices, count not required to match")
            } else {
                format!("|E|={e}, |T|={t}")
            },
        );

        let block = assembly::assemble_hybrid(&fitted, &tp.coefficient, &*tp.source, &*tp.boundary)?;
        let asym = block.saddle_matrix().asymmetry().unwrap_or(f64::INFINITY);
        check(&mut checks, format!("N={n} saddle symmetry"), asym <= 1e-12, format!("max |m_ij - m_ji| {asym:.2e}"));
        let spd = block.d_blocks.iter().all(|b| b.matrix.clone().cholesky().is_some());
        check(&mut checks, format!("N={n} enrichment blocks SPD"), spd, format!("{} blocks", block.d_blocks.len()));
        let bt = block.b.transpose();
        let columns_ok = (0..bt.rows).all(|m| {
            let col: Vec<f64> = bt.row(m).map(|(_, v)| v).collect();
            col.len() == 2 && (col[0] + col[1]).abs() <= 1e-15
        });
        check(&mut checks, format!("N={n} constraint columns"), columns_ok, format!("{} multipliers", bt.rows));
        let op = solver::condense(&block)?;
        let standard = assembly::assemble_standard(&mesh, &tp.coefficient, &tp.interface, &*tp.source, &*tp.boundary)?;
        check(
            &mut checks,
            format!("N={n} condensed pattern"),
            op.s_u.pattern_subset_of(&standard.matrix),
            format!("nnz {} vs standard {}", op.s_u.nnz(), standard.matrix.nnz()),
        );

        let hybrid = solver::solve_hybrid(&block, &solver_cfg)?;
        let fitted_sys = assembly::assemble_fitted(&fitted, &tp.coefficient, &*tp.source, &*tp.boundary)?;
        let (fitted_sol, _) = solver::solve_fitted(&fitted_sys, &solver_cfg)?;
        let d = max_diff(&hybrid.solution.vertex_values, &fitted_sol.vertex_values);
        check(&mut checks, format!("N={n} hybrid = fitted"), d <= 1e-8, format!("max |u_H - u_F| {d:.2e} at p={}", rp.p()));

        if n > 20 || block.dim() > DENSE_LIMIT {
            println!("SKIP N={n} dense oracle: only run for N <= 20");
        } else {
            let dense = solver::dense_direct_solve(&block)?;
            let d = max_diff(&hybrid.u, &dense.u).max(max_diff(&hybrid.v, &dense.v));
            check(&mut checks, format!("N={n} dense oracle"), d <= 1e-8, format!("max difference {d:.2e}"));
        }

        for method in Method::ALL {
            let err = patch_error(tp.interface.clone(), n, method, &solver_cfg)?;
            check(&mut checks, format!("N={n} patch test {method}"), err <= 1e-9, format!("max nodal error {err:.2e}"));
        }
    }
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.ok).collect();
    println!("{} checks, {} failed", checks.len(), failed.len());
    for c in &failed {
        eprintln!("failed: {} ({})", c.name, c.detail);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.len()))
    }
}

pub fn mesh_info(cfg: &RunConfig) -> Result<(), CliError> {
    let n = cfg.n(10)?;
    let rp = cfg.problem(cfg.beta.unwrap_or(10.0))?;
    let iface = rp.interface();
    let mesh = Mesh::structured(n)?;
    let fitted = FittedMesh::build(&mesh, &iface)?;
    let count = |f: fn(&TriangleClass) -> bool| fitted.count_case(f);
    let q = fitted.quality_report();
    println!("mesh                N={n}, {} vertices, {} triangles, {} edges, h={}", mesh.vertices.len(), mesh.triangles.len(), mesh.edges.len(), mesh.h);
    println!("interface           circle, center ({}, {}), radius {}", rp.center.x, rp.center.y, rp.r1);
    println!("uncut               {}", count(|c| matches!(c, TriangleClass::Uncut { .. })));
    println!("edge-aligned        {}", count(|c| matches!(c, TriangleClass::EdgeAligned { .. })));
    println!("cut two edges       {}", count(|c| matches!(c, TriangleClass::CutTwoEdges { .. })));
    println!("cut edge + vertex   {}", count(|c| matches!(c, TriangleClass::CutEdgeVertex { .. })));
    println!("cut edges |E|       {}", fitted.cut_edges.len());
    println!("band |T|            {}", fitted.band.len());
    println!("snapped vertices    {}", fitted.snapped_vertices.len());
    for &v in &fitted.snapped_vertices {
        let p = mesh.point(v);
        println!("  vertex {v} at ({:.6}, {:.6})", p.x, p.y);
    }
    println!("polyline length     {:.12}", fitted.gamma_length());
    println!("min inradius        {:.6e}", q.min_inradius);
    println!("h / rho             {:.6e}", q.h_over_rho);
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
    println!("min cut fraction    {}", opt(q.min_intersection_fraction));
    println!("min cut edge / h    {}", opt(q.min_cut_edge_ratio));
    Ok(())
}
