//! Plain tensor splines (identity mapping) against the field-aligned runs.

use super::periodic2d::{check_periods, sample_axes, solve_point, write_points};
use super::tokamak::{build_space, grid_at};
use super::{cells, fit_power_law, CartesianCase, Check, ExperimentConfig, GridAxis, MatrixStats, Output, RunResult, Stopwatch};
use crate::assembly::{assemble_laplacian, assemble_load, make_filament_source};
use crate::error::{Error, Result};
use crate::mapping::MappingKind;
use crate::quadrature::QuadratureGrid;
use crate::solver::solve_spd;
use crate::space::sample_grid;

pub(crate) fn run(cfg: &ExperimentConfig, out: &mut Output, res: &mut RunResult, clock: &mut Stopwatch) -> Result<()> {
    match cfg.cartesian.case {
        CartesianCase::Periodic2d => periodic(cfg, out, res, clock),
        CartesianCase::TokamakFilament => tokamak(cfg, out, res, clock),
    }
}

/// Tensor-spline scan with `N_zeta = N_Z`; for each field-aligned run, the
/// Cartesian resolution reaching the same error is read off the fitted power
/// law and converted to a ratio of unknowns.
fn periodic(cfg: &ExperimentConfig, out: &mut Output, res: &mut RunResult, clock: &mut Stopwatch) -> Result<()> {
    let p = &cfg.periodic2d;
    let c = &cfg.cartesian;
    check_periods(p)?;
    let max_n = c.n.iter().chain(c.fcifem.iter().map(|f| &f.0)).copied().max().unwrap_or(1);
    let samples = sample_axes(p, p.sample_factor * max_n);
    let mut points = Vec::new();
    let (mut ns, mut es) = (Vec::new(), Vec::new());
    for &n in &c.n {
        let q = solve_point(p, c.order, n, n, false, &samples, &cfg.solver, cfg.exec)?;
        clock.lap(format!("cartesian {n}x{n}"));
        log::info!("cartesian N={n}: rel L2 {:.3e}", q.rel_l2_error);
        ns.push(n as f64);
        es.push(q.rel_l2_error);
        res.set(format!("cartesian.rel_l2_error.{n}"), q.rel_l2_error);
        res.matrices.extend(q.stats.clone());
        points.push(("cartesian".to_string(), q));
    }
    let fit = fit_power_law(&ns, &es)?;
    res.fits.insert("cartesian".into(), fit);
    let mut worst = f64::INFINITY;
    let mut rows = Vec::new();
    for &(nz, nt) in &c.fcifem {
        let q = solve_point(p, c.order, nz, nt, true, &samples, &cfg.solver, cfg.exec)?;
        clock.lap(format!("fcifem {nz}x{nt}"));
        let n_match = fit.solve(q.rel_l2_error);
        let ratio = n_match * n_match / q.dofs as f64;
        let lo = ns.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ns.iter().copied().fold(0.0, f64::max);
        let interpolated = n_match >= lo && n_match <= hi;
        log::info!(
            "fcifem {nz}x{nt}: rel L2 {:.3e}, matching Cartesian N {n_match:.1}, dof ratio {ratio:.2}",
            q.rel_l2_error
        );
        res.set(format!("dof_ratio.{nz}x{nt}"), ratio);
        res.set(format!("matching_n.{nz}x{nt}"), n_match);
        rows.push(cells(&[
            nz as f64,
            nt as f64,
            q.dofs as f64,
            q.rel_l2_error,
            n_match,
            ratio,
            if interpolated { 1.0 } else { 0.0 },
        ]));
        worst = worst.min(ratio);
        res.matrices.extend(q.stats.clone());
        points.push(("fcifem".to_string(), q));
    }
    if worst.is_finite() {
        res.checks.push(Check::at_least("cartesian.min_dof_ratio", worst, 5.0));
    }
    write_points(out, "errors.csv", &points)?;
    out.table(
        "dof_ratio.csv",
        &["n_z", "n_zeta", "dofs", "rel_l2_error", "matching_cartesian_n", "dof_ratio", "within_scan"],
        &rows,
    )?;
    Ok(())
}

/// The filament problem on a tensor grid with `zeta_factor` times the planes.
fn tokamak(cfg: &ExperimentConfig, out: &mut Output, res: &mut RunResult, clock: &mut Stopwatch) -> Result<()> {
    let c = &cfg.cartesian;
    if c.zeta_factor == 0 {
        return Err(Error::Config("zeta_factor must be positive".into()));
    }
    let t = &cfg.tokamak;
    let fci = build_space(t, 1, t.mapping)?;
    let mut tc = t.clone();
    tc.n_zeta *= c.zeta_factor;
    tc.order = c.order;
    let cart = build_space(&tc, 1, MappingKind::Identity)?;
    let (qa, qb) = (
        QuadratureGrid::for_space(&fci, t.refinement),
        QuadratureGrid::for_space(&cart, tc.refinement),
    );
    let ka = assemble_laplacian(&fci, &qa, cfg.exec);
    let kb = assemble_laplacian(&cart, &qb, cfg.exec);
    clock.lap("assembly");
    let (sa, sb) = (MatrixStats::new("fcifem", &ka, None), MatrixStats::new("cartesian", &kb, None));
    res.set("fcifem.dofs", sa.active_dofs as f64);
    res.set("cartesian.dofs", sb.active_dofs as f64);
    res.set("dof_ratio", sb.active_dofs as f64 / sa.active_dofs as f64);
    res.matrices.push(sa);
    if c.solve {
        let [nr, nz, np] = grid_at(&tc, 1);
        let src = make_filament_source(&t.field, cfg.filament.start, t.zeta_period, tc.refinement[2] * np, t.domain())?;
        let b: Vec<f64> = assemble_load(&cart, &qb, &src, cfg.exec)?.iter().map(|v| -v).collect();
        let (phi, rep) = solve_spd(&kb, &b, cfg.solver.kind, None, cfg.solver.tol, cfg.exec)?;
        clock.lap("solve");
        let [vr, vz, vt] = cfg.filament.voxel_shape;
        let vax = [
            GridAxis::centred("R", t.r_range.0, t.r_range.1, vr),
            GridAxis::centred("Z", t.z_range.0, t.z_range.1, vz),
            GridAxis::centred("zeta", 0.0, t.zeta_period, vt),
        ];
        let v = sample_grid(&cart, &phi, &vax[0].points(), &vax[1].points(), &vax[2].points(), cfg.exec)?;
        out.grid("phi_voxels.csv", "phi", &vax, &[("grid", format!("{nr}x{nz}x{np}"))], &v)?;
        res.matrices.push(MatrixStats::new("cartesian", &kb, Some(rep)));
    } else {
        res.matrices.push(sb);
    }
    Ok(())
}
