//! The divertor-field problems on the rectangular `(R, Z)` domain with
//! blended Dirichlet walls.

use std::f64::consts::PI;

use super::{
    cells, fit_power_law, partition_of_unity_deviation, rms_error, Check, ExperimentConfig, GridAxis, MatrixStats, Output, Reference, RunResult,
    Stopwatch,
};
use crate::assembly::{assemble_laplacian, assemble_load, assemble_mass, make_filament_source, SourceTerm};
use crate::blended::BlendedSpace;
use crate::error::{Error, Result};
use crate::experiments::config::{TokamakConfig, WallSplines};
use crate::field::{Rect, Tracer};
use crate::mapping::{ExactMapping, Mapping, MappingKind, NodeGrid, TaylorMapping};
use crate::par::Exec;
use crate::quadrature::QuadratureGrid;
use crate::solver::{solve_spd, SolveReport};
use crate::space::{sample_grid, Discretization, FcifemSpace};
use crate::splines::Spline1D;

/// Cells along `R`, `Z` and planes along `zeta` at scale factor `h`.
pub(crate) fn grid_at(t: &TokamakConfig, h: usize) -> [usize; 3] {
    [t.n_r * h, t.n_z * h, t.n_zeta * h]
}

fn wall_axis(t: &TokamakConfig, lo: f64, hi: f64, cells: usize) -> Result<Spline1D> {
    let h = (hi - lo) / cells as f64;
    match t.walls {
        WallSplines::Clamped => Spline1D::clamped(t.order, h, cells + 1, lo),
        WallSplines::Open => {
            let ghosts = (t.ghost_margin * cells as f64 - 1e-9).ceil().max(0.0) as usize;
            Spline1D::open(t.order, h, cells + 1, ghosts, lo)
        }
    }
}

/// Builds the mapping of kind `kind` for the field-aligned node grid of `r`
/// and `z`.
pub(crate) fn build_mapping(t: &TokamakConfig, kind: MappingKind, r: &Spline1D, z: &Spline1D) -> Result<Mapping> {
    Ok(match kind {
        MappingKind::Identity => Mapping::Identity,
        MappingKind::AnalyticStraight => Mapping::analytic_straight(&t.field)?,
        MappingKind::TaylorSpline => {
            let grid = NodeGrid {
                r0: r.origin(),
                dr: r.spacing(),
                nr: r.n_nodes(),
                z0: z.origin(),
                dz: z.spacing(),
                nz: z.n_nodes(),
            };
            Mapping::Taylor(TaylorMapping::build(&t.field, grid, 2)?)
        }
        MappingKind::ExactOde => {
            let exact = ExactMapping::new(t.field, Some(t.domain()), t.exact_tol)?;
            match t.walls {
                WallSplines::Open => {
                    let (rl, rh) = (r.origin(), r.node(r.n_nodes() as i64 - 1));
                    let (zl, zh) = (z.origin(), z.node(z.n_nodes() as i64 - 1));
                    Mapping::Exact(exact.with_bounding_box(Rect::new((rl, rh), (zl, zh))))
                }
                WallSplines::Clamped => Mapping::Exact(exact),
            }
        }
    })
}

/// The blended space at scale factor `h` with mapping `kind`.
pub(crate) fn build_space(t: &TokamakConfig, h: usize, kind: MappingKind) -> Result<BlendedSpace> {
    let [nr, nz, np] = grid_at(t, h);
    let r = wall_axis(t, t.r_range.0, t.r_range.1, nr)?;
    let z = wall_axis(t, t.z_range.0, t.z_range.1, nz)?;
    let zeta = Spline1D::periodic(t.order, t.zeta_period / np as f64, np, 0.0)?;
    let mapping = build_mapping(t, kind, &r, &z)?;
    BlendedSpace::dirichlet(FcifemSpace::new(Some(r), z, zeta, mapping)?)
}

fn quadrature(t: &TokamakConfig, s: &BlendedSpace) -> QuadratureGrid {
    QuadratureGrid::for_space(s, t.refinement)
}

/// The manufactured problem: `rho = sin(pi R / 2) sin(pi (Z + 1) / 2.5)`
/// written for general bounds, and its exact solution.
fn sine_source(t: &TokamakConfig) -> (impl Fn([f64; 3]) -> f64 + Send + Sync + Clone + 'static, f64) {
    let (r0, r1) = t.r_range;
    let (z0, z1) = t.z_range;
    let (kr, kz) = (PI / (r1 - r0), PI / (z1 - z0));
    let rho = move |x: [f64; 3]| (kr * (x[0] - r0)).sin() * (kz * (x[1] - z0)).sin();
    (rho, kr * kr + kz * kz)
}

fn solve(a: &crate::sparse::CsrMatrix, b: &[f64], cfg: &ExperimentConfig) -> Result<(Vec<f64>, SolveReport)> {
    solve_spd(a, b, cfg.solver.kind, None, cfg.solver.tol, cfg.exec)
}

/// Largest `|phi|` over points on the four walls.
fn boundary_max<S: Discretization>(s: &S, x: &[f64], t: &TokamakConfig, exec: Exec) -> Result<f64> {
    let n = 101;
    let zetas: Vec<f64> = (0..4).map(|k| (k as f64 + 0.3) / 4.0 * t.zeta_period).collect();
    let rs = GridAxis::nodes("R", t.r_range.0, t.r_range.1, n).points();
    let zs = GridAxis::nodes("Z", t.z_range.0, t.z_range.1, n).points();
    let mut worst: f64 = 0.0;
    for v in [
        sample_grid(s, x, &[t.r_range.0, t.r_range.1], &zs, &zetas, exec)?,
        sample_grid(s, x, &rs, &[t.z_range.0, t.z_range.1], &zetas, exec)?,
    ] {
        worst = v.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    Ok(worst)
}

struct Samples {
    r: Vec<f64>,
    z: Vec<f64>,
    zeta: Vec<f64>,
}

impl Samples {
    fn eval<S: Discretization>(&self, s: &S, x: &[f64], exec: Exec) -> Result<Vec<f64>> {
        sample_grid(s, x, &self.r, &self.z, &self.zeta, exec)
    }

    fn exact(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.r.len() * self.z.len() * self.zeta.len());
        for &r in &self.r {
            for &z in &self.z {
                for &t in &self.zeta {
                    v.push(f([r, z, t]));
                }
            }
        }
        v
    }
}

struct ScanPoint {
    scale: usize,
    grid: [usize; 3],
    stats: MatrixStats,
    values: Vec<f64>,
    boundary: f64,
}

fn solve_scale(cfg: &ExperimentConfig, scale: usize, samples: &Samples, clock: &mut Stopwatch) -> Result<ScanPoint> {
    let t = &cfg.tokamak;
    let s = build_space(t, scale, t.mapping)?;
    let quad = quadrature(t, &s);
    let k = assemble_laplacian(&s, &quad, cfg.exec);
    clock.lap(format!("H={scale} stiffness"));
    let (rho, _) = sine_source(t);
    let load = assemble_load(&s, &quad, &SourceTerm::analytic(rho), cfg.exec)?;
    let b: Vec<f64> = load.iter().map(|v| -v).collect();
    clock.lap(format!("H={scale} rhs"));
    let (x, report) = solve(&k, &b, cfg)?;
    clock.lap(format!("H={scale} solve"));
    let values = samples.eval(&s, &x, cfg.exec)?;
    let boundary = boundary_max(&s, &x, t, cfg.exec)?;
    clock.lap(format!("H={scale} sampling"));
    Ok(ScanPoint {
        scale,
        grid: grid_at(t, scale),
        stats: MatrixStats::new(&format!("stiffness_H{scale}"), &k, Some(report)),
        values,
        boundary,
    })
}

pub(crate) fn run_convergence(
    cfg: &ExperimentConfig,
    out: &mut Output,
    res: &mut RunResult,
    clock: &mut Stopwatch,
) -> Result<()> {
    let t = &cfg.tokamak;
    let c = &cfg.convergence;
    let scales = &c.scale_factors;
    let max_scale = scales.iter().copied().max().unwrap_or(1);
    if c.reference == Reference::SelfConverged && c.reference_scale < 2 * max_scale {
        return Err(Error::Config(format!(
            "reference scale {} must be at least twice the largest scanned scale {max_scale}",
            c.reference_scale
        )));
    }
    let samples = Samples {
        r: GridAxis::centred("R", t.r_range.0, t.r_range.1, c.samples_rz * t.n_r).points(),
        z: GridAxis::centred("Z", t.z_range.0, t.z_range.1, c.samples_rz * t.n_z).points(),
        zeta: GridAxis::centred("zeta", 0.0, t.zeta_period, c.samples_zeta * t.n_zeta).points(),
    };
    let (rho, k2) = sine_source(t);
    let analytic = samples.exact(|x| -rho(x) / k2);

    let mut points = Vec::new();
    for &h in scales {
        let p = solve_scale(cfg, h, &samples, clock)?;
        log::info!(
            "H={h}: {} unknowns, {:.1} nnz/row, rel L2 vs analytic {:.3e}",
            p.stats.active_dofs,
            p.stats.mean_row_nnz,
            rms_error(&p.values, &analytic).0
        );
        points.push(p);
    }
    let reference = match c.reference {
        Reference::Analytic => analytic.clone(),
        Reference::SelfConverged => {
            let p = solve_scale(cfg, c.reference_scale, &samples, clock)?;
            let err = rms_error(&p.values, &analytic).0;
            log::info!("reference H={}: rel L2 vs analytic {err:.3e}", c.reference_scale);
            res.set("reference.rel_l2_vs_analytic", err);
            res.set("reference.boundary_max", p.boundary);
            res.matrices.push(p.stats.clone());
            p.values
        }
    };

    let mut rows = Vec::new();
    let (mut hs, mut e_ref, mut e_an) = (Vec::new(), Vec::new(), Vec::new());
    let mut boundary: f64 = 0.0;
    for p in &points {
        let er = rms_error(&p.values, &reference).0;
        let ea = rms_error(&p.values, &analytic).0;
        hs.push(p.scale as f64);
        e_ref.push(er);
        e_an.push(ea);
        boundary = boundary.max(p.boundary);
        res.set(format!("rel_l2_error.H{}", p.scale), er);
        res.set(format!("rel_l2_vs_analytic.H{}", p.scale), ea);
        let mut row = cells(&[p.scale as f64, p.grid[0] as f64, p.grid[1] as f64, p.grid[2] as f64]);
        row.extend(cells(&[
            p.stats.active_dofs as f64,
            p.stats.mean_row_nnz,
            er,
            ea,
            p.boundary,
        ]));
        rows.push(row);
        res.matrices.push(p.stats.clone());
    }
    out.table(
        "convergence.csv",
        &[
            "scale",
            "n_r",
            "n_z",
            "n_zeta",
            "dofs",
            "mean_row_nnz",
            "rel_l2_error",
            "rel_l2_vs_analytic",
            "boundary_max",
        ],
        &rows,
    )?;

    let fit = fit_power_law(&hs, &e_ref)?;
    res.fits.insert("error_vs_scale".into(), fit);
    res.checks.push(Check::band("convergence_exponent", -fit.exponent, 2.8, 3.5));
    if let Ok(fa) = fit_power_law(&hs, &e_an) {
        res.fits.insert("analytic_error_vs_scale".into(), fa);
    }
    if let (Some(i1), Some(i2)) = (scales.iter().position(|&h| h == 1), scales.iter().position(|&h| h == 2)) {
        res.checks.push(Check::at_least("error_ratio_h1_h2", e_ref[i1] / e_ref[i2], 2f64.powf(2.8)));
    }
    // Successive-ratio exponents show whether the fit is dominated by one end.
    for w in 1..hs.len() {
        let p = (e_ref[w - 1] / e_ref[w]).ln() / (hs[w] / hs[w - 1]).ln();
        res.set(format!("local_exponent.H{}_H{}", hs[w - 1], hs[w]), p);
    }
    res.set("boundary_max", boundary);
    res.checks.push(Check::at_most("boundary_max", boundary, 1e-10));
    Ok(())
}

/// RMS `(R, Z)` displacement over one period of the field lines through the
/// physical nodes that stay inside the domain, and the number of such lines.
pub(crate) fn rms_displacement(t: &TokamakConfig, n_r: usize, n_z: usize, exec: Exec) -> Result<(f64, usize)> {
    let tracer = Tracer::new(t.field, Some(t.domain()));
    let rs = GridAxis::nodes("R", t.r_range.0, t.r_range.1, n_r + 1).points();
    let zs = GridAxis::nodes("Z", t.z_range.0, t.z_range.1, n_z + 1).points();
    let d = exec.map(rs.len() * zs.len(), |i| {
        let p = [rs[i / zs.len()], zs[i % zs.len()], 0.0];
        match tracer.trace(p, t.zeta_period, 1e-10) {
            Ok(tr) if !tr.left_domain => Some((tr.end[0] - p[0]).powi(2) + (tr.end[1] - p[1]).powi(2)),
            _ => None,
        }
    });
    let kept: Vec<f64> = d.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::NoSurvivingSeeds);
    }
    Ok(((kept.iter().sum::<f64>() / kept.len() as f64).sqrt(), kept.len()))
}

/// Point of the filament pair nearest to `(r, z)` at toroidal angle `zeta`,
/// as a distance in grid cells. Field lines do not close over one period, so
/// at its seam a filament sits both at its start and at its end.
fn distance_to_filaments(
    t: &TokamakConfig,
    start: [f64; 3],
    zeta: f64,
    at: [f64; 2],
    cell: [f64; 2],
) -> Result<f64> {
    let tracer = Tracer::new(t.field, None);
    let mut best = f64::INFINITY;
    for shift in [0.0, 0.5 * t.zeta_period] {
        let target = (zeta - shift).rem_euclid(t.zeta_period);
        let seam = target.min(t.zeta_period - target) < 1e-9 * t.zeta_period;
        let targets: &[f64] = if seam { &[0.0, t.zeta_period] } else { &[target] };
        for &s in targets {
            let p = tracer.trace(start, start[2] + s, 1e-12)?.end;
            let d = (((p[0] - at[0]) / cell[0]).powi(2) + ((p[1] - at[1]) / cell[1]).powi(2)).sqrt();
            best = best.min(d);
        }
    }
    Ok(best)
}

pub(crate) fn run_filament(
    cfg: &ExperimentConfig,
    out: &mut Output,
    res: &mut RunResult,
    clock: &mut Stopwatch,
) -> Result<()> {
    let t = &cfg.tokamak;
    let f = &cfg.filament;
    let [nr, nz, np] = grid_at(t, 1);
    let intervals = t.refinement[2] * np;
    let source = make_filament_source(&t.field, f.start, t.zeta_period, intervals, t.domain())?;
    res.set("filament.net_charge", source.total_filament_charge().unwrap_or(0.0));
    if let SourceTerm::Filament(curves) = &source {
        let rows: Vec<Vec<String>> = curves
            .iter()
            .flat_map(|c| c.points.iter().map(move |p| cells(&[c.sign, p[2], p[0], p[1]])))
            .collect();
        out.table("filament_curve.csv", &["sign", "zeta", "R", "Z"], &rows)?;
    }

    let s = build_space(t, 1, t.mapping)?;
    let quad = quadrature(t, &s);
    let (pou, covered) = partition_of_unity_deviation(
        s.fcifem(),
        [t.r_range.0, t.z_range.0, 0.0],
        [t.r_range.1, t.z_range.1, t.zeta_period],
        10_000,
        cfg.seed,
    )?;
    res.set("partition_of_unity.max_deviation", pou);
    res.set("partition_of_unity.covered_fraction", covered);
    clock.lap("space");
    let k = assemble_laplacian(&s, &quad, cfg.exec);
    clock.lap("stiffness");
    let m = assemble_mass(&s, &quad, cfg.exec);
    clock.lap("mass");
    let load = assemble_load(&s, &quad, &source, cfg.exec)?;
    res.set("filament.load_sum", load.iter().sum());
    let (rho_bar, m_report) = solve(&m, &load, cfg)?;
    clock.lap("projection solve");
    let b: Vec<f64> = load.iter().map(|v| -v).collect();
    let (phi, k_report) = solve(&k, &b, cfg)?;
    clock.lap("laplacian solve");
    let k_stats = MatrixStats::new("stiffness", &k, Some(k_report));
    res.checks.push(Check::band("sparsity.mean_row_nnz", k_stats.mean_row_nnz, 126.0, 300.0));
    res.matrices.push(k_stats);
    res.matrices.push(MatrixStats::new("mass", &m, Some(m_report)));
    if f.export_matrix {
        if let Some(path) = out.external("stiffness.mtx") {
            k.write_matrix_market(&path)?;
        }
    }

    // Slices at zeta = 0 and voxel arrays.
    let ov = f.oversample.max(1);
    let sr = GridAxis::nodes("R", t.r_range.0, t.r_range.1, ov * nr + 1);
    let sz = GridAxis::nodes("Z", t.z_range.0, t.z_range.1, ov * nz + 1);
    let (rp, zp) = (sr.points(), sz.points());
    let extra = [("zeta", "0".to_string()), ("oversample", ov.to_string())];
    let rho_slice = sample_grid(&s, &rho_bar, &rp, &zp, &[0.0], cfg.exec)?;
    out.grid("rho_bar_slice.csv", "rho_bar", &[sr.clone(), sz.clone()], &extra, &rho_slice)?;
    let phi_slice = sample_grid(&s, &phi, &rp, &zp, &[0.0], cfg.exec)?;
    out.grid("phi_slice.csv", "phi", &[sr.clone(), sz.clone()], &extra, &phi_slice)?;
    let [vr, vz, vt] = f.voxel_shape;
    let vax = [
        GridAxis::centred("R", t.r_range.0, t.r_range.1, vr),
        GridAxis::centred("Z", t.z_range.0, t.z_range.1, vz),
        GridAxis::centred("zeta", 0.0, t.zeta_period, vt),
    ];
    let voxels = Samples {
        r: vax[0].points(),
        z: vax[1].points(),
        zeta: vax[2].points(),
    };
    let rho_vox = voxels.eval(&s, &rho_bar, cfg.exec)?;
    out.grid("rho_bar_voxels.csv", "rho_bar", &vax, &[], &rho_vox)?;
    let phi_vox = voxels.eval(&s, &phi, cfg.exec)?;
    out.grid("phi_voxels.csv", "phi", &vax, &[], &phi_vox)?;
    clock.lap("sampling");

    let (disp, kept) = rms_displacement(t, nr, nz, cfg.exec)?;
    res.set("rms_displacement", disp);
    res.set("rms_displacement_cells", disp / ((t.r_range.1 - t.r_range.0) / nr as f64));
    res.set("rms_displacement_lines", kept as f64);
    res.checks.push(Check::band("rms_displacement", disp, 0.25, 0.35));

    // Peak of |rho_bar| against the filament positions, plane by plane.
    let cell = [
        (t.r_range.1 - t.r_range.0) / nr as f64,
        (t.z_range.1 - t.z_range.0) / nz as f64,
    ];
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..f.alignment_slices {
        let zeta = k as f64 / f.alignment_slices as f64 * t.zeta_period;
        let v = sample_grid(&s, &rho_bar, &rp, &zp, &[zeta], cfg.exec)?;
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, x)| if x.abs() > b.1 { (i, x.abs()) } else { b });
        let at = [rp[imax / zp.len()], zp[imax % zp.len()]];
        let d = distance_to_filaments(t, f.start, zeta, at, cell)?;
        worst = worst.max(d);
        rows.push(cells(&[zeta, at[0], at[1], v[imax], d]));
    }
    out.table("alignment.csv", &["zeta", "peak_R", "peak_Z", "peak_value", "distance_cells"], &rows)?;
    res.set("alignment.max_distance_cells", worst);
    res.checks.push(Check::at_most("alignment.max_distance_cells", worst, 2.0));
    clock.lap("diagnostics");

    if f.identity_sparsity {
        let si = build_space(t, 1, MappingKind::Identity)?;
        let ki = assemble_laplacian(&si, &quadrature(t, &si), cfg.exec);
        let st = MatrixStats::new("stiffness_identity", &ki, None);
        res.checks.push(Check::at_most("sparsity.identity_mean_row_nnz", st.mean_row_nnz, 125.0));
        res.matrices.push(st);
        clock.lap("identity sparsity");
    }

    if f.compare_exact && t.mapping != MappingKind::ExactOde {
        let se = build_space(t, 1, MappingKind::ExactOde)?;
        let qe = quadrature(t, &se);
        let ke = assemble_laplacian(&se, &qe, cfg.exec);
        let le = assemble_load(&se, &qe, &source, cfg.exec)?;
        let be: Vec<f64> = le.iter().map(|v| -v).collect();
        let (phi_e, rep) = solve(&ke, &be, cfg)?;
        res.matrices.push(MatrixStats::new("stiffness_exact", &ke, Some(rep)));
        let phi_e_vox = voxels.eval(&se, &phi_e, cfg.exec)?;
        let (rel, _) = rms_error(&phi_vox, &phi_e_vox);
        res.set("exact_vs_taylor.rel_rms_difference", rel);
        res.checks.push(Check::at_most("exact_vs_taylor.rel_rms_difference", rel, 0.1));
        out.grid("phi_exact_voxels.csv", "phi", &vax, &[], &phi_e_vox)?;
        clock.lap("exact mapping solve");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghost_layers_follow_the_margin() {
        let t = TokamakConfig::default();
        let a = wall_axis(&t, 0.0, 2.0, 20).unwrap();
        assert_eq!(a.ghosts(), 2);
        assert_eq!(a.domain(), (0.0, 2.0));
        let c = TokamakConfig {
            walls: WallSplines::Clamped,
            ..t
        };
        assert_eq!(wall_axis(&c, 0.0, 2.0, 20).unwrap().ghosts(), 0);
    }

    #[test]
    fn manufactured_solution_solves_poisson() {
        let t = TokamakConfig::default();
        let (rho, k2) = sine_source(&t);
        let phi = |x: [f64; 3]| -rho(x) / k2;
        let (e, x) = (1e-4, [0.7, 0.2, 0.0]);
        let mut lap = 0.0;
        for d in 0..2 {
            let (mut p, mut m) = (x, x);
            p[d] += e;
            m[d] -= e;
            lap += (phi(p) - 2.0 * phi(x) + phi(m)) / (e * e);
        }
        assert!((lap - rho(x)).abs() < 1e-6);
        assert!(rho([0.0, 0.3, 0.0]).abs() < 1e-15 && rho([0.5, 1.5, 0.0]).abs() < 1e-15);
    }
}
