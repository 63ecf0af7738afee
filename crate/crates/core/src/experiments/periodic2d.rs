//! The doubly periodic `(Z, zeta)` problem with a straight field.

use std::f64::consts::PI;

use serde::Serialize;

use super::{cells, fit_power_law, rms_error, Check, ExperimentConfig, MatrixStats, Output, RunResult, Stopwatch};
use crate::assembly::{assemble_laplacian, assemble_load, assemble_rhs, SourceTerm};
use crate::error::{Error, Result};
use crate::experiments::config::{Periodic2dConfig, SolverConfig};
use crate::field::FieldModel;
use crate::mapping::Mapping;
use crate::par::Exec;
use crate::quadrature::QuadratureGrid;
use crate::solver::{fourier_oracle_2d, sheared_wave_modes, solve_spd, FourierSolution};
use crate::space::{sample_grid, Discretization, FcifemSpace};
use crate::splines::Spline1D;

/// One solve of the periodic problem.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodicPoint {
    pub order: usize,
    pub n_z: usize,
    pub n_zeta: usize,
    pub aligned: bool,
    pub dofs: usize,
    pub rel_l2_error: f64,
    pub rms_error: f64,
    #[serde(skip)]
    pub stats: Option<MatrixStats>,
}

pub(crate) fn oracle(p: &Periodic2dConfig) -> Result<FourierSolution> {
    fourier_oracle_2d(&sheared_wave_modes(p.wave_number))
}

pub(crate) fn check_periods(p: &Periodic2dConfig) -> Result<()> {
    for l in [p.z_period, p.zeta_period] {
        let turns = l / (2.0 * PI);
        if (turns - turns.round()).abs() > 1e-9 || turns.round() < 1.0 {
            return Err(Error::Config(format!(
                "period {l} is not a multiple of 2 pi; the source modes would not be periodic"
            )));
        }
    }
    Ok(())
}

/// The space of the periodic problem; `aligned = false` gives plain tensor
/// splines.
pub(crate) fn space(p: &Periodic2dConfig, order: usize, n_z: usize, n_zeta: usize, aligned: bool) -> Result<FcifemSpace> {
    let mapping = if aligned {
        Mapping::analytic_straight(&FieldModel::straight(p.b_z, p.b_zeta))?
    } else {
        Mapping::Identity
    };
    FcifemSpace::new(
        None,
        Spline1D::periodic(order, p.z_period / n_z as f64, n_z, 0.0)?,
        Spline1D::periodic(order, p.zeta_period / n_zeta as f64, n_zeta, 0.0)?,
        mapping,
    )
}

/// Quadrature points per toroidal cell: as configured, or matching the
/// physical spacing along `Z` when set to zero.
pub(crate) fn zeta_refinement(p: &Periodic2dConfig, n_z: usize, n_zeta: usize) -> usize {
    if p.refinement_zeta > 0 {
        return p.refinement_zeta;
    }
    let hz = p.z_period / n_z as f64 / p.refinement_z as f64;
    let hzeta = p.zeta_period / n_zeta as f64;
    ((hzeta / hz).round() as usize).max(1)
}

/// Sample axes for the error norm: `count` cell centres along each period.
pub(crate) fn sample_axes(p: &Periodic2dConfig, count: usize) -> (Vec<f64>, Vec<f64>) {
    let axis = |l: f64| (0..count).map(|i| (i as f64 + 0.5) * l / count as f64).collect();
    (axis(p.z_period), axis(p.zeta_period))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn solve_point(
    p: &Periodic2dConfig,
    order: usize,
    n_z: usize,
    n_zeta: usize,
    aligned: bool,
    samples: &(Vec<f64>, Vec<f64>),
    solver: &SolverConfig,
    exec: Exec,
) -> Result<PeriodicPoint> {
    let oracle = oracle(p)?;
    let s = space(p, order, n_z, n_zeta, aligned)?;
    let quad = QuadratureGrid::for_space(&s, [1, p.refinement_z, zeta_refinement(p, n_z, n_zeta)]);
    let k = assemble_laplacian(&s, &quad, exec);
    let rho = {
        let o = oracle.clone();
        SourceTerm::analytic(move |x| o.rho(x[1], x[2]))
    };
    let b = assemble_rhs(&s, &quad, &rho, exec)?;
    let w = assemble_load(&s, &quad, &SourceTerm::analytic(|_| 1.0), exec)?;
    let (x, report) = solve_spd(&k, &b, solver.kind, Some(&w), solver.tol, exec)?;
    let (zs, zetas) = samples;
    let v = sample_grid(&s, &x, &[0.0], zs, zetas, exec)?;
    let exact: Vec<f64> = zs
        .iter()
        .flat_map(|&z| zetas.iter().map(move |&t| (z, t)))
        .map(|(z, t)| oracle.phi(z, t))
        .collect();
    let (rel, abs) = rms_error(&v, &exact);
    Ok(PeriodicPoint {
        order,
        n_z,
        n_zeta,
        aligned,
        dofs: s.n_dofs(),
        rel_l2_error: rel,
        rms_error: abs,
        stats: Some(MatrixStats::new(
            &format!("stiffness_o{order}_{n_z}x{n_zeta}{}", if aligned { "" } else { "_cartesian" }),
            &k,
            Some(report),
        )),
    })
}

pub(crate) fn write_points(out: &mut Output, name: &str, points: &[(String, PeriodicPoint)]) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|(label, q)| {
            let mut r = vec![label.clone()];
            r.extend(cells(&[
                q.order as f64,
                q.n_z as f64,
                q.n_zeta as f64,
                q.dofs as f64,
                q.rel_l2_error,
                q.rms_error,
            ]));
            r
        })
        .collect();
    out.table(
        name,
        &["series", "order", "n_z", "n_zeta", "dofs", "rel_l2_error", "rms_error"],
        &rows,
    )
}

pub(crate) fn run(cfg: &ExperimentConfig, out: &mut Output, res: &mut RunResult, clock: &mut Stopwatch) -> Result<()> {
    let p = &cfg.periodic2d;
    check_periods(p)?;
    let max_n = p.series.iter().flat_map(|s| s.n_z.iter()).copied().max().unwrap_or(1);
    let samples = sample_axes(p, p.sample_factor * max_n);
    let mut points = Vec::new();
    for &order in &p.orders {
        for series in &p.series {
            let mut errs = Vec::new();
            for (&nz, &nt) in series.n_z.iter().zip(&series.n_zeta) {
                let q = solve_point(p, order, nz, nt, true, &samples, &cfg.solver, cfg.exec)?;
                clock.lap(format!("o{order} {} {nz}x{nt}", series.label));
                log::info!("order {order} {} N_Z={nz} N_zeta={nt}: rel L2 {:.3e}", series.label, q.rel_l2_error);
                errs.push((nz as f64, q.rel_l2_error));
                res.set(format!("rel_l2_error.o{order}.{}.{nz}", series.label), q.rel_l2_error);
                res.matrices.extend(q.stats.clone());
                points.push((series.label.clone(), q));
            }
            let (n, e): (Vec<f64>, Vec<f64>) = errs.iter().copied().unzip();
            if let Ok(f) = fit_power_law(&n, &e) {
                let expected = if order == 1 { -2.0 } else { -3.0 };
                res.checks.push(Check::band(
                    format!("slope.o{order}.{}", series.label),
                    f.exponent,
                    expected - 0.3,
                    expected + 0.3,
                ));
                res.fits.insert(format!("o{order}.{}", series.label), f);
            }
        }
        alignment_check(p, order, &points, res);
    }
    write_points(out, "errors.csv", &points)?;
    Ok(())
}

/// Node-aligned versus non-aligned series at matched `N_Z`: the first series
/// is fitted and compared with each point of the others.
fn alignment_check(p: &Periodic2dConfig, order: usize, points: &[(String, PeriodicPoint)], res: &mut RunResult) {
    let Some(first) = p.series.first() else {
        return;
    };
    let Some(fit) = res.fits.get(&format!("o{order}.{}", first.label)).copied() else {
        return;
    };
    let mut worst: f64 = 1.0;
    let mut any = false;
    for (label, q) in points.iter().filter(|(l, q)| *l != first.label && q.order == order) {
        let ratio = fit.eval(q.n_z as f64) / q.rel_l2_error;
        let r = ratio.max(1.0 / ratio);
        res.set(format!("alignment_ratio.o{order}.{label}.{}", q.n_z), ratio);
        worst = worst.max(r);
        any = true;
    }
    if any {
        res.checks.push(Check::at_most(format!("alignment_factor.o{order}"), worst, 2.0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_zeta_refinement() {
        let p = Periodic2dConfig::default();
        // 43 cells in Z at 10 points each; a toroidal cell is 43/4 Z cells.
        assert!((107..=108).contains(&zeta_refinement(&p, 43, 4)));
        let q = Periodic2dConfig {
            refinement_zeta: 7,
            ..p
        };
        assert_eq!(zeta_refinement(&q, 43, 4), 7);
    }

    #[test]
    fn periods_must_fit_the_modes() {
        let p = Periodic2dConfig {
            z_period: 5.0,
            ..Default::default()
        };
        assert!(check_periods(&p).is_err());
        assert!(check_periods(&Periodic2dConfig::default()).is_ok());
    }
}
