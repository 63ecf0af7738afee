//! Approximate versus traced field-line images over one toroidal period.

use super::tokamak::{build_mapping, build_space, grid_at};
use super::{cells, Check, ExperimentConfig, GridAxis, Output, RunResult, Stopwatch};
use crate::error::Result;
use crate::mapping::{mapping_error_report, ExactMapping, Mapping, MappingKind, NodeGrid, TaylorMapping};
use crate::space::Discretization;

pub(crate) fn run(cfg: &ExperimentConfig, out: &mut Output, res: &mut RunResult, clock: &mut Stopwatch) -> Result<()> {
    let t = &cfg.tokamak;
    let m = &cfg.mapping_error;
    let space = build_space(t, 1, MappingKind::Identity)?;
    let (r, z) = (space.r_axis().expect("tokamak space has an R axis"), space.z_axis());
    let approx = match m.mapping {
        MappingKind::TaylorSpline => {
            let grid = NodeGrid {
                r0: r.origin(),
                dr: r.spacing(),
                nr: r.n_nodes(),
                z0: z.origin(),
                dz: z.spacing(),
                nz: z.n_nodes(),
            };
            Mapping::Taylor(TaylorMapping::build(&t.field, grid, m.taylor_order)?)
        }
        kind => build_mapping(t, kind, r, z)?,
    };
    let exact = ExactMapping::new(t.field, Some(t.domain()), t.exact_tol)?;
    clock.lap("mappings");
    let [nr, nz, _] = grid_at(t, 1);
    let rs = GridAxis::nodes("R", t.r_range.0, t.r_range.1, nr + 1).points();
    let zs = GridAxis::nodes("Z", t.z_range.0, t.z_range.1, nz + 1).points();
    let seeds: Vec<[f64; 3]> = rs.iter().flat_map(|&r| zs.iter().map(move |&z| [r, z, 0.0])).collect();
    let report = mapping_error_report(&approx, &exact, &seeds, t.zeta_period, 1e-12)?;
    clock.lap("traces");

    let rows: Vec<Vec<String>> = report
        .per_seed
        .iter()
        .map(|s| {
            cells(&[
                s.seed[0],
                s.seed[1],
                s.exact_end[0],
                s.exact_end[1],
                s.approx_end[0],
                s.approx_end[1],
                s.error,
                if s.survived { 1.0 } else { 0.0 },
            ])
        })
        .collect();
    out.table(
        "mapping_error.csv",
        &["R0", "Z0", "R_exact", "Z_exact", "R_approx", "Z_approx", "error", "survived"],
        &rows,
    )?;

    res.set("rms", report.rms);
    res.set("max", report.max);
    res.set("surviving_seeds", report.surviving as f64);
    res.set("seeds", seeds.len() as f64);
    // Where the worst tenth of the errors sit: share in the outer fifth of Z.
    let mut kept: Vec<_> = report.per_seed.iter().filter(|s| s.survived).collect();
    kept.sort_by(|a, b| b.error.total_cmp(&a.error));
    let top = &kept[..(kept.len() / 10).max(1).min(kept.len())];
    let band = 0.2 * (t.z_range.1 - t.z_range.0);
    let near = top
        .iter()
        .filter(|s| s.seed[1] < t.z_range.0 + band || s.seed[1] > t.z_range.1 - band)
        .count();
    res.set("top_decile_share_near_z_walls", near as f64 / top.len().max(1) as f64);
    if m.mapping == MappingKind::TaylorSpline {
        res.checks.push(Check::band("mapping_error.rms", report.rms, 0.008, 0.032));
        res.checks.push(Check::band("mapping_error.max", report.max, 0.03, 0.12));
    }
    Ok(())
}
