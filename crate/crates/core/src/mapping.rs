//! The field-line mapping: projection of a point along (approximate) field
//! lines onto another toroidal plane.
//!
//! Because every [`FieldModel`] is toroidally symmetric, the image of
//! `x = (R, Z, zeta)` on the plane `s` depends only on `(R, Z)` and the
//! toroidal offset `delta = s - zeta`. All variants therefore take the pair
//! `(rz, delta)` and return the image with its derivatives:
//!
//! * `jac[i][j] = d pos_i / d rz_j` at fixed `delta`,
//! * `d_delta = d pos / d delta`; with respect to the point's own `zeta` this
//!   derivative changes sign.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{dist, rk4_step_tangent, FieldModel, Rect, Tracer};
use crate::splines::uniform_active;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MappedPoint {
    pub pos: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub d_delta: [f64; 2],
    /// False when the image could not be computed (the traced line left the
    /// bounding box, or the point is outside the coefficient grid).
    pub valid: bool,
}

impl MappedPoint {
    fn identity(rz: [f64; 2], d_delta: [f64; 2]) -> Self {
        Self {
            pos: rz,
            jac: [[1.0, 0.0], [0.0, 1.0]],
            d_delta,
            valid: true,
        }
    }

    fn invalid(pos: [f64; 2]) -> Self {
        Self {
            pos,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingKind {
    Identity,
    AnalyticStraight,
    TaylorSpline,
    ExactOde,
}

#[derive(Debug, Clone)]
pub enum Mapping {
    /// Planes are not connected: every point maps onto itself.
    Identity,
    /// Straight field lines with constant slope `d(R, Z)/d zeta`.
    Straight { slope: [f64; 2] },
    Taylor(TaylorMapping),
    Exact(ExactMapping),
}

impl Mapping {
    /// Closed-form mapping of a straight field.
    pub fn analytic_straight(field: &FieldModel) -> Result<Self> {
        field.validate()?;
        match field {
            FieldModel::Straight { .. } => Ok(Mapping::Straight {
                slope: field.velocity([0.0, 0.0]).0,
            }),
            _ => Err(Error::Config("analytic mapping needs a straight field".into())),
        }
    }

    pub fn kind(&self) -> MappingKind {
        match self {
            Mapping::Identity => MappingKind::Identity,
            Mapping::Straight { .. } => MappingKind::AnalyticStraight,
            Mapping::Taylor(_) => MappingKind::TaylorSpline,
            Mapping::Exact(_) => MappingKind::ExactOde,
        }
    }

    pub fn map(&self, rz: [f64; 2], delta: f64) -> MappedPoint {
        let mut out = [MappedPoint::default()];
        self.map_many(rz, &[delta], &mut out);
        out[0]
    }

    /// `Q(x, s)` restricted to `(R, Z)`, for a point `x = (R, Z, zeta)`.
    pub fn map_point(&self, x: [f64; 3], s: f64) -> MappedPoint {
        self.map([x[0], x[1]], s - x[2])
    }

    /// Images of one `(R, Z)` point for several offsets at once. The exact
    /// mapping integrates each direction in a single sweep.
    pub fn map_many(&self, rz: [f64; 2], deltas: &[f64], out: &mut [MappedPoint]) {
        assert_eq!(deltas.len(), out.len());
        match self {
            Mapping::Identity => {
                for o in out.iter_mut() {
                    *o = MappedPoint::identity(rz, [0.0; 2]);
                }
            }
            Mapping::Straight { slope } => {
                for (o, &d) in out.iter_mut().zip(deltas) {
                    *o = MappedPoint::identity([rz[0] + slope[0] * d, rz[1] + slope[1] * d], *slope);
                }
            }
            Mapping::Taylor(t) => t.map_many(rz, deltas, out),
            Mapping::Exact(e) => e.map_many(rz, deltas, out),
        }
    }
}

/// Mapping obtained by integrating the field-line equation with a fixed-step
/// fourth-order Runge-Kutta scheme, carrying the tangent map along so the
/// Jacobian is available without differencing.
#[derive(Debug, Clone)]
pub struct ExactMapping {
    tracer: Tracer,
    step: f64,
}

impl ExactMapping {
    /// Picks the largest step (halving from 0.02) for which step halving
    /// changes sample lines by less than `tol` per unit toroidal distance.
    pub fn new(field: FieldModel, domain: Option<Rect>, tol: f64) -> Result<Self> {
        field.validate()?;
        let tracer = Tracer::new(field, domain);
        let samples: Vec<[f64; 2]> = match domain {
            Some(d) => {
                let mut v = Vec::new();
                for i in 0..5 {
                    for j in 0..5 {
                        v.push([
                            d.r.0 + (i as f64 + 0.5) / 5.0 * (d.r.1 - d.r.0),
                            d.z.0 + (j as f64 + 0.5) / 5.0 * (d.z.1 - d.z.0),
                        ]);
                    }
                }
                v
            }
            None => vec![[0.0, 0.0]],
        };
        let length = 0.25;
        let mut step: f64 = 0.02;
        loop {
            let n = (length / step).round() as usize;
            let mut worst: f64 = 0.0;
            for &p in &samples {
                let a = tracer.trace_steps([p[0], p[1], 0.0], length, n);
                let b = tracer.trace_steps([p[0], p[1], 0.0], length, 2 * n);
                if let (Ok(a), Ok(b)) = (a, b) {
                    worst = worst.max(dist(a.end, b.end) / 15.0);
                }
            }
            if worst <= tol * length || step < 1e-6 {
                break;
            }
            step *= 0.5;
        }
        Ok(Self { tracer, step })
    }

    pub fn with_step(field: FieldModel, domain: Option<Rect>, step: f64) -> Result<Self> {
        field.validate()?;
        Ok(Self {
            tracer: Tracer::new(field, domain),
            step,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Replaces the box outside which images are reported invalid.
    pub fn with_bounding_box(mut self, bounding_box: Rect) -> Self {
        self.tracer.bounding_box = Some(bounding_box);
        self
    }

    pub fn tracer(&self) -> &Tracer {
        &self.tracer
    }

    pub fn field(&self) -> &FieldModel {
        &self.tracer.field
    }

    fn map_many(&self, rz: [f64; 2], deltas: &[f64], out: &mut [MappedPoint]) {
        let field = &self.tracer.field;
        let mut order: Vec<usize> = (0..deltas.len()).collect();
        order.sort_by(|&a, &b| deltas[a].total_cmp(&deltas[b]));
        let split = order.partition_point(|&i| deltas[i] < 0.0);
        let (neg, pos) = order.split_at(split);

        let sweep = |targets: &mut dyn Iterator<Item = usize>, out: &mut [MappedPoint]| {
            let mut state = [rz[0], rz[1], 1.0, 0.0, 0.0, 1.0];
            let mut at = 0.0;
            let mut alive = true;
            for i in targets {
                let target = deltas[i];
                if alive {
                    let span = target - at;
                    if span != 0.0 {
                        let n = (span.abs() / self.step).ceil().max(1.0) as usize;
                        let h = span / n as f64;
                        for _ in 0..n {
                            state = rk4_step_tangent(field, &state, h);
                            if let Some(b) = &self.tracer.bounding_box {
                                if !b.contains([state[0], state[1]]) {
                                    alive = false;
                                    break;
                                }
                            }
                        }
                        at = target;
                    }
                }
                let p = [state[0], state[1]];
                out[i] = if alive {
                    MappedPoint {
                        pos: p,
                        jac: [[state[2], state[3]], [state[4], state[5]]],
                        d_delta: field.velocity(p).0,
                        valid: true,
                    }
                } else {
                    MappedPoint::invalid(p)
                };
            }
        };
        sweep(&mut pos.iter().copied(), out);
        sweep(&mut neg.iter().rev().copied(), out);
    }
}

/// Node grid in the `(R, Z)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGrid {
    pub r0: f64,
    pub dr: f64,
    pub nr: usize,
    pub z0: f64,
    pub dz: f64,
    pub nz: usize,
}

impl NodeGrid {
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.r0 + i as f64 * self.dr, self.z0 + j as f64 * self.dz]
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.nr).flat_map(move |i| (0..self.nz).map(move |j| self.node(i, j)))
    }
}

/// Number of ghost nodes added around the coefficient grid on each side.
const TAYLOR_GHOSTS: usize = 2;

/// Taylor expansion of the mapping in the toroidal offset,
/// `Q = p + a(p) delta + b(p) delta^2 / 2`, with the coefficients `a` (the
/// field-line slope) and `b = (a . grad) a` held as quadratic B-splines whose
/// coefficients are the exact nodal values.
#[derive(Debug, Clone)]
pub struct TaylorMapping {
    order: usize,
    r0: f64,
    dr: f64,
    nr: usize,
    z0: f64,
    dz: f64,
    nz: usize,
    /// Extended grid values of a_R, a_Z, b_R, b_Z, `[(i * nz + j)]`.
    coeffs: [Vec<f64>; 4],
}

impl TaylorMapping {
    /// `dzeta_order` is 1 (linear in `delta`) or 2 (quadratic).
    pub fn build(field: &FieldModel, grid: NodeGrid, dzeta_order: usize) -> Result<Self> {
        field.validate()?;
        if !(1..=2).contains(&dzeta_order) {
            return Err(Error::Config(format!("taylor order {dzeta_order} not in {{1, 2}}")));
        }
        if !(grid.dr > 0.0 && grid.dz > 0.0) || grid.nr < 2 || grid.nz < 2 {
            return Err(Error::Config("taylor grid needs positive spacing and two nodes".into()));
        }
        let g = TAYLOR_GHOSTS;
        let nr = grid.nr + 2 * g;
        let nz = grid.nz + 2 * g;
        let r0 = grid.r0 - g as f64 * grid.dr;
        let z0 = grid.z0 - g as f64 * grid.dz;
        let mut coeffs: [Vec<f64>; 4] = Default::default();
        for c in coeffs.iter_mut() {
            c.reserve(nr * nz);
        }
        for i in 0..nr {
            for j in 0..nz {
                let p = [r0 + i as f64 * grid.dr, z0 + j as f64 * grid.dz];
                let (a, _) = field.velocity(p);
                let b = if dzeta_order == 2 { field.curvature(p) } else { [0.0; 2] };
                coeffs[0].push(a[0]);
                coeffs[1].push(a[1]);
                coeffs[2].push(b[0]);
                coeffs[3].push(b[1]);
            }
        }
        Ok(Self {
            order: dzeta_order,
            r0,
            dr: grid.dr,
            nr,
            z0,
            dz: grid.dz,
            nz,
            coeffs,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Spline values and gradients of the four coefficient fields at `p`.
    fn coefficients(&self, p: [f64; 2]) -> Option<[[f64; 3]; 4]> {
        let br = uniform_active(2, (p[0] - self.r0) / self.dr, 1.0 / self.dr);
        let bz = uniform_active(2, (p[1] - self.z0) / self.dz, 1.0 / self.dz);
        if br.first < 0
            || bz.first < 0
            || br.first as usize + 3 > self.nr
            || bz.first as usize + 3 > self.nz
        {
            return None;
        }
        let mut out = [[0.0; 3]; 4];
        for a in 0..3 {
            let i = br.first as usize + a;
            for b in 0..3 {
                let j = bz.first as usize + b;
                let idx = i * self.nz + j;
                let w = br.values[a] * bz.values[b];
                let wr = br.derivs[a] * bz.values[b];
                let wz = br.values[a] * bz.derivs[b];
                for (o, c) in out.iter_mut().zip(&self.coeffs) {
                    let v = c[idx];
                    o[0] += w * v;
                    o[1] += wr * v;
                    o[2] += wz * v;
                }
            }
        }
        Some(out)
    }

    fn map_many(&self, rz: [f64; 2], deltas: &[f64], out: &mut [MappedPoint]) {
        let Some([ar, az, br, bz]) = self.coefficients(rz) else {
            for o in out.iter_mut() {
                *o = MappedPoint::invalid(rz);
            }
            return;
        };
        for (o, &d) in out.iter_mut().zip(deltas) {
            let q = 0.5 * d * d;
            *o = MappedPoint {
                pos: [rz[0] + ar[0] * d + br[0] * q, rz[1] + az[0] * d + bz[0] * q],
                jac: [
                    [1.0 + ar[1] * d + br[1] * q, ar[2] * d + br[2] * q],
                    [az[1] * d + bz[1] * q, 1.0 + az[2] * d + bz[2] * q],
                ],
                d_delta: [ar[0] + br[0] * d, az[0] + bz[0] * d],
                valid: true,
            };
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedError {
    pub seed: [f64; 3],
    pub exact_end: [f64; 2],
    pub approx_end: [f64; 2],
    pub error: f64,
    pub survived: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MappingErrorReport {
    pub rms: f64,
    pub max: f64,
    pub surviving: usize,
    pub per_seed: Vec<SeedError>,
}

/// Distance between the images of each seed under `approx` and under the
/// exact field-line trace, at the plane `zeta_end`. Seeds whose exact
/// trajectory leaves the solve domain are reported but excluded from the
/// statistics.
pub fn mapping_error_report(
    approx: &Mapping,
    exact: &ExactMapping,
    seeds: &[[f64; 3]],
    zeta_end: f64,
    tol: f64,
) -> Result<MappingErrorReport> {
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let traced = exact.tracer.trace(seed, zeta_end, tol);
        let approx_end = approx.map_point(seed, zeta_end);
        let (exact_end, survived) = match traced {
            Ok(t) => (t.end, !t.left_domain && approx_end.valid),
            Err(Error::FieldLineExit { at }) => ([at[0], at[1]], false),
            Err(e) => return Err(e),
        };
        per_seed.push(SeedError {
            seed,
            exact_end,
            approx_end: approx_end.pos,
            error: dist(exact_end, approx_end.pos),
            survived,
        });
    }
    let errs: Vec<f64> = per_seed.iter().filter(|s| s.survived).map(|s| s.error).collect();
    if errs.is_empty() {
        return Err(Error::NoSurvivingSeeds);
    }
    let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    let max = errs.iter().copied().fold(0.0, f64::max);
    Ok(MappingErrorReport {
        rms,
        max,
        surviving: errs.len(),
        per_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn domain() -> Rect {
        Rect::new((0.0, 2.0), (-1.0, 1.5))
    }

    fn grid(n: usize) -> NodeGrid {
        NodeGrid {
            r0: 0.0,
            dr: 2.0 / n as f64,
            nr: n + 1,
            z0: -1.0,
            dz: 2.5 / n as f64,
            nz: n + 1,
        }
    }

    #[test]
    fn analytic_straight_map() {
        let m = Mapping::analytic_straight(&FieldModel::straight(1.0, 1.0)).unwrap();
        let q = m.map_point([0.0, 1.0, 0.3], 0.0);
        assert_abs_diff_eq!(q.pos[1], 0.7, epsilon = 1e-15);
        assert_eq!(q.pos[0], 0.0);
    }

    #[test]
    fn every_variant_fixes_the_source_plane() {
        let f = FieldModel::divertor(1.0);
        let maps = [
            Mapping::Identity,
            Mapping::analytic_straight(&FieldModel::straight(0.5, 1.0)).unwrap(),
            Mapping::Taylor(TaylorMapping::build(&f, grid(20), 2).unwrap()),
            Mapping::Exact(ExactMapping::new(f, Some(domain()), 1e-10).unwrap()),
        ];
        for m in &maps {
            for x in [[0.3, 0.2, 0.1], [1.7, -0.8, 0.0]] {
                let q = m.map_point(x, x[2]);
                assert!(q.valid);
                assert_abs_diff_eq!(q.pos[0], x[0], epsilon = 1e-14);
                assert_abs_diff_eq!(q.pos[1], x[1], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn exact_matches_adaptive_trace() {
        let f = FieldModel::divertor(1.0);
        let e = ExactMapping::new(f, Some(domain()), 1e-10).unwrap();
        let m = Mapping::Exact(e.clone());
        for (x, s) in [([0.5, 0.1, 0.0], 0.15), ([1.2, 0.9, 0.05], -0.1), ([1.5, -0.5, 0.0], 0.2)] {
            let t = e.tracer().trace(x, s, 1e-12).unwrap();
            let q = m.map_point(x, s);
            assert!(dist(t.end, q.pos) < 1e-9, "{x:?} -> {:?} vs {:?}", t.end, q.pos);
        }
    }

    #[test]
    fn batched_exact_equals_single() {
        let f = FieldModel::divertor(1.0);
        let m = Mapping::Exact(ExactMapping::new(f, Some(domain()), 1e-10).unwrap());
        let deltas = [0.2, -0.1, 0.05, 0.0, -0.23, 0.11];
        let mut out = [MappedPoint::default(); 6];
        m.map_many([0.8, 0.2], &deltas, &mut out);
        for (o, &d) in out.iter().zip(&deltas) {
            let single = m.map([0.8, 0.2], d);
            assert!(dist(o.pos, single.pos) < 1e-10);
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(o.jac[i][j], single.jac[i][j], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn straight_field_taylor_is_exact() {
        let f = FieldModel::straight(0.7, 1.0);
        let t = TaylorMapping::build(&f, grid(10), 2).unwrap();
        for c in &t.coeffs[2..] {
            assert!(c.iter().all(|&v| v == 0.0));
        }
        let m = Mapping::Taylor(t);
        let q = m.map([1.0, 0.0], 0.4);
        assert_abs_diff_eq!(q.pos[1], 0.28, epsilon = 1e-14);
        assert_abs_diff_eq!(q.d_delta[1], 0.7, epsilon = 1e-14);
    }

    #[test]
    fn taylor_derivatives_match_finite_differences() {
        let f = FieldModel::divertor(1.0);
        let m = Mapping::Taylor(TaylorMapping::build(&f, grid(20), 2).unwrap());
        let p = [0.77, 0.31];
        let d = 0.1;
        let q = m.map(p, d);
        let eps = 1e-6;
        let qr = m.map([p[0] + eps, p[1]], d).pos;
        let ql = m.map([p[0] - eps, p[1]], d).pos;
        let qd = m.map(p, d + eps).pos;
        let qm = m.map(p, d - eps).pos;
        for i in 0..2 {
            assert_abs_diff_eq!(q.jac[i][0], (qr[i] - ql[i]) / (2.0 * eps), epsilon = 1e-7);
            assert_abs_diff_eq!(q.d_delta[i], (qd[i] - qm[i]) / (2.0 * eps), epsilon = 1e-7);
        }
    }

    #[test]
    fn error_report_of_exact_against_itself_is_zero() {
        let f = FieldModel::divertor(1.0);
        let e = ExactMapping::new(f, Some(domain()), 1e-11).unwrap();
        let seeds: Vec<[f64; 3]> = grid(8).nodes().map(|p| [p[0], p[1], 0.0]).collect();
        let r = mapping_error_report(&Mapping::Exact(e.clone()), &e, &seeds, 0.15, 1e-12).unwrap();
        assert!(r.rms < 1e-9 && r.max < 1e-9, "{} {}", r.rms, r.max);
        assert!(r.surviving > 0 && r.surviving < seeds.len());
    }

    #[test]
    fn error_report_needs_survivors() {
        let f = FieldModel::divertor(1.0);
        let e = ExactMapping::new(f, Some(domain()), 1e-9).unwrap();
        // Starts outside the domain, so it never counts.
        let r = mapping_error_report(&Mapping::Identity, &e, &[[2.1, 0.0, 0.0]], 0.1, 1e-9);
        assert!(matches!(r, Err(Error::NoSurvivingSeeds)));
    }
}
