//! Galerkin assembly of bilinear and linear forms by midpoint quadrature.
//!
//! Supports of basis functions from different planes overlap irregularly, so
//! there are no elements to loop over; instead every quadrature point
//! contributes the products of all basis functions active there.
//!
//! Toroidal symmetry makes the bilinear forms block-circulant in the plane
//! index: shifting every point by one plane spacing shifts every basis
//! function by one plane. Only the quadrature points of the first toroidal
//! cell are therefore evaluated; their contributions are accumulated against
//! the plane offset `(plane_b - plane_a) mod N_zeta` and expanded afterwards.
//!
//! Points are processed in blocks (one grid cell of `(R, Z)` columns each)
//! with a dense local accumulator; blocks may run in parallel but are merged
//! in block order, so results do not depend on the execution policy.

use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::field::{FieldModel, Rect, Tracer};
use crate::par::Exec;
use crate::quadrature::QuadratureGrid;
use crate::space::{ColumnScratch, Discretization, TermList};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BilinearForm {
    /// `int grad psi_a . grad psi_b`
    Stiffness,
    /// `int psi_a psi_b`
    Mass,
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// A field-line curve sampled at uniform toroidal spacing, with trapezoidal
/// weights for `int d zeta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilamentCurve {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub sign: f64,
}

pub type SourceFn = Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SourceTerm {
    Analytic(SourceFn),
    /// Line charges `sign * int d zeta delta(x - curve(zeta))`.
    Filament(Vec<FilamentCurve>),
}

impl SourceTerm {
    pub fn analytic(f: impl Fn([f64; 3]) -> f64 + Send + Sync + 'static) -> Self {
        SourceTerm::Analytic(Arc::new(f))
    }

    /// Net charge; zero for a balanced filament pair.
    pub fn total_filament_charge(&self) -> Option<f64> {
        match self {
            SourceTerm::Filament(c) => Some(c.iter().map(|c| c.sign * c.weights.iter().sum::<f64>()).sum()),
            SourceTerm::Analytic(_) => None,
        }
    }
}

impl std::fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceTerm::Analytic(_) => f.write_str("Analytic(..)"),
            SourceTerm::Filament(c) => f.debug_tuple("Filament").field(&c.len()).finish(),
        }
    }
}

/// The field line through `start` over one toroidal period, sign `+1`, and
/// the same curve shifted by half a period (wrapped), sign `-1`. The period is
/// sampled with `intervals` trapezoidal intervals.
pub fn make_filament_source(
    field: &FieldModel,
    start: [f64; 3],
    zeta_period: f64,
    intervals: usize,
    domain: Rect,
) -> Result<SourceTerm> {
    if intervals == 0 || !(zeta_period > 0.0) {
        return Err(Error::InvalidSource("need a positive period and at least one interval".into()));
    }
    let tracer = Tracer::new(*field, Some(domain));
    let dz = zeta_period / intervals as f64;
    let mut points = Vec::with_capacity(intervals + 1);
    let mut p = start;
    for l in 0..=intervals {
        let zeta = start[2] + l as f64 * dz;
        if l > 0 {
            let t = tracer.trace(p, zeta, 1e-12)?;
            p = [t.end[0], t.end[1], zeta];
        }
        if !domain.contains([p[0], p[1]]) {
            return Err(Error::InvalidSource(format!(
                "filament leaves the domain at ({:.4}, {:.4}, {:.4})",
                p[0], p[1], p[2]
            )));
        }
        points.push(p);
    }
    let mut weights = vec![dz; intervals + 1];
    weights[0] *= 0.5;
    weights[intervals] *= 0.5;
    let shifted = points
        .iter()
        .map(|q| [q[0], q[1], (q[2] + 0.5 * zeta_period).rem_euclid(zeta_period)])
        .collect();
    Ok(SourceTerm::Filament(vec![
        FilamentCurve {
            points,
            weights: weights.clone(),
            sign: 1.0,
        },
        FilamentCurve {
            points: shifted,
            weights,
            sign: -1.0,
        },
    ]))
}

pub fn assemble_laplacian<S: Discretization + ?Sized>(space: &S, quad: &QuadratureGrid, exec: Exec) -> CsrMatrix {
    assemble_bilinear(space, quad, BilinearForm::Stiffness, exec)
}

pub fn assemble_mass<S: Discretization + ?Sized>(space: &S, quad: &QuadratureGrid, exec: Exec) -> CsrMatrix {
    assemble_bilinear(space, quad, BilinearForm::Mass, exec)
}

/// `b_a = -int psi_a rho`, the load of the Poisson weak form.
pub fn assemble_rhs<S: Discretization + ?Sized>(
    space: &S,
    quad: &QuadratureGrid,
    source: &SourceTerm,
    exec: Exec,
) -> Result<Vec<f64>> {
    let mut b = assemble_load(space, quad, source, exec)?;
    b.iter_mut().for_each(|v| *v = -*v);
    Ok(b)
}

/// `(ref_r, ref_z, ref_zeta)` points per cell, i.e. the size of one block.
fn per_cell(quad: &QuadratureGrid, n_planes: usize) -> [usize; 3] {
    let rz = |a: &crate::quadrature::QuadAxis, r: usize| if r == 0 { a.n } else { r };
    let zeta = quad.zeta.n / n_planes;
    assert_eq!(zeta * n_planes, quad.zeta.n, "quadrature not aligned with planes");
    [
        quad.r.map_or(1, |a| rz(&a, quad.refinement[0])),
        rz(&quad.z, quad.refinement[1]),
        zeta,
    ]
}

struct Workspace {
    scratch: ColumnScratch,
    lists: Vec<TermList>,
    /// Unknown → local index, `u32::MAX` when untouched.
    local: Vec<u32>,
    dofs: Vec<usize>,
    /// `(local index, value, gradient)` of the terms of every point.
    flat: Vec<(u32, f64, [f64; 3])>,
    ranges: Vec<(usize, usize)>,
    dense: Vec<f64>,
}

impl Workspace {
    fn new(n_dofs: usize, per_column: usize) -> Self {
        Self {
            scratch: ColumnScratch::default(),
            lists: vec![TermList::default(); per_column],
            local: vec![u32::MAX; n_dofs],
            dofs: Vec::new(),
            flat: Vec::new(),
            ranges: Vec::new(),
            dense: Vec::new(),
        }
    }

    fn local_of(&mut self, dof: usize) -> u32 {
        let l = self.local[dof];
        if l != u32::MAX {
            return l;
        }
        let l = self.dofs.len() as u32;
        self.local[dof] = l;
        self.dofs.push(dof);
        l
    }
}

const D_BITS: u32 = 12;
const NODE_BITS: u32 = 26;

fn pack(a: usize, b: usize, d: usize) -> u64 {
    ((a as u64) << (NODE_BITS + D_BITS)) | ((b as u64) << D_BITS) | d as u64
}

fn unpack(k: u64) -> (usize, usize, usize) {
    let mask = |bits: u32| (1u64 << bits) - 1;
    (
        (k >> (NODE_BITS + D_BITS)) as usize,
        ((k >> D_BITS) & mask(NODE_BITS)) as usize,
        (k & mask(D_BITS)) as usize,
    )
}

/// Number of blocks whose contributions are held in memory at once.
const BATCH: usize = 256;

pub fn assemble_bilinear<S: Discretization + ?Sized>(
    space: &S,
    quad: &QuadratureGrid,
    form: BilinearForm,
    exec: Exec,
) -> CsrMatrix {
    let n_planes = space.n_planes();
    let nf = space.n_free2d();
    assert!(nf < 1 << NODE_BITS && n_planes < 1 << D_BITS, "grid too large for assembly keys");
    let [br, bz, bq] = per_cell(quad, n_planes);
    let (nbr, nbz) = (quad.n_r() / br, quad.z.n / bz);
    let zetas: Vec<f64> = (0..bq).map(|q| quad.zeta.point(q)).collect();
    let w = quad.point_weight();
    let n_dofs = space.n_dofs();

    let block = |ws: &mut Workspace, b: usize| -> Vec<(u64, f64)> {
        let (cr, cz) = (b / nbz, b % nbz);
        ws.flat.clear();
        ws.ranges.clear();
        for ir in cr * br..(cr + 1) * br {
            for iz in cz * bz..(cz + 1) * bz {
                let rz = [quad.r_point(ir), quad.z.point(iz)];
                let mut lists = std::mem::take(&mut ws.lists);
                space.column_terms(rz, &zetas, &mut ws.scratch, &mut lists);
                for list in &lists {
                    let start = ws.flat.len();
                    for t in list.as_slice() {
                        if let Some(dof) = space.dof_of(t) {
                            let l = ws.local_of(dof);
                            ws.flat.push((l, t.value, t.grad));
                        }
                    }
                    ws.ranges.push((start, ws.flat.len()));
                }
                ws.lists = lists;
            }
        }
        let nl = ws.dofs.len();
        ws.dense.clear();
        ws.dense.resize(nl * nl, 0.0);
        for &(s, e) in &ws.ranges {
            let terms = &ws.flat[s..e];
            for (n, &(la, va, ga)) in terms.iter().enumerate() {
                let (va, ga) = (w * va, [w * ga[0], w * ga[1], w * ga[2]]);
                for &(lb, vb, gb) in &terms[n..] {
                    let v = match form {
                        BilinearForm::Stiffness => ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2],
                        BilinearForm::Mass => va * vb,
                    };
                    let (i, j) = if la <= lb { (la, lb) } else { (lb, la) };
                    ws.dense[i as usize * nl + j as usize] += v;
                }
            }
        }
        let mut out = Vec::new();
        for i in 0..nl {
            let (pi, fi) = (ws.dofs[i] / nf, ws.dofs[i] % nf);
            for j in i..nl {
                let v = ws.dense[i * nl + j];
                if v == 0.0 {
                    continue;
                }
                let (pj, fj) = (ws.dofs[j] / nf, ws.dofs[j] % nf);
                let d = (pj + n_planes - pi) % n_planes;
                out.push((pack(fi, fj, d), v));
                if i != j {
                    out.push((pack(fj, fi, (n_planes - d) % n_planes), v));
                }
            }
        }
        for &d in &ws.dofs {
            ws.local[d] = u32::MAX;
        }
        ws.dofs.clear();
        out
    };

    let n_blocks = nbr * nbz;
    let mut reduced: FxHashMap<u64, f64> = FxHashMap::default();
    for start in (0..n_blocks).step_by(BATCH) {
        let count = BATCH.min(n_blocks - start);
        let parts = exec.map_init(count, || Workspace::new(n_dofs, bq), |ws, b| block(ws, start + b));
        for part in parts {
            for (k, v) in part {
                *reduced.entry(k).or_insert(0.0) += v;
            }
        }
    }
    expand_circulant(reduced, nf, n_planes)
}

/// Full matrix from the reduced entries `(a, b, d)`:
/// `M[(k, a), (k + d, b)] = R[a, b, d]` for every plane `k`.
fn expand_circulant(reduced: FxHashMap<u64, f64>, nf: usize, n_planes: usize) -> CsrMatrix {
    let mut entries: Vec<(u64, f64)> = reduced.into_iter().collect();
    entries.sort_unstable_by_key(|e| e.0);
    let mut row_start = vec![0usize; nf + 1];
    for &(k, _) in &entries {
        row_start[unpack(k).0 + 1] += 1;
    }
    for a in 0..nf {
        row_start[a + 1] += row_start[a];
    }
    let n = nf * n_planes;
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::with_capacity(entries.len() * n_planes);
    let mut values = Vec::with_capacity(entries.len() * n_planes);
    let mut row: Vec<(usize, f64)> = Vec::new();
    for k in 0..n_planes {
        for a in 0..nf {
            row.clear();
            for &(key, v) in &entries[row_start[a]..row_start[a + 1]] {
                let (_, b, d) = unpack(key);
                row.push((((k + d) % n_planes) * nf + b, v));
            }
            row.sort_unstable_by_key(|e| e.0);
            col_idx.extend(row.iter().map(|e| e.0));
            values.extend(row.iter().map(|e| e.1));
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix::from_raw(n, n, row_ptr, col_idx, values).expect("assembled matrix is well formed")
}

/// `l_a = int psi_a rho`.
pub fn assemble_load<S: Discretization + ?Sized>(
    space: &S,
    quad: &QuadratureGrid,
    source: &SourceTerm,
    exec: Exec,
) -> Result<Vec<f64>> {
    let n_dofs = space.n_dofs();
    match source {
        SourceTerm::Filament(curves) => {
            let mut out = vec![0.0; n_dofs];
            for c in curves {
                for (&p, &w) in c.points.iter().zip(&c.weights) {
                    let terms = space.terms_at(p)?;
                    for t in terms.as_slice() {
                        if let Some(d) = space.dof_of(t) {
                            out[d] += c.sign * w * t.value;
                        }
                    }
                }
            }
            Ok(out)
        }
        SourceTerm::Analytic(rho) => {
            let n_planes = space.n_planes();
            let nf = space.n_free2d();
            let [_, _, bq] = per_cell(quad, n_planes);
            let zetas: Vec<f64> = (0..bq).map(|q| quad.zeta.point(q)).collect();
            let w = quad.point_weight();
            let n_cols = quad.n_r() * quad.z.n;
            const CHUNKS: usize = 32;
            let per = n_cols.div_ceil(CHUNKS);
            let parts = exec.map_init(
                CHUNKS,
                || Workspace::new(0, bq),
                |ws, c| {
                    let mut acc = vec![0.0; n_dofs];
                    for col in c * per..((c + 1) * per).min(n_cols) {
                        let (ir, iz) = (col / quad.z.n, col % quad.z.n);
                        let rz = [quad.r_point(ir), quad.z.point(iz)];
                        let mut lists = std::mem::take(&mut ws.lists);
                        space.column_terms(rz, &zetas, &mut ws.scratch, &mut lists);
                        for (q, list) in lists.iter().enumerate() {
                            for cell in 0..n_planes {
                                let r = w * rho([rz[0], rz[1], quad.zeta.point(cell * bq + q)]);
                                if r == 0.0 {
                                    continue;
                                }
                                for t in list.as_slice() {
                                    if let Some(f) = space.free_index(t.node as usize) {
                                        let plane = (t.plane as usize + cell) % n_planes;
                                        acc[plane * nf + f] += r * t.value;
                                    }
                                }
                            }
                        }
                        ws.lists = lists;
                    }
                    acc
                },
            );
            let mut out = vec![0.0; n_dofs];
            for part in parts {
                for (o, p) in out.iter_mut().zip(part) {
                    *o += p;
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::Mapping;
    use crate::space::FcifemSpace;
    use crate::splines::Spline1D;
    use std::f64::consts::PI;

    fn periodic(order: usize, nz: usize, nzeta: usize, mapping: Mapping) -> FcifemSpace {
        FcifemSpace::new(
            None,
            Spline1D::periodic(order, 2.0 * PI / nz as f64, nz, 0.0).unwrap(),
            Spline1D::periodic(order, 2.0 * PI / nzeta as f64, nzeta, 0.0).unwrap(),
            mapping,
        )
        .unwrap()
    }

    #[test]
    fn key_packing_round_trips() {
        for (a, b, d) in [(0, 0, 0), (12345, 999_999, 7), ((1 << 26) - 1, 3, (1 << 12) - 1)] {
            assert_eq!(unpack(pack(a, b, d)), (a, b, d));
        }
    }

    #[test]
    fn circulant_expansion_matches_direct_sum() {
        // Direct assembly over every quadrature point, without the shift trick.
        let s = periodic(2, 9, 4, Mapping::analytic_straight(&FieldModel::straight(1.0, 1.0)).unwrap());
        let quad = QuadratureGrid::for_space(&s, [1, 6, 14]);
        let m = assemble_mass(&s, &quad, Exec::Sequential);
        let n = s.n_dofs();
        let mut dense = vec![vec![0.0; n]; n];
        let w = quad.point_weight();
        for z in quad.z.points() {
            for zeta in quad.zeta.points() {
                let t = s.terms_at([0.0, z, zeta]).unwrap();
                for a in t.as_slice() {
                    for b in t.as_slice() {
                        dense[s.dof_of(a).unwrap()][s.dof_of(b).unwrap()] += w * a.value * b.value;
                    }
                }
            }
        }
        let md = m.to_dense();
        for i in 0..n {
            for j in 0..n {
                assert!((md[i][j] - dense[i][j]).abs() < 1e-13, "{i} {j}");
            }
        }
    }

    #[test]
    fn constants_span_the_stiffness_null_space() {
        let s = periodic(2, 12, 3, Mapping::analytic_straight(&FieldModel::straight(1.0, 1.0)).unwrap());
        let quad = QuadratureGrid::for_space(&s, [1, 10, 40]);
        let k = assemble_laplacian(&s, &quad, Exec::Sequential);
        let r = k.mul_vec(&vec![1.0; s.n_dofs()]);
        assert!(r.iter().all(|v| v.abs() < 1e-10 * k.norm_inf()));
        assert_eq!(k.asymmetry(), 0.0);
    }

    #[test]
    fn unit_source_load_sums_to_volume() {
        let s = periodic(1, 10, 2, Mapping::analytic_straight(&FieldModel::straight(1.0, 1.0)).unwrap());
        let quad = QuadratureGrid::for_space(&s, [1, 10, 50]);
        let b = assemble_rhs(&s, &quad, &SourceTerm::analytic(|_| 1.0), Exec::Sequential).unwrap();
        let total: f64 = b.iter().sum();
        assert!((total + 4.0 * PI * PI).abs() < 1e-10, "{total}");
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let s = periodic(2, 20, 3, Mapping::analytic_straight(&FieldModel::straight(1.0, 1.0)).unwrap());
        let quad = QuadratureGrid::for_space(&s, [1, 10, 60]);
        let a = assemble_laplacian(&s, &quad, Exec::Sequential);
        let b = assemble_laplacian(&s, &quad, Exec::Parallel);
        assert_eq!(a, b);
    }
}
