//! The field-aligned discrete space.
//!
//! A function in the space is
//!
//! ```text
//! phi(x) = sum_{i,j,k} phi_ijk  W_R(Q_R(x, s_k) - R_i) W_Z(Q_Z(x, s_k) - Z_j) W_zeta(zeta - s_k)
//! ```
//!
//! where `s_k` are the toroidal planes and `Q` is the field-line mapping. The
//! toroidal axis is always periodic. The sum runs over unwrapped plane
//! positions `s_m = zeta_0 + m h_zeta`; plane `m` carries the coefficients of
//! stored plane `m mod N_zeta`. Because the fields are toroidally symmetric,
//! this gives a periodic function even when field lines do not close.
//!
//! The `R` axis may be absent, in which case the problem lives in the
//! `(Z, zeta)` plane and the `R` factor is identically one.
//!
//! On a clamped axis, terms whose mapped argument falls outside the domain
//! contribute nothing; on an open axis, the ghost nodes beyond the walls
//! carry such terms, and only arguments beyond the last ghost are dropped.

use crate::error::{Error, Result};
use crate::mapping::{MappedPoint, Mapping};
use crate::par::Exec;
use crate::splines::{ActiveBasis, Spline1D};

/// Upper bound on the basis functions that can be nonzero at one point:
/// 27 field-aligned terms plus 8 boundary-layer terms in a blended space.
pub const MAX_TERMS: usize = 36;

/// One basis function evaluated at a point. `node` indexes the `(R, Z)` grid
/// (`i * n_z + j`), `plane` the stored toroidal plane.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Term {
    pub node: u32,
    pub plane: u32,
    pub value: f64,
    /// Gradient in `(R, Z, zeta)`.
    pub grad: [f64; 3],
}

/// The nonzero basis functions at one point, each distinct `(node, plane)`
/// appearing once.
#[derive(Debug, Clone)]
pub struct TermList {
    len: usize,
    items: [Term; MAX_TERMS],
}

impl Default for TermList {
    fn default() -> Self {
        Self {
            len: 0,
            items: [Term::default(); MAX_TERMS],
        }
    }
}

impl TermList {
    pub fn clear(&mut self) {
        self.len = 0;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_slice(&self) -> &[Term] {
        &self.items[..self.len]
    }

    pub fn as_mut_slice(&mut self) -> &mut [Term] {
        &mut self.items[..self.len]
    }

    /// Adds `term`, merging it with an existing entry for the same function.
    pub fn add(&mut self, term: Term) {
        for t in &mut self.items[..self.len] {
            if t.node == term.node && t.plane == term.plane {
                t.value += term.value;
                for d in 0..3 {
                    t.grad[d] += term.grad[d];
                }
                return;
            }
        }
        assert!(self.len < MAX_TERMS, "too many active basis functions");
        self.items[self.len] = term;
        self.len += 1;
    }

    pub fn value(&self, coeffs: &[f64], dof: impl Fn(&Term) -> Option<usize>) -> f64 {
        self.as_slice()
            .iter()
            .filter_map(|t| dof(t).map(|d| coeffs[d] * t.value))
            .sum()
    }

    pub fn gradient(&self, coeffs: &[f64], dof: impl Fn(&Term) -> Option<usize>) -> [f64; 3] {
        let mut g = [0.0; 3];
        for t in self.as_slice() {
            if let Some(d) = dof(t) {
                for (gi, ti) in g.iter_mut().zip(t.grad) {
                    *gi += coeffs[d] * ti;
                }
            }
        }
        g
    }
}

/// Reusable buffers for [`Discretization::column_terms`].
#[derive(Debug, Default)]
pub struct ColumnScratch {
    zeta_active: Vec<ActiveBasis>,
    deltas: Vec<f64>,
    images: Vec<MappedPoint>,
}

/// Common interface of the plain and the blended space, as seen by assembly.
///
/// Degrees of freedom are numbered plane-major: `plane * n_free2d + free`,
/// where `free` enumerates the `(R, Z)` nodes that carry unknowns.
pub trait Discretization: Sync {
    fn r_axis(&self) -> Option<&Spline1D>;
    fn z_axis(&self) -> &Spline1D;
    fn zeta_axis(&self) -> &Spline1D;

    fn n_nodes2d(&self) -> usize;

    fn n_free2d(&self) -> usize;

    /// Unknown index of an `(R, Z)` node, `None` for eliminated nodes.
    fn free_index(&self, node: usize) -> Option<usize>;

    /// Basis functions (over all nodes) at `(rz, zeta)` for each `zeta` in
    /// `zetas`.
    fn column_terms(&self, rz: [f64; 2], zetas: &[f64], scratch: &mut ColumnScratch, out: &mut [TermList]);

    fn n_planes(&self) -> usize {
        self.zeta_axis().n_nodes()
    }

    fn n_dofs(&self) -> usize {
        self.n_free2d() * self.n_planes()
    }

    fn dof_of(&self, t: &Term) -> Option<usize> {
        self.free_index(t.node as usize)
            .map(|f| t.plane as usize * self.n_free2d() + f)
    }

    /// Node grid position of a stored node.
    fn node_position(&self, node: usize) -> [f64; 2] {
        let nz = self.z_axis().n_nodes();
        let r = self.r_axis().map_or(0.0, |a| a.node((node / nz) as i64));
        [r, self.z_axis().node((node % nz) as i64)]
    }

    /// `(R, Z, zeta)` of an unknown.
    fn dof_position(&self, dof: usize) -> [f64; 3] {
        let nf = self.n_free2d();
        let (plane, free) = (dof / nf, dof % nf);
        let node = (0..self.n_nodes2d())
            .find(|&n| self.free_index(n) == Some(free))
            .expect("free index without node");
        let p = self.node_position(node);
        [p[0], p[1], self.zeta_axis().node(plane as i64)]
    }

    /// Checks that `(R, Z)` lies inside every clamped axis.
    fn check_point(&self, x: [f64; 3]) -> Result<()> {
        let axes = [self.r_axis().map(|a| (a, x[0])), Some((self.z_axis(), x[1]))];
        for (axis, v) in axes.into_iter().flatten() {
            if !axis.contains(v) {
                let (lo, hi) = axis.domain();
                return Err(Error::OutOfDomain { x: v, lo, hi });
            }
        }
        Ok(())
    }

    fn terms_at(&self, x: [f64; 3]) -> Result<TermList> {
        self.check_point(x)?;
        let mut out = [TermList::default()];
        self.column_terms([x[0], x[1]], &[x[2]], &mut ColumnScratch::default(), &mut out);
        let [t] = out;
        Ok(t)
    }

    /// Value at `x` of the function with unknowns `coeffs`.
    fn evaluate(&self, coeffs: &[f64], x: [f64; 3]) -> Result<f64> {
        check_len(coeffs, self.n_dofs())?;
        Ok(self.terms_at(x)?.value(coeffs, |t| self.dof_of(t)))
    }

    fn evaluate_gradient(&self, coeffs: &[f64], x: [f64; 3]) -> Result<[f64; 3]> {
        check_len(coeffs, self.n_dofs())?;
        Ok(self.terms_at(x)?.gradient(coeffs, |t| self.dof_of(t)))
    }

    /// Unknowns set to the nodal values of `f`.
    fn interpolate_nodal(&self, f: &dyn Fn([f64; 3]) -> f64) -> Vec<f64> {
        let nf = self.n_free2d();
        let mut out = vec![0.0; self.n_dofs()];
        for node in 0..self.n_nodes2d() {
            if let Some(free) = self.free_index(node) {
                let p = self.node_position(node);
                for k in 0..self.n_planes() {
                    out[k * nf + free] = f([p[0], p[1], self.zeta_axis().node(k as i64)]);
                }
            }
        }
        out
    }
}

/// Values on the tensor grid `r x z x zeta`, laid out with `zeta` fastest:
/// `(i * z.len() + j) * zeta.len() + k`. Without an `R` axis pass `r = [0.0]`.
pub fn sample_grid<S: Discretization + ?Sized>(
    space: &S,
    coeffs: &[f64],
    r: &[f64],
    z: &[f64],
    zeta: &[f64],
    exec: Exec,
) -> Result<Vec<f64>> {
    check_len(coeffs, space.n_dofs())?;
    for &rv in r {
        for &zv in z {
            space.check_point([rv, zv, 0.0])?;
        }
    }
    let columns = exec.map_init(
        r.len() * z.len(),
        || (ColumnScratch::default(), vec![TermList::default(); zeta.len()]),
        |(scratch, lists), c| {
            let rz = [r[c / z.len()], z[c % z.len()]];
            space.column_terms(rz, zeta, scratch, lists);
            lists
                .iter()
                .map(|l| l.value(coeffs, |t| space.dof_of(t)))
                .collect::<Vec<f64>>()
        },
    );
    Ok(columns.concat())
}

pub(crate) fn check_len(coeffs: &[f64], expected: usize) -> Result<()> {
    if coeffs.len() != expected {
        return Err(Error::CoefficientLength {
            got: coeffs.len(),
            expected,
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FcifemSpace {
    r: Option<Spline1D>,
    z: Spline1D,
    zeta: Spline1D,
    mapping: Mapping,
}

impl FcifemSpace {
    pub fn new(r: Option<Spline1D>, z: Spline1D, zeta: Spline1D, mapping: Mapping) -> Result<Self> {
        if !zeta.is_periodic() {
            return Err(Error::InvalidSpline("the toroidal axis must be periodic".into()));
        }
        if (r.as_ref().map_or(0, |a| a.n_nodes()) * z.n_nodes()).max(z.n_nodes()) * zeta.n_nodes()
            >= u32::MAX as usize
        {
            return Err(Error::InvalidSpline("too many nodes".into()));
        }
        Ok(Self { r, z, zeta, mapping })
    }

    pub fn mapping(&self) -> &Mapping {
        &self.mapping
    }

    pub fn with_mapping(&self, mapping: Mapping) -> Self {
        Self {
            mapping,
            ..self.clone()
        }
    }

    pub fn n_r(&self) -> usize {
        self.r.as_ref().map_or(1, |a| a.n_nodes())
    }

    pub fn n_z(&self) -> usize {
        self.z.n_nodes()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * self.n_z() + j
    }

    /// True when every plane image of `x` is valid and lands where all `R`/`Z`
    /// functions active there exist, i.e. where the unit coefficients sum to 1.
    pub fn covers(&self, x: [f64; 3]) -> bool {
        let Some(za) = self.zeta.active(x[2]) else {
            return false;
        };
        let complete = |a: &Spline1D, v: f64| a.active(v).is_some_and(|b| b.iter().all(|(i, _, _)| a.index(i).is_some()));
        let covered = za.iter().all(|(m, _, _)| {
            let q = self.mapping.map([x[0], x[1]], self.zeta.node(m) - x[2]);
            q.valid
                && self.r.as_ref().map_or(true, |a| complete(a, q.pos[0]))
                && complete(&self.z, q.pos[1])
        });
        covered
    }

    /// Field-aligned terms at `(rz, zeta)` for each entry of `zetas`, appended
    /// to the (cleared) lists in `out`.
    pub(crate) fn fci_terms(&self, rz: [f64; 2], zetas: &[f64], scratch: &mut ColumnScratch, out: &mut [TermList]) {
        let ColumnScratch {
            zeta_active,
            deltas,
            images,
        } = scratch;
        zeta_active.clear();
        deltas.clear();
        for &zeta in zetas {
            let za = self.zeta.active(zeta).expect("periodic axis");
            for (m, _, _) in za.iter() {
                deltas.push(self.zeta.node(m) - zeta);
            }
            zeta_active.push(za);
        }
        images.clear();
        images.resize(deltas.len(), MappedPoint::default());
        self.mapping.map_many(rz, deltas, images);

        let nz = self.n_z();
        let mut next = 0;
        for (za, list) in zeta_active.iter().zip(out.iter_mut()) {
            list.clear();
            for (m, wz, dwz) in za.iter() {
                let q = images[next];
                next += 1;
                if !q.valid {
                    continue;
                }
                let plane = self.zeta.wrap(m) as u32;
                let ra = match &self.r {
                    Some(a) => match a.active(q.pos[0]) {
                        Some(ra) => ra,
                        None => continue,
                    },
                    None => ActiveBasis {
                        first: 0,
                        len: 1,
                        values: [1.0, 0.0, 0.0],
                        derivs: [0.0; 3],
                    },
                };
                let Some(zb) = self.z.active(q.pos[1]) else {
                    continue;
                };
                for (i, vr, dr) in ra.iter() {
                    let i = match &self.r {
                        Some(a) => match a.index(i) {
                            Some(i) => i,
                            None => continue,
                        },
                        None => 0,
                    };
                    for (j, vz, dz) in zb.iter() {
                        let Some(j) = self.z.index(j) else {
                            continue;
                        };
                        let node = (i * nz + j) as u32;
                        let v = vr * vz;
                        // Derivatives with respect to the mapped coordinates.
                        let (gq_r, gq_z) = (dr * vz, vr * dz);
                        let g_r = gq_r * q.jac[0][0] + gq_z * q.jac[1][0];
                        let g_z = gq_r * q.jac[0][1] + gq_z * q.jac[1][1];
                        let g_zeta = -(gq_r * q.d_delta[0] + gq_z * q.d_delta[1]);
                        list.add(Term {
                            node,
                            plane,
                            value: wz * v,
                            grad: [wz * g_r, wz * g_z, dwz * v + wz * g_zeta],
                        });
                    }
                }
            }
        }
    }
}

impl Discretization for FcifemSpace {
    fn r_axis(&self) -> Option<&Spline1D> {
        self.r.as_ref()
    }

    fn z_axis(&self) -> &Spline1D {
        &self.z
    }

    fn zeta_axis(&self) -> &Spline1D {
        &self.zeta
    }

    fn n_nodes2d(&self) -> usize {
        self.n_r() * self.n_z()
    }

    fn n_free2d(&self) -> usize {
        self.n_nodes2d()
    }

    fn free_index(&self, node: usize) -> Option<usize> {
        Some(node)
    }

    fn column_terms(&self, rz: [f64; 2], zetas: &[f64], scratch: &mut ColumnScratch, out: &mut [TermList]) {
        self.fci_terms(rz, zetas, scratch, out);
    }

    fn dof_position(&self, dof: usize) -> [f64; 3] {
        let n2 = self.n_nodes2d();
        let p = self.node_position(dof % n2);
        [p[0], p[1], self.zeta.node((dof / n2) as i64)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldModel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn periodic_2d(order: usize, nz: usize, nzeta: usize) -> FcifemSpace {
        let l = 2.0 * PI;
        FcifemSpace::new(
            None,
            Spline1D::periodic(order, l / nz as f64, nz, 0.0).unwrap(),
            Spline1D::periodic(order, l / nzeta as f64, nzeta, 0.0).unwrap(),
            Mapping::analytic_straight(&FieldModel::straight(1.0, 1.0)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constants_are_reproduced() {
        for order in [1, 2] {
            let s = periodic_2d(order, 12, 3);
            let c = vec![2.5; s.n_dofs()];
            for x in [[0.0, 0.3, 0.1], [0.0, 5.0, 6.2], [0.0, 1.1, 3.3]] {
                assert_abs_diff_eq!(s.evaluate(&c, x).unwrap(), 2.5, epsilon = 1e-13);
                let g = s.evaluate_gradient(&c, x).unwrap();
                assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
            }
        }
    }

    #[test]
    fn field_aligned_wave_is_captured_with_few_planes() {
        let s = periodic_2d(2, 64, 4);
        let f = |x: [f64; 3]| (3.0 * (x[1] - x[2])).sin();
        let c = s.interpolate_nodal(&f);
        let mut worst: f64 = 0.0;
        for k in 0..50 {
            let x = [0.0, 0.13 * k as f64, 0.071 * k as f64];
            worst = worst.max((s.evaluate(&c, x).unwrap() - f(x)).abs());
        }
        // Comparable to a 64-point isotropic quadratic interpolant.
        assert!(worst < 2e-2, "{worst}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = periodic_2d(2, 16, 5);
        let c: Vec<f64> = (0..s.n_dofs()).map(|i| ((i * 37) % 11) as f64 * 0.1).collect();
        let x = [0.0, 1.234, 2.345];
        let g = s.evaluate_gradient(&c, x).unwrap();
        let eps = 1e-6;
        for d in 1..3 {
            let mut p = x;
            let mut m = x;
            p[d] += eps;
            m[d] -= eps;
            let fd = (s.evaluate(&c, p).unwrap() - s.evaluate(&c, m).unwrap()) / (2.0 * eps);
            assert_abs_diff_eq!(g[d], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn rejects_wrong_length() {
        let s = periodic_2d(1, 8, 2);
        assert!(matches!(
            s.evaluate(&[1.0], [0.0, 0.0, 0.0]),
            Err(Error::CoefficientLength { got: 1, .. })
        ));
    }

    #[test]
    fn clamped_domain_checked() {
        let s = FcifemSpace::new(
            Some(Spline1D::clamped(2, 0.1, 21, 0.0).unwrap()),
            Spline1D::clamped(2, 0.125, 21, -1.0).unwrap(),
            Spline1D::periodic(2, PI / 20.0, 1, 0.0).unwrap(),
            Mapping::Identity,
        )
        .unwrap();
        let c = vec![1.0; s.n_dofs()];
        assert!(s.evaluate(&c, [2.5, 0.0, 0.0]).is_err());
        assert_abs_diff_eq!(s.evaluate(&c, [2.0, 1.5, 0.1]).unwrap(), 1.0, epsilon = 1e-14);
    }
}
