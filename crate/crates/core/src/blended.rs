//! Blending of the field-aligned space with a conforming boundary layer.
//!
//! Near the walls of a rectangular `(R, Z)` domain, each basis function is
//! `psi_a = (1 - B) psi_a^fci + B K_a`, where `K_a` is the trilinear finite
//! element function of the same node and plane, and the ramp `B` is the sum of
//! the bilinear hats of the boundary nodes. `B` is one on the walls and zero
//! beyond the first ring of cells, so the blend is purely field-aligned in the
//! bulk and purely conforming on the walls. The two layers share the node
//! grid, so every coefficient belongs to both.
//!
//! Homogeneous Dirichlet conditions eliminate the boundary nodes: the
//! remaining functions vanish on the walls identically. When the field-aligned
//! axes are open, their ghost nodes beyond the walls stay free; they only
//! enter through field-aligned terms and are cut off by the ramp on the wall.

use crate::error::{Error, Result};
use crate::space::{ColumnScratch, Discretization, FcifemSpace, Term, TermList};
use crate::splines::Spline1D;

#[derive(Debug, Clone)]
pub struct BlendedSpace {
    fci: FcifemSpace,
    hat_r: Spline1D,
    hat_z: Spline1D,
    hat_zeta: Spline1D,
    /// Ghost layers of the field-aligned `R` and `Z` axes.
    ghosts: [usize; 2],
    /// Node → unknown index, `u32::MAX` on the boundary.
    free: Vec<u32>,
    n_free: usize,
}

impl BlendedSpace {
    /// Blended space with homogeneous Dirichlet conditions on all four walls.
    pub fn dirichlet(fci: FcifemSpace) -> Result<Self> {
        let (Some(r), z) = (fci.r_axis(), fci.z_axis()) else {
            return Err(Error::InvalidSpline("blending needs both R and Z axes".into()));
        };
        if r.is_periodic() || z.is_periodic() {
            return Err(Error::InvalidSpline("blending needs clamped R and Z axes".into()));
        }
        let (cr, cz) = (r.cells(), z.cells());
        if cr < 2 || cz < 2 {
            return Err(Error::InvalidSpline("blending needs at least one interior node".into()));
        }
        let hat_r = Spline1D::clamped(1, r.spacing(), cr + 1, r.domain().0)?;
        let hat_z = Spline1D::clamped(1, z.spacing(), cz + 1, z.domain().0)?;
        let zeta = fci.zeta_axis();
        let hat_zeta = Spline1D::periodic(1, zeta.spacing(), zeta.n_nodes(), zeta.origin())?;
        let ghosts = [r.ghosts(), z.ghosts()];
        let (nr, nz) = (r.n_nodes(), z.n_nodes());
        let mut free = vec![u32::MAX; nr * nz];
        let mut n_free = 0;
        for i in 0..nr {
            for j in 0..nz {
                let (pi, pj) = (i as i64 - ghosts[0] as i64, j as i64 - ghosts[1] as i64);
                let inside = (0..=cr as i64).contains(&pi) && (0..=cz as i64).contains(&pj);
                let wall = inside && (pi == 0 || pi == cr as i64 || pj == 0 || pj == cz as i64);
                if !wall {
                    free[i * nz + j] = n_free as u32;
                    n_free += 1;
                }
            }
        }
        Ok(Self {
            fci,
            hat_r,
            hat_z,
            hat_zeta,
            ghosts,
            free,
            n_free,
        })
    }

    pub fn fcifem(&self) -> &FcifemSpace {
        &self.fci
    }

    /// Field-aligned node of hat node `(i, j)`.
    fn node(&self, i: i64, j: i64) -> usize {
        let nz = self.fci.z_axis().n_nodes();
        (i as usize + self.ghosts[0]) * nz + j as usize + self.ghosts[1]
    }

    /// Ramp value and `(R, Z)` gradient.
    pub fn ramp(&self, rz: [f64; 2]) -> (f64, [f64; 2]) {
        let (Some(ra), Some(za)) = (self.hat_r.active(rz[0]), self.hat_z.active(rz[1])) else {
            return (0.0, [0.0; 2]);
        };
        let (mr, mz) = (self.hat_r.n_nodes() as i64 - 1, self.hat_z.n_nodes() as i64 - 1);
        let (mut b, mut g) = (0.0, [0.0; 2]);
        for (i, vr, dr) in ra.iter() {
            for (j, vz, dz) in za.iter() {
                if i == 0 || j == 0 || i == mr || j == mz {
                    b += vr * vz;
                    g[0] += dr * vz;
                    g[1] += vr * dz;
                }
            }
        }
        (b, g)
    }

    /// Blended terms over all nodes, including the eliminated boundary ones.
    fn blend(&self, rz: [f64; 2], zetas: &[f64], out: &mut [TermList]) {
        let (b, gb) = self.ramp(rz);
        if b == 0.0 && gb == [0.0; 2] {
            return;
        }
        let (ra, za) = (
            self.hat_r.active(rz[0]).expect("inside domain"),
            self.hat_z.active(rz[1]).expect("inside domain"),
        );
        for (list, &zeta) in out.iter_mut().zip(zetas) {
            for t in list.as_mut_slice() {
                let v = t.value;
                t.value *= 1.0 - b;
                t.grad[0] = (1.0 - b) * t.grad[0] - v * gb[0];
                t.grad[1] = (1.0 - b) * t.grad[1] - v * gb[1];
                t.grad[2] *= 1.0 - b;
            }
            let ka = self.hat_zeta.active(zeta).expect("periodic axis");
            for (i, vr, dr) in ra.iter() {
                for (j, vz, dz) in za.iter() {
                    let node = self.node(i, j) as u32;
                    for (m, vk, dk) in ka.iter() {
                        let k = vr * vz * vk;
                        let gk = [dr * vz * vk, vr * dz * vk, vr * vz * dk];
                        list.add(Term {
                            node,
                            plane: self.hat_zeta.wrap(m) as u32,
                            value: b * k,
                            grad: [k * gb[0] + b * gk[0], k * gb[1] + b * gk[1], b * gk[2]],
                        });
                    }
                }
            }
        }
    }

    /// Value at `x` of the blended function with coefficients on every node
    /// (boundary nodes included), laid out as `plane * n_nodes2d + node`.
    pub fn evaluate_all_nodes(&self, coeffs: &[f64], x: [f64; 3]) -> Result<f64> {
        crate::space::check_len(coeffs, self.n_nodes2d() * self.n_planes())?;
        self.check_point(x)?;
        let mut out = [TermList::default()];
        self.column_terms([x[0], x[1]], &[x[2]], &mut ColumnScratch::default(), &mut out);
        let n2 = self.n_nodes2d();
        Ok(out[0].value(coeffs, |t| Some(t.plane as usize * n2 + t.node as usize)))
    }
}

impl Discretization for BlendedSpace {
    fn r_axis(&self) -> Option<&Spline1D> {
        self.fci.r_axis()
    }

    fn z_axis(&self) -> &Spline1D {
        self.fci.z_axis()
    }

    fn zeta_axis(&self) -> &Spline1D {
        self.fci.zeta_axis()
    }

    fn n_nodes2d(&self) -> usize {
        self.free.len()
    }

    fn n_free2d(&self) -> usize {
        self.n_free
    }

    fn free_index(&self, node: usize) -> Option<usize> {
        let f = self.free[node];
        (f != u32::MAX).then_some(f as usize)
    }

    fn column_terms(&self, rz: [f64; 2], zetas: &[f64], scratch: &mut ColumnScratch, out: &mut [TermList]) {
        self.fci.fci_terms(rz, zetas, scratch, out);
        self.blend(rz, zetas, out);
    }
}
