//! Midpoint quadrature on a uniformly refined grid.

use serde::Serialize;

use crate::space::Discretization;

/// Cell-centred points on `[lo, hi)` with equal weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl QuadAxis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n > 0 && hi > lo);
        Self { lo, hi, n }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.weight()
    }

    pub fn weight(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.point(i))
    }
}

/// Tensor midpoint rule over the domain of a space. A missing `R` axis counts
/// as a single point of unit weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureGrid {
    pub r: Option<QuadAxis>,
    pub z: QuadAxis,
    pub zeta: QuadAxis,
    /// Points per cell along each axis.
    pub refinement: [usize; 3],
}

impl QuadratureGrid {
    /// `refinement[d]` points per grid cell along axis `d` (`R`, `Z`, `zeta`).
    pub fn for_space<S: Discretization + ?Sized>(space: &S, refinement: [usize; 3]) -> Self {
        let axis = |a: &crate::splines::Spline1D, m: usize| {
            let (lo, hi) = a.domain();
            QuadAxis::new(lo, hi, a.cells() * m.max(1))
        };
        Self {
            r: space.r_axis().map(|a| axis(a, refinement[0])),
            z: axis(space.z_axis(), refinement[1]),
            zeta: axis(space.zeta_axis(), refinement[2]),
            refinement,
        }
    }

    pub fn n_points(&self) -> usize {
        self.r.map_or(1, |a| a.n) * self.z.n * self.zeta.n
    }

    pub fn point_weight(&self) -> f64 {
        self.r.map_or(1.0, |a| a.weight()) * self.z.weight() * self.zeta.weight()
    }

    pub fn volume(&self) -> f64 {
        self.r.map_or(1.0, |a| a.hi - a.lo) * (self.z.hi - self.z.lo) * (self.zeta.hi - self.zeta.lo)
    }

    pub fn n_r(&self) -> usize {
        self.r.map_or(1, |a| a.n)
    }

    pub fn r_point(&self, i: usize) -> f64 {
        self.r.map_or(0.0, |a| a.point(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_length_and_avoid_ends() {
        let a = QuadAxis::new(-1.0, 1.5, 200);
        let total: f64 = (0..a.n).map(|_| a.weight()).sum();
        assert!((total - 2.5).abs() < 1e-12);
        assert!(a.point(0) > -1.0 && a.point(a.n - 1) < 1.5);
    }
}
