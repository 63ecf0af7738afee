//! Uniform-knot B-spline bases of order 1 (hat functions) and 2 (quadratic).
//!
//! Node `i` sits at `origin + i * h`. Linear basis function `i` peaks on node
//! `i`; quadratic basis function `i` is centred on node `i`, so its knots lie
//! on the half-integer positions `i - 1.5 .. i + 1.5`.
//!
//! Periodic splines repeat with period `n_nodes * h`. Open splines keep the
//! uniform knots past both ends of `[lo, hi]` and carry `ghosts` extra nodes
//! on each side; functions beyond the last ghost are simply absent. Clamped
//! splines live on
//! `[origin, origin + (n_nodes - 1) h]` and use an open knot vector, so the
//! boundary values are controlled by the first and last coefficients only:
//!
//! * order 1: `0, 0, 1, 2, ..., L-1, L, L`
//! * order 2: `0, 0, 0, 1.5, 2.5, ..., L-1.5, L, L, L`
//!
//! (knots in grid units, `L = n_nodes - 1`). Both give exactly `n_nodes`
//! functions, one per node, and coincide with the uniform bases away from the
//! two ends.
//!
//! Evaluation at a knot uses the right-continuous convention: the active span
//! is the half-open interval `[t_s, t_{s+1})` containing the point. The right
//! end of a clamped domain belongs to the last span.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Clamped,
    Open,
}

/// Values and first derivatives of the basis functions active at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveBasis {
    /// Index of the first active function. Periodic indices are not wrapped.
    pub first: i64,
    pub len: usize,
    pub values: [f64; 3],
    /// Derivatives with respect to the physical coordinate.
    pub derivs: [f64; 3],
}

impl ActiveBasis {
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        (0..self.len).map(move |n| (self.first + n as i64, self.values[n], self.derivs[n]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spline1D {
    order: usize,
    h: f64,
    n_nodes: usize,
    boundary: Boundary,
    origin: f64,
    /// Ghost nodes on each side of an open spline.
    ghosts: usize,
    /// Open knot vector in grid units; empty unless clamped.
    knots: Vec<f64>,
}

impl Spline1D {
    pub fn new(order: usize, h: f64, n_nodes: usize, boundary: Boundary, origin: f64) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(Error::InvalidSpline(format!("order {order} not in {{1, 2}}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidSpline(format!("spacing {h} must be positive")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidSpline("non-finite origin".into()));
        }
        // A periodic axis may carry a single plane: its images still supply
        // the order + 1 active functions.
        let min_nodes = match boundary {
            Boundary::Periodic => 1,
            Boundary::Clamped | Boundary::Open => order + 1,
        };
        if n_nodes < min_nodes {
            return Err(Error::InvalidSpline(format!(
                "{n_nodes} nodes, need at least {min_nodes} for order {order} {boundary:?}"
            )));
        }
        let knots = match boundary {
            Boundary::Clamped => open_knots(order, n_nodes - 1),
            _ => Vec::new(),
        };
        Ok(Self {
            order,
            h,
            n_nodes,
            boundary,
            origin,
            ghosts: 0,
            knots,
        })
    }

    /// Open spline on `[lo, lo + (n_inside - 1) h]` with `ghosts` extra nodes
    /// beyond each end. Node 0 is the outermost ghost on the left.
    pub fn open(order: usize, h: f64, n_inside: usize, ghosts: usize, lo: f64) -> Result<Self> {
        let mut s = Self::new(order, h, n_inside + 2 * ghosts, Boundary::Open, lo - ghosts as f64 * h)?;
        if n_inside < 2 {
            return Err(Error::InvalidSpline("an open spline needs two nodes inside".into()));
        }
        s.ghosts = ghosts;
        Ok(s)
    }

    pub fn periodic(order: usize, h: f64, n_nodes: usize, origin: f64) -> Result<Self> {
        Self::new(order, h, n_nodes, Boundary::Periodic, origin)
    }

    pub fn clamped(order: usize, h: f64, n_nodes: usize, origin: f64) -> Result<Self> {
        Self::new(order, h, n_nodes, Boundary::Clamped, origin)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn ghosts(&self) -> usize {
        self.ghosts
    }

    /// Grid cells spanning the domain.
    pub fn cells(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n_nodes,
            Boundary::Clamped => self.n_nodes - 1,
            Boundary::Open => self.n_nodes - 1 - 2 * self.ghosts,
        }
    }

    pub fn node(&self, i: i64) -> f64 {
        self.origin + i as f64 * self.h
    }

    /// Period for periodic splines, length of the closed domain otherwise.
    pub fn length(&self) -> f64 {
        self.cells() as f64 * self.h
    }

    /// The period, or the closed domain (excluding ghost nodes).
    pub fn domain(&self) -> (f64, f64) {
        let lo = self.origin + self.ghosts as f64 * self.h;
        (lo, lo + self.length())
    }

    pub fn contains(&self, x: f64) -> bool {
        match self.boundary {
            Boundary::Periodic => x.is_finite(),
            _ => {
                let (lo, hi) = self.domain();
                x >= lo && x <= hi
            }
        }
    }

    /// Wraps an unwrapped basis index into `0..n_nodes`.
    pub fn wrap(&self, i: i64) -> usize {
        i.rem_euclid(self.n_nodes as i64) as usize
    }

    /// Stored index of an active function: wrapped when periodic, `None` when
    /// an open spline has no node there.
    pub fn index(&self, i: i64) -> Option<usize> {
        match self.boundary {
            Boundary::Periodic => Some(self.wrap(i)),
            _ => (0..self.n_nodes as i64).contains(&i).then_some(i as usize),
        }
    }

    /// All basis functions active at `x`, or `None` when `x` lies outside a
    /// clamped domain. Open splines report the full uniform set; indices
    /// without a node are filtered through [`Spline1D::index`].
    pub fn active(&self, x: f64) -> Option<ActiveBasis> {
        let t = (x - self.origin) / self.h;
        if !t.is_finite() {
            return None;
        }
        match self.boundary {
            Boundary::Periodic | Boundary::Open => Some(uniform_active(self.order, t, 1.0 / self.h)),
            Boundary::Clamped => {
                let l = (self.n_nodes - 1) as f64;
                if t < 0.0 || t > l {
                    return None;
                }
                Some(clamped_active(&self.knots, self.order, self.n_nodes, t, 1.0 / self.h))
            }
        }
    }

    fn active_checked(&self, x: f64) -> Result<ActiveBasis> {
        self.active(x).ok_or_else(|| {
            let (lo, hi) = self.domain();
            Error::OutOfDomain { x, lo, hi }
        })
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n_nodes {
            return Err(Error::IndexOutOfRange { index: i, n: self.n_nodes });
        }
        Ok(())
    }

    /// Value of basis function `i` at `x`.
    pub fn eval_basis(&self, i: usize, x: f64) -> Result<f64> {
        self.check_index(i)?;
        let active = self.active_checked(x)?;
        Ok(active
            .iter()
            .filter(|&(j, _, _)| self.index(j) == Some(i))
            .map(|(_, v, _)| v)
            .sum())
    }

    /// Derivative of basis function `i` at `x` (right-continuous at knots).
    pub fn eval_basis_deriv(&self, i: usize, x: f64) -> Result<f64> {
        self.check_index(i)?;
        let active = self.active_checked(x)?;
        Ok(active
            .iter()
            .filter(|&(j, _, _)| self.index(j) == Some(i))
            .map(|(_, _, d)| d)
            .sum())
    }

    /// Index range `(first, last)` of the basis functions on the active span at
    /// `x`. For periodic splines both ends are wrapped, so `last < first` when
    /// the range straddles the end of the period.
    pub fn nonzero_range(&self, x: f64) -> Result<(usize, usize)> {
        let active = self.active_checked(x)?;
        let mut first = active.first;
        let mut last = first + active.len as i64 - 1;
        if !self.is_periodic() {
            first = first.max(0);
            last = last.min(self.n_nodes as i64 - 1);
        }
        Ok((self.wrap(first), self.wrap(last)))
    }
}

fn open_knots(order: usize, cells: usize) -> Vec<f64> {
    let l = cells as f64;
    let mut knots = vec![0.0; order + 1];
    match order {
        1 => knots.extend((1..cells).map(|j| j as f64)),
        _ => knots.extend((1..cells.saturating_sub(1)).map(|j| j as f64 + 0.5)),
    }
    knots.extend(std::iter::repeat(l).take(order + 1));
    knots
}

/// Closed-form uniform basis; `scale` converts d/dt into d/dx.
pub(crate) fn uniform_active(order: usize, t: f64, scale: f64) -> ActiveBasis {
    match order {
        1 => {
            let j = t.floor();
            let u = t - j;
            ActiveBasis {
                first: j as i64,
                len: 2,
                values: [1.0 - u, u, 0.0],
                derivs: [-scale, scale, 0.0],
            }
        }
        _ => {
            // Knots sit at half-integers, so the span around node j is
            // [j - 1/2, j + 1/2).
            let j = (t + 0.5).floor();
            let u = t + 0.5 - j;
            let w = 1.0 - u;
            ActiveBasis {
                first: j as i64 - 1,
                len: 3,
                values: [0.5 * w * w, 0.5 + u * w, 0.5 * u * u],
                derivs: [-w * scale, (1.0 - 2.0 * u) * scale, u * scale],
            }
        }
    }
}

fn clamped_active(knots: &[f64], order: usize, n_basis: usize, t: f64, scale: f64) -> ActiveBasis {
    let span = knots
        .partition_point(|&k| k <= t)
        .saturating_sub(1)
        .clamp(order, n_basis - 1);

    // Cox-de Boor triangle; keep the degree p - 1 row for the derivative.
    let mut lower = [0.0; 3];
    let mut vals = [0.0; 3];
    vals[0] = 1.0;
    let mut left = [0.0; 3];
    let mut right = [0.0; 3];
    for j in 1..=order {
        if j == order {
            lower = vals;
        }
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { vals[r] / denom } else { 0.0 };
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }

    // N'_{i,p} = p N_{i,p-1} / (t_{i+p} - t_i) - p N_{i+1,p-1} / (t_{i+p+1} - t_{i+1});
    // lower[r] holds N_{span-p+1+r, p-1}.
    let p = order as f64;
    let first = span - order;
    let mut derivs = [0.0; 3];
    for (r, d) in derivs.iter_mut().enumerate().take(order + 1) {
        let i = first + r;
        let mut acc = 0.0;
        if r >= 1 {
            let denom = knots[i + order] - knots[i];
            if denom != 0.0 {
                acc += p * lower[r - 1] / denom;
            }
        }
        if r < order {
            let denom = knots[i + order + 1] - knots[i + 1];
            if denom != 0.0 {
                acc -= p * lower[r] / denom;
            }
        }
        *d = acc * scale;
    }

    ActiveBasis {
        first: first as i64,
        len: order + 1,
        values: vals,
        derivs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lin(n: usize) -> Spline1D {
        Spline1D::periodic(1, 1.0, n, 0.0).unwrap()
    }

    fn quad(n: usize) -> Spline1D {
        Spline1D::periodic(2, 1.0, n, 0.0).unwrap()
    }

    #[test]
    fn hat_function_values() {
        let s = lin(10);
        assert_eq!(s.eval_basis(0, 0.0).unwrap(), 1.0);
        assert_eq!(s.eval_basis(0, 1.0).unwrap(), 0.0);
        assert_eq!(s.eval_basis(0, -1.0).unwrap(), 0.0);
        assert_eq!(s.eval_basis_deriv(0, 0.5).unwrap(), -1.0);
    }

    #[test]
    fn centred_quadratic_values() {
        let s = quad(10);
        assert_abs_diff_eq!(s.eval_basis(0, 0.0).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval_basis_deriv(0, 0.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval_basis(0, 1.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval_basis(0, 1.0).unwrap(), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn nonzero_ranges() {
        assert_eq!(lin(10).nonzero_range(2.5).unwrap(), (2, 3));
        assert_eq!(quad(10).nonzero_range(2.4).unwrap(), (1, 3));
        // x = 2.5 is a quadratic knot: the right-hand span is used.
        assert_eq!(quad(10).nonzero_range(2.5).unwrap(), (2, 4));
        // Just below the end of the period the range wraps onto node 0.
        let (first, last) = quad(10).nonzero_range(10.0 - 1e-9).unwrap();
        assert_eq!((first, last), (9, 1));
    }

    #[test]
    fn right_continuous_derivative_at_knot() {
        let s = lin(10);
        // Node 1 rises on [0, 1) and falls on [1, 2).
        assert_eq!(s.eval_basis_deriv(1, 1.0).unwrap(), -1.0);
        assert_eq!(s.eval_basis_deriv(1, 1.0 - 1e-12).unwrap(), 1.0);
    }

    #[test]
    fn clamped_domain_errors() {
        let s = Spline1D::clamped(2, 0.5, 5, 1.0).unwrap();
        assert_eq!(s.domain(), (1.0, 3.0));
        assert!(matches!(s.eval_basis(0, 0.9), Err(Error::OutOfDomain { .. })));
        assert!(matches!(s.eval_basis(7, 2.0), Err(Error::IndexOutOfRange { .. })));
        assert!(s.active(3.0).is_some());
        assert!(s.active(3.0 + 1e-12).is_none());
    }

    #[test]
    fn clamped_boundary_is_interpolatory() {
        for order in [1, 2] {
            let s = Spline1D::clamped(order, 0.25, 9, -1.0).unwrap();
            let (lo, hi) = s.domain();
            assert_abs_diff_eq!(s.eval_basis(0, lo).unwrap(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(s.eval_basis(8, hi).unwrap(), 1.0, epsilon = 1e-15);
            for i in 1..8 {
                assert_abs_diff_eq!(s.eval_basis(i, lo).unwrap(), 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(s.eval_basis(i, hi).unwrap(), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn clamped_matches_uniform_in_interior() {
        let c = Spline1D::clamped(2, 1.0, 12, 0.0).unwrap();
        let p = Spline1D::periodic(2, 1.0, 12, 0.0).unwrap();
        for i in 3..9 {
            for x in [i as f64 - 1.2, i as f64 - 0.3, i as f64 + 0.7] {
                assert_abs_diff_eq!(
                    c.eval_basis(i, x).unwrap(),
                    p.eval_basis(i, x).unwrap(),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn open_spline_keeps_uniform_functions_past_the_ends() {
        let s = Spline1D::open(2, 0.5, 5, 2, 1.0).unwrap();
        assert_eq!(s.n_nodes(), 9);
        assert_eq!(s.domain(), (1.0, 3.0));
        assert_eq!(s.cells(), 4);
        assert!(s.contains(1.0) && !s.contains(0.99));
        // Node 2 sits on the left end and is a centred quadratic.
        assert_abs_diff_eq!(s.eval_basis(2, 1.0).unwrap(), 0.75, epsilon = 1e-15);
        // Ghost functions complete the partition of unity at the wall.
        let sum: f64 = (0..9).map(|i| s.eval_basis(i, 1.0).unwrap()).sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
        assert_eq!(s.index(-1), None);
        assert_eq!(s.index(8), Some(8));
        assert_eq!(s.nonzero_range(0.0).unwrap(), (0, 1));
    }

    #[test]
    fn smallest_clamped_quadratic_is_bernstein() {
        let s = Spline1D::clamped(2, 1.0, 3, 0.0).unwrap();
        let x = 0.6;
        let u = x / 2.0;
        assert_abs_diff_eq!(s.eval_basis(0, x).unwrap(), (1.0 - u) * (1.0 - u), epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval_basis(1, x).unwrap(), 2.0 * u * (1.0 - u), epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval_basis(2, x).unwrap(), u * u, epsilon = 1e-15);
    }

    #[test]
    fn single_plane_periodic_is_unity() {
        for order in [1, 2] {
            let s = Spline1D::periodic(order, 0.3, 1, 0.0).unwrap();
            for x in [0.0, 0.1, 0.29, 1.7] {
                assert_abs_diff_eq!(s.eval_basis(0, x).unwrap(), 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(s.eval_basis_deriv(0, x).unwrap(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Spline1D::periodic(3, 1.0, 5, 0.0).is_err());
        assert!(Spline1D::periodic(1, 0.0, 5, 0.0).is_err());
        assert!(Spline1D::clamped(2, 1.0, 2, 0.0).is_err());
        assert!(Spline1D::clamped(1, 1.0, 2, 0.0).is_ok());
    }
}
