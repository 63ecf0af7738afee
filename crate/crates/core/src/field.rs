//! Analytic magnetic fields and field-line tracing.
//!
//! Coordinates are `(R, Z, zeta)` with `zeta` the toroidal direction, into
//! the page when `R` points right and `Z` up; `(R, zeta, Z)` is right-handed.
//! Every field here is independent of `zeta`, so the field-line map from a
//! point depends only on its `(R, Z)` and the toroidal distance travelled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in the `(R, Z)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub r: (f64, f64),
    pub z: (f64, f64),
}

impl Rect {
    pub fn new(r: (f64, f64), z: (f64, f64)) -> Self {
        Self { r, z }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.r.0 && p[0] <= self.r.1 && p[1] >= self.z.0 && p[1] <= self.z.1
    }

    /// Grows each side by `fraction / 2` of the extent, so the result is
    /// `1 + fraction` times larger along each axis.
    pub fn expanded(&self, fraction: f64) -> Self {
        let dr = 0.5 * fraction * (self.r.1 - self.r.0);
        let dz = 0.5 * fraction * (self.z.1 - self.z.0);
        Self {
            r: (self.r.0 - dr, self.r.1 + dr),
            z: (self.z.0 - dz, self.z.1 + dz),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldModel {
    /// Uniform field `B = R^ b_r + Z^ b_z + zeta^ b_zeta`.
    Straight {
        #[serde(default)]
        b_r: f64,
        b_z: f64,
        b_zeta: f64,
    },
    /// `B = b0 zeta^ + zeta^ x grad A` with `A = (R - 1)^2 + Z (Z^2 - 1)`,
    /// a diverted configuration with its X-point at `(1, -1/sqrt 3)`.
    Divertor { b0: f64 },
}

impl FieldModel {
    pub fn straight(b_z: f64, b_zeta: f64) -> Self {
        FieldModel::Straight { b_r: 0.0, b_z, b_zeta }
    }

    pub fn divertor(b0: f64) -> Self {
        FieldModel::Divertor { b0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bz = match *self {
            FieldModel::Straight { b_r, b_z, b_zeta } => {
                if !(b_r.is_finite() && b_z.is_finite()) {
                    return Err(Error::Config("non-finite field component".into()));
                }
                b_zeta
            }
            FieldModel::Divertor { b0 } => b0,
        };
        if bz == 0.0 || !bz.is_finite() {
            return Err(Error::DegenerateField);
        }
        Ok(())
    }

    /// Poloidal flux function, when the field has one.
    pub fn flux(&self, p: [f64; 2]) -> Option<f64> {
        match self {
            FieldModel::Straight { .. } => None,
            FieldModel::Divertor { .. } => {
                let (r, z) = (p[0], p[1]);
                Some((r - 1.0).powi(2) + z * (z * z - 1.0))
            }
        }
    }

    /// `(B_R, B_Z, B_zeta)` at `p`.
    pub fn b(&self, p: [f64; 2]) -> [f64; 3] {
        match *self {
            FieldModel::Straight { b_r, b_z, b_zeta } => [b_r, b_z, b_zeta],
            FieldModel::Divertor { b0 } => {
                let (r, z) = (p[0], p[1]);
                // zeta^ x (A_R R^ + A_Z Z^) = A_Z R^ - A_R Z^
                [3.0 * z * z - 1.0, -2.0 * (r - 1.0), b0]
            }
        }
    }

    /// Field-line slope `d(R, Z)/d zeta` and its Jacobian `d a_i / d x_j`.
    pub fn velocity(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        match *self {
            FieldModel::Straight { b_r, b_z, b_zeta } => {
                ([b_r / b_zeta, b_z / b_zeta], [[0.0; 2]; 2])
            }
            FieldModel::Divertor { b0 } => {
                let (r, z) = (p[0], p[1]);
                let inv = 1.0 / b0;
                (
                    [(3.0 * z * z - 1.0) * inv, -2.0 * (r - 1.0) * inv],
                    [[0.0, 6.0 * z * inv], [-2.0 * inv, 0.0]],
                )
            }
        }
    }

    /// Second toroidal derivative of the field line, `(a . grad) a`.
    pub fn curvature(&self, p: [f64; 2]) -> [f64; 2] {
        let (a, j) = self.velocity(p);
        [
            j[0][0] * a[0] + j[0][1] * a[1],
            j[1][0] * a[0] + j[1][1] * a[1],
        ]
    }
}

/// One classical Runge-Kutta step of the field-line equation.
#[inline]
pub(crate) fn rk4_step(field: &FieldModel, p: [f64; 2], h: f64) -> [f64; 2] {
    let f = |q: [f64; 2]| field.velocity(q).0;
    let k1 = f(p);
    let k2 = f([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]]);
    let k3 = f([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]]);
    let k4 = f([p[0] + h * k3[0], p[1] + h * k3[1]]);
    [
        p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Runge-Kutta step for the position together with its tangent map
/// `J = d pos / d pos0`, which obeys `dJ/dzeta = grad a . J`.
#[inline]
pub(crate) fn rk4_step_tangent(field: &FieldModel, s: &[f64; 6], h: f64) -> [f64; 6] {
    let f = |y: &[f64; 6]| -> [f64; 6] {
        let (a, g) = field.velocity([y[0], y[1]]);
        // y[2..6] = [J00, J01, J10, J11]
        [
            a[0],
            a[1],
            g[0][0] * y[2] + g[0][1] * y[4],
            g[0][0] * y[3] + g[0][1] * y[5],
            g[1][0] * y[2] + g[1][1] * y[4],
            g[1][0] * y[3] + g[1][1] * y[5],
        ]
    };
    let axpy = |y: &[f64; 6], k: &[f64; 6], c: f64| -> [f64; 6] {
        let mut o = *y;
        for (oi, ki) in o.iter_mut().zip(k) {
            *oi += c * ki;
        }
        o
    };
    let k1 = f(s);
    let k2 = f(&axpy(s, &k1, 0.5 * h));
    let k3 = f(&axpy(s, &k2, 0.5 * h));
    let k4 = f(&axpy(s, &k3, h));
    let mut o = *s;
    for i in 0..6 {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

/// End point of a traced field line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub end: [f64; 2],
    /// The trajectory crossed the boundary of the solve domain somewhere
    /// along the way (it may have come back).
    pub left_domain: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tracer {
    pub field: FieldModel,
    /// Solve domain; `None` for periodic or unbounded problems.
    pub domain: Option<Rect>,
    /// Integration stops with an exit event outside this box.
    pub bounding_box: Option<Rect>,
}

impl Tracer {
    /// Tracer whose bounding box is the solve domain enlarged by 20%.
    pub fn new(field: FieldModel, domain: Option<Rect>) -> Self {
        Self {
            field,
            domain,
            bounding_box: domain.map(|d| d.expanded(0.2)),
        }
    }

    /// Fixed-step trace with `steps` steps.
    pub fn trace_steps(&self, start: [f64; 3], zeta_end: f64, steps: usize) -> Result<Trace> {
        let steps = steps.max(1);
        let h = (zeta_end - start[2]) / steps as f64;
        let mut p = [start[0], start[1]];
        let mut left = self.domain.map_or(false, |d| !d.contains(p));
        for n in 0..steps {
            p = rk4_step(&self.field, p, h);
            if let Some(b) = &self.bounding_box {
                if !b.contains(p) {
                    return Err(Error::FieldLineExit {
                        at: [p[0], p[1], start[2] + (n + 1) as f64 * h],
                    });
                }
            }
            if let Some(d) = &self.domain {
                left |= !d.contains(p);
            }
        }
        Ok(Trace {
            end: p,
            left_domain: left,
            steps,
        })
    }

    /// Traces from `start` to the plane `zeta_end`, halving the step until two
    /// successive resolutions agree to `tol` per unit of toroidal distance.
    pub fn trace(&self, start: [f64; 3], zeta_end: f64, tol: f64) -> Result<Trace> {
        self.field.validate()?;
        let length = (zeta_end - start[2]).abs();
        if length == 0.0 {
            let p = [start[0], start[1]];
            return Ok(Trace {
                end: p,
                left_domain: self.domain.map_or(false, |d| !d.contains(p)),
                steps: 0,
            });
        }
        let mut steps = ((length / 0.02).ceil() as usize).max(4);
        let mut coarse = self.trace_steps(start, zeta_end, steps)?;
        loop {
            steps *= 2;
            let fine = self.trace_steps(start, zeta_end, steps)?;
            let diff = dist(coarse.end, fine.end);
            // RK4 halving shrinks the error 16x, so diff / 15 bounds what is left.
            if diff / 15.0 <= tol * length.max(1e-300) || steps > 1 << 22 {
                return Ok(fine);
            }
            coarse = fine;
        }
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Traces the field line through `start` to the plane `zeta_end`.
pub fn trace_field_line(
    field: &FieldModel,
    start: [f64; 3],
    zeta_end: f64,
    tol: f64,
    domain: Option<Rect>,
) -> Result<Trace> {
    Tracer::new(*field, domain).trace(start, zeta_end, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tokamak_domain() -> Rect {
        Rect::new((0.0, 2.0), (-1.0, 1.5))
    }

    #[test]
    fn straight_field_line() {
        let f = FieldModel::straight(1.0, 1.0);
        let t = trace_field_line(&f, [0.0, 0.0, 0.0], std::f64::consts::PI, 1e-12, None).unwrap();
        assert_abs_diff_eq!(t.end[1], std::f64::consts::PI, epsilon = 1e-12);
        assert_eq!(t.end[0], 0.0);
    }

    #[test]
    fn x_point_is_fixed() {
        let f = FieldModel::divertor(1.0);
        let x = [1.0, -1.0 / 3f64.sqrt()];
        let (a, _) = f.velocity(x);
        assert_abs_diff_eq!(a[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-15);
        for zeta_end in [0.05, -0.3, 1.0] {
            let t = trace_field_line(&f, [x[0], x[1], 0.0], zeta_end, 1e-10, Some(tokamak_domain()))
                .unwrap();
            assert_abs_diff_eq!(t.end[0], x[0], epsilon = 1e-10);
            assert_abs_diff_eq!(t.end[1], x[1], epsilon = 1e-10);
        }
    }

    #[test]
    fn flux_is_conserved_along_lines() {
        let f = FieldModel::divertor(1.0);
        for start in [[0.5, 0.0], [1.3, 0.4], [0.36, -1.0], [1.8, -0.2]] {
            let t = trace_field_line(&f, [start[0], start[1], 0.0], 0.1, 1e-11, Some(tokamak_domain()))
                .unwrap();
            let a0 = f.flux(start).unwrap();
            let a1 = f.flux(t.end).unwrap();
            assert!((a0 - a1).abs() < 1e-9, "{start:?}: {a0} vs {a1}");
        }
    }

    #[test]
    fn exit_event_reports_location() {
        let f = FieldModel::divertor(1.0);
        // Near the top wall the line runs quickly out through R = 2.
        let err = trace_field_line(&f, [1.9, 1.4, 0.0], 2.0, 1e-8, Some(tokamak_domain())).unwrap_err();
        match err {
            Error::FieldLineExit { at } => {
                let b = tokamak_domain().expanded(0.2);
                assert!(!b.contains([at[0], at[1]]));
                assert!(at[2] > 0.0 && at[2] < 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tangent_map_matches_finite_difference() {
        let f = FieldModel::divertor(1.0);
        let p = [0.7, 0.3];
        let h = 1e-3;
        let mut s = [p[0], p[1], 1.0, 0.0, 0.0, 1.0];
        for _ in 0..100 {
            s = rk4_step_tangent(&f, &s, h);
        }
        let eps = 1e-6;
        let run = |q: [f64; 2]| {
            let mut q = q;
            for _ in 0..100 {
                q = rk4_step(&f, q, h);
            }
            q
        };
        let pr = run([p[0] + eps, p[1]]);
        let mr = run([p[0] - eps, p[1]]);
        let pz = run([p[0], p[1] + eps]);
        let mz = run([p[0], p[1] - eps]);
        assert_abs_diff_eq!(s[2], (pr[0] - mr[0]) / (2.0 * eps), epsilon = 1e-7);
        assert_abs_diff_eq!(s[4], (pr[1] - mr[1]) / (2.0 * eps), epsilon = 1e-7);
        assert_abs_diff_eq!(s[3], (pz[0] - mz[0]) / (2.0 * eps), epsilon = 1e-7);
        assert_abs_diff_eq!(s[5], (pz[1] - mz[1]) / (2.0 * eps), epsilon = 1e-7);
    }

    #[test]
    fn degenerate_field_rejected() {
        assert!(FieldModel::straight(1.0, 0.0).validate().is_err());
        assert!(FieldModel::divertor(0.0).validate().is_err());
    }
}
