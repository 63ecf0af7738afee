//! Linear solvers for the assembled systems and the analytic Fourier oracle.

pub mod cg;
pub mod fourier;
pub mod rcm;
pub mod skyline;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::par::Exec;
use crate::sparse::CsrMatrix;

pub use cg::{solve_cg, CgOptions, CgOutcome};
pub use fourier::{fourier_oracle_2d, sheared_wave_modes, FourierMode, FourierSolution, ModeKind};
pub use rcm::reorder_rcm;
pub use skyline::{solve_direct_banded, SkylineFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Direct envelope factorisation when it fits in memory, otherwise CG.
    #[default]
    Auto,
    Direct,
    Cg,
}

/// Direct solves are attempted below this many envelope entries.
pub const AUTO_DIRECT_ENVELOPE: usize = 60_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: &'static str,
    pub iterations: usize,
    pub relative_residual: f64,
    pub bandwidth_natural: usize,
    pub bandwidth_rcm: usize,
    pub envelope_rcm: usize,
}

/// Solves `A x = b` for symmetric positive (semi-)definite `A`.
///
/// Unknowns whose diagonal vanishes (basis functions with no support in the
/// domain, such as far ghost nodes) are dropped and returned as zero.
///
/// With `null_space` set, `A` is taken to annihilate the constant vector:
/// `b` is projected onto the zero-sum subspace, and the returned `x` has
/// `weights . x = 0` (typically `weights_a = int psi_a`, fixing the mean).
pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    kind: SolverKind,
    null_space: Option<&[f64]>,
    tol: f64,
    exec: Exec,
) -> Result<(Vec<f64>, SolveReport)> {
    let diag = a.diagonal();
    let max = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let dead: Vec<usize> = (0..diag.len()).filter(|&i| diag[i].abs() <= 1e-14 * max).collect();
    if dead.is_empty() || dead.len() == diag.len() {
        return solve_spd_full(a, b, kind, null_space, tol, exec);
    }
    let keep: Vec<usize> = (0..diag.len()).filter(|i| dead.binary_search(i).is_err()).collect();
    let reduced = a.remove_rows_cols(&dead);
    let rb: Vec<f64> = keep.iter().map(|&i| b[i]).collect();
    let rw: Option<Vec<f64>> = null_space.map(|w| keep.iter().map(|&i| w[i]).collect());
    let (rx, report) = solve_spd_full(&reduced, &rb, kind, rw.as_deref(), tol, exec)?;
    let mut x = vec![0.0; diag.len()];
    for (&i, v) in keep.iter().zip(rx) {
        x[i] = v;
    }
    Ok((x, report))
}

fn solve_spd_full(
    a: &CsrMatrix,
    b: &[f64],
    kind: SolverKind,
    null_space: Option<&[f64]>,
    tol: f64,
    exec: Exec,
) -> Result<(Vec<f64>, SolveReport)> {
    let mut rhs = b.to_vec();
    if null_space.is_some() {
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        rhs.iter_mut().for_each(|v| *v -= mean);
    }
    let perm = reorder_rcm(a);
    let permuted = a.permute_symmetric(&perm);
    let bandwidth_natural = a.bandwidth();
    let bandwidth_rcm = permuted.bandwidth();
    let envelope_rcm = permuted.envelope_size();
    let direct = match kind {
        SolverKind::Direct => true,
        SolverKind::Cg => false,
        SolverKind::Auto => envelope_rcm <= AUTO_DIRECT_ENVELOPE,
    };
    let (mut x, method, iterations) = if direct {
        let x = match null_space {
            // Grounding one unknown removes the constant null space; the
            // mean is restored below.
            Some(_) => {
                let reduced = a.remove_rows_cols(&[0]);
                let p = reorder_rcm(&reduced);
                let mut x = solve_direct_banded(&reduced, &rhs[1..], &p)?;
                x.insert(0, 0.0);
                x
            }
            None => solve_direct_banded(a, &rhs, &perm)?,
        };
        (x, "direct", 0)
    } else {
        let out = solve_cg(
            a,
            &rhs,
            &CgOptions {
                tol,
                project_constant: null_space.is_some(),
                exec,
                ..Default::default()
            },
        )?;
        (out.x, "cg", out.iterations)
    };
    if let Some(w) = null_space {
        let shift = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / w.iter().sum::<f64>();
        x.iter_mut().for_each(|v| *v -= shift);
    }
    let r = a.mul_vec(&x);
    let num: f64 = r.iter().zip(&rhs).map(|(r, b)| (r - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    Ok((
        x,
        SolveReport {
            method,
            iterations,
            relative_residual: num / den,
            bandwidth_natural,
            bandwidth_rcm,
            envelope_rcm,
        },
    ))
}
