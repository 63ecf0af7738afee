//! Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct CgOptions {
    /// Relative residual target `|b - A x| / |b|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep iterates orthogonal to the constant vector (singular systems whose
    /// null space is the constants).
    pub project_constant: bool,
    pub exec: Exec,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            project_constant: false,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

pub fn solve_cg(a: &CsrMatrix, b: &[f64], opts: &CgOptions) -> Result<CgOutcome> {
    let n = a.n_rows();
    if b.len() != n || a.n_cols() != n {
        return Err(Error::Dimension("CG needs a square system".into()));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { f64::NAN }).collect();
    if let Some(i) = inv_diag.iter().position(|d| d.is_nan()) {
        return Err(Error::Breakdown {
            iteration: 0,
            curvature: a.get(i, i),
        });
    }
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            history: vec![0.0],
        });
    }
    let mut r = b.to_vec();
    if opts.project_constant {
        remove_mean(&mut r);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = vec![dot(&r, &r).sqrt() / bnorm];
    for it in 1..=opts.max_iter {
        a.mul_vec_into(&p, &mut ap, opts.exec);
        let curv = dot(&p, &ap);
        if !(curv > 0.0) {
            return Err(Error::Breakdown {
                iteration: it,
                curvature: curv,
            });
        }
        let alpha = rz / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if opts.project_constant {
            remove_mean(&mut r);
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        history.push(res);
        if res < opts.tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                residual: res,
                history,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = *history.last().unwrap();
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual,
        history,
    })
}
