//! Envelope (skyline) factorisation of symmetric matrices.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Lower-triangular factor stored row by row from the first nonzero column
/// of each row to the diagonal. `diag` is `None` for a Cholesky factor
/// (`A = L L^T`) and holds `D` for a unit-diagonal `A = L D L^T` factor.
#[derive(Debug, Clone)]
pub struct SkylineFactor {
    first: Vec<usize>,
    ptr: Vec<usize>,
    env: Vec<f64>,
    diag: Option<Vec<f64>>,
}

impl SkylineFactor {
    /// Cholesky factorisation, falling back to `L D L^T` when a pivot is not
    /// positive.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        match Self::cholesky(a) {
            Err(Error::Singular { .. }) => Self::ldlt(a),
            other => other,
        }
    }

    fn load(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows();
        if n != a.n_cols() {
            return Err(Error::Dimension("factorisation needs a square matrix".into()));
        }
        let mut first = Vec::with_capacity(n);
        let mut ptr = vec![0];
        for r in 0..n {
            let f = a.row(r).0.first().copied().unwrap_or(r).min(r);
            first.push(f);
            ptr.push(ptr[r] + r - f + 1);
        }
        let mut env = vec![0.0; ptr[n]];
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= r {
                    env[ptr[r] + c - first[r]] = v;
                }
            }
        }
        Ok(Self {
            first,
            ptr,
            env,
            diag: None,
        })
    }

    pub fn cholesky(a: &CsrMatrix) -> Result<Self> {
        let mut f = Self::load(a)?;
        let n = f.first.len();
        for i in 0..n {
            let fi = f.first[i];
            let (before, rest) = f.env.split_at_mut(f.ptr[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = f.first[j];
                let k0 = fi.max(fj);
                let row_j = &before[f.ptr[j]..f.ptr[j + 1]];
                let s = dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                row_i[j - fi] = (row_i[j - fi] - s) / row_j[j - fj];
            }
            let d = row_i[i - fi] - dot(&row_i[..i - fi], &row_i[..i - fi]);
            if !(d > 0.0) {
                return Err(Error::Singular { pivot: i, value: d });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(f)
    }

    pub fn ldlt(a: &CsrMatrix) -> Result<Self> {
        let mut f = Self::load(a)?;
        let n = f.first.len();
        let scale = a.norm_inf().max(f64::MIN_POSITIVE);
        let mut d = vec![0.0; n];
        for i in 0..n {
            let fi = f.first[i];
            let (before, rest) = f.env.split_at_mut(f.ptr[i]);
            let row_i = &mut rest[..i - fi + 1];
            // First pass stores w_ij = L_ij D_j.
            for j in fi..i {
                let fj = f.first[j];
                let k0 = fi.max(fj);
                let row_j = &before[f.ptr[j]..f.ptr[j + 1]];
                let s = dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                row_i[j - fi] -= s;
            }
            let mut di = row_i[i - fi];
            for j in fi..i {
                let w = row_i[j - fi];
                let l = w / d[j];
                di -= w * l;
                row_i[j - fi] = l;
            }
            if !(di.abs() > 1e-14 * scale) {
                return Err(Error::Singular { pivot: i, value: di });
            }
            d[i] = di;
            row_i[i - fi] = 1.0;
        }
        f.diag = Some(d);
        Ok(f)
    }

    pub fn is_cholesky(&self) -> bool {
        self.diag.is_none()
    }

    pub fn envelope_size(&self) -> usize {
        self.env.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.env[self.ptr[i]..self.ptr[i + 1]];
            let s = dot(&row[..i - fi], &x[fi..i]);
            x[i] = (x[i] - s) / row[i - fi];
        }
        if let Some(d) = &self.diag {
            x.iter_mut().zip(d).for_each(|(x, d)| *x /= d);
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.env[self.ptr[i]..self.ptr[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xk -= l * xi;
            }
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` by envelope factorisation of `P A P^T`, `perm[new] = old`.
pub fn solve_direct_banded(a: &CsrMatrix, b: &[f64], perm: &[usize]) -> Result<Vec<f64>> {
    if b.len() != a.n_rows() || perm.len() != a.n_rows() {
        return Err(Error::Dimension("right-hand side or permutation length".into()));
    }
    let p = a.permute_symmetric(perm);
    let f = SkylineFactor::factor(&p)?;
    let pb: Vec<f64> = perm.iter().map(|&o| b[o]).collect();
    let px = f.solve(&pb);
    let mut x = vec![0.0; b.len()];
    for (new, &old) in perm.iter().enumerate() {
        x[old] = px[new];
    }
    Ok(x)
}
