//! Compressed sparse row matrices.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from raw arrays; column indices must be sorted and unique within
    /// each row.
    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 || col_idx.len() != values.len() || row_ptr[n_rows] != values.len() {
            return Err(Error::Dimension("inconsistent CSR arrays".into()));
        }
        for r in 0..n_rows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.last().is_some_and(|&c| c >= n_cols) {
                return Err(Error::Dimension(format!("row {r} has unsorted or out-of-range columns")));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Sums duplicate entries.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Dimension(format!("entry ({r}, {c}) outside {n_rows}x{n_cols}")));
            }
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::from_raw(n_rows, n_cols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mean_row_nnz(&self) -> f64 {
        self.nnz() as f64 / self.n_rows.max(1) as f64
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, r)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64], exec: Exec) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        let row = |r: usize| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum::<f64>()
        };
        if exec == Exec::Parallel && self.nnz() > 200_000 {
            const CHUNK: usize = 4096;
            let chunks = exec.map(self.n_rows.div_ceil(CHUNK), |c| {
                (c * CHUNK..((c + 1) * CHUNK).min(self.n_rows)).map(row).collect::<Vec<_>>()
            });
            for (c, vals) in chunks.into_iter().enumerate() {
                y[c * CHUNK..c * CHUNK + vals.len()].copy_from_slice(&vals);
            }
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = row(r);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y, Exec::Sequential);
        y
    }

    /// Infinity norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            trip.extend(cols.iter().zip(vals).map(|(&c, &v)| (c, r, v)));
        }
        Self::from_triplets(self.n_cols, self.n_rows, trip).expect("transpose of a valid matrix")
    }

    /// `max |A - A^T|` (entrywise).
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            let (ca, va) = self.row(r);
            let (cb, vb) = t.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ca.len() || j < cb.len() {
                let (a, b) = match (ca.get(i), cb.get(j)) {
                    (Some(&x), Some(&y)) if x == y => {
                        i += 1;
                        j += 1;
                        (va[i - 1], vb[j - 1])
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        i += 1;
                        (va[i - 1], 0.0)
                    }
                    (Some(_), None) => {
                        i += 1;
                        (va[i - 1], 0.0)
                    }
                    _ => {
                        j += 1;
                        (0.0, vb[j - 1])
                    }
                };
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        let t = self.transpose();
        self.row_ptr == t.row_ptr && self.col_idx == t.col_idx
    }

    /// Half bandwidth `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n_rows)
            .flat_map(|r| self.row(r).0.iter().map(move |&c| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    /// Number of entries in the lower envelope (profile) of a symmetric matrix.
    pub fn envelope_size(&self) -> usize {
        (0..self.n_rows)
            .map(|r| r - self.row(r).0.first().copied().unwrap_or(r).min(r) + 1)
            .sum()
    }

    /// `P A P^T` where `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        assert_eq!(self.n_rows, self.n_cols);
        assert_eq!(perm.len(), self.n_rows);
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for &old in perm {
            let (cols, vals) = self.row(old);
            buf.clear();
            buf.extend(cols.iter().zip(vals).map(|(&c, &v)| (inv[c], v)));
            buf.sort_unstable_by_key(|e| e.0);
            col_idx.extend(buf.iter().map(|e| e.0));
            values.extend(buf.iter().map(|e| e.1));
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Removes the rows and columns listed in `drop` (sorted, unique).
    pub fn remove_rows_cols(&self, drop: &[usize]) -> Self {
        let mut keep = vec![usize::MAX; self.n_rows];
        let mut n = 0;
        for (r, k) in keep.iter_mut().enumerate() {
            if drop.binary_search(&r).is_err() {
                *k = n;
                n += 1;
            }
        }
        let mut row_ptr = vec![0];
        let (mut col_idx, mut values) = (Vec::new(), Vec::new());
        for r in 0..self.n_rows {
            if keep[r] == usize::MAX {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if keep[c] != usize::MAX {
                    col_idx.push(keep[c]);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    /// MatrixMarket coordinate format (1-based, general real).
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_matrix_market(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
        let bad = || Error::Dimension("malformed MatrixMarket file".into());
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(bad)?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [n_rows, n_cols, nnz] = header[..] else {
            return Err(bad());
        };
        let mut trip = Vec::with_capacity(nnz);
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            let [r, c, v] = t[..] else { return Err(bad()) };
            let (r, c): (usize, usize) = (r.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?);
            trip.push((r - 1, c - 1, v.parse::<f64>().map_err(|_| bad())?));
        }
        Self::from_triplets(n_rows, n_cols, trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 4.0), (0, 2, 1.0), (2, 0, 1.0), (1, 1, 3.0), (2, 2, 5.0), (2, 2, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn triplets_merge_duplicates() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(2, 2), 6.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![5.0, 3.0, 7.0]);
        assert_eq!(a.bandwidth(), 2);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn permutation_round_trip() {
        let a = sample();
        let p = a.permute_symmetric(&[2, 0, 1]);
        assert_eq!(p.get(0, 0), 6.0);
        assert_eq!(p.get(0, 1), 1.0);
        let back = p.permute_symmetric(&[1, 2, 0]);
        assert_eq!(back, a);
    }

    #[test]
    fn matrix_market_round_trip() {
        let a = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        a.write_matrix_market(&path).unwrap();
        assert_eq!(CsrMatrix::read_matrix_market(&path).unwrap(), a);
    }
}
