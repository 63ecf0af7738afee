//! Closed-form oracles shared by the integration tests.

#![allow(dead_code)]

use fcifem::assembly::{assemble_bilinear, BilinearForm};
use fcifem::mapping::Mapping;
use fcifem::par::Exec;
use fcifem::quadrature::QuadratureGrid;
use fcifem::space::{Discretization, FcifemSpace};
use fcifem::sparse::CsrMatrix;
use fcifem::splines::Spline1D;

/// Nodes and spacings of the oracle grid.
pub const GRID: [usize; 3] = [5, 6, 5];
pub const SPACING: [f64; 3] = [0.2, 0.15, 2.0 * std::f64::consts::PI / 5.0];

/// Cardinal B-spline Gram entries for offsets 0, 1, ...: mass in units of h,
/// stiffness in units of 1/h.
fn cardinal(order: usize) -> (Vec<f64>, Vec<f64>) {
    match order {
        1 => (vec![2.0 / 3.0, 1.0 / 6.0], vec![2.0, -1.0]),
        2 => (
            vec![66.0 / 120.0, 26.0 / 120.0, 1.0 / 120.0],
            vec![1.0, -1.0 / 3.0, -1.0 / 6.0],
        ),
        _ => unreachable!(),
    }
}

/// Dense periodic 1D Gram matrix (wrapping offsets accumulate).
fn periodic_gram(order: usize, n: usize, h: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (m, k) = cardinal(order);
    let mut mass = vec![vec![0.0; n]; n];
    let mut stiff = vec![vec![0.0; n]; n];
    for i in 0..n {
        for off in -(order as i64)..=order as i64 {
            let j = (i as i64 + off).rem_euclid(n as i64) as usize;
            let o = off.unsigned_abs() as usize;
            mass[i][j] += h * m[o];
            stiff[i][j] += k[o] / h;
        }
    }
    (mass, stiff)
}

fn relative_difference(a: &CsrMatrix, b: &[Vec<f64>]) -> f64 {
    let dense = a.to_dense();
    let scale = b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = dense
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}

/// Tensor product of three dense matrices with the last index fastest.
fn kron3(a: &[Vec<f64>], b: &[Vec<f64>], c: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (na, nb, nc) = (a.len(), b.len(), c.len());
    let n = na * nb * nc;
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (ia, ib, ic) = (i / (nb * nc), (i / nc) % nb, i % nc);
        for j in 0..n {
            let (ja, jb, jc) = (j / (nb * nc), (j / nc) % nb, j % nc);
            out[i][j] = a[ia][ja] * b[ib][jb] * c[ic][jc];
        }
    }
    out
}

fn add(a: &mut [Vec<f64>], b: &[Vec<f64>]) {
    for (x, y) in a.iter_mut().zip(b) {
        for (u, v) in x.iter_mut().zip(y) {
            *u += v;
        }
    }
}

/// Reorders an (R, Z, zeta)-fastest-last tensor into the space's dof order,
/// which is plane-major: dof = plane * n_nodes2d + node.
fn to_dof_order(t: &[Vec<f64>], n2: usize, np: usize) -> Vec<Vec<f64>> {
    let n = n2 * np;
    let dof = |i: usize| (i % np) * n2 + i / np;
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[dof(i)][dof(j)] = t[i][j];
        }
    }
    out
}

pub fn periodic_space(order: usize, n: [usize; 3], h: [f64; 3]) -> FcifemSpace {
    FcifemSpace::new(
        Some(Spline1D::periodic(order, h[0], n[0], 0.3).unwrap()),
        Spline1D::periodic(order, h[1], n[1], -0.2).unwrap(),
        Spline1D::periodic(order, h[2], n[2], 0.0).unwrap(),
        Mapping::Identity,
    )
    .unwrap()
}

fn oracle(order: usize, n: [usize; 3], h: [f64; 3]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let g: Vec<_> = (0..3).map(|d| periodic_gram(order, n[d], h[d])).collect();
    let mass = kron3(&g[0].0, &g[1].0, &g[2].0);
    let mut stiff = kron3(&g[0].1, &g[1].0, &g[2].0);
    add(&mut stiff, &kron3(&g[0].0, &g[1].1, &g[2].0));
    add(&mut stiff, &kron3(&g[0].0, &g[1].0, &g[2].1));
    let n2 = n[0] * n[1];
    (to_dof_order(&mass, n2, n[2]), to_dof_order(&stiff, n2, n[2]))
}

/// Relative (mass, stiffness) difference to the closed form on a small
/// triply periodic grid, at `refinement` quadrature points per cell.
pub fn errors(order: usize, refinement: usize) -> (f64, f64) {
    let (n, h) = (GRID, SPACING);
    let space = periodic_space(order, n, h);
    let q = QuadratureGrid::for_space(&space, [refinement; 3]);
    let mass = assemble_bilinear(&space, &q, BilinearForm::Mass, Exec::Sequential);
    let stiff = assemble_bilinear(&space, &q, BilinearForm::Stiffness, Exec::Sequential);
    assert_eq!(mass.n_rows(), space.n_dofs());
    let (m, k) = oracle(order, n, h);
    (relative_difference(&mass, &m), relative_difference(&stiff, &k))
}
