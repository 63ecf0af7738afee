//! Reverse Cuthill-McKee ordering.

use std::collections::VecDeque;

use crate::sparse::CsrMatrix;

/// Bandwidth-reducing symmetric permutation (`perm[new] = old`) of a
/// structurally symmetric matrix. Each connected component starts from a
/// pseudo-peripheral node; neighbours are visited by increasing degree. The
/// natural order is returned if it is already at least as narrow.
pub fn reorder_rcm(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let degree: Vec<usize> = (0..n).map(|r| a.row(r).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(a, seed, &degree);
        let start = order.len();
        visited[root] = true;
        order.push(root);
        let mut head = start;
        let mut nbrs = Vec::new();
        while head < order.len() {
            let v = order[head];
            head += 1;
            nbrs.clear();
            nbrs.extend(a.row(v).0.iter().copied().filter(|&u| !visited[u]));
            nbrs.sort_by_key(|&u| (degree[u], u));
            for &u in &nbrs {
                visited[u] = true;
                order.push(u);
            }
        }
    }
    order.reverse();
    if a.permute_symmetric(&order).bandwidth() <= a.bandwidth() {
        order
    } else {
        (0..n).collect()
    }
}

/// Repeated breadth-first searches from the farthest, lowest-degree node of
/// the previous search until the eccentricity stops growing.
fn pseudo_peripheral(a: &CsrMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut root = seed;
    let mut ecc = 0;
    loop {
        let (levels, far) = bfs_levels(a, root, degree);
        if levels <= ecc {
            return root;
        }
        ecc = levels;
        root = far;
    }
}

fn bfs_levels(a: &CsrMatrix, root: usize, degree: &[usize]) -> (usize, usize) {
    let mut dist = vec![usize::MAX; a.n_rows()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let (mut depth, mut far) = (0, root);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > depth || (d == depth && degree[v] < degree[far]) {
            depth = d;
            far = v;
        }
        for &u in a.row(v).0 {
            if dist[u] == usize::MAX {
                dist[u] = d + 1;
                queue.push_back(u);
            }
        }
    }
    (depth, far)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_2d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let r = i * n + j;
                t.push((r, r, 4.0));
                if i > 0 {
                    t.push((r, r - n, -1.0));
                }
                if i + 1 < n {
                    t.push((r, r + n, -1.0));
                }
                if j > 0 {
                    t.push((r, r - 1, -1.0));
                }
                if j + 1 < n {
                    t.push((r, r + 1, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(n * n, n * n, t).unwrap()
    }

    #[test]
    fn is_a_permutation_and_never_widens() {
        let a = laplacian_2d(7);
        // Scramble, then reorder.
        let scramble: Vec<usize> = (0..49).map(|i| (i * 19) % 49).collect();
        let s = a.permute_symmetric(&scramble);
        let p = reorder_rcm(&s);
        let mut sorted = p.clone();
        sorted.sort();
        assert_eq!(sorted, (0..49).collect::<Vec<_>>());
        assert!(s.permute_symmetric(&p).bandwidth() < s.bandwidth());
        assert!(s.permute_symmetric(&p).bandwidth() <= 8);
    }

    #[test]
    fn tridiagonal_and_diagonal() {
        let tri = CsrMatrix::from_triplets(
            5,
            5,
            (0..5).flat_map(|i| [(i, i, 2.0)].into_iter().chain((i > 0).then(|| [(i, i - 1, -1.0), (i - 1, i, -1.0)]).into_iter().flatten())).collect(),
        )
        .unwrap();
        assert_eq!(tri.permute_symmetric(&reorder_rcm(&tri)).bandwidth(), 1);
        let d = CsrMatrix::identity(6);
        assert_eq!(d.permute_symmetric(&reorder_rcm(&d)).bandwidth(), 0);
    }
}
