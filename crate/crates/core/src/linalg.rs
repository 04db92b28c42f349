//! Sparse linear solvers for the nonsymmetric tangent-plane systems.
//!
//! The direct path is a banded LU factorisation after reverse Cuthill–McKee
//! renumbering. It does not pivot; this is sound for the systems solved here
//! because their symmetric part is positive definite. The iterative path is
//! restarted GMRES, right-preconditioned with ILU(0).

use sprs::CsMat;

use crate::error::{Error, Result};
use crate::fem::csr_apply;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Direct,
    Iterative,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(Self::Direct),
            "iterative" | "gmres" => Ok(Self::Iterative),
            other => Err(Error::invalid(format!(
                "unknown solver '{other}' (expected direct or iterative)"
            ))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Iterative => "iterative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖` (absolute residual when `b = 0`).
    pub relative_residual: f64,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(a: &CsMat<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = csr_apply(a, x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

fn relative(r: f64, bnorm: f64) -> f64 {
    if bnorm > 0.0 {
        r / bnorm
    } else {
        r
    }
}

/// Reverse Cuthill–McKee ordering of a graph given by sorted adjacency lists.
/// Returns `order` with `order[new] = old`.
pub fn rcm_ordering(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |v: usize| adj[v].len();
    while order.len() < n {
        let seed = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree(v), v)).unwrap();
        let start = pseudo_peripheral(adj, seed, &visited);
        let mut queue = std::collections::VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// BFS levels from `root`, skipping `blocked` vertices.
fn bfs_levels(adj: &[Vec<usize>], root: usize, blocked: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = blocked.to_vec();
    seen[root] = true;
    let mut levels = vec![vec![root]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize, blocked: &[bool]) -> usize {
    let mut root = seed;
    let mut depth = bfs_levels(adj, root, blocked).len();
    loop {
        let levels = bfs_levels(adj, root, blocked);
        let candidate = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&v| (adj[v].len(), v))
            .unwrap();
        let d = bfs_levels(adj, candidate, blocked).len();
        if d <= depth {
            return root;
        }
        depth = d;
        root = candidate;
    }
}

/// Expand a vertex ordering to `block` unknowns per vertex.
pub fn expand_ordering(order: &[usize], block: usize) -> Vec<usize> {
    order
        .iter()
        .flat_map(|&v| (0..block).map(move |c| block * v + c))
        .collect()
}

/// LU factors stored in a dense band of half-width `bw`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    /// row-major, `band[i * (2bw+1) + bw + (j - i)]`
    band: Vec<f64>,
    /// `order[new] = old`
    order: Vec<usize>,
}

impl BandedLu {
    /// Factor `P A Pᵀ` where `P` renumbers unknowns by `order[new] = old`.
    pub fn factor(a: &CsMat<f64>, order: &[usize]) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n || order.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: order.len(),
            });
        }
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        if inv.contains(&usize::MAX) {
            return Err(Error::invalid("ordering is not a permutation"));
        }
        let mut bw = 0;
        for (i, row) in a.outer_iterator().enumerate() {
            for (j, _) in row.iter() {
                bw = bw.max(inv[i].abs_diff(inv[j]));
            }
        }
        let width = 2 * bw + 1;
        let mut band = vec![0.0; n * width];
        for (i, row) in a.outer_iterator().enumerate() {
            let pi = inv[i];
            for (j, &v) in row.iter() {
                let pj = inv[j];
                band[pi * width + bw + pj - pi] += v;
            }
        }
        for k in 0..n {
            let pivot = band[k * width + bw];
            if !pivot.is_finite() || pivot.abs() < f64::MIN_POSITIVE {
                return Err(Error::SolverFailure {
                    residual: f64::INFINITY,
                    iterations: 0,
                    tol: 0.0,
                });
            }
            let last = (k + bw).min(n - 1);
            for i in (k + 1)..=last {
                let lik_idx = i * width + bw + k - i;
                let l = band[lik_idx] / pivot;
                if l == 0.0 {
                    continue;
                }
                band[lik_idx] = l;
                let (upper, lower) = band.split_at_mut(i * width);
                let krow = &upper[k * width..(k + 1) * width];
                let irow = &mut lower[..width];
                for j in (k + 1)..=last {
                    irow[bw + j - i] -= l * krow[bw + j - k];
                }
            }
        }
        Ok(Self {
            n,
            bw,
            band,
            order: order.to_vec(),
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        let mut y: Vec<f64> = self.order.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let row = &self.band[i * width..(i + 1) * width];
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= row[bw + k - i] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let row = &self.band[i * width..(i + 1) * width];
            let mut s = y[i];
            for j in (i + 1)..=(i + bw).min(n - 1) {
                s -= row[bw + j - i] * y[j];
            }
            y[i] = s / row[bw];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Direct solve with up to three steps of iterative refinement.
pub fn solve_direct(a: &CsMat<f64>, b: &[f64], order: &[usize], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let lu = BandedLu::factor(a, order)?;
    let bnorm = norm2(b);
    let mut x = lu.solve(b);
    let mut r = residual(a, &x, b);
    let mut rel = relative(norm2(&r), bnorm);
    let mut iterations = 1;
    while rel > 0.01 * tol && iterations < 4 {
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        r = residual(a, &x, b);
        let next = relative(norm2(&r), bnorm);
        iterations += 1;
        if !(next < rel) {
            rel = next;
            break;
        }
        rel = next;
    }
    if !(rel <= tol) {
        return Err(Error::SolverFailure {
            residual: rel,
            iterations,
            tol,
        });
    }
    Ok((
        x,
        SolveStats {
            iterations,
            relative_residual: rel,
        },
    ))
}

/// Incomplete LU with the sparsity pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsMat<f64>) -> Result<Self> {
        let a = if a.is_csr() { a.clone() } else { a.to_csr() };
        let n = a.rows();
        let indptr: Vec<usize> = a.indptr().as_slice().expect("contiguous indptr").to_vec();
        let indices = a.indices().to_vec();
        let mut values = a.data().to_vec();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for p in indptr[i]..indptr[i + 1] {
                if indices[p] == i {
                    diag[i] = p;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::SolverFailure {
                    residual: f64::INFINITY,
                    iterations: 0,
                    tol: 0.0,
                });
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for p in indptr[i]..indptr[i + 1] {
                pos[indices[p]] = p;
            }
            for p in indptr[i]..indptr[i + 1] {
                let k = indices[p];
                if k >= i {
                    break;
                }
                let l = values[p] / values[diag[k]];
                values[p] = l;
                for q in (diag[k] + 1)..indptr[k + 1] {
                    let j = indices[q];
                    if pos[j] != usize::MAX {
                        values[pos[j]] -= l * values[q];
                    }
                }
            }
            for p in indptr[i]..indptr[i + 1] {
                pos[indices[p]] = usize::MAX;
            }
            if values[diag[i]].abs() < f64::MIN_POSITIVE {
                return Err(Error::SolverFailure {
                    residual: f64::INFINITY,
                    iterations: 0,
                    tol: 0.0,
                });
            }
        }
        Ok(Self {
            indptr,
            indices,
            values,
            diag,
        })
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y = r.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in self.indptr[i]..self.diag[i] {
                s -= self.values[p] * y[self.indices[p]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in (self.diag[i] + 1)..self.indptr[i + 1] {
                s -= self.values[p] * y[self.indices[p]];
            }
            y[i] = s / self.values[self.diag[i]];
        }
        y
    }
}

/// Restarted GMRES(`restart`) with right ILU(0) preconditioning.
pub fn solve_gmres(
    a: &CsMat<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let a = if a.is_csr() { a.clone() } else { a.to_csr() };
    let n = b.len();
    let restart = restart.max(1);
    let m_inv = Ilu0::new(&a)?;
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = residual(&a, &x, b);
    let mut rel = relative(norm2(&r), bnorm);
    let mut iterations = 0;
    while rel > tol && iterations < max_iter {
        let beta = norm2(&r);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let z = m_inv.apply(&v[k]);
            let mut w = csr_apply(&a, &z);
            // modified Gram–Schmidt
            for (j, vj) in v.iter().enumerate() {
                let hjk: f64 = w.iter().zip(vj).map(|(a, b)| a * b).sum();
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vi;
                }
            }
            let wn = norm2(&w);
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            if relative(g[k + 1].abs(), bnorm) <= 0.1 * tol || wn == 0.0 || iterations >= max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = ((i + 1)..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (u, vv) in update.iter_mut().zip(vi) {
                *u += yi * vv;
            }
        }
        for (xi, d) in x.iter_mut().zip(m_inv.apply(&update)) {
            *xi += d;
        }
        r = residual(&a, &x, b);
        rel = relative(norm2(&r), bnorm);
    }
    if !(rel <= tol) {
        return Err(Error::SolverFailure {
            residual: rel,
            iterations,
            tol,
        });
    }
    Ok((
        x,
        SolveStats {
            iterations,
            relative_residual: rel,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use sprs::TriMat;

    /// Grid Laplacian plus a skew convection part: nonsymmetric, positive
    /// definite symmetric part.
    fn test_matrix(nx: usize, skew: f64, shift: f64) -> (CsMat<f64>, Vec<Vec<usize>>) {
        let n = nx * nx;
        let mut t = TriMat::new((n, n));
        let mut adj = vec![Vec::new(); n];
        for i in 0..nx {
            for j in 0..nx {
                let p = i * nx + j;
                t.add_triplet(p, p, 4.0 + shift);
                let mut link = |q: usize, s: f64| {
                    t.add_triplet(p, q, -1.0 + s);
                    adj[p].push(q);
                };
                if i > 0 {
                    link(p - nx, skew);
                }
                if i + 1 < nx {
                    link(p + nx, -skew);
                }
                if j > 0 {
                    link(p - 1, 0.5 * skew);
                }
                if j + 1 < nx {
                    link(p + 1, -0.5 * skew);
                }
            }
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        (t.to_csr(), adj)
    }

    fn rhs(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn rcm_is_a_permutation_and_reduces_bandwidth() {
        let (a, adj) = test_matrix(12, 0.3, 0.1);
        let order = rcm_ordering(&adj);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..144).collect::<Vec<_>>());
        let lu = BandedLu::factor(&a, &order).unwrap();
        assert!(lu.bandwidth() <= 13, "bandwidth {}", lu.bandwidth());
    }

    #[test]
    fn rcm_handles_disconnected_graphs() {
        let adj = vec![vec![1], vec![0], vec![3], vec![2], vec![]];
        let mut order = rcm_ordering(&adj);
        order.sort_unstable();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn banded_lu_solves_to_tolerance() {
        let (a, adj) = test_matrix(10, 0.4, 0.05);
        let b = rhs(100, 3);
        let (x, stats) = solve_direct(&a, &b, &rcm_ordering(&adj), 1e-12).unwrap();
        let r = residual(&a, &x, &b);
        assert!(norm2(&r) / norm2(&b) <= 1e-12);
        assert!(stats.relative_residual <= 1e-12);
    }

    #[test]
    fn block_expansion_matches_vertex_order() {
        assert_eq!(expand_ordering(&[2, 0, 1], 2), vec![4, 5, 0, 1, 2, 3]);
    }

    #[test]
    fn gmres_agrees_with_direct() {
        let (a, adj) = test_matrix(9, 0.8, 0.0);
        let b = rhs(81, 11);
        let (xd, _) = solve_direct(&a, &b, &rcm_ordering(&adj), 1e-12).unwrap();
        let (xg, stats) = solve_gmres(&a, &b, None, 1e-11, 30, 500).unwrap();
        assert!(stats.iterations > 0);
        for (p, q) in xd.iter().zip(&xg) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn gmres_reports_failure_when_budget_is_too_small() {
        let (a, _) = test_matrix(12, 0.8, 0.0);
        let b = rhs(144, 2);
        match solve_gmres(&a, &b, None, 1e-14, 1, 1) {
            Err(Error::SolverFailure { iterations, .. }) => assert_eq!(iterations, 1),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let (a, adj) = test_matrix(4, 0.2, 0.0);
        let (x, _) = solve_direct(&a, &[0.0; 16], &rcm_ordering(&adj), 1e-10).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        let (x, stats) = solve_gmres(&a, &[0.0; 16], None, 1e-10, 10, 10).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solver_kind_parses() {
        assert_eq!("Direct".parse::<SolverKind>().unwrap(), SolverKind::Direct);
        assert_eq!("iterative".parse::<SolverKind>().unwrap(), SolverKind::Iterative);
        assert!("cholesky".parse::<SolverKind>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ilu0_is_exact_for_tridiagonal(n in 3usize..40, skew in -0.9f64..0.9, seed in any::<u64>()) {
            // no fill-in for a tridiagonal matrix, so ILU(0) is the exact LU
            let mut t = TriMat::new((n, n));
            for i in 0..n {
                t.add_triplet(i, i, 3.0);
                if i > 0 { t.add_triplet(i, i - 1, -1.0 + skew); }
                if i + 1 < n { t.add_triplet(i, i + 1, -1.0 - skew); }
            }
            let a: CsMat<f64> = t.to_csr();
            let b = rhs(n, seed);
            let x = Ilu0::new(&a).unwrap().apply(&b);
            let r = residual(&a, &x, &b);
            prop_assert!(norm2(&r) <= 1e-12 * norm2(&b).max(1.0));
        }
    }
}
