//! Sparse direct solver: reverse Cuthill–McKee reordering followed by banded
//! LU with partial pivoting. No symmetry is assumed.

use std::collections::VecDeque;

use super::sparse::{norm2, CsrMatrix};
use super::{FemError, SolveReport};

const PIVOT_FLOOR: f64 = 1e-14;
const RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 2;

fn adjacency(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for nb in &mut adj {
        nb.sort_unstable();
        nb.dedup();
    }
    adj
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut levels = vec![vec![start]];
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

/// Reverse Cuthill–McKee ordering of the symmetrized pattern of `a`.
/// `perm[k]` is the original index placed at position `k`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let adj = adjacency(a);
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let mut start = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        // Pseudo-peripheral start node.
        let mut depth = bfs_levels(&adj, start).len();
        loop {
            let levels = bfs_levels(&adj, start);
            let cand = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&v| (degree[v], v))
                .unwrap();
            let d = bfs_levels(&adj, cand).len();
            if d > depth {
                depth = d;
                start = cand;
            } else {
                break;
            }
        }
        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !placed[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// LU factors of a reordered banded matrix.
#[derive(Debug, Clone)]
pub struct LuFactor {
    matrix: CsrMatrix,
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    /// `perm[k]` = original index at permuted position `k`.
    perm: Vec<usize>,
    /// Row-major band storage of `U`; entry `(r, c)` at `r * width + c - r + kl`.
    band: Vec<f64>,
    /// Multipliers of column `k`: `lmult[k * kl + j - 1]` for row `k + j`.
    lmult: Vec<f64>,
    piv: Vec<usize>,
    replaced_pivots: usize,
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self, FemError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(FemError::Dimension(format!("matrix {}x{} is not square", n, a.ncols())));
        }
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (k, &i) in perm.iter().enumerate() {
            inv[i] = k;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.triplets() {
            let (ip, jp) = (inv[i], inv[j]);
            if ip > jp {
                kl = kl.max(ip - jp);
            } else {
                ku = ku.max(jp - ip);
            }
        }
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for (i, j, v) in a.triplets() {
            let (ip, jp) = (inv[i], inv[j]);
            band[ip * width + jp + kl - ip] += v;
        }
        let floor = PIVOT_FLOOR * a.max_abs().max(f64::MIN_POSITIVE);
        let mut lmult = vec![0.0; n * kl];
        let mut piv = vec![0; n];
        let mut replaced = 0;
        for k in 0..n {
            let last_row = (k + kl).min(n.saturating_sub(1));
            let last_col = (k + kl + ku).min(n.saturating_sub(1));
            let mut p = k;
            let mut best = band[k * width + kl].abs();
            for r in k + 1..=last_row {
                let v = band[r * width + k + kl - r].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[k] = p;
            if p != k {
                for c in k..=last_col {
                    band.swap(k * width + c + kl - k, p * width + c + kl - p);
                }
            }
            let d = k * width + kl;
            if band[d].abs() <= floor {
                band[d] = if band[d] < 0.0 { -floor } else { floor };
                replaced += 1;
            }
            let pivot = band[d];
            let (head, tail) = band.split_at_mut((k + 1) * width);
            let urow = &head[k * width + kl..k * width + kl + (last_col - k) + 1];
            for r in k + 1..=last_row {
                let row = &mut tail[(r - k - 1) * width..(r - k) * width];
                let base = kl + k - r;
                let l = row[base] / pivot;
                lmult[k * kl + (r - k - 1)] = l;
                row[base] = 0.0;
                if l != 0.0 {
                    for (dst, src) in row[base + 1..base + 1 + (last_col - k)].iter_mut().zip(&urow[1..]) {
                        *dst -= l * src;
                    }
                }
            }
        }
        Ok(Self {
            matrix: a.clone(),
            n,
            kl,
            ku,
            width,
            perm,
            band,
            lmult,
            piv,
            replaced_pivots: replaced,
        })
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn replaced_pivots(&self) -> usize {
        self.replaced_pivots
    }

    fn u(&self, r: usize, c: usize) -> f64 {
        self.band[r * self.width + c + self.kl - r]
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for k in 0..n {
            y.swap(k, self.piv[k]);
            let yk = y[k];
            if yk != 0.0 {
                for j in 1..=kl.min(n - 1 - k) {
                    y[k + j] -= self.lmult[k * kl + j - 1] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let last = (k + kl + ku).min(n - 1);
            let row = &self.band[k * self.width + kl..k * self.width + kl + (last - k) + 1];
            let s: f64 = row[1..].iter().zip(&y[k + 1..=last]).map(|(a, x)| a * x).sum();
            y[k] = (y[k] - s) / row[0];
        }
        let mut x = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }

    fn raw_solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut z: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for k in 0..n {
            z[k] /= self.u(k, k);
            let zk = z[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                z[c] -= self.u(k, c) * zk;
            }
        }
        for k in (0..n).rev() {
            let m = kl.min(n - 1 - k);
            let s: f64 = (1..=m).map(|j| self.lmult[k * kl + j - 1] * z[k + j]).sum();
            z[k] -= s;
            z.swap(k, self.piv[k]);
        }
        let mut x = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = z[k];
        }
        x
    }

    fn refine(
        &self,
        b: &[f64],
        solve: impl Fn(&[f64]) -> Vec<f64>,
        apply: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, SolveReport), FemError> {
        if b.len() != self.n {
            return Err(FemError::Dimension(format!("rhs {} for system {}", b.len(), self.n)));
        }
        let tol = RESIDUAL_TOL * (1.0 + norm2(b));
        let mut x = solve(b);
        let residual_of = |x: &[f64]| -> Vec<f64> { b.iter().zip(apply(x)).map(|(bi, ai)| bi - ai).collect() };
        let mut r = residual_of(&x);
        let mut res = norm2(&r);
        let mut refinements = 0;
        while refinements < MAX_REFINEMENTS && res.is_finite() && res > 1e-3 * tol {
            let dx = solve(&r);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let rc = residual_of(&cand);
            let resc = norm2(&rc);
            refinements += 1;
            if resc < res {
                x = cand;
                r = rc;
                res = resc;
            } else {
                break;
            }
        }
        if self.replaced_pivots > 0 || !res.is_finite() || res > tol {
            return Err(FemError::Singular {
                residual: res,
                replaced_pivots: self.replaced_pivots,
            });
        }
        Ok((
            x,
            SolveReport {
                residual: res,
                n: self.n,
                bandwidth: (self.kl, self.ku),
                refinements,
            },
        ))
    }

    /// Solves `A x = b` with up to two steps of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport), FemError> {
        self.refine(b, |r| self.raw_solve(r), |x| self.matrix.matvec(x))
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport), FemError> {
        self.refine(b, |r| self.raw_solve_transpose(r), |x| self.matrix.matvec_transpose(x))
    }
}
