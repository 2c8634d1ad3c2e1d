//! Symmetric positive definite systems in skyline (envelope) storage with
//! reverse Cuthill–McKee ordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Envelope structure of a symmetric sparsity graph after RCM reordering.
#[derive(Clone, Debug)]
pub struct SkylinePattern {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// `inv[old] = new`.
    inv: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
}

fn bfs_levels(adj: &[Vec<usize>], root: usize, seen: &mut [bool]) -> Vec<usize> {
    let mut order = vec![root];
    seen[root] = true;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
        next.sort_by_key(|&w| (adj[w].len(), w));
        for w in next {
            seen[w] = true;
            order.push(w);
        }
    }
    order
}

fn eccentric(adj: &[Vec<usize>], root: usize) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut q = VecDeque::from([root]);
    let mut far = root;
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                if (dist[w], std::cmp::Reverse(adj[w].len()))
                    > (dist[far], std::cmp::Reverse(adj[far].len()))
                {
                    far = w;
                }
                q.push_back(w);
            }
        }
    }
    (far, dist[far])
}

impl SkylinePattern {
    /// Builds the pattern from an adjacency list (self loops optional).
    pub fn from_graph(adj: &[Vec<usize>]) -> SkylinePattern {
        let n = adj.len();
        let mut seen = vec![false; n];
        let mut cm = Vec::with_capacity(n);
        for s in 0..n {
            if seen[s] {
                continue;
            }
            // pseudo-peripheral root
            let comp = {
                let mut tmp = seen.clone();
                bfs_levels(adj, s, &mut tmp)
            };
            let mut root = *comp.iter().min_by_key(|&&v| (adj[v].len(), v)).unwrap();
            let mut ecc = 0;
            for _ in 0..8 {
                let (far, e) = eccentric(adj, root);
                if e <= ecc {
                    break;
                }
                ecc = e;
                root = far;
            }
            cm.extend(bfs_levels(adj, root, &mut seen));
        }
        let perm: Vec<usize> = cm.into_iter().rev().collect();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, nb) in adj.iter().enumerate() {
            let i = inv[old];
            for &w in nb {
                let j = inv[w];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + i - first[i] + 1);
        }
        SkylinePattern {
            n,
            perm,
            inv,
            first,
            start,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the lower envelope.
    pub fn envelope_size(&self) -> usize {
        self.start[self.n]
    }

    pub fn matrix(&self) -> SkylineMatrix<'_> {
        SkylineMatrix {
            pattern: self,
            values: vec![0.0; self.envelope_size()],
            factored: false,
        }
    }
}

/// Symmetric matrix on a [`SkylinePattern`]; factored in place by Cholesky.
#[derive(Clone, Debug)]
pub struct SkylineMatrix<'a> {
    pattern: &'a SkylinePattern,
    values: Vec<f64>,
    factored: bool,
}

impl SkylineMatrix<'_> {
    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let p = self.pattern;
        debug_assert!(j <= i && j >= p.first[i]);
        p.start[i] + j - p.first[i]
    }

    /// Adds `v` to entry `(a, b)` and its mirror, in original numbering.
    #[inline]
    pub fn add(&mut self, a: usize, b: usize, v: f64) {
        let (i, j) = (self.pattern.inv[a], self.pattern.inv[b]);
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(i, j);
        self.values[s] += v;
    }

    /// `y = A x` in original numbering (before factorization).
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored);
        let p = self.pattern;
        let mut y = vec![0.0; p.n];
        for i in 0..p.n {
            let oi = p.perm[i];
            for j in p.first[i]..=i {
                let a = self.values[self.slot(i, j)];
                if a == 0.0 {
                    continue;
                }
                let oj = p.perm[j];
                y[oi] += a * x[oj];
                if j != i {
                    y[oj] += a * x[oi];
                }
            }
        }
        y
    }

    /// In-place Cholesky `A = L Lᵀ`.
    pub fn factor(&mut self) -> Result<()> {
        let p = self.pattern;
        for i in 0..p.n {
            let fi = p.first[i];
            let si = p.start[i];
            for j in fi..=i {
                let fj = p.first[j];
                let sj = p.start[j];
                let k0 = fi.max(fj);
                let mut s = self.values[si + j - fi];
                let ri = &self.values[si + k0 - fi..si + j - fi];
                let rj = &self.values[sj + k0 - fj..sj + j - fj];
                s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                if j < i {
                    let d = self.values[sj + j - fj];
                    self.values[si + j - fi] = s / d;
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::LinearSolve(format!(
                            "matrix not positive definite at pivot {i} ({s:e})"
                        )));
                    }
                    self.values[si + i - fi] = s.sqrt();
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` with the factored matrix, original numbering.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert!(self.factored, "solve before factor");
        let p = self.pattern;
        let mut y: Vec<f64> = (0..p.n).map(|i| b[p.perm[i]]).collect();
        for i in 0..p.n {
            let fi = p.first[i];
            let si = p.start[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.values[si + k - fi] * y[k];
            }
            y[i] = s / self.values[si + i - fi];
        }
        for i in (0..p.n).rev() {
            let fi = p.first[i];
            let si = p.start[i];
            let xi = y[i] / self.values[si + i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= self.values[si + k - fi] * xi;
            }
        }
        let mut x = vec![0.0; p.n];
        for i in 0..p.n {
            x[p.perm[i]] = y[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_graph(m: usize) -> Vec<Vec<usize>> {
        let id = |i: usize, j: usize| i * m + j;
        let mut adj = vec![Vec::new(); m * m];
        for i in 0..m {
            for j in 0..m {
                if i + 1 < m {
                    adj[id(i, j)].push(id(i + 1, j));
                    adj[id(i + 1, j)].push(id(i, j));
                }
                if j + 1 < m {
                    adj[id(i, j)].push(id(i, j + 1));
                    adj[id(i, j + 1)].push(id(i, j));
                }
            }
        }
        adj
    }

    #[test]
    fn rcm_bandwidth_on_grid() {
        let m = 20;
        let pat = SkylinePattern::from_graph(&grid_graph(m));
        let band = (0..pat.n).map(|i| i - pat.first[i]).max().unwrap();
        assert!(band <= 2 * m, "{band}");
        let mut sorted = pat.perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..m * m).collect::<Vec<_>>());
    }

    #[test]
    fn solves_laplacian_against_dense() {
        let m = 7;
        let adj = grid_graph(m);
        let n = m * m;
        let pat = SkylinePattern::from_graph(&adj);
        let mut a = pat.matrix();
        let mut dense = vec![vec![0.0; n]; n];
        for (i, nb) in adj.iter().enumerate() {
            a.add(i, i, 4.5);
            dense[i][i] += 4.5;
            for &j in nb {
                if j < i {
                    a.add(i, j, -1.0);
                    dense[i][j] -= 1.0;
                    dense[j][i] -= 1.0;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum())
            .collect();
        let bm = a.mul(&x);
        for i in 0..n {
            assert!((bm[i] - b[i]).abs() < 1e-12);
        }
        a.factor().unwrap();
        let xs = a.solve(&b);
        for i in 0..n {
            assert!((xs[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let adj = vec![vec![1], vec![0]];
        let pat = SkylinePattern::from_graph(&adj);
        let mut a = pat.matrix();
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(0, 1, 2.0);
        assert!(matches!(a.factor(), Err(Error::LinearSolve(_))));
    }
}
