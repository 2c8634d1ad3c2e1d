//! Weighted one-dimensional p-Laplacian problems on a nonuniform grid.
//!
//! Functionals are `N(g) = ∫ |g'|^p w` and `D(g) = ∫ |g|^p w` for
//! piecewise-linear `g` with `g(t_0) = 0`; the right end is free unless
//! `right_dirichlet` is set.

use crate::error::{domain, Error, Result};
use crate::quadrature::GaussRule;

const GAUSS_POINTS: usize = 8;

#[derive(Clone, Debug)]
pub struct Weighted1d {
    t: Vec<f64>,
    /// `∫ w` per cell.
    cell_weight: Vec<f64>,
    /// Per cell: `(xi, omega * h * w(t))`.
    quad: Vec<Vec<(f64, f64)>>,
    right_dirichlet: bool,
    pub p: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves a symmetric tridiagonal system (diagonal `d`, off-diagonal `e`).
fn tridiagonal(d: &[f64], e: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    let mut c = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut piv = d[0];
    if !(piv > 0.0) {
        return Err(Error::LinearSolve("tridiagonal pivot".to_string()));
    }
    y[0] = rhs[0] / piv;
    for i in 1..n {
        c[i - 1] = e[i - 1] / piv;
        piv = d[i] - e[i - 1] * c[i - 1];
        if !(piv > 0.0) {
            return Err(Error::LinearSolve("tridiagonal pivot".to_string()));
        }
        y[i] = (rhs[i] - e[i - 1] * y[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        y[i] -= c[i] * y[i + 1];
    }
    Ok(y)
}

impl Weighted1d {
    pub fn new(
        p: f64,
        t: Vec<f64>,
        weight: impl Fn(f64) -> f64,
        right_dirichlet: bool,
    ) -> Result<Self> {
        if !(p > 1.0) {
            return domain(format!("p must be > 1, got {p}"));
        }
        if t.len() < 3 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("grid must be strictly increasing with at least 3 nodes");
        }
        let rule = GaussRule::new(GAUSS_POINTS);
        let mut cell_weight = Vec::with_capacity(t.len() - 1);
        let mut quad = Vec::with_capacity(t.len() - 1);
        for k in 0..t.len() - 1 {
            let (a, b) = (t[k], t[k + 1]);
            let pts: Vec<(f64, f64)> = rule
                .on(0.0, 1.0)
                .map(|(xi, om)| (xi, om * (b - a) * weight(a + xi * (b - a))))
                .collect();
            cell_weight.push(pts.iter().map(|q| q.1).sum());
            quad.push(pts);
        }
        Ok(Weighted1d {
            t,
            cell_weight,
            quad,
            right_dirichlet,
            p,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    /// Number of unknowns.
    pub fn dim(&self) -> usize {
        self.t.len() - 1 - usize::from(self.right_dirichlet)
    }

    #[inline]
    fn val(&self, g: &[f64], i: usize) -> f64 {
        if i == 0 || i > g.len() {
            0.0
        } else {
            g[i - 1]
        }
    }

    /// Full nodal vector including the fixed ends.
    pub fn expand(&self, g: &[f64]) -> Vec<f64> {
        (0..self.t.len()).map(|i| self.val(g, i)).collect()
    }

    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        (1..=self.dim()).map(|i| nodal[i]).collect()
    }

    fn add(&self, out: &mut [f64], i: usize, v: f64) {
        if i >= 1 && i <= out.len() {
            out[i - 1] += v;
        }
    }

    pub fn numerator(&self, g: &[f64]) -> f64 {
        (0..self.cell_weight.len())
            .map(|k| {
                let s = (self.val(g, k + 1) - self.val(g, k)) / (self.t[k + 1] - self.t[k]);
                self.cell_weight[k] * s.abs().powf(self.p)
            })
            .sum()
    }

    pub fn denominator(&self, g: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.quad.len() {
            let (a, b) = (self.val(g, k), self.val(g, k + 1));
            for &(xi, c) in &self.quad[k] {
                s += c * (a + xi * (b - a)).abs().powf(self.p);
            }
        }
        s
    }

    pub fn numerator_gradient(&self, g: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut out = vec![0.0; g.len()];
        for k in 0..self.cell_weight.len() {
            let h = self.t[k + 1] - self.t[k];
            let s = (self.val(g, k + 1) - self.val(g, k)) / h;
            let f = self.cell_weight[k] * p * s.abs().powf(p - 1.0) * s.signum() / h;
            self.add(&mut out, k + 1, f);
            self.add(&mut out, k, -f);
        }
        out
    }

    pub fn denominator_gradient(&self, g: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut out = vec![0.0; g.len()];
        for k in 0..self.quad.len() {
            let (a, b) = (self.val(g, k), self.val(g, k + 1));
            let (mut da, mut db) = (0.0, 0.0);
            for &(xi, c) in &self.quad[k] {
                let v = a + xi * (b - a);
                let d = c * p * v.abs().powf(p - 1.0) * v.signum();
                da += d * (1.0 - xi);
                db += d * xi;
            }
            self.add(&mut out, k, da);
            self.add(&mut out, k + 1, db);
        }
        out
    }

    fn numerator_hessian(&self, g: &[f64], floor: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let n = g.len();
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n.saturating_sub(1)];
        for k in 0..self.cell_weight.len() {
            let h = self.t[k + 1] - self.t[k];
            let s = ((self.val(g, k + 1) - self.val(g, k)) / h).abs().max(floor);
            let c = self.cell_weight[k] * p * (p - 1.0) * s.powf(p - 2.0) / (h * h);
            for i in [k, k + 1] {
                if i >= 1 && i <= n {
                    d[i - 1] += c;
                }
            }
            if k >= 1 && k < n {
                e[k - 1] -= c;
            }
        }
        (d, e)
    }

    /// Damped Newton for `min (1/p) N(g) − b·g`.
    pub fn minimize(
        &self,
        b: &[f64],
        mut g: Vec<f64>,
        max_iter: usize,
    ) -> Result<(Vec<f64>, bool)> {
        let p = self.p;
        let j = |g: &[f64]| self.numerator(g) / p - dot(b, g);
        let mut jg = j(&g);
        let scale = dot(b, &g).abs().max(f64::MIN_POSITIVE);
        let mut stalled = 0;
        for _ in 0..max_iter {
            let mut grad = self.numerator_gradient(&g);
            for (gi, bi) in grad.iter_mut().zip(b) {
                *gi = *gi / p - bi;
            }
            let smax = (0..self.cell_weight.len())
                .map(|k| {
                    ((self.val(&g, k + 1) - self.val(&g, k)) / (self.t[k + 1] - self.t[k])).abs()
                })
                .fold(0.0, f64::max);
            let (d, e) = self.numerator_hessian(&g, 1e-6 * smax.max(f64::MIN_POSITIVE));
            let mut dir = tridiagonal(&d, &e, &grad)?;
            dir.iter_mut().for_each(|v| *v *= -p);
            let dec = -dot(&grad, &dir);
            if dec <= 1e-16 * scale {
                return Ok((g, true));
            }
            let mut t = 1.0;
            let mut trial = g.clone();
            let mut ok = false;
            for _ in 0..60 {
                for k in 0..g.len() {
                    trial[k] = g[k] + t * dir[k];
                }
                let jt = j(&trial);
                if jt <= jg - 1e-4 * t * dec {
                    stalled = if jt < jg { 0 } else { stalled + 1 };
                    jg = jt;
                    ok = true;
                    break;
                }
                t *= 0.5;
            }
            if !ok || stalled >= 3 {
                return Ok((g, dec <= 1e-10 * scale));
            }
            g = trial;
        }
        Ok((g, false))
    }

    pub fn rayleigh(&self, g: &[f64]) -> f64 {
        self.numerator(g) / self.denominator(g)
    }

    /// First eigenpair by nonlinear inverse iteration from `seed`.
    /// Returns the Rayleigh quotient after every step.
    pub fn first_eigen(
        &self,
        seed: Vec<f64>,
        rtol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.p;
        let norm = |g: Vec<f64>| {
            let m = self.denominator(&g).powf(1.0 / p);
            g.into_iter().map(|v| v / m).collect::<Vec<_>>()
        };
        let mut g = norm(seed);
        let mut lambda = self.numerator(&g);
        let mut history = vec![lambda];
        for _ in 0..max_iter {
            let b: Vec<f64> = self
                .denominator_gradient(&g)
                .iter()
                .map(|v| v / p)
                .collect();
            let start: Vec<f64> = g
                .iter()
                .map(|v| v * lambda.powf(-1.0 / (p - 1.0)))
                .collect();
            let (w, _) = self.minimize(&b, start, 200)?;
            let gn = norm(w);
            let ln = self.numerator(&gn);
            let change = (lambda - ln).abs() / ln;
            g = gn;
            lambda = ln;
            history.push(lambda);
            if change <= rtol {
                break;
            }
        }
        Ok((g, history))
    }
}

/// `∫ u` for the p-torsion function of `(0, a)` on a uniform grid, with
/// one Richardson step from `cells` and `cells / 2`.
pub fn interval_torsion_fem(p: f64, a: f64, cells: usize) -> Result<f64> {
    let solve = |n: usize| -> Result<f64> {
        let t: Vec<f64> = (0..=n).map(|i| a * i as f64 / n as f64).collect();
        let prob = Weighted1d::new(p, t, |_| 1.0, true)?;
        let h = a / n as f64;
        let b = vec![h; prob.dim()];
        let g0: Vec<f64> = (1..=prob.dim())
            .map(|i| {
                let x = i as f64 * h;
                x * (a - x)
            })
            .collect();
        // best multiple of g0: c^{p-1} = b·g0 / ∫|g0'|^p
        let c = (dot(&b, &g0) / prob.numerator(&g0)).powf(1.0 / (p - 1.0));
        let g0: Vec<f64> = g0.into_iter().map(|v| v * c).collect();
        let (g, _) = prob.minimize(&b, g0, 500)?;
        Ok(dot(&b, &g))
    };
    let fine = solve(cells)?;
    let coarse = solve(cells / 2)?;
    Ok(fine + (fine - coarse) / 3.0)
}
