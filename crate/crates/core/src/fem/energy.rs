//! Discrete P1 functionals `E(u) = ∫ H(Du)^p` and `M(u) = ∫ |u|^p`.

use crate::anisotropy::Norm;
use crate::error::{Error, Result};
use crate::fem::mesh::TriMesh;
use crate::fem::sparse::{SkylineMatrix, SkylinePattern};
use crate::vec2::{Sym2, Vec2};

/// The integrand `W(xi) = H_eps(xi)^p` with `H_eps = (H² + eps²|xi|²)^{1/2}`.
#[derive(Clone, Debug)]
pub struct Density<'a> {
    pub norm: &'a Norm,
    pub p: f64,
    pub eps: f64,
}

impl<'a> Density<'a> {
    pub fn new(norm: &'a Norm, p: f64, eps: f64) -> Self {
        Density { norm, p, eps }
    }

    #[inline]
    fn h_eps(&self, xi: Vec2) -> f64 {
        let h = self.norm.value(xi);
        if self.eps == 0.0 {
            h
        } else {
            (h * h + self.eps * self.eps * xi.norm_sq()).sqrt()
        }
    }

    #[inline]
    fn grad_h_eps(&self, xi: Vec2, he: f64) -> Vec2 {
        if self.eps == 0.0 {
            return self.norm.gradient(xi);
        }
        if he == 0.0 {
            return Vec2::ZERO;
        }
        let h = self.norm.value(xi);
        (self.norm.gradient(xi) * h + xi * (self.eps * self.eps)) * (1.0 / he)
    }

    #[inline]
    pub fn value(&self, xi: Vec2) -> f64 {
        self.h_eps(xi).powf(self.p)
    }

    #[inline]
    pub fn gradient(&self, xi: Vec2) -> Vec2 {
        let he = self.h_eps(xi);
        if he == 0.0 {
            return Vec2::ZERO;
        }
        self.grad_h_eps(xi, he) * (self.p * he.powf(self.p - 1.0))
    }

    /// Hessian of `W`, evaluated at `xi` pushed out to `H_eps >= floor` when
    /// smaller (`W` is `(p-2)`-homogeneous in its Hessian).
    pub fn hessian(&self, xi: Vec2, floor: f64) -> Sym2 {
        let p = self.p;
        let mut he = self.h_eps(xi);
        let mut x = xi;
        if he < floor {
            if he == 0.0 {
                let a = self.norm.alpha();
                return Sym2::identity()
                    .scale(p * (p - 1.0).min(1.0) * floor.powf(p - 2.0) * a * a);
            }
            x = xi * (floor / he);
            he = floor;
        }
        let g = self.grad_h_eps(x, he);
        let h = self.norm.value(x);
        let hess_h = if self.eps == 0.0 {
            self.norm.hessian(x)
        } else {
            self.norm
                .hessian(x)
                .scale(h)
                .add(Sym2::outer(self.norm.gradient(x)))
                .add(Sym2::identity().scale(self.eps * self.eps))
                .add(Sym2::outer(g).scale(-1.0))
                .scale(1.0 / he)
        };
        Sym2::outer(g)
            .scale(p * (p - 1.0) * he.powf(p - 2.0))
            .add(hess_h.scale(p * he.powf(p - 1.0)))
            .clamp_spectrum(0.0)
    }
}

/// P1 space with homogeneous Dirichlet data on a [`TriMesh`].
///
/// Unknowns are the interior nodal values, indexed `0..dim()`.
#[derive(Debug)]
pub struct P1Space<'m> {
    pub mesh: &'m TriMesh,
    dof: Vec<usize>,
    free: Vec<usize>,
    grads: Vec<[Vec2; 3]>,
    areas: Vec<f64>,
    pattern: SkylinePattern,
    load: Vec<f64>,
}

const FIXED: usize = usize::MAX;

impl<'m> P1Space<'m> {
    pub fn new(mesh: &'m TriMesh) -> Result<Self> {
        let mut dof = vec![FIXED; mesh.nodes.len()];
        let mut free = Vec::new();
        for (i, &b) in mesh.boundary.iter().enumerate() {
            if !b {
                dof[i] = free.len();
                free.push(i);
            }
        }
        if free.is_empty() {
            return Err(Error::Mesh("mesh has no interior nodes".to_string()));
        }
        let mut grads = Vec::with_capacity(mesh.triangles.len());
        let mut areas = Vec::with_capacity(mesh.triangles.len());
        let mut adj = vec![Vec::new(); free.len()];
        let mut load = vec![0.0; free.len()];
        for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
            let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
            let area = mesh.triangle_area(t);
            let s = 1.0 / (2.0 * area);
            // ∇φ_a = rot(pc - pb) / 2|T| with outward rotation for CCW order
            let ga = Vec2::new(pb.y - pc.y, pc.x - pb.x) * s;
            let gb = Vec2::new(pc.y - pa.y, pa.x - pc.x) * s;
            let gc = Vec2::new(pa.y - pb.y, pb.x - pa.x) * s;
            grads.push([ga, gb, gc]);
            areas.push(area);
            for &i in &[a, b, c] {
                if dof[i] != FIXED {
                    load[dof[i]] += area / 3.0;
                    for &j in &[a, b, c] {
                        if dof[j] != FIXED && j != i {
                            adj[dof[i]].push(dof[j]);
                        }
                    }
                }
            }
        }
        for nb in &mut adj {
            nb.sort_unstable();
            nb.dedup();
        }
        let pattern = SkylinePattern::from_graph(&adj);
        Ok(P1Space {
            mesh,
            dof,
            free,
            grads,
            areas,
            pattern,
            load,
        })
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// `∫ φ_i` for every free node.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn pattern(&self) -> &SkylinePattern {
        &self.pattern
    }

    /// Nodal vector on the full mesh, zero on the boundary.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.mesh.nodes.len()];
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = x[k];
        }
        u
    }

    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| u[i]).collect()
    }

    #[inline]
    fn local(&self, t: usize, x: &[f64]) -> [f64; 3] {
        let tri = self.mesh.triangles[t];
        tri.map(|i| {
            if self.dof[i] == FIXED {
                0.0
            } else {
                x[self.dof[i]]
            }
        })
    }

    #[inline]
    fn du(&self, t: usize, v: &[f64; 3]) -> Vec2 {
        let g = &self.grads[t];
        g[0] * v[0] + g[1] * v[1] + g[2] * v[2]
    }

    /// `∫ u` of the P1 interpolant.
    pub fn integral(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.load).map(|(a, b)| a * b).sum()
    }

    pub fn energy(&self, w: &Density, x: &[f64]) -> f64 {
        (0..self.areas.len())
            .map(|t| self.areas[t] * w.value(self.du(t, &self.local(t, x))))
            .sum()
    }

    pub fn energy_gradient(&self, w: &Density, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for t in 0..self.areas.len() {
            let dw = w.gradient(self.du(t, &self.local(t, x))) * self.areas[t];
            for (k, &i) in self.mesh.triangles[t].iter().enumerate() {
                let d = self.dof[i];
                if d != FIXED {
                    g[d] += dw.dot(self.grads[t][k]);
                }
            }
        }
        g
    }

    /// Largest `H_eps(Du)` over the elements.
    pub fn max_slope(&self, w: &Density, x: &[f64]) -> f64 {
        (0..self.areas.len())
            .map(|t| w.value(self.du(t, &self.local(t, x))).powf(1.0 / w.p))
            .fold(0.0, f64::max)
    }

    /// Assembled Hessian of `E` with the density Hessian floored at `floor`.
    pub fn energy_hessian(&self, w: &Density, x: &[f64], floor: f64) -> SkylineMatrix<'_> {
        let mut m = self.pattern.matrix();
        for t in 0..self.areas.len() {
            let hs = w
                .hessian(self.du(t, &self.local(t, x)), floor)
                .scale(self.areas[t]);
            self.scatter(&mut m, t, |a, b| a.dot(hs.apply(b)));
        }
        m
    }

    fn scatter(&self, m: &mut SkylineMatrix<'_>, t: usize, f: impl Fn(Vec2, Vec2) -> f64) {
        let tri = self.mesh.triangles[t];
        let g = &self.grads[t];
        for a in 0..3 {
            let da = self.dof[tri[a]];
            if da == FIXED {
                continue;
            }
            for b in 0..=a {
                let db = self.dof[tri[b]];
                if db == FIXED {
                    continue;
                }
                let v = f(g[a], g[b]);
                if a == b || da != db {
                    m.add(da, db, v);
                }
            }
        }
    }

    /// Adds `scale · ∇²M_p(x)` to `m`, with `|u|` floored at `floor` on the
    /// quadrature points.
    pub fn add_mass_hessian(
        &self,
        m: &mut SkylineMatrix<'_>,
        p: f64,
        x: &[f64],
        scale: f64,
        floor: f64,
    ) {
        for t in 0..self.areas.len() {
            let v = self.local(t, x);
            let tri = self.mesh.triangles[t];
            let c = scale * self.areas[t] / 3.0 * p * (p - 1.0) * 0.25;
            for e in 0..3 {
                let (i, j) = (e, (e + 1) % 3);
                let mid = (0.5 * (v[i] + v[j])).abs().max(floor);
                let d = c * mid.powf(p - 2.0);
                let (di, dj) = (self.dof[tri[i]], self.dof[tri[j]]);
                if di != FIXED {
                    m.add(di, di, d);
                }
                if dj != FIXED {
                    m.add(dj, dj, d);
                }
                if di != FIXED && dj != FIXED {
                    m.add(di, dj, d);
                }
            }
        }
    }

    /// Laplacian stiffness `∫ ∇φ_i·∇φ_j`.
    pub fn stiffness(&self) -> SkylineMatrix<'_> {
        let mut m = self.pattern.matrix();
        for t in 0..self.areas.len() {
            let area = self.areas[t];
            self.scatter(&mut m, t, |a, b| area * a.dot(b));
        }
        m
    }

    /// `∫ |u|^p` by the edge-midpoint rule on each triangle.
    pub fn mass_p(&self, p: f64, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for t in 0..self.areas.len() {
            let v = self.local(t, x);
            let m = (0.5 * (v[0] + v[1])).abs().powf(p)
                + (0.5 * (v[1] + v[2])).abs().powf(p)
                + (0.5 * (v[2] + v[0])).abs().powf(p);
            s += self.areas[t] / 3.0 * m;
        }
        s
    }

    pub fn mass_p_gradient(&self, p: f64, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for t in 0..self.areas.len() {
            let v = self.local(t, x);
            let tri = self.mesh.triangles[t];
            let c = self.areas[t] / 3.0 * p * 0.5;
            for e in 0..3 {
                let (i, j) = (e, (e + 1) % 3);
                let mid = 0.5 * (v[i] + v[j]);
                let d = c * mid.abs().powf(p - 1.0) * mid.signum();
                for k in [i, j] {
                    let dk = self.dof[tri[k]];
                    if dk != FIXED {
                        g[dk] += d;
                    }
                }
            }
        }
        g
    }
}
