//! p-circular functions: `F_p`, `π_p`, `sin_p`, `cos_p`.
//!
//! With `x_max = (p-1)^{1/p}` the p-sine on `[0, π_p/2]` is the inverse of
//!
//! ```text
//! F_p(x) = ∫_0^x (1 - s^p/(p-1))^{-1/p} ds = x_max · G(x / x_max),
//! G(Y)   = ∫_0^Y (1 - y^p)^{-1/p} dy.
//! ```
//!
//! `G` has an integrable singularity at `Y = 1`. For `Y^p > 1/2` the change of
//! variables `1 - y^p = v^q`, `q = p/(p-1)`, gives
//!
//! ```text
//! G(Y) = G(1) - 1/(p-1) ∫_0^{(1-Y^p)^{1/q}} (1 - v^q)^{1/p - 1} dv
//! ```
//!
//! whose integrand is bounded on the range used, so every quadrature in
//! this module runs over a regular integrand.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::quadrature::{integrate, GaussRule};

const TABLE_SIZE: usize = 4096;
const QUAD_TOL: f64 = 1e-15;

/// Closed form `π_p = 2 (p-1)^{1/p} π / (p sin(π/p))`.
pub fn pi_p_closed_form(p: f64) -> f64 {
    2.0 * (p - 1.0).powf(1.0 / p) * PI / (p * (PI / p).sin())
}

/// `π_p` by quadrature of the desingularized integrals.
pub fn compute_pi_p(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(2.0 * (p - 1.0).powf(1.0 / p) * g_one(p))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return domain(format!("p must satisfy 1 < p < inf, got {p}"));
    }
    Ok(())
}

fn head_integral(p: f64, y: f64) -> f64 {
    integrate(
        |s| (1.0 - s.powf(p)).powf(-1.0 / p),
        0.0,
        y,
        QUAD_TOL,
        QUAD_TOL,
        200,
    )
    .value
}

fn tail_integral(p: f64, s: f64) -> f64 {
    let q = p / (p - 1.0);
    let e = 1.0 / p - 1.0;
    integrate(
        |v| (1.0 - v.powf(q)).powf(e),
        0.0,
        s,
        QUAD_TOL,
        QUAD_TOL,
        200,
    )
    .value
        / (p - 1.0)
}

fn g_one(p: f64) -> f64 {
    let q = p / (p - 1.0);
    head_integral(p, 0.5f64.powf(1.0 / p)) + tail_integral(p, 0.5f64.powf(1.0 / q))
}

/// First eigenvalue `(2k+1)^p` of the mixed Neumann–Dirichlet problem on `[0, π_p/2]`.
pub fn one_d_eigenvalue(p: f64, k: u32) -> f64 {
    (2.0 * k as f64 + 1.0).powf(p)
}

/// First Dirichlet eigenvalue `(π_p/L)^p` of the p-Laplacian on `[0, L]`.
pub fn dirichlet_eigenvalue(p: f64, length: f64) -> Result<f64> {
    check_p(p)?;
    if !(length > 0.0) {
        return domain(format!("interval length must be > 0, got {length}"));
    }
    Ok((pi_p_closed_form(p) / length).powf(p))
}

/// `∫|u'|^p / ∫|u|^p` for the piecewise-linear interpolant of `values` on `nodes`.
///
/// The numerator is exact; the denominator uses 4-point Gauss per cell.
pub fn discrete_rayleigh_quotient(p: f64, nodes: &[f64], values: &[f64]) -> Result<f64> {
    check_p(p)?;
    if nodes.len() != values.len() || nodes.len() < 2 {
        return domain("need matching nodes and values, at least two");
    }
    let rule = GaussRule::new(4);
    let (mut num, mut den) = (0.0, 0.0);
    for (t, u) in nodes.windows(2).zip(values.windows(2)) {
        let dt = t[1] - t[0];
        if !(dt > 0.0) {
            return domain("nodes must increase strictly");
        }
        num += ((u[1] - u[0]) / dt).abs().powf(p) * dt;
        den += rule.integrate(0.0, 1.0, |s| (u[0] + s * (u[1] - u[0])).abs().powf(p)) * dt;
    }
    Ok(num / den)
}

/// Cached evaluation context for one exponent `p`.
///
/// Immutable after construction; the inversion table is built eagerly.
#[derive(Clone, Debug)]
pub struct PTrigContext {
    p: f64,
    q: f64,
    x_max: f64,
    g1: f64,
    pi_p: f64,
    quadrature_tol: f64,
    table_y: Vec<f64>,
    table_g: Vec<f64>,
}

impl PTrigContext {
    pub fn new(p: f64) -> Result<Self> {
        check_p(p)?;
        let q = p / (p - 1.0);
        let x_max = (p - 1.0).powf(1.0 / p);
        let g1 = g_one(p);
        let mut ctx = PTrigContext {
            p,
            q,
            x_max,
            g1,
            pi_p: 2.0 * x_max * g1,
            quadrature_tol: QUAD_TOL,
            table_y: Vec::with_capacity(TABLE_SIZE),
            table_g: Vec::with_capacity(TABLE_SIZE),
        };
        for j in 0..TABLE_SIZE {
            let y = 0.5 * (1.0 - (PI * j as f64 / (TABLE_SIZE - 1) as f64).cos());
            let g = ctx.g(y);
            ctx.table_y.push(y);
            ctx.table_g.push(g);
        }
        Ok(ctx)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn pi_p(&self) -> f64 {
        self.pi_p
    }

    /// `(p-1)^{1/p}`, the maximum of `sin_p`.
    pub fn amplitude(&self) -> f64 {
        self.x_max
    }

    pub fn quadrature_tol(&self) -> f64 {
        self.quadrature_tol
    }

    fn g(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return self.g1;
        }
        let yp = y.powf(self.p);
        if yp <= 0.5 {
            head_integral(self.p, y)
        } else {
            self.g1 - tail_integral(self.p, (1.0 - yp).powf(1.0 / self.q))
        }
    }

    /// `G(y)` integrated from table node `j`, on the same side of `y^p = 1/2`.
    fn g_from(&self, j: usize, y: f64) -> f64 {
        let y0 = self.table_y[j];
        let (yp, y0p) = (y.powf(self.p), y0.powf(self.p));
        let tol = QUAD_TOL;
        if yp <= 0.5 && y0p <= 0.5 {
            let p = self.p;
            self.table_g[j]
                + integrate(|s| (1.0 - s.powf(p)).powf(-1.0 / p), y0, y, tol, tol, 50).value
        } else if yp > 0.5 && y0p > 0.5 && y < 1.0 {
            let (q, e) = (self.q, 1.0 / self.p - 1.0);
            let s0 = (1.0 - y0p).powf(1.0 / q);
            let s = (1.0 - yp).powf(1.0 / q);
            self.table_g[j]
                - integrate(|v| (1.0 - v.powf(q)).powf(e), s0, s, tol, tol, 50).value
                    / (self.p - 1.0)
        } else {
            self.g(y)
        }
    }

    /// `F_p(x)` for `0 <= x <= (p-1)^{1/p}`.
    pub fn f_p(&self, x: f64) -> Result<f64> {
        if !(0.0..=self.x_max * (1.0 + 1e-15)).contains(&x) {
            return domain(format!("F_p is defined on [0, {}], got {x}", self.x_max));
        }
        Ok(self.x_max * self.g((x / self.x_max).min(1.0)))
    }

    /// Inverse of `F_p` on `[0, π_p/2]`, returned as `Y = x / x_max`.
    fn invert(&self, t: f64) -> f64 {
        let target = t / self.x_max;
        if target <= 0.0 {
            return 0.0;
        }
        if target >= self.g1 {
            return 1.0;
        }
        let j = self
            .table_g
            .partition_point(|&g| g <= target)
            .clamp(1, TABLE_SIZE - 1);
        let (mut lo, mut hi) = (self.table_y[j - 1], self.table_y[j]);
        let (glo, ghi) = (self.table_g[j - 1], self.table_g[j]);
        let mut y = lo + (hi - lo) * (target - glo) / (ghi - glo);
        let base = j - 1;
        for _ in 0..100 {
            let r = self.g_from(base, y) - target;
            if r == 0.0 {
                break;
            }
            if r > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            // G'(y) = (1 - y^p)^{-1/p}
            let step = r * (1.0 - y.powf(self.p)).max(0.0).powf(1.0 / self.p);
            let mut next = y - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= 1e-16 * y.max(1e-300) || hi - lo <= 1e-16 {
                y = next;
                break;
            }
            y = next;
        }
        y
    }

    /// Periodic, odd extension of the inverse of `F_p`.
    pub fn sin_p(&self, t: f64) -> f64 {
        let half = 0.5 * self.pi_p;
        let s = t.rem_euclid(2.0 * self.pi_p);
        let (s, sign) = if s > self.pi_p {
            (s - self.pi_p, -1.0)
        } else {
            (s, 1.0)
        };
        let s = if s > half { self.pi_p - s } else { s };
        sign * self.x_max * self.invert(s)
    }

    pub fn cos_p(&self, t: f64) -> f64 {
        self.sin_p(t + 0.5 * self.pi_p)
    }

    /// `sin_p'(t)`, from `|z'|^p + |z|^p/(p-1) = 1`.
    pub fn sin_p_prime(&self, t: f64) -> f64 {
        let z = self.sin_p(t);
        let mag = (1.0 - z.abs().powf(self.p) / (self.p - 1.0))
            .max(0.0)
            .powf(1.0 / self.p);
        // increasing on (-π_p/2, π_p/2) modulo 2π_p
        let s = (t + 0.5 * self.pi_p).rem_euclid(2.0 * self.pi_p);
        if s <= self.pi_p {
            mag
        } else {
            -mag
        }
    }

    pub fn cos_p_prime(&self, t: f64) -> f64 {
        self.sin_p_prime(t + 0.5 * self.pi_p)
    }
}
