use serde::{Deserialize, Serialize};

use crate::anisotropy::Norm;
use crate::error::{domain, Result};
use crate::fem::energy::{Density, P1Space};
use crate::fem::mesh::TriMesh;

/// Regularization levels used for polygonal gauges.
pub const EPS_LADDER: [f64; 3] = [1e-3, 1e-4, 1e-5];

pub const FLAG_REGULARIZED: &str = "regularized gauge, uniqueness not guaranteed";
pub const FLAG_ITERATION_CAP: &str = "iteration cap exceeded";
pub const FLAG_STAGNATED: &str = "rayleigh quotient stagnated above residual tolerance";
pub const FLAG_NONPOSITIVE: &str = "nonpositive interior value";
pub const FLAG_NOT_MONOTONE: &str = "rayleigh quotient increased";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Exit tolerance on the relative Rayleigh gradient.
    pub tol: f64,
    /// Exit tolerance on the relative change of the functional.
    pub rtol: f64,
    pub max_iterations: usize,
    /// Fixed regularization; overrides the automatic ladder.
    pub eps: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            rtol: 1e-10,
            max_iterations: 10_000,
            eps: None,
        }
    }
}

/// One rung of the regularization ladder.
#[derive(Clone, Debug, Serialize)]
pub struct EpsLevel {
    pub eps: f64,
    pub value: f64,
}

/// Values across the regularization ladder and their `eps → 0` limit.
#[derive(Clone, Debug, Serialize)]
pub struct EpsLadder {
    pub levels: Vec<EpsLevel>,
    pub extrapolated: f64,
    /// `|value(eps_last) − value(eps_prev)|`.
    pub sensitivity: f64,
}

impl EpsLadder {
    fn from_levels(levels: Vec<EpsLevel>) -> EpsLadder {
        let n = levels.len();
        let (extrapolated, sensitivity) = if n >= 2 {
            let (a, b) = (&levels[n - 2], &levels[n - 1]);
            let r = b.eps * b.eps / (a.eps * a.eps - b.eps * b.eps);
            (b.value + (b.value - a.value) * r, (b.value - a.value).abs())
        } else {
            (levels[0].value, 0.0)
        };
        EpsLadder {
            levels,
            extrapolated,
            sensitivity,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenResult {
    pub p: f64,
    pub lambda: f64,
    /// Nodal values on the full mesh, `‖u‖_p = 1`.
    pub u: Vec<f64>,
    pub residual: f64,
    pub h: f64,
    pub nodes: usize,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub converged: bool,
    /// Rayleigh quotient after each outer iteration.
    pub history: Vec<f64>,
    pub min_interior: f64,
    pub regularization: Option<EpsLadder>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TorsionResult {
    pub p: f64,
    pub tau: f64,
    /// `τ^{p-1}`.
    pub sigma: f64,
    pub u: Vec<f64>,
    /// `|∫H(Du)^p − ∫u|`.
    pub energy_identity_gap: f64,
    /// Relative gap between `(∫u)^p / ∫H(Du)^p` and `σ`.
    pub characterization_gap: f64,
    pub h: f64,
    pub nodes: usize,
    pub iterations: usize,
    pub converged: bool,
    pub min_interior: f64,
    pub regularization: Option<EpsLadder>,
    pub flags: Vec<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Minimized {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Damped Newton for `min (1/p) E(x) − b·x`.
fn minimize(
    space: &P1Space,
    w: &Density,
    b: &[f64],
    mut x: Vec<f64>,
    max_iter: usize,
) -> Result<Minimized> {
    let p = w.p;
    let j = |x: &[f64]| space.energy(w, x) / p - dot(b, x);
    let mut jx = j(&x);
    let scale = dot(b, &x).abs().max(f64::MIN_POSITIVE);
    let mut stalled = 0;
    for it in 0..max_iter {
        let mut g = space.energy_gradient(w, &x);
        for (gi, bi) in g.iter_mut().zip(b) {
            *gi = *gi / p - bi;
        }
        let floor = 1e-6 * space.max_slope(w, &x).max(f64::MIN_POSITIVE);
        let mut hess = space.energy_hessian(w, &x, floor);
        hess.factor()?;
        let mut d = hess.solve(&g);
        d.iter_mut().for_each(|v| *v *= -p);
        let dec = -dot(&g, &d);
        if dec <= 1e-16 * scale {
            return Ok(Minimized {
                x,
                iterations: it,
                converged: true,
            });
        }
        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = x.clone();
        for _ in 0..60 {
            for k in 0..x.len() {
                trial[k] = x[k] + t * d[k];
            }
            let jt = j(&trial);
            if jt <= jx - 1e-4 * t * dec {
                accepted = true;
                stalled = if jt < jx { 0 } else { stalled + 1 };
                jx = jt;
                break;
            }
            t *= 0.5;
        }
        if !accepted || stalled >= 3 {
            // no representable decrease left
            return Ok(Minimized {
                x,
                iterations: it,
                converged: dec <= 1e-10 * scale,
            });
        }
        std::mem::swap(&mut x, &mut trial);
    }
    Ok(Minimized {
        x,
        iterations: max_iter,
        converged: false,
    })
}

/// Principal Dirichlet eigenpair of the P1 Laplacian with midpoint-rule mass,
/// by inverse power iteration on a single Cholesky factorization.
pub fn linear_principal_eigen(space: &P1Space) -> Result<(f64, Vec<f64>)> {
    let mut k = space.stiffness();
    let kmat = k.clone();
    k.factor()?;
    let mass = |x: &[f64]| -> Vec<f64> {
        space
            .mass_p_gradient(2.0, x)
            .iter()
            .map(|v| 0.5 * v)
            .collect()
    };
    let mut x: Vec<f64> = space.load().to_vec();
    let mut lambda = f64::INFINITY;
    for _ in 0..20_000 {
        let mx = mass(&x);
        let y = k.solve(&mx);
        let my = mass(&y);
        let n = dot(&y, &my).sqrt();
        let y: Vec<f64> = y.iter().map(|v| v / n).collect();
        let ky = kmat.mul(&y);
        let new = dot(&y, &ky);
        let done = (lambda - new).abs() <= 1e-15 * new;
        lambda = new;
        x = y;
        if done {
            break;
        }
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok((lambda, x))
}

fn regularization_levels(norm: &Norm, opts: &SolverOptions) -> Vec<f64> {
    match opts.eps {
        Some(e) => vec![e],
        None if norm.is_polygonal() => EPS_LADDER.to_vec(),
        None => vec![0.0],
    }
}

fn check_inputs(norm: &Norm, p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return domain(format!("p must be > 1, got {p}"));
    }
    if !norm.is_solver_admissible() && !norm.is_polygonal() {
        return domain(format!(
            "norm {} is not admissible for the solvers",
            norm.id()
        ));
    }
    Ok(())
}

struct EigenRun {
    lambda: f64,
    x: Vec<f64>,
    residual: f64,
    iterations: usize,
    newton: usize,
    converged: bool,
    /// Stopped because no representable decrease was left.
    stagnated: bool,
    history: Vec<f64>,
}

fn rayleigh_residual(
    space: &P1Space,
    w: &Density,
    x: &[f64],
    lambda: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let ge = space.energy_gradient(w, x);
    let gm = space.mass_p_gradient(w.p, x);
    let r: Vec<f64> = ge.iter().zip(&gm).map(|(a, b)| a - lambda * b).collect();
    let den = gm.iter().map(|b| (lambda * b).powi(2)).sum::<f64>().sqrt();
    let res = dot(&r, &r).sqrt() / den;
    (r, gm, res)
}

fn eigen_at(space: &P1Space, w: &Density, x0: Vec<f64>, opts: &SolverOptions) -> Result<EigenRun> {
    let p = w.p;
    let normalize = |x: Vec<f64>| -> Vec<f64> {
        let m = space.mass_p(p, &x).powf(1.0 / p);
        x.into_iter().map(|v| v / m).collect()
    };
    let mut x = normalize(x0);
    let mut lambda = space.energy(w, &x);
    let mut history = vec![lambda];
    let mut newton = 0;
    let mut residual;
    let mut converged = false;
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    let mut delta = 1e-2;
    let mut flat_steps = 0;
    let mut stagnated = false;
    loop {
        let (r, gm, res) = rayleigh_residual(space, w, &x, lambda);
        residual = res;
        if residual <= opts.tol && change <= opts.rtol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        // Newton on the constraint manifold ‖x‖_p = 1 with the shifted
        // Hessian ∇²E − σ∇²M, σ = λ(1 − δ).
        let umax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slope_floor = 1e-6 * space.max_slope(w, &x).max(f64::MIN_POSITIVE);
        let mut factored = None;
        while delta < 1.0 {
            let mut k = space.energy_hessian(w, &x, slope_floor);
            space.add_mass_hessian(&mut k, p, &x, -lambda * (1.0 - delta), 1e-8 * umax);
            newton += 1;
            if k.factor().is_ok() {
                factored = Some(k);
                break;
            }
            delta *= 4.0;
        }
        let mut next = None;
        if let Some(k) = factored {
            let y1 = k.solve(&r);
            let y2 = k.solve(&gm);
            let alpha = dot(&gm, &y1) / dot(&gm, &y2);
            let d: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| alpha * b - a).collect();
            let mut t = 1.0;
            for _ in 0..30 {
                let trial = normalize(x.iter().zip(&d).map(|(a, b)| a + t * b).collect());
                let lt = space.energy(w, &trial);
                // at round-off level R is flat; a step that keeps R and
                // shrinks the gradient is still progress
                let flat = lt <= lambda * (1.0 + 1e-14)
                    && flat_steps < 50
                    && rayleigh_residual(space, w, &trial, lt).2 < residual;
                if lt < lambda || flat {
                    flat_steps = if flat { flat_steps + 1 } else { 0 };
                    next = Some((trial, lt));
                    break;
                }
                t *= 0.5;
            }
            if next.is_some() && t == 1.0 {
                delta = (delta * 0.25).max(1e-6);
            } else {
                delta = (delta * 4.0).min(0.5);
            }
        } else {
            delta = 0.5;
        }
        if next.is_none() {
            // inverse power step
            let b: Vec<f64> = gm.iter().map(|v| v / p).collect();
            let start: Vec<f64> = x
                .iter()
                .map(|v| v * lambda.powf(-1.0 / (p - 1.0)))
                .collect();
            let m = minimize(space, w, &b, start, 200)?;
            newton += m.iterations;
            let xn = normalize(m.x);
            let ln = space.energy(w, &xn);
            if ln < lambda {
                next = Some((xn, ln));
            }
        }
        match next {
            Some((xn, ln)) => {
                change = (lambda - ln) / ln;
                x = xn;
                lambda = ln;
                history.push(lambda);
            }
            None => {
                // no representable decrease left
                converged = residual <= opts.tol;
                stagnated = !converged;
                break;
            }
        }
    }
    Ok(EigenRun {
        lambda,
        x,
        residual,
        iterations,
        newton,
        converged,
        stagnated,
        history,
    })
}

/// First Dirichlet eigenvalue of `−Q_p` on the P1 space of `mesh`.
///
/// Starts from the principal vector of the linear Laplacian problem and
/// descends the Rayleigh quotient on `‖u‖_p = 1` with shifted Newton steps;
/// when a step fails to decrease the quotient, a nonlinear inverse power step
/// (minimize `(1/p) E(w) − (1/p) ∇M(u)·w`, renormalize) is taken instead.
pub fn solve_eigen(
    mesh: &TriMesh,
    norm: &Norm,
    p: f64,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    check_inputs(norm, p)?;
    let space = P1Space::new(mesh)?;
    let (_, mut x) = linear_principal_eigen(&space)?;
    let mut levels = Vec::new();
    let mut last = None;
    let mut flags = Vec::new();
    let eps_list = regularization_levels(norm, opts);
    for &eps in &eps_list {
        let w = Density::new(norm, p, eps);
        let run = eigen_at(&space, &w, x.clone(), opts)?;
        levels.push(EpsLevel {
            eps,
            value: run.lambda,
        });
        x = run.x.clone();
        last = Some(run);
    }
    let run = last.expect("at least one level");
    if run.stagnated {
        flags.push(FLAG_STAGNATED.to_string());
    } else if !run.converged {
        flags.push(FLAG_ITERATION_CAP.to_string());
    }
    if run.history.windows(2).any(|h| h[1] > h[0] * (1.0 + 1e-12)) {
        flags.push(FLAG_NOT_MONOTONE.to_string());
    }
    let min_interior = run.x.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_interior > 0.0) {
        flags.push(FLAG_NONPOSITIVE.to_string());
    }
    let regularization = if eps_list[0] > 0.0 {
        flags.push(FLAG_REGULARIZED.to_string());
        Some(EpsLadder::from_levels(levels))
    } else {
        None
    };
    Ok(EigenResult {
        p,
        lambda: run.lambda,
        u: space.expand(&run.x),
        residual: run.residual,
        h: mesh.h,
        nodes: mesh.node_count(),
        iterations: run.iterations,
        newton_iterations: run.newton,
        converged: run.converged,
        history: run.history,
        min_interior,
        regularization,
        flags,
    })
}

/// Anisotropic p-torsion: minimizes `(1/p) ∫H(Du)^p − ∫u`, `τ = ∫u`.
pub fn solve_torsion(
    mesh: &TriMesh,
    norm: &Norm,
    p: f64,
    opts: &SolverOptions,
) -> Result<TorsionResult> {
    check_inputs(norm, p)?;
    let space = P1Space::new(mesh)?;
    let b = space.load().to_vec();
    let mut k = space.stiffness();
    k.factor()?;
    let mut x = k.solve(&b);
    let mut levels = Vec::new();
    let mut flags = Vec::new();
    let eps_list = regularization_levels(norm, opts);
    let mut iterations = 0;
    let mut converged = true;
    for &eps in &eps_list {
        let w = Density::new(norm, p, eps);
        let c = (dot(&b, &x) / space.energy(&w, &x)).powf(1.0 / (p - 1.0));
        let start: Vec<f64> = x.iter().map(|v| v * c).collect();
        let m = minimize(&space, &w, &b, start, opts.max_iterations.min(500))?;
        iterations += m.iterations;
        converged &= m.converged;
        levels.push(EpsLevel {
            eps,
            value: dot(&b, &m.x),
        });
        x = m.x;
    }
    let w = Density::new(norm, p, *eps_list.last().unwrap());
    let tau = dot(&b, &x);
    let energy = space.energy(&w, &x);
    let sigma = tau.powf(p - 1.0);
    if !converged {
        flags.push(FLAG_ITERATION_CAP.to_string());
    }
    let min_interior = x.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_interior > 0.0) {
        flags.push(FLAG_NONPOSITIVE.to_string());
    }
    let regularization = if eps_list[0] > 0.0 {
        flags.push(FLAG_REGULARIZED.to_string());
        Some(EpsLadder::from_levels(levels))
    } else {
        None
    };
    Ok(TorsionResult {
        p,
        tau,
        sigma,
        u: space.expand(&x),
        energy_identity_gap: (energy - tau).abs(),
        characterization_gap: ((tau.powf(p) / energy) - sigma).abs() / sigma,
        h: mesh.h,
        nodes: mesh.node_count(),
        iterations,
        converged,
        min_interior,
        regularization,
        flags,
    })
}

/// Richardson estimate from values at `h` and `h/2` for a second-order method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub coarse: f64,
    pub fine: f64,
    pub extrapolated: f64,
    pub eps_h: f64,
}

pub fn estimate_discretization_error(coarse: f64, fine: f64) -> ErrorEstimate {
    let d = (fine - coarse) / 3.0;
    ErrorEstimate {
        coarse,
        fine,
        extrapolated: fine + d,
        eps_h: d.abs(),
    }
}

/// Observed convergence order from three successive halvings.
pub fn observed_order(v_h: f64, v_h2: f64, v_h4: f64) -> f64 {
    ((v_h - v_h2).abs() / (v_h2 - v_h4).abs()).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::triangulate;
    use crate::geometry::ConvexPolygon;
    use std::f64::consts::PI;

    #[test]
    fn nonlinear_reproduces_linear_path() {
        let sq = ConvexPolygon::rectangle(1.0, 1.0).unwrap();
        let mesh = triangulate(&sq, 0.1).unwrap();
        let space = P1Space::new(&mesh).unwrap();
        let (lin, _) = linear_principal_eigen(&space).unwrap();
        let r = solve_eigen(&mesh, &Norm::euclidean(), 2.0, &SolverOptions::default()).unwrap();
        assert!(
            (r.lambda - lin).abs() <= 1e-10 * lin,
            "{} {}",
            r.lambda,
            lin
        );
        assert!(r.converged && r.flags.is_empty(), "{:?}", r.flags);
    }

    #[test]
    fn square_eigen_and_rayleigh_consistency() {
        let sq = ConvexPolygon::rectangle(1.0, 1.0).unwrap();
        let mesh = triangulate(&sq, 0.08).unwrap();
        for &p in &[1.5, 3.0] {
            let r = solve_eigen(&mesh, &Norm::euclidean(), p, &SolverOptions::default()).unwrap();
            assert!(r.converged, "p={p} {:?}", r.flags);
            assert!(r.min_interior > 0.0);
            let space = P1Space::new(&mesh).unwrap();
            let x = space.restrict(&r.u);
            let eu = Norm::euclidean();
            let w = Density::new(&eu, p, 0.0);
            let rq = space.energy(&w, &x) / space.mass_p(p, &x);
            assert!((rq - r.lambda).abs() <= 1e-10 * r.lambda);
            assert!((space.mass_p(p, &x) - 1.0).abs() < 1e-12);
            assert!(r.history.windows(2).all(|h| h[1] <= h[0] * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn disk_torsion_and_identity() {
        let disk = ConvexPolygon::regular_ngon(256, 1.0).unwrap();
        let mesh = triangulate(&disk, 0.08).unwrap();
        let r = solve_torsion(&mesh, &Norm::euclidean(), 2.0, &SolverOptions::default()).unwrap();
        assert!((r.tau - PI / 8.0).abs() < 0.01 * PI / 8.0, "{}", r.tau);
        assert!(r.energy_identity_gap <= 1e-6 * r.tau);
        for &p in &[1.5, 3.0] {
            let r = solve_torsion(&mesh, &Norm::lr(3.0).unwrap(), p, &SolverOptions::default())
                .unwrap();
            assert!(r.converged);
            assert!(
                r.energy_identity_gap <= 1e-6 * r.tau,
                "{} {}",
                r.energy_identity_gap,
                r.tau
            );
            assert!(r.characterization_gap <= 1e-6);
            assert!(r.min_interior > 0.0);
        }
    }

    #[test]
    fn polygonal_gauge_is_regularized() {
        let sq = ConvexPolygon::rectangle(1.0, 1.0).unwrap();
        let mesh = triangulate(&sq, 0.15).unwrap();
        let norm = Norm::polygonal(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]).unwrap();
        let r = solve_torsion(&mesh, &norm, 2.0, &SolverOptions::default()).unwrap();
        let ladder = r.regularization.as_ref().unwrap();
        assert_eq!(ladder.levels.len(), 3);
        assert!(r.flags.iter().any(|f| f == FLAG_REGULARIZED));
        assert!(ladder.sensitivity < 1e-3 * r.tau);
    }

    #[test]
    fn richardson_identity() {
        let e = estimate_discretization_error(2.5, 2.5);
        assert_eq!(e.eps_h, 0.0);
        assert_eq!(e.extrapolated, 2.5);
        let e = estimate_discretization_error(1.0 + 4.0, 1.0 + 1.0);
        assert!((e.extrapolated - 1.0).abs() < 1e-15);
    }
}
