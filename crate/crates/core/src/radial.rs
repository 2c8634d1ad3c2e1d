//! Radial reductions on Wulff shapes.
//!
//! For `v(x) = φ(H°(x))` the identities `H(∇H°(x)) = 1` and
//! `H°(x) ∇H(∇H°(x)) = x` give
//!
//! ```text
//! H(Dv) = |φ'(r)|,   H(Dv)^{p-1} ∇H(Dv) = |φ'|^{p-2} φ'(r) x / r,   r = H°(x),
//! ```
//!
//! and since `div(f(r) x/r) = r^{1-n} (r^{n-1} f)'` along the level sets of
//! `H°`, the eigenvalue equation on `𝒲_R` reduces to the Euclidean radial
//! problem
//!
//! ```text
//! -(r^{n-1} |φ'|^{p-2} φ')' = λ r^{n-1} φ^{p-1},   φ'(0) = 0,   φ(R) = 0.
//! ```
//!
//! Integrals transform with the coarea formula over Wulff shells:
//! `∫_{𝒲_R} g(H°(x)) dx = n κ_n ∫_0^R g(r) r^{n-1} dr`.
//!
//! The ODE is integrated in the flux `F = r^{n-1} |φ'|^{p-2} φ'`, for which
//! `φ' = sgn(F) |F / r^{n-1}|^{1/(p-1)}` and `F' = -λ r^{n-1} |φ|^{p-2} φ`.
//! The origin is handled by the series
//!
//! ```text
//! φ = 1 - c r^{p'} + c² n / (2(n+p')) r^{2p'},        c = (λ/n)^{1/(p-1)} / p',
//! F = -λ r^n / n + λ (p-1) c r^{n+p'} / (n+p').
//! ```

use serde::Serialize;

use crate::anisotropy::{wulff_measure, Norm};
use crate::error::{domain, Error, Result};
use crate::geometry::ConvexPolygon;
use crate::ptrig::pi_p_closed_form;

const START: f64 = 1e-6;

type State = [f64; 3];

struct Rhs {
    p: f64,
    n: f64,
    lambda: f64,
}

impl Rhs {
    #[inline]
    fn eval(&self, r: f64, y: &State) -> State {
        let rn1 = r.powf(self.n - 1.0);
        let w = y[1] / rn1;
        let dphi = w.signum() * w.abs().powf(1.0 / (self.p - 1.0));
        let phi_pm1 = y[0].signum() * y[0].abs().powf(self.p - 1.0);
        [
            dphi,
            -self.lambda * rn1 * phi_pm1,
            y[0].abs().powf(self.p) * rn1,
        ]
    }

    /// Two-term expansion at the origin.
    fn series(&self, r: f64) -> State {
        let (p, n) = (self.p, self.n);
        let pp = p / (p - 1.0);
        let c = (self.lambda / n).powf(1.0 / (p - 1.0)) / pp;
        let rp = r.powf(pp);
        let rn = r.powf(n);
        [
            1.0 - c * rp + c * c * n / (2.0 * (n + pp)) * rp * rp,
            -self.lambda * rn / n + self.lambda * (p - 1.0) * c * rn * rp / (n + pp),
            rn / n - p * c * rn * rp / (n + pp),
        ]
    }
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand–Prince 5(4) step; returns the new state and the scaled error.
fn dopri_step(f: &Rhs, r: f64, y: &State, h: f64, rtol: f64, atol: f64) -> (State, f64) {
    let mut k = [[0.0; 3]; 7];
    k[0] = f.eval(r, y);
    for s in 0..6 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s + 1) {
            for i in 0..3 {
                ys[i] += h * A[s][j] * kj[i];
            }
        }
        if s == 5 {
            k[6] = f.eval(r + h, &ys);
            let mut err: f64 = 0.0;
            for i in 0..3 {
                let e: f64 = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                let sc = atol + rtol * y[i].abs().max(ys[i].abs());
                err = err.max(e.abs() / sc);
            }
            return (ys, err);
        }
        k[s + 1] = f.eval(r + C[s] * h, &ys);
    }
    unreachable!()
}

struct Trajectory {
    r: Vec<f64>,
    y: Vec<State>,
    /// First zero of `φ`, if reached before `r_end`.
    zero: Option<f64>,
}

fn integrate_radial(f: &Rhs, r0: f64, r_end: f64, keep: bool) -> Trajectory {
    let (rtol, atol) = (1e-12, 1e-30);
    let mut r = r0;
    let mut y = f.series(r0);
    let mut h = r0;
    let mut out = Trajectory {
        r: vec![r],
        y: vec![y],
        zero: None,
    };
    let mut steps = 0;
    while r < r_end && steps < 1_000_000 {
        steps += 1;
        let h_try = h.min(r_end - r);
        let (yn, err) = dopri_step(f, r, &y, h_try, rtol, atol);
        if err > 1.0 {
            h = h_try * (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }
        if yn[0] <= 0.0 {
            // locate φ = 0 by bisection on the step length
            let (mut lo, mut hi) = (0.0, h_try);
            let mut y_hi = yn;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let (ym, _) = dopri_step(f, r, &y, mid, rtol, atol);
                if ym[0] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                    y_hi = ym;
                }
            }
            out.zero = Some(r + hi);
            if keep {
                out.r.push(r + hi);
                out.y.push(y_hi);
            }
            return out;
        }
        r += h_try;
        y = yn;
        if keep {
            out.r.push(r);
            out.y.push(y);
        }
        h = h_try * (0.9 * err.max(1e-10).powf(-0.2)).min(5.0);
    }
    if !keep {
        out.r.push(r);
        out.y.push(y);
    }
    out
}

/// First eigenpair of the anisotropic p-Laplacian on a Wulff shape `𝒲_R`.
#[derive(Clone, Debug, Serialize)]
pub struct RadialEigenResult {
    pub p: f64,
    pub n: usize,
    pub radius: f64,
    pub lambda: f64,
    /// Radii of the profile samples.
    pub profile_r: Vec<f64>,
    /// `φ` at `profile_r`, normalized by `φ(0) = 1`.
    pub profile_phi: Vec<f64>,
    /// `‖v‖_∞ = φ(0)`.
    pub phi_norm_inf: f64,
    /// `∫_0^R φ^p r^{n-1} dr`; multiply by `n κ_n` for `‖v‖_p^p`.
    pub phi_p_moment: f64,
    /// `|φ(R)|` after the final shooting run.
    pub boundary_residual: f64,
    /// `φ'(0)` extrapolated from the integrated flux.
    pub phi_prime_origin: f64,
    pub iterations: usize,
}

impl RadialEigenResult {
    /// `‖v‖_p` over `𝒲_R` given the Wulff volume `κ_n`.
    pub fn phi_norm_p(&self, kappa: f64) -> f64 {
        (self.n as f64 * kappa * self.phi_p_moment).powf(1.0 / self.p)
    }

    /// CSV with header `r,phi`.
    pub fn profile_csv(&self) -> String {
        let mut s = String::from("r,phi\n");
        for (r, phi) in self.profile_r.iter().zip(&self.profile_phi) {
            s.push_str(&format!(
                "{},{}\n",
                crate::fmt::sig12(*r),
                crate::fmt::sig12(*phi)
            ));
        }
        s
    }
}

/// First eigenvalue on `𝒲_R` by shooting on `λ`.
///
/// Eigenfunctions for different `λ` are dilations of one another, so a run
/// whose first zero sits at `r_z` gives the exact update `λ (r_z / R)^p`.
/// When no zero is found the bracket `[0.5, 2] (π_p/R)^p` is expanded
/// geometrically, and a sign bisection on `φ(R)` is the fallback if the
/// update stalls.
pub fn wulff_first_eigenvalue(p: f64, n: usize, radius: f64) -> Result<RadialEigenResult> {
    if !(p > 1.0 && p.is_finite()) {
        return domain(format!("p must satisfy 1 < p < inf, got {p}"));
    }
    if n < 2 {
        return domain(format!("dimension must be >= 2, got {n}"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return domain(format!("radius must be > 0, got {radius}"));
    }
    let r0 = START * radius;
    let nf = n as f64;
    let run = |lambda: f64, r_end: f64, keep: bool| {
        integrate_radial(&Rhs { p, n: nf, lambda }, r0, r_end, keep)
    };

    let base = (pi_p_closed_form(p) / radius).powf(p);
    let mut lambda = base;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..60 {
        iterations += 1;
        let tr = run(lambda, 4.0 * radius, false);
        match tr.zero {
            Some(rz) => {
                let ratio = rz / radius;
                lambda *= ratio.powf(p);
                if (ratio - 1.0).abs() < 1e-13 {
                    converged = true;
                    break;
                }
            }
            None => lambda *= 2f64.powf(p),
        }
    }
    if !converged {
        lambda = bisect_on_boundary_sign(&run, 0.5 * base, 2.0 * base, radius, &mut iterations)?;
    }

    let tr = run(lambda, radius, true);
    let last = *tr.y.last().expect("trajectory has a start point");
    let boundary_residual = if tr.zero.is_some() {
        0.0
    } else {
        last[0].abs()
    };
    let w = |k: usize| tr.y[k][1] / tr.r[k].powf(nf - 1.0);
    // fit w = w0 + b r + a r^{1+p'} through the first three samples
    let w0 = if tr.r.len() >= 3 {
        let e = 1.0 + p / (p - 1.0);
        let rows: Vec<[f64; 3]> = (0..3)
            .map(|k| {
                let s = tr.r[k] / r0;
                [1.0, s, s.powf(e)]
            })
            .collect();
        solve3([rows[0], rows[1], rows[2]], [w(0), w(1), w(2)])[0]
    } else {
        0.0
    };
    Ok(RadialEigenResult {
        p,
        n,
        radius,
        lambda,
        profile_r: std::iter::once(0.0).chain(tr.r.iter().copied()).collect(),
        profile_phi: std::iter::once(1.0)
            .chain(tr.y.iter().map(|y| y[0].max(0.0)))
            .collect(),
        phi_norm_inf: 1.0,
        phi_p_moment: last[2],
        boundary_residual,
        phi_prime_origin: w0.signum() * w0.abs().powf(1.0 / (p - 1.0)),
        iterations,
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for k in 0..3 {
        let piv = (k..3)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap_or(k);
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..3 {
            let f = a[i][k] / a[k][k];
            for j in k..3 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let s: f64 = (k + 1..3).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

fn bisect_on_boundary_sign<F: Fn(f64, f64, bool) -> Trajectory>(
    run: &F,
    mut lo: f64,
    mut hi: f64,
    radius: f64,
    iterations: &mut usize,
) -> Result<f64> {
    let crosses = |l: f64| run(l, radius, false).zero.is_some();
    let mut expand = 0;
    while crosses(lo) {
        lo *= 0.5;
        expand += 1;
        if expand > 60 {
            return Err(Error::ShootingBracket(format!(
                "no lower bracket, last {lo}"
            )));
        }
    }
    while !crosses(hi) {
        hi *= 2.0;
        expand += 1;
        if expand > 120 {
            return Err(Error::ShootingBracket(format!(
                "no upper bracket, last {hi}"
            )));
        }
    }
    while hi - lo > 1e-14 * hi {
        *iterations += 1;
        let mid = 0.5 * (lo + hi);
        if crosses(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `λ_p(𝒲_{R*})` for the Wulff shape with `|𝒲_{R*}| = |Ω|`.
pub fn faber_krahn_reference(poly: &ConvexPolygon, norm: &Norm, p: f64) -> Result<f64> {
    let kappa = wulff_measure(norm)?;
    let r_star = (poly.area() / kappa).sqrt();
    Ok(wulff_first_eigenvalue(p, 2, 1.0)?.lambda / r_star.powf(p))
}

/// The constant of the eigenvalue stability estimate.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityConstant {
    pub c_omega: f64,
    /// `‖v‖_∞^p / ‖v‖_p^p` on the Wulff shape `Ω̃`.
    pub v_inf_p_over_v_p_p: f64,
    /// `|Ω̃|`
    pub volume_tilde: f64,
    /// Radius of `Ω̃`, chosen so `P_H(Ω̃)` equals the target perimeter.
    pub radius_tilde: f64,
    /// `λ_p(Ω̃)` from shooting.
    pub lambda_tilde: f64,
}

/// `C_Ω` for the planar Wulff shape `Ω̃` with `P_H(Ω̃) = P_target`.
pub fn stability_constant(norm: &Norm, p: f64, p_target: f64) -> Result<StabilityConstant> {
    if !(p_target > 0.0) {
        return domain(format!("target perimeter must be > 0, got {p_target}"));
    }
    let kappa = wulff_measure(norm)?;
    let radius = p_target / (2.0 * kappa);
    let eig = wulff_first_eigenvalue(p, 2, radius)?;
    let ratio = eig.phi_norm_inf.powf(p) / (2.0 * kappa * eig.phi_p_moment);
    let volume = kappa * radius * radius;
    Ok(StabilityConstant {
        c_omega: ratio * volume,
        v_inf_p_over_v_p_p: ratio,
        volume_tilde: volume,
        radius_tilde: radius,
        lambda_tilde: eig.lambda,
    })
}

fn check_p(p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return domain(format!("p must satisfy 1 < p < inf, got {p}"));
    }
    Ok(p / (p - 1.0))
}

/// `τ_p(Ω*) = |Ω|^{p'/n+1} / (n^{p'} κ_n^{p'/n}) · n/(p'+n)`.
pub fn wulff_torsion(kappa: f64, p: f64, n: usize, volume: f64) -> Result<f64> {
    let pp = check_p(p)?;
    if !(volume > 0.0 && kappa > 0.0) || n < 1 {
        return domain("volume, κ and n must be positive");
    }
    let nf = n as f64;
    Ok(volume.powf(pp / nf + 1.0) / (nf.powf(pp) * kappa.powf(pp / nf)) * nf / (pp + nf))
}

/// p-torsional rigidity of `[0, a]`: `(p-1)/(2p-1) a^{(2p-1)/(p-1)} / 2^{p/(p-1)}`.
pub fn interval_torsion(p: f64, a: f64) -> Result<f64> {
    let pp = check_p(p)?;
    if !(a > 0.0) {
        return domain(format!("interval length must be > 0, got {a}"));
    }
    Ok((p - 1.0) / (2.0 * p - 1.0) * a.powf((2.0 * p - 1.0) / (p - 1.0)) / 2f64.powf(pp))
}
