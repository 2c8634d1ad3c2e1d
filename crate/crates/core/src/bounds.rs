//! Closed-form and web-function bounds for `λ_p(Ω)` and `τ_p(Ω)`.
//!
//! Web functions `u = g(d_H(x))` turn the Rayleigh quotient into
//! `∫ |g'|^p P(t) dt / ∫ |g|^p P(t) dt` over `[0, r_Ω]`, with
//! `P(t) = P_H(Ω_t)` from the inner parallel profile.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::anisotropy::{wulff_measure, Norm};
use crate::error::{domain, Error, Result};
use crate::fem::fem1d::Weighted1d;
use crate::fem::{
    estimate_discretization_error, solve_eigen, solve_torsion, triangulate, SolverOptions,
};
use crate::geometry::{isoperimetric_deficit_with, ConvexPolygon, InnerParallelProfile};
use crate::ptrig::{compute_pi_p, PTrigContext};
use crate::quadrature::GaussRule;
use crate::radial::{faber_krahn_reference, interval_torsion, stability_constant, wulff_torsion};

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return domain(format!("p must satisfy 1 < p < inf, got {p}"));
    }
    Ok(())
}

/// `(π_p/2)^p (P_H/|Ω|)^p`.
pub fn polya_bound(area: f64, perimeter_h: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(area > 0.0 && perimeter_h > 0.0) {
        return domain("area and perimeter must be positive");
    }
    Ok((compute_pi_p(p)? / 2.0 * perimeter_h / area).powf(p))
}

/// `(p-1)/(2p-1) |Ω|^{(2p-1)/(p-1)} / P_H^{p/(p-1)}`.
pub fn torsion_lower_closed(area: f64, perimeter_h: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(area > 0.0 && perimeter_h > 0.0) {
        return domain("area and perimeter must be positive");
    }
    Ok(
        (p - 1.0) / (2.0 * p - 1.0) * area.powf((2.0 * p - 1.0) / (p - 1.0))
            / perimeter_h.powf(p / (p - 1.0)),
    )
}

fn web_torsion_rule(profile: &InnerParallelProfile, p: f64, points: usize) -> f64 {
    let rule = GaussRule::new(points);
    let q = p / (p - 1.0);
    let mut s = 0.0;
    for k in 0..profile.len() - 1 {
        s += rule.integrate(profile.t_grid[k], profile.t_grid[k + 1], |t| {
            let (a, per) = profile.eval(t);
            if a <= 0.0 || per <= 0.0 {
                0.0
            } else {
                a.powf(q) / per.powf(q - 1.0)
            }
        });
    }
    s
}

/// `∫_0^{r_Ω} A(t)^{p'} / P(t)^{p'-1} dt`.
///
/// Fails with [`Error::ProfileTooCoarse`] when the 8- and 16-point Gauss
/// rules on the profile cells differ by more than `1e-4` relative.
pub fn torsion_lower_web(profile: &InnerParallelProfile, p: f64) -> Result<f64> {
    check_p(p)?;
    let a = web_torsion_rule(profile, p, 8);
    let b = web_torsion_rule(profile, p, 16);
    let change = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    if change > 1e-4 {
        return Err(Error::ProfileTooCoarse(change));
    }
    Ok(b)
}

/// `C_Ω · δ` with `δ` the normalized isoperimetric deficit.
pub fn stability_rhs(deficit_normalized: f64, c_omega: f64) -> f64 {
    c_omega * deficit_normalized
}

/// Outcome of the web-function minimization.
#[derive(Clone, Debug, Serialize)]
pub struct WebBound {
    pub value: f64,
    /// Quotient of the Pólya test function `cos_p(π_p A(t) / (2|Ω|))`.
    pub seed_value: f64,
    pub iterations: usize,
    pub nodes: usize,
    /// Relative change at the last grid refinement.
    pub refinement_change: f64,
    pub converged: bool,
}

fn web_problem(profile: &InnerParallelProfile, p: f64, split: usize) -> Result<Weighted1d> {
    let mut t = Vec::with_capacity(split * profile.len());
    for k in 0..profile.len() - 1 {
        let (a, b) = (profile.t_grid[k], profile.t_grid[k + 1]);
        for j in 0..split {
            t.push(a + (b - a) * j as f64 / split as f64);
        }
    }
    t.push(profile.inradius);
    Weighted1d::new(p, t, |s| profile.eval(s).1, false)
}

/// Rayleigh quotient of the web function `g(d_H)` for a profile `g` with `g(0) = 0`.
pub fn web_rayleigh_quotient(
    profile: &InnerParallelProfile,
    p: f64,
    g: impl Fn(f64) -> f64,
) -> Result<f64> {
    check_p(p)?;
    let prob = web_problem(profile, p, 4)?;
    let vals: Vec<f64> = prob.nodes()[1..].iter().map(|&t| g(t)).collect();
    Ok(prob.rayleigh(&vals))
}

/// Minimizes the web Rayleigh quotient over piecewise-linear `g` with
/// `g(0) = 0`, starting from the Pólya test function. Every iterate is an
/// upper bound for `λ_p(Ω)`.
pub fn web_eigen_upper_bound(profile: &InnerParallelProfile, p: f64) -> Result<WebBound> {
    check_p(p)?;
    let ctx = PTrigContext::new(p)?;
    let area0 = profile.area[0];
    let seed = |t: f64| ctx.cos_p(ctx.pi_p() * profile.eval(t).0 / (2.0 * area0));
    let mut prev: Option<f64> = None;
    let mut out = None;
    let mut split = 1;
    while split <= 32 {
        let prob = web_problem(profile, p, split)?;
        let g0: Vec<f64> = prob.nodes()[1..].iter().map(|&t| seed(t)).collect();
        let seed_value = prob.rayleigh(&g0);
        let (_, history) = prob.first_eigen(g0, 1e-13, 500)?;
        let value = *history.last().unwrap();
        let change = prev.map_or(f64::INFINITY, |v| (v - value).abs() / value);
        out = Some(WebBound {
            value,
            seed_value,
            iterations: history.len() - 1,
            nodes: prob.nodes().len(),
            refinement_change: change,
            converged: history.len() < 501 && change <= 1e-7,
        });
        if change <= 1e-8 {
            break;
        }
        prev = Some(value);
        split *= 2;
    }
    Ok(out.unwrap())
}

/// Endpoints of the rectangle sandwich for the ℓ^p gauge on `[0,a]×[0,b]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RectangleSandwich {
    pub lower: f64,
    pub upper: f64,
}

/// `(π_p^p / a^p, π_p^p (1/a + 1/b)^p)`.
pub fn rectangle_sandwich(a: f64, b: f64, p: f64) -> Result<RectangleSandwich> {
    check_p(p)?;
    if !(a > 0.0 && b > 0.0) {
        return domain("rectangle sides must be positive");
    }
    let pp = compute_pi_p(p)?.powf(p);
    Ok(RectangleSandwich {
        lower: pp / a.powf(p),
        upper: pp * (1.0 / a + 1.0 / b).powf(p),
    })
}

/// Torsion sandwich on `[0,a]×[0,b]`: closed lower bound and `b τ_p([0,a])`.
pub fn torsion_rectangle_sandwich(a: f64, b: f64, p: f64) -> Result<RectangleSandwich> {
    check_p(p)?;
    if !(a > 0.0 && b > 0.0) {
        return domain("rectangle sides must be positive");
    }
    Ok(RectangleSandwich {
        lower: torsion_lower_closed(a * b, 2.0 * (a + b), p)?,
        upper: b * interval_torsion(p, a)?,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsOptions {
    pub solve: bool,
    /// Also solve the torsion problem when `solve` is set.
    pub torsion: bool,
    /// Coarse mesh size; defaults to `sqrt(|Ω|) / 12`. The fine level is `h/2`.
    pub h: Option<f64>,
    pub profile_grid: usize,
    pub solver: SolverOptions,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            solve: true,
            torsion: true,
            h: None,
            profile_grid: 256,
            solver: SolverOptions::default(),
        }
    }
}

/// Every bound for one `(shape, norm, p)` and, optionally, the FEM values.
#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub shape_id: String,
    pub norm_id: String,
    pub p: f64,
    pub area: f64,
    pub perimeter_h: f64,
    pub kappa2: f64,
    pub inradius: f64,
    pub polya_upper: f64,
    pub web_upper: f64,
    pub faber_krahn_lower: f64,
    pub torsion_lower_closed: f64,
    pub torsion_lower_web: f64,
    pub torsion_upper: f64,
    pub deficit_normalized: f64,
    pub c_omega: f64,
    pub stability_rhs: f64,
    pub lambda_tilde: f64,
    pub stability_lhs: Option<f64>,
    pub solver_lambda: Option<f64>,
    pub solver_tau: Option<f64>,
    pub eps_lambda: f64,
    pub eps_tau: f64,
    pub h: Option<f64>,
    /// Signed slack per inequality; negative means violated.
    pub margins: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

pub const FLAG_WEB_NOT_CONVERGED: &str = "web bound not converged";
pub const FLAG_VACUOUS_STABILITY: &str = "stability right-hand side >= 1 (vacuous)";

impl BoundsReport {
    pub fn compute(
        shape_id: &str,
        poly: &ConvexPolygon,
        norm: &Norm,
        p: f64,
        opts: &BoundsOptions,
    ) -> Result<BoundsReport> {
        check_p(p)?;
        let area = poly.area();
        let perimeter_h = poly.aniso_perimeter(norm);
        let kappa2 = wulff_measure(norm)?;
        let profile = poly.inner_parallel_profile(norm, opts.profile_grid)?;
        let polya_upper = polya_bound(area, perimeter_h, p)?;
        let web = web_eigen_upper_bound(&profile, p)?;
        let faber_krahn_lower = faber_krahn_reference(poly, norm, p)?;
        let t_closed = torsion_lower_closed(area, perimeter_h, p)?;
        let t_web = torsion_lower_web(&profile, p)?;
        let torsion_upper = wulff_torsion(kappa2, p, 2, area)?;
        let deficit = isoperimetric_deficit_with(area, perimeter_h, kappa2);
        let sc = stability_constant(norm, p, perimeter_h)?;
        let rhs = stability_rhs(deficit.normalized, sc.c_omega);

        let mut flags = Vec::new();
        if !web.converged {
            flags.push(FLAG_WEB_NOT_CONVERGED.to_string());
        }
        if rhs >= 1.0 {
            flags.push(FLAG_VACUOUS_STABILITY.to_string());
        }

        let mut report = BoundsReport {
            shape_id: shape_id.to_string(),
            norm_id: norm.id(),
            p,
            area,
            perimeter_h,
            kappa2,
            inradius: profile.inradius,
            polya_upper,
            web_upper: web.value,
            faber_krahn_lower,
            torsion_lower_closed: t_closed,
            torsion_lower_web: t_web,
            torsion_upper,
            deficit_normalized: deficit.normalized,
            c_omega: sc.c_omega,
            stability_rhs: rhs,
            lambda_tilde: sc.lambda_tilde,
            stability_lhs: None,
            solver_lambda: None,
            solver_tau: None,
            eps_lambda: 0.0,
            eps_tau: 0.0,
            h: None,
            margins: BTreeMap::new(),
            flags,
        };
        report.refresh_margins();
        if opts.solve {
            let h = opts.h.unwrap_or(area.sqrt() / 12.0);
            let coarse = triangulate(poly, h)?;
            let fine = coarse.refine_uniform();
            let e0 = solve_eigen(&coarse, norm, p, &opts.solver)?;
            let e1 = solve_eigen(&fine, norm, p, &opts.solver)?;
            let le = estimate_discretization_error(e0.lambda, e1.lambda);
            let mut flags: Vec<&String> = e0.flags.iter().chain(&e1.flags).collect();
            let mut eps_l = le.eps_h;
            if let (Some(a), Some(b)) = (&e0.regularization, &e1.regularization) {
                eps_l += a.sensitivity.max(b.sensitivity);
            }
            report.attach_eigenvalue(le.extrapolated, eps_l, h);
            let (t0, t1);
            if opts.torsion {
                t0 = solve_torsion(&coarse, norm, p, &opts.solver)?;
                t1 = solve_torsion(&fine, norm, p, &opts.solver)?;
                let te = estimate_discretization_error(t0.tau, t1.tau);
                let mut eps_t = te.eps_h;
                if let (Some(a), Some(b)) = (&t0.regularization, &t1.regularization) {
                    eps_t += a.sensitivity.max(b.sensitivity);
                }
                flags.extend(t0.flags.iter().chain(&t1.flags));
                report.attach_torsion(te.extrapolated, eps_t);
            }
            for f in flags {
                if !report.flags.contains(f) {
                    report.flags.push(f.clone());
                }
            }
        }
        Ok(report)
    }

    /// Records solver values with their slacks and fills the dependent margins.
    pub fn attach_eigenvalue(&mut self, lambda: f64, eps_lambda: f64, h: f64) {
        self.solver_lambda = Some(lambda);
        self.eps_lambda = eps_lambda;
        self.h = Some(h);
        self.stability_lhs = Some((lambda - self.lambda_tilde) / lambda);
        self.refresh_margins();
    }

    pub fn attach_torsion(&mut self, tau: f64, eps_tau: f64) {
        self.solver_tau = Some(tau);
        self.eps_tau = eps_tau;
        self.refresh_margins();
    }

    /// Recomputes every margin from the current field values.
    /// A margin is the signed slack of one inequality; negative means violated.
    pub fn refresh_margins(&mut self) {
        let m = &mut self.margins;
        m.clear();
        m.insert(
            "web_le_polya".to_string(),
            self.polya_upper + 1e-9 - self.web_upper,
        );
        m.insert(
            "torsion_closed_le_web".to_string(),
            self.torsion_lower_web - self.torsion_lower_closed
                + 1e-12 * self.torsion_lower_web.abs(),
        );
        if let Some(lambda) = self.solver_lambda {
            let e = self.eps_lambda;
            m.insert("polya".to_string(), self.polya_upper + e - lambda);
            m.insert(
                "faber_krahn".to_string(),
                lambda + e - self.faber_krahn_lower,
            );
            m.insert("web_upper".to_string(), self.web_upper + e - lambda);
            let lhs = (lambda - self.lambda_tilde) / lambda;
            m.insert(
                "stability".to_string(),
                self.stability_rhs + e / lambda - lhs,
            );
        }
        if let Some(tau) = self.solver_tau {
            let e = self.eps_tau;
            m.insert(
                "torsion_web_le_fem".to_string(),
                tau + e - self.torsion_lower_web,
            );
            m.insert("torsion_upper".to_string(), self.torsion_upper + e - tau);
        }
    }

    pub fn violations(&self) -> Vec<String> {
        self.margins
            .iter()
            .filter(|(_, &v)| !(v >= 0.0))
            .map(|(k, _)| k.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::Norm;
    use std::f64::consts::PI;

    #[test]
    fn polya_values() {
        let v = polya_bound(PI, 2.0 * PI, 2.0).unwrap();
        assert!((v - PI * PI).abs() < 1e-12);
        // ℓ^p gauge on a rectangle: P_H = 2(a+b)
        for &p in &[1.5, 2.0, 3.0] {
            let (a, b) = (1.0, 2.5);
            let rect = ConvexPolygon::rectangle(a, b).unwrap();
            let per = rect.aniso_perimeter(&Norm::lr(p).unwrap());
            assert!((per - 2.0 * (a + b)).abs() < 1e-12);
            let v = polya_bound(a * b, per, p).unwrap();
            let pi_p = compute_pi_p(p).unwrap();
            assert!((v - pi_p.powf(p) * (1.0 / a + 1.0 / b).powf(p)).abs() < 1e-10 * v);
            let s = 2.0;
            let vs = polya_bound(a * b * s * s, per * s, p).unwrap();
            assert!((vs - s.powf(-p) * v).abs() < 1e-12 * v);
        }
    }

    #[test]
    fn torsion_closed_values() {
        assert!((torsion_lower_closed(1.0, 4.0, 2.0).unwrap() - 1.0 / 48.0).abs() < 1e-15);
        let (a, b, p): (f64, f64, f64) = (1.0, 3.0, 3.0);
        let expected = (p - 1.0) / (2.0 * p - 1.0) * (a * b).powf((2.0 * p - 1.0) / (p - 1.0))
            / (2f64.powf(p / (p - 1.0)) * (a + b).powf(p / (p - 1.0)));
        assert!((torsion_lower_closed(a * b, 2.0 * (a + b), p).unwrap() - expected).abs() < 1e-14);
        let s: f64 = 2.0;
        let v = torsion_lower_closed(2.0, 6.0, p).unwrap();
        let vs = torsion_lower_closed(2.0 * s * s, 6.0 * s, p).unwrap();
        let e = 2.0 * (2.0 * p - 1.0) / (p - 1.0) - p / (p - 1.0);
        assert!((vs - s.powf(e) * v).abs() < 1e-12 * vs);
    }

    #[test]
    fn web_bound_on_square_lies_between_eigenvalue_and_polya() {
        let sq = ConvexPolygon::rectangle(1.0, 1.0).unwrap();
        let prof = sq.inner_parallel_profile(&Norm::euclidean(), 256).unwrap();
        let w = web_eigen_upper_bound(&prof, 2.0).unwrap();
        assert!(
            w.value >= 2.0 * PI * PI && w.value <= 4.0 * PI * PI,
            "{}",
            w.value
        );
        assert!(w.value <= w.seed_value);
        assert!(w.seed_value <= 4.0 * PI * PI * (1.0 + 1e-9));
        let linear = web_rayleigh_quotient(&prof, 2.0, |t| t).unwrap();
        assert!(linear.is_finite() && linear >= w.value);
    }

    #[test]
    fn web_bound_on_disk_is_bessel_value() {
        let disk = ConvexPolygon::regular_ngon(512, 1.0).unwrap();
        let prof = disk
            .inner_parallel_profile(&Norm::euclidean(), 256)
            .unwrap();
        let w = web_eigen_upper_bound(&prof, 2.0).unwrap();
        let j = 5.783185962946784;
        assert!(
            w.value >= j * (1.0 - 1e-3) && w.value <= j * 1.01,
            "{}",
            w.value
        );
        assert!(w.converged);
    }

    #[test]
    fn web_torsion_on_disk_and_square() {
        let disk = ConvexPolygon::regular_ngon(512, 1.0).unwrap();
        let prof = disk
            .inner_parallel_profile(&Norm::euclidean(), 256)
            .unwrap();
        let t = torsion_lower_web(&prof, 2.0).unwrap();
        assert!((PI / 12.0..=PI / 8.0).contains(&t), "{t}");
        let sq = ConvexPolygon::rectangle(1.0, 1.0).unwrap();
        let prof = sq.inner_parallel_profile(&Norm::euclidean(), 256).unwrap();
        let t = torsion_lower_web(&prof, 2.0).unwrap();
        assert!((1.0 / 48.0..=0.03514).contains(&t), "{t}");
    }

    #[test]
    fn sandwiches() {
        let s = rectangle_sandwich(1.0, 1.0, 2.0).unwrap();
        assert!((s.lower - PI * PI).abs() < 1e-12 && (s.upper - 4.0 * PI * PI).abs() < 1e-11);
        let s = rectangle_sandwich(1.0, 1e12, 2.0).unwrap();
        assert!((s.upper - s.lower).abs() < 1e-9);
        for &p in &[1.5, 2.0, 3.0] {
            let t = torsion_rectangle_sandwich(1.0, 4.0, p).unwrap();
            let ratio = t.lower / t.upper;
            assert!((ratio - (4.0f64 / 5.0).powf(p / (p - 1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn stability_rhs_vanishes_on_wulff_shapes() {
        let norm = Norm::lr(3.0).unwrap();
        let k = wulff_measure(&norm).unwrap();
        let d = isoperimetric_deficit_with(k, 2.0 * k, k);
        assert!(d.normalized.abs() < 1e-15);
        assert_eq!(stability_rhs(d.normalized, 3.0), 0.0);
    }
}
