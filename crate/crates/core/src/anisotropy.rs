//! Anisotropic norms `H`, their polars `H°`, and Wulff shapes.
//!
//! A [`Norm`] is built from a serializable [`NormSpec`]. Closed forms are used
//! for every supported kind; the numeric polar in [`polar_value_numeric`]
//! is kept for norm kinds without one and doubles as a cross-check.
//!
//! Polygonal gauges are piecewise linear. Their gradient is only defined
//! off the ridge directions; on a ridge the gradient of the
//! lexicographically smallest active facet normal is returned. Solvers in
//! [`crate::fem`] regularize these gauges instead of relying on that choice.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{convex_hull, ConvexPolygon};
use crate::vec2::{Sym2, Vec2};

/// Serializable description of an anisotropic norm.
///
/// JSON forms: `{"kind":"euclidean"}`, `{"kind":"lr","r":3.0}`,
/// `{"kind":"polygonal","vertices":[[x,y],...]}`,
/// `{"kind":"scaled_euclidean","beta":2.0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormSpec {
    Euclidean,
    Lr {
        r: f64,
    },
    /// Gauge whose unit ball is the convex hull of `vertices`.
    Polygonal {
        vertices: Vec<[f64; 2]>,
    },
    ScaledEuclidean {
        beta: f64,
    },
}

impl NormSpec {
    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            NormSpec::Euclidean => "euclidean".to_string(),
            NormSpec::Lr { r } => format!("l{}", fmt_exponent(*r)),
            NormSpec::Polygonal { vertices } => format!("polygonal{}", vertices.len()),
            NormSpec::ScaledEuclidean { beta } => format!("euclidean*{}", fmt_exponent(*beta)),
        }
    }
}

fn fmt_exponent(r: f64) -> String {
    if r.is_infinite() {
        "inf".to_string()
    } else if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Euclidean {
        scale: f64,
    },
    Lr {
        r: f64,
    },
    Polygonal {
        vertices: Vec<Vec2>,
        facets: Vec<Vec2>,
    },
}

/// An anisotropic norm `H` with its ellipticity constants `alpha <= beta`.
///
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct Norm {
    spec: NormSpec,
    kind: Kind,
    alpha: f64,
    beta: f64,
    dimension: usize,
    solver_admissible: bool,
}

impl Norm {
    /// Builds a norm admissible for the variational solvers where possible.
    ///
    /// `Lr` requires `1 < r < inf`; use [`Norm::geometry_only`] for `r = 1`
    /// or `r = inf`.
    pub fn new(spec: NormSpec) -> Result<Norm> {
        Self::build(spec, false)
    }

    /// Like [`Norm::new`] but also accepts the non-smooth `l1` / `l-inf` norms.
    pub fn geometry_only(spec: NormSpec) -> Result<Norm> {
        Self::build(spec, true)
    }

    pub fn euclidean() -> Norm {
        Self::new(NormSpec::Euclidean).expect("euclidean norm is valid")
    }

    pub fn lr(r: f64) -> Result<Norm> {
        Self::new(NormSpec::Lr { r })
    }

    pub fn polygonal(vertices: &[[f64; 2]]) -> Result<Norm> {
        Self::new(NormSpec::Polygonal {
            vertices: vertices.to_vec(),
        })
    }

    pub fn scaled_euclidean(beta: f64) -> Result<Norm> {
        Self::new(NormSpec::ScaledEuclidean { beta })
    }

    fn build(spec: NormSpec, allow_nonsmooth: bool) -> Result<Norm> {
        let (kind, smooth) = match &spec {
            NormSpec::Euclidean => (Kind::Euclidean { scale: 1.0 }, true),
            NormSpec::ScaledEuclidean { beta } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::InvalidNorm(format!("scale must be > 0, got {beta}")));
                }
                (Kind::Euclidean { scale: *beta }, true)
            }
            NormSpec::Lr { r } => {
                let r = *r;
                if r.is_nan() || r < 1.0 {
                    return Err(Error::InvalidNorm(format!(
                        "exponent must be >= 1, got {r}"
                    )));
                }
                let smooth = r > 1.0 && r.is_finite();
                if !smooth && !allow_nonsmooth {
                    return Err(Error::InvalidNorm(format!(
                        "l{r} is not differentiable; use Norm::geometry_only"
                    )));
                }
                (Kind::Lr { r }, smooth)
            }
            NormSpec::Polygonal { vertices } => {
                let pts: Vec<Vec2> = vertices.iter().map(|&v| Vec2::from(v)).collect();
                let (vertices, facets) = polygon_gauge(&pts)?;
                (Kind::Polygonal { vertices, facets }, false)
            }
        };
        let mut norm = Norm {
            spec,
            kind,
            alpha: 0.0,
            beta: 0.0,
            dimension: 2,
            solver_admissible: smooth,
        };
        let (alpha, beta) = norm.sampled_ellipticity();
        norm.alpha = alpha;
        norm.beta = beta;
        Ok(norm)
    }

    /// Same norm acting on `R^n`. Only Euclidean and `Lr` kinds extend.
    pub fn with_dimension(mut self, n: usize) -> Result<Norm> {
        if n < 2 {
            return domain(format!("dimension must be >= 2, got {n}"));
        }
        match self.kind {
            Kind::Euclidean { scale } => {
                self.alpha = scale;
                self.beta = scale;
            }
            Kind::Lr { r } => {
                let k = (n as f64).powf(1.0 / r - 0.5);
                let scale_ok = if r >= 2.0 { (k, 1.0) } else { (1.0, k) };
                self.alpha = scale_ok.0;
                self.beta = scale_ok.1;
            }
            Kind::Polygonal { .. } => {
                if n != 2 {
                    return Err(Error::InvalidNorm(
                        "polygonal gauges are planar".to_string(),
                    ));
                }
            }
        }
        self.dimension = n;
        Ok(self)
    }

    pub fn spec(&self) -> &NormSpec {
        &self.spec
    }

    pub fn id(&self) -> String {
        self.spec.id()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// True when `H` is C¹ away from the origin and `H^p` is strictly convex.
    pub fn is_solver_admissible(&self) -> bool {
        self.solver_admissible
    }

    pub fn is_polygonal(&self) -> bool {
        match self.kind {
            Kind::Polygonal { .. } => true,
            Kind::Lr { r } => r == 1.0 || r.is_infinite(),
            Kind::Euclidean { .. } => false,
        }
    }

    /// `H(xi)` for a vector of any supported dimension.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        self.check_dim(xi.len())?;
        Ok(match &self.kind {
            Kind::Euclidean { scale } => scale * xi.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Kind::Lr { r } => lr_norm(xi, *r),
            Kind::Polygonal { .. } => self.value(Vec2::new(xi[0], xi[1])),
        })
    }

    /// `∇H(xi)`; an error at the origin.
    pub fn grad(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(xi.len())?;
        if xi.iter().all(|&x| x == 0.0) {
            return domain("gradient of a norm is undefined at the origin");
        }
        Ok(match &self.kind {
            Kind::Euclidean { scale } => {
                let n = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                xi.iter().map(|x| scale * x / n).collect()
            }
            Kind::Lr { r } => lr_gradient(xi, *r),
            Kind::Polygonal { .. } => self.gradient(Vec2::new(xi[0], xi[1])).to_array().to_vec(),
        })
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got,
            });
        }
        Ok(())
    }

    /// Planar `H(xi)`.
    #[inline]
    pub fn value(&self, xi: Vec2) -> f64 {
        match &self.kind {
            Kind::Euclidean { scale } => scale * xi.norm(),
            Kind::Lr { r } => lr_norm(&[xi.x, xi.y], *r),
            Kind::Polygonal { facets, .. } => facets
                .iter()
                .map(|f| f.dot(xi))
                .fold(f64::NEG_INFINITY, f64::max)
                .max(0.0),
        }
    }

    /// Planar `∇H(xi)`; returns zero at the origin.
    #[inline]
    pub fn gradient(&self, xi: Vec2) -> Vec2 {
        if xi == Vec2::ZERO {
            return Vec2::ZERO;
        }
        match &self.kind {
            Kind::Euclidean { scale } => xi * (scale / xi.norm()),
            Kind::Lr { r } => {
                Vec2::from(<[f64; 2]>::try_from(lr_gradient(&[xi.x, xi.y], *r).as_slice()).unwrap())
            }
            Kind::Polygonal { facets, .. } => active_facet(facets, xi),
        }
    }

    /// Planar Hessian of `H`, positive semidefinite.
    ///
    /// For `Lr` with `r < 2` the diagonal singularity on the axes is capped at
    /// `|xi_i| >= 1e-6 |xi|`, which keeps Newton systems finite.
    pub fn hessian(&self, xi: Vec2) -> Sym2 {
        let n = xi.norm();
        if n == 0.0 {
            return Sym2::ZERO;
        }
        match &self.kind {
            Kind::Euclidean { scale } => {
                let u = xi * (1.0 / n);
                Sym2::identity()
                    .add(Sym2::outer(u).scale(-1.0))
                    .scale(scale / n)
            }
            Kind::Lr { r } => {
                let r = *r;
                if !(r > 1.0 && r.is_finite()) {
                    return Sym2::ZERO;
                }
                let h = self.value(xi);
                let floor = 1e-12 * n / h;
                let ax = (xi.x.abs() / h).max(floor);
                let ay = (xi.y.abs() / h).max(floor);
                let g = self.gradient(xi);
                let d = Sym2 {
                    xx: ax.powf(r - 2.0),
                    xy: 0.0,
                    yy: ay.powf(r - 2.0),
                };
                d.add(Sym2::outer(g).scale(-1.0))
                    .scale((r - 1.0) / h)
                    .clamp_spectrum(0.0)
            }
            Kind::Polygonal { .. } => Sym2::ZERO,
        }
    }

    /// `H°(v)` evaluated directly from the closed form.
    #[inline]
    pub fn polar_value(&self, v: Vec2) -> f64 {
        match &self.kind {
            Kind::Euclidean { scale } => v.norm() / scale,
            Kind::Lr { r } => lr_norm(&[v.x, v.y], conjugate(*r)),
            Kind::Polygonal { vertices, .. } => vertices
                .iter()
                .map(|w| w.dot(v))
                .fold(f64::NEG_INFINITY, f64::max)
                .max(0.0),
        }
    }

    /// The polar norm `H°` as a [`Norm`].
    pub fn polar(&self) -> Norm {
        let spec = match &self.kind {
            Kind::Euclidean { scale } => {
                if *scale == 1.0 {
                    NormSpec::Euclidean
                } else {
                    NormSpec::ScaledEuclidean { beta: 1.0 / scale }
                }
            }
            Kind::Lr { r } => NormSpec::Lr { r: conjugate(*r) },
            Kind::Polygonal { facets, .. } => NormSpec::Polygonal {
                vertices: facets.iter().map(|f| f.to_array()).collect(),
            },
        };
        let mut polar = Norm::build(spec, true).expect("polar of a valid norm is valid");
        if self.dimension != 2 {
            polar = polar
                .with_dimension(self.dimension)
                .expect("dimension carries over");
        }
        polar
    }

    /// Vertices of the unit Wulff shape `{H° < 1}` when it is a polygon.
    pub fn wulff_polygon_vertices(&self) -> Option<Vec<Vec2>> {
        match &self.kind {
            Kind::Polygonal { facets, .. } => Some(facets.clone()),
            Kind::Lr { r } if *r == 1.0 => Some(vec![
                Vec2::new(1.0, -1.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(-1.0, 1.0),
                Vec2::new(-1.0, -1.0),
            ]),
            Kind::Lr { r } if r.is_infinite() => Some(vec![
                Vec2::new(1.0, 0.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(-1.0, 0.0),
                Vec2::new(0.0, -1.0),
            ]),
            _ => None,
        }
    }

    fn sampled_ellipticity(&self) -> (f64, f64) {
        const SAMPLES: usize = 4096;
        let f = |theta: f64| self.value(Vec2::from_angle(theta));
        let dt = PI / SAMPLES as f64;
        let (mut imin, mut imax) = (0, 0);
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..SAMPLES {
            let v = f(k as f64 * dt);
            if v < vmin {
                vmin = v;
                imin = k;
            }
            if v > vmax {
                vmax = v;
                imax = k;
            }
        }
        let th_min = golden_section(f, (imin as f64 - 1.0) * dt, (imin as f64 + 1.0) * dt, 1e-12);
        let th_max = golden_section(
            |t| -f(t),
            (imax as f64 - 1.0) * dt,
            (imax as f64 + 1.0) * dt,
            1e-12,
        );
        (vmin.min(f(th_min)), vmax.max(f(th_max)))
    }
}

fn conjugate(r: f64) -> f64 {
    if r == 1.0 {
        f64::INFINITY
    } else if r.is_infinite() {
        1.0
    } else {
        r / (r - 1.0)
    }
}

fn lr_norm(xi: &[f64], r: f64) -> f64 {
    let m = xi.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    if r.is_infinite() {
        return m;
    }
    if r == 1.0 {
        return xi.iter().map(|x| x.abs()).sum();
    }
    m * xi
        .iter()
        .map(|x| (x.abs() / m).powf(r))
        .sum::<f64>()
        .powf(1.0 / r)
}

fn lr_gradient(xi: &[f64], r: f64) -> Vec<f64> {
    if r == 1.0 {
        return xi
            .iter()
            .map(|x| if *x == 0.0 { 0.0 } else { x.signum() })
            .collect();
    }
    if r.is_infinite() {
        let (k, _) = xi.iter().enumerate().fold((0, -1.0), |(bk, bv), (k, x)| {
            if x.abs() > bv {
                (k, x.abs())
            } else {
                (bk, bv)
            }
        });
        return (0..xi.len())
            .map(|i| if i == k { xi[k].signum() } else { 0.0 })
            .collect();
    }
    let h = lr_norm(xi, r);
    xi.iter()
        .map(|x| x.signum() * (x.abs() / h).powf(r - 1.0))
        .collect()
}

fn active_facet(facets: &[Vec2], xi: Vec2) -> Vec2 {
    let mut best = facets[0];
    let mut best_v = best.dot(xi);
    for &f in &facets[1..] {
        let v = f.dot(xi);
        let tol = 1e-12 * best_v.abs().max(v.abs()).max(f64::MIN_POSITIVE);
        if v > best_v + tol {
            best = f;
            best_v = v;
        } else if (v - best_v).abs() <= tol && (f.x, f.y) < (best.x, best.y) {
            best = f;
            best_v = best_v.max(v);
        }
    }
    best
}

/// Validates a symmetric polygonal unit ball and returns its CCW vertices and
/// facet functionals `n_f` with `{n_f · x <= 1}` describing the ball.
fn polygon_gauge(pts: &[Vec2]) -> Result<(Vec<Vec2>, Vec<Vec2>)> {
    if pts.len() < 4 {
        return Err(Error::InvalidNorm(
            "a centrally symmetric polygon needs at least 4 vertices".to_string(),
        ));
    }
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let hull = convex_hull(pts, 1e-12);
    let mut distinct: Vec<Vec2> = Vec::new();
    for &p in pts {
        if !distinct.iter().any(|q| (*q - p).norm() <= 1e-12 * scale) {
            distinct.push(p);
        }
    }
    if hull.len() != distinct.len() {
        return Err(Error::InvalidNorm(
            "gauge vertices must be in convex position".to_string(),
        ));
    }
    for &v in &hull {
        if !hull.iter().any(|w| (*w + v).norm() <= 1e-9 * scale) {
            return Err(Error::InvalidNorm(
                "gauge polygon must be symmetric under x -> -x".to_string(),
            ));
        }
    }
    let m = hull.len();
    let mut facets = Vec::with_capacity(m);
    for i in 0..m {
        let a = hull[i];
        let b = hull[(i + 1) % m];
        let outward = (b - a).perp_cw();
        let c = outward.dot(a);
        if c <= 1e-12 * scale * outward.norm() {
            return Err(Error::InvalidNorm(
                "origin must lie strictly inside the gauge polygon".to_string(),
            ));
        }
        facets.push(outward * (1.0 / c));
    }
    Ok((hull, facets))
}

/// Golden-section minimization of `f` on `[a, b]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `H°(v) = sup_ξ (ξ·v)/H(ξ)` by global search over the angle of `ξ`:
/// 256 coarse seeds followed by golden-section refinement to `1e-10`.
pub fn polar_value_numeric(norm: &Norm, v: Vec2) -> f64 {
    const SEEDS: usize = 256;
    let ratio = |theta: f64| {
        let xi = Vec2::from_angle(theta);
        xi.dot(v) / norm.value(xi)
    };
    let dt = 2.0 * PI / SEEDS as f64;
    let best = (0..SEEDS)
        .max_by(|&i, &j| ratio(i as f64 * dt).total_cmp(&ratio(j as f64 * dt)))
        .unwrap_or(0);
    let t = golden_section(
        |t| -ratio(t),
        (best as f64 - 1.0) * dt,
        (best as f64 + 1.0) * dt,
        1e-10,
    );
    ratio(t).max(ratio(best as f64 * dt)).max(0.0)
}

/// Maximum deviations in the identities linking `H` and `H°`.
#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub samples: usize,
    /// `max |H(∇H°(ξ)) - 1|`
    pub h_of_polar_gradient: f64,
    /// `max |H°(∇H(ξ)) - 1|`
    pub polar_of_h_gradient: f64,
    /// `max |H°(ξ) ∇H(∇H°(ξ)) - ξ|_inf`
    pub reconstruction: f64,
    /// Samples deviating by more than `1e-8`.
    pub failures: usize,
}

impl DualityReport {
    pub fn max_deviation(&self) -> f64 {
        self.h_of_polar_gradient
            .max(self.polar_of_h_gradient)
            .max(self.reconstruction)
    }
}

pub fn check_duality_identities(norm: &Norm, samples: usize, seed: u64) -> DualityReport {
    let polar = norm.polar();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = DualityReport {
        samples,
        h_of_polar_gradient: 0.0,
        polar_of_h_gradient: 0.0,
        reconstruction: 0.0,
        failures: 0,
    };
    for _ in 0..samples {
        let xi = loop {
            let v = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if v.norm() > 1e-3 {
                break v;
            }
        };
        let gp = polar.gradient(xi);
        let gh = norm.gradient(xi);
        let d1 = (norm.value(gp) - 1.0).abs();
        let d2 = (polar.value(gh) - 1.0).abs();
        let rec = norm.gradient(gp) * polar.value(xi) - xi;
        let d3 = rec.x.abs().max(rec.y.abs());
        rep.h_of_polar_gradient = rep.h_of_polar_gradient.max(d1);
        rep.polar_of_h_gradient = rep.polar_of_h_gradient.max(d2);
        rep.reconstruction = rep.reconstruction.max(d3);
        if d1.max(d2).max(d3) > 1e-8 {
            rep.failures += 1;
        }
    }
    rep
}

/// The Wulff shape `{x : H°(x - center) < R}` with a sampled or exact boundary.
#[derive(Clone, Debug)]
pub struct WulffShape {
    pub norm: Norm,
    pub radius: f64,
    pub center: Vec2,
    /// Counterclockwise boundary points; exact vertices for polygonal Wulff shapes.
    pub boundary: Vec<Vec2>,
    pub exact: bool,
}

impl WulffShape {
    pub fn new(norm: &Norm, radius: f64, center: Vec2, resolution: usize) -> Result<WulffShape> {
        if !(radius > 0.0 && radius.is_finite()) {
            return domain(format!("Wulff radius must be > 0, got {radius}"));
        }
        if resolution < 16 {
            return domain(format!("resolution must be >= 16, got {resolution}"));
        }
        let (boundary, exact) = match norm.wulff_polygon_vertices() {
            Some(vs) => (vs.into_iter().map(|v| center + v * radius).collect(), true),
            None => {
                let pts = (0..resolution)
                    .map(|k| {
                        let u = Vec2::from_angle(2.0 * PI * k as f64 / resolution as f64);
                        center + u * ray_exit(norm, u, radius)
                    })
                    .collect();
                (pts, false)
            }
        };
        Ok(WulffShape {
            norm: norm.clone(),
            radius,
            center,
            boundary,
            exact,
        })
    }

    pub fn polygon(&self) -> Result<ConvexPolygon> {
        ConvexPolygon::new(&self.boundary)
    }
}

/// Distance `s` along the unit direction `u` with `H°(s u) = R`.
///
/// Homogeneity makes the root explicit; one Newton correction absorbs
/// rounding in the division.
fn ray_exit(norm: &Norm, u: Vec2, radius: f64) -> f64 {
    let hu = norm.polar_value(u);
    let mut s = radius / hu;
    let resid = norm.polar_value(u * s) - radius;
    s -= resid / hu;
    s
}

/// Area `κ` of the unit Wulff shape.
///
/// Planar polygonal Wulff shapes use the exact shoelace area; smooth ones
/// use inscribed polygons with `2^15` and `2^16` rays and one Richardson
/// step. For `n >= 3` only Euclidean and `Lr` norms are supported, through
/// the Gamma-function volume of the `l^q` unit ball.
pub fn wulff_measure(norm: &Norm) -> Result<f64> {
    let n = norm.dimension();
    if n == 2 {
        if let Some(vs) = norm.wulff_polygon_vertices() {
            return Ok(shoelace(&vs));
        }
        let fine = sampled_wulff_area(norm, 1 << 16);
        let coarse = sampled_wulff_area(norm, 1 << 15);
        return Ok(fine + (fine - coarse) / 3.0);
    }
    let q = match norm.spec() {
        NormSpec::Euclidean => 2.0,
        NormSpec::ScaledEuclidean { .. } => 2.0,
        NormSpec::Lr { r } => conjugate(*r),
        NormSpec::Polygonal { .. } => {
            return domain("Wulff volume for n >= 3 needs a Euclidean or l^r norm")
        }
    };
    let scale = match norm.spec() {
        NormSpec::ScaledEuclidean { beta } => beta.powi(n as i32),
        _ => 1.0,
    };
    Ok(scale * lq_ball_volume(q, n))
}

/// Volume of the unit `l^q` ball in `R^n`: `(2Γ(1+1/q))^n / Γ(1+n/q)`.
pub fn lq_ball_volume(q: f64, n: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    if q.is_infinite() {
        return 2f64.powi(n as i32);
    }
    let nf = n as f64;
    (nf * (2f64.ln() + ln_gamma(1.0 + 1.0 / q)) - ln_gamma(1.0 + nf / q)).exp()
}

fn sampled_wulff_area(norm: &Norm, resolution: usize) -> f64 {
    let dt = 2.0 * PI / resolution as f64;
    let rho: Vec<f64> = (0..resolution)
        .map(|k| 1.0 / norm.polar_value(Vec2::from_angle(k as f64 * dt)))
        .collect();
    let s = dt.sin();
    0.5 * s
        * (0..resolution)
            .map(|k| rho[k] * rho[(k + 1) % resolution])
            .sum::<f64>()
}

pub(crate) fn shoelace(pts: &[Vec2]) -> f64 {
    let m = pts.len();
    0.5 * (0..m).map(|i| pts[i].cross(pts[(i + 1) % m])).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_gauge() -> Norm {
        Norm::polygonal(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]).unwrap()
    }

    #[test]
    fn eval_examples() {
        let e = Norm::euclidean();
        assert_eq!(e.eval(&[3.0, 4.0]).unwrap(), 5.0);
        let l3 = Norm::lr(3.0).unwrap();
        assert!((l3.eval(&[1.0, 1.0]).unwrap() - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
        for n in [e, l3, square_gauge()] {
            assert_eq!(n.eval(&[0.0, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn eval_rejects_wrong_dimension() {
        let e = Norm::euclidean();
        assert!(matches!(
            e.eval(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
        let e3 = Norm::euclidean().with_dimension(3).unwrap();
        assert!((e3.eval(&[1.0, 2.0, 2.0]).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn grad_examples() {
        let g = Norm::euclidean().grad(&[3.0, 4.0]).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let l3 = Norm::lr(3.0).unwrap();
        let g = l3.grad(&[-1.0, -1.0]).unwrap();
        let expect = -(2f64.powf(-2.0 / 3.0));
        assert!((g[0] - expect).abs() < 1e-14 && (g[1] - expect).abs() < 1e-14);
        assert!(l3.grad(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn grad_matches_finite_differences() {
        let l3 = Norm::lr(3.0).unwrap();
        let h = 1e-6;
        let xi = Vec2::new(1.0, 1.0);
        let g = l3.gradient(xi);
        let fd = Vec2::new(
            (l3.value(xi + Vec2::new(h, 0.0)) - l3.value(xi - Vec2::new(h, 0.0))) / (2.0 * h),
            (l3.value(xi + Vec2::new(0.0, h)) - l3.value(xi - Vec2::new(0.0, h))) / (2.0 * h),
        );
        assert!((g - fd).norm() < 1e-6);
        assert!((g.x - 2f64.powf(-2.0 / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let h = 1e-6;
        for norm in [
            Norm::euclidean(),
            Norm::lr(3.0).unwrap(),
            Norm::lr(1.5).unwrap(),
        ] {
            for xi in [Vec2::new(0.7, -0.3), Vec2::new(-1.2, 2.5)] {
                let hs = norm.hessian(xi);
                let dx = (norm.gradient(xi + Vec2::new(h, 0.0))
                    - norm.gradient(xi - Vec2::new(h, 0.0)))
                    * (0.5 / h);
                let dy = (norm.gradient(xi + Vec2::new(0.0, h))
                    - norm.gradient(xi - Vec2::new(0.0, h)))
                    * (0.5 / h);
                assert!((hs.xx - dx.x).abs() < 1e-6, "{:?}", norm.spec());
                assert!((hs.xy - dx.y).abs() < 1e-6);
                assert!((hs.yy - dy.y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn polar_closed_forms() {
        let l2 = Norm::lr(2.0).unwrap().polar();
        assert_eq!(l2.spec(), &NormSpec::Lr { r: 2.0 });
        let l3p = Norm::lr(3.0).unwrap().polar();
        assert_eq!(l3p.spec(), &NormSpec::Lr { r: 1.5 });
        let sq = square_gauge().polar();
        let vs = sq.wulff_polygon_vertices().unwrap();
        // polar of the diamond gauge has the square as Wulff shape
        assert_eq!(vs.len(), 4);
        let NormSpec::Polygonal { vertices } = sq.spec() else {
            panic!()
        };
        let mut got: Vec<[f64; 2]> = vertices.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [[-1.0, 0.0], [0.0, -1.0], [0.0, 1.0], [1.0, 0.0]];
        for (g, e) in got.iter().zip(expect.iter()) {
            assert!((g[0] - e[0]).abs() < 1e-14 && (g[1] - e[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn polar_is_an_involution() {
        for norm in [
            Norm::lr(3.0).unwrap(),
            square_gauge(),
            Norm::scaled_euclidean(2.0).unwrap(),
        ] {
            let back = norm.polar().polar();
            for k in 0..50 {
                let xi = Vec2::from_angle(0.37 * k as f64) * (1.0 + k as f64 * 0.1);
                assert!((back.value(xi) - norm.value(xi)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn numeric_polar_agrees_with_closed_form() {
        for norm in [
            Norm::lr(3.0).unwrap(),
            square_gauge(),
            Norm::lr(1.25).unwrap(),
        ] {
            for k in 0..20 {
                let v = Vec2::from_angle(0.31 * k as f64 + 0.1) * 1.7;
                let exact = norm.polar_value(v);
                assert!((polar_value_numeric(&norm, v) - exact).abs() < 1e-9 * exact.max(1.0));
            }
        }
    }

    #[test]
    fn duality_identities() {
        let rep = check_duality_identities(&Norm::euclidean(), 100, 1);
        assert!(rep.max_deviation() < 1e-12);
        let rep = check_duality_identities(&Norm::lr(3.0).unwrap(), 100, 2);
        assert!(rep.max_deviation() <= 1e-8, "{rep:?}");
        assert_eq!(rep.failures, 0);
        let l15 = Norm::lr(1.5).unwrap();
        let g = l15.polar().gradient(Vec2::new(1.0, 0.0));
        assert_eq!(l15.value(g), 1.0);
    }

    #[test]
    fn ellipticity_constants() {
        let l3 = Norm::lr(3.0).unwrap();
        assert!((l3.beta() - 1.0).abs() < 1e-12);
        assert!((l3.alpha() - 2f64.powf(1.0 / 3.0 - 0.5)).abs() < 1e-10);
        let sq = square_gauge();
        // unit ball [-1,1]^2, so H is the max-norm
        assert!((sq.alpha() - 0.5f64.sqrt()).abs() < 1e-10);
        assert!((sq.beta() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(Norm::lr(1.0).is_err());
        assert!(Norm::geometry_only(NormSpec::Lr { r: 1.0 }).is_ok());
        assert!(Norm::lr(0.5).is_err());
        // not symmetric
        assert!(Norm::polygonal(&[[2.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]).is_err());
        // origin outside
        assert!(Norm::polygonal(&[[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]).is_err());
        assert!(
            Norm::polygonal(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [0.1, 0.1]])
                .is_err()
        );
    }

    #[test]
    fn wulff_shapes() {
        let sq = WulffShape::new(&square_gauge(), 2.0, Vec2::ZERO, 64).unwrap();
        assert!(sq.exact);
        let mut vs: Vec<[f64; 2]> = sq.boundary.iter().map(|v| v.to_array()).collect();
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vs, vec![[-2.0, 0.0], [0.0, -2.0], [0.0, 2.0], [2.0, 0.0]]);

        let l3 = Norm::lr(3.0).unwrap();
        let w = WulffShape::new(&l3, 1.0, Vec2::new(0.5, -1.0), 256).unwrap();
        let l15 = Norm::lr(1.5).unwrap();
        for b in &w.boundary {
            let x = *b - w.center;
            assert!((l3.polar_value(x) - 1.0).abs() <= 1e-12);
            assert!((l15.value(x) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn wulff_measures() {
        assert!((wulff_measure(&Norm::euclidean()).unwrap() - PI).abs() < 1e-10);
        assert!((wulff_measure(&square_gauge()).unwrap() - 2.0).abs() < 1e-15);
        let g = statrs::function::gamma::gamma;
        let exact = 4.0 * g(1.0 + 2.0 / 3.0).powi(2) / g(1.0 + 4.0 / 3.0);
        let got = wulff_measure(&Norm::lr(3.0).unwrap()).unwrap();
        assert!((got - exact).abs() < 1e-8, "{got} vs {exact}");
        let e3 = Norm::euclidean().with_dimension(3).unwrap();
        assert!((wulff_measure(&e3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
    }
}
