//! Convex polygon geometry: anisotropic perimeter, distance, inradius,
//! Minkowski sums with Wulff shapes and inner parallel bodies.

mod minkowski;
mod profile;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::anisotropy::{wulff_measure, Norm, NormSpec, WulffShape};
use crate::error::{domain, Error, Result};
use crate::vec2::Vec2;

pub use minkowski::{fit_steiner_quadratic, minkowski_sum, minkowski_sum_with_wulff, SteinerFit};
pub use profile::{clip_half_plane, InnerParallelProfile};

/// Counterclockwise hull of `points` with collinear and duplicate points
/// removed. A turn counts as convex when its sine exceeds `rel_tol`.
pub fn convex_hull(points: &[Vec2], rel_tol: f64) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: Vec2, a: Vec2, b: Vec2| {
        let (u, v) = (a - o, b - o);
        u.cross(v) > rel_tol * u.norm() * v.norm()
    };
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && !turn(hull[hull.len() - 2], hull[hull.len() - 1], p) {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// A convex polygon with counterclockwise, strictly convex vertex list.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

/// Edge line `{x : normal · x = offset}` with outward unit `normal`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeLine {
    pub normal: Vec2,
    pub offset: f64,
}

impl ConvexPolygon {
    /// Sanitizes `points` (hull, dedup, collinear removal) into a polygon.
    pub fn new(points: &[Vec2]) -> Result<Self> {
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::DegeneratePolygon("non-finite vertex".to_string()));
        }
        let hull = convex_hull(points, 1e-12);
        if hull.len() < 3 {
            return Err(Error::DegeneratePolygon(format!(
                "need at least 3 non-collinear vertices, got {}",
                hull.len()
            )));
        }
        let poly = ConvexPolygon { vertices: hull };
        let scale = poly.diameter();
        if poly.area() <= 1e-14 * scale * scale {
            return Err(Error::DegeneratePolygon("zero area".to_string()));
        }
        Ok(poly)
    }

    pub fn from_arrays(points: &[[f64; 2]]) -> Result<Self> {
        let pts: Vec<Vec2> = points.iter().map(|&p| p.into()).collect();
        Self::new(&pts)
    }

    /// `[0, a] x [0, b]`.
    pub fn rectangle(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::DegeneratePolygon(format!(
                "rectangle sides {a} x {b}"
            )));
        }
        Self::new(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(a, 0.0),
            Vec2::new(a, b),
            Vec2::new(0.0, b),
        ])
    }

    /// Regular `n`-gon centered at the origin with vertices at angles
    /// `2πk/n + π/n`, so `n = 4` is an axis-aligned square.
    pub fn regular_ngon(n: usize, circumradius: f64) -> Result<Self> {
        if n < 3 || !(circumradius > 0.0) {
            return Err(Error::DegeneratePolygon(format!(
                "regular polygon with n={n}, R={circumradius}"
            )));
        }
        let pts: Vec<Vec2> = (0..n)
            .map(|k| {
                Vec2::from_angle(2.0 * PI * k as f64 / n as f64 + PI / n as f64) * circumradius
            })
            .collect();
        Self::new(&pts)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as `(start, end)` pairs in counterclockwise order.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let m = self.vertices.len();
        (0..m).map(move |i| (self.vertices[i], self.vertices[(i + 1) % m]))
    }

    pub fn edge_lines(&self) -> Vec<EdgeLine> {
        self.edges()
            .map(|(a, b)| {
                let normal = (b - a).perp_cw().normalized();
                EdgeLine {
                    normal,
                    offset: normal.dot(a),
                }
            })
            .collect()
    }

    pub fn area(&self) -> f64 {
        crate::anisotropy::shoelace(&self.vertices)
    }

    pub fn euclidean_perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    /// `P_H = Σ |e| H(ν_e)` over edges with outward unit normal `ν_e`.
    pub fn aniso_perimeter(&self, norm: &Norm) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let e = b - a;
                e.norm() * norm.value(e.perp_cw().normalized())
            })
            .sum()
    }

    pub fn centroid(&self) -> Vec2 {
        let a = self.area();
        let m = self.vertices.len();
        let mut c = Vec2::ZERO;
        for i in 0..m {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % m]);
            c += (p + q) * p.cross(q);
        }
        c * (1.0 / (6.0 * a))
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((*a - *b).norm());
            }
        }
        d
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        let pts: Vec<Vec2> = self.vertices.iter().map(|&v| v * s).collect();
        Self::new(&pts)
    }

    pub fn translated(&self, shift: Vec2) -> Self {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|&v| v + shift).collect(),
        }
    }

    /// Signed Euclidean slack `min_e (c_e - ν_e · x)`; positive inside.
    pub fn slack(&self, x: Vec2) -> f64 {
        self.edge_lines()
            .iter()
            .map(|l| l.offset - l.normal.dot(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: Vec2, tol: f64) -> bool {
        self.slack(x) >= -tol
    }

    /// Anisotropic distance `d_H(x) = min_e (c_e - ν_e · x) / H(ν_e)`.
    pub fn aniso_distance(&self, norm: &Norm, x: Vec2) -> Result<f64> {
        let scale = self.diameter();
        let mut d = f64::INFINITY;
        for l in self.edge_lines() {
            let s = l.offset - l.normal.dot(x);
            if s < -1e-12 * scale {
                return Err(Error::OutsideDomain);
            }
            d = d.min(s.max(0.0) / norm.value(l.normal));
        }
        Ok(d)
    }

    /// Anisotropic inradius `r_Ω = max d_H`, by bisection on emptiness of
    /// the inner parallel body.
    pub fn inradius(&self, norm: &Norm) -> f64 {
        profile::inradius(self, norm)
    }

    pub fn inner_parallel_profile(
        &self,
        norm: &Norm,
        grid_size: usize,
    ) -> Result<InnerParallelProfile> {
        InnerParallelProfile::new(self, norm, grid_size)
    }
}

/// `W_2^H = κ_2` in the plane.
pub fn quermassintegral_w2(norm: &Norm) -> Result<f64> {
    if norm.dimension() != 2 {
        return domain("quermassintegral W2 is implemented for n = 2");
    }
    wulff_measure(norm)
}

/// Isoperimetric deficit in both the absolute and the normalized form.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IsoperimetricDeficit {
    /// `P_H - 2 sqrt(κ_2 |K|)`
    pub deficit: f64,
    /// `1 - 4 κ_2 |K| / P_H^2`
    pub normalized: f64,
}

pub fn isoperimetric_deficit(poly: &ConvexPolygon, norm: &Norm) -> Result<IsoperimetricDeficit> {
    let kappa = quermassintegral_w2(norm)?;
    Ok(isoperimetric_deficit_with(
        poly.area(),
        poly.aniso_perimeter(norm),
        kappa,
    ))
}

pub fn isoperimetric_deficit_with(area: f64, perimeter: f64, kappa: f64) -> IsoperimetricDeficit {
    IsoperimetricDeficit {
        deficit: perimeter - 2.0 * (kappa * area).sqrt(),
        normalized: 1.0 - 4.0 * kappa * area / (perimeter * perimeter),
    }
}

/// Planar instances of the Aleksandrov–Fenchel inequalities for the
/// quermassintegrals `W_0 = |K|`, `W_1 = P_H / 2`, `W_2 = κ_2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AleksandrovFenchelReport {
    /// `W_1/κ - (W_0/κ)^{1/2}`; nonnegative, zero for Wulff shapes.
    pub margin_01: f64,
    /// `W_2/κ - 1`, identically zero in the plane.
    pub margin_12: f64,
    pub degenerate_12: bool,
    pub holds: bool,
}

pub fn aleksandrov_fenchel_check(
    poly: &ConvexPolygon,
    norm: &Norm,
) -> Result<AleksandrovFenchelReport> {
    let kappa = quermassintegral_w2(norm)?;
    let w0 = poly.area();
    let w1 = 0.5 * poly.aniso_perimeter(norm);
    let margin_01 = w1 / kappa - (w0 / kappa).sqrt();
    let w2 = quermassintegral_w2(norm)?;
    let margin_12 = w2 / kappa - 1.0;
    Ok(AleksandrovFenchelReport {
        margin_01,
        margin_12,
        degenerate_12: true,
        holds: margin_01 >= -1e-12 * (w1 / kappa),
    })
}

/// Serializable shape description.
///
/// JSON forms: `{"kind":"polygon","vertices":[[x,y],...]}`,
/// `{"kind":"rectangle","a":1,"b":2}`,
/// `{"kind":"regular_ngon","n":6,"circumradius":1}`,
/// `{"kind":"wulff","norm":{...},"R":1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Rectangle {
        a: f64,
        b: f64,
    },
    RegularNgon {
        n: usize,
        circumradius: f64,
    },
    Wulff {
        norm: NormSpec,
        #[serde(rename = "R")]
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
}

pub const DEFAULT_WULFF_RESOLUTION: usize = 256;

impl ShapeSpec {
    pub fn build(&self) -> Result<ConvexPolygon> {
        match self {
            ShapeSpec::Polygon { vertices } => ConvexPolygon::from_arrays(vertices),
            ShapeSpec::Rectangle { a, b } => ConvexPolygon::rectangle(*a, *b),
            ShapeSpec::RegularNgon { n, circumradius } => {
                ConvexPolygon::regular_ngon(*n, *circumradius)
            }
            ShapeSpec::Wulff {
                norm,
                radius,
                resolution,
            } => {
                let norm = Norm::geometry_only(norm.clone())?;
                WulffShape::new(
                    &norm,
                    *radius,
                    Vec2::ZERO,
                    resolution.unwrap_or(DEFAULT_WULFF_RESOLUTION),
                )?
                .polygon()
            }
        }
    }

    pub fn id(&self) -> String {
        match self {
            ShapeSpec::Polygon { vertices } => format!("polygon{}", vertices.len()),
            ShapeSpec::Rectangle { a, b } => format!("rect{a}x{b}"),
            ShapeSpec::RegularNgon { n, circumradius } => format!("ngon{n}r{circumradius}"),
            ShapeSpec::Wulff { norm, radius, .. } => format!("wulff[{}]R{radius}", norm.id()),
        }
    }
}
