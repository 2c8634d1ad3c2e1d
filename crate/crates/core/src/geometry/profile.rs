use rayon::prelude::*;
use serde::Serialize;

use super::ConvexPolygon;
use crate::anisotropy::Norm;
use crate::error::{Error, Result};
use crate::vec2::Vec2;

#[derive(Clone, Copy, Debug)]
struct OffsetLine {
    normal: Vec2,
    offset: f64,
    /// `H(normal)`, the inward speed of the line per unit `t`.
    speed: f64,
}

/// Polygon as `(vertex, label)` pairs; the edge leaving vertex `k` lies on
/// the line with index `label`.
type Labelled = Vec<(Vec2, usize)>;

/// Sutherland–Hodgman clip of a convex polygon by `{normal · x <= offset}`.
pub fn clip_half_plane(poly: &[Vec2], normal: Vec2, offset: f64) -> Vec<Vec2> {
    let labelled: Labelled = poly.iter().map(|&v| (v, 0)).collect();
    clip_labelled(&labelled, normal, offset, 0)
        .into_iter()
        .map(|(v, _)| v)
        .collect()
}

fn clip_labelled(poly: &[(Vec2, usize)], normal: Vec2, offset: f64, label: usize) -> Labelled {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    for k in 0..m {
        let (a, la) = poly[k];
        let b = poly[(k + 1) % m].0;
        let sa = normal.dot(a) - offset;
        let sb = normal.dot(b) - offset;
        let cut = || a + (b - a) * (sa / (sa - sb));
        match (sa <= 0.0, sb <= 0.0) {
            (true, true) => out.push((a, la)),
            (true, false) => {
                out.push((a, la));
                out.push((cut(), label));
            }
            (false, true) => out.push((cut(), la)),
            (false, false) => {}
        }
    }
    out
}

fn offset_lines(poly: &ConvexPolygon, norm: &Norm) -> Vec<OffsetLine> {
    poly.edge_lines()
        .into_iter()
        .map(|l| OffsetLine {
            normal: l.normal,
            offset: l.offset,
            speed: norm.value(l.normal),
        })
        .collect()
}

fn body(base: &[Vec2], lines: &[OffsetLine], t: f64) -> Labelled {
    let mut cur: Labelled = base.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    if t == 0.0 {
        return cur;
    }
    for (k, l) in lines.iter().enumerate() {
        cur = clip_labelled(&cur, l.normal, l.offset - t * l.speed, k);
        if cur.is_empty() {
            break;
        }
    }
    cur
}

struct Measure {
    area: f64,
    perimeter: f64,
    active: Vec<usize>,
}

fn measure(b: &Labelled, lines: &[OffsetLine], edge_tol: f64) -> Measure {
    let m = b.len();
    let (mut area, mut perimeter) = (0.0, 0.0);
    let mut active = Vec::new();
    let origin = b.first().map_or(Vec2::ZERO, |v| v.0);
    for k in 0..m {
        let (a, l) = b[k];
        let c = b[(k + 1) % m].0;
        area += 0.5 * (a - origin).cross(c - origin);
        let len = (c - a).norm();
        perimeter += len * lines[l].speed;
        if len > edge_tol {
            active.push(l);
        }
    }
    active.sort_unstable();
    active.dedup();
    if m < 3 {
        area = 0.0;
    }
    Measure {
        area: area.max(0.0),
        perimeter,
        active,
    }
}

fn nonempty(base: &[Vec2], lines: &[OffsetLine], t: f64) -> bool {
    let b = body(base, lines, t);
    b.len() >= 3 && measure(&b, lines, 0.0).area > 0.0
}

pub(super) fn inradius(poly: &ConvexPolygon, norm: &Norm) -> f64 {
    let lines = offset_lines(poly, norm);
    inradius_with(poly, &lines)
}

fn inradius_with(poly: &ConvexPolygon, lines: &[OffsetLine]) -> f64 {
    let base = poly.vertices();
    let min_speed = lines.iter().map(|l| l.speed).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, poly.diameter() / min_speed);
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if nonempty(base, lines, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Areas `A(t) = |Ω_t|` and perimeters `P(t) = P_H(Ω_t)` of the inner
/// parallel bodies `Ω_t = {d_H > t}` for `t ∈ [0, r_Ω]`.
///
/// Every `Ω_t` is computed exactly by intersecting the offset half-planes
/// `{ν_i · x <= c_i - t H(ν_i)}`. The grid contains the times at which an edge
/// drops out, so between grid nodes `P` is affine and `A` quadratic and
/// [`InnerParallelProfile::eval`] is exact at every `t`.
#[derive(Clone, Debug, Serialize)]
pub struct InnerParallelProfile {
    pub t_grid: Vec<f64>,
    pub area: Vec<f64>,
    pub perimeter: Vec<f64>,
    pub inradius: f64,
    /// Interior times where the set of edges of `Ω_t` changes.
    pub events: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polygons: Option<Vec<Vec<Vec2>>>,
    #[serde(skip)]
    base: Vec<Vec2>,
    #[serde(skip)]
    lines: Vec<OffsetLine>,
}

impl InnerParallelProfile {
    pub fn new(poly: &ConvexPolygon, norm: &Norm, grid_size: usize) -> Result<Self> {
        Self::build(poly, norm, grid_size, false)
    }

    /// Like [`InnerParallelProfile::new`], keeping every `Ω_t` on the grid.
    pub fn with_polygons(poly: &ConvexPolygon, norm: &Norm, grid_size: usize) -> Result<Self> {
        Self::build(poly, norm, grid_size, true)
    }

    fn build(poly: &ConvexPolygon, norm: &Norm, grid_size: usize, retain: bool) -> Result<Self> {
        if grid_size < 64 {
            return Err(Error::Domain(format!(
                "grid_size must be >= 64, got {grid_size}"
            )));
        }
        let lines = offset_lines(poly, norm);
        let base = poly.vertices().to_vec();
        let r = inradius_with(poly, &lines);
        if !(r > 0.0) {
            return Err(Error::DegeneratePolygon("zero inradius".to_string()));
        }
        let edge_tol = 1e-11 * poly.diameter();
        let active_at = |t: f64| measure(&body(&base, &lines, t), &lines, edge_tol).active;

        let uniform: Vec<f64> = (0..grid_size)
            .map(|j| r * j as f64 / (grid_size - 1) as f64)
            .collect();
        let actives: Vec<Vec<usize>> = uniform[..grid_size - 1]
            .par_iter()
            .map(|&t| active_at(t))
            .collect();

        let mut events = Vec::new();
        for j in 0..grid_size - 2 {
            let (mut ta, tb) = (uniform[j], uniform[j + 1]);
            let mut sa = actives[j].clone();
            let sb = &actives[j + 1];
            while sa != *sb {
                let (mut lo, mut hi) = (ta, tb);
                while hi - lo > 1e-14 * r {
                    let mid = 0.5 * (lo + hi);
                    if active_at(mid) == sa {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                events.push(hi);
                ta = hi;
                sa = active_at(hi);
                if hi >= tb {
                    break;
                }
            }
        }

        let mut t_grid = uniform;
        t_grid.extend(events.iter().copied());
        t_grid.sort_by(f64::total_cmp);
        t_grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * r);
        *t_grid.last_mut().expect("grid is non-empty") = r;

        let n = t_grid.len();
        let samples: Vec<(f64, f64, Vec<Vec2>)> = t_grid[..n - 1]
            .par_iter()
            .map(|&t| {
                let b = body(&base, &lines, t);
                let m = measure(&b, &lines, edge_tol);
                (m.area, m.perimeter, b.into_iter().map(|(v, _)| v).collect())
            })
            .collect();
        let mut area: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let mut perimeter: Vec<f64> = samples.iter().map(|s| s.1).collect();
        // P is affine on the last cell; read its end value off the midpoint
        let (tl, pl) = (t_grid[n - 2], perimeter[n - 2]);
        let pm = measure(&body(&base, &lines, 0.5 * (tl + r)), &lines, edge_tol).perimeter;
        area.push(0.0);
        perimeter.push((2.0 * pm - pl).max(0.0));
        let polygons = retain.then(|| {
            let mut ps: Vec<Vec<Vec2>> = samples.into_iter().map(|s| s.2).collect();
            ps.push(Vec::new());
            ps
        });

        Ok(InnerParallelProfile {
            t_grid,
            area,
            perimeter,
            inradius: r,
            events,
            polygons,
            base,
            lines,
        })
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// Index `j` of the cell `[t_j, t_{j+1}]` containing `t`.
    pub fn cell(&self, t: f64) -> usize {
        let j = self.t_grid.partition_point(|&s| s <= t);
        j.clamp(1, self.t_grid.len() - 1) - 1
    }

    /// `-P'` on cell `j`.
    pub fn perimeter_decay(&self, j: usize) -> f64 {
        (self.perimeter[j] - self.perimeter[j + 1]) / (self.t_grid[j + 1] - self.t_grid[j])
    }

    /// `(A(t), P(t))` from the piecewise quadratic/affine representation.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, self.inradius);
        let j = self.cell(t);
        let s = self.perimeter_decay(j);
        let d = t - self.t_grid[j];
        let p = self.perimeter[j] - s * d;
        let a = self.area[j] - self.perimeter[j] * d + 0.5 * s * d * d;
        (a.max(0.0), p.max(0.0))
    }

    /// `(A(t), P(t))` by a fresh half-plane intersection.
    pub fn exact(&self, t: f64) -> (f64, f64) {
        let m = measure(&body(&self.base, &self.lines, t), &self.lines, 0.0);
        (m.area, m.perimeter)
    }

    /// The inner parallel body `Ω_t` as a vertex list (empty past `r_Ω`).
    pub fn body(&self, t: f64) -> Vec<Vec2> {
        body(&self.base, &self.lines, t)
            .into_iter()
            .map(|(v, _)| v)
            .collect()
    }

    /// CSV with header `t,A,P`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,A,P\n");
        for k in 0..self.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                crate::fmt::sig12(self.t_grid[k]),
                crate::fmt::sig12(self.area[k]),
                crate::fmt::sig12(self.perimeter[k])
            ));
        }
        s
    }
}
