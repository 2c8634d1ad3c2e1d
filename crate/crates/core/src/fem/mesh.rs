use std::collections::HashMap;

use serde::Serialize;
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::ConvexPolygon;
use crate::vec2::Vec2;

/// Conforming triangulation of a convex polygon.
#[derive(Clone, Debug, Serialize)]
pub struct TriMesh {
    pub nodes: Vec<Vec2>,
    /// Counterclockwise node index triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Longest edge.
    pub h: f64,
}

impl TriMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.boundary[i])
            .collect()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * (self.nodes[b] - self.nodes[a]).cross(self.nodes[c] - self.nodes[a])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Unique edges with the number of triangles sharing each.
    pub fn edges(&self) -> Vec<([usize; 2], u8)> {
        let mut map: HashMap<[usize; 2], u8> = HashMap::new();
        let mut order = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let e = map.entry(key).or_insert_with(|| {
                    order.push(key);
                    0
                });
                *e += 1;
            }
        }
        order.into_iter().map(|k| (k, map[&k])).collect()
    }

    /// Splits every triangle into four through its edge midpoints, halving `h`.
    pub fn refine_uniform(&self) -> TriMesh {
        let mut nodes = self.nodes.clone();
        let mut boundary = self.boundary.clone();
        let mut mid: HashMap<[usize; 2], usize> = HashMap::new();
        for ([a, b], count) in self.edges() {
            mid.insert([a, b], nodes.len());
            nodes.push(self.nodes[a].lerp(self.nodes[b], 0.5));
            boundary.push(count == 1);
        }
        let m = |a: usize, b: usize| mid[&[a.min(b), a.max(b)]];
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let mut out = TriMesh {
            nodes,
            triangles,
            boundary,
            h: 0.0,
        };
        out.h = out.max_edge();
        out
    }

    fn max_edge(&self) -> f64 {
        self.edges()
            .iter()
            .map(|([a, b], _)| (self.nodes[*a] - self.nodes[*b]).norm())
            .fold(0.0, f64::max)
    }
}

fn delaunay(points: &[Vec2]) -> Result<(Vec<Vec2>, Vec<[usize; 3]>)> {
    let pts: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p.x, p.y)).collect();
    let tri = DelaunayTriangulation::<Point2<f64>>::bulk_load_stable(pts)
        .map_err(|e| Error::Mesh(format!("{e:?}")))?;
    let nodes: Vec<Vec2> = tri
        .vertices()
        .map(|v| {
            let p = v.position();
            Vec2::new(p.x, p.y)
        })
        .collect();
    let triangles = tri
        .inner_faces()
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .collect();
    Ok((nodes, triangles))
}

/// Boundary-conforming Delaunay mesh of `poly` with longest edge at most `h`.
///
/// Boundary points are spaced `0.85 h` along each edge and the interior is
/// seeded with an equilateral lattice; midpoints of edges longer than `h`
/// are inserted until none remain. The result is deterministic in
/// `(poly, h)`.
pub fn triangulate(poly: &ConvexPolygon, h: f64) -> Result<TriMesh> {
    let diam = poly.diameter();
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Mesh(format!("mesh size must be > 0, got {h}")));
    }
    if diam / h > 2000.0 {
        return Err(Error::Mesh(format!(
            "mesh size {h} too small for diameter {diam}"
        )));
    }
    let spacing = 0.85 * h;
    let mut points = Vec::new();
    for (a, b) in poly.edges() {
        let k = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
        for j in 0..k {
            points.push(a.lerp(b, j as f64 / k as f64));
        }
    }
    let (lo, hi) = poly.vertices().iter().fold(
        (
            Vec2::new(f64::INFINITY, f64::INFINITY),
            Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), v| {
            (
                Vec2::new(lo.x.min(v.x), lo.y.min(v.y)),
                Vec2::new(hi.x.max(v.x), hi.y.max(v.y)),
            )
        },
    );
    let dy = spacing * 3f64.sqrt() / 2.0;
    let rows = ((hi.y - lo.y) / dy).ceil() as usize + 1;
    let cols = ((hi.x - lo.x) / spacing).ceil() as usize + 2;
    for r in 0..rows {
        let y = lo.y + r as f64 * dy;
        let shift = if r % 2 == 1 { 0.5 * spacing } else { 0.0 };
        for c in 0..cols {
            let p = Vec2::new(lo.x + shift + c as f64 * spacing, y);
            if poly.slack(p) >= 0.45 * h {
                points.push(p);
            }
        }
    }

    let on_boundary_tol = 1e-9 * h;
    for _ in 0..40 {
        let (nodes, raw) = delaunay(&points)?;
        let mut triangles = Vec::with_capacity(raw.len());
        for [a, b, c] in raw {
            let area = 0.5 * (nodes[b] - nodes[a]).cross(nodes[c] - nodes[a]);
            if area.abs() <= 1e-10 * h * h {
                continue;
            }
            triangles.push(if area > 0.0 { [a, b, c] } else { [a, c, b] });
        }
        let boundary = nodes
            .iter()
            .map(|&p| poly.slack(p) <= on_boundary_tol)
            .collect();
        let mesh = TriMesh {
            nodes,
            triangles,
            boundary,
            h: 0.0,
        };
        let long: Vec<Vec2> = mesh
            .edges()
            .iter()
            .filter(|([a, b], _)| (mesh.nodes[*a] - mesh.nodes[*b]).norm() > h)
            .map(|([a, b], _)| mesh.nodes[*a].lerp(mesh.nodes[*b], 0.5))
            .collect();
        if long.is_empty() {
            let mut mesh = compact(mesh);
            mesh.h = mesh.max_edge();
            return Ok(mesh);
        }
        points = mesh.nodes;
        points.extend(long);
    }
    Err(Error::Mesh("edge refinement did not terminate".to_string()))
}

fn compact(mesh: TriMesh) -> TriMesh {
    let mut used = vec![false; mesh.nodes.len()];
    for t in &mesh.triangles {
        for &i in t {
            used[i] = true;
        }
    }
    let mut map = vec![usize::MAX; mesh.nodes.len()];
    let mut nodes = Vec::new();
    let mut boundary = Vec::new();
    for i in 0..mesh.nodes.len() {
        if used[i] {
            map[i] = nodes.len();
            nodes.push(mesh.nodes[i]);
            boundary.push(mesh.boundary[i]);
        }
    }
    let triangles = mesh
        .triangles
        .iter()
        .map(|t| [map[t[0]], map[t[1]], map[t[2]]])
        .collect();
    TriMesh {
        nodes,
        triangles,
        boundary,
        h: mesh.h,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn check(mesh: &TriMesh, poly: &ConvexPolygon, h: f64) {
        assert!(mesh.h <= h * (1.0 + 1e-12));
        for t in 0..mesh.triangles.len() {
            assert!(mesh.triangle_area(t) > 0.0);
        }
        for (i, &b) in mesh.boundary.iter().enumerate() {
            if b {
                assert!(poly.slack(mesh.nodes[i]).abs() <= 1e-12);
            }
        }
        // every edge used by one triangle lies on the boundary
        for ([a, b], c) in mesh.edges() {
            if c == 1 {
                assert!(mesh.boundary[a] && mesh.boundary[b]);
            }
            assert!(c <= 2);
        }
    }

    #[test]
    fn unit_square() {
        let sq = ConvexPolygon::rectangle(1.0, 1.0).unwrap();
        let m = triangulate(&sq, 0.5).unwrap();
        assert!(m.triangles.len() >= 8);
        assert!((m.area() - 1.0).abs() < 1e-12);
        check(&m, &sq, 0.5);
        let r = m.refine_uniform();
        assert_eq!(r.triangles.len(), 4 * m.triangles.len());
        assert!((r.area() - 1.0).abs() < 1e-12);
        assert!(r.h <= 0.5 * m.h + 1e-15);
        check(&r, &sq, 0.25);
    }

    #[test]
    fn disk_polygon() {
        let disk = ConvexPolygon::regular_ngon(256, 1.0).unwrap();
        let m = triangulate(&disk, 0.05).unwrap();
        assert!((m.area() - PI).abs() < 1e-3);
        assert!((m.area() - disk.area()).abs() < 1e-12);
        check(&m, &disk, 0.05);
    }

    #[test]
    fn node_count_scaling() {
        let poly =
            ConvexPolygon::from_arrays(&[[0.0, 0.0], [2.0, 0.3], [1.5, 1.2], [-0.2, 0.9]]).unwrap();
        let n1 = triangulate(&poly, 0.1).unwrap().node_count() as f64;
        let n2 = triangulate(&poly, 0.05).unwrap().node_count() as f64;
        let ratio = n2 / n1;
        assert!(ratio > 3.0 && ratio < 5.0, "{ratio}");
        let m = triangulate(&poly, 0.05).unwrap();
        check(&m, &poly, 0.05);
        let again = triangulate(&poly, 0.05).unwrap();
        assert_eq!(m.nodes, again.nodes);
        assert_eq!(m.triangles, again.triangles);
    }
}
