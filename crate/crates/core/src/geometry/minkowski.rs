use serde::Serialize;

use super::ConvexPolygon;
use crate::anisotropy::{Norm, WulffShape};
use crate::error::{domain, Result};
use crate::vec2::Vec2;

fn rotate_to_lowest(v: &[Vec2]) -> Vec<Vec2> {
    let k = (0..v.len())
        .min_by(|&i, &j| v[i].y.total_cmp(&v[j].y).then(v[i].x.total_cmp(&v[j].x)))
        .unwrap_or(0);
    v[k..].iter().chain(v[..k].iter()).copied().collect()
}

/// Minkowski sum of two convex polygons by merging their edge sequences.
pub fn minkowski_sum(a: &ConvexPolygon, b: &ConvexPolygon) -> Result<ConvexPolygon> {
    let p = rotate_to_lowest(a.vertices());
    let q = rotate_to_lowest(b.vertices());
    let (n, m) = (p.len(), q.len());
    let mut out = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        out.push(p[i % n] + q[j % m]);
        let e1 = p[(i + 1) % n] - p[i % n];
        let e2 = q[(j + 1) % m] - q[j % m];
        let c = e1.cross(e2);
        if j == m || (i < n && c > 0.0) {
            i += 1;
        } else if i == n || c < 0.0 {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    ConvexPolygon::new(&out)
}

/// `K + δ𝒲`, with smooth Wulff shapes replaced by inscribed `resolution`-gons.
pub fn minkowski_sum_with_wulff(
    poly: &ConvexPolygon,
    norm: &Norm,
    delta: f64,
    resolution: usize,
) -> Result<ConvexPolygon> {
    if !(delta >= 0.0) {
        return domain(format!("delta must be >= 0, got {delta}"));
    }
    if delta == 0.0 {
        return Ok(poly.clone());
    }
    let w = WulffShape::new(norm, delta, Vec2::ZERO, resolution)?.polygon()?;
    minkowski_sum(poly, &w)
}

/// Least-squares quadratic `|K + δ𝒲| ≈ c0 + c1 δ + c2 δ²`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SteinerFit {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_residual: f64,
}

pub fn fit_steiner_quadratic(
    poly: &ConvexPolygon,
    norm: &Norm,
    deltas: &[f64],
    resolution: usize,
) -> Result<SteinerFit> {
    if deltas.len() < 3 {
        return domain("need at least three offsets for a quadratic fit");
    }
    let data: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&d| {
            Ok((
                d,
                minkowski_sum_with_wulff(poly, norm, d, resolution)?.area(),
            ))
        })
        .collect::<Result<_>>()?;
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &(d, y) in &data {
        let row = [1.0, d, d * d];
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
            atb[r] += row[r] * y;
        }
    }
    let c = solve3(ata, atb);
    let max_residual = data
        .iter()
        .map(|&(d, y)| (c[0] + c[1] * d + c[2] * d * d - y).abs())
        .fold(0.0, f64::max);
    Ok(SteinerFit {
        c0: c[0],
        c1: c[1],
        c2: c[2],
        max_residual,
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for k in 0..3 {
        let piv = (k..3)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::{wulff_measure, NormSpec};
    use std::f64::consts::PI;

    #[test]
    fn square_plus_disk() {
        let sq = ConvexPolygon::rectangle(1.0, 1.0).unwrap();
        let e = Norm::euclidean();
        assert_eq!(minkowski_sum_with_wulff(&sq, &e, 0.0, 64).unwrap(), sq);
        let s = minkowski_sum_with_wulff(&sq, &e, 1.0, 4096).unwrap();
        // inscribed 4096-gon area deficit ~ 2π³/(3·4096²)
        assert!((s.area() - (5.0 + PI)).abs() < 2e-6);
    }

    #[test]
    fn steiner_coefficients_polygonal() {
        let l1 = Norm::geometry_only(NormSpec::Lr { r: 1.0 }).unwrap();
        let poly =
            ConvexPolygon::from_arrays(&[[0.0, 0.0], [2.0, 0.3], [1.5, 1.2], [-0.2, 0.9]]).unwrap();
        let deltas: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
        let fit = fit_steiner_quadratic(&poly, &l1, &deltas, 64).unwrap();
        assert!((fit.c0 - poly.area()).abs() < 1e-8);
        assert!((fit.c1 - poly.aniso_perimeter(&l1)).abs() < 1e-8);
        assert!((fit.c2 - wulff_measure(&l1).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn perimeter_slope() {
        let hex = Norm::polygonal(&[
            [1.0, 0.0],
            [0.5, 0.8],
            [-0.5, 0.8],
            [-1.0, 0.0],
            [-0.5, -0.8],
            [0.5, -0.8],
        ])
        .unwrap();
        let poly = ConvexPolygon::regular_ngon(5, 1.0).unwrap();
        let kappa = wulff_measure(&hex).unwrap();
        for d in [1e-3, 1e-2, 0.1] {
            let s = minkowski_sum_with_wulff(&poly, &hex, d, 64).unwrap();
            let slope = (s.aniso_perimeter(&hex) - poly.aniso_perimeter(&hex)) / d;
            assert!(
                (slope - 2.0 * kappa).abs() < 1e-4,
                "{slope} vs {}",
                2.0 * kappa
            );
        }
    }
}
