//! Shadow snapshot -> obstacle conversion: grid clustering followed by a
//! per-cluster principal-component fit.

use std::collections::BTreeMap;

use crate::geometry::{gamma, SuperEllipsoidObstacle, Vec3};
use crate::scalar::Real;

use super::{ObstaclePlane, ShadowSample};

/// Fitting knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig<R> {
    /// Connected-component cell size (m).
    pub cell_size: R,
    /// Semi-axis multiple of the per-axis standard deviation.
    pub k_sigma: R,
    /// Horizontal inflation applied to fitted obstacles.
    pub inflation: R,
    /// Vertical extrusion of the fitted obstacle.
    pub plane: ObstaclePlane<R>,
}

impl<R: Real> FitConfig<R> {
    pub fn new(plane: ObstaclePlane<R>) -> Self {
        Self {
            cell_size: R::of(2.0),
            // 2 sigma matches a uniform ellipse exactly; the safety
            // inflation lifts containment above 95% for box-like clusters
            k_sigma: R::of(2.0),
            inflation: R::of(1.15),
            plane,
        }
    }
}

/// Cluster shadow points and fit one ellipsoid per cluster.
///
/// Clusters with fewer than 3 points are dropped. Output is ordered by
/// cluster size (largest first, ties by centroid x) and truncated to
/// `max_count`. The fitted center is the horizontal point centroid lifted to
/// the configured obstacle plane; yaw follows the first principal component.
pub fn fit_ellipsoids<R: Real>(
    sample: &ShadowSample<R>,
    max_count: usize,
    cfg: &FitConfig<R>,
) -> Vec<SuperEllipsoidObstacle<R>> {
    if sample.points.is_empty() || max_count == 0 {
        return Vec::new();
    }
    let clusters = cluster_points(&sample.points, cfg.cell_size);
    let mut fits: Vec<(usize, SuperEllipsoidObstacle<R>)> = Vec::new();
    for cluster in clusters {
        if cluster.len() < 3 {
            continue;
        }
        if let Some(obs) = fit_cluster(&cluster, cfg) {
            fits.push((cluster.len(), obs));
        }
    }
    fits.sort_by(|a, b| {
        b.0.cmp(&a.0).then(
            a.1.center
                .x
                .partial_cmp(&b.1.center.x)
                .unwrap_or(std::cmp::Ordering::Equal),
        )
    });
    fits.truncate(max_count);
    fits.into_iter().map(|(_, o)| o).collect()
}

/// Fraction of cluster points contained by the fitted obstacle, evaluated in
/// the horizontal plane of the obstacle (surface points are lifted to the
/// obstacle's center plane before the implicit-field test).
pub fn containment_fraction<R: Real>(
    points: &[Vec3<R>],
    obs: &SuperEllipsoidObstacle<R>,
) -> R {
    if points.is_empty() {
        return R::one();
    }
    let inside = points
        .iter()
        .filter(|p| gamma(&Vec3::new(p.x, p.y, obs.center.z), obs) <= R::one())
        .count();
    R::of_usize(inside) / R::of_usize(points.len())
}

/// Grid-based connected components (8-neighborhood), deterministic order.
fn cluster_points<R: Real>(points: &[Vec3<R>], cell: R) -> Vec<Vec<Vec3<R>>> {
    let key = |p: &Vec3<R>| -> (i64, i64) {
        (
            (p.x / cell).floor().to_f64().unwrap_or(0.0) as i64,
            (p.y / cell).floor().to_f64().unwrap_or(0.0) as i64,
        )
    };
    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    let mut label: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut clusters: Vec<Vec<Vec3<R>>> = Vec::new();
    for start in cells.keys() {
        if label.contains_key(start) {
            continue;
        }
        // breadth-first flood fill from the lexicographically first cell
        let id = clusters.len();
        let mut frontier = vec![*start];
        label.insert(*start, id);
        let mut members: Vec<Vec3<R>> = Vec::new();
        while let Some(c) = frontier.pop() {
            for idx in &cells[&c] {
                members.push(points[*idx]);
            }
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = (c.0 + dx, c.1 + dy);
                    if cells.contains_key(&n) && !label.contains_key(&n) {
                        label.insert(n, id);
                        frontier.push(n);
                    }
                }
            }
        }
        clusters.push(members);
    }
    clusters
}

fn fit_cluster<R: Real>(
    points: &[Vec3<R>],
    cfg: &FitConfig<R>,
) -> Option<SuperEllipsoidObstacle<R>> {
    let n = R::of_usize(points.len());
    let mut mx = R::zero();
    let mut my = R::zero();
    for p in points {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    let (mut cxx, mut cxy, mut cyy) = (R::zero(), R::zero(), R::zero());
    for p in points {
        let dx = p.x - mx;
        let dy = p.y - my;
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    cxx /= n;
    cxy /= n;
    cyy /= n;
    // closed-form eigen-decomposition of the 2x2 covariance
    let half = R::of(0.5);
    let tr = cxx + cyy;
    let det_term = ((cxx - cyy) * half * (cxx - cyy) * half + cxy * cxy).sqrt();
    let l_major = tr * half + det_term;
    let l_minor = (tr * half - det_term).max(R::zero());
    let yaw = half * (cxy + cxy).atan2(cxx - cyy);
    // floor both axes at the vertical thickness so the 3-D invariant holds
    let floor = cfg.plane.thickness;
    let a = (cfg.k_sigma * l_major.sqrt()).max(floor);
    let b = (cfg.k_sigma * l_minor.sqrt()).max(floor);
    SuperEllipsoidObstacle::new(
        Vec3::new(mx, my, cfg.plane.plane_z),
        (a, b, cfg.plane.thickness),
        (1, 1, cfg.plane.exponent),
        (cfg.inflation, cfg.inflation, cfg.inflation),
        yaw,
        Vec3::zero(),
    )
    .ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::ObstaclePlane;

    fn test_cfg() -> FitConfig<f64> {
        FitConfig::new(ObstaclePlane {
            plane_z: 85.0,
            thickness: 5.0,
            exponent: 2,
        })
    }

    fn rect_points(cx: f64, cy: f64, half_x: f64, half_y: f64, step: f64) -> Vec<Vec3<f64>> {
        let mut pts = Vec::new();
        let mut y = cy - half_y;
        while y <= cy + half_y + 1e-9 {
            let mut x = cx - half_x;
            while x <= cx + half_x + 1e-9 {
                pts.push(Vec3::new(x, y, 0.0));
                x += step;
            }
            y += step;
        }
        pts
    }

    #[test]
    fn rectangle_pca_aligns_with_long_side() {
        // 40 x 10 m uniform rectangle: principal axis along x, yaw ~ 0
        let pts = rect_points(100.0, 50.0, 20.0, 5.0, 1.0);
        let sample = ShadowSample { time: 0.0, points: pts };
        let fits = fit_ellipsoids(&sample, 4, &test_cfg());
        assert_eq!(fits.len(), 1);
        let o = &fits[0];
        assert!(o.yaw.abs() < 0.05, "yaw {}", o.yaw);
        assert!(o.a > o.b);
        assert!((o.center.x - 100.0).abs() < 0.5 && (o.center.y - 50.0).abs() < 0.5);
        assert!((o.center.z - 85.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cluster_dropped() {
        let p = Vec3::new(3.0, 3.0, 0.0);
        let sample = ShadowSample {
            time: 0.0,
            points: vec![p, p],
        };
        assert!(fit_ellipsoids(&sample, 4, &test_cfg()).is_empty());
    }

    #[test]
    fn two_blobs_two_fits() {
        let mut pts = rect_points(0.0, 0.0, 15.0, 10.0, 1.0);
        pts.extend(rect_points(300.0, 40.0, 12.0, 12.0, 1.0));
        let sample = ShadowSample { time: 0.0, points: pts };
        let fits = fit_ellipsoids(&sample, 2, &test_cfg());
        assert_eq!(fits.len(), 2);
        let mut centers: Vec<(f64, f64)> = fits.iter().map(|o| (o.center.x, o.center.y)).collect();
        centers.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!((centers[0].0 - 0.0).abs() < 1.0 && (centers[0].1 - 0.0).abs() < 1.0);
        assert!((centers[1].0 - 300.0).abs() < 1.0 && (centers[1].1 - 40.0).abs() < 1.0);
    }

    #[test]
    fn max_count_keeps_largest() {
        let mut pts = rect_points(0.0, 0.0, 20.0, 12.0, 1.0);
        pts.extend(rect_points(300.0, 0.0, 6.0, 6.0, 1.0));
        let sample = ShadowSample { time: 0.0, points: pts };
        let fits = fit_ellipsoids(&sample, 1, &test_cfg());
        assert_eq!(fits.len(), 1);
        assert!(fits[0].center.x.abs() < 1.0);
    }

    #[test]
    fn containment_on_uniform_rectangle() {
        let pts = rect_points(0.0, 0.0, 20.0, 8.0, 1.0);
        let sample = ShadowSample {
            time: 0.0,
            points: pts.clone(),
        };
        let fits = fit_ellipsoids(&sample, 1, &test_cfg());
        let frac = containment_fraction(&pts, &fits[0]);
        assert!(frac >= 0.95, "containment {}", frac);
    }
}
