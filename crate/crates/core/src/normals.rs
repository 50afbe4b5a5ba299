//! Unoriented normals from local PCA.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{canonical_sign, Point, Vector};
use crate::io::PointCloud;
use crate::knn::KnnIndex;

pub const DEFAULT_K_NEIGHBORS: usize = 16;

/// Relative gap below which the two smallest covariance eigenvalues are
/// considered equal and the normal direction ill-defined.
pub const DEGENERACY_RATIO: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct NormalEstimate {
    /// Input cloud with `normals` filled in.
    pub cloud: PointCloud,
    /// Points whose neighborhood has no well-defined normal (lines, blobs).
    pub degenerate: Vec<bool>,
}

/// Smallest-eigenvalue eigenvector of the covariance of `neighbors`, plus a
/// degeneracy flag.
pub fn pca_normal(neighbors: &[Point]) -> (Vector, bool) {
    let n = neighbors.len() as f64;
    let centroid = neighbors.iter().fold(Vector::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in neighbors {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let l0 = eig.eigenvalues[idx[0]].max(0.0);
    let l1 = eig.eigenvalues[idx[1]].max(0.0);
    let degenerate = l1 <= 0.0 || (l1 - l0) <= DEGENERACY_RATIO * l1;
    let mut normal: Vector = eig.eigenvectors.column(idx[0]).normalize();
    normal *= canonical_sign(&normal);
    (normal, degenerate)
}

/// Estimate a normal for every point from its `k_neighbors` nearest neighbors
/// (the point itself included).
///
/// Signs follow [`canonical_sign`]: the largest-magnitude component is positive.
pub fn estimate_normals(cloud: &PointCloud, index: &KnnIndex, k_neighbors: usize) -> Result<NormalEstimate> {
    if k_neighbors < 3 {
        return Err(Error::param("k_neighbors", format!("must be at least 3, got {k_neighbors}")));
    }
    if cloud.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "normal estimation needs at least 3 points, got {}",
            cloud.len()
        )));
    }
    if index.len() != cloud.len() {
        return Err(Error::InvalidInput("k-NN index was built for a different cloud".into()));
    }
    let results: Vec<(Vector, bool)> = cloud
        .points
        .par_iter()
        .map(|p| {
            let nb: Vec<Point> = index.knn(p, k_neighbors).into_iter().map(|i| cloud.points[i]).collect();
            pca_normal(&nb)
        })
        .collect();
    let (normals, degenerate): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let mut out = cloud.clone();
    out.normals = Some(normals);
    Ok(NormalEstimate { cloud: out, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Domain, KeyedRng};
    use nalgebra::Rotation3;

    fn grid(n: usize, spacing: f64, mut map: impl FnMut(f64, f64) -> Point) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(map(i as f64 * spacing, j as f64 * spacing));
            }
        }
        PointCloud::from_points(pts)
    }

    fn run(cloud: &PointCloud, k: usize) -> NormalEstimate {
        let idx = KnnIndex::build(&cloud.points).unwrap();
        estimate_normals(cloud, &idx, k).unwrap()
    }

    #[test]
    fn plane_z0() {
        let c = grid(20, 0.05, |u, v| Point::new(u, v, 0.0));
        let est = run(&c, 8);
        for n in est.cloud.normals.unwrap() {
            assert!((n - Vector::z()).norm() < 1e-6, "{n}");
        }
        assert!(est.degenerate.iter().all(|d| !d));
    }

    #[test]
    fn plane_x0() {
        let c = grid(15, 0.1, |u, v| Point::new(0.0, u, v));
        for n in run(&c, 8).cloud.normals.unwrap() {
            assert!((n - Vector::x()).norm() < 1e-6);
        }
    }

    #[test]
    fn exact_coplanar_neighbors_to_1e9() {
        let plane_n = Vector::new(1.0, -2.0, 0.5).normalize();
        let (u, v) = crate::geom::orthonormal_basis(&plane_n);
        let pts: Vec<Point> = [(0.0, 0.0), (1.0, 0.2), (0.3, 0.9), (-0.4, 0.5)]
            .iter()
            .map(|&(a, b)| Point::from(3.0 * plane_n + a * u + b * v))
            .collect();
        let (n, deg) = pca_normal(&pts);
        assert!(!deg);
        assert!((n.dot(&plane_n).abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_plane_angular_error() {
        let mut r = KeyedRng::new(5, Domain::Test, &[]);
        let c = grid(60, 0.05, |u, v| Point::new(u, v, 0.005 * r.next_gaussian()));
        let est = run(&c, 16);
        let normals = est.cloud.normals.unwrap();
        let mean_deg = normals
            .iter()
            .map(|n| n.dot(&Vector::z()).abs().min(1.0).acos().to_degrees())
            .sum::<f64>()
            / normals.len() as f64;
        assert!(mean_deg < 2.0, "mean angular error {mean_deg}");
    }

    #[test]
    fn line_is_degenerate() {
        let pts: Vec<Point> = (0..30).map(|i| Point::new(i as f64 * 0.1, 0.0, 0.0)).collect();
        let est = run(&PointCloud::from_points(pts), 8);
        assert!(est.degenerate.iter().all(|&d| d));
        for n in est.cloud.normals.unwrap() {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn contract_errors() {
        let c = PointCloud::from_points(vec![Point::origin(), Point::new(1.0, 0.0, 0.0)]);
        let idx = KnnIndex::build(&c.points).unwrap();
        assert!(estimate_normals(&c, &idx, 8).is_err());
        let c = grid(4, 1.0, |u, v| Point::new(u, v, 0.0));
        let idx = KnnIndex::build(&c.points).unwrap();
        assert!(estimate_normals(&c, &idx, 2).is_err());
    }

    #[test]
    fn rotation_equivariance() {
        let mut r = KeyedRng::new(9, Domain::Test, &[]);
        let pts: Vec<Point> = (0..400)
            .map(|_| {
                let (a, b) = (r.next_f64() * 2.0, r.next_f64() * 2.0);
                Point::new(a, b, 0.3 * (a * 1.3).sin() + 0.2 * b * b)
            })
            .collect();
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let rotated: Vec<Point> = pts.iter().map(|p| rot * p).collect();
        let a = run(&PointCloud::from_points(pts), 12).cloud.normals.unwrap();
        let b = run(&PointCloud::from_points(rotated), 12).cloud.normals.unwrap();
        for (na, nb) in a.iter().zip(&b) {
            let ra = rot * na;
            assert!((ra.dot(nb).abs() - 1.0).abs() < 1e-8);
        }
    }
}
