use crate::geom::{orthonormal_basis, Vector};
use crate::rng::KeyedRng;

/// Direction drawn uniformly from the spherical cap of half-angle
/// `half_angle_deg` around the unit vector `axis`.
///
/// Uniform in solid angle: `cos θ` is uniform on `[cos(half_angle), 1]`.
pub fn sample_cone(axis: &Vector, half_angle_deg: f64, rng: &mut KeyedRng) -> Vector {
    let cos_max = half_angle_deg.to_radians().cos();
    let cos_theta = 1.0 - rng.next_f64() * (1.0 - cos_max);
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * rng.next_f64();
    let (u, v) = orthonormal_basis(axis);
    u * (sin_theta * phi.cos()) + v * (sin_theta * phi.sin()) + axis * cos_theta
}
