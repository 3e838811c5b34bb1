//! Small fixed-size helpers shared by the geometry modules.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Matrix of the Euclidean cross product `z × ·`.
pub fn cross_operator(z: &Vec3) -> Mat3 {
    Mat3::new(0.0, -z.z, z.y, z.z, 0.0, -z.x, -z.y, z.x, 0.0)
}

/// Closed form of `(1 + j(z))⁻¹ = (1 + ‖z‖²)⁻¹ (1 − j(z) + z zᵀ)`.
pub fn inverse_one_plus_cross(z: &Vec3) -> Mat3 {
    (Mat3::identity() - cross_operator(z) + z * z.transpose()) / (1.0 + z.norm_squared())
}

/// Any unit vector orthogonal to `u` (which must be unit length).
pub fn orthogonal_unit(u: &Vec3) -> Vec3 {
    let pick = if u.x.abs() < 0.6 { Vec3::x() } else { Vec3::y() };
    let w = pick - u * u.dot(&pick);
    w / w.norm()
}

pub(crate) fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_operator_matches_cross_product() {
        let z = Vec3::new(0.3, -1.2, 2.0);
        let w = Vec3::new(-0.7, 0.1, 0.4);
        assert!((cross_operator(&z) * w - z.cross(&w)).norm() < 1e-15);
    }

    #[test]
    fn closed_form_inverse() {
        let z = Vec3::new(0.5, 0.25, -1.5);
        let m = Mat3::identity() + cross_operator(&z);
        let prod = m * inverse_one_plus_cross(&z);
        assert!((prod - Mat3::identity()).norm() < 1e-14);
    }

    #[test]
    fn orthogonal_unit_is_orthonormal() {
        for u in [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(1.0, 1.0, 1.0).normalize()] {
            let w = orthogonal_unit(&u);
            assert!(w.dot(&u).abs() < 1e-15);
            assert!((w.norm() - 1.0).abs() < 1e-15);
        }
    }
}
