//! Small vector helpers shared by the shading kernels.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Linear RGB triple. Radiance values are unbounded, material values live in `[0, 1]`.
pub type Rgb = Vector3<f64>;

pub fn rgb(r: f64, g: f64, b: f64) -> Rgb {
    Rgb::new(r, g, b)
}

pub fn splat3(v: f64) -> Rgb {
    Rgb::new(v, v, v)
}

pub fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Builds a right-handed orthonormal frame `(t, b, n)` around unit `n`.
///
/// Branchless construction of Duff et al.; continuous everywhere except the
/// `n.z = -1` seam handled by the sign flip.
pub fn orthonormal_basis(n: &Vec3) -> (Vec3, Vec3) {
    let sign = 1.0_f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let t = Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let bt = Vec3::new(b, sign + n.y * n.y * a, -n.y);
    (t, bt)
}

pub fn is_finite3(v: &Vec3) -> bool {
    v.x.is_finite() && v.y.is_finite() && v.z.is_finite()
}
