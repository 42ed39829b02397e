//! Derives normals from the depth channel of a rasterized tilted plane and
//! compares them with the plane's true orientation and the per-Gaussian
//! shortest-axis normals.
//!
//!     cargo run --example depth_normals

use lumisplat::brdf::MaterialParams;
use lumisplat::math::{rgb, Vec3};
use lumisplat::splat::{composite_normals_per_gaussian, depth_to_normal, rasterize, Camera, GaussianPrimitive};
use nalgebra::UnitQuaternion;

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn main() {
    let tilt = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 0.6) * UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -0.4);
    let normal = tilt * -Vec3::z();
    let (u, v) = (tilt * Vec3::x(), tilt * Vec3::y());
    let mat = MaterialParams::new(rgb(0.7, 0.7, 0.7), 0.5, 0.0);
    let mut gaussians = Vec::new();
    for i in -30..=30 {
        for j in -30..=30 {
            gaussians.push(GaussianPrimitive {
                mu: u * (i as f64 * 0.06) + v * (j as f64 * 0.06),
                rotation: tilt,
                scale: Vec3::new(0.05, 0.05, 0.002),
                opacity: 0.99,
                material: mat,
                gamma: 0.0,
                group: String::new(),
            });
        }
    }
    let camera = Camera::look_at(Vec3::new(0.0, 0.0, -3.0), Vec3::zeros(), Vec3::y(), 160, 120, 0.7);
    let (mut gb, _) = rasterize(&gaussians, &camera);
    depth_to_normal(&mut gb, &camera);
    let per_gaussian = composite_normals_per_gaussian(&gaussians, &camera);

    let (mut n, mut depth_err, mut splat_err, mut worst) = (0, 0.0, 0.0, 0.0f64);
    for i in 0..gb.len() {
        if !gb.shadeable(i) || per_gaussian[i] == Vec3::zeros() {
            continue;
        }
        let e = angle_deg(&gb.normal[i], &normal);
        depth_err += e;
        splat_err += angle_deg(&per_gaussian[i], &normal);
        worst = worst.max(e);
        n += 1;
    }
    println!("true normal {:.3?}", normal.as_slice());
    println!("{n} covered pixels");
    println!("depth-derived normals: mean error {:.3} deg, worst {worst:.3} deg", depth_err / n as f64);
    println!("per-Gaussian normals:  mean error {:.3} deg", splat_err / n as f64);
}
