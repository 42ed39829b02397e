//! A grid of spheres sweeping roughness (columns) and metallic (rows), lit by
//! the sky with the split-sum direct pass only.
//!
//!     cargo run --example direct_shading [out_dir]

use std::path::PathBuf;
use std::sync::Arc;

use lumisplat::brdf::{precompute_brdf_lut, MaterialParams};
use lumisplat::demo::sky;
use lumisplat::envlight::{load_equirect, Environment};
use lumisplat::math::{rgb, Vec3};
use lumisplat::pipeline::{render_frame, FrameRequest};
use lumisplat::sceneio::write_png;
use lumisplat::splat::{Camera, GaussianPrimitive, NormalSource};
use lumisplat::ssr::RenderSettings;

fn sphere(center: Vec3, radius: f64, material: MaterialParams) -> Vec<GaussianPrimitive> {
    let n = 400;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let y = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * k as f64;
            let d = Vec3::new(r * phi.cos(), y, r * phi.sin());
            // flat disc tangent to the sphere
            let rot = nalgebra::UnitQuaternion::rotation_between(&Vec3::z(), &d).unwrap_or_else(nalgebra::UnitQuaternion::identity);
            GaussianPrimitive {
                mu: center + d * radius,
                rotation: rot,
                scale: Vec3::new(0.12 * radius, 0.12 * radius, 0.005 * radius),
                opacity: 0.99,
                material,
                gamma: 0.0,
                group: String::new(),
            }
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/direct_shading".into()));
    std::fs::create_dir_all(&out)?;

    let mut gaussians = Vec::new();
    for row in 0..3 {
        for col in 0..5 {
            let mat = MaterialParams::new(rgb(0.95, 0.64, 0.54), 0.05 + 0.2 * col as f64, row as f64 / 2.0);
            gaussians.extend(sphere(Vec3::new(-2.0 + col as f64, 1.0 - row as f64, 0.0), 0.4, mat));
        }
    }
    let camera = Camera::look_at(Vec3::new(0.0, 0.0, -6.0), Vec3::zeros(), Vec3::y(), 320, 200, 0.62);
    let env = Environment::new(Arc::new(load_equirect(&sky(256, 128), 64)?), 0.0);
    let lut = precompute_brdf_lut(64, 512, 0)?;
    let settings = RenderSettings {
        ssr_enabled: false,
        normal_source: NormalSource::PerGaussian,
        ..Default::default()
    };
    let frame = render_frame(&FrameRequest {
        gaussians: &gaussians,
        camera: &camera,
        env: &env,
        lut: &lut,
        settings: &settings,
        layers: &[],
    })?;
    let path = out.join("spheres.png");
    write_png(&frame.ldr, &path)?;
    println!("{:?}; wrote {}", frame.stats, path.display());
    Ok(())
}
