//! Rasterizes a cloud of material Gaussians into a G-buffer and dumps every
//! channel as PNG plus a PFM manifest.
//!
//!     cargo run --example rasterize_gbuffer [out_dir]

use std::path::PathBuf;

use lumisplat::brdf::MaterialParams;
use lumisplat::math::{rgb, Vec3};
use lumisplat::sceneio::{channel_image, write_gbuffer, write_png, Channel};
use lumisplat::splat::{depth_to_normal, rasterize, Camera, GaussianPrimitive};
use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/rasterize_gbuffer".into()));
    std::fs::create_dir_all(&out)?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gaussians: Vec<GaussianPrimitive> = (0..400)
        .map(|_| {
            let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let rotation = UnitQuaternion::from_scaled_axis(axis * 1.5);
            let material = MaterialParams::new(rgb(rng.random(), rng.random(), rng.random()), rng.random(), rng.random::<f64>().round());
            GaussianPrimitive {
                mu: Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                rotation,
                scale: Vec3::new(rng.random_range(0.05..0.3), rng.random_range(0.05..0.3), 0.01),
                opacity: rng.random_range(0.5..0.99),
                material,
                gamma: rng.random(),
                group: String::new(),
            }
        })
        .collect();
    let mut camera = Camera::look_at(Vec3::new(0.0, 0.0, -4.0), Vec3::zeros(), Vec3::y(), 256, 192, 0.8);
    camera.far = 6.0;

    let t = std::time::Instant::now();
    let (mut gb, stats) = rasterize(&gaussians, &camera);
    let missing = depth_to_normal(&mut gb, &camera);
    println!("{stats:?} in {:.2?}; {missing} pixels with depth but no normal", t.elapsed());
    let coverage = gb.accum_alpha.iter().filter(|a| **a > 0.5).count() as f64 / gb.len() as f64;
    println!("coverage {:.1}%", 100.0 * coverage);

    for ch in Channel::ALL {
        let path = out.join(format!("{}.png", ch.name()));
        write_png(&channel_image(&gb, ch, &camera), &path)?;
    }
    let manifest = write_gbuffer(&gb, out.join("gbuffer"))?;
    println!("wrote channel PNGs and {}", manifest.display());
    Ok(())
}
