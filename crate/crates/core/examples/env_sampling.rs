//! Converts an equirectangular sky to a prefiltered cubemap, then looks it up at
//! several roughness values and yaw angles.
//!
//!     cargo run --example env_sampling [out_dir]

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use lumisplat::demo::sky;
use lumisplat::envlight::{load_equirect, Environment};
use lumisplat::math::Vec3;
use lumisplat::sceneio::write_pfm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/env_sampling".into()));
    std::fs::create_dir_all(&out)?;

    let equirect = sky(256, 128);
    write_pfm(&equirect, out.join("sky.pfm"))?;
    let cube = Arc::new(load_equirect(&equirect, 64)?);
    println!("{} mip levels, lambda_max {}", cube.mips().len(), cube.lambda_max());
    for (level, mip) in cube.mips().iter().enumerate() {
        write_pfm(&mip.face_image(0), out.join(format!("face0_mip{level}.pfm")))?;
        println!("  level {level}: {0}x{0}, mean {1:.3?}", mip.size, mip.mean().as_slice());
    }

    let sun = Vec3::new(1.0, 0.5, 0.2).normalize();
    for rough in [0.0, 0.25, 0.5, 1.0] {
        println!("towards the sun, roughness {rough:.2}: {:.3?}", cube.sample_env(&sun, rough).as_slice());
    }

    // rotating by half a turn moves the sun to the opposite side
    let opposite = Vec3::new(-sun.x, sun.y, -sun.z);
    for yaw in [0.0, PI, 2.0 * PI] {
        let env = Environment::new(cube.clone(), yaw);
        println!("yaw {yaw:.3}: sun side {:.3?}, opposite side {:.3?}", env.sample(&sun, 0.0).as_slice(), env.sample(&opposite, 0.0).as_slice());
    }
    Ok(())
}
