//! Renders the demo room with and without screen-space reflections and writes
//! both frames plus the per-pixel hit mask.
//!
//!     cargo run --release --example ssr_mirror [out_dir]

use std::path::PathBuf;
use std::sync::Arc;

use lumisplat::brdf::precompute_brdf_lut;
use lumisplat::demo::{mirror_room, room_camera, sky};
use lumisplat::envlight::{load_equirect, Environment};
use lumisplat::pipeline::{render_frame, FrameRequest};
use lumisplat::sceneio::{mask_image, write_png};
use lumisplat::ssr::RenderSettings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/ssr_mirror".into()));
    std::fs::create_dir_all(&out)?;

    let gaussians = mirror_room(0.06);
    let camera = room_camera(256, 256);
    let env = Environment::new(Arc::new(load_equirect(&sky(256, 128), 64)?), 0.0);
    let lut = precompute_brdf_lut(64, 512, 0)?;
    let on = RenderSettings {
        n_samples: 8,
        step_size: 0.03,
        ..Default::default()
    };
    let off = RenderSettings { ssr_enabled: false, ..on.clone() };
    let req = FrameRequest {
        gaussians: &gaussians,
        camera: &camera,
        env: &env,
        lut: &lut,
        settings: &on,
        layers: &[],
    };

    let t = std::time::Instant::now();
    let with = render_frame(&req)?;
    println!("{} Gaussians, SSR frame in {:.2?}", gaussians.len(), t.elapsed());
    let without = render_frame(&FrameRequest { settings: &off, ..req })?;

    write_png(&with.ldr, out.join("ssr_on.png"))?;
    write_png(&without.ldr, out.join("ssr_off.png"))?;
    let mask = with.hit_mask();
    write_png(&mask_image(camera.width, camera.height, &mask), out.join("hit_mask.png"))?;

    let floor: Vec<usize> = (0..with.gbuffer.len()).filter(|&i| with.gbuffer.shadeable(i) && with.gbuffer.metallic[i] > 0.9).collect();
    let mean_hit = floor.iter().map(|&i| mask[i] as f64 / 255.0).sum::<f64>() / floor.len().max(1) as f64;
    let changed = with.ldr.pixels.iter().zip(&without.ldr.pixels).filter(|(a, b)| a != b).count();
    println!("{} mirror pixels, mean hit fraction {mean_hit:.3}; {changed} pixels differ from the direct-only frame", floor.len());
    println!("wrote {}", out.display());
    Ok(())
}
