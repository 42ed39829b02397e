//! Bakes a red block into a G-buffer layer, saves and reloads it through a
//! manifest, and composites it into the room where the mirror floor reflects it.
//!
//!     cargo run --release --example object_insertion [out_dir]

use std::path::PathBuf;
use std::sync::Arc;

use lumisplat::brdf::precompute_brdf_lut;
use lumisplat::demo::{block, mirror_room, room_camera, sky};
use lumisplat::envlight::{load_equirect, Environment};
use lumisplat::math::Vec3;
use lumisplat::pipeline::{build_gbuffer, render_frame, FrameRequest};
use lumisplat::sceneio::{read_gbuffer_manifest, write_gbuffer, write_png};
use lumisplat::splat::NormalSource;
use lumisplat::ssr::RenderSettings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/object_insertion".into()));
    std::fs::create_dir_all(&out)?;

    let room = mirror_room(0.08);
    let camera = room_camera(192, 192);
    let env = Environment::new(Arc::new(load_equirect(&sky(256, 128), 64)?), 0.0);
    let lut = precompute_brdf_lut(64, 512, 0)?;
    let settings = RenderSettings::default();

    let (layer, _) = build_gbuffer(&block(Vec3::new(-0.8, 0.6, 2.0), 0.35), &camera, NormalSource::Depth, &[])?;
    let manifest = write_gbuffer(&layer, out.join("block_layer"))?;
    let layer = read_gbuffer_manifest(&manifest)?;
    println!("layer covers {} pixels; manifest {}", (0..layer.len()).filter(|&i| layer.covered(i)).count(), manifest.display());

    let req = FrameRequest {
        gaussians: &room,
        camera: &camera,
        env: &env,
        lut: &lut,
        settings: &settings,
        layers: &[],
    };
    let before = render_frame(&req)?;
    let layers = [layer];
    let after = render_frame(&FrameRequest { layers: &layers, ..req })?;
    write_png(&before.ldr, out.join("before.png"))?;
    write_png(&after.ldr, out.join("after.png"))?;

    // floor pixels whose reflection changed because of the block
    let reflected = (0..after.gbuffer.len())
        .filter(|&i| !layers[0].covered(i) && after.gbuffer.metallic[i] > 0.9 && after.ldr.pixels[i] != before.ldr.pixels[i])
        .count();
    println!("{reflected} floor pixels now reflect the inserted block");
    assert_eq!(render_frame(&req)?.ldr, before.ldr);
    println!("removing the layer restores the original frame");
    Ok(())
}
