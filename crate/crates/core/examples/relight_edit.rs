//! Material editing and relighting: roughen the mirror floor, recolour the
//! wall patch, then rotate the sky, rendering after each step.
//!
//!     cargo run --release --example relight_edit [out_dir]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use lumisplat::brdf::precompute_brdf_lut;
use lumisplat::demo::{mirror_room, room_camera, sky};
use lumisplat::edit::{apply_overrides, groups, MaterialOverride};
use lumisplat::envlight::{load_equirect, Environment};
use lumisplat::imagebuf::LdrImage;
use lumisplat::pipeline::{render_frame, FrameRequest};
use lumisplat::sceneio::write_png;
use lumisplat::ssr::RenderSettings;

fn diff(a: &LdrImage, b: &LdrImage) -> usize {
    a.pixels.iter().zip(&b.pixels).filter(|(x, y)| x != y).count()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/relight_edit".into()));
    std::fs::create_dir_all(&out)?;

    let base = mirror_room(0.08);
    println!("groups: {:?}", groups(&base));
    let camera = room_camera(192, 192);
    let cube = Arc::new(load_equirect(&sky(256, 128), 64)?);
    let lut = precompute_brdf_lut(64, 512, 0)?;
    let settings = RenderSettings::default();
    let render = |gs: &[_], yaw: f64| {
        let env = Environment::new(cube.clone(), yaw);
        render_frame(&FrameRequest {
            gaussians: gs,
            camera: &camera,
            env: &env,
            lut: &lut,
            settings: &settings,
            layers: &[],
        })
    };

    let original = render(&base, 0.0)?;
    write_png(&original.ldr, out.join("0_original.png"))?;

    let mut overrides = BTreeMap::new();
    overrides.insert(
        "floor".to_string(),
        MaterialOverride {
            roughness: Some(0.35),
            ..Default::default()
        },
    );
    let rough = render(&apply_overrides(&base, &overrides)?, 0.0)?;
    write_png(&rough.ldr, out.join("1_rough_floor.png"))?;
    println!("rough floor: {} pixels changed", diff(&original.ldr, &rough.ldr));

    overrides.insert(
        "patch".to_string(),
        MaterialOverride {
            albedo: Some([0.1, 0.3, 1.0]),
            ..Default::default()
        },
    );
    let edited = apply_overrides(&base, &overrides)?;
    let blue = render(&edited, 0.0)?;
    write_png(&blue.ldr, out.join("2_blue_patch.png"))?;
    println!("blue patch: {} pixels changed", diff(&rough.ldr, &blue.ldr));

    let turned = render(&edited, PI)?;
    write_png(&turned.ldr, out.join("3_sky_half_turn.png"))?;
    println!("sky half turn: {} pixels changed", diff(&blue.ldr, &turned.ldr));
    assert_eq!(render(&edited, 2.0 * PI)?.ldr, blue.ldr);
    println!("full turn reproduces the unrotated frame");

    let bad = MaterialOverride {
        metallic: Some(2.0),
        ..Default::default()
    };
    println!("metallic 2.0 rejected: {}", bad.validate().unwrap_err());
    Ok(())
}
