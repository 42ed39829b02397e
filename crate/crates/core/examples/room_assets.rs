//! Writes the demo room as a scene file with its sky and an insertable block,
//! ready for the `lumisplat` command-line tool and service.
//!
//!     cargo run --example room_assets [out_dir]

use std::path::PathBuf;

use lumisplat::demo::write_room_assets;
use lumisplat::sceneio::load_scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/room".into()));
    let assets = write_room_assets(&out, 256, 256, 0.06)?;
    let scene = load_scene(&assets.scene)?;
    println!("{}: {} Gaussians, {} camera(s)", assets.scene.display(), scene.gaussians.len(), scene.cameras.len());
    println!("{}", assets.sky.display());
    println!("{}", assets.block.display());
    Ok(())
}
