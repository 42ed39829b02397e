//! Image metrics and the training-style loss terms on a reference render and a
//! degraded version of it (fewer samples, coarser steps).
//!
//!     cargo run --release --example metrics

use std::sync::Arc;

use lumisplat::brdf::precompute_brdf_lut;
use lumisplat::demo::{mirror_room, room_camera, sky};
use lumisplat::envlight::{load_equirect, Environment};
use lumisplat::eval::{loss_opacity, loss_tv, psnr, ssim, total_loss, LossWeights};
use lumisplat::imagebuf::RadianceImage;
use lumisplat::pipeline::{render_frame, FrameRequest};
use lumisplat::splat::composite_normals_per_gaussian;
use lumisplat::ssr::RenderSettings;

fn clamp01(img: &RadianceImage) -> RadianceImage {
    RadianceImage::from_fn(img.width, img.height, |x, y| img.get(x, y).map(|c| c.clamp(0.0, 1.0)))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let room = mirror_room(0.08);
    let camera = room_camera(128, 128);
    let env = Environment::new(Arc::new(load_equirect(&sky(256, 128), 64)?), 0.0);
    let lut = precompute_brdf_lut(64, 512, 0)?;
    let fine = RenderSettings {
        n_samples: 32,
        step_size: 0.02,
        ..Default::default()
    };
    let req = FrameRequest {
        gaussians: &room,
        camera: &camera,
        env: &env,
        lut: &lut,
        settings: &fine,
        layers: &[],
    };
    let reference = render_frame(&req)?;
    let gt = clamp01(&reference.hdr);

    for n_samples in [1, 4, 16] {
        let s = RenderSettings {
            n_samples,
            step_size: 0.1,
            seed: 1,
            ..Default::default()
        };
        let frame = render_frame(&FrameRequest { settings: &s, ..req })?;
        let img = clamp01(&frame.hdr);
        println!("N={n_samples:2}: PSNR {:6.2} dB, SSIM {:.4}", psnr(&img, &gt)?, ssim(&img, &gt)?);
    }

    let gb = &reference.gbuffer;
    let splat_normals = composite_normals_per_gaussian(&room, &camera);
    let report = total_loss(&gt, &gt, gb, Some(&splat_normals), &LossWeights::default())?;
    println!("opacity {:.4}, tv {:.4}, {report:?}", loss_opacity(gb), loss_tv(gb));
    Ok(())
}
