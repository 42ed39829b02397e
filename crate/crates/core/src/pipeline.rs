//! Full frame: rasterize, derive normals, merge inserted layers, shade, trace, tone map.

use thiserror::Error;

use crate::brdf::BrdfLut;
use crate::envlight::Environment;
use crate::imagebuf::{LdrImage, RadianceImage};
use crate::sceneio::{merge_gbuffers, LayerError};
use crate::shading::{shade_direct, DirectPass};
use crate::splat::{composite_normals_per_gaussian, depth_to_normal, rasterize, Camera, GBuffer, GaussianPrimitive, InvariantError, NormalSource, RasterStats};
use crate::ssr::{composite_final, integrate_indirect_specular, IndirectPass, RenderSettings, SettingsError};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("settings: {0}")]
    Settings(#[from] SettingsError),
    #[error("camera: {0}")]
    Camera(InvariantError),
    #[error("gaussian {index}: {source}")]
    Gaussian {
        index: usize,
        #[source]
        source: InvariantError,
    },
    #[error("layer: {0}")]
    Layer(#[from] LayerError),
}

/// Everything one frame depends on.
#[derive(Clone, Copy)]
pub struct FrameRequest<'a> {
    pub gaussians: &'a [GaussianPrimitive],
    pub camera: &'a Camera,
    pub env: &'a Environment,
    pub lut: &'a BrdfLut,
    pub settings: &'a RenderSettings,
    /// Pre-baked G-buffer layers merged in order after rasterization.
    pub layers: &'a [GBuffer],
}

#[derive(Clone, Debug)]
pub struct Frame {
    pub gbuffer: GBuffer,
    pub stats: RasterStats,
    pub direct: DirectPass,
    /// Present when SSR ran.
    pub indirect: Option<IndirectPass>,
    pub hdr: RadianceImage,
    pub ldr: LdrImage,
}

impl Frame {
    /// Specular term used in the final composite.
    pub fn specular(&self) -> &RadianceImage {
        self.indirect.as_ref().map_or(&self.direct.specular, |i| &i.specular)
    }

    /// Per-pixel hit fraction as bytes; all zero without SSR.
    pub fn hit_mask(&self) -> Vec<u8> {
        match &self.indirect {
            Some(i) => i.hit_mask(self.gbuffer.width, self.gbuffer.height),
            None => vec![0; self.gbuffer.len()],
        }
    }
}

/// Rasterized G-buffer with its normal channel filled and `layers` merged on top.
pub fn build_gbuffer(gaussians: &[GaussianPrimitive], camera: &Camera, normals: NormalSource, layers: &[GBuffer]) -> Result<(GBuffer, RasterStats), LayerError> {
    let (mut gb, stats) = rasterize(gaussians, camera);
    match normals {
        NormalSource::Depth => {
            depth_to_normal(&mut gb, camera);
        }
        NormalSource::PerGaussian => gb.normal = composite_normals_per_gaussian(gaussians, camera),
    }
    for layer in layers {
        gb = merge_gbuffers(&gb, layer)?;
    }
    Ok((gb, stats))
}

pub fn render_frame(req: &FrameRequest<'_>) -> Result<Frame, RenderError> {
    req.settings.validate()?;
    req.camera.validate().map_err(RenderError::Camera)?;
    for (index, g) in req.gaussians.iter().enumerate() {
        g.validate().map_err(|source| RenderError::Gaussian { index, source })?;
    }
    let (gbuffer, stats) = build_gbuffer(req.gaussians, req.camera, req.settings.normal_source, req.layers)?;
    let direct = shade_direct(&gbuffer, req.env, req.lut, req.camera);
    let indirect = req.settings.ssr_enabled.then(|| integrate_indirect_specular(&gbuffer, &direct, req.env, req.camera, req.settings));
    let specular = indirect.as_ref().map_or(&direct.specular, |i| &i.specular);
    let hdr = direct.diffuse.add(specular);
    let ldr = composite_final(&direct.diffuse, specular, req.settings);
    Ok(Frame {
        gbuffer,
        stats,
        direct,
        indirect,
        hdr,
        ldr,
    })
}
