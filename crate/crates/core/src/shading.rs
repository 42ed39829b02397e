//! Deferred direct lighting: split-sum specular plus roughness-indexed diffuse
//! environment lookup, evaluated once per G-buffer pixel.

use rayon::prelude::*;

use crate::brdf::{f0_from_material, lookup_brdf, BrdfLut, LUT_COS_MIN};
use crate::envlight::Environment;
pub use crate::imagebuf::RadianceImage;
use crate::math::{Rgb, Vec3};
use crate::splat::{Camera, GBuffer};

/// Mirror `v` (pointing camera → surface) about `n`.
pub fn reflect_dir(v: &Vec3, n: &Vec3) -> Vec3 {
    v - n * (2.0 * v.dot(n))
}

/// Output of the direct pass.
///
/// Background pixels carry the environment seen along the view ray in
/// `diffuse` and zero in `specular`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectPass {
    pub diffuse: RadianceImage,
    pub specular: RadianceImage,
}

impl DirectPass {
    /// First-pass radiance `c1 = c_d + c_s`.
    pub fn radiance(&self) -> RadianceImage {
        self.diffuse.add(&self.specular)
    }
}

pub fn shade_direct(gbuffer: &GBuffer, env: &Environment, lut: &BrdfLut, camera: &Camera) -> DirectPass {
    let w = gbuffer.width;
    let shaded: Vec<(Rgb, Rgb)> = (0..gbuffer.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            let view = camera.view_dir(x, y);
            if !gbuffer.shadeable(i) {
                return (env.sample(&view, 0.0), Rgb::zeros());
            }
            let n = gbuffer.normal[i];
            let albedo = gbuffer.albedo[i];
            let rough = gbuffer.roughness[i];
            let metal = gbuffer.metallic[i];
            let cos_nv = n.dot(&-view).clamp(LUT_COS_MIN, 1.0);
            let r = reflect_dir(&view, &n);
            let f0 = f0_from_material(&albedo, metal);
            let spec = env.sample(&r, rough).component_mul(&lookup_brdf(lut, cos_nv, rough, &f0));
            let diff = (albedo * (1.0 - metal)).component_mul(&env.sample(&n, rough));
            (diff, spec)
        })
        .collect();
    let (h, mut diffuse, mut specular) = (gbuffer.height, Vec::with_capacity(shaded.len()), Vec::with_capacity(shaded.len()));
    for (d, s) in shaded {
        diffuse.push(d);
        specular.push(s);
    }
    DirectPass {
        diffuse: RadianceImage { width: w, height: h, pixels: diffuse },
        specular: RadianceImage { width: w, height: h, pixels: specular },
    }
}
