//! Per-group material overrides applied to Gaussians before rasterization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Rgb;
use crate::splat::GaussianPrimitive;

#[derive(Debug, Error, PartialEq)]
pub enum EditError {
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("{field} = {value} is outside [0, 1]")]
    OutOfRange { field: &'static str, value: f64 },
}

/// Partial material; `None` keeps the primitive's own value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub albedo: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roughness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metallic: Option<f64>,
}

fn unit_range(field: &'static str, value: f64) -> Result<(), EditError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(EditError::OutOfRange { field, value })
    }
}

impl MaterialOverride {
    pub fn is_empty(&self) -> bool {
        self.albedo.is_none() && self.roughness.is_none() && self.metallic.is_none()
    }

    /// Rejects values outside `[0, 1]` (NaN included) instead of clamping them.
    pub fn validate(&self) -> Result<(), EditError> {
        if let Some(a) = self.albedo {
            for (v, f) in a.iter().zip(["albedo.r", "albedo.g", "albedo.b"]) {
                unit_range(f, *v)?;
            }
        }
        if let Some(r) = self.roughness {
            unit_range("roughness", r)?;
        }
        if let Some(m) = self.metallic {
            unit_range("metallic", m)?;
        }
        Ok(())
    }

    /// Fields set in `later` replace those in `self`.
    pub fn merged(&self, later: &MaterialOverride) -> MaterialOverride {
        MaterialOverride {
            albedo: later.albedo.or(self.albedo),
            roughness: later.roughness.or(self.roughness),
            metallic: later.metallic.or(self.metallic),
        }
    }

    pub fn apply_to(&self, g: &mut GaussianPrimitive) {
        if let Some([r, gr, b]) = self.albedo {
            g.material.albedo = Rgb::new(r, gr, b);
        }
        if let Some(r) = self.roughness {
            g.material.roughness = r;
        }
        if let Some(m) = self.metallic {
            g.material.metallic = m;
        }
        g.material = g.material.clamped();
    }
}

pub type Overrides = BTreeMap<String, MaterialOverride>;

/// Sorted, deduplicated group names present in the scene.
pub fn groups(gaussians: &[GaussianPrimitive]) -> Vec<String> {
    let mut g: Vec<String> = gaussians.iter().map(|g| g.group.clone()).collect();
    g.sort();
    g.dedup();
    g
}

pub fn check_overrides(gaussians: &[GaussianPrimitive], overrides: &Overrides) -> Result<(), EditError> {
    let known = groups(gaussians);
    for (name, o) in overrides {
        if known.binary_search(name).is_err() {
            return Err(EditError::UnknownGroup(name.clone()));
        }
        o.validate()?;
    }
    Ok(())
}

/// Copy of `gaussians` with each group's override applied.
pub fn apply_overrides(gaussians: &[GaussianPrimitive], overrides: &Overrides) -> Result<Vec<GaussianPrimitive>, EditError> {
    check_overrides(gaussians, overrides)?;
    Ok(gaussians
        .iter()
        .map(|g| {
            let mut g = g.clone();
            if let Some(o) = overrides.get(&g.group) {
                o.apply_to(&mut g);
            }
            g
        })
        .collect())
}
