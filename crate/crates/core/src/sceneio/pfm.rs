//! Portable float map images.
//!
//! Header: `PF` (RGB) or `Pf` (grey), whitespace, `width height`, whitespace,
//! a scale whose sign gives the byte order (negative = little-endian), one
//! whitespace byte, then `width·height·channels` 32-bit floats, bottom row first.
//! Files are written little-endian with scale `-1.0`.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::imagebuf::RadianceImage;
use crate::math::Rgb;

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("malformed PFM header: {0}")]
    Header(String),
    #[error("PFM image has zero size ({width}x{height})")]
    Empty { width: usize, height: usize },
    #[error("truncated PFM payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("PFM contains {count} non-finite value(s)")]
    NonFinite { count: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Raw float image, rows stored top-down.
#[derive(Clone, Debug, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    /// 3 for `PF`, 1 for `Pf`.
    pub channels: usize,
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn from_radiance(img: &RadianceImage) -> Self {
        let data = img.pixels.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect();
        Self {
            width: img.width,
            height: img.height,
            channels: 3,
            data,
        }
    }

    pub fn from_scalar(width: usize, height: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            channels: 1,
            data: values.iter().map(|&v| v as f32).collect(),
        }
    }

    /// Grey images are broadcast to all three channels.
    pub fn to_radiance(&self) -> RadianceImage {
        let pixels = self
            .data
            .chunks_exact(self.channels)
            .map(|c| match c {
                [g] => Rgb::repeat(*g as f64),
                [r, g, b] => Rgb::new(*r as f64, *g as f64, *b as f64),
                _ => unreachable!(),
            })
            .collect();
        RadianceImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Single-channel view; RGB files contribute their red channel.
    pub fn to_scalar(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&v| v as f64).collect(),
            _ => self.data.chunks_exact(3).map(|c| c[0] as f64).collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "Pf" } else { "PF" };
        let mut out = format!("{magic}\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        out.reserve(self.data.len() * 4);
        let row = self.width * self.channels;
        for y in (0..self.height).rev() {
            for v in &self.data[y * row..(y + 1) * row] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PfmError> {
        let mut pos = 0;
        let mut token = || -> Result<String, PfmError> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(PfmError::Header("unexpected end of header".into()));
            }
            let tok = std::str::from_utf8(&bytes[start..pos]).map_err(|_| PfmError::Header("non-ASCII header".into()))?;
            Ok(tok.to_string())
        };
        let channels = match token()?.as_str() {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(PfmError::Header(format!("bad magic `{}`", other.chars().take(8).collect::<String>()))),
        };
        let dim = |t: String, name: &str| t.parse::<usize>().map_err(|_| PfmError::Header(format!("bad {name} `{t}`")));
        let width = dim(token()?, "width")?;
        let height = dim(token()?, "height")?;
        let scale_tok = token()?;
        let scale: f32 = scale_tok.parse().map_err(|_| PfmError::Header(format!("bad scale `{scale_tok}`")))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(PfmError::Header(format!("bad scale `{scale_tok}`")));
        }
        if width == 0 || height == 0 {
            return Err(PfmError::Empty { width, height });
        }
        // exactly one whitespace byte separates the header from the payload
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(PfmError::Truncated {
                expected: width * height * channels * 4,
                found: 0,
            });
        }
        pos += 1;
        let payload = &bytes[pos..];
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels * 4))
            .ok_or_else(|| PfmError::Header("dimensions overflow".into()))?;
        if payload.len() < expected {
            return Err(PfmError::Truncated {
                expected,
                found: payload.len(),
            });
        }
        let little = scale < 0.0;
        let floats: Vec<f32> = payload[..expected]
            .chunks_exact(4)
            .map(|b| {
                let b = [b[0], b[1], b[2], b[3]];
                if little {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                }
            })
            .collect();
        let bad = floats.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            return Err(PfmError::NonFinite { count: bad });
        }
        let row = width * channels;
        let mut data = Vec::with_capacity(floats.len());
        for y in (0..height).rev() {
            data.extend_from_slice(&floats[y * row..(y + 1) * row]);
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }
}

pub fn write_pfm(img: &RadianceImage, path: impl AsRef<Path>) -> Result<(), PfmError> {
    if img.width == 0 || img.height == 0 {
        return Err(PfmError::Empty {
            width: img.width,
            height: img.height,
        });
    }
    fs::write(path, PfmImage::from_radiance(img).encode())?;
    Ok(())
}

pub fn write_pfm_scalar(width: usize, height: usize, values: &[f64], path: impl AsRef<Path>) -> Result<(), PfmError> {
    if width == 0 || height == 0 {
        return Err(PfmError::Empty { width, height });
    }
    fs::write(path, PfmImage::from_scalar(width, height, values).encode())?;
    Ok(())
}

pub fn read_pfm_raw(path: impl AsRef<Path>) -> Result<PfmImage, PfmError> {
    PfmImage::decode(&fs::read(path)?)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<RadianceImage, PfmError> {
    Ok(read_pfm_raw(path)?.to_radiance())
}
