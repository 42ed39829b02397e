//! In-memory image containers. Rows are stored top to bottom.

use crate::math::Rgb;

/// Linear RGB radiance image.
#[derive(Clone, Debug, PartialEq)]
pub struct RadianceImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl RadianceImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, Rgb::zeros())
    }

    pub fn filled(width: usize, height: usize, value: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: Rgb) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn same_size(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Bilinear lookup at continuous pixel coordinates, pixel centers at `+0.5`,
    /// clamped at the border.
    pub fn sample_bilinear(&self, px: f64, py: f64) -> Rgb {
        let fx = (px - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = (py - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - tx) + self.get(x1, y0) * tx;
        let bottom = self.get(x0, y1) * (1.0 - tx) + self.get(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    pub fn max_component(&self) -> f64 {
        self.pixels.iter().map(|p| p.max()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.pixels.iter().all(crate::math::is_finite3)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(self.same_size(other));
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().zip(&other.pixels).map(|(a, b)| a + b).collect(),
        }
    }
}

/// 8-bit sRGB-encoded display image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LdrImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl LdrImage {
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn as_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }
}
