//! Scene files, PFM/PNG images and G-buffer layers.

mod gbuffer_io;
mod pfm;
mod scene;

pub use gbuffer_io::*;
pub use pfm::*;
pub use scene::*;
