pub mod math;
pub mod brdf;
pub mod envlight;
pub mod imagebuf;
pub mod splat;
pub mod shading;
pub mod ssr;
pub mod edit;
pub mod sceneio;
pub mod pipeline;
pub mod eval;
pub mod demo;
