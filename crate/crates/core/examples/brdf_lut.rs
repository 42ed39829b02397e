//! Precomputes the split-sum BRDF table, saves it and checks a few entries
//! against a high-sample reference.
//!
//!     cargo run --example brdf_lut [out_dir]

use std::path::PathBuf;

use lumisplat::brdf::{integrate_split_sum, lookup_brdf, precompute_brdf_lut, BrdfLut, LUT_DEFAULT_RESOLUTION, LUT_DEFAULT_SAMPLES};
use lumisplat::math::rgb;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/brdf_lut".into()));
    std::fs::create_dir_all(&out)?;

    let t = std::time::Instant::now();
    let lut = precompute_brdf_lut(LUT_DEFAULT_RESOLUTION, LUT_DEFAULT_SAMPLES, 7)?;
    println!("{0}x{0} table, {1} samples per entry, {2:.2?}", lut.resolution(), LUT_DEFAULT_SAMPLES, t.elapsed());

    let path = out.join("brdf.lut");
    lut.write_to(&path)?;
    let back = BrdfLut::read_from(&path)?;
    assert_eq!(back.entries(), lut.entries());
    println!("wrote {}", path.display());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:>6} {:>6} {:>16} {:>16}", "n.v", "rough", "table (s, b)", "reference");
    for (cos, rough) in [(0.1, 0.1), (0.5, 0.5), (0.9, 0.2), (1.0, 1.0)] {
        let (s, b) = lut.sample(cos, rough);
        let (rs, rb) = integrate_split_sum(cos, rough, 1 << 16, &mut rng);
        println!("{cos:6.2} {rough:6.2}   ({s:.4}, {b:.4})   ({rs:.4}, {rb:.4})");
    }

    // gold metal versus plastic at grazing and head-on views
    let gold = rgb(1.0, 0.78, 0.34);
    let plastic = rgb(0.04, 0.04, 0.04);
    for cos in [0.05, 0.5, 1.0] {
        let g = lookup_brdf(&lut, cos, 0.3, &gold);
        let p = lookup_brdf(&lut, cos, 0.3, &plastic);
        println!("n.v {cos:.2}: gold {:.3?} plastic {:.3?}", g.as_slice(), p.as_slice());
    }
    Ok(())
}
