mod common;

use std::f64::consts::PI;

use common::*;
use lumisplat::brdf::*;
use lumisplat::math::{rgb, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn oracles_agree_with_each_other() {
    for (cos_v, rho) in [(0.3, 0.4), (0.9, 0.7), (0.6, 0.2)] {
        let (a, b) = split_sum_uniform(cos_v, rho, 400, 400, 1);
        let (c, d) = split_sum_half_vector(cos_v, rho, 256, 256);
        assert!((a - c).abs() < 5e-3 && (b - d).abs() < 5e-3, "({a},{b}) vs ({c},{d})");
    }
}

#[test]
fn near_mirror_corner_matches_lobe_quadrature() {
    let lut = precompute_brdf_lut(64, LUT_DEFAULT_SAMPLES, 0).unwrap();
    for (row, col) in [(63, 0), (63, 2), (40, 0), (20, 1)] {
        let (cos_v, rho) = (lut.axis_value(row), lut.axis_value(col));
        let (s, b) = split_sum_half_vector(cos_v, rho, 512, 128);
        let (ls, lb) = lut.entry(row, col);
        assert!((ls - s).abs() <= 0.02 && (lb - b).abs() <= 0.02, "cos {cos_v} rho {rho}: ({ls},{lb}) vs ({s},{b})");
    }
}

#[test]
fn lut_energy_and_range() {
    let lut = precompute_brdf_lut(32, 512, 4).unwrap();
    for &[s, b] in lut.entries() {
        assert!((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&b));
        assert!(s + b <= 1.0 + 1e-3);
    }
}

/// Histogram of sampled directions over (cosθ, φ) cells against the
/// density integrated with the independent NDF.
#[test]
fn ggx_sampling_chi_square() {
    let n = Vec3::z();
    for (rho, cos_o) in [(0.3, 0.8), (0.7, 0.5)] {
        let w_o = Vec3::new((1.0 - cos_o * cos_o as f64).sqrt(), 0.0, cos_o);
        let (n_cos, n_phi) = (10usize, 12usize);
        let samples = 200_000;
        let mut counts = vec![0usize; n_cos * n_phi];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..samples {
            if let Some(s) = sample_ggx(&w_o, &n, rho, rng.random(), rng.random()) {
                let c = ((s.w_i.z * n_cos as f64) as usize).min(n_cos - 1);
                let phi = s.w_i.y.atan2(s.w_i.x).rem_euclid(2.0 * PI);
                let p = ((phi / (2.0 * PI) * n_phi as f64) as usize).min(n_phi - 1);
                counts[c * n_phi + p] += 1;
            }
        }
        // expected mass per cell: ∫ D(h)(n·h) / (4 o·h) dω_i
        let density = |w_i: &Vec3| {
            let h = (w_i + w_o).normalize();
            let oh = w_o.dot(&h);
            if oh <= 0.0 {
                0.0
            } else {
                ndf(h.z, rho) * h.z / (4.0 * oh)
            }
        };
        let mut expected = vec![0.0; counts.len()];
        for (ci, e) in expected.chunks_mut(n_phi).enumerate() {
            let mu = gauss_legendre_on(24, ci as f64 / n_cos as f64, (ci + 1) as f64 / n_cos as f64);
            for (pi, cell) in e.iter_mut().enumerate() {
                let phis = gauss_legendre_on(24, 2.0 * PI * pi as f64 / n_phi as f64, 2.0 * PI * (pi + 1) as f64 / n_phi as f64);
                for &(m, wm) in &mu {
                    let s = (1.0 - m * m).sqrt();
                    for &(p, wp) in &phis {
                        *cell += density(&Vec3::new(s * p.cos(), s * p.sin(), m)) * wm * wp;
                    }
                }
                *cell *= samples as f64;
            }
        }
        let (mut chi2, mut dof, mut pooled_o, mut pooled_e) = (0.0, 0usize, 0.0, 0.0);
        for (o, e) in counts.iter().zip(&expected) {
            if *e < 20.0 {
                pooled_o += *o as f64;
                pooled_e += e;
                continue;
            }
            chi2 += (*o as f64 - e).powi(2) / e;
            dof += 1;
        }
        if pooled_e > 20.0 {
            chi2 += (pooled_o - pooled_e).powi(2) / pooled_e;
            dof += 1;
        }
        let critical = ChiSquared::new((dof - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(chi2 < critical, "rho {rho}: chi2 {chi2:.1} over {dof} cells, critical {critical:.1}");
    }
}

#[test]
fn sample_pdf_matches_ggx_pdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let n = random_unit(&mut rng);
        let mut w_o = random_unit(&mut rng);
        if w_o.dot(&n) < 0.0 {
            w_o = -w_o;
        }
        let rho = rng.random_range(0.01..1.0);
        if let Some(s) = sample_ggx(&w_o, &n, rho, rng.random(), rng.random()) {
            let p = ggx_pdf(&w_o, &s.w_i, &n, rho);
            assert!((p - s.pdf).abs() <= 1e-9 * p.max(1.0), "{p} vs {}", s.pdf);
            assert!(s.w_i.dot(&n) > 0.0);
            assert!((s.w_i.norm() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn brdf_reciprocity_and_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..2000 {
        let n = random_unit(&mut rng);
        let (mut a, mut b) = (random_unit(&mut rng), random_unit(&mut rng));
        if a.dot(&n) < 0.0 {
            a = -a;
        }
        if b.dot(&n) < 0.0 {
            b = -b;
        }
        let mat = MaterialParams::new(rgb(rng.random(), rng.random(), rng.random()), rng.random(), rng.random());
        let f = eval_brdf(&a, &b, &n, &mat);
        let g = eval_brdf(&b, &a, &n, &mat);
        assert!((f.specular - g.specular).abs().max() <= 1e-9 * f.specular.max().max(1.0));
        assert!(f.specular.iter().all(|c| c.is_finite() && *c >= 0.0));
        assert!(f.diffuse.iter().all(|c| *c >= 0.0 && *c <= 1.0 / PI + 1e-12));
    }
}

#[test]
fn smith_matches_independent_form() {
    for k in 0..=20 {
        let z = k as f64 / 20.0;
        for rho in [0.01, 0.3, 1.0] {
            assert!((smith_g1(z, rho) - g1(z, rho)).abs() < 1e-12);
        }
    }
}
