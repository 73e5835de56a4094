//! Deterministic synthetic test scenes, seeded Gaussian noise, and the
//! degradation pipelines used by the experiments (blur first, then noise).
//!
//! All generators are pure functions of their arguments and seed. Noise uses
//! the ChaCha8 counter-based stream cipher generator with a standard normal
//! transform, so a given seed reproduces the same field bitwise on every run
//! of this codebase.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SatvError};
use crate::grid::{ImageGrid, DEFAULT_MESH};

/// Additive Gaussian noise parameters on the 0–255 intensity scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub mean: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { sigma, mean: 0.0, seed }
    }
}

/// `u + n` with `n` i.i.d. normal(mean, sigma^2) from the seeded generator.
/// No clamping: restoration operates on the unclamped field.
pub fn add_gaussian_noise(u: &ImageGrid, spec: &NoiseSpec) -> Result<ImageGrid> {
    if spec.sigma < 0.0 {
        return Err(SatvError::Config(format!(
            "noise sigma must be nonnegative, got {}",
            spec.sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    let noisy = u
        .values()
        .mapv(|v| v + spec.mean + spec.sigma * normal.sample(&mut rng));
    Ok(ImageGrid::from_raw(noisy, u.mesh()))
}

/// Centered disk of radius `radius` pixels at intensity `contrast` on a zero
/// background. Pixel centers decide membership.
pub fn disk_image(m: usize, n: usize, radius: f64, contrast: f64) -> Result<ImageGrid> {
    if !(radius >= 0.5) {
        return Err(SatvError::Config(format!(
            "disk radius must be at least half a pixel, got {radius}"
        )));
    }
    Ok(ImageGrid::from_fn(m, n, DEFAULT_MESH, |i, j| {
        let x = i as f64 + 0.5 - m as f64 / 2.0;
        let y = j as f64 + 0.5 - n as f64 / 2.0;
        if x * x + y * y < radius * radius {
            contrast
        } else {
            0.0
        }
    }))
}

/// Four axis-aligned bars at grey levels 32, 96, 160, 224 on a black
/// background (128×128). The geometry is a fixed constant of this module.
pub fn bars_image() -> ImageGrid {
    let levels = [32.0, 96.0, 160.0, 224.0];
    ImageGrid::from_fn(128, 128, DEFAULT_MESH, |i, j| {
        if (16..112).contains(&i) {
            for (k, &level) in levels.iter().enumerate() {
                let j0 = 12 + 28 * k;
                if (j0..j0 + 16).contains(&j) {
                    return level;
                }
            }
        }
        0.0
    })
}

/// One filled triangle at grey 200 on a grey-25 background (254×214). The
/// geometry is a fixed constant of this module.
pub fn triangle_image() -> ImageGrid {
    // Vertices in (row, col) coordinates.
    let a = (30.0, 107.0);
    let b = (210.0, 28.0);
    let c = (210.0, 186.0);
    let sign = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        (p.0 - r.0) * (q.1 - r.1) - (q.0 - r.0) * (p.1 - r.1)
    };
    ImageGrid::from_fn(254, 214, DEFAULT_MESH, |i, j| {
        let p = (i as f64, j as f64);
        let d1 = sign(p, a, b);
        let d2 = sign(p, b, c);
        let d3 = sign(p, c, a);
        let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
        let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
        if !(has_neg && has_pos) {
            200.0
        } else {
            25.0
        }
    })
}

/// A deterministic stand-in for a natural photograph: smooth illumination,
/// a shaded sphere, sharp-edged shapes and a striped texture patch, so both
/// smooth regions and edges are present.
pub fn phantom_image(m: usize, n: usize) -> ImageGrid {
    ImageGrid::from_fn(m, n, DEFAULT_MESH, |i, j| {
        let x = i as f64 / (m - 1) as f64;
        let y = j as f64 / (n - 1) as f64;
        // Smooth background ramp.
        let mut v = 60.0 + 70.0 * x + 30.0 * y * (1.0 - y);
        // Shaded sphere upper-left.
        let (cx, cy, r) = (0.32, 0.30, 0.20);
        let d2 = ((x - cx) / r).powi(2) + ((y - cy) / r).powi(2);
        if d2 < 1.0 {
            v = 90.0 + 120.0 * (1.0 - d2).sqrt();
        }
        // Dark rectangle lower-right with a sharp boundary.
        if (0.60..0.90).contains(&x) && (0.55..0.95).contains(&y) {
            v = 35.0;
            // Striped texture inside the rectangle.
            if ((j / 4) % 2) == 0 && (0.70..0.85).contains(&x) {
                v = 95.0;
            }
        }
        // Bright triangle lower-left.
        if x > 0.62 && y < 0.40 && (x - 0.62) > (0.40 - y) * 0.6 {
            v = 210.0;
        }
        v
    })
}

/// Random missing-pixel mask: each pixel independently missing with the
/// given probability (`true` = missing). Seeded and reproducible.
pub fn random_mask(m: usize, n: usize, fraction: f64, seed: u64) -> Result<Array2<bool>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(SatvError::Config(format!(
            "mask fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Array2::from_shape_fn((m, n), |_| {
        rng.random_range(0.0..1.0) < fraction
    }))
}
