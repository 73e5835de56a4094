//! Image quality metrics on the 0–255 intensity scale: PSNR and the
//! structural similarity index.
//!
//! SSIM uses the canonical settings: an 11×11 Gaussian window with σ = 1.5,
//! stability constants `c1 = (0.01·255)²`, `c2 = (0.03·255)²`, local
//! statistics by valid-mode windowed filtering, and the mean of the local
//! similarity map as the score.

use ndarray::Array2;

use crate::error::{Result, SatvError};
use crate::grid::ImageGrid;

pub const INTENSITY_RANGE: f64 = 255.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Mean squared difference between two same-shaped grids.
pub fn mse(reference: &ImageGrid, candidate: &ImageGrid) -> Result<f64> {
    reference.check_same_grid(candidate)?;
    let (m, n) = reference.shape();
    let sum: f64 = reference
        .values()
        .iter()
        .zip(candidate.values().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / (m * n) as f64)
}

/// Peak signal-to-noise ratio `10·log10(255²/MSE)` in dB.
/// Identical inputs return `f64::INFINITY`.
pub fn psnr(reference: &ImageGrid, candidate: &ImageGrid) -> Result<f64> {
    let mse = mse(reference, candidate)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (INTENSITY_RANGE * INTENSITY_RANGE / mse).log10())
}

fn gaussian_window() -> Array2<f64> {
    let c = (SSIM_WINDOW / 2) as i64;
    let mut w = Array2::zeros((SSIM_WINDOW, SSIM_WINDOW));
    for dx in -c..=c {
        for dy in -c..=c {
            let r2 = (dx * dx + dy * dy) as f64;
            w[[(dx + c) as usize, (dy + c) as usize]] =
                (-r2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        }
    }
    let sum = w.sum();
    w.mapv_inplace(|v| v / sum);
    w
}

/// Structural similarity index in `[-1, 1]`; 1 for identical images.
/// Requires both dimensions to be at least the 11-pixel window.
pub fn ssim(reference: &ImageGrid, candidate: &ImageGrid) -> Result<f64> {
    reference.check_same_grid(candidate)?;
    let (m, n) = reference.shape();
    if m < SSIM_WINDOW || n < SSIM_WINDOW {
        return Err(SatvError::Config(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {m}x{n}"
        )));
    }
    let window = gaussian_window();
    let c1 = (SSIM_K1 * INTENSITY_RANGE).powi(2);
    let c2 = (SSIM_K2 * INTENSITY_RANGE).powi(2);
    let a = reference.values();
    let b = candidate.values();

    let mut total = 0.0;
    let rows_out = m - SSIM_WINDOW + 1;
    let cols_out = n - SSIM_WINDOW + 1;
    for i in 0..rows_out {
        for j in 0..cols_out {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            let mut aa = 0.0;
            let mut bb = 0.0;
            let mut ab = 0.0;
            for di in 0..SSIM_WINDOW {
                for dj in 0..SSIM_WINDOW {
                    let wgt = window[[di, dj]];
                    let x = a[[i + di, j + dj]];
                    let y = b[[i + di, j + dj]];
                    mu_a += wgt * x;
                    mu_b += wgt * y;
                    aa += wgt * x * x;
                    bb += wgt * y * y;
                    ab += wgt * x * y;
                }
            }
            let var_a = aa - mu_a * mu_a;
            let var_b = bb - mu_b * mu_b;
            let cov = ab - mu_a * mu_b;
            let local = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += local;
        }
    }
    Ok(total / (rows_out * cols_out) as f64)
}

/// Bundled quality numbers for one reference/candidate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub fn compute(reference: &ImageGrid, candidate: &ImageGrid) -> Result<Self> {
        Ok(Self {
            mse: mse(reference, candidate)?,
            psnr_db: psnr(reference, candidate)?,
            ssim: ssim(reference, candidate)?,
        })
    }
}

/// Clamps to `[0, 255]` and rounds, the transformation applied when an image
/// is written to disk. Metrics on saved files compare these values.
pub fn clamp_to_output(u: &ImageGrid) -> ImageGrid {
    ImageGrid::from_raw(
        u.values().mapv(|v| v.clamp(0.0, 255.0).round()),
        u.mesh(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn textured_image(m: usize, n: usize, seed: u64) -> ImageGrid {
        // Smooth blobs plus mild noise: a stand-in for natural content.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(m, n, 5.0, |i, j| {
            let x = i as f64 / m as f64;
            let y = j as f64 / n as f64;
            120.0 + 80.0 * (6.3 * x).sin() * (4.7 * y).cos() + rng.random_range(-10.0..10.0)
        })
    }

    #[test]
    fn psnr_of_identical_images_is_infinite() {
        let u = textured_image(16, 16, 1);
        assert_eq!(psnr(&u, &u).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_matches_closed_forms() {
        let u = ImageGrid::zeros(16, 16, 5.0);
        let v = ImageGrid::constant(16, 16, 5.0, 1.0);
        // MSE = 1  =>  20 log10(255) = 48.1308 dB.
        assert_abs_diff_eq!(psnr(&u, &v).unwrap(), 48.1308, epsilon = 1e-4);
        let w = ImageGrid::constant(16, 16, 5.0, 255.0);
        assert_abs_diff_eq!(psnr(&u, &w).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psnr_of_constant_shift_depends_only_on_magnitude() {
        let u = textured_image(16, 16, 2);
        let up = ImageGrid::from_raw(u.values() + 3.0, u.mesh());
        let dn = ImageGrid::from_raw(u.values() - 3.0, u.mesh());
        let expected = 20.0 * (255.0f64 / 3.0).log10();
        assert_abs_diff_eq!(psnr(&u, &up).unwrap(), expected, epsilon = 1e-10);
        assert_abs_diff_eq!(psnr(&u, &dn).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn psnr_is_strictly_decreasing_in_mse() {
        let u = ImageGrid::zeros(16, 16, 5.0);
        let mut last = f64::INFINITY;
        for c in [0.5, 1.0, 2.0, 10.0, 100.0] {
            let v = ImageGrid::constant(16, 16, 5.0, c);
            let p = psnr(&u, &v).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn ssim_of_identical_images_is_one() {
        let u = textured_image(24, 24, 3);
        assert_abs_diff_eq!(ssim(&u, &u).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let u = textured_image(24, 24, 4);
        let v = textured_image(24, 24, 5);
        let ab = ssim(&u, &v).unwrap();
        let ba = ssim(&v, &u).unwrap();
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn ssim_penalizes_inversion_hard() {
        let u = textured_image(32, 32, 6);
        let inverted = ImageGrid::from_raw(u.values().mapv(|v| 255.0 - v), u.mesh());
        assert!(ssim(&u, &inverted).unwrap() < 0.5);
    }

    #[test]
    fn ssim_mildly_penalizes_a_constant_shift() {
        let u = textured_image(32, 32, 7);
        let shifted = ImageGrid::from_raw(u.values() + 10.0, u.mesh());
        let s = ssim(&u, &shifted).unwrap();
        assert!(s < 1.0 && s > 0.8, "ssim {s}");
    }

    #[test]
    fn ssim_matches_an_independent_direct_evaluation() {
        // Naive re-derivation with explicit weighted moments, written
        // separately from the implementation above.
        fn naive_ssim(a: &ImageGrid, b: &ImageGrid) -> f64 {
            let c = 5i64;
            let sigma = 1.5f64;
            let mut wsum = 0.0;
            let mut weights = vec![];
            for dx in -c..=c {
                for dy in -c..=c {
                    let w = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
                    weights.push((dx, dy, w));
                    wsum += w;
                }
            }
            let (m, n) = a.shape();
            let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
            let mut acc = 0.0;
            let mut count = 0;
            for i in 5..m as i64 - 5 {
                for j in 5..n as i64 - 5 {
                    let (mut ma, mut mb) = (0.0, 0.0);
                    for &(dx, dy, w) in &weights {
                        ma += w / wsum * a.values()[[(i + dx) as usize, (j + dy) as usize]];
                        mb += w / wsum * b.values()[[(i + dx) as usize, (j + dy) as usize]];
                    }
                    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                    for &(dx, dy, w) in &weights {
                        let xa = a.values()[[(i + dx) as usize, (j + dy) as usize]] - ma;
                        let xb = b.values()[[(i + dx) as usize, (j + dy) as usize]] - mb;
                        va += w / wsum * xa * xa;
                        vb += w / wsum * xb * xb;
                        cov += w / wsum * xa * xb;
                    }
                    acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    count += 1;
                }
            }
            acc / count as f64
        }
        let u = textured_image(20, 18, 8);
        let v = textured_image(20, 18, 9);
        let fast = ssim(&u, &v).unwrap();
        let slow = naive_ssim(&u, &v);
        assert_abs_diff_eq!(fast, slow, epsilon = 1e-10);
    }

    #[test]
    fn small_images_and_shape_mismatches_are_rejected() {
        let u = ImageGrid::zeros(8, 8, 5.0);
        assert!(ssim(&u, &u).is_err());
        let v = ImageGrid::zeros(16, 12, 5.0);
        let w = ImageGrid::zeros(12, 16, 5.0);
        assert!(psnr(&v, &w).is_err());
    }
}
