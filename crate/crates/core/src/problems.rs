//! Restoration task definitions: plain denoising, deblurring with a known
//! circular-convolution kernel, and inpainting over a missing-pixel mask.

use ndarray::Array2;

use crate::error::{Result, SatvError};
use crate::fft::{C64, Fft2};
use crate::grid::ImageGrid;

/// Which restoration problem the solver is running.
#[derive(Debug, Clone)]
pub enum ProblemSpec {
    Denoise,
    Deblur {
        kernel: BlurKernel,
    },
    /// `mask[i,j] == true` means pixel `(i,j)` is missing (inside the
    /// inpainting domain); `r3` is the penalty coupling `z = u`.
    Inpaint {
        mask: Array2<bool>,
        r3: f64,
    },
}

impl ProblemSpec {
    pub fn inpaint(mask: Array2<bool>, r3: f64) -> Result<Self> {
        if !(r3 > 0.0) {
            return Err(SatvError::Config(format!("r3 must be positive, got {r3}")));
        }
        if !mask.iter().any(|&missing| !missing) {
            return Err(SatvError::Config(
                "inpainting mask has no known pixels".into(),
            ));
        }
        Ok(ProblemSpec::Inpaint { mask, r3 })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemSpec::Denoise => "denoise",
            ProblemSpec::Deblur { .. } => "deblur",
            ProblemSpec::Inpaint { .. } => "inpaint",
        }
    }
}

/// A normalized, odd-sized blur kernel applied by periodic convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    size: usize,
    taps: Array2<f64>,
}

impl BlurKernel {
    /// Validates oddness, nonnegativity and unit sum (to 1e-12).
    pub fn new(taps: Array2<f64>) -> Result<Self> {
        let (m, n) = taps.dim();
        if m != n || m % 2 == 0 {
            return Err(SatvError::Config(format!(
                "kernel must be odd and square, got {m}x{n}"
            )));
        }
        if taps.iter().any(|&t| !(t >= 0.0)) {
            return Err(SatvError::Config("kernel taps must be nonnegative".into()));
        }
        let sum: f64 = taps.sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SatvError::Config(format!(
                "kernel taps must sum to 1, got {sum}"
            )));
        }
        Ok(Self { size: m, taps })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &Array2<f64> {
        &self.taps
    }

    /// Tap value at signed offsets from the center.
    pub fn tap(&self, dx: i64, dy: i64) -> f64 {
        let c = (self.size / 2) as i64;
        self.taps[[(dx + c) as usize, (dy + c) as usize]]
    }

    /// Embeds the kernel into an `M x N` field with the center tap at pixel
    /// `(0,0)` and the remaining taps at periodically wrapped offsets, so the
    /// transform of the embedding diagonalizes the blur exactly.
    pub fn embed(&self, m: usize, n: usize) -> Result<Array2<f64>> {
        if self.size >= m || self.size >= n {
            return Err(SatvError::Config(format!(
                "kernel of size {} does not fit a {m}x{n} grid",
                self.size
            )));
        }
        let c = (self.size / 2) as i64;
        let mut e = Array2::zeros((m, n));
        for dx in -c..=c {
            for dy in -c..=c {
                let i = (dx.rem_euclid(m as i64)) as usize;
                let j = (dy.rem_euclid(n as i64)) as usize;
                e[[i, j]] = self.tap(dx, dy);
            }
        }
        Ok(e)
    }

    /// Transform of the embedded kernel.
    pub fn spectrum(&self, m: usize, n: usize, fft: &Fft2) -> Result<Array2<C64>> {
        Ok(fft.forward(&self.embed(m, n)?))
    }
}

/// Truncated Gaussian taps on an odd `size x size` stencil, normalized to
/// unit sum (the convention of the usual special-kernel generators).
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<BlurKernel> {
    if size % 2 == 0 || size == 0 {
        return Err(SatvError::Config(format!(
            "gaussian kernel size must be odd, got {size}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(SatvError::Config(format!(
            "gaussian kernel sigma must be positive, got {sigma}"
        )));
    }
    let c = (size / 2) as i64;
    let mut taps = Array2::zeros((size, size));
    for dx in -c..=c {
        for dy in -c..=c {
            let r2 = (dx * dx + dy * dy) as f64;
            taps[[(dx + c) as usize, (dy + c) as usize]] = (-r2 / (2.0 * sigma * sigma)).exp();
        }
    }
    let sum = taps.sum();
    taps.mapv_inplace(|t| t / sum);
    BlurKernel::new(taps)
}

/// Uniform averaging kernel: every tap equals `1/size^2`.
pub fn average_kernel(size: usize) -> Result<BlurKernel> {
    if size % 2 == 0 || size == 0 {
        return Err(SatvError::Config(format!(
            "average kernel size must be odd, got {size}"
        )));
    }
    let taps = Array2::from_elem((size, size), 1.0 / (size * size) as f64);
    BlurKernel::new(taps)
}

/// Periodic convolution of an image with a kernel, evaluated spectrally.
pub fn apply_blur(u: &ImageGrid, kernel: &BlurKernel) -> Result<ImageGrid> {
    let (m, n) = u.shape();
    let fft = Fft2::new(m, n);
    let khat = kernel.spectrum(m, n, &fft)?;
    let spec = fft.forward(u.values());
    let blurred = fft.inverse_real(&(&spec * &khat));
    Ok(ImageGrid::from_raw(blurred, u.mesh()))
}

/// Adjoint blur `K*`, realized by the conjugate spectrum.
pub fn apply_blur_adjoint(u: &ImageGrid, kernel: &BlurKernel) -> Result<ImageGrid> {
    let (m, n) = u.shape();
    let fft = Fft2::new(m, n);
    let khat = kernel.spectrum(m, n, &fft)?;
    let spec = fft.forward(u.values());
    let mut prod = spec;
    ndarray::Zip::from(&mut prod)
        .and(&khat)
        .for_each(|s, k| *s *= k.conj());
    Ok(ImageGrid::from_raw(fft.inverse_real(&prod), u.mesh()))
}

/// Pointwise minimizer of the inpainting `z`-subproblem.
///
/// On known pixels the quadratic fidelity and the `z = u` penalty balance:
/// `z = (f/lambda + r3*u + lam3) / (1/lambda + r3)`. On missing pixels only
/// the penalty acts: `z = u + lam3/r3`. The observed value under the mask is
/// never read.
pub fn update_z_inpaint(
    u: &ImageGrid,
    f: &ImageGrid,
    mask: &Array2<bool>,
    lambda: f64,
    r3: f64,
    lam3: &Array2<f64>,
) -> ImageGrid {
    let mut z = Array2::zeros(u.shape());
    ndarray::Zip::from(&mut z)
        .and(u.values())
        .and(f.values())
        .and(mask)
        .and(lam3)
        .for_each(|z, &u, &f, &missing, &l3| {
            *z = if missing {
                u + l3 / r3
            } else {
                (f / lambda + r3 * u + l3) / (1.0 / lambda + r3)
            };
        });
    ImageGrid::from_raw(z, u.mesh())
}
