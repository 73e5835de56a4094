//! Fourier symbols of the periodic difference operators and the one-shot
//! linear solve used by every `u`-subproblem.
//!
//! Under periodic boundary conditions the normal-equation operator
//!
//! ```text
//! A = z0·I + (1/λ)·K*K [deblur only] − r1·div∘grad + r2·div2∘hess
//! ```
//!
//! is diagonalized by the 2-D DFT. The symbol of `−div∘grad` is
//! `S(k,l) = (4 sin²(πk/M) + 4 sin²(πl/N)) / h²`, and because the Hessian is
//! built from the same forward stencils, the symbol of `div2∘hess` is exactly
//! `S²`. One forward transform, a pointwise division and one inverse
//! transform therefore solve `A u = rhs` to rounding error.

use ndarray::Array2;

use crate::admm::SolverConfig;
use crate::error::{Result, SatvError};
use crate::fft::{C64, Fft2};
use crate::grid::{div, div2, grad, hess, ImageGrid};
use crate::problems::{apply_blur, apply_blur_adjoint, BlurKernel, ProblemSpec};

/// Eigenvalues of `−div∘grad` on an `M x N` periodic grid with mesh `h`.
pub fn first_order_symbol(m: usize, n: usize, h: f64) -> Array2<f64> {
    use std::f64::consts::PI;
    Array2::from_shape_fn((m, n), |(k, l)| {
        let sk = (PI * k as f64 / m as f64).sin();
        let sl = (PI * l as f64 / n as f64).sin();
        4.0 * (sk * sk + sl * sl) / (h * h)
    })
}

/// Which fidelity term the denominator was built for.
#[derive(Debug, Clone)]
enum FidelityTerm {
    /// `1/λ` on the identity.
    Denoise { lambda: f64 },
    /// `|K̂|²/λ`.
    Deblur { lambda: f64, kernel: BlurKernel },
    /// `r3` on the identity (the `z = u` penalty).
    Inpaint { r3: f64 },
}

/// The strictly positive Fourier-domain denominator of the `u`-subproblem,
/// plus everything needed to re-apply the same operator in physical space.
#[derive(Debug, Clone)]
pub struct SpectralDenominator {
    values: Array2<f64>,
    zero_order: f64,
    r1: f64,
    r2: f64,
    mu: f64,
    h: f64,
    fidelity: FidelityTerm,
}

impl SpectralDenominator {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// The coefficient multiplying the identity (equals the zero-frequency
    /// entry, since `S(0,0) = 0` and kernels are normalized).
    pub fn zero_order(&self) -> f64 {
        self.zero_order
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Applies the physical-space operator this denominator diagonalizes,
    /// using the difference stencils directly. Used as the independent route
    /// for residual checks of [`spectral_solve`].
    pub fn apply_operator(&self, u: &ImageGrid) -> Result<ImageGrid> {
        let mut out = match &self.fidelity {
            FidelityTerm::Denoise { lambda } => u.values() * (1.0 / lambda + self.mu),
            FidelityTerm::Inpaint { r3 } => u.values() * (r3 + self.mu),
            FidelityTerm::Deblur { lambda, kernel } => {
                let ku = apply_blur(u, kernel)?;
                let kku = apply_blur_adjoint(&ku, kernel)?;
                kku.values() / *lambda + u.values() * self.mu
            }
        };
        if self.r1 != 0.0 {
            out = out - div(&grad(u)).values() * self.r1;
        }
        if self.r2 != 0.0 {
            out = out + div2(&hess(u)).values() * self.r2;
        }
        Ok(ImageGrid::from_raw(out, u.mesh()))
    }
}

/// Assembles the denominator for the given problem on an `M x N` grid.
///
/// Denoise: `(1/λ + μ) + r1·S + r2·S²`; deblur replaces `1/λ` by `|K̂|²/λ`;
/// inpaint replaces it by `r3`. Fails if any entry is not strictly positive.
pub fn build_denominator(
    cfg: &SolverConfig,
    problem: &ProblemSpec,
    m: usize,
    n: usize,
    fft: &Fft2,
) -> Result<SpectralDenominator> {
    let s = first_order_symbol(m, n, cfg.h);
    let (fidelity, zero_order, base): (FidelityTerm, f64, Array2<f64>) = match problem {
        ProblemSpec::Denoise => {
            let z0 = 1.0 / cfg.lambda + cfg.mu;
            (
                FidelityTerm::Denoise { lambda: cfg.lambda },
                z0,
                Array2::from_elem((m, n), z0),
            )
        }
        ProblemSpec::Deblur { kernel } => {
            let khat = kernel.spectrum(m, n, fft)?;
            let base = khat.mapv(|k| k.norm_sqr() / cfg.lambda + cfg.mu);
            (
                FidelityTerm::Deblur {
                    lambda: cfg.lambda,
                    kernel: kernel.clone(),
                },
                1.0 / cfg.lambda + cfg.mu,
                base,
            )
        }
        ProblemSpec::Inpaint { r3, .. } => {
            let z0 = r3 + cfg.mu;
            (
                FidelityTerm::Inpaint { r3: *r3 },
                z0,
                Array2::from_elem((m, n), z0),
            )
        }
    };
    let values = base + s.mapv(|sv| cfg.r1 * sv + cfg.r2 * sv * sv);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(SatvError::DenominatorNotPositive { min });
    }
    Ok(SpectralDenominator {
        values,
        zero_order,
        r1: cfg.r1,
        r2: cfg.r2,
        mu: cfg.mu,
        h: cfg.h,
        fidelity,
    })
}

/// Solves `A u = rhs` by pointwise division in the Fourier domain.
pub fn spectral_solve(rhs: &ImageGrid, den: &SpectralDenominator, fft: &Fft2) -> ImageGrid {
    debug_assert_eq!(rhs.shape(), den.shape());
    debug_assert_eq!(rhs.mesh(), den.h);
    let mut spec = fft.forward(rhs.values());
    ndarray::Zip::from(&mut spec)
        .and(&den.values)
        .for_each(|s, &d| *s = C64::new(s.re / d, s.im / d));
    ImageGrid::from_raw(fft.inverse_real(&spec), rhs.mesh())
}
