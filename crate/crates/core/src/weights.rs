//! Spatially adaptive regularization weights derived from the image-surface
//! shape operator.
//!
//! The edge indicator `β(u) = 1/√(1+|∇u|²)` is small across strong gradients
//! and 1 in flat regions; its own gradient magnitude `α(u) = |∇β(u)|` lights
//! up next to edges. The shape-operator field `W = ∇β ⊗ ∇u + β ∇²u` ties the
//! two together: pointwise, `|W| ≤ α|∇u| + β|∇²u|`, which is the combined
//! first/second-order regularizer the solver minimizes.

use ndarray::Array2;

use crate::error::{Result, SatvError};
use crate::grid::{grad, hess, Hess4Field, ImageGrid};

/// How the weight fields are obtained during a solve.
#[derive(Debug, Clone)]
pub enum WeightMode {
    /// Recompute `α(u), β(u)` from the latest iterate every sweep.
    Dynamic,
    /// Compute once from the observed image and reuse.
    Observed,
    /// Compute once from a reference image (ground truth experiments).
    Oracle(ImageGrid),
    /// Uniform constant weights. `beta0 = 0` gives the pure first-order
    /// baseline, `alpha0 = 0` the pure second-order one.
    Constant { alpha0: f64, beta0: f64 },
}

impl WeightMode {
    pub fn name(&self) -> &'static str {
        match self {
            WeightMode::Dynamic => "dynamic",
            WeightMode::Observed => "observed",
            WeightMode::Oracle(_) => "oracle",
            WeightMode::Constant { .. } => "constant",
        }
    }
}

/// The per-pixel weight fields used by one ADMM sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFields {
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
}

impl WeightFields {
    pub fn constant(m: usize, n: usize, alpha0: f64, beta0: f64) -> Self {
        Self {
            alpha: Array2::from_elem((m, n), alpha0),
            beta: Array2::from_elem((m, n), beta0),
        }
    }

    /// Computes both fields from an image.
    pub fn from_image(u: &ImageGrid) -> Self {
        let beta = beta_field(u);
        let alpha = grad_magnitude(&beta, u.mesh());
        Self { alpha, beta }
    }
}

/// Edge indicator `β(u) = 1/√(1+|∇u|²)`, valued in `(0, 1]`.
pub fn beta_field(u: &ImageGrid) -> Array2<f64> {
    let g = grad(u);
    let mut out = Array2::zeros(u.shape());
    ndarray::Zip::from(&mut out)
        .and(&g.p1)
        .and(&g.p2)
        .for_each(|o, &a, &b| *o = 1.0 / (1.0 + a * a + b * b).sqrt());
    out
}

fn grad_magnitude(field: &Array2<f64>, h: f64) -> Array2<f64> {
    let gx = crate::grid::dx_forward(field, h);
    let gy = crate::grid::dy_forward(field, h);
    let mut out = Array2::zeros(field.dim());
    ndarray::Zip::from(&mut out)
        .and(&gx)
        .and(&gy)
        .for_each(|o, &a, &b| *o = a.hypot(b));
    out
}

/// Edge-transition weight `α(u) = |∇β(u)|` (nonnegative).
pub fn alpha_field(u: &ImageGrid) -> Array2<f64> {
    grad_magnitude(&beta_field(u), u.mesh())
}

/// Assembles the shape-operator field `W = ∇β ⊗ ∇u + β ∇²u` and its
/// pointwise Frobenius norm.
pub fn weingarten_field(u: &ImageGrid) -> (Hess4Field, Array2<f64>) {
    let h = u.mesh();
    let beta = beta_field(u);
    let bx = crate::grid::dx_forward(&beta, h);
    let by = crate::grid::dy_forward(&beta, h);
    let g = grad(u);
    let hs = hess(u);
    let assemble = |ba: &Array2<f64>, gb: &Array2<f64>, hab: &Array2<f64>| {
        let mut out = Array2::zeros(u.shape());
        ndarray::Zip::from(&mut out)
            .and(ba)
            .and(gb)
            .and(&beta)
            .and(hab)
            .for_each(|o, &dbeta, &du, &b, &ddu| *o = dbeta * du + b * ddu);
        out
    };
    let w = Hess4Field {
        h,
        w11: assemble(&bx, &g.p1, &hs.w11),
        w12: assemble(&bx, &g.p2, &hs.w12),
        w21: assemble(&by, &g.p1, &hs.w21),
        w22: assemble(&by, &g.p2, &hs.w22),
    };
    let norm = w.magnitude();
    (w, norm)
}

/// Produces the weight fields for a mode given the latest iterate and the
/// observed image. Pure; see [`WeightSource`] for the caching wrapper the
/// solver uses.
pub fn weights_for(mode: &WeightMode, u_latest: &ImageGrid, f: &ImageGrid) -> Result<WeightFields> {
    match mode {
        WeightMode::Dynamic => Ok(WeightFields::from_image(u_latest)),
        WeightMode::Observed => Ok(WeightFields::from_image(f)),
        WeightMode::Oracle(reference) => {
            if reference.shape() != f.shape() {
                return Err(SatvError::ShapeMismatch {
                    expected: f.shape(),
                    got: reference.shape(),
                });
            }
            Ok(WeightFields::from_image(reference))
        }
        WeightMode::Constant { alpha0, beta0 } => {
            let (m, n) = f.shape();
            Ok(WeightFields::constant(m, n, *alpha0, *beta0))
        }
    }
}

/// Weight provider with write-once caching for the modes that do not depend
/// on the running iterate.
#[derive(Debug, Clone)]
pub struct WeightSource {
    mode: WeightMode,
    cached: Option<WeightFields>,
}

impl WeightSource {
    pub fn new(mode: WeightMode) -> Self {
        Self { mode, cached: None }
    }

    pub fn mode(&self) -> &WeightMode {
        &self.mode
    }

    /// Dynamic mode recomputes from `u_latest`; every other mode computes
    /// once and reuses the cached fields.
    pub fn fields(&mut self, u_latest: &ImageGrid, f: &ImageGrid) -> Result<&WeightFields> {
        match self.mode {
            WeightMode::Dynamic => {
                self.cached = Some(WeightFields::from_image(u_latest));
            }
            _ => {
                if self.cached.is_none() {
                    self.cached = Some(weights_for(&self.mode, u_latest, f)?);
                }
            }
        }
        Ok(self.cached.as_ref().expect("just filled"))
    }
}
