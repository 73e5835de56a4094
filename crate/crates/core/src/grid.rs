//! Scalar, vector and Hessian fields on a periodic pixel grid, together with
//! the forward/backward difference operators used throughout the solver.
//!
//! Conventions (shared by every operator in this crate):
//!
//! * grids are `M x N` row-major arrays; index `i` runs over rows, `j` over
//!   columns, and both wrap periodically,
//! * first derivatives are forward differences divided by the mesh size `h`,
//! * `div` is the negative adjoint of `grad`:  ⟨grad u, p⟩ = −⟨u, div p⟩,
//! * the Hessian applies two forward differences, and `div2` is its exact
//!   adjoint built from backward differences:  ⟨hess u, w⟩ = ⟨u, div2 w⟩.
//!
//! Both adjoint identities hold to rounding error, which is what makes the
//! Fourier-diagonalized linear solves in [`crate::spectral`] exact.

use ndarray::Array2;

use crate::error::{Result, SatvError};

/// Default mesh size used by the synthetic generators and the CLI.
pub const DEFAULT_MESH: f64 = 5.0;

/// A scalar image: `M x N` intensity samples (0–255 scale, not clamped) on a
/// periodic grid with mesh size `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    h: f64,
    data: Array2<f64>,
}

impl ImageGrid {
    /// Wraps an array as an image, validating the grid invariants
    /// (at least 2x2, positive mesh, all values finite).
    pub fn new(data: Array2<f64>, h: f64) -> Result<Self> {
        let (m, n) = data.dim();
        if m < 2 || n < 2 {
            return Err(SatvError::Config(format!(
                "grid must be at least 2x2, got {m}x{n}"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(SatvError::Config(format!("mesh size must be positive, got {h}")));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(SatvError::Config("grid contains non-finite values".into()));
        }
        Ok(Self { h, data })
    }

    pub(crate) fn from_raw(data: Array2<f64>, h: f64) -> Self {
        Self { h, data }
    }

    pub fn zeros(m: usize, n: usize, h: f64) -> Self {
        Self::from_raw(Array2::zeros((m, n)), h)
    }

    pub fn constant(m: usize, n: usize, h: f64, value: f64) -> Self {
        Self::from_raw(Array2::from_elem((m, n), value), h)
    }

    /// Builds a grid from a function of the (row, col) index.
    pub fn from_fn(m: usize, n: usize, h: f64, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::from_raw(Array2::from_shape_fn((m, n), |(i, j)| f(i, j)), h)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn mesh(&self) -> f64 {
        self.h
    }

    /// Returns a copy with a different mesh size (values untouched).
    pub fn with_mesh(&self, h: f64) -> Self {
        Self::from_raw(self.data.clone(), h)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn into_values(self) -> Array2<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum of absolute values.
    pub fn norm_l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// Largest absolute value.
    pub fn norm_linf(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.sum() / (self.rows() * self.cols()) as f64
    }

    pub(crate) fn check_same_grid(&self, other: &ImageGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(SatvError::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(())
    }
}

/// A per-pixel 2-vector field (gradients, their splitting variable `v`, the
/// first multiplier).
#[derive(Debug, Clone, PartialEq)]
pub struct Vec2Field {
    pub h: f64,
    pub p1: Array2<f64>,
    pub p2: Array2<f64>,
}

impl Vec2Field {
    pub fn zeros(m: usize, n: usize, h: f64) -> Self {
        Self {
            h,
            p1: Array2::zeros((m, n)),
            p2: Array2::zeros((m, n)),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.p1.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.p1.iter().chain(self.p2.iter()).all(|v| v.is_finite())
    }

    /// Sum of absolute values over both components.
    pub fn norm_l1(&self) -> f64 {
        self.p1.iter().map(|v| v.abs()).sum::<f64>() + self.p2.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> Array2<f64> {
        let mut out = Array2::zeros(self.p1.dim());
        ndarray::Zip::from(&mut out)
            .and(&self.p1)
            .and(&self.p2)
            .for_each(|o, &a, &b| *o = a.hypot(b));
        out
    }
}

/// A per-pixel 4-vector field holding the four second derivatives (or their
/// splitting variable `w`, or the second multiplier).
#[derive(Debug, Clone, PartialEq)]
pub struct Hess4Field {
    pub h: f64,
    pub w11: Array2<f64>,
    pub w12: Array2<f64>,
    pub w21: Array2<f64>,
    pub w22: Array2<f64>,
}

impl Hess4Field {
    pub fn zeros(m: usize, n: usize, h: f64) -> Self {
        Self {
            h,
            w11: Array2::zeros((m, n)),
            w12: Array2::zeros((m, n)),
            w21: Array2::zeros((m, n)),
            w22: Array2::zeros((m, n)),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.w11.dim()
    }

    pub fn components(&self) -> [&Array2<f64>; 4] {
        [&self.w11, &self.w12, &self.w21, &self.w22]
    }

    pub fn is_finite(&self) -> bool {
        self.components()
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn norm_l1(&self) -> f64 {
        self.components()
            .iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }

    /// Pointwise Frobenius magnitude over the four components.
    pub fn magnitude(&self) -> Array2<f64> {
        let mut out = Array2::zeros(self.w11.dim());
        ndarray::Zip::from(&mut out)
            .and(&self.w11)
            .and(&self.w12)
            .and(&self.w21)
            .and(&self.w22)
            .for_each(|o, &a, &b, &c, &d| *o = (a * a + b * b + c * c + d * d).sqrt());
        out
    }
}

#[inline]
fn wrap_up(i: usize, len: usize) -> usize {
    if i + 1 == len {
        0
    } else {
        i + 1
    }
}

#[inline]
fn wrap_down(i: usize, len: usize) -> usize {
    if i == 0 {
        len - 1
    } else {
        i - 1
    }
}

/// Forward difference along rows, divided by the mesh.
pub(crate) fn dx_forward(a: &Array2<f64>, h: f64) -> Array2<f64> {
    let (m, n) = a.dim();
    Array2::from_shape_fn((m, n), |(i, j)| (a[[wrap_up(i, m), j]] - a[[i, j]]) / h)
}

/// Forward difference along columns, divided by the mesh.
pub(crate) fn dy_forward(a: &Array2<f64>, h: f64) -> Array2<f64> {
    let (m, n) = a.dim();
    Array2::from_shape_fn((m, n), |(i, j)| (a[[i, wrap_up(j, n)]] - a[[i, j]]) / h)
}

/// Backward difference along rows, divided by the mesh.
pub(crate) fn dx_backward(a: &Array2<f64>, h: f64) -> Array2<f64> {
    let (m, n) = a.dim();
    Array2::from_shape_fn((m, n), |(i, j)| (a[[i, j]] - a[[wrap_down(i, m), j]]) / h)
}

/// Backward difference along columns, divided by the mesh.
pub(crate) fn dy_backward(a: &Array2<f64>, h: f64) -> Array2<f64> {
    let (m, n) = a.dim();
    Array2::from_shape_fn((m, n), |(i, j)| (a[[i, j]] - a[[i, wrap_down(j, n)]]) / h)
}

/// Periodic forward-difference gradient.
pub fn grad(u: &ImageGrid) -> Vec2Field {
    Vec2Field {
        h: u.mesh(),
        p1: dx_forward(u.values(), u.mesh()),
        p2: dy_forward(u.values(), u.mesh()),
    }
}

/// Periodic backward-difference divergence, the negative adjoint of [`grad`].
pub fn div(p: &Vec2Field) -> ImageGrid {
    let d = dx_backward(&p.p1, p.h) + dy_backward(&p.p2, p.h);
    ImageGrid::from_raw(d, p.h)
}

/// Periodic Hessian: forward differences applied twice. The mixed components
/// are tied (`w12 == w21`) since the forward stencils commute.
pub fn hess(u: &ImageGrid) -> Hess4Field {
    let h = u.mesh();
    let p1 = dx_forward(u.values(), h);
    let p2 = dy_forward(u.values(), h);
    let w12 = dx_forward(&p2, h);
    Hess4Field {
        h,
        w11: dx_forward(&p1, h),
        w21: w12.clone(),
        w12,
        w22: dy_forward(&p2, h),
    }
}

/// Second-order divergence: the exact adjoint of [`hess`], so that
/// ⟨hess u, w⟩ = ⟨u, div2 w⟩ for arbitrary `w`.
pub fn div2(w: &Hess4Field) -> ImageGrid {
    let h = w.h;
    let d = dx_backward(&dx_backward(&w.w11, h), h)
        + dy_backward(&dx_backward(&w.w12, h), h)
        + dx_backward(&dy_backward(&w.w21, h), h)
        + dy_backward(&dy_backward(&w.w22, h), h);
    ImageGrid::from_raw(d, h)
}

/// Plain discrete inner product of two scalar fields.
pub fn inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Inner product of two 2-vector fields.
pub fn inner_vec2(a: &Vec2Field, b: &Vec2Field) -> f64 {
    inner(&a.p1, &b.p1) + inner(&a.p2, &b.p2)
}

/// Inner product of two 4-vector fields.
pub fn inner_hess4(a: &Hess4Field, b: &Hess4Field) -> f64 {
    inner(&a.w11, &b.w11) + inner(&a.w12, &b.w12) + inner(&a.w21, &b.w21) + inner(&a.w22, &b.w22)
}
