//! Thin 2-D FFT layer over `rustfft`.
//!
//! Transforms are unnormalized on the forward pass; the inverse divides by
//! `M*N` so that `inverse(forward(x)) == x` up to rounding. Real input fields
//! produce conjugate-symmetric spectra; the imaginary residue left after an
//! inverse transform of a symmetric spectrum is discarded (and bounded in
//! debug builds).

use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub type C64 = Complex<f64>;

/// Cached forward/inverse plans for one grid shape.
pub struct Fft2 {
    m: usize,
    n: usize,
    fwd_rows: Arc<dyn Fft<f64>>,
    fwd_cols: Arc<dyn Fft<f64>>,
    inv_rows: Arc<dyn Fft<f64>>,
    inv_cols: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(m: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            n,
            fwd_rows: planner.plan_fft_forward(n),
            fwd_cols: planner.plan_fft_forward(m),
            inv_rows: planner.plan_fft_inverse(n),
            inv_cols: planner.plan_fft_inverse(m),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    fn process(&self, buf: &mut [C64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (m, n) = (self.m, self.n);
        debug_assert_eq!(buf.len(), m * n);
        // Rows are contiguous in row-major layout.
        for row in buf.chunks_exact_mut(n) {
            rows.process(row);
        }
        // Columns via transpose, process, transpose back.
        let mut t = transpose(buf, m, n);
        for col in t.chunks_exact_mut(m) {
            cols.process(col);
        }
        let back = transpose(&t, n, m);
        buf.copy_from_slice(&back);
    }

    /// Forward transform of a real field.
    pub fn forward(&self, real: &Array2<f64>) -> Array2<C64> {
        debug_assert_eq!(real.dim(), (self.m, self.n));
        let mut buf: Vec<C64> = real.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.process(&mut buf, &self.fwd_rows, &self.fwd_cols);
        Array2::from_shape_vec((self.m, self.n), buf).expect("shape preserved")
    }

    /// Inverse transform, normalized by `1/(M*N)`, returning the real part.
    pub fn inverse_real(&self, spec: &Array2<C64>) -> Array2<f64> {
        debug_assert_eq!(spec.dim(), (self.m, self.n));
        let mut buf: Vec<C64> = spec.iter().copied().collect();
        self.process(&mut buf, &self.inv_rows, &self.inv_cols);
        let scale = 1.0 / (self.m * self.n) as f64;
        let out = Array2::from_shape_vec(
            (self.m, self.n),
            buf.iter().map(|c| c.re * scale).collect(),
        )
        .expect("shape preserved");
        #[cfg(debug_assertions)]
        {
            let max_im = buf.iter().fold(0.0f64, |a, c| a.max(c.im.abs())) * scale;
            let max_re = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            debug_assert!(
                max_im <= 1e-10 * max_re + 1e-30,
                "imaginary residue {max_im} exceeds 1e-10 of |result| {max_re}"
            );
        }
        out
    }
}

fn transpose(buf: &[C64], m: usize, n: usize) -> Vec<C64> {
    let mut t = vec![C64::default(); buf.len()];
    for i in 0..m {
        for j in 0..n {
            t[j * m + i] = buf[i * n + j];
        }
    }
    t
}
