//! Unitary 2-D DFT on square grids.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::image::{Image, KSpace};

/// Cached forward/inverse plans for an `n x n` grid.
///
/// Both directions carry a `1/sqrt(n)` factor per axis so the transform is unitary.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn run(&self, plan: &dyn Fft<f64>, buf: &mut [Complex64]) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n * n);
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose(buf, n);
        plan.process_with_scratch(buf, &mut scratch);
        transpose(buf, n);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn forward_inplace(&self, buf: &mut [Complex64]) {
        self.run(self.forward.as_ref(), buf);
    }

    pub fn inverse_inplace(&self, buf: &mut [Complex64]) {
        self.run(self.inverse.as_ref(), buf);
    }

    pub fn forward_real(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_inplace(&mut buf);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse_inplace(&mut spec);
        spec.into_iter().map(|z| z.re).collect()
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Unitary 2-D DFT of a real image.
pub fn dft2_forward(u: &Image) -> KSpace {
    let plan = Fft2::new(u.size());
    KSpace::from_raw(u.size(), plan.forward_real(u.as_slice()))
}

/// Unitary inverse 2-D DFT, real part.
pub fn dft2_inverse_real(y: &KSpace) -> Image {
    let plan = Fft2::new(y.size());
    Image::from_raw(y.size(), plan.inverse_real(y.as_slice().to_vec()))
}
