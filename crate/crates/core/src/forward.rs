//! Masked Fourier measurement operator `T = M F` and measurement simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::image::{Image, KSpace, Mask};

/// Complex Gaussian measurement noise, `sigma` per real/imaginary component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }

    pub fn noiseless() -> Self {
        Self {
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// `T` and `T*` bound to one mask, with a cached FFT plan.
#[derive(Clone, Debug)]
pub struct SamplingOperator {
    fft: Fft2,
    mask: Mask,
}

impl SamplingOperator {
    pub fn new(mask: Mask) -> Self {
        Self {
            fft: Fft2::new(mask.size()),
            mask,
        }
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn size(&self) -> usize {
        self.mask.size()
    }

    pub(crate) fn fft(&self) -> &Fft2 {
        &self.fft
    }

    fn zero_unsampled(&self, spec: &mut [Complex64]) {
        for (z, &keep) in spec.iter_mut().zip(self.mask.as_slice()) {
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn apply(&self, u: &Image) -> Result<KSpace> {
        self.mask.check_grid(u.size())?;
        let mut spec = self.fft.forward_real(u.as_slice());
        self.zero_unsampled(&mut spec);
        Ok(KSpace::from_raw(u.size(), spec))
    }

    pub fn adjoint(&self, y: &KSpace) -> Result<Image> {
        self.mask.check_grid(y.size())?;
        let mut spec = y.as_slice().to_vec();
        self.zero_unsampled(&mut spec);
        Ok(Image::from_raw(y.size(), self.fft.inverse_real(spec)))
    }
}

/// `T u`: unitary DFT with unsampled bins set to zero.
pub fn forward_apply(u: &Image, mask: &Mask) -> Result<KSpace> {
    mask.check_grid(u.size())?;
    SamplingOperator::new(mask.clone()).apply(u)
}

/// `T* y`: zero unsampled bins, inverse unitary DFT, real part.
pub fn forward_adjoint(y: &KSpace, mask: &Mask) -> Result<Image> {
    mask.check_grid(y.size())?;
    SamplingOperator::new(mask.clone()).adjoint(y)
}

/// `m = T u + eta`, with noise only on sampled bins.
pub fn simulate_measurement(u: &Image, mask: &Mask, noise: NoiseSpec) -> Result<KSpace> {
    let clean = forward_apply(u, mask)?;
    if noise.sigma == 0.0 {
        return Ok(clean);
    }
    let normal = Normal::new(0.0, noise.sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut data = clean.into_vec();
    for (z, &keep) in data.iter_mut().zip(mask.as_slice()) {
        if keep {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *z += Complex64::new(re, im);
        }
    }
    Ok(KSpace::from_raw(u.size(), data))
}
