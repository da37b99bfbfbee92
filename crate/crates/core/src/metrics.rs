//! Image-quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.same_shape(b)?;
    let sum: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub window_radius: usize,
    pub window_sigma: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
            window_radius: 5,
            window_sigma: 1.5,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::InvalidParameter("SSIM constants must be positive".into()));
        }
        if !(self.dynamic_range > 0.0 && self.dynamic_range.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dynamic range must be positive, got {}",
                self.dynamic_range
            )));
        }
        if self.window_radius == 0 {
            return Err(Error::InvalidParameter("window radius must be at least 1".into()));
        }
        if !(self.window_sigma > 0.0) {
            return Err(Error::InvalidParameter("window sigma must be positive".into()));
        }
        Ok(())
    }
}

fn gaussian_window(radius: usize, sigma: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Separable "valid" filtering: output side is `n - 2 * radius`.
fn filter_valid(data: &[f64], n: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let m = n + 1 - k;
    let mut rows = vec![0.0; n * m];
    for r1 in 0..n {
        for c in 0..m {
            rows[r1 * m + c] = (0..k).map(|j| w[j] * data[r1 * n + c + j]).sum();
        }
    }
    let mut out = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            out[r * m + c] = (0..k).map(|j| w[j] * rows[(r + j) * m + c]).sum();
        }
    }
    out
}

/// Mean SSIM over Gaussian-windowed local statistics, evaluated where the
/// window fits inside the image. Images smaller than the window use the
/// largest radius that fits.
pub fn ssim(a: &Image, b: &Image, p: &SsimParams) -> Result<f64> {
    a.same_shape(b)?;
    p.validate()?;
    let n = a.size();
    let radius = p.window_radius.min((n - 1) / 2);
    let w = gaussian_window(radius, p.window_sigma);
    let (x, y) = (a.as_slice(), b.as_slice());
    let prod = |f: &dyn Fn(usize) -> f64| (0..n * n).map(f).collect::<Vec<f64>>();
    let mu_a = filter_valid(x, n, &w);
    let mu_b = filter_valid(y, n, &w);
    let e_aa = filter_valid(&prod(&|i| x[i] * x[i]), n, &w);
    let e_bb = filter_valid(&prod(&|i| y[i] * y[i]), n, &w);
    let e_ab = filter_valid(&prod(&|i| x[i] * y[i]), n, &w);
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}
