//! Periodic finite-difference operators and their Fourier symbols.
//!
//! Second-order stencils, with `r1` the row index and wrap-around at the edges:
//!
//! * `Dxx u = u(r1+1, r2) - 2 u(r1, r2) + u(r1-1, r2)`
//! * `Dyy u = u(r1, r2+1) - 2 u(r1, r2) + u(r1, r2-1)`
//! * `Dxy u = Dyx u = (u(r1+1, r2+1) - u(r1+1, r2-1) - u(r1-1, r2+1) + u(r1-1, r2-1)) / 4`
//!
//! The centered mixed stencil keeps the per-pixel Hessian exactly equivariant
//! under 90 degree rotations of the grid; a one-sided stencil shifts the mixed
//! channel by a pixel relative to the diagonal ones.
//!
//! The first-order operators used by the TV baseline are forward differences.
//! All of them are circulant, so `A^T A` is diagonalized by the 2-D DFT.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::{GradientField, HessianField, Image};

/// Per-frequency real, non-negative eigenvalues of a circulant normal operator.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierDiagonal {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl FourierDiagonal {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn build(width: usize, height: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions(format!("{width}x{height} symbol grid")));
        }
        let mut data = Vec::with_capacity(width * height);
        for k1 in 0..height {
            // 2 - 2cos(w) = 4 sin^2(w/2) keeps the DC bin at exactly zero.
            let a = 4.0 * (PI * k1 as f64 / height as f64).sin().powi(2);
            for k2 in 0..width {
                let b = 4.0 * (PI * k2 as f64 / width as f64).sin().powi(2);
                data.push(f(a, b));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

#[inline]
fn wrap_inc(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

#[inline]
fn wrap_dec(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

/// Applies the discrete Hessian at every pixel.
pub fn hessian_apply(u: &Image) -> HessianField {
    let n = u.size();
    let x = u.as_slice();
    let mut out = Vec::with_capacity(n * n);
    for r1 in 0..n {
        let up = wrap_inc(r1, n) * n;
        let dn = wrap_dec(r1, n) * n;
        let row = r1 * n;
        for r2 in 0..n {
            let rt = wrap_inc(r2, n);
            let lt = wrap_dec(r2, n);
            let c = x[row + r2];
            let dxx = x[up + r2] - 2.0 * c + x[dn + r2];
            let dyy = x[row + rt] - 2.0 * c + x[row + lt];
            let dxy = 0.25 * (x[up + rt] - x[up + lt] - x[dn + rt] + x[dn + lt]);
            out.push([dxx, dxy, dxy, dyy]);
        }
    }
    HessianField::from_raw(n, out)
}

/// `Dxx^T P11 + Dxy^T P12 + Dyx^T P21 + Dyy^T P22`.
pub fn hessian_adjoint(p: &HessianField) -> Image {
    let n = p.size();
    let f = p.pixels();
    let mut out = Vec::with_capacity(n * n);
    for r1 in 0..n {
        let up = wrap_inc(r1, n) * n;
        let dn = wrap_dec(r1, n) * n;
        let row = r1 * n;
        for r2 in 0..n {
            let rt = wrap_inc(r2, n);
            let lt = wrap_dec(r2, n);
            let c = &f[row + r2];
            // All three stencils are symmetric under negating both offsets.
            let xx = f[up + r2][0] - 2.0 * c[0] + f[dn + r2][0];
            let yy = f[row + rt][3] - 2.0 * c[3] + f[row + lt][3];
            let m = |k: usize| 0.25 * (f[up + rt][k] - f[up + lt][k] - f[dn + rt][k] + f[dn + lt][k]);
            out.push(xx + m(1) + m(2) + yy);
        }
    }
    Image::from_raw(n, out)
}

/// Fourier symbol of `Dxx^T Dxx + Dxy^T Dxy + Dyx^T Dyx + Dyy^T Dyy`.
pub fn hessian_symbol(width: usize, height: usize) -> Result<FourierDiagonal> {
    // |Dxx|^2 = a^2, |Dyy|^2 = b^2, |Dxy|^2 = |Dyx|^2 = sin^2(w1) sin^2(w2),
    // and sin^2(w) = a (1 - a/4).
    FourierDiagonal::build(width, height, |a, b| {
        let m = a * (1.0 - 0.25 * a) * b * (1.0 - 0.25 * b);
        a * a + m + m + b * b
    })
}

/// Forward-difference gradient `(u(r1+1,r2) - u, u(r1,r2+1) - u)`.
pub fn gradient_apply(u: &Image) -> GradientField {
    let n = u.size();
    let x = u.as_slice();
    let mut out = Vec::with_capacity(n * n);
    for r1 in 0..n {
        let up = wrap_inc(r1, n) * n;
        let row = r1 * n;
        for r2 in 0..n {
            let c = x[row + r2];
            out.push([x[up + r2] - c, x[row + wrap_inc(r2, n)] - c]);
        }
    }
    GradientField::from_raw(n, out)
}

/// Negative divergence: adjoint of [`gradient_apply`].
pub fn gradient_adjoint(p: &GradientField) -> Image {
    let n = p.size();
    let f = p.pixels();
    let mut out = Vec::with_capacity(n * n);
    for r1 in 0..n {
        let dn = wrap_dec(r1, n) * n;
        let row = r1 * n;
        for r2 in 0..n {
            let c = f[row + r2];
            out.push(f[dn + r2][0] - c[0] + f[row + wrap_dec(r2, n)][1] - c[1]);
        }
    }
    Image::from_raw(n, out)
}

/// Fourier symbol of `Dx^T Dx + Dy^T Dy`.
pub fn gradient_symbol(width: usize, height: usize) -> Result<FourierDiagonal> {
    FourierDiagonal::build(width, height, |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(n: usize, rng: &mut impl Rng) -> Image {
        Image::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn random_field(n: usize, rng: &mut impl Rng) -> HessianField {
        let data = (0..n * n)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        HessianField::new(n, n, data).unwrap()
    }

    fn impulse(n: usize, r1: usize, r2: usize) -> Image {
        Image::from_fn(n, |a, b| if (a, b) == (r1, r2) { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let h = hessian_apply(&Image::filled(8, 17.25));
        assert!(h.pixels().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_gives_dxx_stencil() {
        let h = hessian_apply(&impulse(8, 0, 0));
        assert_eq!(h.get(0, 0).unwrap()[0], -2.0);
        assert_eq!(h.get(1, 0).unwrap()[0], 1.0);
        assert_eq!(h.get(7, 0).unwrap()[0], 1.0);
        let others: f64 = h.pixels().iter().map(|p| p[0].abs()).sum();
        assert_eq!(others, 4.0);
    }

    #[test]
    fn sinusoid_is_dxx_eigenfunction() {
        let n = 16;
        let u = Image::from_fn(n, |r1, _| (2.0 * PI * r1 as f64 / n as f64).sin()).unwrap();
        let h = hessian_apply(&u);
        let lambda = 2.0 * (2.0 * PI / n as f64).cos() - 2.0;
        for (p, v) in h.pixels().iter().zip(u.as_slice()) {
            assert!((p[0] - lambda * v).abs() < 1e-14);
        }
    }

    #[test]
    fn adjoint_of_zero_is_zero() {
        let out = hessian_adjoint(&HessianField::zeros(5));
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_of_dxx_impulse_is_reversed_stencil() {
        let n = 8;
        let mut p = HessianField::zeros(n);
        p.set(3, 4, [1.0, 0.0, 0.0, 0.0]).unwrap();
        let out = hessian_adjoint(&p);
        // Dxx is symmetric so the reversed stencil equals the forward one.
        let expected = hessian_apply(&impulse(n, 3, 4));
        for (a, b) in out.as_slice().iter().zip(expected.pixels()) {
            assert_eq!(*a, b[0]);
        }
    }

    #[test]
    fn adjoint_identity_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 8, 13] {
            let u = random_image(n, &mut rng);
            let p = random_field(n, &mut rng);
            let lhs = hessian_apply(&u).dot(&p);
            let rhs = u.dot(&hessian_adjoint(&p));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{n}: {lhs} {rhs}");

            let g = gradient_apply(&u);
            let q = GradientField::new(
                n,
                n,
                (0..n * n).map(|_| [rng.random_range(-1.0..1.0), rng.random()]).collect(),
            )
            .unwrap();
            let lhs = g.dot(&q);
            let rhs = u.dot(&gradient_adjoint(&q));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn symbol_edge_cases() {
        let s = hessian_symbol(1, 1).unwrap();
        assert_eq!(s.as_slice(), &[0.0]);
        let s = hessian_symbol(16, 16).unwrap();
        assert_eq!(s.as_slice()[0], 0.0);
        assert!(s.as_slice().iter().all(|&v| v >= 0.0));
        assert!(hessian_symbol(0, 4).is_err());
        // Nyquist bin in both directions: a = b = 4, mixed terms vanish.
        assert!((s.as_slice()[8 * 16 + 8] - 32.0).abs() < 1e-12);
    }

    /// Applies a symbol through a naive O(N^2) DFT pair, independent of the FFT module.
    fn apply_symbol_naive(u: &Image, s: &FourierDiagonal) -> Vec<f64> {
        let n = u.size();
        let x = u.as_slice();
        let w = |k: usize, r: usize| 2.0 * PI * ((k * r) % n) as f64 / n as f64;
        let mut spec = vec![(0.0, 0.0); n * n];
        for k1 in 0..n {
            for k2 in 0..n {
                let (mut re, mut im) = (0.0, 0.0);
                for r1 in 0..n {
                    for r2 in 0..n {
                        let ang = -(w(k1, r1) + w(k2, r2));
                        re += x[r1 * n + r2] * ang.cos();
                        im += x[r1 * n + r2] * ang.sin();
                    }
                }
                let d = s.as_slice()[k1 * n + k2];
                spec[k1 * n + k2] = (re * d, im * d);
            }
        }
        let mut out = vec![0.0; n * n];
        for r1 in 0..n {
            for r2 in 0..n {
                let mut acc = 0.0;
                for k1 in 0..n {
                    for k2 in 0..n {
                        let ang = w(k1, r1) + w(k2, r2);
                        let (re, im) = spec[k1 * n + k2];
                        acc += re * ang.cos() - im * ang.sin();
                    }
                }
                out[r1 * n + r2] = acc / (n * n) as f64;
            }
        }
        out
    }

    #[test]
    fn symbols_match_normal_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 16;
        let u = random_image(n, &mut rng);
        let spatial = hessian_adjoint(&hessian_apply(&u));
        let fourier = apply_symbol_naive(&u, &hessian_symbol(n, n).unwrap());
        for (a, b) in spatial.as_slice().iter().zip(&fourier) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let spatial = gradient_adjoint(&gradient_apply(&u));
        let fourier = apply_symbol_naive(&u, &gradient_symbol(n, n).unwrap());
        for (a, b) in spatial.as_slice().iter().zip(&fourier) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rot90_conjugates_hessian() {
        // rot90 maps (r1, r2) -> (n-1-r2, r1). The rotated image w(s1, s2) = u(s2, n-1-s1),
        // so w_xx = u_yy, w_yy = u_xx and the mixed terms flip sign at the same pixel.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 10;
        let u = random_image(n, &mut rng);
        let hu = hessian_apply(&u);
        let hw = hessian_apply(&u.rot90());
        for r1 in 0..n {
            for r2 in 0..n {
                let a = hu.get(r1, r2).unwrap();
                let b = hw.get(n - 1 - r2, r1).unwrap();
                assert!((a[0] - b[3]).abs() < 1e-12);
                assert!((a[3] - b[0]).abs() < 1e-12);
                assert!((a[1] + b[1]).abs() < 1e-12);
                assert!((a[2] + b[2]).abs() < 1e-12);
            }
        }
    }
}
