//! Raster value types: real images, per-pixel matrix fields, k-space and
//! sampling masks.
//!
//! Everything is stored row-major; pixel `(r1, r2)` lives at `r1 * width + r2`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    match values.into_iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn check_square(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimensions(format!("{width}x{height} grid is empty")));
    }
    if width != height {
        return Err(Error::Dimensions(format!(
            "{width}x{height} grid is not square"
        )));
    }
    Ok(())
}

/// A square real-valued image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_square(width, height)?;
        if data.len() != width * height {
            return Err(Error::Dimensions(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image without validation. Callers guarantee the invariants.
    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self {
            width: n,
            height: n,
            data,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_raw(n, vec![0.0; n * n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self::from_raw(n, vec![value; n * n])
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for r1 in 0..n {
            for r2 in 0..n {
                data.push(f(r1, r2));
            }
        }
        Self::new(n, n, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Side length of the square grid.
    pub fn size(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r1: usize, r2: usize) -> Result<f64> {
        if r1 >= self.height || r2 >= self.width {
            return Err(Error::OutOfBounds {
                row: r1,
                col: r2,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.data[r1 * self.width + r2])
    }

    /// Returns `(max |u|, ||u||_2)` over the flattened raster.
    pub fn linf_and_l2_norms(&self) -> (f64, f64) {
        let linf = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (linf, l2_norm(&self.data))
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.data)
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, c: f64) -> Image {
        Self::from_raw(self.width, self.data.iter().map(|v| v * c).collect())
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch {
                expected: (self.width, self.height),
                got: (other.width, other.height),
            });
        }
        Ok(())
    }

    /// Rotates the raster by 90 degrees: pixel `(r1, r2)` moves to `(n-1-r2, r1)`.
    pub fn rot90(&self) -> Image {
        let n = self.width;
        let mut out = vec![0.0; n * n];
        for r1 in 0..n {
            for r2 in 0..n {
                out[(n - 1 - r2) * n + r1] = self.data[r1 * n + r2];
            }
        }
        Self::from_raw(n, out)
    }

    /// Circular shift by `(d1, d2)` pixels.
    pub fn circshift(&self, d1: usize, d2: usize) -> Image {
        let n = self.width;
        let mut out = vec![0.0; n * n];
        for r1 in 0..n {
            for r2 in 0..n {
                out[((r1 + d1) % n) * n + (r2 + d2) % n] = self.data[r1 * n + r2];
            }
        }
        Self::from_raw(n, out)
    }
}

pub(crate) fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A real 2x2 matrix `[[a11, a12], [a21, a22]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Matrix2 {
    pub const ZERO: Matrix2 = Matrix2::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Matrix2 = Matrix2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Self::new(d1, 0.0, 0.0, d2)
    }

    /// A rotation by `theta` radians.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn transpose(self) -> Self {
        Self::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn mul(self, o: Matrix2) -> Self {
        Self::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }

    pub fn add(self, o: Matrix2) -> Self {
        Self::new(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }

    pub fn sub(self, o: Matrix2) -> Self {
        Self::new(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(self.a11 * c, self.a12 * c, self.a21 * c, self.a22 * c)
    }

    /// Frobenius inner product.
    pub fn inner(self, o: Matrix2) -> f64 {
        self.a11 * o.a11 + self.a12 * o.a12 + self.a21 * o.a21 + self.a22 * o.a22
    }

    pub fn frobenius(self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// A field of `C` real values per pixel on a square grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelField<const C: usize> {
    width: usize,
    height: usize,
    data: Vec<[f64; C]>,
}

/// Per-pixel 2x2 Hessian matrices stored as `[xx, xy, yx, yy]`.
pub type HessianField = PixelField<4>;

/// Per-pixel gradient pairs `[x, y]`.
pub type GradientField = PixelField<2>;

impl<const C: usize> PixelField<C> {
    pub fn new(width: usize, height: usize, data: Vec<[f64; C]>) -> Result<Self> {
        check_square(width, height)?;
        if data.len() != width * height {
            return Err(Error::Dimensions(format!(
                "{} pixels for a {width}x{height} field",
                data.len()
            )));
        }
        check_finite(data.iter().flatten())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn from_raw(n: usize, data: Vec<[f64; C]>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self {
            width: n,
            height: n,
            data,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_raw(n, vec![[0.0; C]; n * n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[[f64; C]] {
        &self.data
    }

    fn index(&self, r1: usize, r2: usize) -> Result<usize> {
        if r1 >= self.height || r2 >= self.width {
            return Err(Error::OutOfBounds {
                row: r1,
                col: r2,
                width: self.width,
                height: self.height,
            });
        }
        Ok(r1 * self.width + r2)
    }

    pub fn get(&self, r1: usize, r2: usize) -> Result<[f64; C]> {
        Ok(self.data[self.index(r1, r2)?])
    }

    pub fn set(&mut self, r1: usize, r2: usize, value: [f64; C]) -> Result<()> {
        if let Some(i) = value.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let i = self.index(r1, r2)?;
        self.data[i] = value;
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl HessianField {
    /// The 2x2 matrix at pixel `(r1, r2)`.
    pub fn field_pixel(&self, r1: usize, r2: usize) -> Result<Matrix2> {
        self.get(r1, r2).map(Matrix2::from_array)
    }

    pub fn set_pixel(&mut self, r1: usize, r2: usize, m: Matrix2) -> Result<()> {
        self.set(r1, r2, m.to_array())
    }
}

/// Complex frequency-domain raster.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpace {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

impl KSpace {
    pub fn new(width: usize, height: usize, data: Vec<Complex64>) -> Result<Self> {
        check_square(width, height)?;
        if data.len() != width * height {
            return Err(Error::Dimensions(format!(
                "{} bins for a {width}x{height} k-space",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn from_raw(n: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self {
            width: n,
            height: n,
            data,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_raw(n, vec![Complex64::new(0.0, 0.0); n * n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real part of the Hermitian inner product `<self, other>`.
    pub fn re_dot(&self, other: &KSpace) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }
}

/// Binary sampling pattern over k-space bins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_square(width, height)?;
        if data.len() != width * height {
            return Err(Error::Dimensions(format!(
                "{} bins for a {width}x{height} mask",
                data.len()
            )));
        }
        if !data.iter().any(|&b| b) {
            return Err(Error::InvalidParameter("mask samples no bins".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn full(n: usize) -> Self {
        Self {
            width: n,
            height: n,
            data: vec![true; n * n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn density(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }

    pub fn is_sampled(&self, k1: usize, k2: usize) -> bool {
        self.data[k1 * self.width + k2]
    }

    pub fn dc_sampled(&self) -> bool {
        self.data[0]
    }

    pub(crate) fn check_grid(&self, n: usize) -> Result<()> {
        if self.width != n || self.height != n {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                got: (self.width, self.height),
            });
        }
        Ok(())
    }
}
