//! Synthetic test images on the 0-255 intensity scale.

use crate::error::{Error, Result};
use crate::image::Image;

/// `(intensity, a, b, x0, y0, phi_degrees)` on the unit square `[-1, 1]^2`.
const SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Supersampling factor per axis.
const SS: usize = 4;

fn render(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Image> {
    if n == 0 {
        return Err(Error::Dimensions("phantom size must be positive".into()));
    }
    let step = 2.0 / n as f64;
    Image::from_fn(n, |r1, r2| {
        let mut acc = 0.0;
        for i in 0..SS {
            for j in 0..SS {
                // r1 runs top to bottom, r2 left to right.
                let y = 1.0 - (r1 as f64 + (i as f64 + 0.5) / SS as f64) * step;
                let x = -1.0 + (r2 as f64 + (j as f64 + 0.5) / SS as f64) * step;
                acc += f(x, y);
            }
        }
        acc / (SS * SS) as f64
    })
}

fn in_ellipse(x: f64, y: f64, a: f64, b: f64, x0: f64, y0: f64, phi_deg: f64) -> bool {
    let (s, c) = phi_deg.to_radians().sin_cos();
    let (dx, dy) = (x - x0, y - y0);
    let xr = c * dx + s * dy;
    let yr = -s * dx + c * dy;
    (xr / a).powi(2) + (yr / b).powi(2) <= 1.0
}

/// Modified Shepp-Logan head phantom, scaled so the background is 0 and the
/// skull 255.
pub fn shepp_logan(n: usize) -> Result<Image> {
    render(n, |x, y| {
        let v: f64 = SHEPP_LOGAN
            .iter()
            .filter(|e| in_ellipse(x, y, e.1, e.2, e.3, e.4, e.5))
            .map(|e| e.0)
            .sum();
        255.0 * v.clamp(0.0, 1.0)
    })
}

/// Edge half-width of the soft phantoms, in unit-square coordinates.
const EDGE_WIDTH: f64 = 0.02;

/// Smooth indicator of an ellipse: about 1 inside, 0 outside, with a tanh
/// transition of width [`EDGE_WIDTH`] across the boundary.
fn soft_ellipse(x: f64, y: f64, a: f64, b: f64, x0: f64, y0: f64, phi_deg: f64) -> f64 {
    let (s, c) = phi_deg.to_radians().sin_cos();
    let (dx, dy) = (x - x0, y - y0);
    let xr = c * dx + s * dy;
    let yr = -s * dx + c * dy;
    let r = ((xr / a).powi(2) + (yr / b).powi(2)).sqrt();
    let dist = (1.0 - r) * (a * b).sqrt();
    0.5 * (1.0 + (dist / EDGE_WIDTH).tanh())
}

fn render_centers(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Image> {
    if n == 0 {
        return Err(Error::Dimensions("phantom size must be positive".into()));
    }
    let step = 2.0 / n as f64;
    Image::from_fn(n, |r1, r2| {
        let y = 1.0 - (r1 as f64 + 0.5) * step;
        let x = -1.0 + (r2 as f64 + 0.5) * step;
        f(x, y)
    })
}

/// Piecewise-smooth phantom with soft edges: an elliptical body with linear
/// shading, a Gaussian bump, an oscillating texture, a shaded inclusion and
/// three small dots.
pub fn smooth_phantom(n: usize) -> Result<Image> {
    render_centers(n, |x, y| {
        let body = soft_ellipse(x, y, 0.85, 0.75, 0.0, 0.0, 10.0);
        let mut v = 90.0 + 40.0 * x - 25.0 * y;
        v += 80.0 * (-((x + 0.3).powi(2) + (y - 0.2).powi(2)) / (2.0 * 0.15 * 0.15)).exp();
        v += 30.0 * (3.0 * x).sin() * (2.0 * y).cos();
        v += (60.0 - 80.0 * (x - 0.35)) * soft_ellipse(x, y, 0.25, 0.15, 0.35, -0.3, -30.0);
        for &(cx, cy) in &[(-0.35, -0.35), (-0.15, -0.45), (0.05, -0.5)] {
            v += 50.0 * soft_ellipse(x, y, 0.05, 0.05, cx, cy, 0.0);
        }
        (v * body).clamp(0.0, 255.0)
    })
}

/// Shepp-Logan geometry with soft edges under a smooth multiplicative bias
/// field, closer to an MRI slice than the piecewise-constant original.
pub fn shaded_shepp_logan(n: usize) -> Result<Image> {
    render_centers(n, |x, y| {
        let v: f64 = SHEPP_LOGAN
            .iter()
            .map(|e| e.0 * soft_ellipse(x, y, e.1, e.2, e.3, e.4, e.5))
            .sum();
        let bias = 1.0 + 0.35 * x - 0.25 * y + 0.4 * x * y;
        255.0 * (v * bias).clamp(0.0, 1.0)
    })
}

pub fn phantom_by_name(name: &str, n: usize) -> Result<Image> {
    match name {
        "shepp-logan" | "shepp_logan" | "phantom" => shepp_logan(n),
        "smooth" => smooth_phantom(n),
        "shaded-shepp-logan" | "shaded" => shaded_shepp_logan(n),
        other => Err(Error::InvalidParameter(format!("unknown phantom '{other}'"))),
    }
}
