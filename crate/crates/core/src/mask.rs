//! Cartesian k-space sampling masks.
//!
//! Bins are indexed in FFT order, so the DC bin is `(0, 0)` and low frequencies
//! wrap around the grid corners. Every generated mask samples exactly
//! `round(density * n^2)` bins and always includes a fully sampled square of
//! low frequencies (at least the DC bin).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Mask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    /// Gaussian-weighted random sampling, denser near DC.
    VariableDensityRandom,
    /// Straight lines through DC at golden-angle increments.
    RadialLines,
    UniformRandom,
}

impl std::str::FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vd" | "variable-density" | "variable-density-random" => Ok(Self::VariableDensityRandom),
            "radial" | "radial-lines" => Ok(Self::RadialLines),
            "uniform" | "uniform-random" => Ok(Self::UniformRandom),
            other => Err(Error::InvalidParameter(format!("unknown mask kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub density: f64,
    pub kind: MaskKind,
    pub center_fraction: f64,
    pub seed: u64,
}

impl MaskSpec {
    pub const DEFAULT_CENTER_FRACTION: f64 = 0.06;

    pub fn variable_density(density: f64, seed: u64) -> Self {
        Self {
            density,
            kind: MaskKind::VariableDensityRandom,
            center_fraction: Self::DEFAULT_CENTER_FRACTION,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mask density must lie in (0, 1], got {}",
                self.density
            )));
        }
        if !(0.0..1.0).contains(&self.center_fraction) {
            return Err(Error::InvalidParameter(format!(
                "center fraction must lie in [0, 1), got {}",
                self.center_fraction
            )));
        }
        Ok(())
    }
}

/// Signed frequency of FFT-order bin `k` on an `n`-point axis.
fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

fn center_block(n: usize, fraction: f64) -> Vec<bool> {
    let side = ((fraction * n as f64).round() as usize).clamp(1, n);
    // Signed frequencies in [-floor(side/2), ceil(side/2) - 1].
    let lo = -((side / 2) as i64);
    let hi = lo + side as i64 - 1;
    let inside = |k: usize| (lo..=hi).contains(&signed_freq(k, n));
    let mut out = vec![false; n * n];
    for k1 in 0..n {
        for k2 in 0..n {
            out[k1 * n + k2] = inside(k1) && inside(k2);
        }
    }
    out
}

pub fn make_mask(n: usize, spec: &MaskSpec) -> Result<Mask> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Dimensions("mask size must be positive".into()));
    }
    let total = n * n;
    let target = ((spec.density * total as f64).round() as usize).clamp(1, total);
    let mut bins = center_block(n, spec.center_fraction);
    let center = bins.iter().filter(|&&b| b).count();
    if center > target {
        return Err(Error::InvalidParameter(format!(
            "density {} ({target} bins) is below the {center}-bin fully sampled center",
            spec.density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let remaining = target - center;
    match spec.kind {
        MaskKind::UniformRandom => fill_weighted(&mut bins, remaining, &mut rng, |_, _| 1.0),
        MaskKind::VariableDensityRandom => {
            let half = n as f64 / 2.0;
            fill_weighted(&mut bins, remaining, &mut rng, |s1, s2| {
                let r2 = (s1 * s1 + s2 * s2) as f64 / (half * half);
                // Gaussian falloff with a small floor so high frequencies stay reachable.
                (-r2 / (2.0 * 0.3 * 0.3)).exp() + 0.01
            })
        }
        MaskKind::RadialLines => fill_radial(&mut bins, remaining, n, &mut rng),
    }
    Mask::new(n, n, bins)
}

/// Weighted sampling without replacement (exponential-key method).
fn fill_weighted(
    bins: &mut [bool],
    count: usize,
    rng: &mut ChaCha8Rng,
    weight: impl Fn(i64, i64) -> f64,
) {
    let n = (bins.len() as f64).sqrt() as usize;
    let mut keys: Vec<(f64, usize)> = Vec::with_capacity(bins.len());
    for k1 in 0..n {
        for k2 in 0..n {
            let idx = k1 * n + k2;
            // Draw for every bin so the stream does not depend on the center size.
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            if !bins[idx] {
                let w = weight(signed_freq(k1, n), signed_freq(k2, n));
                keys.push((u.ln() / w, idx));
            }
        }
    }
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, idx) in keys.iter().take(count) {
        bins[idx] = true;
    }
}

fn fill_radial(bins: &mut [bool], mut count: usize, n: usize, rng: &mut ChaCha8Rng) {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut angle = rng.random::<f64>() * PI;
    let half = n as f64 / 2.0;
    let wrap = |s: f64| (s.round() as i64).rem_euclid(n as i64) as usize;
    let steps = 2 * n;
    // Enough lines to cover every bin; stops as soon as the target is met.
    for _ in 0..8 * n {
        if count == 0 {
            return;
        }
        let (sin, cos) = angle.sin_cos();
        for i in 0..=steps {
            let t = -half + (i as f64) * (n as f64) / steps as f64;
            let idx = wrap(t * cos) * n + wrap(t * sin);
            if !bins[idx] {
                bins[idx] = true;
                count -= 1;
                if count == 0 {
                    return;
                }
            }
        }
        angle += golden;
    }
    // Lines cannot reach every bin on coarse grids; top up uniformly.
    fill_weighted(bins, count, rng, |_, _| 1.0);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(density: f64, kind: MaskKind, seed: u64) -> MaskSpec {
        MaskSpec {
            density,
            kind,
            center_fraction: MaskSpec::DEFAULT_CENTER_FRACTION,
            seed,
        }
    }

    const KINDS: [MaskKind; 3] = [
        MaskKind::VariableDensityRandom,
        MaskKind::RadialLines,
        MaskKind::UniformRandom,
    ];

    #[test]
    fn full_density_samples_everything() {
        for kind in KINDS {
            let m = make_mask(32, &spec(1.0, kind, 1)).unwrap();
            assert_eq!(m.count(), 32 * 32);
        }
    }

    #[test]
    fn density_is_realized() {
        for kind in KINDS {
            for density in [0.18, 0.09] {
                let m = make_mask(256, &spec(density, kind, 7)).unwrap();
                let realized = m.count() as f64 / 65536.0;
                assert!((realized - density).abs() <= 0.01, "{kind:?} {realized}");
                assert!(m.dc_sampled());
            }
        }
    }

    #[test]
    fn seeded_and_deterministic() {
        for kind in KINDS {
            let a = make_mask(64, &spec(0.18, kind, 3)).unwrap();
            let b = make_mask(64, &spec(0.18, kind, 3)).unwrap();
            assert_eq!(a, b);
        }
        let a = make_mask(64, &spec(0.18, MaskKind::UniformRandom, 3)).unwrap();
        let c = make_mask(64, &spec(0.18, MaskKind::UniformRandom, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn center_block_is_sampled() {
        let m = make_mask(100, &spec(0.1, MaskKind::UniformRandom, 0)).unwrap();
        // side 6: signed frequencies -3..=2 on both axes
        for s1 in -3i64..=2 {
            for s2 in -3i64..=2 {
                let k1 = s1.rem_euclid(100) as usize;
                let k2 = s2.rem_euclid(100) as usize;
                assert!(m.is_sampled(k1, k2));
            }
        }
    }

    #[test]
    fn density_below_center_is_an_error() {
        let s = MaskSpec {
            density: 0.001,
            kind: MaskKind::VariableDensityRandom,
            center_fraction: 0.5,
            seed: 0,
        };
        assert!(matches!(make_mask(64, &s), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(make_mask(8, &spec(0.0, MaskKind::UniformRandom, 0)).is_err());
        assert!(make_mask(8, &spec(1.5, MaskKind::UniformRandom, 0)).is_err());
        let mut s = spec(0.5, MaskKind::UniformRandom, 0);
        s.center_fraction = 1.0;
        assert!(make_mask(8, &s).is_err());
    }

    #[test]
    fn variable_density_prefers_low_frequencies() {
        let m = make_mask(128, &spec(0.18, MaskKind::VariableDensityRandom, 9)).unwrap();
        let mut low = (0, 0);
        let mut high = (0, 0);
        for k1 in 0..128 {
            for k2 in 0..128 {
                let r = signed_freq(k1, 128).abs().max(signed_freq(k2, 128).abs());
                let slot = if r < 16 { &mut low } else { &mut high };
                slot.0 += m.is_sampled(k1, k2) as usize;
                slot.1 += 1;
            }
        }
        let low_d = low.0 as f64 / low.1 as f64;
        let high_d = high.0 as f64 / high.1 as f64;
        assert!(low_d > 3.0 * high_d, "{low_d} vs {high_d}");
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("vd".parse::<MaskKind>().unwrap(), MaskKind::VariableDensityRandom);
        assert_eq!("radial-lines".parse::<MaskKind>().unwrap(), MaskKind::RadialLines);
        assert!("spiral".parse::<MaskKind>().is_err());
    }
}
