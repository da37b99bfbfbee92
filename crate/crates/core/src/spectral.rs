//! Closed-form 2x2 SVD and the per-pixel proximal maps built on it.

use crate::error::Result;
use crate::image::{HessianField, Matrix2};
use crate::shrink::{gq_derivative, gq_value_antiderivative, scalar_shrink, ShrinkParams};

/// `M = U diag(sigma1, sigma2) V^T` with `sigma1 >= sigma2 >= 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Svd2 {
    pub u: Matrix2,
    pub sigma1: f64,
    pub sigma2: f64,
    pub v: Matrix2,
}

impl Svd2 {
    pub fn reconstruct(&self) -> Matrix2 {
        self.with_singular_values(self.sigma1, self.sigma2)
    }

    /// `U diag(s1, s2) V^T`.
    pub fn with_singular_values(&self, s1: f64, s2: f64) -> Matrix2 {
        self.u
            .mul(Matrix2::diag(s1, s2))
            .mul(self.v.transpose())
    }
}

/// Closed-form SVD of a real 2x2 matrix.
///
/// Writes `M = R(phi) diag(Q + R, Q - R) R(theta)` where `Q` and `R` are the
/// norms of the conformal and anti-conformal parts; a negative second value is
/// absorbed into `U`.
pub fn svd2x2(m: Matrix2) -> Svd2 {
    let e = 0.5 * (m.a11 + m.a22);
    let f = 0.5 * (m.a11 - m.a22);
    let g = 0.5 * (m.a21 + m.a12);
    let h = 0.5 * (m.a21 - m.a12);
    let q = e.hypot(h);
    let r = f.hypot(g);
    let a1 = g.atan2(f);
    let a2 = h.atan2(e);
    let theta = 0.5 * (a2 - a1);
    let phi = 0.5 * (a2 + a1);
    let mut u = Matrix2::rotation(phi);
    let vt = Matrix2::rotation(theta);
    let mut sigma2 = q - r;
    if sigma2 < 0.0 {
        sigma2 = -sigma2;
        u.a12 = -u.a12;
        u.a22 = -u.a22;
    }
    Svd2 {
        u,
        sigma1: q + r,
        sigma2,
        v: vt.transpose(),
    }
}

/// Applies `f` to both singular values, keeping the singular vectors.
pub fn spectral_map(m: Matrix2, f: impl Fn(f64) -> f64) -> Matrix2 {
    let svd = svd2x2(m);
    svd.with_singular_values(f(svd.sigma1), f(svd.sigma2))
}

/// `argmin_H 1/2 ||M - H||_F^2 + rho (g(sigma1(H)) + g(sigma2(H)))`.
pub fn qshs_matrix_prox(m: Matrix2, p: &ShrinkParams) -> Matrix2 {
    spectral_map(m, |s| scalar_shrink(s, p))
}

/// Singular-value soft threshold (nuclear-norm prox).
pub fn hs1_matrix_prox(m: Matrix2, tau: f64) -> Matrix2 {
    spectral_map(m, |s| (s - tau).max(0.0))
}

/// Frobenius-norm block shrinkage.
pub fn hs2_matrix_prox(m: Matrix2, tau: f64) -> Matrix2 {
    let norm = m.frobenius();
    if norm == 0.0 {
        return Matrix2::ZERO;
    }
    m.scale((1.0 - tau / norm).max(0.0))
}

/// Isotropic shrinkage of a gradient pair.
pub fn tv1_vector_prox(gx: f64, gy: f64, tau: f64) -> (f64, f64) {
    let norm = gx.hypot(gy);
    if norm == 0.0 {
        return (0.0, 0.0);
    }
    let k = (1.0 - tau / norm).max(0.0);
    (gx * k, gy * k)
}

/// `g(sigma1(M)) + g(sigma2(M))`.
pub fn qshs_matrix_penalty(m: Matrix2, p: &ShrinkParams) -> Result<f64> {
    let svd = svd2x2(m);
    Ok(gq_value_antiderivative(svd.sigma1, p)? + gq_value_antiderivative(svd.sigma2, p)?)
}

/// Sum over pixels of `g(sigma1) + g(sigma2)`.
pub fn qshs_penalty(field: &HessianField, p: &ShrinkParams) -> Result<f64> {
    field
        .pixels()
        .iter()
        .map(|&px| qshs_matrix_penalty(Matrix2::from_array(px), p))
        .sum()
}

/// Nuclear norm summed over pixels.
pub fn hs1_penalty(field: &HessianField) -> f64 {
    field
        .pixels()
        .iter()
        .map(|&px| {
            let s = svd2x2(Matrix2::from_array(px));
            s.sigma1 + s.sigma2
        })
        .sum()
}

/// Frobenius norm summed over pixels.
pub fn hs2_penalty(field: &HessianField) -> f64 {
    field
        .pixels()
        .iter()
        .map(|&px| Matrix2::from_array(px).frobenius())
        .sum()
}

/// A subgradient of `g(sigma1) + g(sigma2)` at `m`: `U diag(g'(sigma_i)) V^T`,
/// with the zero-singular-value block set to zero.
pub fn qshs_subgradient(m: Matrix2, p: &ShrinkParams) -> Result<Matrix2> {
    let svd = svd2x2(m);
    let d = |s: f64| if s > 0.0 { gq_derivative(s, p) } else { Ok(0.0) };
    Ok(svd.with_singular_values(d(svd.sigma1)?, d(svd.sigma2)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, scale: f64) -> Matrix2 {
        Matrix2::from_array(std::array::from_fn(|_| rng.random_range(-scale..scale)))
    }

    fn close(a: Matrix2, b: Matrix2, tol: f64) -> bool {
        a.sub(b).frobenius() <= tol
    }

    fn is_orthogonal(m: Matrix2) -> bool {
        close(m.transpose().mul(m), Matrix2::IDENTITY, 1e-12)
    }

    #[test]
    fn svd_examples() {
        let s = svd2x2(Matrix2::IDENTITY);
        assert!((s.sigma1 - 1.0).abs() < 1e-15 && (s.sigma2 - 1.0).abs() < 1e-15);
        let s = svd2x2(Matrix2::new(0.0, 2.0, 0.0, 0.0));
        assert!((s.sigma1 - 2.0).abs() < 1e-15 && s.sigma2.abs() < 1e-15);
        let m = Matrix2::new(1.0, 2.0, 3.0, 4.0);
        let s = svd2x2(m);
        // sigma^2 are the roots of x^2 - 30x + 4 (trace and det of M^T M)
        let s1 = (15.0 + 221f64.sqrt()).sqrt();
        let s2 = (15.0 - 221f64.sqrt()).sqrt();
        assert!((s.sigma1 - s1).abs() < 1e-12 && (s.sigma2 - s2).abs() < 1e-12);
        assert!((s.sigma1 - 5.46499).abs() < 1e-5 && (s.sigma2 - 0.36597).abs() < 1e-5);
        assert!((s.sigma1 * s.sigma2 - 2.0).abs() < 1e-12);
        assert_eq!(svd2x2(Matrix2::ZERO).reconstruct(), Matrix2::ZERO);
    }

    #[test]
    fn svd_contract_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..20_000 {
            let scale = [1e-6, 1.0, 1e4][i % 3];
            let mut m = random_matrix(&mut rng, scale);
            if i % 7 == 0 {
                // rank one
                m.a21 = 2.0 * m.a11;
                m.a22 = 2.0 * m.a12;
            }
            if i % 11 == 0 {
                m = Matrix2::rotation(rng.random()).scale(scale);
            }
            let s = svd2x2(m);
            assert!(s.sigma1 >= s.sigma2 && s.sigma2 >= 0.0);
            assert!(is_orthogonal(s.u) && is_orthogonal(s.v));
            let tol = 1e-12 * (1.0 + m.frobenius());
            assert!(close(s.reconstruct(), m, tol), "{m:?}");
        }
    }

    #[test]
    fn qshs_prox_examples() {
        let p = ShrinkParams::new(0.5, 1.0).unwrap();
        assert_eq!(qshs_matrix_prox(Matrix2::ZERO, &p), Matrix2::ZERO);
        let out = qshs_matrix_prox(Matrix2::diag(4.0, 0.25), &p);
        assert!(close(out, Matrix2::diag(2.0, 0.0), 1e-12), "{out:?}");
    }

    #[test]
    fn qshs_prox_is_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ShrinkParams::new(0.5, 0.8).unwrap();
        for _ in 0..500 {
            let m = random_matrix(&mut rng, 5.0);
            let r1 = Matrix2::rotation(rng.random_range(0.0..6.3));
            let r2 = Matrix2::rotation(rng.random_range(0.0..6.3));
            let lhs = qshs_matrix_prox(r1.mul(m).mul(r2.transpose()), &p);
            let rhs = r1.mul(qshs_matrix_prox(m, &p)).mul(r2.transpose());
            assert!(close(lhs, rhs, 1e-10));
            let sl = svd2x2(lhs);
            let sr = svd2x2(rhs);
            assert!((sl.sigma1 - sr.sigma1).abs() < 1e-10 && (sl.sigma2 - sr.sigma2).abs() < 1e-10);
        }
    }

    #[test]
    fn qshs_prox_shrinks_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let p = ShrinkParams::new(rng.random_range(0.05..=1.0), rng.random_range(0.0..3.0)).unwrap();
            let m = random_matrix(&mut rng, 10.0);
            let before = svd2x2(m);
            let after = svd2x2(qshs_matrix_prox(m, &p));
            let e1 = scalar_shrink(before.sigma1, &p);
            let e2 = scalar_shrink(before.sigma2, &p);
            assert!(after.sigma1 <= before.sigma1 + 1e-12 && after.sigma2 <= before.sigma2 + 1e-12);
            assert!((after.sigma1 - e1).abs() < 1e-10 && (after.sigma2 - e2).abs() < 1e-10);
        }
    }

    #[test]
    fn hs1_examples_and_q1_collapse() {
        assert!(close(hs1_matrix_prox(Matrix2::diag(3.0, 1.0), 1.0), Matrix2::diag(2.0, 0.0), 1e-14));
        assert_eq!(hs1_matrix_prox(Matrix2::ZERO, 1.0), Matrix2::ZERO);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let m = random_matrix(&mut rng, 5.0);
            let tau = rng.random_range(0.0..4.0);
            let p = ShrinkParams::new(1.0, tau).unwrap();
            assert_eq!(qshs_matrix_prox(m, &p), hs1_matrix_prox(m, tau));
        }
    }

    #[test]
    fn hs2_examples() {
        let m = Matrix2::new(1.0, 1.0, 1.0, 1.0); // ||M||_F = 2
        assert_eq!(hs2_matrix_prox(m, 1.0), m.scale(0.5));
        assert_eq!(hs2_matrix_prox(m, 2.0), Matrix2::ZERO);
        assert_eq!(hs2_matrix_prox(m, 5.0), Matrix2::ZERO);
        assert_eq!(hs2_matrix_prox(Matrix2::ZERO, 1.0), Matrix2::ZERO);
        let m = Matrix2::new(3.0, -1.0, 0.5, 2.0);
        let out = hs2_matrix_prox(m, 1.3);
        let k = out.a11 / m.a11;
        assert!(k >= 0.0 && close(out, m.scale(k), 1e-15));
    }

    #[test]
    fn tv1_examples() {
        assert_eq!(tv1_vector_prox(3.0, 4.0, 5.0), (0.0, 0.0));
        assert_eq!(tv1_vector_prox(6.0, 8.0, 5.0), (3.0, 4.0));
        assert_eq!(tv1_vector_prox(0.0, 0.0, 1.0), (0.0, 0.0));
    }

    #[test]
    fn penalty_examples() {
        let p = ShrinkParams::new(0.5, 1.0).unwrap();
        assert_eq!(qshs_penalty(&HessianField::zeros(4), &p).unwrap(), 0.0);
        let mut f = HessianField::zeros(4);
        f.set_pixel(2, 1, Matrix2::diag(3.0, 0.0)).unwrap();
        let expected = crate::shrink::gq_value(3.0, &p).unwrap();
        assert!((qshs_penalty(&f, &p).unwrap() - expected).abs() < 1e-8);
        let mut g = HessianField::zeros(4);
        g.set_pixel(0, 3, Matrix2::diag(3.0, 0.0)).unwrap();
        assert_eq!(qshs_penalty(&f, &p).unwrap(), qshs_penalty(&g, &p).unwrap());
    }

    #[test]
    fn subgradient_matches_directional_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = ShrinkParams::new(0.5, 1.0).unwrap();
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 5.0);
            let d = random_matrix(&mut rng, 1.0);
            let h = 1e-5;
            let fd = (qshs_matrix_penalty(m.add(d.scale(h)), &p).unwrap()
                - qshs_matrix_penalty(m.sub(d.scale(h)), &p).unwrap())
                / (2.0 * h);
            let g = qshs_subgradient(m, &p).unwrap().inner(d);
            assert!((fd - g).abs() < 1e-4 * (1.0 + g.abs()), "{fd} vs {g}");
        }
    }
}
