//! ADMM for `min_{u in S} 1/2 ||T u - m||^2 + rho sum_r f([R u]_r)`.
//!
//! Splitting `R u = H` and `u = v`, each iteration runs
//!
//! 1. `v <- P_S(u + u_hat / beta)`
//! 2. `[H]_r <- prox_{(rho/beta) f}([R u]_r + [H_hat]_r / beta)` per pixel
//! 3. `(T*T + beta (R^T R + I)) u = T* m + beta v - u_hat + R^T (beta H - H_hat)`,
//!    solved exactly in the Fourier domain
//! 4. `u_hat += beta (u - v)`, `H_hat += beta (R u - H)`
//!
//! `R` is the discrete Hessian for the Hessian-Schatten methods and the
//! forward-difference gradient for TV-1.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffops::{
    gradient_adjoint, gradient_apply, gradient_symbol, hessian_adjoint, hessian_apply,
    hessian_symbol, FourierDiagonal,
};
use crate::error::{Error, Result};
use crate::forward::SamplingOperator;
use crate::image::{Image, KSpace, Mask, Matrix2, PixelField};
use crate::shrink::{ShrinkParams, ShrinkRule};
use crate::spectral::{
    hs1_matrix_prox, hs1_penalty, hs2_matrix_prox, hs2_penalty, qshs_matrix_prox, qshs_penalty,
    tv1_vector_prox,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qshs,
    Hs1,
    Hs2,
    Tv1,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tv1, Method::Hs2, Method::Hs1, Method::Qshs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Qshs => "qshs",
            Method::Hs1 => "hs1",
            Method::Hs2 => "hs2",
            Method::Tv1 => "tv1",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qshs" => Ok(Method::Qshs),
            "hs1" => Ok(Method::Hs1),
            "hs2" | "tv2" => Ok(Method::Hs2),
            "tv1" | "tv" => Ok(Method::Tv1),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConstraintSet {
    #[default]
    PositiveOrthant,
    Box {
        lo: f64,
        hi: f64,
    },
    Unconstrained,
}

impl ConstraintSet {
    fn project(self, x: f64) -> f64 {
        match self {
            ConstraintSet::PositiveOrthant => x.max(0.0),
            ConstraintSet::Box { lo, hi } => x.clamp(lo, hi),
            ConstraintSet::Unconstrained => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rho: f64,
    /// Augmented-Lagrangian weight; `None` means `beta = rho`.
    ///
    /// For QSHS the per-pixel shrink weight is `rho / beta`, so `beta` also
    /// selects which member of the penalty family is minimized.
    pub beta: Option<f64>,
    pub q: f64,
    pub shrink_rule: ShrinkRule,
    pub max_iters: usize,
    pub primal_tol: f64,
    pub method: Method,
    pub constraint_set: ConstraintSet,
    /// Record the objective every iteration. Tuning runs switch it off.
    pub track_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            beta: None,
            q: 0.5,
            shrink_rule: ShrinkRule::DecayingOffset,
            max_iters: 1000,
            primal_tol: 1e-4,
            method: Method::Qshs,
            constraint_set: ConstraintSet::PositiveOrthant,
            track_objective: true,
        }
    }
}

/// How many times `beta` is doubled after a divergent run before giving up.
pub const MAX_BETA_DOUBLINGS: u32 = 4;

impl SolverConfig {
    pub fn new(method: Method, rho: f64) -> Self {
        Self {
            method,
            rho,
            ..Self::default()
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        let beta = self.beta();
        if !(beta > 0.0 && beta.is_finite()) {
            return bad(format!("beta must be positive, got {beta}"));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return bad(format!("q must lie in (0, 1], got {}", self.q));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.primal_tol > 0.0) {
            return bad(format!("primal_tol must be positive, got {}", self.primal_tol));
        }
        if let ConstraintSet::Box { lo, hi } = self.constraint_set {
            if !(lo < hi) {
                return bad(format!("box constraint needs lo < hi, got [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    /// Shrinkage parameters of the per-pixel subproblem: weight `rho / beta`.
    pub fn shrink_params(&self) -> Result<ShrinkParams> {
        ShrinkParams::with_rule(self.q, self.rho / self.beta(), self.shrink_rule)
    }
}

/// The linear operator `R` of the split and the per-pixel prox on its range.
pub trait Regularizer<const C: usize>: Sync {
    fn apply(&self, u: &Image) -> PixelField<C>;
    fn adjoint(&self, p: &PixelField<C>) -> Image;
    fn symbol(&self, n: usize) -> Result<FourierDiagonal>;
    /// Prox of `(rho / beta) f` at one pixel.
    fn prox(&self, px: [f64; C]) -> [f64; C];
    /// `sum_r f([P]_r)`, without the `rho` weight.
    fn penalty(&self, p: &PixelField<C>) -> Result<f64>;
}

#[derive(Clone, Copy, Debug)]
enum HessianProx {
    Qshs(ShrinkParams),
    Hs1(f64),
    Hs2(f64),
}

/// Hessian-based penalties (QSHS, HS-1, HS-2).
#[derive(Clone, Copy, Debug)]
pub struct HessianRegularizer {
    prox: HessianProx,
}

impl HessianRegularizer {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        let tau = cfg.rho / cfg.beta();
        let prox = match cfg.method {
            Method::Qshs => HessianProx::Qshs(cfg.shrink_params()?),
            Method::Hs1 => HessianProx::Hs1(tau),
            Method::Hs2 => HessianProx::Hs2(tau),
            Method::Tv1 => {
                return Err(Error::InvalidParameter(
                    "tv1 uses the gradient regularizer".into(),
                ))
            }
        };
        Ok(Self { prox })
    }
}

impl Regularizer<4> for HessianRegularizer {
    fn apply(&self, u: &Image) -> PixelField<4> {
        hessian_apply(u)
    }

    fn adjoint(&self, p: &PixelField<4>) -> Image {
        hessian_adjoint(p)
    }

    fn symbol(&self, n: usize) -> Result<FourierDiagonal> {
        hessian_symbol(n, n)
    }

    fn prox(&self, px: [f64; 4]) -> [f64; 4] {
        let m = Matrix2::from_array(px);
        match self.prox {
            HessianProx::Qshs(p) => qshs_matrix_prox(m, &p),
            HessianProx::Hs1(tau) => hs1_matrix_prox(m, tau),
            HessianProx::Hs2(tau) => hs2_matrix_prox(m, tau),
        }
        .to_array()
    }

    fn penalty(&self, p: &PixelField<4>) -> Result<f64> {
        match self.prox {
            HessianProx::Qshs(params) => qshs_penalty(p, &params),
            HessianProx::Hs1(_) => Ok(hs1_penalty(p)),
            HessianProx::Hs2(_) => Ok(hs2_penalty(p)),
        }
    }
}

/// Isotropic total variation on forward differences.
#[derive(Clone, Copy, Debug)]
pub struct GradientRegularizer {
    tau: f64,
}

impl GradientRegularizer {
    pub fn new(cfg: &SolverConfig) -> Self {
        Self {
            tau: cfg.rho / cfg.beta(),
        }
    }
}

impl Regularizer<2> for GradientRegularizer {
    fn apply(&self, u: &Image) -> PixelField<2> {
        gradient_apply(u)
    }

    fn adjoint(&self, p: &PixelField<2>) -> Image {
        gradient_adjoint(p)
    }

    fn symbol(&self, n: usize) -> Result<FourierDiagonal> {
        gradient_symbol(n, n)
    }

    fn prox(&self, px: [f64; 2]) -> [f64; 2] {
        let (x, y) = tv1_vector_prox(px[0], px[1], self.tau);
        [x, y]
    }

    fn penalty(&self, p: &PixelField<2>) -> Result<f64> {
        Ok(p.pixels().iter().map(|g| g[0].hypot(g[1])).sum())
    }
}

/// ADMM iterates `(u, v, H, u_hat, H_hat)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<const C: usize = 4> {
    pub u: Image,
    pub v: Image,
    pub h: PixelField<C>,
    pub u_hat: Image,
    pub h_hat: PixelField<C>,
    pub iter: usize,
}

impl<const C: usize> SolverState<C> {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: Image::zeros(n),
            v: Image::zeros(n),
            h: PixelField::zeros(n),
            u_hat: Image::zeros(n),
            h_hat: PixelField::zeros(n),
            iter: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconResult {
    pub u_final: Image,
    /// Objective after each iteration; empty when objective tracking is off.
    pub objective_trace: Vec<f64>,
    pub primal_residual_u_trace: Vec<f64>,
    pub primal_residual_h_trace: Vec<f64>,
    /// `||u^(k)||_2` after each iteration.
    pub u_norm_trace: Vec<f64>,
    /// `||u^(k) - u^(k-1)|| / ||u^(k)||` after each iteration.
    pub update_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    /// `beta` of the run that produced the result, after any restarts.
    pub beta_used: f64,
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

fn field_finite<const C: usize>(p: &PixelField<C>) -> bool {
    p.pixels().iter().flatten().all(|v| v.is_finite())
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Step 1: `v = P_S(u + u_hat / beta)`.
pub fn step_v<const C: usize>(state: &SolverState<C>, cfg: &SolverConfig) -> Image {
    let beta = cfg.beta();
    let set = cfg.constraint_set;
    let data = state
        .u
        .as_slice()
        .iter()
        .zip(state.u_hat.as_slice())
        .map(|(u, w)| set.project(u + w / beta))
        .collect();
    Image::from_raw(state.u.size(), data)
}

fn prox_field<const C: usize, R: Regularizer<C>>(
    ru: &PixelField<C>,
    h_hat: &PixelField<C>,
    beta: f64,
    reg: &R,
) -> PixelField<C> {
    let data = ru
        .pixels()
        .par_iter()
        .zip(h_hat.pixels().par_iter())
        .map(|(a, w)| reg.prox(std::array::from_fn(|i| a[i] + w[i] / beta)))
        .collect();
    PixelField::from_raw(ru.size(), data)
}

/// Step 2: per-pixel prox of `[R u]_r + [H_hat]_r / beta`.
pub fn step_h<const C: usize, R: Regularizer<C>>(
    state: &SolverState<C>,
    cfg: &SolverConfig,
    reg: &R,
) -> PixelField<C> {
    prox_field(&reg.apply(&state.u), &state.h_hat, cfg.beta(), reg)
}

/// Right-hand side of the step-3 normal equations.
pub fn step_u_rhs<const C: usize, R: Regularizer<C>>(
    state: &SolverState<C>,
    beta: f64,
    t_adj_m: &Image,
    reg: &R,
) -> Image {
    let split: Vec<[f64; C]> = state
        .h
        .pixels()
        .iter()
        .zip(state.h_hat.pixels())
        .map(|(h, w)| std::array::from_fn(|i| beta * h[i] - w[i]))
        .collect();
    let back = reg.adjoint(&PixelField::from_raw(state.h.size(), split));
    let data = t_adj_m
        .as_slice()
        .iter()
        .zip(state.v.as_slice())
        .zip(state.u_hat.as_slice())
        .zip(back.as_slice())
        .map(|(((tm, v), w), b)| tm + beta * v - w + b)
        .collect();
    Image::from_raw(t_adj_m.size(), data)
}

/// Per-frequency diagonal of `T*T + beta (R^T R + I)` acting on real images.
///
/// Taking the real part in `T*` symmetrizes the mask: on real inputs `T*T`
/// multiplies bin `k` by `(M(k) + M(-k)) / 2`.
pub fn normal_denominator(mask: &Mask, symbol: &FourierDiagonal, beta: f64) -> Vec<f64> {
    let n = mask.size();
    let m = mask.as_slice();
    let s = symbol.as_slice();
    let mut out = Vec::with_capacity(n * n);
    for k1 in 0..n {
        let j1 = (n - k1) % n;
        for k2 in 0..n {
            let j2 = (n - k2) % n;
            let sym = 0.5 * (m[k1 * n + k2] as u8 as f64 + m[j1 * n + j2] as u8 as f64);
            out.push(sym + beta * (s[k1 * n + k2] + 1.0));
        }
    }
    out
}

fn fourier_solve(op: &SamplingOperator, rhs: &Image, denom: &[f64]) -> Result<Image> {
    let fft = op.fft();
    let mut spec = fft.forward_real(rhs.as_slice());
    for (z, &d) in spec.iter_mut().zip(denom) {
        if !(d > 0.0) {
            return Err(Error::Numerical(format!("non-positive step-3 denominator {d}")));
        }
        *z = Complex64::new(z.re / d, z.im / d);
    }
    Ok(Image::from_raw(rhs.size(), fft.inverse_real(spec)))
}

/// Step 3: exact Fourier-domain solve of the normal equations.
pub fn step_u<const C: usize, R: Regularizer<C>>(
    state: &SolverState<C>,
    cfg: &SolverConfig,
    reg: &R,
    m: &KSpace,
    mask: &Mask,
    symbol: &FourierDiagonal,
) -> Result<Image> {
    let op = SamplingOperator::new(mask.clone());
    let beta = cfg.beta();
    let rhs = step_u_rhs(state, beta, &op.adjoint(m)?, reg);
    fourier_solve(&op, &rhs, &normal_denominator(mask, symbol, beta))
}

/// Step 4: `u_hat += beta (u - v)`, `H_hat += beta (R u - H)`.
pub fn step_duals<const C: usize, R: Regularizer<C>>(
    state: &SolverState<C>,
    cfg: &SolverConfig,
    reg: &R,
) -> (Image, PixelField<C>) {
    duals_with(state, &reg.apply(&state.u), cfg.beta())
}

fn duals_with<const C: usize>(
    state: &SolverState<C>,
    ru: &PixelField<C>,
    beta: f64,
) -> (Image, PixelField<C>) {
    let u_hat = state
        .u_hat
        .as_slice()
        .iter()
        .zip(state.u.as_slice())
        .zip(state.v.as_slice())
        .map(|((w, u), v)| w + beta * (u - v))
        .collect();
    let h_hat = state
        .h_hat
        .pixels()
        .iter()
        .zip(ru.pixels())
        .zip(state.h.pixels())
        .map(|((w, a), h)| std::array::from_fn(|i| w[i] + beta * (a[i] - h[i])))
        .collect();
    let n = state.u.size();
    (Image::from_raw(n, u_hat), PixelField::from_raw(n, h_hat))
}

fn check_inputs(m: &KSpace, mask: &Mask, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    mask.check_grid(m.size())?;
    if !mask.dc_sampled() {
        return Err(Error::InvalidParameter(
            "mask must sample the DC bin so constant images are observed".into(),
        ));
    }
    Ok(())
}

/// Runs ADMM from zero initialization.
///
/// Stops when the relative primal residuals `||u - v|| / ||u||` and
/// `||R u - H|| / ||R u||` and the relative update `||u^k - u^(k-1)|| / ||u^k||`
/// all drop below `primal_tol`, or after `max_iters`.
/// A non-finite iterate restarts the run with `beta` doubled, at most
/// [`MAX_BETA_DOUBLINGS`] times.
pub fn solve(m: &KSpace, mask: &Mask, cfg: &SolverConfig) -> Result<ReconResult> {
    check_inputs(m, mask, cfg)?;
    let mut cfg = cfg.clone();
    cfg.beta = Some(cfg.beta());
    let mut attempt = 0;
    loop {
        let result = match cfg.method {
            Method::Tv1 => run(m, mask, &cfg, &GradientRegularizer::new(&cfg)),
            _ => run(m, mask, &cfg, &HessianRegularizer::new(&cfg)?),
        };
        match result {
            Err(Error::Divergence { .. }) if attempt < MAX_BETA_DOUBLINGS => {
                attempt += 1;
                cfg.beta = Some(2.0 * cfg.beta());
            }
            other => return other,
        }
    }
}

fn run<const C: usize, R: Regularizer<C>>(
    m: &KSpace,
    mask: &Mask,
    cfg: &SolverConfig,
    reg: &R,
) -> Result<ReconResult> {
    let n = m.size();
    let beta = cfg.beta();
    let op = SamplingOperator::new(mask.clone());
    let t_adj_m = op.adjoint(m)?;
    let denom = normal_denominator(mask, &reg.symbol(n)?, beta);

    let mut state = SolverState::<C>::zeros(n);
    let mut ru = reg.apply(&state.u);
    let mut result = ReconResult {
        u_final: Image::zeros(n),
        objective_trace: Vec::new(),
        primal_residual_u_trace: Vec::new(),
        primal_residual_h_trace: Vec::new(),
        u_norm_trace: Vec::new(),
        update_trace: Vec::new(),
        iterations_run: 0,
        converged: false,
        beta_used: beta,
    };

    for k in 0..cfg.max_iters {
        let diverged = |step| Error::Divergence { step, iteration: k + 1 };

        state.v = step_v(&state, cfg);
        if !all_finite(state.v.as_slice()) {
            return Err(diverged("step 1 (v projection)"));
        }
        state.h = prox_field(&ru, &state.h_hat, beta, reg);
        if !field_finite(&state.h) {
            return Err(diverged("step 2 (H prox)"));
        }
        let rhs = step_u_rhs(&state, beta, &t_adj_m, reg);
        let u_prev = std::mem::replace(&mut state.u, fourier_solve(&op, &rhs, &denom)?);
        if !all_finite(state.u.as_slice()) {
            return Err(diverged("step 3 (u solve)"));
        }
        ru = reg.apply(&state.u);
        let (u_hat, h_hat) = duals_with(&state, &ru, beta);
        state.u_hat = u_hat;
        state.h_hat = h_hat;
        if !all_finite(state.u_hat.as_slice()) || !field_finite(&state.h_hat) {
            return Err(diverged("step 4 (multipliers)"));
        }
        state.iter = k + 1;

        let u_norm = state.u.l2_norm();
        let du: f64 = state
            .u
            .as_slice()
            .iter()
            .zip(state.v.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let dh: f64 = ru
            .pixels()
            .iter()
            .zip(state.h.pixels())
            .map(|(a, h)| a.iter().zip(h).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        let step: f64 = state
            .u
            .as_slice()
            .iter()
            .zip(u_prev.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let update = relative(step, u_norm);
        let res_u = relative(du, u_norm);
        let res_h = relative(dh, ru.l2_norm());
        result.primal_residual_u_trace.push(res_u);
        result.primal_residual_h_trace.push(res_h);
        result.u_norm_trace.push(u_norm);
        result.update_trace.push(update);
        if cfg.track_objective {
            result
                .objective_trace
                .push(objective_with(&state.u, &ru, m, &op, cfg.rho, reg)?);
        }
        result.iterations_run = k + 1;
        if res_u < cfg.primal_tol && res_h < cfg.primal_tol && update < cfg.primal_tol {
            result.converged = true;
            break;
        }
    }
    result.u_final = state.u;
    Ok(result)
}

fn objective_with<const C: usize, R: Regularizer<C>>(
    u: &Image,
    ru: &PixelField<C>,
    m: &KSpace,
    op: &SamplingOperator,
    rho: f64,
    reg: &R,
) -> Result<f64> {
    let tu = op.apply(u)?;
    let data: f64 = tu
        .as_slice()
        .iter()
        .zip(m.as_slice())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(0.5 * data + rho * reg.penalty(ru)?)
}

/// `1/2 ||T u - m||^2 + rho sum_r f([R u]_r)` for the configured method.
///
/// For QSHS the penalty is the implicit function whose prox the solver applies,
/// i.e. the one with shrink weight `rho / beta`.
pub fn objective(u: &Image, m: &KSpace, mask: &Mask, cfg: &SolverConfig) -> Result<f64> {
    cfg.validate()?;
    mask.check_grid(u.size())?;
    mask.check_grid(m.size())?;
    let op = SamplingOperator::new(mask.clone());
    match cfg.method {
        Method::Tv1 => {
            let reg = GradientRegularizer::new(cfg);
            objective_with(u, &reg.apply(u), m, &op, cfg.rho, &reg)
        }
        _ => {
            let reg = HessianRegularizer::new(cfg)?;
            objective_with(u, &reg.apply(u), m, &op, cfg.rho, &reg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{forward_adjoint, forward_apply};
    use crate::image::HessianField;
    use crate::mask::{make_mask, MaskSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(method: Method, rho: f64, beta: f64) -> SolverConfig {
        SolverConfig {
            beta: Some(beta),
            ..SolverConfig::new(method, rho)
        }
    }

    fn image(data: &[f64]) -> Image {
        let n = (data.len() as f64).sqrt() as usize;
        Image::new(n, n, data.to_vec()).unwrap()
    }

    #[test]
    fn step_v_projects() {
        let c = cfg(Method::Qshs, 1.0, 2.0);
        let mut s = SolverState::<4>::zeros(2);
        s.u = image(&[-1.0, 2.0, -3.0, 0.5]);
        s.u_hat = image(&[0.0, 0.0, 2.0, 1.0]);
        // u + u_hat / 2 = (-1, 2, -2, 1)
        assert_eq!(step_v(&s, &c).as_slice(), &[0.0, 2.0, 0.0, 1.0]);
        s.u = image(&[-1.0, -2.0, -3.0, -0.5]);
        s.u_hat = Image::zeros(2);
        assert!(step_v(&s, &c).as_slice().iter().all(|&x| x == 0.0));
        s.u = image(&[1.0, 2.0, 3.0, 0.0]);
        assert_eq!(step_v(&s, &c), s.u);
        let free = SolverConfig {
            constraint_set: ConstraintSet::Unconstrained,
            ..c.clone()
        };
        s.u = image(&[-1.0, 2.0, -3.0, 0.5]);
        assert_eq!(step_v(&s, &free), s.u);
        let boxed = SolverConfig {
            constraint_set: ConstraintSet::Box { lo: 0.0, hi: 1.0 },
            ..c
        };
        assert_eq!(step_v(&s, &boxed).as_slice(), &[0.0, 1.0, 0.0, 0.5]);
    }

    #[test]
    fn step_h_examples() {
        let c = SolverConfig {
            shrink_rule: ShrinkRule::GrowingOffset,
            ..cfg(Method::Qshs, 1.0, 1.0)
        };
        let reg = HessianRegularizer::new(&c).unwrap();
        let s = SolverState::<4>::zeros(4);
        assert_eq!(step_h(&s, &c, &reg), HessianField::zeros(4));

        // Hu = 0, H_hat / beta carries diag(4, 0.25) at one pixel.
        let mut s = SolverState::<4>::zeros(4);
        s.h_hat.set_pixel(1, 2, Matrix2::diag(4.0, 0.25)).unwrap();
        let h = step_h(&s, &c, &reg);
        let px = h.field_pixel(1, 2).unwrap();
        assert!(px.sub(Matrix2::diag(2.0, 0.0)).frobenius() < 1e-12);
        assert_eq!(h.field_pixel(0, 0).unwrap(), Matrix2::ZERO);

        // Decaying offset: 4 - 4^(-1/2) = 3.5, and 0.25 sits in the dead zone.
        let c = cfg(Method::Qshs, 1.0, 1.0);
        let reg = HessianRegularizer::new(&c).unwrap();
        let px = step_h(&s, &c, &reg).field_pixel(1, 2).unwrap();
        assert!(px.sub(Matrix2::diag(3.5, 0.0)).frobenius() < 1e-12);
    }

    #[test]
    fn step_h_vanishing_shrinkage_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = cfg(Method::Qshs, 1.0, 1e8);
        let reg = HessianRegularizer::new(&c).unwrap();
        let mut s = SolverState::<4>::zeros(8);
        s.u = Image::from_fn(8, |_, _| rng.random_range(0.0..10.0)).unwrap();
        let data = (0..64)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1e8..1e8)))
            .collect();
        s.h_hat = HessianField::new(8, 8, data).unwrap();
        let h = step_h(&s, &c, &reg);
        let hu = hessian_apply(&s.u);
        for ((out, a), w) in h.pixels().iter().zip(hu.pixels()).zip(s.h_hat.pixels()) {
            for i in 0..4 {
                assert!((out[i] - (a[i] + w[i] / 1e8)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn step_duals_examples() {
        let c = cfg(Method::Hs1, 1.0, 0.5);
        let reg = HessianRegularizer::new(&c).unwrap();
        let mut s = SolverState::<4>::zeros(2);
        s.u = image(&[1.0, 2.0, 3.0, 4.0]);
        s.v = s.u.clone();
        s.h = hessian_apply(&s.u);
        s.u_hat = image(&[0.5, -0.5, 1.0, 0.0]);
        let (uh, hh) = step_duals(&s, &c, &reg);
        assert_eq!(uh, s.u_hat);
        assert_eq!(hh, s.h_hat);

        // Hand computation on a 2x2 grid: with n = 2 the Hessian of
        // [[1, 2], [3, 4]] is Dxx = 2 (u(r1+1) - u) wrapped, Dyy likewise, Dxy = 0.
        s.v = image(&[0.0, 2.0, 1.0, 4.0]);
        s.h = HessianField::zeros(2);
        let (uh, hh) = step_duals(&s, &c, &reg);
        assert_eq!(uh.as_slice(), &[1.0, -0.5, 2.0, 0.0]);
        let hu = hessian_apply(&s.u);
        assert_eq!(hu.get(0, 0).unwrap(), [4.0, 0.0, 0.0, 2.0]);
        assert_eq!(hu.get(1, 1).unwrap(), [-4.0, 0.0, 0.0, -2.0]);
        assert_eq!(hh.get(0, 0).unwrap(), [2.0, 0.0, 0.0, 1.0]);
        assert_eq!(hh.get(1, 1).unwrap(), [-2.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(Method::Qshs, 1.0).validate().is_ok());
        assert!(SolverConfig::new(Method::Qshs, 0.0).validate().is_err());
        assert!(cfg(Method::Qshs, 1.0, 0.0).validate().is_err());
        let c = SolverConfig {
            q: 1.5,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SolverConfig {
            constraint_set: ConstraintSet::Box { lo: 1.0, hi: 1.0 },
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
        assert_eq!(SolverConfig::new(Method::Hs1, 0.3).beta(), 0.3);
    }

    #[test]
    fn step_u_solves_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 16;
        let mask = make_mask(n, &MaskSpec::variable_density(0.3, 5)).unwrap();
        let c = cfg(Method::Qshs, 0.7, 1.3);
        let reg = HessianRegularizer::new(&c).unwrap();
        let mut s = SolverState::<4>::zeros(n);
        s.v = Image::from_fn(n, |_, _| rng.random_range(0.0..255.0)).unwrap();
        s.u_hat = Image::from_fn(n, |_, _| rng.random_range(-5.0..5.0)).unwrap();
        let rand_field = |rng: &mut ChaCha8Rng| {
            HessianField::new(
                n,
                n,
                (0..n * n)
                    .map(|_| std::array::from_fn(|_| rng.random_range(-20.0..20.0)))
                    .collect(),
            )
            .unwrap()
        };
        s.h = rand_field(&mut rng);
        s.h_hat = rand_field(&mut rng);
        let truth = Image::from_fn(n, |_, _| rng.random_range(0.0..255.0)).unwrap();
        let m = forward_apply(&truth, &mask).unwrap();
        let u = step_u(&s, &c, &reg, &m, &mask, &hessian_symbol(n, n).unwrap()).unwrap();

        let beta = 1.3;
        let tt = forward_adjoint(&forward_apply(&u, &mask).unwrap(), &mask).unwrap();
        let hh = hessian_adjoint(&hessian_apply(&u));
        let lhs: Vec<f64> = (0..n * n)
            .map(|i| tt.as_slice()[i] + beta * (hh.as_slice()[i] + u.as_slice()[i]))
            .collect();
        let rhs = step_u_rhs(&s, beta, &forward_adjoint(&m, &mask).unwrap(), &reg);
        let err: f64 = lhs
            .iter()
            .zip(rhs.as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10 * rhs.l2_norm(), "{err}");
    }

    #[test]
    fn homogeneous_system_gives_zero() {
        let n = 8;
        let c = cfg(Method::Hs2, 1.0, 3.0);
        let reg = HessianRegularizer::new(&c).unwrap();
        let s = SolverState::<4>::zeros(n);
        let u = step_u(&s, &c, &reg, &KSpace::zeros(n), &Mask::full(n), &hessian_symbol(n, n).unwrap())
            .unwrap();
        assert!(u.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn consistent_splits_recover_truth_in_one_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 16;
        let truth = Image::from_fn(n, |_, _| rng.random_range(0.0..255.0)).unwrap();
        let mask = Mask::full(n);
        let m = forward_apply(&truth, &mask).unwrap();
        let c = cfg(Method::Qshs, 1.0, 4.0);
        let reg = HessianRegularizer::new(&c).unwrap();
        let mut s = SolverState::<4>::zeros(n);
        s.u = Image::from_fn(n, |_, _| rng.random_range(-1e3..1e3)).unwrap();
        s.v = truth.clone();
        s.h = hessian_apply(&truth);
        let u = step_u(&s, &c, &reg, &m, &mask, &hessian_symbol(n, n).unwrap()).unwrap();
        for (a, b) in u.as_slice().iter().zip(truth.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn objective_examples() {
        let n = 8;
        let mask = Mask::full(n);
        let c = SolverConfig::new(Method::Qshs, 1.0);
        assert_eq!(objective(&Image::zeros(n), &KSpace::zeros(n), &mask, &c).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<Complex64> = (0..n * n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let m = KSpace::new(n, n, data).unwrap();
        for method in Method::ALL {
            let c = SolverConfig::new(method, 2.0);
            let val = objective(&Image::zeros(n), &m, &mask, &c).unwrap();
            assert!((val - 0.5 * m.l2_norm().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_measurement_converges_to_zero() {
        let n = 16;
        let mask = make_mask(n, &MaskSpec::variable_density(0.3, 1)).unwrap();
        for method in Method::ALL {
            let r = solve(&KSpace::zeros(n), &mask, &SolverConfig::new(method, 1.0)).unwrap();
            assert!(r.u_final.as_slice().iter().all(|&x| x == 0.0));
            assert_eq!(r.objective_trace.len(), r.iterations_run);
            assert_eq!(r.primal_residual_u_trace.len(), r.iterations_run);
        }
    }

    #[test]
    fn rejects_unsampled_dc() {
        let mut bins = vec![true; 16];
        bins[0] = false;
        let mask = Mask::new(4, 4, bins).unwrap();
        let err = solve(&KSpace::zeros(4), &mask, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn q_one_matches_hs1_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 16;
        let truth = Image::from_fn(n, |_, _| rng.random_range(0.0..255.0)).unwrap();
        let mask = make_mask(n, &MaskSpec::variable_density(0.4, 2)).unwrap();
        let m = forward_apply(&truth, &mask).unwrap();
        let base = SolverConfig {
            max_iters: 50,
            track_objective: false,
            ..SolverConfig::new(Method::Hs1, 0.5)
        };
        let qshs = SolverConfig {
            method: Method::Qshs,
            q: 1.0,
            ..base.clone()
        };
        let a = solve(&m, &mask, &base).unwrap();
        let b = solve(&m, &mask, &qshs).unwrap();
        assert_eq!(a, b);
    }
}
