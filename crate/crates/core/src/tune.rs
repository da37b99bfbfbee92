//! Golden-section search over `log10(rho)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneObjective {
    #[default]
    Mse,
    NegSsim,
}

impl std::str::FromStr for TuneObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Self::Mse),
            "neg-ssim" | "ssim" => Ok(Self::NegSsim),
            other => Err(Error::InvalidParameter(format!("unknown tuning objective '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneSpec {
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub tol: f64,
    #[serde(default)]
    pub objective: TuneObjective,
}

impl Default for TuneSpec {
    fn default() -> Self {
        Self {
            log10_lo: -3.0,
            log10_hi: 2.0,
            tol: 0.05,
            objective: TuneObjective::Mse,
        }
    }
}

/// `1 / phi`, the bracket shrink factor per iteration.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

impl TuneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.log10_lo.is_finite() && self.log10_hi.is_finite() && self.log10_lo < self.log10_hi) {
            return Err(Error::InvalidParameter(format!(
                "tuning bounds need lo < hi, got [{}, {}]",
                self.log10_lo, self.log10_hi
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tuning tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }

    /// Upper bound on the number of objective evaluations.
    pub fn max_evals(&self) -> usize {
        let ratio = (self.log10_hi - self.log10_lo) / self.tol;
        if ratio <= 1.0 {
            return 2;
        }
        (ratio.ln() / (1.0 / INV_PHI).ln()).ceil() as usize + 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub log10_rho: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_log10_rho: f64,
    pub best_objective: f64,
    /// Every evaluation in call order.
    pub probes: Vec<Probe>,
    /// Width of the final bracket in `log10(rho)`.
    pub bracket_width: f64,
}

impl TuneResult {
    pub fn best_rho(&self) -> f64 {
        10f64.powf(self.best_log10_rho)
    }
}

/// Minimizes `eval(log10_rho)` on `[log10_lo, log10_hi]` until the bracket is
/// no wider than `tol`. Returns the best probe seen. A non-finite value stops
/// the search with [`Error::NonFiniteObjective`].
pub fn golden_section_tune<F>(mut eval: F, spec: &TuneSpec) -> Result<TuneResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    spec.validate()?;
    let mut probes = Vec::new();
    let mut probe = |x: f64, probes: &mut Vec<Probe>| -> Result<f64> {
        let f = eval(x)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteObjective { rho: 10f64.powf(x) });
        }
        probes.push(Probe {
            log10_rho: x,
            objective: f,
        });
        Ok(f)
    };

    let (mut a, mut b) = (spec.log10_lo, spec.log10_hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = probe(c, &mut probes)?;
    let mut fd = probe(d, &mut probes)?;
    while b - a > spec.tol && probes.len() < spec.max_evals() {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = probe(c, &mut probes)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = probe(d, &mut probes)?;
        }
    }
    let best = probes
        .iter()
        .copied()
        .min_by(|p, q| p.objective.total_cmp(&q.objective))
        .expect("at least two probes");
    Ok(TuneResult {
        best_log10_rho: best.log10_rho,
        best_objective: best.objective,
        probes,
        bracket_width: b - a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(lo: f64, hi: f64, tol: f64) -> TuneSpec {
        TuneSpec {
            log10_lo: lo,
            log10_hi: hi,
            tol,
            objective: TuneObjective::Mse,
        }
    }

    #[test]
    fn quadratic_minimum() {
        let s = spec(0.0, 5.0, 1e-4);
        let r = golden_section_tune(|x| Ok((x - 2.0) * (x - 2.0)), &s).unwrap();
        assert!((r.best_log10_rho - 2.0).abs() <= 1e-4);
        assert!(r.probes.len() <= s.max_evals());
        assert!(r.bracket_width <= 1e-4);
    }

    #[test]
    fn constant_objective() {
        let s = spec(-3.0, 2.0, 1e-3);
        let r = golden_section_tune(|_| Ok(7.5), &s).unwrap();
        assert_eq!(r.best_objective, 7.5);
        assert!((-3.0..=2.0).contains(&r.best_log10_rho));
    }

    #[test]
    fn asymmetric_kink() {
        let s = spec(-3.0, 2.0, 1e-5);
        let r = golden_section_tune(|x| Ok((x - 1.0).abs() + 0.5 * (x - 1.0).powi(2)), &s).unwrap();
        assert!((r.best_log10_rho - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn eval_count_bound() {
        for tol in [1.0, 0.1, 0.05, 1e-3, 1e-6] {
            let s = spec(-3.0, 2.0, tol);
            let mut calls = 0;
            golden_section_tune(
                |x| {
                    calls += 1;
                    Ok(x.sin())
                },
                &s,
            )
            .unwrap();
            let bound = ((5.0 / tol).ln() / (1.0f64 / 0.618).ln()).ceil() as usize + 2;
            assert!(calls <= bound, "{calls} > {bound}");
        }
    }

    #[test]
    fn bracket_shrinks_by_golden_ratio() {
        let s = spec(0.0, 1.0, 1e-3);
        let r = golden_section_tune(|x| Ok((x - 0.3).powi(2)), &s).unwrap();
        let k = r.probes.len() - 2;
        assert!((r.bracket_width - INV_PHI.powi(k as i32)).abs() < 1e-12);
    }

    #[test]
    fn non_finite_reports_rho() {
        let s = spec(0.0, 2.0, 1e-2);
        let err = golden_section_tune(|x| Ok(if x > 1.0 { f64::NAN } else { x }), &s).unwrap_err();
        match err {
            Error::NonFiniteObjective { rho } => assert!(rho > 10.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_spec() {
        assert!(golden_section_tune(|x| Ok(x), &spec(1.0, 1.0, 0.1)).is_err());
        assert!(golden_section_tune(|x| Ok(x), &spec(0.0, 1.0, 0.0)).is_err());
    }
}
