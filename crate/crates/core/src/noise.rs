//! Stochastic gradient oracles and their conditional moment bounds.
//!
//! Each oracle draws a gradient estimate `g_k` for iteration `k` from the
//! true gradient and the objective gap `F(x_k) - F_min`, and declares the
//! tightest deterministic sequences `(a_k, b_k, c_k)` provable from its
//! sampling law, so that
//!
//! ```text
//! E_k[ ||g_k||^2 ] <= a_k (F(x_k) - F_min) + b_k ||grad F(x_k)||^2 + c_k .
//! ```
//!
//! Four families ship:
//!
//! - `exact`: `g = grad F(x)`, bounds `(0, 1, 0)`.
//! - `multiplicative`: `g = e1 grad`, `e1 ~ U[1 - sqrt(3b-1), 1 + sqrt(3b-1)]`
//!   (mean 1, second moment `b + 2/3`), bounds `(0, b + 2/3, 0)`.
//! - `additive-gaussian`: `g = e1 grad + e2`, `e2 ~ N(0, sigma_k^2)` with
//!   `sigma_k = sigma / (k+1)^(1+eps)`, bounds `(0, b + 2/3, sigma_k^2)`.
//! - `value-dependent`: `g = e3 sqrt(F(x) - F_min) + e1 grad + e2` with
//!   `e3 ~ U[-w_k, w_k]`, `w_k = sqrt(3) / (alpha (k+1)^(1+eps))`, bounds
//!   `(1 / (alpha^2 (k+1)^(2+2eps)), b + 2/3, sigma_k^2)`. Cross terms vanish
//!   because `e1`, `e2`, `e3` are independent and `e2`, `e3` are zero-mean.
//!
//! The iteration index enters every decaying sequence as `k + 1`, so nothing
//! divides by zero at `k = 0`.
//!
//! Oracles never evaluate the objective themselves: the caller supplies the
//! true gradient and the gap, keeping a single evaluation point of truth per
//! iteration. Randomness flows through caller-owned streams, so oracles are
//! plain immutable configuration.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::objective::ObjectiveSpec;
use crate::rng::{domain, CounterRng};
use crate::{Error, Result};

/// The sampling law family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Exact,
    Multiplicative,
    AdditiveGaussian,
    ValueDependent,
}

impl std::fmt::Display for OracleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OracleKind::Exact => "exact",
            OracleKind::Multiplicative => "multiplicative",
            OracleKind::AdditiveGaussian => "additive-gaussian",
            OracleKind::ValueDependent => "value-dependent",
        };
        f.write_str(s)
    }
}

/// The bound triple `(a_k, b_k, c_k)` at one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBounds {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MomentBounds {
    /// Right-hand side of the second-moment inequality at a state with the
    /// given gap and squared gradient norm.
    pub fn rhs(&self, f_gap: f64, grad_norm_sq: f64) -> f64 {
        self.a * f_gap + self.b * grad_norm_sq + self.c
    }
}

/// A stochastic gradient generator with declared moment bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseOracle {
    kind: OracleKind,
    /// Multiplicative level; the `e1` draw interval is
    /// `[1 - sqrt(3b-1), 1 + sqrt(3b-1)]`.
    b: f64,
    /// Additive scale `sigma` of `sigma_k = sigma / (k+1)^(1+eps)`.
    sigma: f64,
    /// Decay exponent `eps` shared by the `sigma_k` and `w_k` sequences.
    eps_exp: f64,
    /// The stepsize entering the value-dependent amplitude `w_k`.
    alpha_ref: f64,
    /// Deliberate shift of the `e1` mean away from 1. Zero for every shipped
    /// configuration; used to construct oracles that violate unbiasedness on
    /// purpose so the validators have something to catch.
    e1_shift: f64,
}

impl NoiseOracle {
    pub fn exact() -> Self {
        NoiseOracle {
            kind: OracleKind::Exact,
            b: 1.0,
            sigma: 0.0,
            eps_exp: 0.1,
            alpha_ref: 1.0,
            e1_shift: 0.0,
        }
    }

    pub fn multiplicative(b: f64) -> Result<Self> {
        check_level(b)?;
        Ok(NoiseOracle {
            kind: OracleKind::Multiplicative,
            b,
            sigma: 0.0,
            eps_exp: 0.1,
            alpha_ref: 1.0,
            e1_shift: 0.0,
        })
    }

    pub fn additive_gaussian(b: f64, sigma: f64, eps_exp: f64) -> Result<Self> {
        check_level(b)?;
        check_sigma_eps(sigma, eps_exp)?;
        Ok(NoiseOracle {
            kind: OracleKind::AdditiveGaussian,
            b,
            sigma,
            eps_exp,
            alpha_ref: 1.0,
            e1_shift: 0.0,
        })
    }

    pub fn value_dependent(b: f64, sigma: f64, eps_exp: f64, alpha_ref: f64) -> Result<Self> {
        check_level(b)?;
        check_sigma_eps(sigma, eps_exp)?;
        if !alpha_ref.is_finite() || alpha_ref <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha_ref must be a positive real, got {alpha_ref}"
            )));
        }
        Ok(NoiseOracle {
            kind: OracleKind::ValueDependent,
            b,
            sigma,
            eps_exp,
            alpha_ref,
            e1_shift: 0.0,
        })
    }

    /// Returns a copy whose `e1` mean is shifted by `shift`; the result is a
    /// deliberately biased oracle.
    pub fn with_e1_shift(mut self, shift: f64) -> Self {
        self.e1_shift = shift;
        self
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn level_b(&self) -> f64 {
        self.b
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eps_exp(&self) -> f64 {
        self.eps_exp
    }

    pub fn alpha_ref(&self) -> f64 {
        self.alpha_ref
    }

    /// Half-width `sqrt(3b - 1)` of the `e1` draw interval.
    pub fn e1_half_width(&self) -> f64 {
        (3.0 * self.b - 1.0).sqrt()
    }

    /// Second moment of `e1`: `1 + (3b - 1)/3 = b + 2/3`.
    pub fn e1_second_moment(&self) -> f64 {
        self.b + 2.0 / 3.0
    }

    /// Additive noise deviation `sigma_k = sigma / (k+1)^(1+eps)`.
    pub fn sigma_k(&self, k: u64) -> f64 {
        self.sigma / ((k + 1) as f64).powf(1.0 + self.eps_exp)
    }

    /// Value-noise half-width `w_k = sqrt(3) / (alpha (k+1)^(1+eps))`.
    pub fn omega_k(&self, k: u64) -> f64 {
        3f64.sqrt() / (self.alpha_ref * ((k + 1) as f64).powf(1.0 + self.eps_exp))
    }

    /// The tightest `(a_k, b_k, c_k)` provable from the sampling law.
    ///
    /// Deterministic in `k`; never touches random state.
    pub fn moment_bounds(&self, k: u64) -> MomentBounds {
        match self.kind {
            OracleKind::Exact => MomentBounds { a: 0.0, b: 1.0, c: 0.0 },
            OracleKind::Multiplicative => {
                MomentBounds { a: 0.0, b: self.e1_second_moment(), c: 0.0 }
            }
            OracleKind::AdditiveGaussian => MomentBounds {
                a: 0.0,
                b: self.e1_second_moment(),
                c: self.sigma_k(k).powi(2),
            },
            OracleKind::ValueDependent => {
                let w = self.omega_k(k);
                MomentBounds {
                    a: w * w / 3.0,
                    b: self.e1_second_moment(),
                    c: self.sigma_k(k).powi(2),
                }
            }
        }
    }

    fn draw_e1(&self, rng: &mut CounterRng) -> f64 {
        let w = self.e1_half_width();
        rng.uniform(1.0 - w, 1.0 + w) + self.e1_shift
    }

    /// Draws one gradient estimate for iteration `k` into `out`.
    ///
    /// `grad_true` is the exact gradient at the current state and `f_gap`
    /// the objective gap `F(x) - F_min` there. Draw order within the stream
    /// is fixed (`e3`, then `e1`, then the `e2` components), which is part of
    /// the reproducibility contract.
    pub fn sample_into(
        &self,
        k: u64,
        grad_true: &[f64],
        f_gap: f64,
        rng: &mut CounterRng,
        out: &mut [f64],
    ) -> Result<()> {
        assert_eq!(grad_true.len(), out.len(), "gradient buffers disagree on dimension");
        if f_gap < 0.0 {
            return Err(Error::NegativeGap(f_gap));
        }
        match self.kind {
            OracleKind::Exact => out.copy_from_slice(grad_true),
            OracleKind::Multiplicative => {
                let e1 = self.draw_e1(rng);
                for (o, g) in out.iter_mut().zip(grad_true) {
                    *o = e1 * g;
                }
            }
            OracleKind::AdditiveGaussian => {
                let e1 = self.draw_e1(rng);
                let sd = self.sigma_k(k);
                for (o, g) in out.iter_mut().zip(grad_true) {
                    *o = e1 * g + rng.normal(0.0, sd);
                }
            }
            OracleKind::ValueDependent => {
                if grad_true.len() != 1 {
                    return Err(Error::InvalidParameter(
                        "the value-dependent oracle is one-dimensional".into(),
                    ));
                }
                let w = self.omega_k(k);
                let e3 = rng.uniform(-w, w);
                let e1 = self.draw_e1(rng);
                let e2 = rng.normal(0.0, self.sigma_k(k));
                out[0] = e3 * f_gap.sqrt() + e1 * grad_true[0] + e2;
            }
        }
        Ok(())
    }

    /// Allocating convenience wrapper around [`sample_into`](Self::sample_into).
    pub fn sample(
        &self,
        k: u64,
        grad_true: &[f64],
        f_gap: f64,
        rng: &mut CounterRng,
    ) -> Result<Vec<f64>> {
        let mut out = vec![0.0; grad_true.len()];
        self.sample_into(k, grad_true, f_gap, rng, &mut out)?;
        Ok(out)
    }
}

fn check_level(b: f64) -> Result<()> {
    if !b.is_finite() || b < 1.0 / 3.0 {
        return Err(Error::NoiseLevelTooSmall(b));
    }
    Ok(())
}

fn check_sigma_eps(sigma: f64, eps_exp: f64) -> Result<()> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if !eps_exp.is_finite() || eps_exp <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps_exp must be a positive real, got {eps_exp}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Monte-Carlo validators
// ---------------------------------------------------------------------------

/// Outcome of the unbiasedness check `E_k[g_k] = grad F(x_k)`.
#[derive(Clone, Debug, Serialize)]
pub struct UnbiasednessReport {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub grad_true: Vec<f64>,
    pub z: f64,
    pub n_draws: usize,
    pub passed: bool,
}

/// Outcome of the second-moment check
/// `E_k[||g||^2] <= a_k gap + b_k ||grad||^2 + c_k`.
#[derive(Clone, Debug, Serialize)]
pub struct SecondMomentReport {
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    pub slack: f64,
    pub n_draws: usize,
    pub passed: bool,
}

struct Welford {
    mean: f64,
    m2: f64,
    count: usize,
}

impl Welford {
    fn new() -> Self {
        Welford { mean: 0.0, m2: 0.0, count: 0 }
    }

    fn update(&mut self, sample: f64) {
        self.count += 1;
        let delta = sample - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (sample - self.mean);
    }

    /// (mean, standard error of the mean)
    fn finish(&self) -> (f64, f64) {
        if self.count > 1 {
            let var = self.m2 / (self.count - 1) as f64;
            (self.mean, (var / self.count as f64).sqrt())
        } else {
            (self.mean, 0.0)
        }
    }
}

/// Checks `E_k[g_k] = grad F(x)` by Monte Carlo: the true gradient must lie
/// inside the confidence interval built from the sample standard error,
/// component-wise. A degenerate law (zero empirical variance) must match the
/// gradient exactly.
pub fn verify_unbiasedness(
    oracle: &NoiseOracle,
    f: &ObjectiveSpec,
    x: &[f64],
    k: u64,
    n_draws: usize,
    confidence: f64,
    seed: u64,
) -> Result<UnbiasednessReport> {
    if n_draws < 1000 {
        return Err(Error::InvalidParameter("need at least 1000 draws".into()));
    }
    if !confidence.is_finite() || confidence <= 0.0 || confidence >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "confidence must be in (0, 1), got {confidence}"
        )));
    }
    let dim = f.dim();
    let mut grad = vec![0.0; dim];
    f.gradient(x, &mut grad)?;
    let f_gap = f.evaluate(x)? - f.f_min();

    let mut rng = CounterRng::from_path(seed, &[domain::MOMENT, k]);
    let mut acc: Vec<Welford> = (0..dim).map(|_| Welford::new()).collect();
    let mut g = vec![0.0; dim];
    for _ in 0..n_draws {
        oracle.sample_into(k, &grad, f_gap, &mut rng, &mut g)?;
        for (a, gi) in acc.iter_mut().zip(&g) {
            a.update(*gi);
        }
    }
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let mut mean = Vec::with_capacity(dim);
    let mut se = Vec::with_capacity(dim);
    let mut passed = true;
    for (a, &gi) in acc.iter().zip(&grad) {
        let (m, s) = a.finish();
        if s == 0.0 {
            // degenerate law: hard fail unless the mean is exact
            passed &= m == gi;
        } else {
            passed &= (m - gi).abs() <= z * s;
        }
        mean.push(m);
        se.push(s);
    }
    Ok(UnbiasednessReport { mean, std_error: se, grad_true: grad, z, n_draws, passed })
}

/// Checks the second-moment bound by Monte Carlo. The empirical mean of
/// `||g||^2` must not exceed the declared bound plus `slack`; `slack`
/// defaults to three standard errors of the empirical mean.
pub fn verify_second_moment(
    oracle: &NoiseOracle,
    f: &ObjectiveSpec,
    x: &[f64],
    k: u64,
    n_draws: usize,
    slack: Option<f64>,
    seed: u64,
) -> Result<SecondMomentReport> {
    if n_draws < 1000 {
        return Err(Error::InvalidParameter("need at least 1000 draws".into()));
    }
    if let Some(s) = slack {
        if s < 0.0 {
            return Err(Error::InvalidParameter(format!("slack must be >= 0, got {s}")));
        }
    }
    let dim = f.dim();
    let mut grad = vec![0.0; dim];
    f.gradient(x, &mut grad)?;
    let f_gap = f.evaluate(x)? - f.f_min();
    let grad_norm_sq: f64 = grad.iter().map(|v| v * v).sum();

    let mut rng = CounterRng::from_path(seed, &[domain::MOMENT, k]);
    let mut acc = Welford::new();
    let mut g = vec![0.0; dim];
    for _ in 0..n_draws {
        oracle.sample_into(k, &grad, f_gap, &mut rng, &mut g)?;
        acc.update(g.iter().map(|v| v * v).sum());
    }
    let (empirical, se) = acc.finish();
    let bound = oracle.moment_bounds(k).rhs(f_gap, grad_norm_sq);
    let slack = slack.unwrap_or(3.0 * se);
    // tiny absolute allowance so the degenerate exact case passes at equality
    let passed = empirical <= bound + slack + 1e-9 * bound.abs().max(1.0);
    Ok(SecondMomentReport { empirical, std_error: se, bound, slack, n_draws, passed })
}
