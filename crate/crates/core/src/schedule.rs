//! Stepsize schedules bundled with moment-bound sequences, and the
//! mechanical checks the convergence theory puts on them.
//!
//! A [`StepSchedule`] owns the stepsize `alpha_k` (constant for every shipped
//! configuration), the smoothness constant `beta` of the target objective,
//! and two closed-form channels of bound sequences `(a_k, b_k, c_k)`:
//!
//! - the `derived` channel: the tight bounds provable from the oracle's
//!   actual sampling law ([`NoiseOracle::moment_bounds`]);
//! - the `nominal` channel: the coarser constants conventionally quoted for
//!   the same noise family. For the value-dependent family this channel uses
//!   the decaying sequences `a_k = 2 / (alpha^2 beta (k+1)^(2+eps))`,
//!   `b_k = 3 b / (k+1)^2`, `c_k = 3 sigma^2 / (k+1)^(2+2 eps)`, the choice
//!   under which the monotone-ratio condition below is satisfiable at all
//!   (it cannot hold with constant `b_k` and nonzero `a_k`).
//!
//! Three conditions are checked, per channel:
//!
//! 1. summability: `sum_k alpha_k (sqrt(a_k) + sqrt(c_k)) < inf`,
//! 2. positivity: `inf_k alpha_k (1 - alpha_k b_k beta / 2) > 0`,
//! 3. monotone ratio: for every `k`,
//!    `sqrt(b_{k+1}/b_k) * (2 - alpha_k b_k beta)/(2 - alpha_{k+1} b_{k+1} beta)
//!     * (1 + alpha_{k+1}^2 a_{k+1} beta / 2) <= 1` and positive.
//!
//! All sequences are power laws, so truncated sums get exact integral tail
//! bounds and every verdict is decisive. The checkers are pure functions of
//! the schedule.

use serde::{Deserialize, Serialize};

use crate::noise::{MomentBounds, NoiseOracle, OracleKind};
use crate::{Error, Result};

/// `value(k) = coef / (k + 1)^exponent`, the closed form every bound
/// sequence in this crate takes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn zero() -> Self {
        PowerLaw { coef: 0.0, exponent: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        PowerLaw { coef: c, exponent: 0.0 }
    }

    pub fn new(coef: f64, exponent: f64) -> Self {
        PowerLaw { coef, exponent }
    }

    pub fn is_zero(&self) -> bool {
        self.coef == 0.0
    }

    #[inline]
    pub fn at(&self, k: u64) -> f64 {
        if self.coef == 0.0 {
            0.0
        } else if self.exponent == 0.0 {
            self.coef
        } else {
            self.coef / ((k + 1) as f64).powf(self.exponent)
        }
    }

    /// The square-root sequence `sqrt(value(k))`, again a power law.
    fn sqrt_law(&self) -> PowerLaw {
        PowerLaw { coef: self.coef.sqrt(), exponent: self.exponent / 2.0 }
    }
}

/// Closed-form `(a_k, b_k, c_k)` triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRule {
    pub a: PowerLaw,
    pub b: PowerLaw,
    pub c: PowerLaw,
}

impl BoundsRule {
    pub fn at(&self, k: u64) -> MomentBounds {
        MomentBounds { a: self.a.at(k), b: self.b.at(k), c: self.c.at(k) }
    }

    /// The tight channel: closed forms matching
    /// [`NoiseOracle::moment_bounds`] at every `k`.
    pub fn derived_from(oracle: &NoiseOracle) -> BoundsRule {
        let e1_sq = oracle.e1_second_moment();
        let sig = oracle.sigma();
        let eps = oracle.eps_exp();
        match oracle.kind() {
            OracleKind::Exact => BoundsRule {
                a: PowerLaw::zero(),
                b: PowerLaw::constant(1.0),
                c: PowerLaw::zero(),
            },
            OracleKind::Multiplicative => BoundsRule {
                a: PowerLaw::zero(),
                b: PowerLaw::constant(e1_sq),
                c: PowerLaw::zero(),
            },
            OracleKind::AdditiveGaussian => BoundsRule {
                a: PowerLaw::zero(),
                b: PowerLaw::constant(e1_sq),
                c: PowerLaw::new(sig * sig, 2.0 + 2.0 * eps),
            },
            OracleKind::ValueDependent => {
                let alpha = oracle.alpha_ref();
                BoundsRule {
                    a: PowerLaw::new(1.0 / (alpha * alpha), 2.0 + 2.0 * eps),
                    b: PowerLaw::constant(e1_sq),
                    c: PowerLaw::new(sig * sig, 2.0 + 2.0 * eps),
                }
            }
        }
    }

    /// The conventional coarse channel for the oracle's family.
    pub fn nominal_from(oracle: &NoiseOracle, beta: f64) -> BoundsRule {
        let b = oracle.level_b();
        let sig = oracle.sigma();
        let eps = oracle.eps_exp();
        match oracle.kind() {
            OracleKind::Exact => BoundsRule {
                a: PowerLaw::zero(),
                b: PowerLaw::constant(1.0),
                c: PowerLaw::zero(),
            },
            OracleKind::Multiplicative => BoundsRule {
                a: PowerLaw::zero(),
                b: PowerLaw::constant(b),
                c: PowerLaw::zero(),
            },
            OracleKind::AdditiveGaussian => BoundsRule {
                a: PowerLaw::zero(),
                b: PowerLaw::constant(2.0 * b),
                c: PowerLaw::new(2.0 * sig * sig, 2.0 + 2.0 * eps),
            },
            OracleKind::ValueDependent => {
                let alpha = oracle.alpha_ref();
                BoundsRule {
                    a: PowerLaw::new(2.0 / (alpha * alpha * beta), 2.0 + eps),
                    b: PowerLaw::new(3.0 * b, 2.0),
                    c: PowerLaw::new(3.0 * sig * sig, 2.0 + 2.0 * eps),
                }
            }
        }
    }
}

/// Which bound channel a check or probe runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsChannel {
    /// Tight bounds derived from the implemented sampling law.
    Derived,
    /// Coarser conventional constants for the family.
    Nominal,
}

impl std::fmt::Display for BoundsChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundsChannel::Derived => "derived",
            BoundsChannel::Nominal => "nominal",
        })
    }
}

/// Constant stepsize balancing a multiplicative level against the smoothness
/// constant: `alpha = 1 / (level * beta)`, so `alpha * level * beta = 1`.
pub fn matched_stepsize(level: f64, beta: f64) -> f64 {
    1.0 / (level * beta)
}

/// The deterministic sequences of one experiment: stepsize, smoothness
/// constant, and both bound channels.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSchedule {
    alpha: f64,
    beta: f64,
    derived: BoundsRule,
    nominal: BoundsRule,
}

impl StepSchedule {
    /// Bundles a constant stepsize with the bound channels of `oracle`.
    pub fn for_oracle(alpha: f64, beta: f64, oracle: &NoiseOracle) -> Result<Self> {
        Self::validate(alpha, beta)?;
        Ok(StepSchedule {
            alpha,
            beta,
            derived: BoundsRule::derived_from(oracle),
            nominal: BoundsRule::nominal_from(oracle, beta),
        })
    }

    /// A schedule over an explicit rule; both channels coincide. Used for
    /// counterexample sequences that no shipped oracle produces.
    pub fn from_rule(alpha: f64, beta: f64, rule: BoundsRule) -> Result<Self> {
        Self::validate(alpha, beta)?;
        Ok(StepSchedule { alpha, beta, derived: rule, nominal: rule })
    }

    fn validate(alpha: f64, beta: f64) -> Result<()> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "stepsize must be a positive real, got {alpha}"
            )));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be a positive real, got {beta}"
            )));
        }
        Ok(())
    }

    /// `alpha_k` (constant in this crate, but indexed for symmetry with the
    /// bound sequences).
    #[inline]
    pub fn stepsize(&self, _k: u64) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rule(&self, channel: BoundsChannel) -> &BoundsRule {
        match channel {
            BoundsChannel::Derived => &self.derived,
            BoundsChannel::Nominal => &self.nominal,
        }
    }

    pub fn bounds(&self, channel: BoundsChannel, k: u64) -> MomentBounds {
        self.rule(channel).at(k)
    }

    /// Truncated value of `sum_k alpha_k (sqrt(a_k) + sqrt(c_k))` up to
    /// `k_max`, an integral tail bound past the truncation, and the verdict.
    pub fn check_summability(&self, channel: BoundsChannel, k_max: u64) -> SummabilityReport {
        assert!(k_max >= 1, "k_max must be >= 1");
        let rule = self.rule(channel);
        let sqrt_a = rule.a.sqrt_law();
        let sqrt_c = rule.c.sqrt_law();

        let mut sum = 0.0;
        for k in 0..=k_max {
            sum += self.stepsize(k) * (sqrt_a.at(k) + sqrt_c.at(k));
        }
        let tail_a = power_law_tail(&sqrt_a, k_max).map(|t| t * self.alpha);
        let tail_c = power_law_tail(&sqrt_c, k_max).map(|t| t * self.alpha);
        let (tail_bound, verdict) = match (tail_a, tail_c) {
            (Some(ta), Some(tc)) => (Some(ta + tc), Verdict::Finite),
            _ => (None, Verdict::Infinite),
        };
        SummabilityReport { truncated_sum: sum, tail_bound, k_max, verdict }
    }

    /// Minimum of `alpha_k (1 - alpha_k b_k beta / 2)` over `k <= k_max`,
    /// plus the analytic limit of the expression. Passes when both are
    /// strictly positive.
    pub fn check_inf_condition(&self, channel: BoundsChannel, k_max: u64) -> InfConditionReport {
        assert!(k_max >= 1, "k_max must be >= 1");
        let rule = self.rule(channel);
        let mut min_value = f64::INFINITY;
        let mut argmin = 0;
        for k in 0..=k_max {
            let a = self.stepsize(k);
            let v = a * (1.0 - a * rule.b.at(k) * self.beta / 2.0);
            if v < min_value {
                min_value = v;
                argmin = k;
            }
        }
        // power-law b_k converges: to its coefficient when constant, to 0
        // when decaying
        let b_limit = if rule.b.exponent == 0.0 { rule.b.coef } else { 0.0 };
        let limit = self.alpha * (1.0 - self.alpha * b_limit * self.beta / 2.0);
        let passed = min_value > 0.0 && limit > 0.0;
        InfConditionReport { min_value, argmin_k: argmin, limit, k_max, passed }
    }

    /// Worst value over `k < k_max` of the three-factor product
    /// `sqrt(b_{k+1}/b_k) * (2 - alpha_k b_k beta) / (2 - alpha_{k+1} b_{k+1} beta)
    ///  * (1 + alpha_{k+1}^2 a_{k+1} beta / 2)`.
    ///
    /// Passes when every product lies in `(0, 1]`. Errors when some `b_k`
    /// vanishes, which makes the ratio undefined.
    pub fn check_monotone_ratio(
        &self,
        channel: BoundsChannel,
        k_max: u64,
    ) -> Result<RatioReport> {
        assert!(k_max >= 1, "k_max must be >= 1");
        let rule = self.rule(channel);
        let mut max_ratio = f64::NEG_INFINITY;
        let mut min_ratio = f64::INFINITY;
        let mut argmax = 0;
        let mut all_finite = true;
        for k in 0..k_max {
            let b0 = rule.b.at(k);
            let b1 = rule.b.at(k + 1);
            if b0 == 0.0 || b1 == 0.0 {
                return Err(Error::UndefinedRatio { k: if b0 == 0.0 { k } else { k + 1 } });
            }
            let a0 = self.stepsize(k);
            let a1 = self.stepsize(k + 1);
            let ratio = (b1 / b0).sqrt() * (2.0 - a0 * b0 * self.beta)
                / (2.0 - a1 * b1 * self.beta)
                * (1.0 + a1 * a1 * rule.a.at(k + 1) * self.beta / 2.0);
            if !ratio.is_finite() {
                all_finite = false;
                argmax = k;
                break;
            }
            if ratio > max_ratio {
                max_ratio = ratio;
                argmax = k;
            }
            min_ratio = min_ratio.min(ratio);
        }
        let passed = all_finite && min_ratio > 0.0 && max_ratio <= 1.0;
        Ok(RatioReport { max_ratio, min_ratio, argmax_k: argmax, k_max, passed })
    }

    /// Runs all three checks on one channel.
    pub fn check_all(&self, channel: BoundsChannel, k_max: u64) -> Result<ScheduleReport> {
        let summability = self.check_summability(channel, k_max);
        let inf_condition = self.check_inf_condition(channel, k_max);
        let monotone_ratio = self.check_monotone_ratio(channel, k_max)?;
        Ok(ScheduleReport { channel, summability, inf_condition, monotone_ratio })
    }

    /// Cheap gate used by the engine before a run: the positivity condition
    /// on the derived channel, scanning a capped prefix plus the analytic
    /// limit (the power-law sequences are monotone, so this is exact).
    pub fn gate(&self, k_max: u64) -> Result<()> {
        let report = self.check_inf_condition(BoundsChannel::Derived, k_max.clamp(1, 10_000));
        if report.passed {
            Ok(())
        } else {
            Err(Error::ScheduleRejected { min_value: report.min_value.min(report.limit) })
        }
    }
}

/// Integral tail bound of `sum_{k > k_max} coef (k+1)^(-p)`; `None` when the
/// tail diverges.
fn power_law_tail(law: &PowerLaw, k_max: u64) -> Option<f64> {
    if law.is_zero() {
        return Some(0.0);
    }
    if law.exponent > 1.0 {
        let p = law.exponent;
        Some(law.coef * ((k_max + 1) as f64).powf(1.0 - p) / (p - 1.0))
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Finite,
    Infinite,
    /// Reserved for sequences with no recognized closed form; the power-law
    /// channels shipped here always resolve to finite or infinite.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummabilityReport {
    pub truncated_sum: f64,
    /// Analytic bound on everything past the truncation; `None` when the
    /// series diverges.
    pub tail_bound: Option<f64>,
    pub k_max: u64,
    pub verdict: Verdict,
}

impl SummabilityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Finite
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfConditionReport {
    pub min_value: f64,
    pub argmin_k: u64,
    /// Analytic limit of `alpha_k (1 - alpha_k b_k beta / 2)`.
    pub limit: f64,
    pub k_max: u64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub argmax_k: u64,
    pub k_max: u64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub channel: BoundsChannel,
    pub summability: SummabilityReport,
    pub inf_condition: InfConditionReport,
    pub monotone_ratio: RatioReport,
}

impl ScheduleReport {
    pub fn all_passed(&self) -> bool {
        self.summability.passed() && self.inf_condition.passed && self.monotone_ratio.passed
    }
}
