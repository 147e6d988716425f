//! Convergence diagnostics: limit-point classification, Monte-Carlo probes
//! of the per-iteration descent event, and local exponent estimation.
//!
//! The probes are retrospective: they regenerate the iteration-`k` noise law
//! at a recorded state through an independent stream, instead of instrumenting
//! the engine loop. The limit value `F_inf` that the descent event refers to
//! is not constructively available, so callers estimate it by the terminal
//! objective value of a converged run and treat the terminal-window spread as
//! its uncertainty.

use serde::{Deserialize, Serialize};

use crate::engine::{norm, TrajectoryRecord};
use crate::noise::NoiseOracle;
use crate::objective::{CriticalComponent, CriticalLabel, ObjectiveSpec};
use crate::rng::{domain, probe_stream, CounterRng};
use crate::schedule::{BoundsChannel, StepSchedule};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Limit classification
// ---------------------------------------------------------------------------

/// Nature of the limit point of one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitLabel {
    Saddle,
    LocalMax,
    LocalMin,
    GlobalMin,
    /// Settled, but on no cataloged component.
    None,
    /// Numeric failure, or the terminal window never settled.
    NonConvergence,
}

impl From<CriticalLabel> for LimitLabel {
    fn from(l: CriticalLabel) -> Self {
        match l {
            CriticalLabel::Saddle => LimitLabel::Saddle,
            CriticalLabel::LocalMax => LimitLabel::LocalMax,
            CriticalLabel::LocalMin => LimitLabel::LocalMin,
            CriticalLabel::GlobalMin => LimitLabel::GlobalMin,
        }
    }
}

impl std::fmt::Display for LimitLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LimitLabel::Saddle => "saddle",
            LimitLabel::LocalMax => "local-max",
            LimitLabel::LocalMin => "local-min",
            LimitLabel::GlobalMin => "global-min",
            LimitLabel::None => "none",
            LimitLabel::NonConvergence => "non-convergence",
        })
    }
}

/// Did the objective approach its limit from above?
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AboveLimit {
    /// `F(x_k) > F_inf` at every stored iterate before the terminal one.
    Yes,
    /// Never below, but equality occurs at some stored iterates.
    YesExceptEquality,
    /// Some stored value lies strictly below the terminal value.
    No,
}

impl std::fmt::Display for AboveLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AboveLimit::Yes => "yes",
            AboveLimit::YesExceptEquality => "yes-except-equality",
            AboveLimit::No => "no",
        })
    }
}

/// Classification of one trajectory record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitClassification {
    pub label: LimitLabel,
    /// Distance from the final iterate to the matched component; for `None`
    /// the distance to the nearest component; NaN for non-convergence.
    pub distance: f64,
    /// `None` when the verdict is undefined (non-convergence).
    pub above_limit: Option<AboveLimit>,
    /// Spread of the terminal window (its diameter per coordinate, maxed).
    pub window_diameter: f64,
    /// Whether the record was decimated past the dense prefix, in which case
    /// the above-limit verdict is based on sampled iterates only.
    pub sampled_verdict: bool,
}

/// Classifies the limit of a run from its dense terminal window.
///
/// Non-convergence is declared on numeric failure or when the window
/// diameter exceeds `tol_dist`. Otherwise the window mean is matched against
/// the catalog (nearest component within `tol_dist`), gated by
/// `|grad F(mean)| < tol_grad`.
///
/// The above-limit verdict compares every stored objective value before the
/// terminal iterate against `F_inf := final_f`.
pub fn classify_limit(
    rec: &TrajectoryRecord,
    f: &ObjectiveSpec,
    tol_dist: f64,
    tol_grad: f64,
) -> LimitClassification {
    assert_eq!(f.dim(), 1, "limit classification is defined for the 1-d catalog");
    assert!(tol_dist > 0.0 && tol_grad > 0.0);
    let sampled_verdict = rec.config.record_stride > 1 && rec.final_k > crate::engine::DENSE_PREFIX;

    if rec.numeric_failure {
        return LimitClassification {
            label: LimitLabel::NonConvergence,
            distance: f64::NAN,
            above_limit: None,
            window_diameter: f64::NAN,
            sampled_verdict,
        };
    }

    let window = rec.terminal_window();
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for s in window {
        lo = lo.min(s.x[0]);
        hi = hi.max(s.x[0]);
        sum += s.x[0];
    }
    let diameter = hi - lo;
    if diameter > tol_dist {
        return LimitClassification {
            label: LimitLabel::NonConvergence,
            distance: f64::NAN,
            above_limit: None,
            window_diameter: diameter,
            sampled_verdict,
        };
    }
    let mean = sum / window.len() as f64;

    let f_inf = rec.final_f;
    let mut saw_equal = false;
    let mut saw_below = false;
    for s in &rec.samples {
        if s.k == rec.final_k {
            continue;
        }
        if s.f < f_inf {
            saw_below = true;
        } else if s.f == f_inf {
            saw_equal = true;
        }
    }
    let above = if saw_below {
        AboveLimit::No
    } else if saw_equal {
        AboveLimit::YesExceptEquality
    } else {
        AboveLimit::Yes
    };

    let grad_ok = f.gradient1(mean).map(|g| g.abs() < tol_grad).unwrap_or(false);
    let (label, distance) = match f.classify_point(mean, tol_dist) {
        Some(c) if grad_ok => (LimitLabel::from(c.label), c.distance(rec.final_x[0])),
        _ => {
            let nearest = f
                .catalog()
                .iter()
                .map(|c| c.distance(rec.final_x[0]))
                .fold(f64::NAN, f64::min);
            (LimitLabel::None, nearest)
        }
    };

    LimitClassification {
        label,
        distance,
        above_limit: Some(above),
        window_diameter: diameter,
        sampled_verdict,
    }
}

// ---------------------------------------------------------------------------
// Conditional expectation probes
// ---------------------------------------------------------------------------

/// A Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionalValue {
    pub mean: f64,
    pub std_error: f64,
    pub n_draws: usize,
}

/// Estimates `E_k[ F(x - alpha_k g) - F_min ]` with fresh draws `g` from the
/// oracle's iteration-`k` law at the state `x`.
pub fn estimate_conditional_value(
    x: &[f64],
    k: u64,
    f: &ObjectiveSpec,
    oracle: &NoiseOracle,
    schedule: &StepSchedule,
    n_draws: usize,
    probe_seed: u64,
) -> Result<ConditionalValue> {
    if n_draws < 1000 {
        return Err(Error::InvalidParameter("need at least 1000 draws".into()));
    }
    let dim = f.dim();
    let mut grad = vec![0.0; dim];
    f.gradient(x, &mut grad)?;
    let f_gap = f.evaluate(x)? - f.f_min();
    let alpha = schedule.stepsize(k);

    let mut rng = probe_stream(probe_seed, k);
    let mut g = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..n_draws {
        oracle.sample_into(k, &grad, f_gap, &mut rng, &mut g)?;
        for ((n, xi), gi) in next.iter_mut().zip(x).zip(&g) {
            *n = xi - alpha * gi;
        }
        let val = f.evaluate(&next)? - f.f_min();
        let delta = val - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (val - mean);
    }
    let std_error = if n_draws > 1 {
        (m2 / (n_draws - 1) as f64 / n_draws as f64).sqrt()
    } else {
        0.0
    };
    Ok(ConditionalValue { mean, std_error, n_draws })
}

/// One probe of the per-iteration descent event at a recorded state.
///
/// With bounds `(a_k, b_k, c_k)` from the selected channel and stepsize
/// `alpha_k`, the probe reports
///
/// ```text
/// lhs        = | (F_inf - F_min) - 2/(2 + alpha_k^2 a_k beta) E_k[F(x_{k+1}) - F_min]
///               + alpha_k^2 c_k beta / 2 |
/// rhs_unit   = (1 - alpha_k b_k beta / 2) ||grad F(x_k)||^2
/// gamma_required = lhs / rhs_unit
/// ```
///
/// The event holds at level `gamma` iff `F_inf < F(x_k)` and
/// `gamma_required <= gamma`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiProbeResult {
    pub k: u64,
    pub x: Vec<f64>,
    pub f_at_x: f64,
    pub e_cond: f64,
    pub e_cond_stderr: f64,
    pub lhs: f64,
    pub rhs_unit: f64,
    /// Minimal event level at this iteration; infinite when the gradient
    /// term vanishes while the left side does not.
    pub gamma_required: f64,
    /// The strict inequality `F_inf < F(x_k)` fails, so the event is void at
    /// this iteration.
    pub event_void: bool,
}

/// Probes the descent event at each of `probe_ks` (which must be stored in
/// the record). `f_inf` is the caller's estimate of the limit value,
/// normally the terminal objective value of the run.
// the event is defined by the strict inequality F_inf < F(x_k); its literal
// negation (true for incomparable values too) is the void condition
#[allow(clippy::neg_cmp_op_on_partial_ord)]
#[allow(clippy::too_many_arguments)]
pub fn xi_probe(
    rec: &TrajectoryRecord,
    probe_ks: &[u64],
    f: &ObjectiveSpec,
    oracle: &NoiseOracle,
    schedule: &StepSchedule,
    channel: BoundsChannel,
    f_inf: f64,
    n_draws: usize,
    probe_seed: u64,
) -> Result<Vec<XiProbeResult>> {
    let beta = schedule.beta();
    let f_min = f.f_min();
    let mut out = Vec::with_capacity(probe_ks.len());
    for &k in probe_ks {
        let sample = rec.sample_at(k).ok_or(Error::MissingProbeState(k))?;
        let cv = estimate_conditional_value(&sample.x, k, f, oracle, schedule, n_draws, probe_seed)?;
        let b = schedule.bounds(channel, k);
        let alpha = schedule.stepsize(k);
        let lhs = ((f_inf - f_min) - 2.0 / (2.0 + alpha * alpha * b.a * beta) * cv.mean
            + alpha * alpha * b.c * beta / 2.0)
            .abs();
        let grad_sq = sample.grad_norm * sample.grad_norm;
        let rhs_unit = (1.0 - alpha * b.b * beta / 2.0) * grad_sq;
        let gamma_required = if rhs_unit > 0.0 {
            lhs / rhs_unit
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        out.push(XiProbeResult {
            k,
            x: sample.x.clone(),
            f_at_x: sample.f,
            e_cond: cv.mean,
            e_cond_stderr: cv.std_error,
            lhs,
            rhs_unit,
            gamma_required,
            event_void: !(f_inf < sample.f),
        });
    }
    Ok(out)
}

/// Outcome of the conditional descent inequality check at one state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescentReport {
    pub e_cond: f64,
    pub std_error: f64,
    /// `(1 + alpha^2 a beta / 2) gap - alpha (1 - alpha b beta / 2) ||grad||^2
    ///  + alpha^2 c beta / 2`
    pub bound: f64,
    /// `bound - e_cond`; negative means the inequality is violated.
    pub margin: f64,
    pub passed: bool,
}

/// Verifies the one-step conditional descent inequality
/// `E_k[F(x_{k+1}) - F_min] <= bound` within three standard errors.
#[allow(clippy::too_many_arguments)]
pub fn check_conditional_descent(
    x: &[f64],
    k: u64,
    f: &ObjectiveSpec,
    oracle: &NoiseOracle,
    schedule: &StepSchedule,
    channel: BoundsChannel,
    n_draws: usize,
    probe_seed: u64,
) -> Result<DescentReport> {
    let dim = f.dim();
    let mut grad = vec![0.0; dim];
    f.gradient(x, &mut grad)?;
    let gap = f.evaluate(x)? - f.f_min();
    let grad_sq = {
        let n = norm(&grad);
        n * n
    };
    let cv = estimate_conditional_value(x, k, f, oracle, schedule, n_draws, probe_seed)?;
    let b = schedule.bounds(channel, k);
    let alpha = schedule.stepsize(k);
    let beta = schedule.beta();
    let bound = (1.0 + alpha * alpha * b.a * beta / 2.0) * gap
        - alpha * (1.0 - alpha * b.b * beta / 2.0) * grad_sq
        + alpha * alpha * b.c * beta / 2.0;
    let margin = bound - cv.mean;
    let passed = margin >= -3.0 * cv.std_error;
    Ok(DescentReport { e_cond: cv.mean, std_error: cv.std_error, bound, margin, passed })
}

// ---------------------------------------------------------------------------
// Local exponent estimation
// ---------------------------------------------------------------------------

/// Which side of a component's region to sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSide {
    /// Points `lo - delta`, approaching the region from below.
    Below,
    /// Points `hi + delta`, approaching from above.
    Above,
}

impl std::fmt::Display for SampleSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SampleSide::Below => "below",
            SampleSide::Above => "above",
        })
    }
}

/// One usable sample of the exponent fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentSample {
    pub x: f64,
    pub gap: f64,
    pub grad_norm: f64,
}

/// Least-squares fit of `log ||grad F||` against `log |F - F*|` near a
/// critical component.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    /// Fitted slope: `||grad F|| ~ C |F - F*|^theta`.
    pub theta_hat: f64,
    /// Fitted `log C`.
    pub intercept: f64,
    pub r_squared: f64,
    pub n_used: usize,
    pub side: SampleSide,
    pub radius: f64,
    pub samples: Vec<ExponentSample>,
}

/// Estimates the local power-law exponent of the gradient inequality near
/// `component`, sampling one side of its region at distances up to `radius`.
///
/// The regression uses the absolute gap `|F(x) - F*|`: minima are approached
/// from above in objective value, a local maximizer from below; the power law
/// is the same either way. Samples where the gap or the gradient vanish
/// exactly carry no slope information and are dropped; if everything is
/// dropped (sampling landed inside a flat region) the estimator reports
/// [`Error::NoExponentData`] rather than a fake fit.
pub fn estimate_lojasiewicz_exponent(
    f: &ObjectiveSpec,
    component: &CriticalComponent,
    side: SampleSide,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ExponentFit> {
    assert_eq!(f.dim(), 1, "exponent estimation is defined for 1-d objectives");
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    if n_samples < 8 {
        return Err(Error::InvalidParameter("need at least 8 samples".into()));
    }
    let mut rng = CounterRng::from_path(seed, &[domain::SAMPLING]);
    let mut samples = Vec::with_capacity(n_samples);
    let mut ts = Vec::with_capacity(n_samples);
    let mut ys = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let delta = rng.uniform(0.0, radius);
        let x = match side {
            SampleSide::Below => component.lo - delta,
            SampleSide::Above => component.hi + delta,
        };
        let gap = (f.evaluate1(x)? - component.value).abs();
        let grad = f.gradient1(x)?.abs();
        if gap == 0.0 || grad == 0.0 {
            continue;
        }
        samples.push(ExponentSample { x, gap, grad_norm: grad });
        ts.push(gap.ln());
        ys.push(grad.ln());
    }
    if ts.len() < 2 {
        return Err(Error::NoExponentData);
    }
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in ts.iter().zip(&ys) {
        let dt = t - t_mean;
        let dy = y - y_mean;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::NoExponentData);
    }
    let theta_hat = sty / stt;
    let intercept = y_mean - theta_hat * t_mean;
    let r_squared = if syy == 0.0 { 1.0 } else { (sty * sty) / (stt * syy) };
    Ok(ExponentFit {
        theta_hat,
        intercept,
        r_squared,
        n_used: ts.len(),
        side,
        radius,
        samples,
    })
}
