//! The SGD recursion and its trajectory records.
//!
//! `run_trajectory` iterates `x_{k+1} = x_k - alpha_k g_k` with `g_k` drawn
//! from the oracle's substream for iteration `k`. Everything is deterministic
//! in `(seed, config, oracle, schedule)`: the noise stream for iteration `k`
//! is keyed by `(seed, k)` and never advanced across iterations, so a
//! diagnostics probe can regenerate the exact law of any recorded iteration
//! later. Ensembles run members on independent seeds (`master + i`) and are
//! bit-identical no matter how many worker threads execute them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::noise::NoiseOracle;
use crate::objective::ObjectiveSpec;
use crate::rng::trajectory_stream;
use crate::schedule::StepSchedule;
use crate::{Error, Result};

/// Iterations stored densely at the head of every record.
pub const DENSE_PREFIX: u64 = 10_000;
/// Iterations stored densely at the tail, used for limit classification.
pub const TERMINAL_WINDOW: u64 = 1_000;

/// Configuration of a single seeded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Initial iterate.
    pub x0: Vec<f64>,
    /// Iteration budget.
    pub k_max: u64,
    /// Master seed; ensemble member `i` runs on `seed + i`.
    pub seed: u64,
    /// Store every `record_stride`-th iterate past the dense prefix. The
    /// first and last iterates are always stored.
    pub record_stride: u64,
    /// Optional early stop: halt once the gradient norm stays below this for
    /// `stop_window` consecutive iterations. Off by default, so fixed-horizon
    /// runs stay comparable.
    pub stop_grad_tol: Option<f64>,
    pub stop_window: u64,
    /// Run even if the schedule fails the positivity gate.
    pub force: bool,
}

impl RunConfig {
    pub fn new(x0: Vec<f64>, k_max: u64, seed: u64) -> Self {
        RunConfig {
            x0,
            k_max,
            seed,
            record_stride: 1_000,
            stop_grad_tol: None,
            stop_window: 100,
            force: false,
        }
    }

    fn validate(&self, f: &ObjectiveSpec) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be >= 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        if self.stop_window == 0 {
            return Err(Error::InvalidParameter("stop_window must be >= 1".into()));
        }
        if self.x0.len() != f.dim() {
            return Err(Error::DimensionMismatch { expected: f.dim(), got: self.x0.len() });
        }
        if let Some(i) = self.x0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(i));
        }
        Ok(())
    }
}

/// One stored point of a trajectory. `f` and `grad_norm` are computed from
/// `x` at store time, never carried forward, so they cannot drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub k: u64,
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
}

/// The record of one seeded run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub config: RunConfig,
    /// Decimated samples: dense up to [`DENSE_PREFIX`], every
    /// `record_stride`-th iterate after that, and the last
    /// [`TERMINAL_WINDOW`] iterations densely. Sorted by `k`, no duplicates.
    pub samples: Vec<TrajectorySample>,
    /// Index of the last iteration reached (equals `k_max` unless the run
    /// stopped early or failed numerically).
    pub final_k: u64,
    pub final_x: Vec<f64>,
    /// Objective at the final iterate; NaN after a numeric failure.
    pub final_f: f64,
    pub final_grad_norm: f64,
    /// Set when the early-stop rule fired, with the stopping iteration.
    pub stopped_early: Option<u64>,
    /// Set when an iterate became non-finite; the record is truncated at the
    /// last finite sample and `final_x` holds the offending iterate.
    pub numeric_failure: bool,
}

impl TrajectoryRecord {
    /// Samples belonging to the dense terminal window.
    pub fn terminal_window(&self) -> &[TrajectorySample] {
        let start_k = self.final_k.saturating_sub(TERMINAL_WINDOW - 1);
        let idx = self.samples.partition_point(|s| s.k < start_k);
        &self.samples[idx..]
    }

    /// The stored sample at iteration `k`, if any.
    pub fn sample_at(&self, k: u64) -> Option<&TrajectorySample> {
        let idx = self.samples.partition_point(|s| s.k < k);
        self.samples.get(idx).filter(|s| s.k == k)
    }

    /// Smallest stored gradient norm (a sound upper bound on the true
    /// running minimum).
    pub fn min_recorded_grad_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.grad_norm).fold(f64::INFINITY, f64::min)
    }
}

struct Recorder {
    samples: Vec<TrajectorySample>,
    window: std::collections::VecDeque<TrajectorySample>,
    stride: u64,
}

impl Recorder {
    fn new(stride: u64) -> Self {
        Recorder {
            samples: Vec::new(),
            window: std::collections::VecDeque::with_capacity(TERMINAL_WINDOW as usize),
            stride,
        }
    }

    fn visit(&mut self, k: u64, x: &[f64], f: f64, grad_norm: f64) {
        if k <= DENSE_PREFIX || k.is_multiple_of(self.stride) {
            self.samples.push(TrajectorySample { k, x: x.to_vec(), f, grad_norm });
        }
        // ring buffer of the last TERMINAL_WINDOW iterates; recycle the
        // evicted allocation instead of reallocating every iteration
        if self.window.len() == TERMINAL_WINDOW as usize {
            let mut old = self.window.pop_front().expect("window is non-empty");
            old.k = k;
            old.x.clear();
            old.x.extend_from_slice(x);
            old.f = f;
            old.grad_norm = grad_norm;
            self.window.push_back(old);
        } else {
            self.window.push_back(TrajectorySample { k, x: x.to_vec(), f, grad_norm });
        }
    }

    /// Merge the dense tail into the decimated samples.
    fn finish(self) -> Vec<TrajectorySample> {
        let Recorder { mut samples, window, .. } = self;
        for s in window {
            match samples.binary_search_by_key(&s.k, |m| m.k) {
                Ok(_) => {}
                Err(pos) => samples.insert(pos, s),
            }
        }
        samples
    }
}

/// Runs one seeded trajectory.
///
/// Unless `cfg.force` is set, the schedule must pass the positivity gate on
/// the derived channel. A non-finite iterate does not abort: the record is
/// truncated, `numeric_failure` is set, and the caller decides what the
/// outcome means.
pub fn run_trajectory(
    cfg: &RunConfig,
    f: &ObjectiveSpec,
    oracle: &NoiseOracle,
    schedule: &StepSchedule,
) -> Result<TrajectoryRecord> {
    cfg.validate(f)?;
    if !cfg.force {
        schedule.gate(cfg.k_max)?;
    }
    run_trajectory_unchecked(cfg, f, oracle, schedule)
}

fn run_trajectory_unchecked(
    cfg: &RunConfig,
    f: &ObjectiveSpec,
    oracle: &NoiseOracle,
    schedule: &StepSchedule,
) -> Result<TrajectoryRecord> {
    let dim = f.dim();
    let f_min = f.f_min();
    let mut x = cfg.x0.clone();
    let mut grad = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut recorder = Recorder::new(cfg.record_stride);

    let mut below_tol_streak: u64 = 0;
    let mut stopped_early = None;
    let mut numeric_failure = false;
    let mut final_k = cfg.k_max;
    let mut bad_x: Option<Vec<f64>> = None;

    let mut k: u64 = 0;
    loop {
        let f_k = f.evaluate(&x)?;
        f.gradient(&x, &mut grad)?;
        let grad_norm = norm(&grad);
        recorder.visit(k, &x, f_k, grad_norm);

        if let Some(tol) = cfg.stop_grad_tol {
            if grad_norm < tol {
                below_tol_streak += 1;
                if below_tol_streak >= cfg.stop_window {
                    stopped_early = Some(k);
                    final_k = k;
                    break;
                }
            } else {
                below_tol_streak = 0;
            }
        }
        if k == cfg.k_max {
            break;
        }

        let mut rng = trajectory_stream(cfg.seed, k);
        oracle.sample_into(k, &grad, f_k - f_min, &mut rng, &mut g)?;
        let alpha = schedule.stepsize(k);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= alpha * gi;
        }
        k += 1;

        if x.iter().any(|v| !v.is_finite()) {
            numeric_failure = true;
            final_k = k - 1;
            bad_x = Some(x.clone());
            break;
        }
    }

    let samples = recorder.finish();
    let last = samples.last().expect("at least the initial sample is stored");
    debug_assert_eq!(last.k, final_k);
    let (final_x, final_f, final_grad_norm) = match bad_x {
        Some(bx) => (bx, f64::NAN, f64::NAN),
        None => (last.x.clone(), last.f, last.grad_norm),
    };

    Ok(TrajectoryRecord {
        seed: cfg.seed,
        config: cfg.clone(),
        samples,
        final_k,
        final_x,
        final_f,
        final_grad_norm,
        stopped_early,
        numeric_failure,
    })
}

/// Runs `n_seeds` independent trajectories on seeds `master, master+1, ...`.
///
/// Members execute in parallel (rayon; honors `RAYON_NUM_THREADS`), each on
/// its own noise streams. Output order matches seed order regardless of the
/// worker schedule, and per-member numeric failures are reported in the
/// records rather than aborting the ensemble.
pub fn run_ensemble(
    cfg_template: &RunConfig,
    f: &ObjectiveSpec,
    oracle: &NoiseOracle,
    schedule: &StepSchedule,
    n_seeds: u64,
) -> Result<Vec<TrajectoryRecord>> {
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("n_seeds must be >= 1".into()));
    }
    cfg_template.validate(f)?;
    if !cfg_template.force {
        schedule.gate(cfg_template.k_max)?;
    }
    (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut cfg = cfg_template.clone();
            cfg.seed = cfg_template.seed.wrapping_add(i);
            run_trajectory_unchecked(&cfg, f, oracle, schedule)
        })
        .collect()
}

/// Euclidean norm; the one-dimensional case takes the exact absolute value,
/// avoiding the squaring round-trip (which underflows for tiny gradients).
#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{cosine_staircase, quadratic_bowl};
    use crate::schedule::matched_stepsize;
    use std::f64::consts::PI;

    fn mult_setup(b: f64) -> (ObjectiveSpec, NoiseOracle, StepSchedule) {
        let f = cosine_staircase();
        let o = NoiseOracle::multiplicative(b).unwrap();
        let s = StepSchedule::for_oracle(matched_stepsize(b, f.beta()), f.beta(), &o).unwrap();
        (f, o, s)
    }

    #[test]
    fn exact_descent_reaches_the_global_plateau() {
        let f = cosine_staircase();
        let o = NoiseOracle::exact();
        let s = StepSchedule::for_oracle(0.05, f.beta(), &o).unwrap();
        let cfg = RunConfig::new(vec![1.0], 10_000, 0);
        let rec = run_trajectory(&cfg, &f, &o, &s).unwrap();
        // the deterministic path creeps onto the plateau edge from below and
        // stalls within rounding distance of pi
        let xf = rec.final_x[0];
        assert!(xf > PI - 1e-9 && xf < 3.0 * PI, "final x = {xf}");
        // descent: with alpha <= 1/beta the objective never increases
        for pair in rec.samples.windows(2) {
            assert!(pair[1].f <= pair[0].f + 1e-12, "ascent at k = {}", pair[1].k);
        }
    }

    #[test]
    fn multiplicative_plateau_is_absorbing() {
        let (f, o, s) = mult_setup(10.0);
        let cfg = RunConfig::new(vec![2.0 * PI], 5_000, 7);
        let rec = run_trajectory(&cfg, &f, &o, &s).unwrap();
        for sample in &rec.samples {
            assert_eq!(sample.x[0], 2.0 * PI);
        }
        assert_eq!(rec.final_x[0], 2.0 * PI);
    }

    #[test]
    fn multiplicative_from_the_left_contracts_to_the_saddle() {
        // the update factor 1 - 0.1 e1 stays in [0.3615, 1.4385], so the
        // sign of the iterate never flips and |x| contracts on average
        let (f, o, s) = mult_setup(10.0);
        let cfg = RunConfig::new(vec![-0.5], 1_000, 3);
        let rec = run_trajectory(&cfg, &f, &o, &s).unwrap();
        for sample in &rec.samples {
            assert!(sample.x[0] < 0.0, "iterate crossed zero at k = {}", sample.k);
        }
        assert!(rec.final_x[0].abs() < 1e-3, "final x = {}", rec.final_x[0]);
    }

    #[test]
    fn record_samples_are_consistent_and_complete() {
        let (f, o, s) = mult_setup(10.0);
        let mut cfg = RunConfig::new(vec![1.0], 30_000, 11);
        cfg.record_stride = 4_000;
        let rec = run_trajectory(&cfg, &f, &o, &s).unwrap();

        assert_eq!(rec.samples.first().unwrap().k, 0);
        assert_eq!(rec.samples.first().unwrap().x, vec![1.0]);
        assert_eq!(rec.samples.last().unwrap().k, 30_000);
        assert_eq!(rec.final_k, 30_000);

        // stored f and grad_norm recompute exactly from the stored iterate
        for sample in &rec.samples {
            assert_eq!(sample.f, f.evaluate(&sample.x).unwrap());
            assert_eq!(sample.grad_norm, f.gradient1(sample.x[0]).unwrap().abs());
        }

        // decimation pattern: dense head, strided middle, dense tail
        for k in 0..=DENSE_PREFIX {
            assert!(rec.sample_at(k).is_some(), "missing dense sample {k}");
        }
        assert!(rec.sample_at(16_000).is_some());
        assert!(rec.sample_at(16_001).is_none());
        for k in (30_000 - TERMINAL_WINDOW + 1)..=30_000 {
            assert!(rec.sample_at(k).is_some(), "missing window sample {k}");
        }
        assert_eq!(rec.terminal_window().len() as u64, TERMINAL_WINDOW);
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let (f, o, s) = mult_setup(10.0);
        let cfg = RunConfig::new(vec![1.0], 20_000, 99);
        let a = run_trajectory(&cfg, &f, &o, &s).unwrap();
        let b = run_trajectory(&cfg, &f, &o, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ensemble_is_order_stable_and_thread_count_independent() {
        let (f, o, s) = mult_setup(10.0);
        let cfg = RunConfig::new(vec![1.0], 5_000, 1234);
        let par = run_ensemble(&cfg, &f, &o, &s, 8).unwrap();

        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let seq = pool.install(|| run_ensemble(&cfg, &f, &o, &s, 8)).unwrap();
        assert_eq!(par, seq);

        for (i, rec) in par.iter().enumerate() {
            assert_eq!(rec.seed, 1234 + i as u64);
        }
    }

    #[test]
    fn ensemble_members_match_single_runs_on_the_same_seed() {
        let (f, o, s) = mult_setup(10.0);
        let cfg = RunConfig::new(vec![-0.5], 2_000, 500);
        let ens = run_ensemble(&cfg, &f, &o, &s, 3).unwrap();
        for (i, member) in ens.iter().enumerate() {
            let mut single = cfg.clone();
            single.seed = 500 + i as u64;
            let rec = run_trajectory(&single, &f, &o, &s).unwrap();
            assert_eq!(*member, rec);
        }
    }

    #[test]
    fn exact_ensemble_collapses_to_one_path() {
        let f = cosine_staircase();
        let o = NoiseOracle::exact();
        let s = StepSchedule::for_oracle(0.05, f.beta(), &o).unwrap();
        let cfg = RunConfig::new(vec![1.0], 2_000, 42);
        let ens = run_ensemble(&cfg, &f, &o, &s, 16).unwrap();
        let reference = &ens[0];
        for rec in &ens[1..] {
            assert_eq!(rec.samples, reference.samples);
            assert_eq!(rec.final_x, reference.final_x);
        }
    }

    #[test]
    fn early_stop_fires_on_a_quiet_gradient() {
        let f = cosine_staircase();
        let o = NoiseOracle::exact();
        let s = StepSchedule::for_oracle(0.05, f.beta(), &o).unwrap();
        let mut cfg = RunConfig::new(vec![1.0], 1_000_000, 0);
        cfg.stop_grad_tol = Some(1e-9);
        cfg.stop_window = 10;
        let rec = run_trajectory(&cfg, &f, &o, &s).unwrap();
        let stop_k = rec.stopped_early.expect("should stop early");
        assert!(stop_k < 1_000_000);
        assert_eq!(rec.final_k, stop_k);
        assert!(rec.final_grad_norm < 1e-9);
    }

    #[test]
    fn diverging_run_sets_numeric_failure_instead_of_crashing() {
        // exact gradient on x^2 with a absurd stepsize: x_{k+1} = -19 x_k
        let f = quadratic_bowl();
        let o = NoiseOracle::exact();
        let s = StepSchedule::for_oracle(10.0, f.beta(), &o).unwrap();
        let mut cfg = RunConfig::new(vec![1.0], 10_000, 0);

        // without force the gate refuses this schedule
        assert!(matches!(
            run_trajectory(&cfg, &f, &o, &s),
            Err(Error::ScheduleRejected { .. })
        ));

        cfg.force = true;
        let rec = run_trajectory(&cfg, &f, &o, &s).unwrap();
        assert!(rec.numeric_failure);
        assert!(!rec.final_x[0].is_finite());
        assert!(rec.final_f.is_nan());
        assert!(rec.final_k < 10_000);
        // stored samples stay finite
        for sample in &rec.samples {
            assert!(sample.x[0].is_finite());
        }
    }

    #[test]
    fn zero_budget_is_rejected() {
        let (f, o, s) = mult_setup(10.0);
        let cfg = RunConfig::new(vec![1.0], 0, 0);
        assert!(run_trajectory(&cfg, &f, &o, &s).is_err());
    }
}
