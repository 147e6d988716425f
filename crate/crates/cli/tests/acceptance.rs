//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them all).
//!
//! The three full-scale experiment grids (100 seeds per cell at the default
//! 10^6-iteration budget) are computed once and shared across criteria.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use sgdlab_core::diagnostics::{
    classify_limit, estimate_conditional_value, estimate_lojasiewicz_exponent, AboveLimit,
    LimitLabel, SampleSide,
};
use sgdlab_core::engine::{run_ensemble, run_trajectory, RunConfig};
use sgdlab_core::noise::{verify_second_moment, verify_unbiasedness, NoiseOracle};
use sgdlab_core::objective::{cosine_staircase, CriticalLabel, ObjectiveSpec};
use sgdlab_core::rng::CounterRng;
use sgdlab_core::schedule::{
    matched_stepsize, BoundsChannel, BoundsRule, PowerLaw, StepSchedule,
};

const N_SEEDS: u64 = 100;
const K_MAX: u64 = 1_000_000;
const TOL_DIST: f64 = 1e-3;
const TOL_GRAD: f64 = 1e-4;
const EPS_EXP: f64 = 0.1;

fn x0_grid() -> [f64; 3] {
    [-0.5, 1.0, 4.0 * PI + 1e-5]
}

struct RunSummary {
    label: LimitLabel,
    above: Option<AboveLimit>,
    final_x: f64,
    numeric_failure: bool,
    min_grad: f64,
    label_stable_under_halved_tol: bool,
}

struct Cell {
    x0: f64,
    level: f64,
    runs: Vec<RunSummary>,
}

impl Cell {
    fn majority(&self) -> (LimitLabel, usize) {
        let mut hist: BTreeMap<String, (LimitLabel, usize)> = BTreeMap::new();
        for r in &self.runs {
            hist.entry(r.label.to_string()).or_insert((r.label, 0)).1 += 1;
        }
        hist.into_values().max_by_key(|(_, n)| *n).expect("non-empty cell")
    }

    fn above_count(&self, verdict: AboveLimit) -> usize {
        self.runs.iter().filter(|r| r.above == Some(verdict)).count()
    }

    fn escapes_past_pi(&self) -> usize {
        self.runs.iter().filter(|r| r.final_x > PI).count()
    }

    fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.numeric_failure).count()
    }

    fn histogram(&self) -> String {
        let mut hist: BTreeMap<String, usize> = BTreeMap::new();
        for r in &self.runs {
            *hist.entry(r.label.to_string()).or_default() += 1;
        }
        hist.into_iter()
            .map(|(k, v)| format!("{k}:{v}"))
            .collect::<Vec<_>>()
            .join("|")
    }
}

struct Families {
    multiplicative: Vec<Cell>,
    additive: Vec<Cell>,
    value_dependent: Vec<Cell>,
    multiplicative_elapsed_s: f64,
}

fn run_cell(
    f: &ObjectiveSpec,
    oracle: &NoiseOracle,
    schedule: &StepSchedule,
    x0: f64,
    level: f64,
    master_seed: u64,
) -> Cell {
    let mut cfg = RunConfig::new(vec![x0], K_MAX, master_seed);
    cfg.record_stride = 1_000;
    let records = run_ensemble(&cfg, f, oracle, schedule, N_SEEDS).expect("ensemble runs");
    let runs = records
        .iter()
        .map(|rec| {
            let c = classify_limit(rec, f, TOL_DIST, TOL_GRAD);
            let halved = classify_limit(rec, f, TOL_DIST / 2.0, TOL_GRAD);
            RunSummary {
                label: c.label,
                above: c.above_limit,
                final_x: rec.final_x[0],
                numeric_failure: rec.numeric_failure,
                min_grad: rec.min_recorded_grad_norm(),
                label_stable_under_halved_tol: c.label == halved.label,
            }
        })
        .collect();
    Cell { x0, level, runs }
}

fn families() -> &'static Families {
    static FAMILIES: OnceLock<Families> = OnceLock::new();
    FAMILIES.get_or_init(|| {
        let f = cosine_staircase();
        let beta = f.beta();

        let started = Instant::now();
        let mut multiplicative = Vec::new();
        for level in [10.0, 1000.0] {
            let oracle = NoiseOracle::multiplicative(level).unwrap();
            let schedule =
                StepSchedule::for_oracle(matched_stepsize(level, beta), beta, &oracle).unwrap();
            for x0 in x0_grid() {
                multiplicative.push(run_cell(&f, &oracle, &schedule, x0, level, 7101));
            }
        }
        let multiplicative_elapsed_s = started.elapsed().as_secs_f64();

        let mut additive = Vec::new();
        for level in [10.0, 100.0] {
            let oracle = NoiseOracle::additive_gaussian(10.0, level, EPS_EXP).unwrap();
            let schedule =
                StepSchedule::for_oracle(matched_stepsize(10.0, beta), beta, &oracle).unwrap();
            for x0 in x0_grid() {
                additive.push(run_cell(&f, &oracle, &schedule, x0, level, 7102));
            }
        }

        let mut value_dependent = Vec::new();
        let alpha = matched_stepsize(3.0 * 10.0, beta);
        for level in [10.0, 100.0] {
            let oracle = NoiseOracle::value_dependent(10.0, level, EPS_EXP, alpha).unwrap();
            let schedule = StepSchedule::for_oracle(alpha, beta, &oracle).unwrap();
            for x0 in x0_grid() {
                value_dependent.push(run_cell(&f, &oracle, &schedule, x0, level, 7103));
            }
        }

        Families { multiplicative, additive, value_dependent, multiplicative_elapsed_s }
    })
}

fn cell(cells: &[Cell], x0: f64, level: f64) -> &Cell {
    cells
        .iter()
        .find(|c| (c.x0 - x0).abs() < 1e-12 && c.level == level)
        .expect("cell exists")
}

fn clause(failures: &mut Vec<String>, description: String, ok: bool) {
    if !ok {
        failures.push(description);
    }
}

fn finish(criterion: &str, failures: Vec<String>) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("{criterion}: {status}");
    for f in &failures {
        println!("  - {f}");
    }
    assert!(failures.is_empty(), "{criterion} failed:\n  {}", failures.join("\n  "));
}

#[test]
fn criterion_1_multiplicative_table() {
    let fam = &families().multiplicative;
    let mut fails = Vec::new();
    let x0_lm = x0_grid()[2];

    for c in fam.iter() {
        println!(
            "  multiplicative cell (x0 = {:.6}, b = {}): {}",
            c.x0,
            c.level,
            c.histogram()
        );
    }

    let c = cell(fam, -0.5, 10.0);
    let (label, n) = c.majority();
    clause(
        &mut fails,
        format!("cell (-0.5, b=10): expected majority saddle, got {label} {n}/100"),
        label == LimitLabel::Saddle && n > 50,
    );

    for level in [10.0, 1000.0] {
        let c = cell(fam, 1.0, level);
        let (label, n) = c.majority();
        clause(
            &mut fails,
            format!("cell (1, b={level}): expected majority global-min, got {label} {n}/100"),
            label == LimitLabel::GlobalMin && n > 50,
        );
    }

    let c = cell(fam, x0_lm, 10.0);
    let off = c
        .runs
        .iter()
        .filter(|r| !matches!(r.label, LimitLabel::GlobalMin | LimitLabel::LocalMin))
        .count();
    clause(
        &mut fails,
        format!(
            "cell (4pi+1e-5, b=10): expected labels within {{global-min, local-min}}, {} runs outside ({})",
            off,
            c.histogram()
        ),
        off == 0,
    );

    // The stated outcome of this cell (trapping at the local maximizer) is a
    // finite-horizon effect: under this sampling law the expected log-growth
    // of the offset from 4pi is +1.5e-4 per step for b = 1000, so every seed
    // escapes to the 5pi local minimizer around k ~ 6e4, far below the 1e6
    // budget. The clause is asserted as specified and is expected to fail;
    // rerun with k_max <= ~1e4 to observe the trapped regime.
    let c = cell(fam, x0_lm, 1000.0);
    let (label, n) = c.majority();
    clause(
        &mut fails,
        format!(
            "cell (4pi+1e-5, b=1000): expected majority local-max, got {label} {n}/100 ({})",
            c.histogram()
        ),
        label == LimitLabel::LocalMax && n > 50,
    );
    let no = c.above_count(AboveLimit::No);
    clause(
        &mut fails,
        format!("cell (4pi+1e-5, b=1000): expected above-limit 'no' majority, got {no}/100"),
        no > 50,
    );

    let elapsed = families().multiplicative_elapsed_s;
    println!("  table built in {elapsed:.1} s");
    clause(
        &mut fails,
        format!("runtime target: {elapsed:.1} s exceeds 300 s"),
        elapsed < 300.0,
    );

    finish("criterion 1 (multiplicative outcome table)", fails);
}

#[test]
fn criterion_2_additive_table() {
    let fam = &families().additive;
    let mut fails = Vec::new();

    for c in fam.iter() {
        println!(
            "  additive cell (x0 = {:.6}, sigma = {}): {} escapes={}",
            c.x0,
            c.level,
            c.histogram(),
            c.escapes_past_pi()
        );
    }

    for level in [10.0, 100.0] {
        for x0 in x0_grid() {
            let c = cell(fam, x0, level);
            let off = c
                .runs
                .iter()
                .filter(|r| !matches!(r.label, LimitLabel::GlobalMin | LimitLabel::LocalMin))
                .count();
            clause(
                &mut fails,
                format!(
                    "cell ({x0:.6}, sigma={level}): {off} non-minimizer labels ({})",
                    c.histogram()
                ),
                off == 0,
            );
            let (label, n) = c.majority();
            if x0 < 2.0 {
                clause(
                    &mut fails,
                    format!(
                        "cell ({x0:.6}, sigma={level}): expected majority global-min, got {label} {n}/100"
                    ),
                    label == LimitLabel::GlobalMin && n > 50,
                );
            } else {
                clause(
                    &mut fails,
                    format!(
                        "cell ({x0:.6}, sigma={level}): expected a minimizer majority, got {label}"
                    ),
                    matches!(label, LimitLabel::GlobalMin | LimitLabel::LocalMin) && n > 50,
                );
            }
        }
        let c = cell(fam, -0.5, level);
        let escapes = c.escapes_past_pi();
        clause(
            &mut fails,
            format!("cell (-0.5, sigma={level}): {escapes}/100 saddle escapes, need >= 90"),
            escapes >= 90,
        );
    }

    finish("criterion 2 (additive outcome table)", fails);
}

#[test]
fn criterion_3_value_dependent_table() {
    let fam = &families().value_dependent;
    let mut fails = Vec::new();
    let x0_lm = x0_grid()[2];

    for c in fam.iter() {
        println!(
            "  value-dependent cell (x0 = {:.6}, sigma = {}): {} failures={}",
            c.x0,
            c.level,
            c.histogram(),
            c.failures()
        );
    }

    // Expected to fail: under the specified law the value-noise step
    // amplitude alpha w_k = sqrt(3)/(k+1)^(1+eps) is stepsize-independent
    // and summable, and the multiplicative factor is contractive in log, so
    // iterates cannot reach the overflow scale and no seed fails
    // numerically. Asserted as specified.
    let c = cell(fam, 1.0, 100.0);
    let failures = c.failures();
    clause(
        &mut fails,
        format!("cell (1, sigma=100): expected >= 1 numeric failure, got {failures}/100"),
        failures >= 1,
    );

    let expect = [
        (-0.5, LimitLabel::GlobalMin),
        (1.0, LimitLabel::GlobalMin),
    ];
    for (x0, want) in expect {
        let c = cell(fam, x0, 10.0);
        let (label, n) = c.majority();
        clause(
            &mut fails,
            format!("cell ({x0}, sigma=10): expected majority {want}, got {label} {n}/100"),
            label == want && n > 50,
        );
    }
    let c = cell(fam, x0_lm, 10.0);
    let (label, n) = c.majority();
    clause(
        &mut fails,
        format!(
            "cell (4pi+1e-5, sigma=10): expected a minimizer majority, got {label} {n}/100 ({})",
            c.histogram()
        ),
        matches!(label, LimitLabel::GlobalMin | LimitLabel::LocalMin) && n > 50,
    );

    finish("criterion 3 (value-dependent outcome table)", fails);
}

#[test]
fn criterion_4_moment_validation() {
    let f = cosine_staircase();
    let beta = f.beta();
    let alpha_c = matched_stepsize(30.0, beta);
    let oracles = [
        ("exact", NoiseOracle::exact()),
        ("multiplicative", NoiseOracle::multiplicative(10.0).unwrap()),
        ("additive", NoiseOracle::additive_gaussian(10.0, 10.0, EPS_EXP).unwrap()),
        (
            "value-dependent",
            NoiseOracle::value_dependent(10.0, 10.0, EPS_EXP, alpha_c).unwrap(),
        ),
    ];
    let mut states = Vec::new();
    let mut rng = CounterRng::from_path(7400, &[1]);
    for _ in 0..20 {
        states.push(rng.uniform(-2.0, 20.0));
    }
    let ks = [0u64, 1, 10, 100, 1000];
    // two-sided normal level putting the interval at three standard errors
    let confidence = 0.997_300_203_936_739_8;

    let mut combos: Vec<(usize, f64, u64)> = Vec::new();
    for oi in 0..oracles.len() {
        for &x in &states {
            for &k in &ks {
                combos.push((oi, x, k));
            }
        }
    }

    let failures: Vec<String> = combos
        .par_iter()
        .filter_map(|&(oi, x, k)| {
            let (name, oracle) = &oracles[oi];
            let seed = 7500 + oi as u64;
            let u = verify_unbiasedness(oracle, &f, &[x], k, 100_000, confidence, seed)
                .expect("validator runs");
            if !u.passed {
                return Some(format!(
                    "{name} unbiasedness failed at x = {x:.4}, k = {k}: mean {:?} vs {:?} (se {:?})",
                    u.mean, u.grad_true, u.std_error
                ));
            }
            let m = verify_second_moment(oracle, &f, &[x], k, 100_000, None, seed + 40)
                .expect("validator runs");
            if !m.passed {
                return Some(format!(
                    "{name} second moment failed at x = {x:.4}, k = {k}: empirical {} vs bound {} (slack {})",
                    m.empirical, m.bound, m.slack
                ));
            }
            None
        })
        .collect();

    println!("  checked {} (oracle, state, k) combinations x 2 validators", combos.len());
    finish("criterion 4 (moment validation)", failures);
}

#[test]
fn criterion_5_schedule_checkers() {
    let f = cosine_staircase();
    let beta = f.beta();
    let mut fails = Vec::new();

    // multiplicative family, derived channel
    let o = NoiseOracle::multiplicative(10.0).unwrap();
    let s = StepSchedule::for_oracle(matched_stepsize(10.0, beta), beta, &o).unwrap();
    let report = s.check_all(BoundsChannel::Derived, K_MAX).unwrap();
    clause(
        &mut fails,
        format!("multiplicative derived channel should pass: {report:?}"),
        report.all_passed(),
    );
    let ratio_err = (report.monotone_ratio.max_ratio - 1.0).abs();
    clause(
        &mut fails,
        format!("constant alpha/b ratio should be 1.0 to 1e-12, off by {ratio_err:e}"),
        ratio_err <= 1e-12,
    );

    // additive family, derived channel
    let o = NoiseOracle::additive_gaussian(10.0, 10.0, EPS_EXP).unwrap();
    let s = StepSchedule::for_oracle(matched_stepsize(10.0, beta), beta, &o).unwrap();
    let report = s.check_all(BoundsChannel::Derived, K_MAX).unwrap();
    clause(
        &mut fails,
        format!("additive derived channel should pass: {report:?}"),
        report.all_passed(),
    );

    // constant-a counterexample: the third ratio factor exceeds one forever
    let counterexample = BoundsRule {
        a: PowerLaw::constant(0.5),
        b: PowerLaw::constant(10.0),
        c: PowerLaw::zero(),
    };
    let s = StepSchedule::from_rule(0.05, beta, counterexample).unwrap();
    let ratio = s.check_monotone_ratio(BoundsChannel::Derived, 10_000).unwrap();
    clause(
        &mut fails,
        format!(
            "constant-a counterexample should fail the ratio condition (max {})",
            ratio.max_ratio
        ),
        !ratio.passed && ratio.max_ratio > 1.0,
    );

    finish("criterion 5 (schedule condition checkers)", fails);
}

#[test]
fn criterion_6_conditional_value_closed_form() {
    let f = cosine_staircase();
    let o = NoiseOracle::multiplicative(10.0).unwrap();
    let s = StepSchedule::for_oracle(0.05, f.beta(), &o).unwrap();
    // E[(1 - 0.1 e1)^2]/4 + 1 - F_min on the quadratic branch
    let expected = 0.25 * (1.0 - 0.2 + 0.01 * (32.0 / 3.0)) + 2.0;
    let cv = estimate_conditional_value(&[-0.5], 0, &f, &o, &s, 100_000, 7600).unwrap();
    let mut fails = Vec::new();
    println!(
        "  conditional value {:.6} +- {:.6} vs analytic {:.6}",
        cv.mean, cv.std_error, expected
    );
    clause(
        &mut fails,
        format!(
            "estimate {} not within 3 standard errors ({}) of {expected}",
            cv.mean, cv.std_error
        ),
        (cv.mean - expected).abs() <= 3.0 * cv.std_error,
    );
    finish("criterion 6 (closed-form conditional value)", fails);
}

#[test]
fn criterion_7_exponent_fits() {
    let f = cosine_staircase();
    let mut fails = Vec::new();
    let targets = [
        ("5pi local minimizer", CriticalLabel::LocalMin),
        ("global plateau boundary", CriticalLabel::GlobalMin),
    ];
    for (name, label) in targets {
        let component = f.catalog().iter().find(|c| c.label == label).unwrap();
        let fit =
            estimate_lojasiewicz_exponent(&f, component, SampleSide::Below, 0.3, 512, 7700)
                .unwrap();
        println!(
            "  {name}: theta = {:.4}, r^2 = {:.6}, n = {}",
            fit.theta_hat, fit.r_squared, fit.n_used
        );
        clause(
            &mut fails,
            format!("{name}: theta {} outside [0.45, 0.55]", fit.theta_hat),
            (0.45..=0.55).contains(&fit.theta_hat),
        );
        clause(
            &mut fails,
            format!("{name}: r^2 {} below 0.99", fit.r_squared),
            fit.r_squared > 0.99,
        );
    }
    finish("criterion 7 (local exponent fits)", fails);
}

#[test]
fn criterion_8_gradient_norm_convergence() {
    let all = families();
    let mut fails = Vec::new();
    let mut checked = 0usize;
    for (family, cells) in [
        ("multiplicative", &all.multiplicative),
        ("additive", &all.additive),
        ("value-dependent", &all.value_dependent),
    ] {
        for c in cells.iter() {
            for (i, r) in c.runs.iter().enumerate() {
                if r.label == LimitLabel::NonConvergence {
                    continue;
                }
                checked += 1;
                if r.min_grad >= TOL_GRAD {
                    fails.push(format!(
                        "{family} cell (x0 = {:.6}, level = {}), seed offset {i}: min |grad| {} >= {TOL_GRAD}",
                        c.x0, c.level, r.min_grad
                    ));
                }
            }
        }
    }
    println!("  running-min gradient norm below {TOL_GRAD} in {checked} accepted runs");
    finish("criterion 8 (gradient-norm convergence)", fails);
}

#[test]
fn criterion_9_determinism() {
    let f = cosine_staircase();
    let o = NoiseOracle::multiplicative(10.0).unwrap();
    let s = StepSchedule::for_oracle(0.05, f.beta(), &o).unwrap();
    let mut fails = Vec::new();

    let cfg = RunConfig::new(vec![1.0], 100_000, 7900);
    let a = run_trajectory(&cfg, &f, &o, &s).unwrap();
    let b = run_trajectory(&cfg, &f, &o, &s).unwrap();
    clause(&mut fails, "re-run with the same seed is not bit-identical".into(), a == b);

    let ens_cfg = RunConfig::new(vec![-0.5], 20_000, 7950);
    let wide = run_ensemble(&ens_cfg, &f, &o, &s, 8).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let narrow = pool.install(|| run_ensemble(&ens_cfg, &f, &o, &s, 8)).unwrap();
    clause(
        &mut fails,
        "ensemble differs between 1 worker and the default pool".into(),
        wide == narrow,
    );

    finish("criterion 9 (determinism)", fails);
}

#[test]
fn invariant_classification_is_tolerance_stable() {
    // halving tol_dist must not flip any accepted run's label
    let all = families();
    let mut fails = Vec::new();
    for (family, cells) in [
        ("multiplicative", &all.multiplicative),
        ("additive", &all.additive),
        ("value-dependent", &all.value_dependent),
    ] {
        for c in cells.iter() {
            let unstable = c.runs.iter().filter(|r| !r.label_stable_under_halved_tol).count();
            if unstable > 0 {
                fails.push(format!(
                    "{family} cell (x0 = {:.6}, level = {}): {unstable} labels flip at tol/2",
                    c.x0, c.level
                ));
            }
        }
    }
    finish("invariant (classification tolerance stability)", fails);
}
