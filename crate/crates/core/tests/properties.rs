//! Property tests for the structural invariants: branch continuity, exact
//! gradients, oracle laws, schedule purity, and record/determinism
//! contracts.

use proptest::prelude::*;
use sgdlab_core::engine::{run_trajectory, RunConfig};
use sgdlab_core::noise::NoiseOracle;
use sgdlab_core::objective::{cosine_staircase, CriticalLabel};
use sgdlab_core::rng::CounterRng;
use sgdlab_core::schedule::{BoundsChannel, BoundsRule, PowerLaw, StepSchedule};
use std::f64::consts::PI;

const BREAKPOINTS: [f64; 5] = [0.0, PI, 3.0 * PI, 4.0 * PI, 5.0 * PI];

proptest! {
    // One-sided values agree across every breakpoint: the derivative
    // vanishes there, so the mismatch is second order in the offset.
    #[test]
    fn breakpoint_continuity(idx in 0usize..5, h in 1e-9f64..1e-4) {
        let f = cosine_staircase();
        let p = BREAKPOINTS[idx];
        let gap = (f.evaluate1(p - h).unwrap() - f.evaluate1(p + h).unwrap()).abs();
        prop_assert!(gap <= 4.0 * h * h + 1e-14, "p = {p}, h = {h}, gap = {gap}");
    }

    #[test]
    fn gradient_matches_central_difference(x in -2.0f64..20.0) {
        prop_assume!(BREAKPOINTS.iter().all(|p| (x - p).abs() > 1e-3));
        let f = cosine_staircase();
        let h = 1e-6;
        let fd = (f.evaluate1(x + h).unwrap() - f.evaluate1(x - h).unwrap()) / (2.0 * h);
        let g = f.gradient1(x).unwrap();
        prop_assert!((fd - g).abs() < 1e-4, "x = {x}: {fd} vs {g}");
    }

    #[test]
    fn classification_is_constant_on_component_interiors(t in 0.0f64..1.0) {
        let f = cosine_staircase();
        let x = PI + t * 2.0 * PI;
        let c = f.classify_point(x, 1e-3).unwrap();
        prop_assert_eq!(c.label, CriticalLabel::GlobalMin);
    }

    // Multiplicative draws scale the whole gradient by one factor.
    #[test]
    fn multiplicative_draws_are_collinear(
        seed in any::<u64>(),
        k in 0u64..1000,
        g0 in -5.0f64..5.0,
        g1 in -5.0f64..5.0,
        g2 in -5.0f64..5.0,
    ) {
        let o = NoiseOracle::multiplicative(7.0).unwrap();
        let grad = [g0, g1, g2];
        let mut rng = sgdlab_core::rng::trajectory_stream(seed, k);
        let g = o.sample(k, &grad, 1.0, &mut rng).unwrap();
        // cross products agree up to one rounding of each product
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            let lhs = g[i] * grad[j];
            let rhs = g[j] * grad[i];
            let tol = 1e-15 * (lhs.abs() + rhs.abs());
            prop_assert!((lhs - rhs).abs() <= tol, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn streams_reproduce_and_respect_bounds(
        seed in any::<u64>(),
        path in proptest::collection::vec(any::<u64>(), 1..4),
        lo in -10.0f64..0.0,
        width in 0.1f64..10.0,
    ) {
        let mut a = CounterRng::from_path(seed, &path);
        let mut b = CounterRng::from_path(seed, &path);
        for _ in 0..32 {
            let u = a.uniform(lo, lo + width);
            prop_assert_eq!(u, b.uniform(lo, lo + width));
            prop_assert!((lo..lo + width).contains(&u));
        }
    }

    // Bounds are functions of k alone, finite and non-negative.
    #[test]
    fn moment_bounds_are_deterministic_and_nonnegative(k in 0u64..1_000_000) {
        let oracles = [
            NoiseOracle::exact(),
            NoiseOracle::multiplicative(10.0).unwrap(),
            NoiseOracle::additive_gaussian(10.0, 10.0, 0.1).unwrap(),
            NoiseOracle::value_dependent(10.0, 10.0, 0.1, 1.0 / 60.0).unwrap(),
        ];
        for o in &oracles {
            let b1 = o.moment_bounds(k);
            let b2 = o.moment_bounds(k);
            prop_assert_eq!(b1, b2);
            prop_assert!(b1.a >= 0.0 && b1.b >= 0.0 && b1.c >= 0.0);
            prop_assert!(b1.a.is_finite() && b1.b.is_finite() && b1.c.is_finite());
        }
    }

    // Constant stepsize and constant b with no value term: the monotone
    // ratio is the triple product of ones.
    #[test]
    fn constant_schedules_have_unit_ratio(
        alpha in 0.001f64..0.09,
        b in 0.34f64..10.0,
    ) {
        let rule = BoundsRule {
            a: PowerLaw::zero(),
            b: PowerLaw::constant(b),
            c: PowerLaw::zero(),
        };
        let s = StepSchedule::from_rule(alpha, 2.0, rule).unwrap();
        let r = s.check_monotone_ratio(BoundsChannel::Derived, 500).unwrap();
        prop_assert_eq!(r.max_ratio, 1.0);
        prop_assert_eq!(r.min_ratio, 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Record contract on arbitrary short runs: endpoints stored, stored
    // values recompute exactly, rerun is bit-identical.
    #[test]
    fn record_contract_and_determinism(
        seed in any::<u64>(),
        x0 in -2.0f64..20.0,
        k_max in 1u64..400,
        stride in 1u64..50,
        kind in 0usize..3,
    ) {
        let f = cosine_staircase();
        let (oracle, alpha) = match kind {
            0 => (NoiseOracle::exact(), 0.05),
            1 => (NoiseOracle::multiplicative(10.0).unwrap(), 0.05),
            _ => (NoiseOracle::additive_gaussian(10.0, 10.0, 0.1).unwrap(), 0.05),
        };
        let s = StepSchedule::for_oracle(alpha, f.beta(), &oracle).unwrap();
        let mut cfg = RunConfig::new(vec![x0], k_max, seed);
        cfg.record_stride = stride;
        let rec = run_trajectory(&cfg, &f, &oracle, &s).unwrap();

        prop_assert_eq!(rec.samples.first().unwrap().k, 0);
        prop_assert_eq!(rec.samples.first().unwrap().x[0], x0);
        prop_assert_eq!(rec.samples.last().unwrap().k, rec.final_k);
        prop_assert_eq!(rec.final_k, k_max);
        for s in &rec.samples {
            prop_assert_eq!(s.f, f.evaluate1(s.x[0]).unwrap());
            prop_assert_eq!(s.grad_norm, f.gradient1(s.x[0]).unwrap().abs());
        }
        let again = run_trajectory(&cfg, &f, &oracle, &s).unwrap();
        prop_assert_eq!(rec, again);
    }
}
