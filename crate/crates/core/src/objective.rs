//! Smooth objectives with exact gradients and a declared critical-point
//! catalog.
//!
//! An [`ObjectiveSpec`] bundles the function itself with the metadata the
//! rest of the crate relies on: the gradient Lipschitz constant `beta`, the
//! global minimum value `f_min`, and the catalog of critical-set components
//! (each a closed interval on which the function is constant). The catalog is
//! declared data, not a numerical discovery: downstream classification treats
//! the critical set as known structure and validates it against a grid sweep
//! in tests.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::rng::{domain, CounterRng};
use crate::{Error, Result};

/// The raw function: value and exact gradient.
pub trait ObjectiveFn: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

/// Kind of critical-set component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalLabel {
    Saddle,
    LocalMax,
    LocalMin,
    GlobalMin,
}

impl fmt::Display for CriticalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CriticalLabel::Saddle => "saddle",
            CriticalLabel::LocalMax => "local-max",
            CriticalLabel::LocalMin => "local-min",
            CriticalLabel::GlobalMin => "global-min",
        };
        f.write_str(s)
    }
}

/// One connected component of the critical set: the closed interval
/// `[lo, hi]` (a point when `lo == hi`), the constant objective value on it,
/// and its nature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalComponent {
    pub lo: f64,
    pub hi: f64,
    pub label: CriticalLabel,
    pub value: f64,
}

impl CriticalComponent {
    pub fn point(at: f64, label: CriticalLabel, value: f64) -> Self {
        CriticalComponent { lo: at, hi: at, label, value }
    }

    pub fn interval(lo: f64, hi: f64, label: CriticalLabel, value: f64) -> Self {
        CriticalComponent { lo, hi, label, value }
    }

    /// Distance from a scalar point to the interval.
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    pub fn describe(&self) -> String {
        if self.lo == self.hi {
            format!("{} at {:.6}", self.label, self.lo)
        } else {
            format!("{} on [{:.6}, {:.6}]", self.label, self.lo, self.hi)
        }
    }
}

/// A smooth coercive objective together with the metadata used by the engine
/// and the diagnostics.
///
/// Immutable after construction; share freely across trajectory workers.
#[derive(Clone)]
pub struct ObjectiveSpec {
    dim: usize,
    beta: f64,
    f_min: f64,
    coercive_radius: f64,
    catalog: Vec<CriticalComponent>,
    function: Arc<dyn ObjectiveFn>,
}

impl ObjectiveSpec {
    /// Builds a spec, validating the declared metadata.
    ///
    /// The catalog components must be pairwise disjoint; this is the
    /// geometric shape the classification logic depends on.
    pub fn new(
        dim: usize,
        beta: f64,
        f_min: f64,
        coercive_radius: f64,
        catalog: Vec<CriticalComponent>,
        function: Arc<dyn ObjectiveFn>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be a positive real, got {beta}"
            )));
        }
        if !f_min.is_finite() {
            return Err(Error::InvalidParameter(format!("f_min must be finite, got {f_min}")));
        }
        let mut sorted: Vec<&CriticalComponent> = catalog.iter().collect();
        sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for pair in sorted.windows(2) {
            if pair[1].lo <= pair[0].hi {
                return Err(Error::InvalidParameter(format!(
                    "critical components overlap: [{}, {}] and [{}, {}]",
                    pair[0].lo, pair[0].hi, pair[1].lo, pair[1].hi
                )));
            }
        }
        Ok(ObjectiveSpec { dim, beta, f_min, coercive_radius, catalog, function })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lipschitz constant of the gradient.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Global minimum value of the objective.
    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    /// Radius beyond which the objective is strictly increasing along rays.
    pub fn coercive_radius(&self) -> f64 {
        self.coercive_radius
    }

    pub fn catalog(&self) -> &[CriticalComponent] {
        &self.catalog
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        match x.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFiniteInput(i)),
            None => Ok(()),
        }
    }

    /// Objective value at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.function.value(x))
    }

    /// Exact gradient at `x`, written into `out`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_point(x)?;
        assert_eq!(out.len(), self.dim, "gradient output buffer has wrong length");
        self.function.gradient(x, out);
        Ok(())
    }

    /// Convenience scalar accessors for the one-dimensional objectives.
    pub fn evaluate1(&self, x: f64) -> Result<f64> {
        self.evaluate(std::slice::from_ref(&x))
    }

    pub fn gradient1(&self, x: f64) -> Result<f64> {
        let mut g = [0.0];
        self.gradient(std::slice::from_ref(&x), &mut g)?;
        Ok(g[0])
    }

    /// Returns the catalog component whose region lies within `tol_dist` of
    /// the scalar point `x`; the nearest component wins ties. `None` when no
    /// component qualifies.
    ///
    /// Classification is defined for the one-dimensional catalog only.
    pub fn classify_point(&self, x: f64, tol_dist: f64) -> Option<&CriticalComponent> {
        assert!(tol_dist > 0.0, "tol_dist must be positive");
        self.catalog
            .iter()
            .map(|c| (c.distance(x), c))
            .filter(|(d, _)| *d <= tol_dist)
            .min_by(|(da, _), (db, _)| da.total_cmp(db))
            .map(|(_, c)| c)
    }
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("f_min", &self.f_min)
            .field("catalog", &self.catalog)
            .finish_non_exhaustive()
    }
}

// ---------------------------------------------------------------------------
// Shipped objectives
// ---------------------------------------------------------------------------

use std::f64::consts::PI;

/// The one-dimensional piecewise benchmark: a quadratic wall on the left, a
/// cosine descent into a flat valley of global minimizers, two shallower
/// cosine arches, and a quadratic wall on the right.
///
/// ```text
///          x^2 + 1                   x < 0
///          cos(x)                    0 <= x < pi
///          -1                        pi <= x < 3 pi
///          cos(x)/2 - 1/2            3 pi <= x < 4 pi
///          cos(x)/3 - 1/3            4 pi <= x < 5 pi
///          (x - 5 pi)^2 - 2/3        x >= 5 pi
/// ```
///
/// The function is continuously differentiable; one-sided derivatives agree
/// at every breakpoint (they all vanish there), so evaluating the right-hand
/// branch at breakpoints is value-neutral. `|F''|` is at most 2, so the
/// gradient is 2-Lipschitz.
#[derive(Clone, Copy, Debug, Default)]
pub struct CosineStaircase;

impl ObjectiveFn for CosineStaircase {
    fn value(&self, x: &[f64]) -> f64 {
        let x = x[0];
        if x < 0.0 {
            x * x + 1.0
        } else if x < PI {
            x.cos()
        } else if x < 3.0 * PI {
            -1.0
        } else if x < 4.0 * PI {
            0.5 * x.cos() - 0.5
        } else if x < 5.0 * PI {
            x.cos() / 3.0 - 1.0 / 3.0
        } else {
            let t = x - 5.0 * PI;
            t * t - 2.0 / 3.0
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let x = x[0];
        out[0] = if x < 0.0 {
            2.0 * x
        } else if x < PI {
            -x.sin()
        } else if x < 3.0 * PI {
            0.0
        } else if x < 4.0 * PI {
            -0.5 * x.sin()
        } else if x < 5.0 * PI {
            -x.sin() / 3.0
        } else {
            2.0 * (x - 5.0 * PI)
        };
    }
}

/// Builds the piecewise benchmark with its exact metadata: `beta = 2`,
/// `f_min = -1`, and the four critical components (saddle at 0, global
/// minimizers on `[pi, 3 pi]`, local maximizer at `4 pi`, local minimizer at
/// `5 pi` with value `-2/3`).
pub fn cosine_staircase() -> ObjectiveSpec {
    let catalog = vec![
        CriticalComponent::point(0.0, CriticalLabel::Saddle, 1.0),
        CriticalComponent::interval(PI, 3.0 * PI, CriticalLabel::GlobalMin, -1.0),
        CriticalComponent::point(4.0 * PI, CriticalLabel::LocalMax, 0.0),
        CriticalComponent::point(5.0 * PI, CriticalLabel::LocalMin, -2.0 / 3.0),
    ];
    ObjectiveSpec::new(1, 2.0, -1.0, 16.0, catalog, Arc::new(CosineStaircase))
        .expect("benchmark metadata is valid")
}

/// `F(x) = x^2`: the simplest smooth coercive check case (`beta = 2`,
/// minimum 0 at the origin).
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadraticBowl;

impl ObjectiveFn for QuadraticBowl {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = 2.0 * v;
        }
    }
}

pub fn quadratic_bowl() -> ObjectiveSpec {
    let catalog = vec![CriticalComponent::point(0.0, CriticalLabel::GlobalMin, 0.0)];
    ObjectiveSpec::new(1, 2.0, 0.0, 1.0, catalog, Arc::new(QuadraticBowl))
        .expect("quadratic metadata is valid")
}

// ---------------------------------------------------------------------------
// Empirical smoothness check
// ---------------------------------------------------------------------------

/// Outcome of the sampled smoothness audit.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessReport {
    /// Max over sampled pairs of `|F'(x) - F'(y)| / |x - y|`.
    pub max_lipschitz_ratio: f64,
    /// Max over sampled points of `|central difference - F'(x)|`.
    pub max_fd_error: f64,
    /// Declared Lipschitz constant the ratio is held against.
    pub declared_beta: f64,
    /// Tolerance the finite-difference error is held against.
    pub fd_tolerance: f64,
    pub n_pairs: usize,
    pub passed: bool,
}

/// Central-difference step for the gradient consistency check.
const FD_STEP: f64 = 1e-6;
/// Finite differences are trusted to this absolute error.
const FD_TOLERANCE: f64 = 1e-4;

/// Samples `n_pairs` point pairs in `[lo, hi]` and audits the declared
/// smoothness constant: the sampled Lipschitz ratio of the gradient must not
/// exceed `beta` (up to rounding), and central finite differences must match
/// the exact gradient within the tolerance.
///
/// One-dimensional objectives only.
pub fn check_smoothness(
    f: &ObjectiveSpec,
    lo: f64,
    hi: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<SmoothnessReport> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::EmptyDomain { lo, hi });
    }
    if n_pairs < 2 {
        return Err(Error::InvalidParameter("need at least 2 sample pairs".into()));
    }
    let mut rng = CounterRng::from_path(seed, &[domain::SAMPLING]);
    let mut max_ratio: f64 = 0.0;
    let mut max_fd: f64 = 0.0;
    for _ in 0..n_pairs {
        let x = rng.uniform(lo, hi);
        let y = rng.uniform(lo, hi);
        let gx = f.gradient1(x)?;
        let gy = f.gradient1(y)?;
        if (x - y).abs() > 1e-12 {
            max_ratio = max_ratio.max((gx - gy).abs() / (x - y).abs());
        }
        let fd = (f.evaluate1(x + FD_STEP)? - f.evaluate1(x - FD_STEP)?) / (2.0 * FD_STEP);
        max_fd = max_fd.max((fd - gx).abs());
    }
    let passed = max_ratio <= f.beta() * (1.0 + 1e-9) + 1e-12 && max_fd <= FD_TOLERANCE;
    Ok(SmoothnessReport {
        max_lipschitz_ratio: max_ratio,
        max_fd_error: max_fd,
        declared_beta: f.beta(),
        fd_tolerance: FD_TOLERANCE,
        n_pairs,
        passed,
    })
}
