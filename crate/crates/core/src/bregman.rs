//! Bregman divergence of a convex potential and its comparison with half the
//! squared geodesic distance of a map that factorizes the Hessian.
//!
//! Argument order: the divergence is `δ²(y, x)` and the distance `d_U(x, y)`
//! for a pair `(x, y)`. Writing `v = y − x`,
//!
//! ```text
//! ½d² − δ² = ∫∫ (1−u) (vᵗ H_m(γ(u)) v) (∇U^m(γ(s))·v) du ds
//! ```
//!
//! so the sign of the gap follows the sign of `K = ∂²U^m ∂U^m` only once the
//! sign of `v` is fixed. The comparison therefore classifies every pair by
//! orientation: the inequality implied by the sign of `K` is asserted when
//! `y ≥ x` componentwise, its reverse when `y ≤ x`, and nothing otherwise.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::geodesic_distance;
use crate::hessian_bridge::{factorization_deviation, FACTORIZATION_TOLERANCE};
use crate::maps::{ConvexPotential, DiffeoMap, DEFAULT_SEED};
use crate::numerics::GaussLegendre;
use crate::report::{Check, MaxDev};
use crate::Point;

/// Slack allowed on an asserted inequality.
pub const COMPARISON_TOLERANCE: f64 = 1e-9;
/// Relative slack for the equality case `K ≡ 0`.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;
/// `|K|` at or below this counts as zero.
pub const K_ZERO_TOLERANCE: f64 = 1e-9;
/// Default size of the random probe set.
pub const K_PROBE_SAMPLES: usize = 200;

/// `δ²_Φ(x, y) = Φ(x) − Φ(y) − ⟨x − y, ∇Φ(y)⟩`.
pub fn bregman_divergence(potential: &dyn ConvexPotential, x: &Point, y: &Point) -> Result<f64> {
    potential.domain().ensure(x, "divergence argument")?;
    potential.domain().ensure(y, "divergence argument")?;
    if x == y {
        return Ok(0.0);
    }
    Ok(potential.value(x)? - potential.value(y)? - (x - y).dot(&potential.gradient(y)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KSign {
    /// Every `K_ijk` vanishes.
    Zero,
    Nonnegative,
    Nonpositive,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct KSignSummary {
    pub sign: KSign,
    pub min_k: f64,
    pub max_k: f64,
    pub zero_tolerance: f64,
    pub samples: usize,
}

/// `K_ijk(x) = Σ_m ∂²_ij U^m ∂_k U^m` over every index triple and sample.
pub fn k_sign_probe(map: &dyn DiffeoMap, sample_points: &[Point]) -> Result<KSignSummary> {
    k_sign_probe_with_tol(map, sample_points, K_ZERO_TOLERANCE)
}

pub fn k_sign_probe_with_tol(map: &dyn DiffeoMap, sample_points: &[Point], zero_tol: f64) -> Result<KSignSummary> {
    if sample_points.is_empty() {
        return Err(GeoError::EmptyInput("no sample points"));
    }
    let n = map.dim();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in sample_points {
        map.domain().ensure(x, "K probe")?;
        let j = map.jacobian(x)?;
        let hs = map.second_derivs(x)?;
        for i in 0..n {
            for jj in 0..n {
                for k in 0..n {
                    let kv: f64 = (0..n).map(|m| hs[m][(i, jj)] * j[(m, k)]).sum();
                    if kv.is_nan() {
                        return Err(GeoError::invalid("map", "K is not finite"));
                    }
                    lo = lo.min(kv);
                    hi = hi.max(kv);
                }
            }
        }
    }
    let sign = if lo >= -zero_tol && hi <= zero_tol {
        KSign::Zero
    } else if lo >= -zero_tol {
        KSign::Nonnegative
    } else if hi <= zero_tol {
        KSign::Nonpositive
    } else {
        KSign::Mixed
    };
    Ok(KSignSummary {
        sign,
        min_k: lo,
        max_k: hi,
        zero_tolerance: zero_tol,
        samples: sample_points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// `δ²(y, x) ≤ ½d²(x, y)`
    DeltaLeHalfD2,
    /// `δ²(y, x) ≥ ½d²(x, y)`
    DeltaGeHalfD2,
    Equality,
    None,
}

impl Expectation {
    fn reversed(self) -> Self {
        match self {
            Expectation::DeltaLeHalfD2 => Expectation::DeltaGeHalfD2,
            Expectation::DeltaGeHalfD2 => Expectation::DeltaLeHalfD2,
            other => other,
        }
    }

    /// Inequality implied by the sign of `K` for `y ≥ x`.
    pub fn from_sign(sign: KSign) -> Self {
        match sign {
            KSign::Zero => Expectation::Equality,
            KSign::Nonnegative => Expectation::DeltaLeHalfD2,
            KSign::Nonpositive => Expectation::DeltaGeHalfD2,
            KSign::Mixed => Expectation::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `y − x ≥ 0` componentwise
    Forward,
    /// `y − x ≤ 0` componentwise
    Backward,
    Unordered,
}

pub fn orientation(x: &Point, y: &Point) -> Orientation {
    let v = y - x;
    if v.iter().all(|c| *c >= 0.0) {
        Orientation::Forward
    } else if v.iter().all(|c| *c <= 0.0) {
        Orientation::Backward
    } else {
        Orientation::Unordered
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairOutcome {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `δ²_Φ(y, x)`
    pub lhs: f64,
    /// `½ d_U²(x, y)`
    pub rhs: f64,
    pub orientation: Orientation,
    pub expected: Expectation,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonVerdict {
    pub k_sign: KSignSummary,
    /// Inequality for forward pairs; backward pairs expect its reverse.
    pub inequality_expected: Expectation,
    pub pairs_tested: usize,
    pub forward_pairs: usize,
    pub backward_pairs: usize,
    pub unordered_pairs: usize,
    /// `max ‖Φ″ − JᵗJ‖∞` at the pair endpoints.
    pub factorization_deviation: f64,
    /// `max |lhs − rhs|` over all pairs.
    pub max_gap: f64,
    pub violations: Vec<PairOutcome>,
    pub outcomes: Vec<PairOutcome>,
}

impl ComparisonVerdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn checks(&self) -> Vec<Check> {
        // worst amount by which an asserted relation fails
        let mut worst = MaxDev::default();
        for o in &self.outcomes {
            worst.add(match o.expected {
                Expectation::DeltaLeHalfD2 => (o.lhs - o.rhs).max(0.0),
                Expectation::DeltaGeHalfD2 => (o.rhs - o.lhs).max(0.0),
                Expectation::Equality => (o.lhs - o.rhs).abs(),
                Expectation::None => 0.0,
            });
        }
        vec![
            Check::new("comparison_factorization", self.factorization_deviation, FACTORIZATION_TOLERANCE),
            Check::verdict("comparison_inequality", worst.get(), COMPARISON_TOLERANCE, self.passed()),
        ]
    }
}

fn holds(expected: Expectation, lhs: f64, rhs: f64) -> bool {
    match expected {
        Expectation::DeltaLeHalfD2 => lhs <= rhs + COMPARISON_TOLERANCE,
        Expectation::DeltaGeHalfD2 => lhs + COMPARISON_TOLERANCE >= rhs,
        Expectation::Equality => (lhs - rhs).abs() <= EQUALITY_TOLERANCE * (1.0 + rhs.abs()),
        Expectation::None => true,
    }
}

/// Compares `δ²_Φ(y, x)` with `½d_U²(x, y)` pair by pair. `K` is probed on
/// the endpoints and midpoints of the pairs plus seeded domain samples.
pub fn compare_divergence_distance(
    potential: &dyn ConvexPotential,
    map: &dyn DiffeoMap,
    pairs: &[(Point, Point)],
) -> Result<ComparisonVerdict> {
    if pairs.is_empty() {
        return Err(GeoError::EmptyInput("no pairs to compare"));
    }
    if potential.dim() != map.dim() {
        return Err(GeoError::DimensionMismatch { expected: potential.dim(), found: map.dim() });
    }
    let endpoints: Vec<Point> = pairs.iter().flat_map(|(x, y)| [x.clone(), y.clone()]).collect();
    let fact = factorization_deviation(potential, map, &endpoints)?;
    if !(fact <= FACTORIZATION_TOLERANCE) {
        return Err(GeoError::FactorizationMismatch { deviation: fact });
    }

    let mut probes = map.domain().sample_points(K_PROBE_SAMPLES, DEFAULT_SEED);
    probes.retain(|p| potential.domain().contains(p.as_slice()));
    probes.extend(endpoints);
    probes.extend(pairs.iter().map(|(x, y)| (x + y) * 0.5));
    let k_sign = k_sign_probe(map, &probes)?;
    let forward_expectation = Expectation::from_sign(k_sign.sign);

    let mut verdict = ComparisonVerdict {
        k_sign,
        inequality_expected: forward_expectation,
        pairs_tested: pairs.len(),
        forward_pairs: 0,
        backward_pairs: 0,
        unordered_pairs: 0,
        factorization_deviation: fact,
        max_gap: 0.0,
        violations: Vec::new(),
        outcomes: Vec::with_capacity(pairs.len()),
    };
    let mut gap = MaxDev::default();
    for (x, y) in pairs {
        let lhs = bregman_divergence(potential, y, x)?;
        let d = geodesic_distance(map, x, y)?;
        let rhs = 0.5 * d * d;
        gap.add((lhs - rhs).abs());
        let orient = orientation(x, y);
        let expected = match (forward_expectation, orient) {
            (Expectation::Equality, _) => Expectation::Equality,
            (e, Orientation::Forward) => e,
            (e, Orientation::Backward) => e.reversed(),
            (_, Orientation::Unordered) => Expectation::None,
        };
        match orient {
            Orientation::Forward => verdict.forward_pairs += 1,
            Orientation::Backward => verdict.backward_pairs += 1,
            Orientation::Unordered => verdict.unordered_pairs += 1,
        }
        let outcome = PairOutcome {
            x: x.as_slice().to_vec(),
            y: y.as_slice().to_vec(),
            lhs,
            rhs,
            orientation: orient,
            expected,
            holds: holds(expected, lhs, rhs),
        };
        if !outcome.holds {
            verdict.violations.push(outcome.clone());
        }
        verdict.outcomes.push(outcome);
    }
    verdict.max_gap = gap.get();
    Ok(verdict)
}

#[derive(Debug, Clone, Serialize)]
pub struct TaylorReport {
    /// `δ²_Φ(y, x)`
    pub divergence: f64,
    /// `∫₀¹ (1 − s) vᵗ Φ″(x + s v) v ds`, `v = y − x`
    pub integral: f64,
    pub residual: f64,
    pub quad_points: usize,
}

/// Integral form of the divergence along the segment from `x` to `y`.
pub fn taylor_identity_check(
    potential: &dyn ConvexPotential,
    x: &Point,
    y: &Point,
    quad_points: usize,
) -> Result<TaylorReport> {
    if quad_points == 0 {
        return Err(GeoError::invalid("quad_points", "must be at least 1"));
    }
    let divergence = bregman_divergence(potential, y, x)?;
    let v: DVector<f64> = y - x;
    let rule = GaussLegendre::unit(quad_points);
    let mut integral = 0.0;
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let g = x + &v * s;
        potential.domain().ensure(&g, "Taylor segment")?;
        // (y − γ(s)) = (1 − s) v
        integral += w * (1.0 - s) * v.dot(&(potential.hessian(&g)? * &v));
    }
    Ok(TaylorReport {
        divergence,
        integral,
        residual: (divergence - integral).abs(),
        quad_points,
    })
}
