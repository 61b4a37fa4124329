//! Generalized (quasi-arithmetic) means.
//!
//! Every mean here has the same shape: push the points through `U`, take
//! an ordinary (weighted) average in image space, pull back with `U⁻¹`. The
//! pull-back is verified by round trip since `U(M)` need not be convex.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::geodesic_distance;
use crate::maps::{DiffeoMap, SeparableScale};
use crate::Point;

/// A finitely supported probability law.
#[derive(Debug, Clone)]
pub struct DiscreteLaw {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(GeoError::EmptyInput("discrete law has no points"));
        }
        if points.len() != weights.len() {
            return Err(GeoError::InvalidLaw(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(GeoError::InvalidLaw("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GeoError::InvalidLaw(format!("weights sum to {total}, not 1")));
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(GeoError::DimensionMismatch { expected: dim, found: p.len() });
        }
        Ok(DiscreteLaw { points, weights })
    }

    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(GeoError::EmptyInput("discrete law has no points"));
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `u⁻¹(mean of u(x_i))` for a scalar scale.
pub fn generalized_mean_1d(scale: &SeparableScale, xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(GeoError::EmptyInput("no values to average"));
    }
    if let Some(x) = xs.iter().find(|x| !scale.contains(**x)) {
        return Err(GeoError::outside(&[*x], format!("interval of scale {}", scale.name())));
    }
    let avg = xs.iter().map(|&x| scale.u(x)).sum::<f64>() / xs.len() as f64;
    let c = scale.u_inverse(avg)?;
    // clamp roundoff so the mean is internal
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    Ok(c.clamp(lo, hi))
}

/// Pull back an image-space average, verifying that it lies in `U(M)`.
fn pull_back(map: &dyn DiffeoMap, average: &DVector<f64>) -> Result<Point> {
    let not_in_image = || GeoError::ImageNotConvex {
        average: average.as_slice().to_vec(),
    };
    let c = map.inverse(average).map_err(|_| not_in_image())?;
    if !map.domain().contains(c.as_slice()) {
        return Err(not_in_image());
    }
    let back = map.forward(&c).map_err(|_| not_in_image())?;
    if (back - average).amax() > 1e-8 * (1.0 + average.amax()) {
        return Err(not_in_image());
    }
    Ok(c)
}

fn check_points(map: &dyn DiffeoMap, points: &[Point]) -> Result<()> {
    for p in points {
        map.domain().ensure(p, "mean input")?;
    }
    Ok(())
}

/// `U⁻¹((1/M) Σ U(x_m))`.
pub fn generalized_mean_nd(map: &dyn DiffeoMap, points: &[Point]) -> Result<Point> {
    if points.is_empty() {
        return Err(GeoError::EmptyInput("no points to average"));
    }
    check_points(map, points)?;
    let mut acc = DVector::zeros(map.dim());
    for p in points {
        acc += map.forward(p)?;
    }
    acc /= points.len() as f64;
    pull_back(map, &acc)
}

/// `U⁻¹(Σ p_i U(x_i))`: the best constant predictor of the law.
pub fn weighted_mean(map: &dyn DiffeoMap, law: &DiscreteLaw) -> Result<Point> {
    check_points(map, law.points())?;
    let mut acc = DVector::zeros(map.dim());
    for (p, w) in law.points().iter().zip(law.weights()) {
        acc += map.forward(p)? * *w;
    }
    pull_back(map, &acc)
}

/// Discrete conditional predictor: for each block of a partition of the
/// support, the weighted mean of the law conditioned on that block.
pub fn conditional_predictor(
    map: &dyn DiffeoMap,
    law: &DiscreteLaw,
    partition: &[Vec<usize>],
) -> Result<Vec<(Vec<usize>, Point)>> {
    let n = law.points().len();
    let mut seen = vec![false; n];
    for block in partition {
        if block.is_empty() {
            return Err(GeoError::InvalidPartition("empty block".into()));
        }
        for &i in block {
            if i >= n {
                return Err(GeoError::InvalidPartition(format!("index {i} out of range")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(GeoError::InvalidPartition(format!("index {i} appears twice")));
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(GeoError::InvalidPartition(format!("index {i} not covered")));
    }

    partition
        .iter()
        .map(|block| {
            let mass: f64 = block.iter().map(|&i| law.weights()[i]).sum();
            if !(mass > 0.0) {
                return Err(GeoError::InvalidPartition(format!("block {block:?} has zero weight")));
            }
            let mut acc = DVector::zeros(map.dim());
            for &i in block {
                map.domain().ensure(&law.points()[i], "mean input")?;
                acc += map.forward(&law.points()[i])? * (law.weights()[i] / mass);
            }
            Ok((block.clone(), pull_back(map, &acc)?))
        })
        .collect()
}

/// Outcome of the perturbation test of mean minimality.
#[derive(Debug, Clone, Serialize)]
pub struct MinimalityReport {
    /// Smallest `Σd²(x, c + δ) − Σd²(x, c)` over accepted trials.
    pub min_margin: f64,
    pub trials_run: usize,
    /// Perturbed points that left the domain and were redrawn.
    pub trials_skipped: usize,
    pub negative_margins: usize,
    pub radii: Vec<f64>,
}

impl MinimalityReport {
    pub fn passed(&self) -> bool {
        self.negative_margins == 0 && self.trials_run > 0
    }
}

pub const PERTURBATION_RADII: [f64; 3] = [1e-2, 1e-1, 5e-1];

/// Draws per requested trial before a radius is given up on; perturbations
/// that leave the domain are redrawn.
pub const MAX_DRAWS_PER_TRIAL: usize = 50;

fn sum_sq_distance(map: &dyn DiffeoMap, points: &[Point], c: &Point) -> Result<f64> {
    points
        .iter()
        .map(|p| geodesic_distance(map, p, c).map(|d| d * d))
        .sum()
}

/// Checks that `candidate` beats `trials` random in-domain perturbations at
/// each of three radii in `Σ d_U²`. Radii are scaled by `1 + ‖candidate‖∞`.
pub fn verify_mean_minimizes(
    map: &dyn DiffeoMap,
    points: &[Point],
    candidate: &Point,
    trials: usize,
    seed: u64,
) -> Result<MinimalityReport> {
    check_points(map, points)?;
    map.domain().ensure(candidate, "mean candidate")?;
    let base = sum_sq_distance(map, points, candidate)?;
    let scale = 1.0 + candidate.amax();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = MinimalityReport {
        min_margin: f64::INFINITY,
        trials_run: 0,
        trials_skipped: 0,
        negative_margins: 0,
        radii: PERTURBATION_RADII.iter().map(|r| r * scale).collect(),
    };
    for &radius in &PERTURBATION_RADII {
        let (mut accepted, mut attempts) = (0, 0);
        while accepted < trials && attempts < trials * MAX_DRAWS_PER_TRIAL {
            attempts += 1;
            let dir: DVector<f64> = loop {
                let d = DVector::from_fn(candidate.len(), |_, _| rng.random_range(-1.0..1.0));
                let n = d.norm();
                if n > 1e-3 && n <= 1.0 {
                    break d / n;
                }
            };
            let trial: Point = candidate + dir * (radius * scale);
            if !map.domain().contains(trial.as_slice()) {
                report.trials_skipped += 1;
                continue;
            }
            let margin = sum_sq_distance(map, points, &trial)? - base;
            accepted += 1;
            report.trials_run += 1;
            report.min_margin = report.min_margin.min(margin);
            if margin < 0.0 {
                report.negative_margins += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{map_from_separable, IdentityMap, SphereInversion, DEFAULT_SEED};

    fn p(xs: &[f64]) -> Point {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn classical_means() {
        assert!((generalized_mean_1d(&SeparableScale::linear(), &[1.0, 2.0, 3.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((generalized_mean_1d(&SeparableScale::log(), &[1.0, 4.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((generalized_mean_1d(&SeparableScale::reciprocal(), &[1.0, 1.0 / 3.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scalar_mean_errors() {
        assert!(matches!(generalized_mean_1d(&SeparableScale::log(), &[]), Err(GeoError::EmptyInput(_))));
        assert!(matches!(
            generalized_mean_1d(&SeparableScale::log(), &[1.0, -1.0]),
            Err(GeoError::DomainViolation { .. })
        ));
    }

    #[test]
    fn nd_means() {
        let id = IdentityMap::new(2).unwrap();
        let c = generalized_mean_nd(&id, &[p(&[0.0, 0.0]), p(&[2.0, 2.0])]).unwrap();
        assert_eq!(c, p(&[1.0, 1.0]));

        let inv = SphereInversion::new(2).unwrap();
        let c = generalized_mean_nd(&inv, &[p(&[1.0, 0.0]), p(&[1.0 / 3.0, 0.0])]).unwrap();
        let oracle = generalized_mean_1d(&SeparableScale::reciprocal(), &[1.0, 1.0 / 3.0]).unwrap();
        assert!((c - p(&[oracle, 0.0])).amax() < 1e-12);

        let single = p(&[0.7, -0.2]);
        assert!((generalized_mean_nd(&inv, std::slice::from_ref(&single)).unwrap() - &single).amax() < 1e-15);
    }

    #[test]
    fn average_outside_image_is_reported() {
        // symmetric points average to 0, the puncture
        let inv = SphereInversion::new(2).unwrap();
        let err = generalized_mean_nd(&inv, &[p(&[1.0, 0.0]), p(&[-1.0, 0.0])]).unwrap_err();
        assert!(matches!(err, GeoError::ImageNotConvex { .. }));
    }

    #[test]
    fn weighted_means() {
        let log = map_from_separable(SeparableScale::log(), 1).unwrap();
        let law = DiscreteLaw::new(vec![p(&[1.0]), p(&[4.0])], vec![0.75, 0.25]).unwrap();
        assert!((weighted_mean(&log, &law).unwrap()[0] - 2f64.sqrt()).abs() < 1e-12);

        let pts = vec![p(&[1.0]), p(&[4.0]), p(&[9.0])];
        let uniform = DiscreteLaw::uniform(pts.clone()).unwrap();
        assert_eq!(weighted_mean(&log, &uniform).unwrap(), generalized_mean_nd(&log, &pts).unwrap());

        let point_mass = DiscreteLaw::new(pts, vec![0.0, 1.0, 0.0]).unwrap();
        assert!((weighted_mean(&log, &point_mass).unwrap()[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_laws() {
        assert!(DiscreteLaw::new(vec![p(&[1.0])], vec![0.5]).is_err());
        assert!(DiscreteLaw::new(vec![p(&[1.0]), p(&[2.0])], vec![1.5, -0.5]).is_err());
        assert!(DiscreteLaw::new(vec![], vec![]).is_err());
    }

    #[test]
    fn conditional_predictors() {
        let log = map_from_separable(SeparableScale::log(), 1).unwrap();
        let law = DiscreteLaw::uniform(vec![p(&[1.0]), p(&[4.0]), p(&[9.0]), p(&[16.0])]).unwrap();

        let blocks = conditional_predictor(&log, &law, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert!((blocks[0].1[0] - 2.0).abs() < 1e-12);
        assert!((blocks[1].1[0] - 12.0).abs() < 1e-12);

        let trivial = conditional_predictor(&log, &law, &[vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(trivial[0].1, weighted_mean(&log, &law).unwrap());

        let singletons: Vec<Vec<usize>> = (0..4).map(|i| vec![i]).collect();
        for (block, c) in conditional_predictor(&log, &law, &singletons).unwrap() {
            assert!((c - &law.points()[block[0]]).amax() < 1e-12);
        }
    }

    #[test]
    fn bad_partitions() {
        let log = map_from_separable(SeparableScale::log(), 1).unwrap();
        let law = DiscreteLaw::new(vec![p(&[1.0]), p(&[4.0])], vec![1.0, 0.0]).unwrap();
        assert!(conditional_predictor(&log, &law, &[vec![0], vec![]]).is_err());
        assert!(conditional_predictor(&log, &law, &[vec![0]]).is_err());
        assert!(conditional_predictor(&log, &law, &[vec![0, 1], vec![1]]).is_err());
        let zero_block = conditional_predictor(&log, &law, &[vec![0], vec![1]]).unwrap_err();
        assert!(matches!(zero_block, GeoError::InvalidPartition(_)));
    }

    #[test]
    fn minimality_of_true_means() {
        let id = IdentityMap::new(2).unwrap();
        let pts = vec![p(&[0.0, 1.0]), p(&[2.0, -1.0]), p(&[1.0, 3.0])];
        let c = generalized_mean_nd(&id, &pts).unwrap();
        let rep = verify_mean_minimizes(&id, &pts, &c, 200, DEFAULT_SEED).unwrap();
        assert!(rep.passed() && rep.min_margin >= 0.0);

        let log = map_from_separable(SeparableScale::log(), 1).unwrap();
        let pts = vec![p(&[1.0]), p(&[4.0])];
        let c = generalized_mean_nd(&log, &pts).unwrap();
        let rep = verify_mean_minimizes(&log, &pts, &c, 200, DEFAULT_SEED).unwrap();
        assert!(rep.passed() && rep.trials_skipped == 0);

        // near the boundary the largest radius leaves the half-line
        let pts = vec![p(&[0.1]), p(&[0.2])];
        let c = generalized_mean_nd(&log, &pts).unwrap();
        let rep = verify_mean_minimizes(&log, &pts, &c, 50, DEFAULT_SEED).unwrap();
        assert!(rep.passed() && rep.trials_skipped > 0 && rep.trials_run == 150);
    }

    #[test]
    fn offset_candidate_is_caught() {
        let log = map_from_separable(SeparableScale::log(), 1).unwrap();
        let pts = vec![p(&[1.0]), p(&[4.0])];
        let c = generalized_mean_nd(&log, &pts).unwrap() + p(&[0.3]);
        let rep = verify_mean_minimizes(&log, &pts, &c, 200, DEFAULT_SEED).unwrap();
        assert!(rep.min_margin < 0.0);
        assert!(!rep.passed());
    }
}
