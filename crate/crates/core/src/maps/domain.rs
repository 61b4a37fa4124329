use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeoError, Result};
use crate::Point;

/// Seed used by every sampled invariant check unless overridden.
pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    /// Open box `lo < x < hi`; bounds may be infinite.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    PositiveOrthant,
    /// `ℝⁿ ∖ {0}`; not convex.
    PuncturedSpace,
    FullSpace,
}

/// An open subset of ℝⁿ with decidable membership.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    dim: usize,
}

impl Domain {
    pub fn full(dim: usize) -> Self {
        Domain { kind: DomainKind::FullSpace, dim }
    }

    pub fn positive_orthant(dim: usize) -> Self {
        Domain { kind: DomainKind::PositiveOrthant, dim }
    }

    pub fn punctured(dim: usize) -> Self {
        Domain { kind: DomainKind::PuncturedSpace, dim }
    }

    /// Open box; requires `lo < hi` componentwise. Boxes that coincide with
    /// the positive orthant or the whole space are normalized to those kinds.
    pub fn open_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(GeoError::DimensionMismatch { expected: lo.len(), found: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || l.is_nan() || h.is_nan()) {
            return Err(GeoError::invalid("box", "requires lo < hi componentwise"));
        }
        let dim = lo.len();
        if lo.iter().all(|l| *l == f64::NEG_INFINITY) && hi.iter().all(|h| *h == f64::INFINITY) {
            return Ok(Domain::full(dim));
        }
        if lo.iter().all(|l| *l == 0.0) && hi.iter().all(|h| *h == f64::INFINITY) {
            return Ok(Domain::positive_orthant(dim));
        }
        Ok(Domain { kind: DomainKind::Box { lo, hi }, dim })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self.kind, DomainKind::PuncturedSpace)
    }

    /// Per-coordinate open interval, when the domain is a product of
    /// intervals.
    pub fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            DomainKind::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            DomainKind::PositiveOrthant => Some((vec![0.0; self.dim], vec![f64::INFINITY; self.dim])),
            DomainKind::FullSpace => Some((vec![f64::NEG_INFINITY; self.dim], vec![f64::INFINITY; self.dim])),
            DomainKind::PuncturedSpace => None,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            DomainKind::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l < v && v < h),
            DomainKind::PositiveOrthant => x.iter().all(|v| *v > 0.0),
            DomainKind::PuncturedSpace => x.iter().any(|v| *v != 0.0),
            DomainKind::FullSpace => true,
        }
    }

    pub fn ensure(&self, x: &Point, context: &str) -> Result<()> {
        if x.len() != self.dim {
            return Err(GeoError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        if self.contains(x.as_slice()) {
            Ok(())
        } else {
            Err(GeoError::outside(x.as_slice(), context))
        }
    }

    /// Compact sub-box used for sampled invariant checks.
    pub fn sample_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim;
        match &self.kind {
            DomainKind::FullSpace => (vec![-2.0; n], vec![2.0; n]),
            DomainKind::PositiveOrthant => (vec![0.25; n], vec![4.0; n]),
            DomainKind::PuncturedSpace => (vec![0.5; n], vec![2.0; n]),
            DomainKind::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| match (l.is_finite(), h.is_finite()) {
                    (true, true) => {
                        let m = 0.01 * (h - l);
                        (l + m, h - m)
                    }
                    (true, false) => (l + 0.25, l + 4.0),
                    (false, true) => (h - 4.0, h - 0.25),
                    (false, false) => (-2.0, 2.0),
                })
                .unzip(),
        }
    }

    pub fn center(&self) -> Point {
        let (lo, hi) = self.sample_box();
        DVector::from_iterator(self.dim, lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)))
    }

    /// Uniform points in [`Domain::sample_box`], reproducible from `seed`.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_points_with(count, &mut rng)
    }

    pub fn sample_points_with<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Point> {
        let (lo, hi) = self.sample_box();
        (0..count)
            .map(|_| DVector::from_iterator(self.dim, lo.iter().zip(&hi).map(|(l, h)| rng.random_range(*l..*h))))
            .collect()
    }
}
