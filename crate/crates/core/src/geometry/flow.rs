use nalgebra::DVector;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::maps::DiffeoMap;
use crate::Point;

/// Geodesic flow `U(t, x) = U⁻¹(U(x) + tξ)`, with `ξ` a velocity in image
/// coordinates.
pub fn flow(map: &dyn DiffeoMap, x: &Point, xi: &DVector<f64>, t: f64) -> Result<Point> {
    if xi.len() != map.dim() {
        return Err(GeoError::DimensionMismatch { expected: map.dim(), found: xi.len() });
    }
    map.domain().ensure(x, "flow start")?;
    if t == 0.0 {
        return Ok(x.clone());
    }
    let target = map.forward(x)? + xi * t;
    let out = map.inverse(&target)?;
    map.domain().ensure(&out, "flow image")?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    /// `U(t + s, x)`, or `E[X(t+s) | X_t]` in predictor language.
    pub direct: Vec<f64>,
    /// `U(s, U(t, x))`, the predictor from the current position.
    pub composed: Vec<f64>,
    pub deviation: f64,
}

/// `U(t + s, x)` against `U(s, U(t, x))`.
pub fn flow_semigroup_check(map: &dyn DiffeoMap, x: &Point, xi: &DVector<f64>, t: f64, s: f64) -> Result<FlowReport> {
    let direct = flow(map, x, xi, t + s)?;
    let composed = flow(map, &flow(map, x, xi, t)?, xi, s)?;
    Ok(FlowReport {
        deviation: (&direct - &composed).amax(),
        direct: direct.as_slice().to_vec(),
        composed: composed.as_slice().to_vec(),
    })
}

/// The transition kernels are point masses at `U(t, x)`, so the best
/// predictor of `X(t+s)` given `X_t` is `U(s, X_t)`. Same identity as the
/// semigroup law.
pub fn kernel_predictor_check(
    map: &dyn DiffeoMap,
    x: &Point,
    xi: &DVector<f64>,
    t: f64,
    s: f64,
) -> Result<FlowReport> {
    flow_semigroup_check(map, x, xi, t, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{catalog_maps, map_from_separable, IdentityMap, SeparableScale, DEFAULT_SEED};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn p(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn examples() {
        let id = IdentityMap::new(2).unwrap();
        let r = flow_semigroup_check(&id, &p(&[1.0, 2.0]), &p(&[0.5, -1.0]), 0.3, 0.9).unwrap();
        assert!(r.deviation < 1e-15);

        let log = map_from_separable(SeparableScale::log(), 1).unwrap();
        let r = flow_semigroup_check(&log, &p(&[1.0]), &p(&[1.0]), 0.5, 0.5).unwrap();
        assert!((r.direct[0] - E).abs() < 1e-14 && (r.composed[0] - E).abs() < 1e-14);
    }

    #[test]
    fn degenerate_times() {
        let log = map_from_separable(SeparableScale::log(), 1).unwrap();
        let (x, xi) = (p(&[2.0]), p(&[0.3]));
        let r = kernel_predictor_check(&log, &x, &xi, 0.7, 0.0).unwrap();
        assert_eq!(r.composed, flow(&log, &x, &xi, 0.7).unwrap().as_slice());
        let r = kernel_predictor_check(&log, &x, &xi, 0.0, 0.7).unwrap();
        assert_eq!(r.composed, flow(&log, &x, &xi, 0.7).unwrap().as_slice());
        assert_eq!(r.deviation, 0.0);
    }

    #[test]
    fn leaving_the_image_is_an_error() {
        let log = map_from_separable(SeparableScale::reciprocal(), 1).unwrap();
        assert!(flow(&log, &p(&[1.0]), &p(&[-2.0]), 1.0).is_err());
    }

    #[test]
    fn semigroup_on_catalog() {
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        for map in catalog_maps(2) {
            for _ in 0..20 {
                let pts = map.domain().sample_points_with(2, &mut rng);
                let xi = map.forward(&pts[1]).unwrap() - map.forward(&pts[0]).unwrap();
                let (t, s) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
                let r = flow_semigroup_check(&*map, &pts[0], &xi, t, s).unwrap();
                assert!(r.deviation < 1e-9, "{}", map.name());
            }
        }
    }
}
