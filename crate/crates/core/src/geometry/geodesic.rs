use nalgebra::DVector;
use serde::Serialize;

use super::pullback_metric;
use crate::error::{GeoError, Result};
use crate::maps::DiffeoMap;
use crate::numerics::{rk4_integrate, GaussLegendre, Tolerances};
use crate::report::{Check, MaxDev};
use crate::Point;

/// Endpoint error above which an integrated geodesic is flagged.
pub const ENDPOINT_FLAG: f64 = 1e-4;

/// A sampled geodesic on `[0, 1]` from `start` to `end`.
#[derive(Clone)]
pub struct GeodesicPath<'a> {
    pub map: &'a dyn DiffeoMap,
    pub start: Point,
    pub end: Point,
    pub samples: Vec<(f64, Point)>,
    /// `C = U(end) − U(start)`.
    pub momenta: DVector<f64>,
    /// `‖x(1) − end‖`; zero for the closed form.
    pub endpoint_error: f64,
}

impl std::fmt::Debug for GeodesicPath<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeodesicPath")
            .field("map", &self.map.name())
            .field("start", &self.start.as_slice())
            .field("end", &self.end.as_slice())
            .field("samples", &self.samples.len())
            .field("endpoint_error", &self.endpoint_error)
            .finish()
    }
}

impl GeodesicPath<'_> {
    pub fn flagged(&self) -> bool {
        !(self.endpoint_error <= ENDPOINT_FLAG)
    }

    /// Sup-norm distance between two paths sampled at the same times.
    pub fn sup_distance(&self, other: &GeodesicPath<'_>) -> f64 {
        let mut dev = MaxDev::default();
        for ((ta, a), (tb, b)) in self.samples.iter().zip(&other.samples) {
            debug_assert!((ta - tb).abs() < 1e-12);
            dev.add((a - b).amax());
        }
        dev.get()
    }
}

fn endpoints(map: &dyn DiffeoMap, x: &Point, y: &Point) -> Result<(DVector<f64>, DVector<f64>)> {
    map.domain().ensure(x, "geodesic start")?;
    map.domain().ensure(y, "geodesic end")?;
    let ux = map.forward(x)?;
    let c = map.forward(y)? - &ux;
    Ok((ux, c))
}

/// `x(t) = U⁻¹(U(x) + tC)`, verified by round trip at every sample.
fn point_on_segment(map: &dyn DiffeoMap, ux: &DVector<f64>, c: &DVector<f64>, t: f64) -> Result<Point> {
    let target = ux + c * t;
    let exit = || GeoError::SegmentExit { t };
    let xt = map.inverse(&target).map_err(|_| exit())?;
    if !map.domain().contains(xt.as_slice()) {
        return Err(exit());
    }
    let back = map.forward(&xt).map_err(|_| exit())?;
    if (back - &target).amax() > 1e-8 * (1.0 + target.amax()) {
        return Err(exit());
    }
    Ok(xt)
}

pub fn geodesic_closed_form<'a>(
    map: &'a dyn DiffeoMap,
    x: &Point,
    y: &Point,
    n_samples: usize,
) -> Result<GeodesicPath<'a>> {
    if n_samples < 2 {
        return Err(GeoError::invalid("n_samples", "need at least 2 samples"));
    }
    let (ux, c) = endpoints(map, x, y)?;
    let last = n_samples - 1;
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 / last as f64;
        let xt = match i {
            0 => x.clone(),
            i if i == last => y.clone(),
            _ => point_on_segment(map, &ux, &c, t)?,
        };
        samples.push((t, xt));
    }
    Ok(GeodesicPath {
        map,
        start: x.clone(),
        end: y.clone(),
        samples,
        momenta: c,
        endpoint_error: 0.0,
    })
}

/// Second-order geodesic equation `J ẍ + (ẋᵗ H_j ẋ)_j = 0`, integrated by
/// RK4 from `ẋ(0) = J(x)⁻¹C` with `tol.ode_steps` steps.
pub fn geodesic_euler_lagrange<'a>(
    map: &'a dyn DiffeoMap,
    x: &Point,
    y: &Point,
    tol: &Tolerances,
) -> Result<GeodesicPath<'a>> {
    let (_, c) = endpoints(map, x, y)?;
    let n = x.len();
    let v0 = map.inverse_jacobian(x)? * &c;
    let mut state = DVector::zeros(2 * n);
    state.rows_mut(0, n).copy_from(x);
    state.rows_mut(n, n).copy_from(&v0);

    let field = |_t: f64, s: &DVector<f64>| -> Result<DVector<f64>> {
        let pos: Point = s.rows(0, n).into_owned();
        let vel = s.rows(n, n).into_owned();
        map.domain().ensure(&pos, "Euler-Lagrange trajectory")?;
        let hs = map.second_derivs(&pos)?;
        let q = DVector::from_iterator(n, hs.iter().map(|h| vel.dot(&(h * &vel))));
        let acc = map
            .jacobian(&pos)?
            .lu()
            .solve(&(-q))
            .ok_or(GeoError::SingularMatrix { context: "map Jacobian".into(), pivot: 0.0 })?;
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&vel);
        out.rows_mut(n, n).copy_from(&acc);
        Ok(out)
    };
    let traj = rk4_integrate(field, &state, (0.0, 1.0), tol.ode_steps)?;
    let samples: Vec<(f64, Point)> = traj.into_iter().map(|(t, s)| (t, s.rows(0, n).into_owned())).collect();
    let endpoint_error = (&samples.last().expect("rk4 returns at least two samples").1 - y).norm();
    Ok(GeodesicPath {
        map,
        start: x.clone(),
        end: y.clone(),
        samples,
        momenta: c,
        endpoint_error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentumReport {
    /// `max_t ‖d/dt U(x(t)) − C‖∞` by finite differences over the samples.
    pub max_rate_deviation: f64,
    /// `‖U(x(1)) − U(x(0)) − C‖∞`.
    pub endpoint_deviation: f64,
    pub samples: usize,
}

impl MomentumReport {
    pub fn checks(&self, tolerance: f64) -> Vec<Check> {
        vec![
            Check::new("momentum_rate", self.max_rate_deviation, tolerance),
            Check::new("momentum_endpoint", self.endpoint_deviation, tolerance),
        ]
    }
}

/// Derivative at `a` of the quadratic through three samples.
fn three_point_derivative(ts: [f64; 3], fs: [&DVector<f64>; 3], a: f64) -> DVector<f64> {
    let [t0, t1, t2] = ts;
    let l0 = (2.0 * a - t1 - t2) / ((t0 - t1) * (t0 - t2));
    let l1 = (2.0 * a - t0 - t2) / ((t1 - t0) * (t1 - t2));
    let l2 = (2.0 * a - t0 - t1) / ((t2 - t0) * (t2 - t1));
    fs[0] * l0 + fs[1] * l1 + fs[2] * l2
}

pub fn verify_momentum_constancy(path: &GeodesicPath<'_>, _tol: &Tolerances) -> Result<MomentumReport> {
    let m = path.samples.len();
    if m < 3 {
        return Err(GeoError::invalid("path", "momentum check needs at least 3 samples"));
    }
    let images = path
        .samples
        .iter()
        .map(|(_, x)| path.map.forward(x))
        .collect::<Result<Vec<_>>>()?;
    let ts: Vec<f64> = path.samples.iter().map(|(t, _)| *t).collect();
    let mut dev = MaxDev::default();
    for i in 0..m {
        let j = i.clamp(1, m - 2);
        let rate = three_point_derivative(
            [ts[j - 1], ts[j], ts[j + 1]],
            [&images[j - 1], &images[j], &images[j + 1]],
            ts[i],
        );
        dev.add((rate - &path.momenta).amax());
    }
    let span = ts[m - 1] - ts[0];
    let endpoint = ((&images[m - 1] - &images[0]) / span - &path.momenta).amax();
    Ok(MomentumReport {
        max_rate_deviation: dev.get(),
        endpoint_deviation: endpoint,
        samples: m,
    })
}

/// Largest step of the five-point stencil in `t` used for `ẋ`.
pub const SPEED_STEP: f64 = 1e-4;

/// Speed `√(ẋᵗ g ẋ)` of the closed-form geodesic at the Gauss-Legendre
/// nodes, with `ẋ` from a five-point stencil in `t` that stays inside
/// `[0, 1]`.
pub fn speed_profile(map: &dyn DiffeoMap, x: &Point, y: &Point, tol: &Tolerances) -> Result<Vec<(f64, f64, f64)>> {
    let (ux, c) = endpoints(map, x, y)?;
    let rule = GaussLegendre::unit(tol.quad_points);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| {
            let h = SPEED_STEP.min(t / 3.0).min((1.0 - t) / 3.0);
            let at = |s: f64| point_on_segment(map, &ux, &c, s);
            let xdot = ((at(t + h)? - at(t - h)?) * 8.0 - (at(t + 2.0 * h)? - at(t - 2.0 * h)?)) / (12.0 * h);
            let metric = pullback_metric(map, &at(t)?)?;
            Ok((t, w, metric.quadratic(&xdot).sqrt()))
        })
        .collect()
}

/// Riemannian length of the closed-form geodesic by quadrature.
pub fn arclength(map: &dyn DiffeoMap, x: &Point, y: &Point, tol: &Tolerances) -> Result<f64> {
    Ok(speed_profile(map, x, y, tol)?.iter().map(|(_, w, s)| w * s).sum())
}
