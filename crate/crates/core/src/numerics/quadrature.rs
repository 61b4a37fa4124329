use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};

/// Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule with `n` points, cached per `n`.
    pub fn unit(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard.entry(n).or_insert_with(|| Arc::new(Self::compute(n))).clone()
    }

    fn compute(n: usize) -> GaussLegendre {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - z);
            nodes[n - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * f(s)).sum()
    }
}

/// Legendre polynomial P_n and its derivative at `z`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

type CurveFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// One C¹ piece of a path, parameterized on `[0, 1]`.
#[derive(Clone)]
pub struct Segment {
    point: CurveFn,
    velocity: CurveFn,
}

impl Segment {
    pub fn new<P, V>(point: P, velocity: V) -> Self
    where
        P: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
        V: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        Segment {
            point: Arc::new(point),
            velocity: Arc::new(velocity),
        }
    }

    pub fn line(from: &DVector<f64>, to: &DVector<f64>) -> Self {
        let a = from.clone();
        let d = to - from;
        let d2 = d.clone();
        Segment::new(move |s| &a + &d * s, move |_| d2.clone())
    }

    pub fn point(&self, s: f64) -> DVector<f64> {
        (self.point)(s)
    }

    pub fn velocity(&self, s: f64) -> DVector<f64> {
        (self.velocity)(s)
    }
}

impl std::fmt::Debug for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Segment")
            .field("start", &self.point(0.0).as_slice())
            .field("end", &self.point(1.0).as_slice())
            .finish()
    }
}

/// Piecewise-C¹ curve.
#[derive(Debug, Clone, Default)]
pub struct Path {
    pub segments: Vec<Segment>,
}

impl Path {
    pub fn straight(from: &DVector<f64>, to: &DVector<f64>) -> Self {
        Path {
            segments: vec![Segment::line(from, to)],
        }
    }

    pub fn polyline(points: &[DVector<f64>]) -> Self {
        Path {
            segments: points.windows(2).map(|w| Segment::line(&w[0], &w[1])).collect(),
        }
    }

    /// Axis-aligned path that moves coordinate 1, then 2, ... from `from`
    /// to `to`. Coordinates that do not change contribute no segment; when
    /// none change the path is the single zero-length segment at `from`.
    pub fn staircase(from: &DVector<f64>, to: &DVector<f64>) -> Self {
        if from == to {
            return Path::straight(from, to);
        }
        let mut corners = vec![from.clone()];
        let mut cur = from.clone();
        for k in 0..from.len() {
            if to[k] != from[k] {
                cur[k] = to[k];
                corners.push(cur.clone());
            }
        }
        Path::polyline(&corners)
    }

    pub fn with_segment(mut self, seg: Segment) -> Self {
        self.segments.push(seg);
        self
    }
}

/// Composite Gauss-Legendre approximation of `∫ F(γ(s)) γ̇(s) ds`.
///
/// `field` returns an `m × n` matrix at each point (use a `1 × n` row for a
/// covector field); the result has length `m`.
pub fn path_line_integral<F>(field: F, path: &Path, quad_points: usize) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    if quad_points == 0 {
        return Err(GeoError::invalid("quad_points", "must be at least 1"));
    }
    let rule = GaussLegendre::unit(quad_points);
    let mut acc: Option<DVector<f64>> = None;
    for seg in &path.segments {
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let p = seg.point(s);
            let contrib = field(&p)? * seg.velocity(s) * w;
            match acc.as_mut() {
                Some(a) => *a += contrib,
                None => acc = Some(contrib),
            }
        }
    }
    match acc {
        Some(a) => Ok(a),
        None => {
            // empty path: evaluate the field once to learn the output size
            let start = path.segments.first().map(|s| s.point(0.0));
            match start {
                Some(p) => Ok(DVector::zeros(field(&p)?.nrows())),
                None => Ok(DVector::zeros(0)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::unit(8);
        // degree 15 is the exactness limit for 8 points
        let got = rule.integrate(|s| s.powi(15));
        assert!((got - 1.0 / 16.0).abs() < 1e-15);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rule_with_many_points_is_accurate() {
        for n in [1, 2, 5, 32, 64] {
            let rule = GaussLegendre::unit(n);
            assert_eq!(rule.nodes.len(), n);
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
        let got = GaussLegendre::unit(32).integrate(|s| (3.0 * s).exp());
        assert!((got - ((3.0f64).exp() - 1.0) / 3.0).abs() < 1e-13);
    }

    #[test]
    fn identity_field_on_straight_line() {
        let (x, y) = (v(&[1.0, -2.0, 0.5]), v(&[3.0, 1.0, 0.0]));
        let got = path_line_integral(|_| Ok(DMatrix::identity(3, 3)), &Path::straight(&x, &y), 32).unwrap();
        assert!((got - (&y - &x)).amax() < 1e-14);
    }

    #[test]
    fn zero_field() {
        let got = path_line_integral(|_| Ok(DMatrix::zeros(2, 2)), &Path::straight(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])), 32).unwrap();
        assert_eq!(got, DVector::zeros(2));
    }

    #[test]
    fn diagonal_exponential_field_on_axis_path() {
        // F = diag(e^{x_i/2}); antiderivative 2 e^{x/2}
        let field = |p: &DVector<f64>| Ok(DMatrix::from_diagonal(&p.map(|t| (t / 2.0).exp())));
        let path = Path::polyline(&[v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[1.0, 1.0])]);
        let got = path_line_integral(field, &path, 32).unwrap();
        let expected = 2.0 * ((0.5f64).exp() - 1.0);
        assert!((got[0] - expected).abs() < 1e-13);
        assert!((got[1] - expected).abs() < 1e-13);
    }

    #[test]
    fn staircase_skips_flat_coordinates() {
        let p = Path::staircase(&v(&[0.0, 1.0, 2.0]), &v(&[1.0, 1.0, 3.0]));
        assert_eq!(p.segments.len(), 2);
        assert!((p.segments[1].point(1.0) - v(&[1.0, 1.0, 3.0])).amax() == 0.0);
    }

    #[test]
    fn degenerate_staircase_integrates_to_zero() {
        let a = v(&[0.5, -1.0]);
        let field = |_: &DVector<f64>| Ok(DMatrix::from_row_slice(1, 2, &[3.0, 4.0]));
        let out = path_line_integral(field, &Path::staircase(&a, &a), 8).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn gradient_field_is_path_independent() {
        // F = ∇f as a row, f = x0² x1 + sin(x1)
        let field = |p: &DVector<f64>| {
            Ok(DMatrix::from_row_slice(1, 2, &[2.0 * p[0] * p[1], p[0] * p[0] + p[1].cos()]))
        };
        let (a, b) = (v(&[0.2, -0.3]), v(&[1.4, 0.9]));
        let straight = path_line_integral(field, &Path::straight(&a, &b), 32).unwrap()[0];
        let stair = path_line_integral(field, &Path::staircase(&a, &b), 32).unwrap()[0];
        let f = |p: &DVector<f64>| p[0] * p[0] * p[1] + p[1].sin();
        assert!((straight - (f(&b) - f(&a))).abs() < 1e-12);
        assert!((straight - stair).abs() < 1e-12);
    }
}
