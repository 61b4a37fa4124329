use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::Domain;
use crate::error::{GeoError, Result};
use crate::numerics::{newton_solve, Tolerances};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

#[derive(Clone)]
pub enum ScaleKind {
    Linear,
    Log,
    /// `u(x) = 2 e^{x/2}`
    ExpHalf,
    /// `u(x) = x^p` on `x > 0`, `p ≠ 0`
    Power(f64),
    /// `u(x) = 1/x` on `x > 0`
    Reciprocal,
    Custom {
        name: String,
        u: ScalarFn,
        u_prime: ScalarFn,
        u_second: ScalarFn,
    },
}

impl fmt::Debug for ScaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleKind::Linear => write!(f, "Linear"),
            ScaleKind::Log => write!(f, "Log"),
            ScaleKind::ExpHalf => write!(f, "ExpHalf"),
            ScaleKind::Power(p) => write!(f, "Power({p})"),
            ScaleKind::Reciprocal => write!(f, "Reciprocal"),
            ScaleKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// A strictly monotone C² change of scale `u` on an open interval.
///
/// Decreasing scales such as `1/x` are accepted; `(u′)²` still defines a
/// diagonal metric.
#[derive(Debug, Clone)]
pub struct SeparableScale {
    kind: ScaleKind,
    interval: (f64, f64),
    monotonicity: Monotonicity,
}

impl SeparableScale {
    pub fn linear() -> Self {
        Self::catalog(ScaleKind::Linear, (f64::NEG_INFINITY, f64::INFINITY), Monotonicity::Increasing)
    }

    pub fn log() -> Self {
        Self::catalog(ScaleKind::Log, (0.0, f64::INFINITY), Monotonicity::Increasing)
    }

    pub fn exp_half() -> Self {
        Self::catalog(ScaleKind::ExpHalf, (f64::NEG_INFINITY, f64::INFINITY), Monotonicity::Increasing)
    }

    pub fn reciprocal() -> Self {
        Self::catalog(ScaleKind::Reciprocal, (0.0, f64::INFINITY), Monotonicity::Decreasing)
    }

    pub fn power(p: f64) -> Result<Self> {
        if !p.is_finite() || p == 0.0 {
            return Err(GeoError::invalid("p", "power scale requires a finite nonzero exponent"));
        }
        let mono = if p > 0.0 { Monotonicity::Increasing } else { Monotonicity::Decreasing };
        Ok(Self::catalog(ScaleKind::Power(p), (0.0, f64::INFINITY), mono))
    }

    /// User-supplied scale. Monotonicity is read off the sign of `u′` at
    /// the interval midpoint (or 0 / ±1 for unbounded intervals); the
    /// inverse is computed by Newton.
    pub fn custom<U, D, S>(name: &str, interval: (f64, f64), u: U, u_prime: D, u_second: S) -> Result<Self>
    where
        U: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(interval.0 < interval.1) {
            return Err(GeoError::invalid("interval", "requires lo < hi"));
        }
        let probe = interval_anchor(interval);
        let slope = u_prime(probe);
        let monotonicity = if slope > 0.0 {
            Monotonicity::Increasing
        } else if slope < 0.0 {
            Monotonicity::Decreasing
        } else {
            return Err(GeoError::invalid("u_prime", "vanishes at the interval anchor"));
        };
        Ok(SeparableScale {
            kind: ScaleKind::Custom {
                name: name.to_string(),
                u: Arc::new(u),
                u_prime: Arc::new(u_prime),
                u_second: Arc::new(u_second),
            },
            interval,
            monotonicity,
        })
    }

    fn catalog(kind: ScaleKind, interval: (f64, f64), monotonicity: Monotonicity) -> Self {
        SeparableScale { kind, interval, monotonicity }
    }

    pub fn kind(&self) -> &ScaleKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ScaleKind::Linear => "linear".into(),
            ScaleKind::Log => "log".into(),
            ScaleKind::ExpHalf => "exp_half".into(),
            ScaleKind::Power(p) => format!("power({p})"),
            ScaleKind::Reciprocal => "reciprocal".into(),
            ScaleKind::Custom { name, .. } => name.clone(),
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.kind, ScaleKind::Custom { .. })
    }

    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && self.interval.0 < x && x < self.interval.1
    }

    /// The interval as an n-fold product domain.
    pub fn domain(&self, dim: usize) -> Domain {
        Domain::open_box(vec![self.interval.0; dim], vec![self.interval.1; dim])
            .expect("scale interval is validated at construction")
    }

    pub fn u(&self, x: f64) -> f64 {
        match &self.kind {
            ScaleKind::Linear => x,
            ScaleKind::Log => x.ln(),
            ScaleKind::ExpHalf => 2.0 * (0.5 * x).exp(),
            ScaleKind::Power(p) => x.powf(*p),
            ScaleKind::Reciprocal => 1.0 / x,
            ScaleKind::Custom { u, .. } => u(x),
        }
    }

    pub fn u_prime(&self, x: f64) -> f64 {
        match &self.kind {
            ScaleKind::Linear => 1.0,
            ScaleKind::Log => 1.0 / x,
            ScaleKind::ExpHalf => (0.5 * x).exp(),
            ScaleKind::Power(p) => p * x.powf(p - 1.0),
            ScaleKind::Reciprocal => -1.0 / (x * x),
            ScaleKind::Custom { u_prime, .. } => u_prime(x),
        }
    }

    pub fn u_second(&self, x: f64) -> f64 {
        match &self.kind {
            ScaleKind::Linear => 0.0,
            ScaleKind::Log => -1.0 / (x * x),
            ScaleKind::ExpHalf => 0.5 * (0.5 * x).exp(),
            ScaleKind::Power(p) => p * (p - 1.0) * x.powf(p - 2.0),
            ScaleKind::Reciprocal => 2.0 / (x * x * x),
            ScaleKind::Custom { u_second, .. } => u_second(x),
        }
    }

    /// `u⁻¹(y)`; fails when `y` is outside the image of the interval.
    pub fn u_inverse(&self, y: f64) -> Result<f64> {
        let outside = || GeoError::outside(&[y], format!("image of scale {}", self.name()));
        if !y.is_finite() {
            return Err(outside());
        }
        let x = match &self.kind {
            ScaleKind::Linear => y,
            ScaleKind::Log => y.exp(),
            ScaleKind::ExpHalf | ScaleKind::Power(_) | ScaleKind::Reciprocal if y <= 0.0 => return Err(outside()),
            ScaleKind::ExpHalf => 2.0 * (0.5 * y).ln(),
            ScaleKind::Power(p) => y.powf(1.0 / p),
            ScaleKind::Reciprocal => 1.0 / y,
            ScaleKind::Custom { .. } => {
                let tol = Tolerances::default();
                let start = DVector::from_element(1, interval_anchor(self.interval));
                let root = newton_solve(
                    |x| {
                        if self.contains(x[0]) {
                            Ok(DVector::from_element(1, self.u(x[0]) - y))
                        } else {
                            Err(outside())
                        }
                    },
                    |x| Ok(DMatrix::from_element(1, 1, self.u_prime(x[0]))),
                    &start,
                    &tol,
                )
                .map_err(|_| outside())?;
                root[0]
            }
        };
        if self.contains(x) {
            Ok(x)
        } else {
            Err(outside())
        }
    }
}

fn interval_anchor((lo, hi): (f64, f64)) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    }
}
