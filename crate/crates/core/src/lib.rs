pub mod bregman;
pub mod error;
pub mod geometry;
pub mod hessian_bridge;
pub mod legendre;
pub mod maps;
pub mod means;
pub mod numerics;
pub mod report;

pub use error::{GeoError, Result};

/// A point of the domain, in its global chart.
pub type Point = nalgebra::DVector<f64>;
