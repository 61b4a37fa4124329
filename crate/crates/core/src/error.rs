use thiserror::Error;

/// Errors raised by the numerical kernels and the geometric constructions
/// built on top of them.
#[derive(Debug, Error)]
pub enum GeoError {
    #[error("point {point:?} lies outside the domain ({context})")]
    DomainViolation { point: Vec<f64>, context: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular matrix in {context} (pivot {pivot:e})")]
    SingularMatrix { context: String, pivot: f64 },

    #[error("matrix is not symmetric positive definite: eigenvalue {eigenvalue:e}")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("Newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("integration aborted at t = {time} after {steps_done} steps: {source}")]
    IntegrationAborted {
        time: f64,
        steps_done: usize,
        partial: Vec<(f64, Vec<f64>)>,
        #[source]
        source: Box<GeoError>,
    },

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("image-space average {average:?} is not in the image of the domain")]
    ImageNotConvex { average: Vec<f64> },

    #[error("straight image segment leaves the image of the domain at t = {t}")]
    SegmentExit { t: f64 },

    #[error("{check} failed: violation {violation:e} exceeds threshold {threshold:e}")]
    IntegrabilityFailed {
        check: &'static str,
        violation: f64,
        threshold: f64,
    },

    #[error("map does not factorize the Hessian (deviation {deviation:e})")]
    FactorizationMismatch { deviation: f64 },

    #[error("invalid discrete law: {0}")]
    InvalidLaw(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

impl GeoError {
    pub fn outside(point: &[f64], context: impl Into<String>) -> Self {
        GeoError::DomainViolation {
            point: point.to_vec(),
            context: context.into(),
        }
    }

    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        GeoError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, GeoError>;
