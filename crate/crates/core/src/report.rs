use serde::Serialize;

/// One named numerical check: a worst-case deviation against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when the deviation is finite and at most `tolerance`.
    pub fn new(name: impl Into<String>, max_deviation: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            max_deviation,
            tolerance,
            pass: max_deviation.is_finite() && max_deviation <= tolerance,
        }
    }

    /// A check whose verdict is decided elsewhere (counts, signs).
    pub fn verdict(name: impl Into<String>, max_deviation: f64, tolerance: f64, pass: bool) -> Self {
        Check {
            name: name.into(),
            max_deviation,
            tolerance,
            pass,
        }
    }
}

/// Running maximum of absolute deviations.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxDev(pub f64);

impl MaxDev {
    pub fn add(&mut self, dev: f64) {
        // NaN poisons the maximum on purpose
        if dev.is_nan() || dev > self.0 {
            self.0 = dev;
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}
