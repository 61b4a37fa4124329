use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use quasimean::maps::{builtin_map, builtin_potential, ConvexPotential, DiffeoMap, Params, DEFAULT_SEED};
use quasimean::numerics::Tolerances;
use quasimean::{GeoError, Point};
use serde::Deserialize;

use crate::error::CliError;

pub const SEED_ENV: &str = "GEO_SEED";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSpec {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

/// One run, as read from the `--config` JSON document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, alias = "map_spec")]
    pub map: Option<CatalogSpec>,
    #[serde(default, alias = "potential_spec")]
    pub potential: Option<CatalogSpec>,
    pub dimension: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub input_path: Option<PathBuf>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_samples() -> usize {
    20
}

pub fn parse_seed(s: &str) -> Result<u64, CliError> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| CliError::Input(format!("{SEED_ENV}: `{s}` is not a 64-bit integer")))
}

impl RunConfig {
    /// Reads the config, applies `GEO_SEED`, and resolves relative paths
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.seed = parse_seed(&seed)?;
        }
        if cfg.dimension == 0 {
            return Err(CliError::Input("dimension must be at least 1".into()));
        }
        cfg.tolerances
            .validate()
            .map_err(|e| CliError::Input(format!("tolerances: {e}")))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input_path, &mut cfg.output_path].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn map(&self) -> Result<Option<Arc<dyn DiffeoMap>>, CliError> {
        self.map
            .as_ref()
            .map(|s| builtin_map(&s.name, self.dimension, &s.params).map_err(|e| spec_error("map", e)))
            .transpose()
    }

    pub fn potential(&self) -> Result<Option<Arc<dyn ConvexPotential>>, CliError> {
        self.potential
            .as_ref()
            .map(|s| builtin_potential(&s.name, self.dimension, &s.params).map_err(|e| spec_error("potential", e)))
            .transpose()
    }

    pub fn require_map(&self) -> Result<Arc<dyn DiffeoMap>, CliError> {
        self.map()?.ok_or_else(|| CliError::Input("config has no `map`".into()))
    }

    pub fn require_potential(&self) -> Result<Arc<dyn ConvexPotential>, CliError> {
        self.potential()?
            .ok_or_else(|| CliError::Input("config has no `potential`".into()))
    }

    pub fn point(&self, coords: &[f64]) -> Result<Point, CliError> {
        if coords.len() != self.dimension {
            return Err(GeoError::DimensionMismatch { expected: self.dimension, found: coords.len() }.into());
        }
        Ok(DVector::from_column_slice(coords))
    }

    /// Rows of `input_path`, each `per_row` points wide.
    pub fn input_rows(&self, per_row: usize) -> Result<Vec<Vec<Point>>, CliError> {
        let path = self
            .input_path
            .as_ref()
            .ok_or_else(|| CliError::Input("config has no `input_path`".into()))?;
        let rows = read_csv(path)?;
        let width = per_row * self.dimension;
        rows.into_iter()
            .map(|row| {
                if row.len() != width {
                    return Err(GeoError::DimensionMismatch { expected: width, found: row.len() }.into());
                }
                Ok(row.chunks(self.dimension).map(DVector::from_column_slice).collect())
            })
            .collect()
    }
}

fn spec_error(what: &str, e: GeoError) -> CliError {
    match e {
        GeoError::UnknownCatalogEntry(_) | GeoError::InvalidParameter { .. } => {
            CliError::Input(format!("{what}: {e}"))
        }
        other => other.into(),
    }
}

/// Headerless numeric CSV; every row must have the same number of fields.
pub fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(k, field)| {
                field.parse::<f64>().map_err(|_| {
                    CliError::Input(format!(
                        "{}:{line}: field {}: `{field}` is not a number",
                        path.display(),
                        k + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::Input(format!(
                    "{}:{line}: expected {} fields, found {}",
                    path.display(),
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(GeoError::EmptyInput("input file has no rows").into());
    }
    Ok(rows)
}
