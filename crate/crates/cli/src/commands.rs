use std::path::Path;
use std::sync::Arc;

use quasimean::bregman::{compare_divergence_distance, ComparisonVerdict};
use quasimean::geometry::{geodesic_closed_form, geodesic_distance, verify_momentum_constancy};
use quasimean::hessian_bridge::{check_map_integrability, check_sqrt_integrability, map_to_potential, potential_to_map};
use quasimean::legendre::{duality_identities, ConjugatePair, InverseMode};
use quasimean::maps::{ConvexPotential, DiffeoMap, Domain};
use quasimean::means::{generalized_mean_nd, verify_mean_minimizes};
use quasimean::numerics::SquareRootKind;
use quasimean::report::Check;
use quasimean::Point;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{write_csv, Report};
use crate::{Coords, RootKind};

/// Tolerance for the duality identities and momentum rates.
pub const DUALITY_TOLERANCE: f64 = 1e-5;
pub const MOMENTUM_TOLERANCE: f64 = 1e-4;

fn required<'a>(c: Option<&'a Coords>, flag: &str) -> Result<&'a [f64], CliError> {
    c.map(|c| c.0.as_slice())
        .ok_or_else(|| CliError::Input(format!("missing --{flag}")))
}

impl From<RootKind> for SquareRootKind {
    fn from(k: RootKind) -> Self {
        match k {
            RootKind::Symmetric => SquareRootKind::SymmetricPsd,
            RootKind::Cholesky => SquareRootKind::CholeskyTranspose,
        }
    }
}

/// `count` pairs with `x ≤ y` componentwise, drawn from the sample box.
pub fn forward_pairs(domain: &Domain, count: usize, seed: u64) -> Vec<(Point, Point)> {
    domain
        .sample_points(2 * count, seed)
        .chunks(2)
        .map(|c| (c[0].inf(&c[1]), c[0].sup(&c[1])))
        .collect()
}

/// The configured map, or the square-root map of the potential.
pub fn map_for(
    cfg: &RunConfig,
    potential: &Arc<dyn ConvexPotential>,
) -> Result<Arc<dyn DiffeoMap>, CliError> {
    match cfg.map()? {
        Some(m) => Ok(m),
        None => {
            let base = potential.domain().center();
            let m = potential_to_map(potential.clone(), SquareRootKind::SymmetricPsd, &base, &cfg.tolerances)?;
            Ok(Arc::new(m))
        }
    }
}

pub fn mean(cfg: &RunConfig) -> Result<Report, CliError> {
    let map = cfg.require_map()?;
    let points: Vec<Point> = cfg.input_rows(1)?.into_iter().flatten().collect();
    let mean = generalized_mean_nd(&*map, &points)?;
    let distances = points
        .iter()
        .map(|p| geodesic_distance(&*map, p, &mean))
        .collect::<quasimean::Result<Vec<f64>>>()?;
    let minimality = verify_mean_minimizes(&*map, &points, &mean, cfg.samples, cfg.seed)?;

    let mut r = Report::new("mean", cfg);
    r.map = Some(map.name());
    r.set("mean", mean.as_slice());
    r.set("distances", &distances);
    r.set("points", points.len());
    r.checks.push(Check::verdict(
        "mean_minimality",
        (-minimality.min_margin).max(0.0),
        0.0,
        minimality.passed(),
    ));
    r.set("minimality", &minimality);
    Ok(r)
}

pub fn distance(cfg: &RunConfig, x: Option<&Coords>, y: Option<&Coords>) -> Result<Report, CliError> {
    let map = cfg.require_map()?;
    let x = cfg.point(required(x, "x")?)?;
    let y = cfg.point(required(y, "y")?)?;
    let d = geodesic_distance(&*map, &x, &y)?;
    let c = map.forward(&y)? - map.forward(&x)?;
    let mut r = Report::new("distance", cfg);
    r.map = Some(map.name());
    r.set("distance", d);
    r.set("momenta", c.as_slice());
    Ok(r)
}

pub fn geodesic(
    cfg: &RunConfig,
    x: Option<&Coords>,
    y: Option<&Coords>,
    points: usize,
    csv: Option<&Path>,
) -> Result<Report, CliError> {
    let map = cfg.require_map()?;
    let x = cfg.point(required(x, "x")?)?;
    let y = cfg.point(required(y, "y")?)?;
    if points < 3 {
        return Err(CliError::Input("--points must be at least 3".into()));
    }
    let path = geodesic_closed_form(&*map, &x, &y, points)?;
    let rows: Vec<Vec<f64>> = path
        .samples
        .iter()
        .map(|(t, p)| std::iter::once(*t).chain(p.iter().copied()).collect())
        .collect();
    if let Some(csv) = csv {
        write_csv(csv, &rows)?;
    }
    let momentum = verify_momentum_constancy(&path, &cfg.tolerances)?;

    let mut r = Report::new("geodesic", cfg);
    r.map = Some(map.name());
    r.set("distance", geodesic_distance(&*map, &x, &y)?);
    r.set("momenta", path.momenta.as_slice());
    r.set("samples", &rows);
    r.checks.extend(momentum.checks(MOMENTUM_TOLERANCE));
    Ok(r)
}

pub fn comparison_summary(v: &ComparisonVerdict, with_outcomes: bool) -> serde_json::Value {
    let mut out = json!({
        "k_sign": v.k_sign,
        "inequality_expected": v.inequality_expected,
        "pairs_tested": v.pairs_tested,
        "forward_pairs": v.forward_pairs,
        "backward_pairs": v.backward_pairs,
        "unordered_pairs": v.unordered_pairs,
        "max_gap": v.max_gap,
        "violations": v.violations,
    });
    if with_outcomes {
        out["outcomes"] = json!(v.outcomes);
    }
    out
}

pub fn compare(cfg: &RunConfig, x: Option<&Coords>, y: Option<&Coords>) -> Result<Report, CliError> {
    let potential = cfg.require_potential()?;
    let map = map_for(cfg, &potential)?;
    let (pairs, explicit) = match (x, y) {
        (Some(x), Some(y)) => (vec![(cfg.point(&x.0)?, cfg.point(&y.0)?)], true),
        (None, None) if cfg.input_path.is_some() => {
            let rows = cfg.input_rows(2)?;
            (rows.into_iter().map(|mut r| (r.remove(0), r.remove(0))).collect(), true)
        }
        (None, None) => {
            let fwd = forward_pairs(potential.domain(), cfg.samples, cfg.seed);
            let back: Vec<_> = fwd.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
            (fwd.into_iter().chain(back).collect(), false)
        }
        _ => return Err(CliError::Input("--x and --y must be given together".into())),
    };
    let verdict = compare_divergence_distance(&*potential, &*map, &pairs)?;

    let mut r = Report::new("compare", cfg);
    r.map = Some(map.name());
    r.potential = Some(potential.name());
    r.set("comparison", comparison_summary(&verdict, explicit));
    r.checks.extend(verdict.checks());
    Ok(r)
}

pub fn factorize(
    cfg: &RunConfig,
    x: Option<&Coords>,
    y: Option<&Coords>,
    kind: RootKind,
) -> Result<Report, CliError> {
    let mut r = Report::new("factorize", cfg);
    let tol = &cfg.tolerances;
    if let Some(potential) = cfg.potential()? {
        let base = match x {
            Some(c) => cfg.point(&c.0)?,
            None => potential.domain().center(),
        };
        let mut samples = potential.domain().sample_points(cfg.samples, cfg.seed);
        samples.push(base.clone());
        let report = check_sqrt_integrability(&*potential, kind.into(), &samples, tol)?;
        r.potential = Some(potential.name());
        r.checks.extend(report.checks());
        if report.passed() {
            if let Some(y) = y {
                let map = potential_to_map(potential.clone(), kind.into(), &base, tol)?;
                r.set("u_at_y", map.forward(&cfg.point(&y.0)?)?.as_slice());
            }
        }
        r.set("factorization", &report);
        r.set("base", base.as_slice());
    } else {
        let map = cfg.require_map()?;
        let base = match x {
            Some(c) => cfg.point(&c.0)?,
            None => map.domain().center(),
        };
        let mut samples = map.domain().sample_points(cfg.samples, cfg.seed);
        samples.push(base.clone());
        let report = check_map_integrability(&*map, &samples, tol)?;
        r.map = Some(map.name());
        r.checks.extend(report.checks());
        if report.passed() {
            if let Some(y) = y {
                let pot = map_to_potential(map.clone(), &base, tol)?;
                let y = cfg.point(&y.0)?;
                r.set("phi_at_y", pot.value(&y)?);
                r.set("gradient_at_y", pot.gradient(&y)?.as_slice());
            }
        }
        r.set("integrability", &report);
        r.set("base", base.as_slice());
    }
    Ok(r)
}

pub fn conjugate(cfg: &RunConfig, xi: Option<&Coords>, newton: bool) -> Result<Report, CliError> {
    let potential = cfg.require_potential()?;
    let mode = if newton { InverseMode::Newton } else { InverseMode::Analytic };
    let pair = ConjugatePair::new(potential.clone(), mode, &cfg.tolerances);

    let mut r = Report::new("conjugate", cfg);
    r.potential = Some(potential.name());
    r.set("mode", mode);
    if let Some(xi) = xi {
        let xi = cfg.point(&xi.0)?;
        r.set("xi", xi.as_slice());
        r.set("value", pair.dual.value(&xi)?);
        r.set("gradient", pair.dual.gradient(&xi)?.as_slice());
    }
    let points = potential.domain().sample_points(cfg.samples, cfg.seed);
    let identities = duality_identities(&pair, &points, &cfg.tolerances)?;
    r.checks.extend(identities.checks(DUALITY_TOLERANCE));
    r.set("identities", &identities);
    Ok(r)
}
