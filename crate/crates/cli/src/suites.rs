use std::sync::Arc;

use quasimean::bregman::{compare_divergence_distance, taylor_identity_check};
use quasimean::geometry::{
    check_canonical, flow, flow_semigroup_check, geodesic_closed_form, geodesic_distance, geodesic_euler_lagrange,
    hamiltonian_flow, initial_momentum, speed_profile, verify_momentum_constancy, PhaseState,
};
use quasimean::hessian_bridge::{
    check_map_integrability, check_sqrt_integrability, fd_hessian_deviation, map_to_potential, potential_to_map,
    FACTORIZATION_TOLERANCE,
};
use quasimean::legendre::{dual_distance_check, dual_geodesic_check, duality_identities, ConjugatePair, InverseMode};
use quasimean::maps::{ConvexPotential, DiffeoMap};
use quasimean::numerics::SquareRootKind;
use quasimean::report::{Check, MaxDev};
use quasimean::GeoError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::commands::{comparison_summary, forward_pairs, map_for, DUALITY_TOLERANCE, MOMENTUM_TOLERANCE};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::Report;
use crate::Suite;

pub const AGREEMENT_TOLERANCE: f64 = 1e-4;
pub const ENERGY_TOLERANCE: f64 = 1e-7;
pub const BRACKET_TOLERANCE: f64 = 1e-4;
pub const LENGTH_TOLERANCE: f64 = 1e-6;
pub const SEMIGROUP_TOLERANCE: f64 = 1e-9;
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-3;
pub const TAYLOR_TOLERANCE: f64 = 1e-8;
pub const TAYLOR_POINTS: usize = 64;
pub const DUAL_DISTANCE_TOLERANCE: f64 = 1e-6;

type Outcome = Result<(Value, Vec<Check>), CliError>;

/// Pairs whose image segment leaves the image are skipped, not failed.
fn skippable(e: &GeoError) -> bool {
    matches!(e, GeoError::SegmentExit { .. } | GeoError::ImageNotConvex { .. })
}

fn sup_states(a: &[quasimean::Point], b: &[quasimean::Point]) -> f64 {
    let mut dev = MaxDev::default();
    for (p, q) in a.iter().zip(b) {
        dev.add((p - q).amax());
    }
    dev.get()
}

fn dynamics(cfg: &RunConfig, map: &dyn DiffeoMap) -> Outcome {
    let tol = &cfg.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts = map.domain().sample_points_with(2 * cfg.samples, &mut rng);
    let mut d = [MaxDev::default(); 12];
    let [el_cf, ham_cf, el_ham, energy, rate, brackets_yy, brackets_pp, brackets_ypi, semigroup, degenerate, length, speed] =
        &mut d;
    let (mut tested, mut skipped) = (0usize, 0usize);
    for pair in pts.chunks(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let cf = match geodesic_closed_form(map, x, y, tol.ode_steps + 1) {
            Ok(p) => p,
            Err(e) if skippable(&e) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        tested += 1;
        let el = geodesic_euler_lagrange(map, x, y, tol)?;
        let s0 = PhaseState::new(x.clone(), initial_momentum(map, x, y)?)?;
        let ham = hamiltonian_flow(map, &s0, (0.0, 1.0), tol)?;
        let cf_pts: Vec<_> = cf.samples.iter().map(|(_, p)| p.clone()).collect();
        let el_pts: Vec<_> = el.samples.iter().map(|(_, p)| p.clone()).collect();
        let ham_pts: Vec<_> = ham.states.iter().map(|s| s.x.clone()).collect();
        el_cf.add(sup_states(&el_pts, &cf_pts));
        ham_cf.add(sup_states(&ham_pts, &cf_pts));
        el_ham.add(sup_states(&el_pts, &ham_pts));
        energy.add(ham.energy_drift());
        let m = verify_momentum_constancy(&el, tol)?;
        rate.add(m.max_rate_deviation);

        let b = check_canonical(map, x, tol)?;
        brackets_yy.add(b.yy);
        brackets_pp.add(b.pipi);
        brackets_ypi.add(b.ypi);

        let xi = &cf.momenta;
        let (t, s) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
        semigroup.add(flow_semigroup_check(map, x, xi, t, s)?.deviation);
        degenerate.add((flow(map, x, xi, 0.0)? - x).amax());
        degenerate.add(flow_semigroup_check(map, x, xi, t, 0.0)?.deviation);
        degenerate.add(flow_semigroup_check(map, x, xi, 0.0, s)?.deviation);

        let dist = geodesic_distance(map, x, y)?;
        let profile = speed_profile(map, x, y, tol)?;
        length.add((profile.iter().map(|(_, w, v)| w * v).sum::<f64>() - dist).abs());
        for (_, _, v) in profile {
            speed.add((v - dist).abs());
        }
    }
    let checks = vec![
        Check::verdict("dynamics_pairs", skipped as f64, cfg.samples.saturating_sub(1) as f64, tested > 0),
        Check::new("euler_lagrange_vs_closed_form", el_cf.get(), AGREEMENT_TOLERANCE),
        Check::new("hamiltonian_vs_closed_form", ham_cf.get(), AGREEMENT_TOLERANCE),
        Check::new("euler_lagrange_vs_hamiltonian", el_ham.get(), AGREEMENT_TOLERANCE),
        Check::new("energy_drift", energy.get(), ENERGY_TOLERANCE),
        Check::new("momentum_rate", rate.get(), MOMENTUM_TOLERANCE),
        Check::new("bracket_y_y", brackets_yy.get(), BRACKET_TOLERANCE),
        Check::new("bracket_pi_pi", brackets_pp.get(), BRACKET_TOLERANCE),
        Check::new("bracket_y_pi", brackets_ypi.get(), BRACKET_TOLERANCE),
        Check::new("flow_semigroup", semigroup.get(), SEMIGROUP_TOLERANCE),
        Check::new("flow_degenerate_times", degenerate.get(), 0.0),
        Check::new("arclength_vs_distance", length.get(), LENGTH_TOLERANCE),
        Check::new("speed_constancy", speed.get(), LENGTH_TOLERANCE),
    ];
    Ok((json!({ "pairs_tested": tested, "pairs_skipped": skipped }), checks))
}

fn bridge(cfg: &RunConfig, map: Option<&Arc<dyn DiffeoMap>>, potential: Option<&Arc<dyn ConvexPotential>>) -> Outcome {
    let tol = &cfg.tolerances;
    let mut results = serde_json::Map::new();
    let mut checks = Vec::new();
    if let Some(pot) = potential {
        let base = pot.domain().center();
        let mut samples = pot.domain().sample_points(cfg.samples, cfg.seed);
        samples.push(base.clone());
        let rep = check_sqrt_integrability(&**pot, SquareRootKind::SymmetricPsd, &samples, tol)?;
        checks.extend(rep.checks());
        if rep.passed() && rep.factorization_deviation <= FACTORIZATION_TOLERANCE {
            let u: Arc<dyn DiffeoMap> =
                Arc::new(potential_to_map(pot.clone(), SquareRootKind::SymmetricPsd, &base, tol)?);
            let back = map_to_potential(u, &base, tol)?;
            let dev = fd_hessian_deviation(&back, &**pot, &samples, tol)?;
            checks.push(Check::new("round_trip_hessian", dev, ROUND_TRIP_TOLERANCE));
        }
        results.insert("factorization".into(), json!(rep));
    }
    if let Some(map) = map {
        let base = map.domain().center();
        let mut samples = map.domain().sample_points(cfg.samples, cfg.seed);
        samples.push(base.clone());
        let rep = check_map_integrability(&**map, &samples, tol)?;
        checks.extend(rep.checks());
        if rep.passed() && map.domain().bounds().is_some() {
            let pot = map_to_potential(map.clone(), &base, tol)?;
            let dev = fd_hessian_deviation(&pot, &pot, &samples, tol)?;
            checks.push(Check::new("staircase_hessian", dev, ROUND_TRIP_TOLERANCE));
        }
        results.insert("integrability".into(), json!(rep));
    }
    Ok((Value::Object(results), checks))
}

fn bregman(cfg: &RunConfig, potential: &Arc<dyn ConvexPotential>) -> Outcome {
    let map = map_for(cfg, potential)?;
    let fwd = forward_pairs(potential.domain(), cfg.samples, cfg.seed);
    let mut pairs = fwd.clone();
    pairs.extend(fwd.iter().map(|(a, b)| (b.clone(), a.clone())));
    let verdict = compare_divergence_distance(&**potential, &*map, &pairs)?;
    let mut checks = verdict.checks();
    let mut taylor = MaxDev::default();
    for (x, y) in &fwd {
        taylor.add(taylor_identity_check(&**potential, x, y, TAYLOR_POINTS)?.residual);
    }
    checks.push(Check::new("taylor_identity", taylor.get(), TAYLOR_TOLERANCE));
    Ok((comparison_summary(&verdict, false), checks))
}

fn legendre(cfg: &RunConfig, potential: &Arc<dyn ConvexPotential>) -> Outcome {
    let tol = &cfg.tolerances;
    let map = map_for(cfg, potential)?;
    let pair = ConjugatePair::new(potential.clone(), InverseMode::Newton, tol);
    let points = potential.domain().sample_points(cfg.samples, cfg.seed);
    let identities = duality_identities(&pair, &points, tol)?;
    let mut checks = identities.checks(DUALITY_TOLERANCE);

    let (mut dist, mut path, mut speed) = (MaxDev::default(), MaxDev::default(), MaxDev::default());
    let (mut tested, mut skipped) = (0usize, 0usize);
    let pts = potential.domain().sample_points(2 * cfg.samples, cfg.seed.wrapping_add(1));
    for c in pts.chunks(2) {
        let geo = match dual_geodesic_check(&pair, map.clone(), &c[0], &c[1], 11) {
            Ok(g) => g,
            Err(e) if skippable(&e) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        tested += 1;
        path.add(geo.path_deviation);
        speed.add(geo.speed_deviation);
        dist.add(dual_distance_check(&pair, map.clone(), &c[0], &c[1])?.deviation);
    }
    checks.push(Check::new("dual_distance", dist.get(), DUAL_DISTANCE_TOLERANCE));
    checks.push(Check::new("dual_geodesic_path", path.get(), DUALITY_TOLERANCE));
    checks.push(Check::new("dual_geodesic_speed", speed.get(), DUALITY_TOLERANCE));
    let results = json!({
        "identities": identities,
        "pairs_tested": tested,
        "pairs_skipped": skipped,
    });
    Ok((results, checks))
}

pub fn verify(cfg: &RunConfig, suite: Suite) -> Result<Report, CliError> {
    let map = cfg.map()?;
    let potential = cfg.potential()?;
    let mut r = Report::new("verify", cfg);
    r.map = map.as_ref().map(|m| m.name());
    r.potential = potential.as_ref().map(|p| p.name());
    let need_map = || map.clone().ok_or_else(|| CliError::Input("the dynamics suite needs a `map`".into()));
    let need_pot = |s: &str| {
        potential
            .clone()
            .ok_or_else(|| CliError::Input(format!("the {s} suite needs a `potential`")))
    };

    let mut run = |name: &str, outcome: Outcome| -> Result<(), CliError> {
        let (results, checks) = outcome?;
        r.set(name, results);
        r.checks.extend(checks);
        Ok(())
    };
    match suite {
        Suite::Dynamics => run("dynamics", dynamics(cfg, &*need_map()?))?,
        Suite::Bridge => {
            if map.is_none() && potential.is_none() {
                return Err(CliError::Input("the bridge suite needs a `map` or a `potential`".into()));
            }
            run("bridge", bridge(cfg, map.as_ref(), potential.as_ref()))?
        }
        Suite::Bregman => run("bregman", bregman(cfg, &need_pot("bregman")?))?,
        Suite::Legendre => run("legendre", legendre(cfg, &need_pot("legendre")?))?,
        Suite::All => {
            if map.is_none() && potential.is_none() {
                return Err(CliError::Input("config has neither `map` nor `potential`".into()));
            }
            if let Some(m) = &map {
                run("dynamics", dynamics(cfg, &**m))?;
            }
            run("bridge", bridge(cfg, map.as_ref(), potential.as_ref()))?;
            if let Some(p) = &potential {
                run("bregman", bregman(cfg, p))?;
                run("legendre", legendre(cfg, p))?;
            }
        }
    }
    r.suite = Some(
        match suite {
            Suite::Dynamics => "dynamics",
            Suite::Bridge => "bridge",
            Suite::Bregman => "bregman",
            Suite::Legendre => "legendre",
            Suite::All => "all",
        }
        .to_string(),
    );
    Ok(r)
}
