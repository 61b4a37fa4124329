use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::maps::{DiffeoMap, DEFAULT_SEED};
use crate::numerics::{fd_gradient5, fd_jacobian, rk4_integrate, Tolerances};
use crate::report::{Check, MaxDev};
use crate::Point;

/// Position and canonical momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Point,
    pub p: DVector<f64>,
}

impl PhaseState {
    pub fn new(x: Point, p: DVector<f64>) -> Result<Self> {
        if x.len() != p.len() {
            return Err(GeoError::DimensionMismatch { expected: x.len(), found: p.len() });
        }
        Ok(PhaseState { x, p })
    }
}

/// `J⁻ᵗ p`, whose squared norm is `pᵗ g⁻¹ p`.
fn cotransport(map: &dyn DiffeoMap, x: &Point, p: &DVector<f64>) -> Result<DVector<f64>> {
    map.jacobian(x)?
        .transpose()
        .lu()
        .solve(p)
        .ok_or(GeoError::SingularMatrix { context: "map Jacobian".into(), pivot: 0.0 })
}

/// `H(x, p) = ½ pᵗ g⁻¹(x) p`.
pub fn hamiltonian(map: &dyn DiffeoMap, x: &Point, p: &DVector<f64>) -> Result<f64> {
    map.domain().ensure(x, "Hamiltonian evaluation")?;
    Ok(0.5 * cotransport(map, x, p)?.norm_squared())
}

/// Momentum `Jᵗ C` that sends `x` to `y` in unit time.
pub fn initial_momentum(map: &dyn DiffeoMap, x: &Point, y: &Point) -> Result<DVector<f64>> {
    map.domain().ensure(x, "geodesic start")?;
    map.domain().ensure(y, "geodesic end")?;
    let c = map.forward(y)? - map.forward(x)?;
    Ok(map.jacobian(x)?.transpose() * c)
}

#[derive(Debug, Clone)]
pub struct HamiltonianTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub energies: Vec<f64>,
}

impl HamiltonianTrajectory {
    /// `max_t |H(t) − H(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let mut dev = MaxDev::default();
        for e in &self.energies {
            dev.add((e - self.energies[0]).abs());
        }
        dev.get()
    }
}

/// RK4 on `ẋ = g⁻¹p`, `ṗ = −∂H/∂x`, the latter by five-point differences.
pub fn hamiltonian_flow(
    map: &dyn DiffeoMap,
    state0: &PhaseState,
    t_span: (f64, f64),
    tol: &Tolerances,
) -> Result<HamiltonianTrajectory> {
    map.domain().ensure(&state0.x, "Hamiltonian start")?;
    let n = state0.x.len();
    let mut z0 = DVector::zeros(2 * n);
    z0.rows_mut(0, n).copy_from(&state0.x);
    z0.rows_mut(n, n).copy_from(&state0.p);

    let field = |_t: f64, z: &DVector<f64>| -> Result<DVector<f64>> {
        let x: Point = z.rows(0, n).into_owned();
        let p = z.rows(n, n).into_owned();
        map.domain().ensure(&x, "Hamiltonian trajectory")?;
        let w = cotransport(map, &x, &p)?;
        let xdot = map.inverse_jacobian(&x)? * w;
        let dh = fd_gradient5(|q| hamiltonian(map, q, &p), &x, tol)?;
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&xdot);
        out.rows_mut(n, n).copy_from(&(-dh));
        Ok(out)
    };
    let traj = rk4_integrate(field, &z0, t_span, tol.ode_steps)?;
    let mut out = HamiltonianTrajectory {
        times: Vec::with_capacity(traj.len()),
        states: Vec::with_capacity(traj.len()),
        energies: Vec::with_capacity(traj.len()),
    };
    for (t, z) in traj {
        let state = PhaseState {
            x: z.rows(0, n).into_owned(),
            p: z.rows(n, n).into_owned(),
        };
        out.energies.push(hamiltonian(map, &state.x, &state.p)?);
        out.times.push(t);
        out.states.push(state);
    }
    Ok(out)
}

/// Image coordinates `y = U(x)` and `π = Vᵗp` with `V = J⁻¹`.
pub fn transformed_momenta(map: &dyn DiffeoMap, state: &PhaseState) -> Result<(DVector<f64>, DVector<f64>)> {
    map.domain().ensure(&state.x, "phase state")?;
    Ok((map.forward(&state.x)?, cotransport(map, &state.x, &state.p)?))
}

/// Worst bracket deviations over the sampled momenta.
#[derive(Debug, Clone, Serialize)]
pub struct BracketReport {
    /// `max |[y^i, y^j]|`
    pub yy: f64,
    /// `max |[π_i, π_j]|`
    pub pipi: f64,
    /// `max |[y^i, π_j] − δ_ij|`
    pub ypi: f64,
    pub momenta_tested: usize,
}

impl BracketReport {
    pub fn max_deviation(&self) -> f64 {
        let mut m = MaxDev::default();
        for d in [self.yy, self.pipi, self.ypi] {
            m.add(d);
        }
        m.get()
    }

    pub fn checks(&self, tolerance: f64) -> Vec<Check> {
        vec![
            Check::new("bracket_y_y", self.yy, tolerance),
            Check::new("bracket_pi_pi", self.pipi, tolerance),
            Check::new("bracket_y_pi", self.ypi, tolerance),
        ]
    }
}

/// Poisson brackets of `(y, π)` at `x` for 10 seeded random momenta.
pub fn check_canonical(map: &dyn DiffeoMap, x: &Point, tol: &Tolerances) -> Result<BracketReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let momenta: Vec<DVector<f64>> = (0..10)
        .map(|_| DVector::from_fn(x.len(), |_, _| rng.random_range(-2.0..2.0)))
        .collect();
    check_canonical_with(map, x, &momenta, tol)
}

/// Brackets `[f, g] = Σ_k ∂_x f ∂_p g − ∂_p f ∂_x g` of the transformed
/// coordinates, all partials by central differences in `(x, p)`.
pub fn check_canonical_with(
    map: &dyn DiffeoMap,
    x: &Point,
    momenta: &[DVector<f64>],
    tol: &Tolerances,
) -> Result<BracketReport> {
    map.domain().ensure(x, "bracket evaluation")?;
    let n = x.len();
    let (mut yy, mut pipi, mut ypi) = (MaxDev::default(), MaxDev::default(), MaxDev::default());
    for p in momenta {
        let mut z = DVector::zeros(2 * n);
        z.rows_mut(0, n).copy_from(x);
        z.rows_mut(n, n).copy_from(p);
        let jz = fd_jacobian(
            |z| {
                let state = PhaseState {
                    x: z.rows(0, n).into_owned(),
                    p: z.rows(n, n).into_owned(),
                };
                let (y, pi) = transformed_momenta(map, &state)?;
                let mut out = DVector::zeros(2 * n);
                out.rows_mut(0, n).copy_from(&y);
                out.rows_mut(n, n).copy_from(&pi);
                Ok(out)
            },
            &z,
            tol,
        )?;
        let dx = jz.columns(0, n);
        let dp = jz.columns(n, n);
        let brackets: DMatrix<f64> = dx * dp.transpose() - dp * dx.transpose();
        for i in 0..n {
            for j in 0..n {
                yy.add(brackets[(i, j)].abs());
                pipi.add(brackets[(n + i, n + j)].abs());
                let delta = if i == j { 1.0 } else { 0.0 };
                ypi.add((brackets[(i, n + j)] - delta).abs());
            }
        }
    }
    Ok(BracketReport {
        yy: yy.get(),
        pipi: pipi.get(),
        ypi: ypi.get(),
        momenta_tested: momenta.len(),
    })
}
