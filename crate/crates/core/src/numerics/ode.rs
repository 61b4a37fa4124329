use nalgebra::DVector;

use crate::error::{GeoError, Result};

pub type Trajectory = Vec<(f64, DVector<f64>)>;

/// Classical fixed-step fourth-order Runge-Kutta.
///
/// Returns `steps + 1` samples including both endpoints. If the field fails
/// at any stage the integration stops and the partial trajectory is carried
/// in [`GeoError::IntegrationAborted`].
pub fn rk4_integrate<F>(mut field: F, y0: &DVector<f64>, t_span: (f64, f64), steps: usize) -> Result<Trajectory>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    if steps == 0 {
        return Err(GeoError::invalid("steps", "must be at least 1"));
    }
    let (t0, t1) = t_span;
    let h = (t1 - t0) / steps as f64;
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push((t0, y0.clone()));
    let mut y = y0.clone();

    for step in 0..steps {
        let t = t0 + step as f64 * h;
        let result = (|| {
            let k1 = field(t, &y)?;
            let k2 = field(t + 0.5 * h, &(&y + &k1 * (0.5 * h)))?;
            let k3 = field(t + 0.5 * h, &(&y + &k2 * (0.5 * h)))?;
            let k4 = field(t + h, &(&y + &k3 * h))?;
            Ok::<_, GeoError>(&y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
        })();
        match result {
            Ok(next) => {
                y = next;
                // last time pinned to t1 to avoid drift in the endpoint
                let tn = if step + 1 == steps { t1 } else { t0 + (step + 1) as f64 * h };
                traj.push((tn, y.clone()));
            }
            Err(source) => {
                return Err(GeoError::IntegrationAborted {
                    time: t,
                    steps_done: step,
                    partial: traj.into_iter().map(|(t, y)| (t, y.as_slice().to_vec())).collect(),
                    source: Box::new(source),
                })
            }
        }
    }
    Ok(traj)
}
