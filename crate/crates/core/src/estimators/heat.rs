//! Deterministic order study for the linear heat equation.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::initial::InitialSpec;
use crate::mesh::{l2_norm, Flux, Grid1D};
use crate::noise::NoiseModel;
use crate::sde::{evolve, BrownianPath};
use crate::solver::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeatLevel {
    pub n_cells: usize,
    pub dt: f64,
    /// Relative discrete L² error at the final time.
    pub error: f64,
}

/// Runs `p = 2` without noise from `A·sin(mπx/X)` on each `(n_cells, dt)`
/// level and compares with `A·e^{−(mπ/X)² T} sin(mπx/X)`.
pub fn heat_convergence(
    levels: &[(usize, f64)],
    length: f64,
    final_time: f64,
    amplitude: f64,
    mode: u32,
    opts: &SolverOptions,
) -> Result<Vec<HeatLevel>> {
    let flux = Flux::new(2.0, 0.0)?;
    let noise = NoiseModel::zero();
    let spec = InitialSpec::sine(amplitude, mode);
    levels
        .iter()
        .map(|&(n_cells, dt)| {
            let grid = Grid1D::new(n_cells, length)?;
            let steps = (final_time / dt).round();
            if steps < 1.0 || (steps * dt - final_time).abs() > 1e-12 * final_time.max(1.0) {
                return Err(Error::param("dt", dt, "must divide the final time"));
            }
            let u0 = spec.build(&grid, 0)?;
            let path = BrownianPath::zero(dt, steps as usize)?;
            let traj = evolve(&u0, &noise, &path, &flux, opts)?;
            let c = mode as f64 * PI / length;
            let decay = amplitude * (-c * c * final_time).exp();
            let exact: Vec<f64> = (0..grid.n_interior()).map(|j| decay * (c * grid.interior_x(j)).sin()).collect();
            let diff: Vec<f64> = traj.final_state().values().iter().zip(&exact).map(|(a, b)| a - b).collect();
            Ok(HeatLevel {
                n_cells,
                dt,
                error: l2_norm(grid.h(), &diff) / l2_norm(grid.h(), &exact),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_shrinks_under_refinement() {
        let r = heat_convergence(&[(16, 4e-3), (32, 2e-3)], 1.0, 0.1, 1.0, 1, &SolverOptions::default()).unwrap();
        // backward Euler dominates: rate error ≈ λ²dt/2 over T
        let lambda = PI * PI;
        let predicted = 0.5 * lambda * lambda * 4e-3 * 0.1;
        assert!((r[0].error / predicted - 1.0).abs() < 0.2, "{} vs {predicted}", r[0].error);
        assert!(r[0].error / r[1].error > 1.8);
        assert!(heat_convergence(&[(16, 0.03)], 1.0, 0.1, 1.0, 1, &SolverOptions::default()).is_err());
    }
}
