//! Brownian paths and the split-step Euler–Maruyama scheme.
//!
//! A step from `t_j` to `t_{j+1}` first adds the noise explicitly,
//!
//! ```text
//! g_i = u_i^j + Φ(t_j, u_i^j) Δβ_j        (same scalar Δβ_j at every node)
//! ```
//!
//! and then applies the implicit p-Laplace resolvent, `u^{j+1} − dt Δ_p u^{j+1} = g`.
//!
//! # Random numbers
//!
//! Path `i` of an experiment with master seed `s` draws its increments from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`, as
//! `√dt · StandardNormal`. Paths are therefore reproducible individually and
//! independent of the order or thread in which they are generated.
//!
//! Refinement studies sample once at the finest step and call
//! [`BrownianPath::coarsen`], so that coarse and fine runs see the same
//! Brownian motion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{positive, Error, Result};
use crate::mesh::{Flux, Grid1D, GridFunction};
use crate::noise::NoiseModel;
use crate::solver::{Resolvent, SolverOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    dt: f64,
    increments: Vec<f64>,
    master_seed: u64,
    path_index: u64,
}

/// Draws `steps` increments of variance `dt` for path `path_index`.
pub fn sample_brownian(master_seed: u64, path_index: u64, steps: usize, dt: f64) -> Result<BrownianPath> {
    if steps == 0 {
        return Err(Error::param("steps", 0.0, "need at least one step"));
    }
    let dt = positive("dt", dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    let scale = dt.sqrt();
    let increments = (0..steps)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(BrownianPath {
        dt,
        increments,
        master_seed,
        path_index,
    })
}

impl BrownianPath {
    /// A path with given increments, e.g. all zero for deterministic runs.
    pub fn from_increments(dt: f64, increments: Vec<f64>) -> Result<Self> {
        let dt = positive("dt", dt)?;
        if increments.is_empty() {
            return Err(Error::param("steps", 0.0, "need at least one step"));
        }
        if increments.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("Brownian increments must be finite".into()));
        }
        Ok(BrownianPath {
            dt,
            increments,
            master_seed: 0,
            path_index: 0,
        })
    }

    pub fn zero(dt: f64, steps: usize) -> Result<Self> {
        BrownianPath::from_increments(dt, vec![0.0; steps])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// `β(t_J)`.
    pub fn terminal_value(&self) -> f64 {
        self.increments.iter().sum()
    }

    /// Sums consecutive groups of `factor` increments; the step becomes
    /// `factor · dt`.
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || !self.increments.len().is_multiple_of(factor) {
            return Err(Error::Invalid(format!(
                "cannot coarsen {} increments by a factor of {factor}",
                self.increments.len()
            )));
        }
        Ok(BrownianPath {
            dt: self.dt * factor as f64,
            increments: self
                .increments
                .chunks_exact(factor)
                .map(|c| c.iter().sum())
                .collect(),
            master_seed: self.master_seed,
            path_index: self.path_index,
        })
    }

    /// The first `steps` increments.
    pub fn prefix(&self, steps: usize) -> Result<BrownianPath> {
        if steps == 0 || steps > self.increments.len() {
            return Err(Error::param("steps", steps as f64, "outside the path length"));
        }
        Ok(BrownianPath {
            increments: self.increments[..steps].to_vec(),
            ..self.clone()
        })
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    dt: f64,
    states: Vec<GridFunction>,
    path: BrownianPath,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[GridFunction] {
        &self.states
    }

    pub fn state(&self, j: usize) -> &GridFunction {
        &self.states[j]
    }

    pub fn final_state(&self) -> &GridFunction {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn path(&self) -> &BrownianPath {
        &self.path
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|j| self.time(j)).collect()
    }
}

/// One-step map of the scheme with reusable scratch space.
#[derive(Clone, Debug)]
pub(crate) struct Stepper<'a> {
    noise: &'a NoiseModel,
    resolvent: Resolvent,
    g: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(grid: &Grid1D, dt: f64, noise: &'a NoiseModel, flux: &Flux, opts: &SolverOptions) -> Self {
        let m = grid.n_interior();
        Stepper {
            noise,
            resolvent: Resolvent::new(*flux, dt, grid.h(), *opts, m),
            g: vec![0.0; m],
        }
    }

    /// `out = R_dt(u + Φ(t, u) db)`.
    pub(crate) fn step(&mut self, t: f64, db: f64, u: &[f64], out: &mut [f64]) -> Result<()> {
        if self.noise.is_zero() || db == 0.0 {
            self.g.copy_from_slice(u);
        } else {
            for (g, &v) in self.g.iter_mut().zip(u) {
                *g = v + self.noise.eval(t, v) * db;
            }
        }
        self.resolvent.solve(&self.g, out)
    }
}

fn check_inputs(u0: &GridFunction, opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    if let Some(node) = u0.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { node: node + 1 });
    }
    Ok(())
}

/// Runs the scheme along `path`, recording every state.
pub fn evolve(
    u0: &GridFunction,
    noise: &NoiseModel,
    path: &BrownianPath,
    flux: &Flux,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    check_inputs(u0, opts)?;
    let grid = *u0.grid();
    let dt = path.dt();
    let mut stepper = Stepper::new(&grid, dt, noise, flux, opts);
    let mut states = Vec::with_capacity(path.steps() + 1);
    states.push(u0.clone());
    for (j, &db) in path.increments().iter().enumerate() {
        let mut next = vec![0.0; grid.n_interior()];
        stepper
            .step(j as f64 * dt, db, states[j].values(), &mut next)
            .map_err(|e| Error::AtStep {
                step: j,
                source: Box::new(e),
            })?;
        states.push(GridFunction::from_vec_unchecked(grid, next));
    }
    Ok(Trajectory {
        dt,
        states,
        path: path.clone(),
    })
}

/// Runs two initial data against the same Brownian path.
pub fn evolve_coupled(
    u0: &GridFunction,
    v0: &GridFunction,
    noise: &NoiseModel,
    path: &BrownianPath,
    flux: &Flux,
    opts: &SolverOptions,
) -> Result<(Trajectory, Trajectory)> {
    u0.check_same_grid(v0)?;
    Ok((evolve(u0, noise, path, flux, opts)?, evolve(v0, noise, path, flux, opts)?))
}

/// Left-endpoint Itô sum `Σ_j f(u^j, t_j) Δβ_j`.
pub fn ito_integral(traj: &Trajectory, mut integrand: impl FnMut(&GridFunction, f64) -> f64) -> f64 {
    traj.path
        .increments()
        .iter()
        .enumerate()
        .map(|(j, &db)| integrand(&traj.states[j], traj.time(j)) * db)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::implicit_step;
    use std::f64::consts::PI;

    fn heat() -> Flux {
        Flux::new(2.0, 0.0).unwrap()
    }

    #[test]
    fn brownian_is_reproducible() {
        let a = sample_brownian(42, 3, 100, 0.01).unwrap();
        let b = sample_brownian(42, 3, 100, 0.01).unwrap();
        assert_eq!(a, b);
        let c = sample_brownian(42, 4, 100, 0.01).unwrap();
        assert_ne!(a.increments(), c.increments());
        assert!(sample_brownian(1, 0, 0, 0.1).is_err());
        assert!(sample_brownian(1, 0, 10, 0.0).is_err());
    }

    #[test]
    fn brownian_moments() {
        let n = 10_000;
        let dt = 0.01;
        let steps = 5;
        let paths: Vec<BrownianPath> = (0..n).map(|i| sample_brownian(9, i, steps, dt).unwrap()).collect();
        let ends: Vec<f64> = paths.iter().map(|p| p.terminal_value()).collect();
        let mean = ends.iter().sum::<f64>() / n as f64;
        let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 4.0 * (var / n as f64).sqrt());
        for j in 0..steps {
            let xs: Vec<f64> = paths.iter().map(|p| p.increments()[j]).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((v / dt - 1.0).abs() < 0.1, "step {j}: variance {v}");
        }
    }

    #[test]
    fn coarsening_sums_increments() {
        let fine = sample_brownian(1, 0, 8, 0.25).unwrap();
        let coarse = fine.coarsen(4).unwrap();
        assert_eq!(coarse.steps(), 2);
        assert_eq!(coarse.dt(), 1.0);
        assert!((coarse.terminal_value() - fine.terminal_value()).abs() < 1e-14);
        assert!(fine.coarsen(3).is_err());
    }

    #[test]
    fn heat_equation_decay() {
        let grid = Grid1D::new(128, 1.0).unwrap();
        let u0 = GridFunction::from_fn(grid, |x| (PI * x).sin()).unwrap();
        let path = BrownianPath::zero(1e-4, 1000).unwrap();
        let traj = evolve(&u0, &NoiseModel::zero(), &path, &heat(), &SolverOptions::default()).unwrap();
        let t = 0.1;
        let exact = GridFunction::from_fn(grid, |x| (-PI * PI * t).exp() * (PI * x).sin()).unwrap();
        let err = traj.final_state().zip_map(&exact, |a, b| a - b).unwrap().l2_norm() / exact.l2_norm();
        assert!(err < 2e-3, "relative error {err}");
    }

    #[test]
    fn zero_datum_stays_zero() {
        let grid = Grid1D::new(32, 1.0).unwrap();
        let u0 = GridFunction::zeros(grid);
        let path = sample_brownian(5, 0, 50, 1e-3).unwrap();
        for noise in [
            NoiseModel::bounded_trunc(1.0, 2.0).unwrap(),
            NoiseModel::linear(3.0).unwrap(),
            NoiseModel::sinusoidal(1.0, 0.5).unwrap(),
        ] {
            for p in [2.0, 3.0] {
                let f = Flux::new(p, 0.0).unwrap();
                let traj = evolve(&u0, &noise, &path, &f, &SolverOptions::default()).unwrap();
                assert!(traj.states().iter().all(|s| s.values().iter().all(|&v| v == 0.0)));
            }
        }
    }

    #[test]
    fn single_step_unrolls() {
        let grid = Grid1D::new(16, 1.0).unwrap();
        let u0 = GridFunction::from_fn(grid, |x| x * (1.0 - x) * 4.0).unwrap();
        let noise = NoiseModel::bounded_trunc(1.0, 2.0).unwrap();
        let path = BrownianPath::from_increments(0.01, vec![0.3]).unwrap();
        let f = Flux::new(3.0, 0.0).unwrap();
        let opts = SolverOptions::default();
        let traj = evolve(&u0, &noise, &path, &f, &opts).unwrap();
        let g = u0.map(|v| v + noise.eval(0.0, v) * 0.3);
        let w = implicit_step(&g, 0.01, &f, &opts).unwrap();
        assert_eq!(traj.final_state(), &w);
        assert_eq!(traj.state(0), &u0);
        assert_eq!(traj.times(), vec![0.0, 0.01]);
    }

    #[test]
    fn coupled_linear_one_node() {
        let grid = Grid1D::new(2, 1.0).unwrap();
        let (dt, db, l) = (0.01, 0.2, 0.5);
        let u0 = GridFunction::new(grid, vec![1.5]).unwrap();
        let v0 = GridFunction::new(grid, vec![-0.5]).unwrap();
        let noise = NoiseModel::linear(l).unwrap();
        let path = BrownianPath::from_increments(dt, vec![db]).unwrap();
        let (u, v) = evolve_coupled(&u0, &v0, &noise, &path, &heat(), &SolverOptions::default()).unwrap();
        let h = grid.h();
        let expected = 2.0 * (1.0 + l * db) / (1.0 + 2.0 * dt / (h * h));
        let got = u.final_state().values()[0] - v.final_state().values()[0];
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn coupled_symmetry_and_identity() {
        let grid = Grid1D::new(16, 1.0).unwrap();
        let u0 = GridFunction::from_fn(grid, |x| (3.0 * x).sin() * 3.0).unwrap();
        let v0 = GridFunction::from_fn(grid, |x| x * (1.0 - x)).unwrap();
        let noise = NoiseModel::bounded_trunc(1.0, 2.0).unwrap();
        let path = sample_brownian(3, 1, 20, 1e-3).unwrap();
        let f = Flux::new(3.0, 0.0).unwrap();
        let opts = SolverOptions::default();
        let (a, b) = evolve_coupled(&u0, &v0, &noise, &path, &f, &opts).unwrap();
        let (c, d) = evolve_coupled(&v0, &u0, &noise, &path, &f, &opts).unwrap();
        assert_eq!(a.states(), d.states());
        assert_eq!(b.states(), c.states());
        let (e, g) = evolve_coupled(&u0, &u0, &noise, &path, &f, &opts).unwrap();
        assert_eq!(e.states(), g.states());
    }

    #[test]
    fn scheme_is_adapted() {
        let grid = Grid1D::new(16, 1.0).unwrap();
        let u0 = GridFunction::from_fn(grid, |x| 5.0 * (PI * x).sin()).unwrap();
        let noise = NoiseModel::sinusoidal(1.0, 1.0).unwrap();
        let path = sample_brownian(8, 2, 40, 1e-3).unwrap();
        let f = Flux::new(2.5, 0.0).unwrap();
        let opts = SolverOptions::default();
        let full = evolve(&u0, &noise, &path, &f, &opts).unwrap();
        let part = evolve(&u0, &noise, &path.prefix(17).unwrap(), &f, &opts).unwrap();
        assert_eq!(&full.states()[..18], part.states());
    }

    #[test]
    fn ito_integral_examples() {
        let grid = Grid1D::new(4, 1.0).unwrap();
        let u0 = GridFunction::zeros(grid);
        let path = sample_brownian(1, 0, 30, 0.01).unwrap();
        let traj = evolve(&u0, &NoiseModel::zero(), &path, &heat(), &SolverOptions::default()).unwrap();
        let c = 2.5;
        assert!((ito_integral(&traj, |_, _| c) - c * path.terminal_value()).abs() < 1e-12);
        assert_eq!(ito_integral(&traj, |_, _| 0.0), 0.0);
    }

    #[test]
    fn ito_integral_has_zero_mean() {
        let grid = Grid1D::new(4, 1.0).unwrap();
        let u0 = GridFunction::new(grid, vec![1.0, 2.0, 1.0]).unwrap();
        let noise = NoiseModel::bounded_trunc(1.0, 2.0).unwrap();
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let path = sample_brownian(77, i, 10, 0.01).unwrap();
                let traj = evolve(&u0, &noise, &path, &heat(), &SolverOptions::default()).unwrap();
                ito_integral(&traj, |u, _| u.values()[1])
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 4.0 * (var / n as f64).sqrt());
    }
}
