//! Implicit p-Laplace resolvent.
//!
//! One step solves `w − dt·Δ_p w = g` as the minimizer of the strictly convex
//! functional
//!
//! ```text
//! J(w) = ½ h Σ_i (w_i − g_i)² + dt h Σ_e Ψ(D_e w),     Ψ' = φ_ε,
//! ```
//!
//! by Newton's method on its tridiagonal Hessian with Armijo backtracking.
//! Iteration stops once `‖w − g − dt·Δ_p w‖ ≤ grad_tol·(1 + ‖g‖)` in the
//! discrete L² norm.

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::mesh::{gradient_into, l2_norm, Flux, GridFunction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grad_tol: 1e-10,
            max_iter: 50,
            armijo_c: 1e-4,
            backtrack: 0.5,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        positive("solver.grad_tol", self.grad_tol)?;
        if self.max_iter == 0 {
            return Err(Error::param("solver.max_iter", 0.0, "must be positive"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::param("solver.armijo_c", self.armijo_c, "must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::param("solver.backtrack", self.backtrack, "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Diagonal shift keeping the Hessian definite where `φ'` vanishes.
const HESSIAN_FLOOR: f64 = 1e-14;
/// Relative slack in the sufficient-decrease test, absorbing rounding in `J`.
const ARMIJO_SLACK: f64 = 1e-14;
/// Line search gives up below this step length.
const MIN_STEP: f64 = 1e-12;

/// Solves `w − dt·Δ_p w = g` with `w = 0` on the boundary.
pub fn implicit_step(
    g: &GridFunction,
    dt: f64,
    flux: &Flux,
    opts: &SolverOptions,
) -> Result<GridFunction> {
    let dt = positive("dt", dt)?;
    opts.validate()?;
    let mut r = Resolvent::new(*flux, dt, g.grid().h(), *opts, g.values().len());
    let mut out = vec![0.0; g.values().len()];
    r.solve(g.values(), &mut out)?;
    Ok(GridFunction::from_vec_unchecked(*g.grid(), out))
}

/// `‖w − g − dt·Δ_p w‖` in the discrete L² norm.
pub fn step_residual(w: &GridFunction, g: &GridFunction, dt: f64, flux: &Flux) -> Result<f64> {
    w.check_same_grid(g)?;
    let h = w.grid().h();
    let mut r = Resolvent::new(*flux, dt, h, SolverOptions::default(), w.values().len());
    r.residual(w.values(), g.values());
    Ok(l2_norm(h, &r.res))
}

/// The functional `J(w)` for data `g`.
pub fn energy(w: &GridFunction, g: &GridFunction, dt: f64, flux: &Flux) -> Result<f64> {
    w.check_same_grid(g)?;
    let h = w.grid().h();
    let mut r = Resolvent::new(*flux, dt, h, SolverOptions::default(), w.values().len());
    Ok(h * r.scaled_energy(w.values(), g.values()))
}

/// Reusable Newton solver with scratch buffers for one grid size.
#[derive(Clone, Debug)]
pub(crate) struct Resolvent {
    flux: Flux,
    dt: f64,
    h: f64,
    opts: SolverOptions,
    grad: Vec<f64>,
    res: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    dir: Vec<f64>,
    trial: Vec<f64>,
    scratch: Vec<f64>,
    held: Vec<f64>,
}

impl Resolvent {
    pub(crate) fn new(flux: Flux, dt: f64, h: f64, opts: SolverOptions, m: usize) -> Self {
        Resolvent {
            flux,
            dt,
            h,
            opts,
            grad: vec![0.0; m + 1],
            res: vec![0.0; m],
            diag: vec![0.0; m],
            off: vec![0.0; m.saturating_sub(1)],
            dir: vec![0.0; m],
            trial: vec![0.0; m],
            scratch: vec![0.0; m],
            held: vec![0.0; m],
        }
    }

    /// `J/h`, so that the gradient is the nodal residual.
    fn scaled_energy(&mut self, w: &[f64], g: &[f64]) -> f64 {
        gradient_into(self.h, w, &mut self.grad);
        let fit: f64 = w.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
        let pot: f64 = self.grad.iter().map(|&s| self.flux.potential(s)).sum();
        0.5 * fit + self.dt * pot
    }

    /// Fills `res` with `w − g − dt·Δ_p w`; leaves edge gradients in `grad`.
    fn residual(&mut self, w: &[f64], g: &[f64]) {
        gradient_into(self.h, w, &mut self.grad);
        let c = self.dt / self.h;
        let mut left = self.flux.flux(self.grad[0]);
        for j in 0..w.len() {
            let right = self.flux.flux(self.grad[j + 1]);
            self.res[j] = w[j] - g[j] - c * (right - left);
            left = right;
        }
    }

    /// Tridiagonal Hessian of `J/h`. With `secant` the edge curvature
    /// `φ'(s)` is replaced by `φ(s)/s`, which for `p < 2` dominates it and
    /// yields a quadratic majorizer of `J`.
    fn assemble_hessian(&mut self, secant: bool) {
        let m = self.diag.len();
        let c = self.dt / (self.h * self.h);
        let floor = if self.flux.p() > 2.0 { HESSIAN_FLOOR } else { 0.0 };
        let flux = self.flux;
        let curv = |s: f64| {
            if secant && s != 0.0 {
                flux.flux(s) / s
            } else {
                flux.dflux(s)
            }
        };
        let mut left = curv(self.grad[0]);
        for j in 0..m {
            let right = curv(self.grad[j + 1]);
            self.diag[j] = 1.0 + floor + c * (left + right);
            if j + 1 < m {
                self.off[j] = -c * right;
            }
            left = right;
        }
    }

    /// Solves `H d = −res` by the Thomas algorithm. Returns false on a
    /// non-positive or non-finite pivot.
    fn newton_direction(&mut self) -> bool {
        let m = self.diag.len();
        if m == 0 {
            return true;
        }
        let (c, d) = (&mut self.scratch, &mut self.dir);
        let mut pivot = self.diag[0];
        if !(pivot > 0.0 && pivot.is_finite()) {
            return false;
        }
        if m > 1 {
            c[0] = self.off[0] / pivot;
        }
        d[0] = -self.res[0] / pivot;
        for j in 1..m {
            pivot = self.diag[j] - self.off[j - 1] * c[j - 1];
            if !(pivot > 0.0 && pivot.is_finite()) {
                return false;
            }
            if j + 1 < m {
                c[j] = self.off[j] / pivot;
            }
            d[j] = (-self.res[j] - self.off[j - 1] * d[j - 1]) / pivot;
        }
        for j in (0..m - 1).rev() {
            d[j] -= c[j] * d[j + 1];
        }
        d.iter().all(|v| v.is_finite())
    }

    fn steepest_descent(&mut self) -> f64 {
        for (d, r) in self.dir.iter_mut().zip(&self.res) {
            *d = -r;
        }
        -self.res.iter().map(|r| r * r).sum::<f64>()
    }

    /// Line search from `w` along a Newton-type direction. On success the
    /// accepted point is left in `trial` and its scaled energy returned.
    fn search(&mut self, w: &[f64], g: &[f64], j0: f64, secant: bool) -> Option<f64> {
        self.residual(w, g);
        self.assemble_hessian(secant);
        let mut slope = 0.0;
        if self.newton_direction() {
            slope = self.dir.iter().zip(&self.res).map(|(d, r)| d * r).sum();
        }
        if !(slope < 0.0) {
            slope = self.steepest_descent();
        }
        let mut t = 1.0;
        while t >= MIN_STEP {
            for ((tr, &wv), &d) in self.trial.iter_mut().zip(w).zip(&self.dir) {
                *tr = wv + t * d;
            }
            let trial = std::mem::take(&mut self.trial);
            let j1 = self.scaled_energy(&trial, g);
            self.trial = trial;
            if j1 <= j0 + self.opts.armijo_c * t * slope + ARMIJO_SLACK * j0.abs() {
                return Some(j1);
            }
            t *= self.opts.backtrack;
        }
        None
    }

    /// Minimizes `J` for data `g`, starting from `g`, writing into `w`.
    ///
    /// For `p < 2` each iteration also tries the majorizing step and keeps
    /// whichever candidate lowers `J` more; plain Newton crawls there when
    /// edge gradients pass near zero.
    pub(crate) fn solve(&mut self, g: &[f64], w: &mut [f64]) -> Result<()> {
        debug_assert_eq!(g.len(), w.len());
        if let Some(node) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: node + 1 });
        }
        w.copy_from_slice(g);
        let target = self.opts.grad_tol * (1.0 + l2_norm(self.h, g));
        let mut res_norm = f64::INFINITY;
        for _ in 0..self.opts.max_iter {
            self.residual(w, g);
            res_norm = l2_norm(self.h, &self.res);
            if !res_norm.is_finite() {
                break;
            }
            if res_norm <= target {
                return Ok(());
            }
            let j0 = self.scaled_energy(w, g);
            let newton = self.search(w, g, j0, false);
            let accepted = if self.flux.p() < 2.0 {
                std::mem::swap(&mut self.trial, &mut self.held);
                let mm = self.search(w, g, j0, true);
                match (newton, mm) {
                    (Some(jn), Some(jm)) if jn < jm => {
                        std::mem::swap(&mut self.trial, &mut self.held);
                        true
                    }
                    (Some(_), None) => {
                        std::mem::swap(&mut self.trial, &mut self.held);
                        true
                    }
                    (_, Some(_)) => true,
                    (None, None) => false,
                }
            } else {
                newton.is_some()
            };
            if !accepted {
                return Err(Error::SolverFailure {
                    iterations: self.opts.max_iter,
                    residual: res_norm,
                    last_iterate: w.to_vec(),
                });
            }
            w.copy_from_slice(&self.trial);
        }
        self.residual(w, g);
        let final_norm = l2_norm(self.h, &self.res);
        if final_norm <= target {
            return Ok(());
        }
        Err(Error::SolverFailure {
            iterations: self.opts.max_iter,
            residual: if final_norm.is_finite() { final_norm } else { res_norm },
            last_iterate: w.to_vec(),
        })
    }
}
