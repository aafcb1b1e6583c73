//! Uniform 1-D grid, grid functions and the discrete p-Laplacian.
//!
//! Nodes sit at `x_i = i·h`, `i = 0..=n`, with homogeneous Dirichlet values at
//! `i = 0` and `i = n`; a [`GridFunction`] stores only the `n − 1` interior
//! values. Edge `e` joins nodes `e` and `e + 1`, so there are `n` edges and
//! edge `e` carries the difference quotient `(u_{e+1} − u_e)/h`.
//!
//! Integrals are rectangle sums `h·Σ` over interior nodes, or over edges for
//! edge quantities. With this layout summation by parts holds exactly:
//! `h Σ_i (Δ_p u)_i v_i = −h Σ_e φ(D_e u) D_e v`.

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n_cells: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(n_cells: usize, length: f64) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::param(
                "n_cells",
                n_cells as f64,
                "need at least two cells",
            ));
        }
        let length = positive("length", length)?;
        Ok(Grid1D { n_cells, length })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }

    pub fn n_edges(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    /// Coordinate of node `i`, boundary nodes included.
    pub fn node_x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Coordinate of interior value `j` (node `j + 1`).
    pub fn interior_x(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.h()
    }

    pub fn edge_midpoint(&self, e: usize) -> f64 {
        (e as f64 + 0.5) * self.h()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid1D,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_interior() {
            return Err(Error::GridMismatch {
                expected: grid.n_interior(),
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: node + 1 });
        }
        Ok(GridFunction { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_interior());
        GridFunction { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.n_interior()],
        }
    }

    /// Samples `f` at interior nodes.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.n_interior()).map(|j| f(grid.interior_x(j))).collect();
        GridFunction::new(grid, values)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at node `i` in `0..=n`, zero on the boundary.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i == 0 || i >= self.grid.n_cells {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.n_interior(),
                got: other.grid.n_interior(),
            });
        }
        Ok(())
    }

    pub fn l1_norm(&self) -> f64 {
        self.grid.h() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(self.grid.h(), &self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub(crate) fn l2_norm(h: f64, v: &[f64]) -> f64 {
    (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// `|s|^p` with exact paths for the common exponents.
#[inline]
pub fn abs_pow(s: f64, p: f64) -> f64 {
    let a = s.abs();
    if p == 2.0 {
        a * a
    } else if p == 3.0 {
        a * a * a
    } else if p == 4.0 {
        let a2 = a * a;
        a2 * a2
    } else {
        a.powf(p)
    }
}

/// Regularized flux `φ_ε(s) = (s² + ε²)^{(p−2)/2} s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flux {
    p: f64,
    eps: f64,
}

impl Flux {
    /// Regularization used for `p < 2` when none is given, relative to the
    /// gradient scale of the problem.
    pub const DEFAULT_EPS_FACTOR: f64 = 1e-6;

    pub fn new(p: f64, eps: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::param("p", p, "must exceed 1"));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::param("eps", eps, "must be finite and non-negative"));
        }
        if p < 2.0 && eps == 0.0 {
            return Err(Error::SingularFlux { p });
        }
        Ok(Flux { p, eps })
    }

    /// `eps = 0` for `p ≥ 2`, otherwise `DEFAULT_EPS_FACTOR · scale`.
    pub fn with_default_eps(p: f64, scale: f64) -> Result<Self> {
        if p >= 2.0 {
            Flux::new(p, 0.0)
        } else {
            let scale = positive("scale", scale)?;
            Flux::new(p, Self::DEFAULT_EPS_FACTOR * scale)
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    #[inline]
    pub fn flux(&self, s: f64) -> f64 {
        let p = self.p;
        if p == 2.0 {
            return s;
        }
        if self.eps == 0.0 {
            if p == 3.0 {
                return s.abs() * s;
            }
            if p == 4.0 {
                return s * s * s;
            }
            return s.abs().powf(p - 2.0) * s;
        }
        let q = s * s + self.eps * self.eps;
        if p == 3.0 {
            q.sqrt() * s
        } else if p == 4.0 {
            q * s
        } else {
            q.powf(0.5 * (p - 2.0)) * s
        }
    }

    /// `φ_ε'(s) = (s² + ε²)^{(p−4)/2} ((p − 1)s² + ε²)`.
    #[inline]
    pub fn dflux(&self, s: f64) -> f64 {
        let p = self.p;
        if p == 2.0 {
            return 1.0;
        }
        let s2 = s * s;
        if self.eps == 0.0 {
            if p == 3.0 {
                return 2.0 * s.abs();
            }
            if p == 4.0 {
                return 3.0 * s2;
            }
            return (p - 1.0) * s.abs().powf(p - 2.0);
        }
        let e2 = self.eps * self.eps;
        let q = s2 + e2;
        if p == 3.0 {
            (2.0 * s2 + e2) / q.sqrt()
        } else if p == 4.0 {
            3.0 * s2 + e2
        } else {
            q.powf(0.5 * (p - 4.0)) * ((p - 1.0) * s2 + e2)
        }
    }

    /// Potential `(s² + ε²)^{p/2} / p`, whose derivative is the flux.
    #[inline]
    pub fn potential(&self, s: f64) -> f64 {
        let p = self.p;
        if self.eps == 0.0 {
            return abs_pow(s, p) / p;
        }
        let q = s * s + self.eps * self.eps;
        if p == 2.0 {
            0.5 * q
        } else if p == 4.0 {
            0.25 * q * q
        } else {
            q.powf(0.5 * p) / p
        }
    }
}

/// `φ_ε(s)` with parameter checks.
pub fn p_flux(s: f64, p: f64, eps: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::param("p", p, "must exceed 1"));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::param("eps", eps, "must be finite and non-negative"));
    }
    if p < 2.0 && eps == 0.0 && s == 0.0 {
        return Err(Error::SingularFlux { p });
    }
    Ok(Flux { p, eps }.flux(s))
}

/// Difference quotients on all `n` edges.
pub fn gradient(u: &GridFunction) -> Vec<f64> {
    let mut out = vec![0.0; u.grid.n_edges()];
    gradient_into(u.grid.h(), &u.values, &mut out);
    out
}

#[inline]
pub(crate) fn gradient_into(h: f64, u: &[f64], out: &mut [f64]) {
    let m = u.len();
    debug_assert_eq!(out.len(), m + 1);
    let inv_h = 1.0 / h;
    let mut prev = 0.0;
    for (e, &v) in u.iter().enumerate() {
        out[e] = (v - prev) * inv_h;
        prev = v;
    }
    out[m] = -prev * inv_h;
}

/// Discrete `div(φ(∇u))` at interior nodes.
pub fn p_laplacian(u: &GridFunction, flux: &Flux) -> GridFunction {
    let h = u.grid.h();
    let fl: Vec<f64> = gradient(u).into_iter().map(|g| flux.flux(g)).collect();
    let values = fl.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    GridFunction::from_vec_unchecked(u.grid, values)
}

/// `h Σ_i f(u_i)` over interior nodes.
pub fn integrate(u: &GridFunction, f: impl Fn(f64) -> f64) -> f64 {
    u.grid.h() * u.values.iter().map(|&v| f(v)).sum::<f64>()
}

/// `h Σ_e |D_e u|^p`.
pub fn gradient_energy(u: &GridFunction, p: f64) -> f64 {
    u.grid.h() * gradient(u).iter().map(|&g| abs_pow(g, p)).sum::<f64>()
}

/// `h Σ_e |D_e u|^p` over edges whose midpoint value lies in the open band
/// `lo < |ū_e| < hi`.
pub fn levelset_gradient_integral(u: &GridFunction, p: f64, lo: f64, hi: f64) -> f64 {
    let h = u.grid.h();
    let n = u.grid.n_edges();
    let mut sum = 0.0;
    for e in 0..n {
        let a = u.node(e);
        let b = u.node(e + 1);
        let mid = (0.5 * (a + b)).abs();
        if lo < mid && mid < hi {
            sum += abs_pow((b - a) / h, p);
        }
    }
    h * sum
}

/// `h Σ_e |D_e T_k(u)|^p`, truncating nodewise before differencing.
pub fn truncated_gradient_energy(u: &GridFunction, k: f64, p: f64) -> Result<f64> {
    let k = positive("k", k)?;
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::param("p", p, "must exceed 1"));
    }
    let t = u.map(|v| v.clamp(-k, k));
    Ok(gradient_energy(&t, p))
}

/// `h Σ_e φ(D_e u) D_e v`, the discrete pairing `⟨−Δ_p u, v⟩`.
pub fn flux_pairing(u: &GridFunction, v: &GridFunction, flux: &Flux) -> Result<f64> {
    u.check_same_grid(v)?;
    let h = u.grid.h();
    let gu = gradient(u);
    let gv = gradient(v);
    Ok(h * gu.iter().zip(&gv).map(|(&a, &b)| flux.flux(a) * b).sum::<f64>())
}
