//! Pathwise residuals of the renormalized equation and of the Itô product rule.
//!
//! Stochastic integrals and Itô corrections are left sums in `u^j`. Drift
//! pairings take the implicit flux `φ(D_e u^{j+1})` against the mean-value
//! slope of the renormalizer between the noise-updated state
//! `g^j = u^j + Φ(t_j, u^j)Δβ_j` and `u^{j+1}`, so the chain rule of the
//! implicit substep holds exactly and the residual isolates the Itô part.
//! Spatial pairings are summation-by-parts sums over edges, with nodal products
//! differenced exactly. Deterministic test functions are taken at `t_{j+1}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::Experiment;
use crate::error::{Error, Result};
use crate::estimators::mc::{compensated_sum, mc_collect, summarize, McResult};
use crate::mesh::GridFunction;
use crate::noise::NoiseModel;
use crate::sde::{evolve, evolve_coupled, Trajectory};
use crate::truncations::Renormalizer;

/// Smooth test functions `ψ(t, x)` with analytic `ψ_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `ψ ≡ 1`.
    Constant,
    /// `sin(πx/X)(1 + t)`.
    SineGrowing,
    /// `sin(πx/X)`.
    Sine,
}

impl TestFunction {
    pub fn value(&self, t: f64, x: f64, length: f64) -> f64 {
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::SineGrowing => (PI * x / length).sin() * (1.0 + t),
            TestFunction::Sine => (PI * x / length).sin(),
        }
    }

    pub fn time_derivative(&self, _t: f64, x: f64, length: f64) -> f64 {
        match self {
            TestFunction::SineGrowing => (PI * x / length).sin(),
            TestFunction::Constant | TestFunction::Sine => 0.0,
        }
    }

    pub fn vanishes_on_boundary(&self) -> bool {
        !matches!(self, TestFunction::Constant)
    }
}

/// Signed and absolute residual statistics plus the mean of each term.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub signed: McResult,
    pub abs: McResult,
    /// `(𝔼 r²)^{1/2}`.
    pub rms: f64,
    pub terms: Vec<(String, McResult)>,
}

fn report(rows: Vec<Vec<f64>>, names: &[&str], seed: u64) -> Result<ResidualReport> {
    // column 0 is the residual itself
    let residual: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let abs: Vec<f64> = residual.iter().map(|r| r.abs()).collect();
    let rms = (compensated_sum(residual.iter().map(|r| r * r)) / residual.len() as f64).sqrt();
    let terms = names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let col: Vec<f64> = rows.iter().map(|r| r[c + 1]).collect();
            Ok((name.to_string(), summarize(&col, seed)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualReport {
        signed: summarize(&residual, seed)?,
        abs: summarize(&abs, seed)?,
        rms,
        terms,
    })
}

/// `λ + Φ(t, λ)Δβ`, the state after the noise substep.
#[inline]
fn kicked(noise: &NoiseModel, t: f64, db: f64, lambda: f64) -> f64 {
    lambda + noise.eval(t, lambda) * db
}

/// Below this relative separation the mean-value slope is replaced by the
/// derivative at the midpoint.
const SLOPE_TOL: f64 = 1e-10;

/// `(f(b) − f(a)) / (b − a)`, so that `slope · (b − a) = f(b) − f(a)`.
#[inline]
fn mean_slope(f: &Renormalizer, a: f64, b: f64) -> f64 {
    let d = b - a;
    if d.abs() > SLOPE_TOL * (1.0 + a.abs() + b.abs()) {
        (f.value(b) - f.value(a)) / d
    } else {
        f.jet(0.5 * (a + b)).d1
    }
}

/// Rejects `(S, ψ)` pairs for which the boundary terms do not vanish.
pub fn check_renormalizer(s: &Renormalizer, psi: TestFunction) -> Result<()> {
    if !s.is_c1() {
        return Err(Error::Invalid("S must have a continuous first derivative".into()));
    }
    if s.jet(0.0).d1 != 0.0 && !psi.vanishes_on_boundary() {
        return Err(Error::Invalid(
            "S'(0) ≠ 0 requires a test function vanishing on the boundary".into(),
        ));
    }
    Ok(())
}

const RENORM_TERMS: [&str; 6] = ["boundary", "chain", "cross", "stochastic", "time", "correction"];

fn renorm_path(exp: &Experiment, s: &Renormalizer, psi: TestFunction, traj: &Trajectory) -> Vec<f64> {
    let grid = exp.grid;
    let (h, len, n) = (grid.h(), grid.length(), grid.n_cells());
    let dt = traj.dt();
    let noise = &exp.noise;
    let flux = &exp.flux;

    let pairing = |u: &GridFunction, t: f64| -> f64 {
        h * u
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| s.value(v) * psi.value(t, grid.interior_x(i), len))
            .sum::<f64>()
    };
    let mut sp = vec![0.0; n + 1];
    let mut ps = vec![0.0; n + 1];
    let (mut chain, mut cross, mut stoch, mut time, mut corr) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (j, &db) in traj.path().increments().iter().enumerate() {
        let (t, t1) = (traj.time(j), traj.time(j + 1));
        let (u, u1) = (traj.state(j), traj.state(j + 1));
        for i in 0..=n {
            sp[i] = mean_slope(s, kicked(noise, t, db, u.node(i)), u1.node(i));
            ps[i] = psi.value(t1, grid.node_x(i), len);
        }
        let (mut a, mut b) = (0.0, 0.0);
        for e in 0..n {
            let f = flux.flux((u1.node(e + 1) - u1.node(e)) / h);
            a += f * (sp[e + 1] - sp[e]) * 0.5 * (ps[e] + ps[e + 1]);
            b += f * 0.5 * (sp[e] + sp[e + 1]) * (ps[e + 1] - ps[e]);
        }
        chain += dt * a;
        cross += dt * b;

        let (mut st, mut ti, mut co) = (0.0, 0.0, 0.0);
        for (i, &v) in u.values().iter().enumerate() {
            let x = grid.interior_x(i);
            let jet = s.jet(v);
            let phi = noise.eval(t, v);
            let p = psi.value(t1, x, len);
            st += jet.d1 * p * phi;
            ti += jet.value * psi.time_derivative(t, x, len);
            co += jet.d2 * p * phi * phi;
        }
        stoch += db * h * st;
        time += dt * h * ti;
        corr += 0.5 * dt * h * co;
    }
    let boundary = pairing(traj.final_state(), traj.time(traj.steps())) - pairing(traj.state(0), 0.0);
    let residual = boundary + chain + cross - stoch - time - corr;
    vec![residual, boundary, chain, cross, stoch, time, corr]
}

/// Residual of the renormalized equation at `t = T`, per path.
pub fn renorm_residual(exp: &Experiment, s: &Renormalizer, psi: TestFunction) -> Result<ResidualReport> {
    check_renormalizer(s, psi)?;
    let rows = mc_collect(exp.n_paths, exp.workers, |i| {
        let u0 = exp.initial_u(i)?;
        let path = exp.brownian(i)?;
        let traj = evolve(&u0, &exp.noise, &path, &exp.flux, &exp.solver)?;
        Ok(renorm_path(exp, s, psi, &traj))
    })?;
    report(rows, &RENORM_TERMS, exp.seed)
}

/// Rejects `(H, Z)` unless both are `W^{2,∞}` and `Z(0) = Z'(0) = 0`.
pub fn check_product_pair(hfun: &Renormalizer, zfun: &Renormalizer) -> Result<()> {
    if !hfun.is_c1() || !zfun.is_c1() {
        return Err(Error::Invalid("H and Z must have continuous first derivatives".into()));
    }
    let z0 = zfun.jet(0.0);
    if z0.value != 0.0 || z0.d1 != 0.0 {
        return Err(Error::Invalid("Z needs Z(0) = Z'(0) = 0".into()));
    }
    Ok(())
}

const PRODUCT_TERMS: [&str; 8] = [
    "lhs",
    "drift_difference",
    "drift_u",
    "stochastic_u",
    "correction_u",
    "correction_difference",
    "stochastic_difference",
    "cross_variation",
];

fn product_path(exp: &Experiment, hfun: &Renormalizer, zfun: &Renormalizer, u: &Trajectory, v: &Trajectory) -> Vec<f64> {
    let grid = exp.grid;
    let (h, n) = (grid.h(), grid.n_cells());
    let dt = u.dt();
    let noise = &exp.noise;
    let flux = &exp.flux;

    let pairing = |a: &GridFunction, b: &GridFunction| -> f64 {
        h * a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| zfun.value(x - y) * hfun.value(x))
            .sum::<f64>()
    };
    let mut hz1 = vec![0.0; n + 1];
    let mut h1z = vec![0.0; n + 1];
    let mut t = [0.0; 7];
    for (j, &db) in u.path().increments().iter().enumerate() {
        let tj = u.time(j);
        let (u0, v0) = (u.state(j), v.state(j));
        let (u1, v1) = (u.state(j + 1), v.state(j + 1));
        for i in 0..=n {
            let (a0, b0) = (kicked(noise, tj, db, u0.node(i)), kicked(noise, tj, db, v0.node(i)));
            let (a1, b1) = (u1.node(i), v1.node(i));
            let (w0, w1) = (a0 - b0, a1 - b1);
            // symmetric split of H(a1)Z(w1) − H(a0)Z(w0) into u and w parts
            hz1[i] = 0.5 * (hfun.value(a0) + hfun.value(a1)) * mean_slope(zfun, w0, w1);
            h1z[i] = mean_slope(hfun, a0, a1) * 0.5 * (zfun.value(w0) + zfun.value(w1));
        }
        let (mut d_diff, mut d_u) = (0.0, 0.0);
        for e in 0..n {
            let fu = flux.flux((u1.node(e + 1) - u1.node(e)) / h);
            let fv = flux.flux((v1.node(e + 1) - v1.node(e)) / h);
            d_diff += (fu - fv) * (hz1[e + 1] - hz1[e]);
            d_u += fu * (h1z[e + 1] - h1z[e]);
        }
        t[0] -= dt * d_diff;
        t[1] -= dt * d_u;

        let mut s = [0.0; 5];
        for (&a, &b) in u.state(j).values().iter().zip(v.state(j).values()) {
            let hj = hfun.jet(a);
            let zj = zfun.jet(a - b);
            let pu = noise.eval(tj, a);
            let dphi = pu - noise.eval(tj, b);
            s[0] += pu * hj.d1 * zj.value;
            s[1] += pu * pu * hj.d2 * zj.value;
            s[2] += dphi * dphi * zj.d2 * hj.value;
            s[3] += dphi * zj.d1 * hj.value;
            s[4] += dphi * zj.d1 * pu * hj.d1;
        }
        t[2] += db * h * s[0];
        t[3] += 0.5 * dt * h * s[1];
        t[4] += 0.5 * dt * h * s[2];
        t[5] += db * h * s[3];
        t[6] += dt * h * s[4];
    }
    let lhs = pairing(u.final_state(), v.final_state()) - pairing(u.state(0), v.state(0));
    let mut row = vec![lhs - t.iter().sum::<f64>(), lhs];
    row.extend_from_slice(&t);
    row
}

/// Residual of the Itô product rule for `(Z(u − v), H(u))` on coupled paths.
pub fn ito_product_residual(exp: &Experiment, hfun: &Renormalizer, zfun: &Renormalizer) -> Result<ResidualReport> {
    check_product_pair(hfun, zfun)?;
    let rows = mc_collect(exp.n_paths, exp.workers, |i| {
        let u0 = exp.initial_u(i)?;
        let v0 = exp.initial_v(i)?;
        let path = exp.brownian(i)?;
        let (u, v) = evolve_coupled(&u0, &v0, &exp.noise, &path, &exp.flux, &exp.solver)?;
        Ok(product_path(exp, hfun, zfun, &u, &v))
    })?;
    report(rows, &PRODUCT_TERMS, exp.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::InitialSpec;
    use crate::mesh::{Flux, Grid1D};
    use crate::noise::NoiseModel;

    fn experiment(noise: NoiseModel, u0: InitialSpec, n_cells: usize, dt: f64) -> Experiment {
        let grid = Grid1D::new(n_cells, 1.0).unwrap();
        let mut exp = Experiment::new(grid, Flux::new(2.0, 0.0).unwrap(), noise, u0, 0.1, dt).unwrap();
        exp.n_paths = 16;
        exp.seed = 11;
        exp
    }

    #[test]
    fn catalog_values() {
        let psi = TestFunction::SineGrowing;
        assert!((psi.value(1.0, 0.5, 1.0) - 2.0).abs() < 1e-15);
        assert!((psi.time_derivative(0.3, 0.5, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(TestFunction::Constant.value(3.0, 0.1, 1.0), 1.0);
        assert_eq!(TestFunction::Sine.time_derivative(0.0, 0.5, 1.0), 0.0);
        let json = serde_json::to_string(&TestFunction::SineGrowing).unwrap();
        assert_eq!(json, r#"{"kind":"sine_growing"}"#);
    }

    #[test]
    fn admissibility() {
        let s = Renormalizer::hk_delta(2.0, 0.5).unwrap();
        assert!(check_renormalizer(&s, TestFunction::Constant).is_ok());
        let shifted = Renormalizer::plateau_primitive(1.0).unwrap();
        assert!(check_renormalizer(&shifted, TestFunction::Constant).is_err());
        assert!(check_renormalizer(&shifted, TestFunction::Sine).is_ok());
        assert!(check_renormalizer(&Renormalizer::trunc(1.0).unwrap(), TestFunction::Sine).is_err());
        let z = Renormalizer::trunc_primitive(1.0).unwrap();
        assert!(check_product_pair(&s, &z).is_ok());
        assert!(check_product_pair(&s, &shifted).is_err());
    }

    #[test]
    fn zero_datum_has_zero_residual() {
        let exp = experiment(NoiseModel::bounded_trunc(1.0, 2.0).unwrap(), InitialSpec::sine(0.0, 1), 16, 0.01);
        let s = Renormalizer::hk_delta(2.0, 0.5).unwrap();
        let r = renorm_residual(&exp, &s, TestFunction::SineGrowing).unwrap();
        assert_eq!((r.signed.mean, r.rms), (0.0, 0.0));
    }

    #[test]
    fn equal_pair_has_zero_product_residual() {
        let mut exp = experiment(NoiseModel::bounded_trunc(1.0, 2.0).unwrap(), InitialSpec::spike(3.0), 16, 0.01);
        exp.v0 = Some(InitialSpec::spike(3.0));
        let r = ito_product_residual(
            &exp,
            &Renormalizer::hk_delta(3.0, 0.5).unwrap(),
            &Renormalizer::trunc_primitive(1.0).unwrap(),
        )
        .unwrap();
        assert_eq!((r.signed.mean, r.rms), (0.0, 0.0));
    }

    fn heat_rms(n_cells: usize, dt: f64) -> f64 {
        let exp = experiment(NoiseModel::zero(), InitialSpec::sine(1.0, 1), n_cells, dt);
        let s = Renormalizer::hk_delta(1e6, 1.0).unwrap();
        renorm_residual(&exp, &s, TestFunction::Constant).unwrap().rms
    }

    #[test]
    fn heat_consistency_error_vanishes() {
        let coarse = heat_rms(16, 0.01);
        let fine = heat_rms(32, 0.0025);
        assert!(fine < 0.5 * coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn deterministic_product_rule_is_exact() {
        let rms = |dt: f64| {
            let mut exp = experiment(NoiseModel::zero(), InitialSpec::sine(2.0, 1), 32, dt);
            exp.v0 = Some(InitialSpec::sine(1.0, 2));
            exp.n_paths = 2;
            ito_product_residual(
                &exp,
                &Renormalizer::hk_delta(3.0, 0.5).unwrap(),
                &Renormalizer::trunc_primitive(1.0).unwrap(),
            )
            .unwrap()
            .rms
        };
        for dt in [0.01, 0.0025] {
            assert!(rms(dt) < 1e-12, "{dt}: {}", rms(dt));
        }
    }

    #[test]
    fn renorm_pieces_are_consistent() {
        let exp = experiment(NoiseModel::bounded_trunc(1.0, 2.0).unwrap(), InitialSpec::spike(3.0), 16, 0.01);
        let s = Renormalizer::trunc_primitive(1.0).unwrap();
        let r = renorm_residual(&exp, &s, TestFunction::Constant).unwrap();
        // with ψ ≡ 1 there is no cross or time term
        let term = |name: &str| r.terms.iter().find(|(n, _)| n == name).unwrap().1.mean;
        assert_eq!(term("cross"), 0.0);
        assert_eq!(term("time"), 0.0);
        assert!(term("chain") > 0.0);
        assert!(r.abs.mean >= r.signed.mean.abs());
    }
}
