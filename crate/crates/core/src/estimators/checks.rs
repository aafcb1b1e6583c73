//! Contraction, energy and truncation checks.

use serde::Serialize;

use crate::config::Experiment;
use crate::error::{Error, Result};
use crate::estimators::mc::{compensated_sum, mc_collect, summarize, summarize_columns, McResult};
use crate::initial::truncate_initial;
use crate::mesh::{abs_pow, gradient, gradient_energy, levelset_gradient_integral, truncated_gradient_energy, GridFunction};
use crate::sde::{evolve, evolve_coupled, Trajectory};
use crate::truncations::Renormalizer;

/// Time series of `𝔼‖u(t_j) − v(t_j)‖₁` and the derived ratios.
#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    pub gaps: Vec<McResult>,
    /// `gaps[j].mean / gaps[0].mean`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub max_index: usize,
    /// Standard error of the maximal ratio, relative to the initial gap.
    pub ratio_stderr: f64,
    pub ito: Vec<ItoCorrectionBound>,
}

impl ContractionReport {
    /// `max(0, max_ratio − 1)`.
    pub fn excess(&self) -> f64 {
        (self.max_ratio - 1.0).max(0.0)
    }
}

/// Pathwise check of `Σ_j dt ∫ N_δ''(u−v)(Φ(u)−Φ(v))² ≤ δL²TX`.
#[derive(Clone, Debug, Serialize)]
pub struct ItoCorrectionBound {
    pub delta: f64,
    pub bound: f64,
    pub lhs: McResult,
    pub max_lhs: f64,
    pub violations: usize,
}

fn coupled(exp: &Experiment, u0: &GridFunction, v0: &GridFunction, index: u64) -> Result<(Trajectory, Trajectory)> {
    let path = exp.brownian(index)?;
    evolve_coupled(u0, v0, &exp.noise, &path, &exp.flux, &exp.solver)
}

fn single(exp: &Experiment, index: u64) -> Result<(GridFunction, Trajectory)> {
    let u0 = exp.initial_u(index)?;
    let path = exp.brownian(index)?;
    let traj = evolve(&u0, &exp.noise, &path, &exp.flux, &exp.solver)?;
    Ok((u0, traj))
}

fn l1_distance(a: &GridFunction, b: &GridFunction) -> f64 {
    a.grid().h() * a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `Σ_{j<J} dt · h Σ_i N_δ''(u^j−v^j)(Φ(t_j, u^j) − Φ(t_j, v^j))²`.
fn ito_correction(exp: &Experiment, u: &Trajectory, v: &Trajectory, delta: f64) -> f64 {
    let h = exp.h();
    let dt = u.dt();
    let n_delta = Renormalizer::AbsSmooth { delta };
    let mut total = 0.0;
    for j in 0..u.steps() {
        let t = u.time(j);
        let s: f64 = u.state(j)
            .values()
            .iter()
            .zip(v.state(j).values())
            .map(|(&a, &b)| {
                let d2 = n_delta.jet(a - b).d2;
                if d2 == 0.0 {
                    0.0
                } else {
                    let dphi = exp.noise.eval(t, a) - exp.noise.eval(t, b);
                    d2 * dphi * dphi
                }
            })
            .sum();
        total += dt * h * s;
    }
    total
}

/// Estimates `R(t_j) = 𝔼‖u(t_j)−v(t_j)‖₁ / 𝔼‖u0−v0‖₁` on synchronously coupled
/// paths, together with the Itô-correction bound for each `δ`.
pub fn contraction_check(exp: &Experiment, deltas: &[f64]) -> Result<ContractionReport> {
    for &d in deltas {
        crate::error::positive("delta", d)?;
    }
    let rows = mc_collect(exp.n_paths, exp.workers, |i| {
        let (u, v) = coupled(exp, &exp.initial_u(i)?, &exp.initial_v(i)?, i)?;
        let gaps: Vec<f64> = u.states().iter().zip(v.states()).map(|(a, b)| l1_distance(a, b)).collect();
        let ito: Vec<f64> = deltas.iter().map(|&d| ito_correction(exp, &u, &v, d)).collect();
        Ok((gaps, ito))
    })?;
    let (gap_rows, ito_rows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let gaps = summarize_columns(&gap_rows, exp.seed)?;
    let initial = gaps[0].mean;
    if initial <= 0.0 {
        return Err(Error::Invalid("contraction check needs u0 ≠ v0".into()));
    }
    let ratios: Vec<f64> = gaps.iter().map(|g| g.mean / initial).collect();
    let (max_index, max_ratio) = ratios
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, r)| if r > best.1 { (j, r) } else { best });

    let l = exp.noise.lipschitz();
    let ito = deltas
        .iter()
        .enumerate()
        .map(|(c, &delta)| {
            let column: Vec<f64> = ito_rows.iter().map(|r| r[c]).collect();
            let bound = delta * l * l * exp.final_time * exp.grid.length();
            Ok(ItoCorrectionBound {
                delta,
                bound,
                lhs: summarize(&column, exp.seed)?,
                max_lhs: column.iter().copied().fold(0.0, f64::max),
                violations: column.iter().filter(|&&x| x > bound).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ContractionReport {
        times: (0..=exp.steps).map(|j| j as f64 * exp.dt).collect(),
        ratio_stderr: gaps[max_index].stderr / initial,
        gaps,
        ratios,
        max_ratio,
        max_index,
        ito,
    })
}

/// `C(k) = T L² k² X / 2 + k ‖u0‖₁`.
pub fn energy_constant(final_time: f64, lipschitz: f64, k: f64, length: f64, u0_l1: f64) -> f64 {
    0.5 * final_time * lipschitz * lipschitz * k * k * length + k * u0_l1
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyBound {
    pub k: f64,
    /// `𝔼 Σ_{j=1}^J dt · h Σ_e |D_e T_k(u^j)|^p`.
    pub lhs: McResult,
    pub c_k: f64,
}

/// Truncated space-time gradient energy against `C(k)` for each level.
pub fn energy_bound_check(exp: &Experiment, ks: &[f64]) -> Result<Vec<EnergyBound>> {
    for &k in ks {
        crate::error::positive("k", k)?;
    }
    let p = exp.p();
    let rows = mc_collect(exp.n_paths, exp.workers, |i| {
        let (u0, traj) = single(exp, i)?;
        let mut row = Vec::with_capacity(ks.len() + 1);
        row.push(u0.l1_norm());
        for &k in ks {
            let terms = traj.states()[1..]
                .iter()
                .map(|u| truncated_gradient_energy(u, k, p))
                .collect::<Result<Vec<_>>>()?;
            row.push(traj.dt() * compensated_sum(terms));
        }
        Ok(row)
    })?;
    let cols = summarize_columns(&rows, exp.seed)?;
    let u0_l1 = cols[0].mean;
    Ok(ks
        .iter()
        .zip(&cols[1..])
        .map(|(&k, lhs)| EnergyBound {
            k,
            lhs: *lhs,
            c_k: energy_constant(exp.final_time, exp.noise.lipschitz(), k, exp.grid.length(), u0_l1),
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipationProfile {
    /// `D(k) = 𝔼 Σ_{j=1}^J dt ∫_{k<|u|<k+1} |∇u|^p`.
    pub levels: Vec<(f64, McResult)>,
    pub total: McResult,
    /// Largest `|u^j|` over all paths and steps `j ≥ 1`.
    pub max_abs: f64,
}

impl DissipationProfile {
    pub fn at(&self, k: f64) -> Option<&McResult> {
        self.levels.iter().find(|(l, _)| *l == k).map(|(_, r)| r)
    }
}

pub fn dissipation_profile(exp: &Experiment, ks: &[f64]) -> Result<DissipationProfile> {
    if ks.iter().any(|k| !(*k >= 0.0 && k.is_finite())) || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("dissipation levels must be non-negative and ascending".into()));
    }
    let p = exp.p();
    let rows = mc_collect(exp.n_paths, exp.workers, |i| {
        let (_, traj) = single(exp, i)?;
        let dt = traj.dt();
        let states = &traj.states()[1..];
        let mut row: Vec<f64> = ks
            .iter()
            .map(|&k| dt * compensated_sum(states.iter().map(|u| levelset_gradient_integral(u, p, k, k + 1.0))))
            .collect();
        row.push(dt * compensated_sum(states.iter().map(|u| gradient_energy(u, p))));
        row.push(states.iter().map(GridFunction::max_abs).fold(0.0, f64::max));
        Ok(row)
    })?;
    let max_abs = rows.iter().map(|r| r[ks.len() + 1]).fold(0.0, f64::max);
    let cols = summarize_columns(&rows, exp.seed)?;
    Ok(DissipationProfile {
        levels: ks.iter().copied().zip(cols.iter().copied()).collect(),
        total: cols[ks.len()],
        max_abs,
    })
}

fn truncated_pair(exp: &Experiment, n: f64, m: f64, index: u64) -> Result<(GridFunction, GridFunction, Trajectory, Trajectory)> {
    let u0 = exp.initial_u(index)?;
    let un = truncate_initial(&u0, n)?;
    let um = truncate_initial(&u0, m)?;
    let (a, b) = coupled(exp, &un, &um, index)?;
    Ok((un, um, a, b))
}

fn check_levels(n: f64, m: f64) -> Result<()> {
    crate::error::positive("n", n)?;
    crate::error::positive("m", m)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct CauchyCheck {
    pub n: f64,
    pub m: f64,
    /// `𝔼‖u_n(T) − u_m(T)‖₁`.
    pub lhs: McResult,
    /// `𝔼‖T_n u0 − T_m u0‖₁`.
    pub rhs: f64,
}

/// Coupled runs from `T_n(u0)` and `T_m(u0)`.
pub fn cauchy_initial_check(exp: &Experiment, n: f64, m: f64) -> Result<CauchyCheck> {
    check_levels(n, m)?;
    let rows = mc_collect(exp.n_paths, exp.workers, |i| {
        let (un, um, a, b) = truncated_pair(exp, n, m, i)?;
        Ok(vec![l1_distance(a.final_state(), b.final_state()), l1_distance(&un, &um)])
    })?;
    let cols = summarize_columns(&rows, exp.seed)?;
    Ok(CauchyCheck {
        n,
        m,
        lhs: cols[0],
        rhs: cols[1].mean,
    })
}

/// `𝔼 Σ_{j=1}^J dt h Σ_e (φ(D_e u_n) − φ(D_e u_m)) D_e T_k(u_n − u_m)`.
pub fn monotonicity_gap(exp: &Experiment, n: f64, m: f64, k: f64) -> Result<McResult> {
    check_levels(n, m)?;
    crate::error::positive("k", k)?;
    let h = exp.h();
    let samples = mc_collect(exp.n_paths, exp.workers, |i| {
        let (_, _, a, b) = truncated_pair(exp, n, m, i)?;
        let terms = a.states()[1..].iter().zip(&b.states()[1..]).map(|(x, y)| {
            let gx = gradient(x);
            let gy = gradient(y);
            let d = x.zip_map(y, |p, q| (p - q).clamp(-k, k)).expect("same grid");
            let gd = gradient(&d);
            h * gx
                .iter()
                .zip(&gy)
                .zip(&gd)
                .map(|((&s, &t), &g)| (exp.flux.flux(s) - exp.flux.flux(t)) * g)
                .sum::<f64>()
        });
        Ok(a.dt() * compensated_sum(terms))
    })?;
    summarize(&samples, exp.seed)
}

/// `𝔼 Σ_{j=1}^J dt h Σ_e H''(ū_{n,e}) Z(ū_{n,e} − ū_{m,e}) |D_e u_n|^p`.
pub fn hz_coupling_diagnostic(
    exp: &Experiment,
    n: f64,
    m: f64,
    hfun: &Renormalizer,
    zfun: &Renormalizer,
) -> Result<McResult> {
    check_levels(n, m)?;
    let z0 = zfun.jet(0.0);
    if z0.value != 0.0 || z0.d1 != 0.0 {
        return Err(Error::Invalid("Z needs Z(0) = Z'(0) = 0".into()));
    }
    if hfun.support_radius().is_none() {
        return Err(Error::Invalid("H' needs compact support".into()));
    }
    let h = exp.h();
    let p = exp.p();
    let samples = mc_collect(exp.n_paths, exp.workers, |i| {
        let (_, _, a, b) = truncated_pair(exp, n, m, i)?;
        let terms = a.states()[1..].iter().zip(&b.states()[1..]).map(|(x, y)| {
            let edges = x.grid().n_edges();
            let mut s = 0.0;
            for e in 0..edges {
                let ux = 0.5 * (x.node(e) + x.node(e + 1));
                let uy = 0.5 * (y.node(e) + y.node(e + 1));
                let d2 = hfun.jet(ux).d2;
                if d2 != 0.0 {
                    s += d2 * zfun.value(ux - uy) * abs_pow((x.node(e + 1) - x.node(e)) / h, p);
                }
            }
            h * s
        });
        Ok(a.dt() * compensated_sum(terms))
    })?;
    summarize(&samples, exp.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::InitialSpec;
    use crate::mesh::{Flux, Grid1D};
    use crate::noise::NoiseModel;

    fn experiment(noise: NoiseModel, p: f64, u0: InitialSpec, v0: Option<InitialSpec>) -> Experiment {
        let grid = Grid1D::new(16, 1.0).unwrap();
        let mut exp = Experiment::new(grid, Flux::new(p, 0.0).unwrap(), noise, u0, 0.05, 0.005).unwrap();
        exp.v0 = v0;
        exp.n_paths = 8;
        exp.seed = 3;
        exp
    }

    fn bounded() -> NoiseModel {
        NoiseModel::bounded_trunc(1.0, 2.0).unwrap()
    }

    #[test]
    fn energy_constant_example() {
        assert_eq!(energy_constant(1.0, 1.0, 2.0, 1.0, 1.0), 4.0);
    }

    #[test]
    fn contraction_starts_at_one_and_is_deterministic_without_noise() {
        let exp = experiment(NoiseModel::zero(), 2.0, InitialSpec::spike(5.0), Some(InitialSpec::sine(1.0, 1)));
        let r = contraction_check(&exp, &[0.1]).unwrap();
        assert_eq!(r.ratios[0], 1.0);
        assert!(r.ratios.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(r.gaps[3].stderr, 0.0);
        assert_eq!(r.ito[0].max_lhs, 0.0);
    }

    #[test]
    fn contraction_scaled_identical_data() {
        let exp = experiment(bounded(), 3.0, InitialSpec::sine(2.0, 1), Some(InitialSpec::sine(1.0, 1)));
        let r = contraction_check(&exp, &[0.1, 0.01]).unwrap();
        assert_eq!(r.ratios[0], 1.0);
        assert!(r.ito.iter().all(|b| b.violations == 0 && b.max_lhs <= b.bound));
        let same = experiment(bounded(), 2.0, InitialSpec::sine(1.0, 1), Some(InitialSpec::sine(1.0, 1)));
        assert!(contraction_check(&same, &[0.1]).is_err());
    }

    #[test]
    fn contraction_is_worker_independent() {
        let exp = experiment(bounded(), 2.0, InitialSpec::spike(5.0), Some(InitialSpec::sine(1.0, 1)));
        let a = contraction_check(&exp.with_workers(1), &[0.1]).unwrap();
        let b = contraction_check(&exp.with_workers(3), &[0.1]).unwrap();
        assert_eq!(a.max_ratio.to_bits(), b.max_ratio.to_bits());
        assert_eq!(a.ito[0].lhs, b.ito[0].lhs);
    }

    #[test]
    fn zero_datum_has_zero_energy() {
        let exp = experiment(bounded(), 2.0, InitialSpec::sine(0.0, 1), None);
        let e = energy_bound_check(&exp, &[1.0]).unwrap();
        assert_eq!(e[0].lhs.mean, 0.0);
        assert_eq!(e[0].c_k, energy_constant(0.05, 1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn inactive_truncation_gives_full_energy() {
        let exp = experiment(bounded(), 3.0, InitialSpec::sine(1.0, 1), None);
        let e = energy_bound_check(&exp, &[1e6]).unwrap();
        let d = dissipation_profile(&exp, &[0.0]).unwrap();
        assert!((e[0].lhs.mean - d.total.mean).abs() <= 1e-12 * d.total.mean);
    }

    #[test]
    fn dissipation_bands_partition_total_energy() {
        let exp = experiment(bounded(), 2.0, InitialSpec::spike(5.0), None);
        let ks: Vec<f64> = (0..8).map(f64::from).collect();
        let d = dissipation_profile(&exp, &ks).unwrap();
        assert!(d.max_abs < 7.0);
        let sum: f64 = d.levels.iter().map(|(_, r)| r.mean).sum();
        assert!((sum - d.total.mean).abs() <= 1e-10 * d.total.mean, "{sum} vs {}", d.total.mean);
        assert_eq!(d.at(7.0).unwrap().mean, 0.0);
        assert!(dissipation_profile(&exp, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn equal_levels_give_zero_gaps() {
        let exp = experiment(bounded(), 2.0, InitialSpec::spike(5.0), None);
        let c = cauchy_initial_check(&exp, 3.0, 3.0).unwrap();
        assert_eq!((c.lhs.mean, c.rhs), (0.0, 0.0));
        assert_eq!(monotonicity_gap(&exp, 3.0, 3.0, 1.0).unwrap().mean, 0.0);
        let hfun = Renormalizer::hk_delta(3.0, 0.5).unwrap();
        let zfun = Renormalizer::trunc_primitive(1.0).unwrap();
        assert_eq!(hz_coupling_diagnostic(&exp, 3.0, 3.0, &hfun, &zfun).unwrap().mean, 0.0);
        let inactive = cauchy_initial_check(&exp, 6.0, 8.0).unwrap();
        assert_eq!((inactive.lhs.mean, inactive.rhs), (0.0, 0.0));
    }

    #[test]
    fn truncation_gaps_are_contracted_and_monotone() {
        let exp = experiment(bounded(), 2.0, InitialSpec::spike(5.0), None);
        let c = cauchy_initial_check(&exp, 2.0, 4.0).unwrap();
        assert!(c.rhs > 0.0 && c.lhs.mean <= c.rhs * 1.01);
        assert!(monotonicity_gap(&exp, 2.0, 4.0, 1.0).unwrap().mean >= 0.0);
        assert!(monotonicity_gap(&exp, 2.0, 4.0, 1e9).unwrap().mean >= 0.0);
    }

    #[test]
    fn hz_rejects_inadmissible_pairs() {
        let exp = experiment(bounded(), 2.0, InitialSpec::spike(5.0), None);
        let hfun = Renormalizer::hk_delta(3.0, 0.5).unwrap();
        let bad_z = Renormalizer::plateau_primitive(1.0).unwrap();
        assert!(hz_coupling_diagnostic(&exp, 2.0, 4.0, &hfun, &bad_z).is_err());
        let bad_h = Renormalizer::trunc_primitive(1.0).unwrap();
        let z = Renormalizer::trunc_primitive(1.0).unwrap();
        assert!(hz_coupling_diagnostic(&exp, 2.0, 4.0, &bad_h, &z).is_err());
    }
}
