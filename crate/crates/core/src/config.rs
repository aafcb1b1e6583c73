//! Experiment files.
//!
//! An experiment is a TOML document with dotted sections:
//!
//! ```toml
//! [grid]
//! n_cells = 64
//! length = 1.0
//!
//! [time]
//! T = 0.5
//! dt = 1e-3
//!
//! [model]
//! p = [2.0, 3.0]      # a single value or a list; each p is run separately
//!
//! [noise]
//! kind = "bounded_trunc"
//! L = 1.0
//! M = 2.0
//!
//! [initial.u0]
//! kind = "spike"
//! height = 5.0
//!
//! [initial.v0]
//! kind = "sine"
//!
//! [mc]
//! seed = 20240601
//! n_paths = 2000
//! ```
//!
//! The optional sections `[solver]`, `[levels]`, `[renorm]` and
//! `[thresholds]` fall back to the defaults below. [`ExperimentConfig::validate`]
//! lists every violated constraint, naming the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::TestFunction;
use crate::initial::InitialSpec;
use crate::mesh::{gradient, Flux, Grid1D, GridFunction};
use crate::noise::{make_noise, NoiseModel, NoiseSpec};
use crate::sde::{sample_brownian, BrownianPath};
use crate::solver::SolverOptions;
use crate::truncations::Renormalizer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub model: ModelConfig,
    pub noise: NoiseSpec,
    pub initial: InitialConfig,
    pub mc: McConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub levels: LevelsConfig,
    #[serde(default)]
    pub renorm: RenormConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_cells: i64,
    #[serde(default = "one")]
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub final_time: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PValues {
    One(f64),
    Many(Vec<f64>),
}

impl PValues {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            PValues::One(p) => vec![*p],
            PValues::Many(ps) => ps.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub p: PValues,
    /// Flux regularization; defaults to 0 for `p ≥ 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub u0: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<InitialSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub seed: u64,
    pub n_paths: i64,
    /// Worker threads; 0 lets the runtime decide.
    #[serde(default)]
    pub workers: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelsConfig {
    pub energy_k: Vec<f64>,
    pub dissipation_k: Vec<f64>,
    pub ito_deltas: Vec<f64>,
    pub cauchy_pairs: Vec<[f64; 2]>,
    pub hz_pairs: Vec<[f64; 2]>,
    pub monotonicity_k: f64,
    /// Time steps of refinement studies, coarsest first.
    pub refine_dts: Vec<f64>,
}

impl Default for LevelsConfig {
    fn default() -> Self {
        LevelsConfig {
            energy_k: vec![0.5, 1.0, 2.0],
            dissipation_k: (0..10).map(f64::from).collect(),
            ito_deltas: vec![0.1, 0.01],
            cauchy_pairs: vec![[2.0, 8.0], [4.0, 8.0]],
            hz_pairs: vec![[2.0, 4.0], [4.0, 8.0], [8.0, 16.0]],
            monotonicity_k: 1.0,
            refine_dts: vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormConfig {
    pub s: Renormalizer,
    pub psi: TestFunction,
    pub h: Renormalizer,
    pub z: Renormalizer,
}

impl Default for RenormConfig {
    fn default() -> Self {
        RenormConfig {
            s: Renormalizer::HkDelta { k: 2.0, delta: 0.5 },
            psi: TestFunction::SineGrowing,
            h: Renormalizer::HkDelta { k: 3.0, delta: 0.5 },
            z: Renormalizer::TruncPrimitive { k: 1.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Allowed contraction defect over 1.
    pub contraction_slack: f64,
    /// Multiplier on standard errors in one-sided bounds.
    pub stderr_factor: f64,
    pub energy_factor: f64,
    pub dissipation_level: f64,
    pub dissipation_ratio: f64,
    pub renorm_min_order: f64,
    /// Signed residual means must lie within this many standard errors of 0.
    pub mean_sigmas: f64,
    pub cauchy_slack: f64,
    /// Largest relative L² error on the coarse heat level.
    pub heat_max_error: f64,
    /// Smallest error reduction from the coarse to the refined heat level.
    pub heat_min_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            contraction_slack: 0.02,
            stderr_factor: 3.0,
            energy_factor: 1.10,
            dissipation_level: 8.0,
            dissipation_ratio: 0.1,
            renorm_min_order: 0.4,
            mean_sigmas: 4.0,
            cauchy_slack: 0.05,
            heat_max_error: 2e-3,
            heat_min_ratio: 1.8,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// One violated constraint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Relative tolerance for `T/dt` being an integer.
const DIVISIBILITY_TOL: f64 = 1e-12;

fn step_count(total: f64, dt: f64) -> Option<usize> {
    let n = (total / dt).round();
    if n >= 1.0 && (n * dt - total).abs() <= DIVISIBILITY_TOL * total.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Every violated constraint; empty iff the experiment can run.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: String| {
            out.push(Violation {
                field: field.to_string(),
                message,
            })
        };

        if self.grid.n_cells < 2 {
            bad("grid.n_cells", format!("must be at least 2 (got {})", self.grid.n_cells));
        }
        if !(self.grid.length > 0.0 && self.grid.length.is_finite()) {
            bad("grid.length", format!("must be positive (got {})", self.grid.length));
        }

        let t = self.time.final_time;
        let dt = self.time.dt;
        let t_ok = t > 0.0 && t.is_finite();
        let dt_ok = dt > 0.0 && dt.is_finite();
        if !t_ok {
            bad("time.T", format!("must be positive (got {t})"));
        }
        if !dt_ok {
            bad("time.dt", format!("must be positive (got {dt})"));
        }
        if t_ok && dt_ok {
            if dt > t {
                bad("time.dt", format!("must not exceed time.T (dt = {dt}, T = {t})"));
            } else if step_count(t, dt).is_none() {
                bad("time.dt", format!("must divide time.T (dt = {dt}, T = {t})"));
            }
        }

        let ps = self.model.p.to_vec();
        if ps.is_empty() {
            bad("model.p", "needs at least one value".into());
        }
        for &p in &ps {
            if !(p > 1.0 && p.is_finite()) {
                bad("model.p", format!("p must exceed 1 (got {p})"));
            }
        }
        if let Some(eps) = self.model.eps {
            if !(eps >= 0.0 && eps.is_finite()) {
                bad("model.eps", format!("must be non-negative (got {eps})"));
            } else if eps == 0.0 && ps.iter().any(|&p| p > 1.0 && p < 2.0) {
                bad("model.eps", "must be positive when p < 2".into());
            }
        }

        if let Err(e) = make_noise(&self.noise) {
            bad("noise", e.to_string());
        }

        if let Ok(grid) = Grid1D::new(self.grid.n_cells.max(2) as usize, self.grid.length.abs().max(1e-300)) {
            if let Err(e) = self.initial.u0.validate(&grid) {
                bad("initial.u0", e.to_string());
            }
            if let Some(v0) = &self.initial.v0 {
                if let Err(e) = v0.validate(&grid) {
                    bad("initial.v0", e.to_string());
                }
            }
        }

        if self.mc.n_paths < 2 {
            bad("mc.n_paths", format!("must be at least 2 (got {})", self.mc.n_paths));
        }
        if self.mc.workers < 0 {
            bad("mc.workers", format!("must be non-negative (got {})", self.mc.workers));
        }

        if let Err(e) = self.solver.validate() {
            bad("solver", e.to_string());
        }

        let lv = &self.levels;
        let positive_list = |name: &str, xs: &[f64], out: &mut Vec<(String, String)>| {
            for &x in xs {
                if !(x > 0.0 && x.is_finite()) {
                    out.push((name.to_string(), format!("levels must be positive (got {x})")));
                }
            }
        };
        let mut level_errs = Vec::new();
        positive_list("levels.energy_k", &lv.energy_k, &mut level_errs);
        positive_list("levels.ito_deltas", &lv.ito_deltas, &mut level_errs);
        positive_list("levels.refine_dts", &lv.refine_dts, &mut level_errs);
        for pair in lv.cauchy_pairs.iter().chain(&lv.hz_pairs) {
            positive_list("levels.pairs", pair, &mut level_errs);
        }
        if lv.dissipation_k.iter().any(|k| !(*k >= 0.0 && k.is_finite()))
            || lv.dissipation_k.windows(2).any(|w| w[0] >= w[1])
        {
            level_errs.push(("levels.dissipation_k".into(), "must be non-negative and ascending".into()));
        }
        if !(lv.monotonicity_k > 0.0 && lv.monotonicity_k.is_finite()) {
            level_errs.push(("levels.monotonicity_k".into(), "must be positive".into()));
        }
        if t_ok {
            let finest = lv.refine_dts.iter().copied().fold(f64::INFINITY, f64::min);
            for &r in &lv.refine_dts {
                if r > 0.0 && (step_count(t, r).is_none() || step_count(r, finest).is_none()) {
                    level_errs.push((
                        "levels.refine_dts".into(),
                        format!("{r} must divide time.T and be a multiple of the finest step"),
                    ));
                }
            }
        }
        for (f, m) in level_errs {
            bad(&f, m);
        }

        for (name, r) in [("renorm.s", &self.renorm.s), ("renorm.h", &self.renorm.h), ("renorm.z", &self.renorm.z)] {
            if let Err(e) = r.clone().validated() {
                bad(name, e.to_string());
            }
        }
        let z0 = self.renorm.z.jet(0.0);
        if z0.value != 0.0 || z0.d1 != 0.0 {
            bad("renorm.z", "needs Z(0) = Z'(0) = 0".into());
        }

        let th = &self.thresholds;
        for (name, v) in [
            ("thresholds.contraction_slack", th.contraction_slack),
            ("thresholds.stderr_factor", th.stderr_factor),
            ("thresholds.energy_factor", th.energy_factor),
            ("thresholds.dissipation_level", th.dissipation_level),
            ("thresholds.dissipation_ratio", th.dissipation_ratio),
            ("thresholds.renorm_min_order", th.renorm_min_order),
            ("thresholds.mean_sigmas", th.mean_sigmas),
            ("thresholds.cauchy_slack", th.cauchy_slack),
            ("thresholds.heat_max_error", th.heat_max_error),
            ("thresholds.heat_min_ratio", th.heat_min_ratio),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bad(name, format!("must be non-negative (got {v})"));
            }
        }
        out
    }

    /// Validates and builds one experiment per configured `p`.
    pub fn build(&self) -> Result<Vec<Experiment>> {
        let violations = self.validate();
        if !violations.is_empty() {
            let msg = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(Error::Config(msg));
        }
        let grid = Grid1D::new(self.grid.n_cells as usize, self.grid.length)?;
        let noise = make_noise(&self.noise)?;
        let steps = step_count(self.time.final_time, self.time.dt).expect("validated");
        self.model
            .p
            .to_vec()
            .into_iter()
            .map(|p| {
                let flux = match self.model.eps {
                    Some(eps) => Flux::new(p, eps)?,
                    None => {
                        let u0 = self.initial.u0.build(&grid, 0)?;
                        let scale = gradient(&u0).iter().fold(0.0f64, |m, g| m.max(g.abs()));
                        Flux::with_default_eps(p, scale.max(1.0))?
                    }
                };
                Ok(Experiment {
                    grid,
                    flux,
                    noise: noise.clone(),
                    u0: self.initial.u0.clone(),
                    v0: self.initial.v0.clone(),
                    final_time: self.time.final_time,
                    dt: self.time.dt,
                    steps,
                    sample_factor: 1,
                    seed: self.mc.seed,
                    n_paths: self.mc.n_paths as usize,
                    workers: self.mc.workers as usize,
                    solver: self.solver,
                })
            })
            .collect()
    }
}

/// A validated, ready-to-run experiment for one value of `p`.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub grid: Grid1D,
    pub flux: Flux,
    pub noise: NoiseModel,
    pub u0: InitialSpec,
    pub v0: Option<InitialSpec>,
    pub final_time: f64,
    pub dt: f64,
    pub steps: usize,
    /// Brownian increments are drawn at `dt / sample_factor` and summed.
    pub sample_factor: usize,
    pub seed: u64,
    pub n_paths: usize,
    pub workers: usize,
    pub solver: SolverOptions,
}

impl Experiment {
    /// A single-path experiment without noise-dependent options, mainly for
    /// tests and deterministic studies.
    pub fn new(
        grid: Grid1D,
        flux: Flux,
        noise: NoiseModel,
        u0: InitialSpec,
        final_time: f64,
        dt: f64,
    ) -> Result<Self> {
        let steps = step_count(final_time, dt)
            .ok_or_else(|| Error::param("dt", dt, "must divide the final time"))?;
        Ok(Experiment {
            grid,
            flux,
            noise,
            u0,
            v0: None,
            final_time,
            dt,
            steps,
            sample_factor: 1,
            seed: 0,
            n_paths: 2,
            workers: 0,
            solver: SolverOptions::default(),
        })
    }

    pub fn p(&self) -> f64 {
        self.flux.p()
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    /// The Brownian path of Monte Carlo path `index`.
    pub fn brownian(&self, index: u64) -> Result<BrownianPath> {
        let fine = sample_brownian(
            self.seed,
            index,
            self.steps * self.sample_factor,
            self.dt / self.sample_factor as f64,
        )?;
        if self.sample_factor == 1 {
            Ok(fine)
        } else {
            fine.coarsen(self.sample_factor)
        }
    }

    pub fn initial_u(&self, index: u64) -> Result<GridFunction> {
        self.u0.build(&self.grid, index)
    }

    pub fn initial_v(&self, index: u64) -> Result<GridFunction> {
        self.v0
            .as_ref()
            .ok_or_else(|| Error::Config("initial.v0 is required for coupled experiments".into()))?
            .build(&self.grid, index)
    }

    /// Copies of this experiment at each step in `dts`, all driven by the same
    /// Brownian motion sampled at the finest step.
    pub fn refinement_family(&self, dts: &[f64]) -> Result<Vec<Experiment>> {
        let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
        if !(finest > 0.0 && finest.is_finite()) {
            return Err(Error::param("dt", finest, "refinement steps must be positive"));
        }
        dts.iter()
            .map(|&dt| {
                let steps = step_count(self.final_time, dt)
                    .ok_or_else(|| Error::param("dt", dt, "must divide the final time"))?;
                let factor = step_count(dt, finest)
                    .ok_or_else(|| Error::param("dt", dt, "must be a multiple of the finest step"))?;
                Ok(Experiment {
                    dt,
                    steps,
                    sample_factor: factor,
                    ..self.clone()
                })
            })
            .collect()
    }

    pub fn with_paths(&self, n_paths: usize) -> Experiment {
        Experiment {
            n_paths,
            ..self.clone()
        }
    }

    pub fn with_workers(&self, workers: usize) -> Experiment {
        Experiment {
            workers,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[grid]
n_cells = 16

[time]
T = 0.1
dt = 0.01

[model]
p = 2.0

[noise]
kind = "bounded_trunc"
L = 1.0
M = 2.0

[initial.u0]
kind = "spike"
height = 5.0

[initial.v0]
kind = "sine"

[mc]
seed = 1
n_paths = 10
"#;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(BASE).unwrap()
    }

    #[test]
    fn base_config_is_valid() {
        let cfg = base();
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        let exps = cfg.build().unwrap();
        assert_eq!(exps.len(), 1);
        assert_eq!(exps[0].steps, 10);
        assert_eq!(cfg.renorm, RenormConfig::default());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = base();
        let echoed = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(echoed, cfg);
        assert!(echoed.validate().is_empty());
    }

    #[test]
    fn violations_name_fields() {
        let mut cfg = base();
        cfg.model.p = PValues::One(1.0);
        cfg.mc.n_paths = -3;
        cfg.time.dt = 0.5;
        let v = cfg.validate();
        let fields: Vec<&str> = v.iter().map(|x| x.field.as_str()).collect();
        assert!(fields.contains(&"model.p"));
        assert!(fields.contains(&"mc.n_paths"));
        assert!(fields.contains(&"time.dt"));
        assert!(v.iter().any(|x| x.message.contains("p must exceed 1")));
        assert!(cfg.build().is_err());
    }

    #[test]
    fn non_dividing_step_rejected() {
        let mut cfg = base();
        cfg.time.dt = 0.03;
        assert!(cfg.validate().iter().any(|v| v.field == "time.dt"));
    }

    #[test]
    fn p_list_builds_one_experiment_each() {
        let mut cfg = base();
        cfg.model.p = PValues::Many(vec![2.0, 3.0, 1.5]);
        let exps = cfg.build().unwrap();
        assert_eq!(exps.iter().map(Experiment::p).collect::<Vec<_>>(), vec![2.0, 3.0, 1.5]);
        assert!(exps[2].flux.eps() > 0.0);
        assert_eq!(exps[1].flux.eps(), 0.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = BASE.replace("n_cells = 16", "n_cells = 16\ncells = 3");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn refinement_family_shares_brownian_motion() {
        let exp = base().build().unwrap().remove(0);
        let fam = exp.refinement_family(&[0.02, 0.01, 0.005]).unwrap();
        assert_eq!(fam[0].steps, 5);
        assert_eq!(fam[2].sample_factor, 1);
        let coarse = fam[0].brownian(3).unwrap();
        let fine = fam[2].brownian(3).unwrap();
        assert!((coarse.terminal_value() - fine.terminal_value()).abs() < 1e-14);
        assert_eq!(fine.coarsen(4).unwrap().increments(), coarse.increments());
        assert!(exp.refinement_family(&[0.03, 0.01]).is_err());
    }
}
