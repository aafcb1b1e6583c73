//! The `plap` command line runner.
//!
//! Every run subcommand takes an experiment file, applies the command line
//! overrides, validates, and writes into `--out-dir`:
//!
//! - `<command>_p<p>.csv`, one per value of `p`, with columns
//!   `quantity, level, mean, stderr, n, dt, h, seed` (`simulate` writes
//!   `t, node, value` instead);
//! - `<command>_summary.json`, a list of `{quantity, value, stderr, threshold, pass}`;
//! - `<command>_manifest.json`, echoing the effective configuration.
//!
//! Exit status: 0 when every check passes, 1 when a threshold fails, 2 on a
//! configuration error, 3 when the implicit solver fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    cauchy_initial_check, check_product_pair, check_renormalizer, contraction_check, dissipation_profile,
    energy_bound_check, heat_convergence, hz_coupling_diagnostic, ito_product_residual, log_log_slope,
    monotonicity_gap, renorm_residual, McResult, ResidualReport,
};
use crate::initial::InitialSpec;
use crate::sde::evolve;

pub const EXIT_OK: i32 = 0;
pub const EXIT_THRESHOLD: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "plap", version, about = "Stochastic p-Laplace evolution: simulation and Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export one trajectory per p as (t, node, value) rows.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Monte Carlo path index to export.
        #[arg(long, default_value_t = 0)]
        path: u64,
        /// Keep every n-th time level.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Expected L¹ distance of coupled solutions and the Itô-correction bound.
    VerifyContraction(RunArgs),
    /// Truncated space-time gradient energy against its a priori bound.
    VerifyEnergy(RunArgs),
    /// Gradient energy on the level bands {k < |u| < k+1}.
    VerifyDissipation(RunArgs),
    /// Residual of the renormalized equation under time-step refinement.
    VerifyRenorm(RunArgs),
    /// Residual of the Itô product rule for a coupled pair.
    VerifyItoProduct(RunArgs),
    /// L¹ distance of solutions started from truncated data.
    VerifyCauchy(RunArgs),
    /// Monotonicity pairing of truncated-data solutions.
    DiagMonotonicity(RunArgs),
    /// H''·Z coupling term of truncated-data solutions.
    DiagHz(RunArgs),
    /// Deterministic p = 2 order study against the exact heat solution.
    ConvergenceHeat(RunArgs),
    /// List every violated constraint of an experiment file.
    Validate {
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment file (TOML).
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub paths: Option<i64>,
    /// Replaces `time.dt` and clears `levels.refine_dts`.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub workers: Option<i64>,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::VerifyContraction(_) => "verify-contraction",
            Command::VerifyEnergy(_) => "verify-energy",
            Command::VerifyDissipation(_) => "verify-dissipation",
            Command::VerifyRenorm(_) => "verify-renorm",
            Command::VerifyItoProduct(_) => "verify-ito-product",
            Command::VerifyCauchy(_) => "verify-cauchy",
            Command::DiagMonotonicity(_) => "diag-monotonicity",
            Command::DiagHz(_) => "diag-hz",
            Command::ConvergenceHeat(_) => "convergence-heat",
            Command::Validate { .. } => "validate",
        }
    }

    fn run_args(&self) -> Option<&RunArgs> {
        match self {
            Command::Simulate { run, .. } => Some(run),
            Command::VerifyContraction(a)
            | Command::VerifyEnergy(a)
            | Command::VerifyDissipation(a)
            | Command::VerifyRenorm(a)
            | Command::VerifyItoProduct(a)
            | Command::VerifyCauchy(a)
            | Command::DiagMonotonicity(a)
            | Command::DiagHz(a)
            | Command::ConvergenceHeat(a) => Some(a),
            Command::Validate { .. } => None,
        }
    }
}

/// One CSV row of an estimator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub quantity: String,
    pub level: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub dt: f64,
    pub h: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct TrajectoryRow {
    t: f64,
    node: usize,
    value: f64,
}

/// One entry of the JSON summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub quantity: String,
    pub value: f64,
    pub stderr: f64,
    pub threshold: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn at_most(quantity: String, value: f64, stderr: f64, threshold: f64) -> Self {
        Check {
            quantity,
            value,
            stderr,
            pass: value <= threshold,
            threshold: Some(threshold),
        }
    }

    fn at_least(quantity: String, value: f64, stderr: f64, threshold: f64) -> Self {
        Check {
            quantity,
            value,
            stderr,
            pass: value >= threshold,
            threshold: Some(threshold),
        }
    }

    fn report(quantity: String, value: f64, stderr: f64) -> Self {
        Check {
            quantity,
            value,
            stderr,
            threshold: None,
            pass: value.is_finite(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub timestamp: String,
    pub seed: u64,
    pub duration_secs: f64,
    pub files: Vec<PathBuf>,
    /// The effective configuration after command line overrides.
    pub config: String,
}

/// Parses `args` (including the program name) and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    if let Command::Validate { config } = &cli.command {
        return validate_file(config);
    }
    let args = cli.command.run_args().expect("run subcommand");
    let cfg = match load_with_overrides(args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("{msg}");
            return EXIT_CONFIG;
        }
    };
    match execute(&cli.command, &cfg, args) {
        Ok(checks) => {
            let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
            for c in &checks {
                let th = c.threshold.map_or_else(|| "-".to_string(), |t| format!("{t:.6e}"));
                println!(
                    "{} {}  value {:.6e}  stderr {:.3e}  threshold {th}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.quantity,
                    c.value,
                    c.stderr
                );
            }
            if failed.is_empty() {
                EXIT_OK
            } else {
                for c in failed {
                    eprintln!("threshold failed: {}", c.quantity);
                }
                EXIT_THRESHOLD
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                EXIT_SOLVER
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn validate_file(path: &Path) -> i32 {
    let cfg = match ExperimentConfig::load(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let violations = cfg.validate();
    if violations.is_empty() {
        println!("{}: ok", path.display());
        EXIT_OK
    } else {
        for v in &violations {
            println!("{v}");
        }
        EXIT_CONFIG
    }
}

fn load_with_overrides(args: &RunArgs) -> std::result::Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    if let Some(n) = args.paths {
        cfg.mc.n_paths = n;
    }
    if let Some(dt) = args.dt {
        cfg.time.dt = dt;
        cfg.levels.refine_dts.clear();
    }
    if let Some(w) = args.workers {
        cfg.mc.workers = w;
    }
    let violations = cfg.validate();
    if violations.is_empty() {
        Ok(cfg)
    } else {
        let lines: Vec<String> = violations.iter().map(|v| format!("config error: {v}")).collect();
        Err(lines.join("\n"))
    }
}

fn execute(command: &Command, cfg: &ExperimentConfig, args: &RunArgs) -> Result<Vec<Check>> {
    let started = Instant::now();
    let name = command.name();
    std::fs::create_dir_all(&args.out_dir)?;
    let mut files = Vec::new();
    let mut checks = Vec::new();

    if let Command::ConvergenceHeat(_) = command {
        let rows = convergence_heat(cfg, &mut checks)?;
        files.push(write_csv(&args.out_dir, &format!("{name}_p2.csv"), &rows)?);
    } else {
        for exp in cfg.build()? {
            let tag = format!("p={}", exp.p());
            let file = format!("{name}_p{}.csv", exp.p());
            if let Command::Simulate { path, stride, .. } = command {
                let rows = simulate(&exp, *path, *stride, &tag, &mut checks)?;
                files.push(write_csv(&args.out_dir, &file, &rows)?);
                continue;
            }
            let family = refinement(cfg, &exp)?;
            let mut rows = Vec::new();
            let mut ctx = Ctx {
                cfg,
                tag,
                rows: &mut rows,
                checks: &mut checks,
            };
            match command {
                Command::VerifyContraction(_) => ctx.contraction(&family)?,
                Command::VerifyEnergy(_) => ctx.energy(&family)?,
                Command::VerifyDissipation(_) => ctx.dissipation(&family)?,
                Command::VerifyRenorm(_) => ctx.renorm(&family)?,
                Command::VerifyItoProduct(_) => ctx.ito_product(&family)?,
                Command::VerifyCauchy(_) => ctx.cauchy(&family)?,
                Command::DiagMonotonicity(_) => ctx.monotonicity(&family)?,
                Command::DiagHz(_) => ctx.hz(&family)?,
                _ => unreachable!(),
            }
            files.push(write_csv(&args.out_dir, &file, &rows)?);
        }
    }

    let summary = args.out_dir.join(format!("{name}_summary.json"));
    std::fs::write(&summary, serde_json::to_string_pretty(&checks)?)?;
    files.push(summary);
    let manifest = RunManifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        seed: cfg.mc.seed,
        duration_secs: started.elapsed().as_secs_f64(),
        files,
        config: cfg.to_toml_string()?,
    };
    std::fs::write(
        args.out_dir.join(format!("{name}_manifest.json")),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(checks)
}

fn write_csv<T: Serialize>(dir: &Path, file: &str, rows: &[T]) -> Result<PathBuf> {
    let path = dir.join(file);
    let mut w = csv::Writer::from_path(&path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path)
}

/// The configured refinement levels, coarsest first, or the base step alone.
fn refinement(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Vec<Experiment>> {
    let mut dts = cfg.levels.refine_dts.clone();
    if dts.is_empty() {
        return Ok(vec![exp.clone()]);
    }
    dts.sort_by(|a, b| b.total_cmp(a));
    dts.dedup();
    exp.refinement_family(&dts)
}

fn simulate(exp: &Experiment, index: u64, stride: usize, tag: &str, checks: &mut Vec<Check>) -> Result<Vec<TrajectoryRow>> {
    if stride == 0 {
        return Err(Error::Config("--stride must be positive".into()));
    }
    let u0 = exp.initial_u(index)?;
    let traj = evolve(&u0, &exp.noise, &exp.brownian(index)?, &exp.flux, &exp.solver)?;
    let mut rows = Vec::new();
    for j in (0..=traj.steps()).step_by(stride) {
        let t = traj.time(j);
        rows.extend(traj.state(j).values().iter().enumerate().map(|(i, &value)| TrajectoryRow {
            t,
            node: i + 1,
            value,
        }));
    }
    checks.push(Check::report(format!("final_l1[{tag},path={index}]"), traj.final_state().l1_norm(), 0.0));
    checks.push(Check::report(format!("final_max_abs[{tag},path={index}]"), traj.final_state().max_abs(), 0.0));
    Ok(rows)
}

fn convergence_heat(cfg: &ExperimentConfig, checks: &mut Vec<Check>) -> Result<Vec<Row>> {
    let InitialSpec::Sine { amplitude, mode } = cfg.initial.u0 else {
        return Err(Error::Config("convergence-heat needs initial.u0 of kind \"sine\"".into()));
    };
    let n = cfg.grid.n_cells as usize;
    let dt = cfg.time.dt;
    let length = cfg.grid.length;
    let levels = heat_convergence(
        &[(n, dt), (2 * n, dt / 2.0)],
        length,
        cfg.time.final_time,
        amplitude,
        mode,
        &cfg.solver,
    )?;
    let th = &cfg.thresholds;
    let rows = levels
        .iter()
        .map(|l| Row {
            quantity: "heat_error".into(),
            level: l.n_cells as f64,
            mean: l.error,
            stderr: 0.0,
            n: 1,
            dt: l.dt,
            h: length / l.n_cells as f64,
            seed: cfg.mc.seed,
        })
        .collect();
    checks.push(Check::at_most(
        format!("heat.error[n_cells={n},dt={dt}]"),
        levels[0].error,
        0.0,
        th.heat_max_error,
    ));
    checks.push(Check::at_least(
        "heat.reduction".into(),
        levels[0].error / levels[1].error,
        0.0,
        th.heat_min_ratio,
    ));
    Ok(rows)
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    tag: String,
    rows: &'a mut Vec<Row>,
    checks: &'a mut Vec<Check>,
}

impl Ctx<'_> {
    fn row(&mut self, exp: &Experiment, quantity: impl Into<String>, level: f64, r: &McResult) {
        self.rows.push(Row {
            quantity: quantity.into(),
            level,
            mean: r.mean,
            stderr: r.stderr,
            n: r.n,
            dt: exp.dt,
            h: exp.h(),
            seed: exp.seed,
        });
    }

    fn value_row(&mut self, exp: &Experiment, quantity: impl Into<String>, level: f64, value: f64) {
        let r = McResult {
            mean: value,
            stderr: 0.0,
            n: exp.n_paths,
            seed: exp.seed,
        };
        self.row(exp, quantity, level, &r);
    }

    fn q(&self, name: &str, exp: &Experiment, extra: &str) -> String {
        if extra.is_empty() {
            format!("{name}[{},dt={}]", self.tag, exp.dt)
        } else {
            format!("{name}[{},dt={},{extra}]", self.tag, exp.dt)
        }
    }

    fn contraction(&mut self, family: &[Experiment]) -> Result<()> {
        let th = self.cfg.thresholds.clone();
        let mut excess = Vec::new();
        for exp in family {
            let r = contraction_check(exp, &self.cfg.levels.ito_deltas)?;
            let gap0 = r.gaps[0].mean;
            for ((t, g), ratio) in r.times.iter().zip(&r.gaps).zip(&r.ratios) {
                self.row(exp, "gap", *t, g);
                let rr = McResult {
                    mean: *ratio,
                    stderr: g.stderr / gap0,
                    ..*g
                };
                self.row(exp, "ratio", *t, &rr);
            }
            self.checks.push(Check::at_most(
                self.q("contraction.max_ratio", exp, ""),
                r.max_ratio,
                r.ratio_stderr,
                1.0 + th.contraction_slack + th.stderr_factor * r.ratio_stderr,
            ));
            for b in &r.ito {
                self.row(exp, "ito_lhs", b.delta, &b.lhs);
                self.value_row(exp, "ito_max_lhs", b.delta, b.max_lhs);
                self.value_row(exp, "ito_bound", b.delta, b.bound);
                self.value_row(exp, "ito_violations", b.delta, b.violations as f64);
                self.checks.push(Check::at_most(
                    self.q("ito_correction.max_lhs", exp, &format!("delta={}", b.delta)),
                    b.max_lhs,
                    0.0,
                    b.bound,
                ));
            }
            excess.push(r.excess());
        }
        if excess.len() > 1 {
            for (w, pair) in excess.windows(2).zip(family.windows(2)) {
                self.checks.push(Check::at_most(
                    format!("contraction.excess_trend[{},dt={}->{}]", self.tag, pair[0].dt, pair[1].dt),
                    w[1],
                    0.0,
                    w[0],
                ));
            }
        }
        Ok(())
    }

    fn energy(&mut self, family: &[Experiment]) -> Result<()> {
        let th = self.cfg.thresholds.clone();
        let mut margins: Vec<Vec<f64>> = Vec::new();
        for exp in family {
            let bounds = energy_bound_check(exp, &self.cfg.levels.energy_k)?;
            let mut m = Vec::new();
            for b in &bounds {
                self.row(exp, "energy", b.k, &b.lhs);
                self.value_row(exp, "energy_bound", b.k, b.c_k);
                let limit = b.c_k * th.energy_factor + th.stderr_factor * b.lhs.stderr;
                self.checks.push(Check::at_most(
                    self.q("energy", exp, &format!("k={}", b.k)),
                    b.lhs.mean,
                    b.lhs.stderr,
                    limit,
                ));
                m.push(limit - b.lhs.mean);
            }
            margins.push(m);
        }
        for (w, pair) in margins.windows(2).zip(family.windows(2)) {
            for (i, k) in self.cfg.levels.energy_k.iter().enumerate() {
                self.checks.push(Check::at_least(
                    format!("energy.margin_trend[{},k={k},dt={}->{}]", self.tag, pair[0].dt, pair[1].dt),
                    w[1][i],
                    0.0,
                    w[0][i],
                ));
            }
        }
        Ok(())
    }

    fn dissipation(&mut self, family: &[Experiment]) -> Result<()> {
        let th = self.cfg.thresholds.clone();
        for exp in family {
            let d = dissipation_profile(exp, &self.cfg.levels.dissipation_k)?;
            for (k, r) in &d.levels {
                self.row(exp, "dissipation", *k, r);
            }
            self.row(exp, "total_energy", 0.0, &d.total);
            self.value_row(exp, "max_abs", 0.0, d.max_abs);
            let (Some(d0), Some(dl)) = (d.at(0.0), d.at(th.dissipation_level)) else {
                return Err(Error::Config(format!(
                    "levels.dissipation_k must contain 0 and {}",
                    th.dissipation_level
                )));
            };
            self.checks.push(Check::at_most(
                self.q("dissipation.ratio", exp, &format!("k={}", th.dissipation_level)),
                dl.mean / d0.mean,
                dl.stderr / d0.mean,
                th.dissipation_ratio,
            ));
            let beyond = d
                .levels
                .iter()
                .filter(|(k, _)| *k >= d.max_abs)
                .map(|(_, r)| r.mean.abs())
                .fold(0.0, f64::max);
            self.checks.push(Check::at_most(self.q("dissipation.beyond_range", exp, ""), beyond, 0.0, 0.0));
        }
        Ok(())
    }

    fn residual_rows(&mut self, exp: &Experiment, r: &ResidualReport) {
        self.row(exp, "signed", exp.dt, &r.signed);
        self.row(exp, "abs", exp.dt, &r.abs);
        self.value_row(exp, "rms", exp.dt, r.rms);
        for (name, t) in &r.terms {
            self.row(exp, format!("term:{name}"), exp.dt, t);
        }
        let sigmas = self.cfg.thresholds.mean_sigmas;
        self.checks.push(Check::at_most(
            self.q("signed_mean_sigmas", exp, ""),
            r.signed.mean.abs() / r.signed.stderr,
            r.signed.stderr,
            sigmas,
        ));
    }

    fn rms_trend(&mut self, name: &str, family: &[Experiment], rms: &[f64], min_order: Option<f64>) {
        if rms.len() < 2 {
            return;
        }
        let worst = rms.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        self.checks.push(Check {
            quantity: format!("{name}.rms_ratio[{}]", self.tag),
            value: worst,
            stderr: 0.0,
            threshold: Some(1.0),
            pass: worst < 1.0,
        });
        if let Some(order) = min_order {
            let dts: Vec<f64> = family.iter().map(|e| e.dt).collect();
            self.checks.push(Check::at_least(
                format!("{name}.rms_order[{}]", self.tag),
                log_log_slope(&dts, rms),
                0.0,
                order,
            ));
        }
    }

    fn renorm(&mut self, family: &[Experiment]) -> Result<()> {
        let (s, psi) = (&self.cfg.renorm.s, self.cfg.renorm.psi);
        check_renormalizer(s, psi)?;
        let mut rms = Vec::new();
        for exp in family {
            let r = renorm_residual(exp, s, psi)?;
            self.residual_rows(exp, &r);
            rms.push(r.rms);
        }
        let order = self.cfg.thresholds.renorm_min_order;
        self.rms_trend("renorm", family, &rms, Some(order));
        Ok(())
    }

    fn ito_product(&mut self, family: &[Experiment]) -> Result<()> {
        let (h, z) = (&self.cfg.renorm.h, &self.cfg.renorm.z);
        check_product_pair(h, z)?;
        let mut rms = Vec::new();
        for exp in family {
            let r = ito_product_residual(exp, h, z)?;
            self.residual_rows(exp, &r);
            rms.push(r.rms);
        }
        self.rms_trend("ito_product", family, &rms, None);
        Ok(())
    }

    fn cauchy(&mut self, family: &[Experiment]) -> Result<()> {
        let th = self.cfg.thresholds.clone();
        let mut pairs = self.cfg.levels.cauchy_pairs.clone();
        pairs.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));
        for exp in family {
            let mut results = Vec::new();
            for &[n, m] in &pairs {
                let c = cauchy_initial_check(exp, n, m)?;
                self.row(exp, format!("cauchy_lhs[m={m}]"), n, &c.lhs);
                self.value_row(exp, format!("cauchy_rhs[m={m}]"), n, c.rhs);
                self.checks.push(Check::at_most(
                    self.q("cauchy", exp, &format!("n={n},m={m}")),
                    c.lhs.mean,
                    c.lhs.stderr,
                    c.rhs * (1.0 + th.cauchy_slack) + th.stderr_factor * c.lhs.stderr,
                ));
                results.push(c);
            }
            for w in results.windows(2) {
                if w[0].m == w[1].m && w[0].n < w[1].n {
                    self.checks.push(Check::at_most(
                        self.q("cauchy.gap_order", exp, &format!("n={}->{},m={}", w[0].n, w[1].n, w[0].m)),
                        w[1].lhs.mean,
                        w[1].lhs.stderr,
                        w[0].lhs.mean,
                    ));
                }
            }
        }
        Ok(())
    }

    fn monotonicity(&mut self, family: &[Experiment]) -> Result<()> {
        let k = self.cfg.levels.monotonicity_k;
        for exp in family {
            for &[n, m] in &self.cfg.levels.cauchy_pairs {
                let r = monotonicity_gap(exp, n, m, k)?;
                self.row(exp, format!("monotonicity_gap[m={m},k={k}]"), n, &r);
                self.checks.push(Check::at_least(
                    self.q("monotonicity_gap", exp, &format!("n={n},m={m},k={k}")),
                    r.mean,
                    r.stderr,
                    0.0,
                ));
            }
        }
        Ok(())
    }

    fn hz(&mut self, family: &[Experiment]) -> Result<()> {
        let (h, z) = (&self.cfg.renorm.h, &self.cfg.renorm.z);
        for exp in family {
            for &[n, m] in &self.cfg.levels.hz_pairs {
                let r = hz_coupling_diagnostic(exp, n, m, h, z)?;
                self.row(exp, format!("hz[m={m}]"), n, &r);
                self.checks.push(Check::report(self.q("hz", exp, &format!("n={n},m={m}")), r.mean, r.stderr));
            }
        }
        Ok(())
    }
}
