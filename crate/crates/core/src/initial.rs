//! Initial data on the grid.
//!
//! All profiles vanish on the boundary. `random_amplitude` draws its
//! amplitude per Monte Carlo path from its own seed, so it is independent of
//! the Brownian increments of that path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::mesh::{Grid1D, GridFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `A·sin(mπx/X)`.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one_u32")]
        mode: u32,
    },
    /// Plateau of the given height and width centred at `X/2`, with linear
    /// ramps of width `ramp` on both sides.
    Spike {
        height: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_ramp")]
        ramp: f64,
    },
    /// `A·min(x^{−α}, h^{−α})`, integrable for `α < 1`.
    PowerSingularity {
        #[serde(default = "one")]
        amplitude: f64,
        alpha: f64,
    },
    /// `A(ω)·profile` with `A ~ Uniform[low, high]`.
    RandomAmplitude {
        low: f64,
        high: f64,
        seed: u64,
        profile: Box<InitialSpec>,
    },
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}
fn default_width() -> f64 {
    0.1
}
fn default_ramp() -> f64 {
    0.01
}

impl InitialSpec {
    pub fn sine(amplitude: f64, mode: u32) -> Self {
        InitialSpec::Sine { amplitude, mode }
    }

    pub fn spike(height: f64) -> Self {
        InitialSpec::Spike {
            height,
            width: default_width(),
            ramp: default_ramp(),
        }
    }

    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        match self {
            InitialSpec::Sine { amplitude, mode } => {
                finite("amplitude", *amplitude)?;
                if *mode == 0 {
                    return Err(Error::param("mode", 0.0, "must be at least 1"));
                }
            }
            InitialSpec::Spike { height, width, ramp } => {
                finite("height", *height)?;
                positive("width", *width)?;
                if !(ramp.is_finite() && *ramp >= 0.0) {
                    return Err(Error::param("ramp", *ramp, "must be non-negative"));
                }
                if width + 2.0 * ramp >= grid.length() {
                    return Err(Error::param("width", *width, "spike does not fit in the domain"));
                }
            }
            InitialSpec::PowerSingularity { amplitude, alpha } => {
                finite("amplitude", *amplitude)?;
                if !(alpha.is_finite() && *alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::param("alpha", *alpha, "must lie in (0, 1) for integrability"));
                }
            }
            InitialSpec::RandomAmplitude { low, high, profile, .. } => {
                finite("low", *low)?;
                finite("high", *high)?;
                if low > high {
                    return Err(Error::param("low", *low, "must not exceed high"));
                }
                if matches!(**profile, InitialSpec::RandomAmplitude { .. }) {
                    return Err(Error::Invalid("random_amplitude profile must be deterministic".into()));
                }
                profile.validate(grid)?;
            }
        }
        Ok(())
    }

    /// True when the datum does not depend on the path index.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, InitialSpec::RandomAmplitude { .. })
    }

    /// The datum for Monte Carlo path `path_index`.
    pub fn build(&self, grid: &Grid1D, path_index: u64) -> Result<GridFunction> {
        self.validate(grid)?;
        let values = match self {
            InitialSpec::Sine { amplitude, mode } => {
                let c = *mode as f64 * std::f64::consts::PI / grid.length();
                sample(grid, |x| amplitude * (c * x).sin())
            }
            InitialSpec::Spike { height, width, ramp } => {
                let centre = 0.5 * grid.length();
                let half = 0.5 * width;
                sample(grid, |x| {
                    let d = (x - centre).abs();
                    if d <= half {
                        *height
                    } else if d < half + ramp {
                        height * (half + ramp - d) / ramp
                    } else {
                        0.0
                    }
                })
            }
            InitialSpec::PowerSingularity { amplitude, alpha } => {
                let cap = grid.h().powf(-alpha);
                sample(grid, |x| amplitude * x.powf(-alpha).min(cap))
            }
            InitialSpec::RandomAmplitude { low, high, seed, profile } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(path_index);
                let a = if low == high { *low } else { rng.random_range(*low..*high) };
                profile.build(grid, path_index)?.values().iter().map(|v| a * v).collect()
            }
        };
        GridFunction::new(*grid, values)
    }
}

fn finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(name, v, "must be finite"))
    }
}

fn sample(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..grid.n_interior()).map(|j| f(grid.interior_x(j))).collect()
}

/// The deterministic datum described by `spec` (path 0 for random kinds).
pub fn make_initial(spec: &InitialSpec, grid: &Grid1D) -> Result<GridFunction> {
    spec.build(grid, 0)
}

/// Nodewise `T_n(u0)`.
pub fn truncate_initial(u0: &GridFunction, n: f64) -> Result<GridFunction> {
    let n = positive("n", n)?;
    Ok(u0.map(|v| v.clamp(-n, n)))
}
