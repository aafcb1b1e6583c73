//! Noise coefficients `Φ(t, λ)`.
//!
//! Every model satisfies `Φ(t, 0) = 0`, is Lipschitz in `λ` with the declared
//! constant `L`, and depends on `(t, λ)` only. Bounded models also carry a
//! declared sup bound `M`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

type Coefficient = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum NoiseKind {
    Zero,
    /// `L·T_{M/L}(λ)`.
    BoundedTrunc,
    /// `L·λ`.
    Linear,
    /// `M·sin(Lλ/M)`.
    Sinusoidal,
    /// `sin(ωt + phase)·base(t, λ)`.
    TimeModulated {
        base: Box<NoiseModel>,
        omega: f64,
        phase: f64,
    },
    /// User closure with declared constants; nothing is checked at build time.
    Custom { name: String, f: Coefficient },
}

impl fmt::Debug for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::Zero => f.write_str("Zero"),
            NoiseKind::BoundedTrunc => f.write_str("BoundedTrunc"),
            NoiseKind::Linear => f.write_str("Linear"),
            NoiseKind::Sinusoidal => f.write_str("Sinusoidal"),
            NoiseKind::TimeModulated { base, omega, phase } => f
                .debug_struct("TimeModulated")
                .field("base", base)
                .field("omega", omega)
                .field("phase", phase)
                .finish(),
            NoiseKind::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NoiseModel {
    kind: NoiseKind,
    lipschitz: f64,
    bound: Option<f64>,
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            kind: NoiseKind::Zero,
            lipschitz: 0.0,
            bound: Some(0.0),
        }
    }

    pub fn bounded_trunc(lipschitz: f64, bound: f64) -> Result<Self> {
        Ok(NoiseModel {
            kind: NoiseKind::BoundedTrunc,
            lipschitz: positive("L", lipschitz)?,
            bound: Some(positive("M", bound)?),
        })
    }

    pub fn linear(lipschitz: f64) -> Result<Self> {
        Ok(NoiseModel {
            kind: NoiseKind::Linear,
            lipschitz: positive("L", lipschitz)?,
            bound: None,
        })
    }

    pub fn sinusoidal(lipschitz: f64, bound: f64) -> Result<Self> {
        Ok(NoiseModel {
            kind: NoiseKind::Sinusoidal,
            lipschitz: positive("L", lipschitz)?,
            bound: Some(positive("M", bound)?),
        })
    }

    /// Modulates `base` by `c(t) = sin(ωt + phase)`, which keeps `L` and `M`.
    pub fn time_modulated(base: NoiseModel, omega: f64, phase: f64) -> Result<Self> {
        if !omega.is_finite() || !phase.is_finite() {
            return Err(Error::param("omega", omega, "omega and phase must be finite"));
        }
        Ok(NoiseModel {
            lipschitz: base.lipschitz,
            bound: base.bound,
            kind: NoiseKind::TimeModulated {
                base: Box::new(base),
                omega,
                phase,
            },
        })
    }

    /// Wraps an arbitrary coefficient with declared constants, e.g. to check
    /// that [`validate_noise`] catches a false declaration.
    pub fn custom(
        name: impl Into<String>,
        lipschitz: f64,
        bound: Option<f64>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let lipschitz = positive("L", lipschitz)?;
        let bound = bound.map(|m| positive("M", m)).transpose()?;
        Ok(NoiseModel {
            kind: NoiseKind::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
            lipschitz,
            bound,
        })
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NoiseKind::Zero)
    }

    #[inline]
    pub fn eval(&self, t: f64, lambda: f64) -> f64 {
        match &self.kind {
            NoiseKind::Zero => 0.0,
            NoiseKind::BoundedTrunc => {
                let m = self.bound.unwrap_or(f64::INFINITY);
                (self.lipschitz * lambda).clamp(-m, m)
            }
            NoiseKind::Linear => self.lipschitz * lambda,
            NoiseKind::Sinusoidal => {
                let m = self.bound.unwrap_or(1.0);
                m * (self.lipschitz * lambda / m).sin()
            }
            NoiseKind::TimeModulated { base, omega, phase } => {
                (omega * t + phase).sin() * base.eval(t, lambda)
            }
            NoiseKind::Custom { f, .. } => f(t, lambda),
        }
    }
}

/// Serializable description of a noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Zero,
    BoundedTrunc {
        #[serde(rename = "L")]
        lipschitz: f64,
        #[serde(rename = "M")]
        bound: f64,
    },
    Linear {
        #[serde(rename = "L")]
        lipschitz: f64,
    },
    Sinusoidal {
        #[serde(rename = "L")]
        lipschitz: f64,
        #[serde(rename = "M")]
        bound: f64,
    },
    TimeModulated {
        omega: f64,
        #[serde(default)]
        phase: f64,
        base: Box<NoiseSpec>,
    },
}

/// Builds the model described by `spec`.
pub fn make_noise(spec: &NoiseSpec) -> Result<NoiseModel> {
    match spec {
        NoiseSpec::Zero => Ok(NoiseModel::zero()),
        NoiseSpec::BoundedTrunc { lipschitz, bound } => NoiseModel::bounded_trunc(*lipschitz, *bound),
        NoiseSpec::Linear { lipschitz } => NoiseModel::linear(*lipschitz),
        NoiseSpec::Sinusoidal { lipschitz, bound } => NoiseModel::sinusoidal(*lipschitz, *bound),
        NoiseSpec::TimeModulated { omega, phase, base } => {
            NoiseModel::time_modulated(make_noise(base)?, *omega, *phase)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseViolation {
    NonzeroAtOrigin { t: f64, value: f64 },
    Lipschitz { t: f64, a: f64, b: f64, quotient: f64 },
    Bound { t: f64, lambda: f64, value: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseReport {
    pub samples: usize,
    /// Total number of violations found.
    pub violation_count: usize,
    /// Worst observed Lipschitz quotient.
    pub max_quotient: f64,
    /// Witnesses, capped at [`NoiseReport::MAX_WITNESSES`].
    pub violations: Vec<NoiseViolation>,
}

impl NoiseReport {
    pub const MAX_WITNESSES: usize = 32;

    pub fn is_clean(&self) -> bool {
        self.violation_count == 0
    }

    fn record(&mut self, v: NoiseViolation) {
        self.violation_count += 1;
        if self.violations.len() < Self::MAX_WITNESSES {
            self.violations.push(v);
        }
    }
}

/// Relative slack allowed on the declared `L` and `M`.
pub const ASSUMPTION_TOL: f64 = 1e-12;

/// Samples times in `[0, radius]` and pairs in `[−radius, radius]²`, checking
/// `Φ(t, 0) = 0`, the Lipschitz quotient and the sup bound.
pub fn validate_noise(model: &NoiseModel, samples: usize, radius: f64, seed: u64) -> Result<NoiseReport> {
    if samples == 0 {
        return Err(Error::param("samples", 0.0, "must be positive"));
    }
    let radius = positive("radius", radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l_max = model.lipschitz * (1.0 + ASSUMPTION_TOL);
    let m_max = model.bound.map(|m| m * (1.0 + ASSUMPTION_TOL));
    let mut report = NoiseReport {
        samples,
        ..NoiseReport::default()
    };
    for i in 0..samples {
        let t = rng.random_range(0.0..=radius);
        let a = rng.random_range(-radius..=radius);
        // every fourth pair is close, probing the local slope
        let b = if i % 4 == 3 {
            a + rng.random_range(-1e-3..=1e-3)
        } else {
            rng.random_range(-radius..=radius)
        };
        let zero = model.eval(t, 0.0);
        if zero != 0.0 {
            report.record(NoiseViolation::NonzeroAtOrigin { t, value: zero });
        }
        let (fa, fb) = (model.eval(t, a), model.eval(t, b));
        if a != b {
            let q = (fa - fb).abs() / (a - b).abs();
            report.max_quotient = report.max_quotient.max(q);
            if !(q <= l_max) {
                report.record(NoiseViolation::Lipschitz { t, a, b, quotient: q });
            }
        }
        if let Some(m) = m_max {
            for (lambda, value) in [(a, fa), (b, fb)] {
                if !(value.abs() <= m) {
                    report.record(NoiseViolation::Bound { t, lambda, value });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shipped() -> Vec<NoiseModel> {
        vec![
            NoiseModel::zero(),
            NoiseModel::bounded_trunc(1.0, 2.0).unwrap(),
            NoiseModel::linear(0.5).unwrap(),
            NoiseModel::sinusoidal(1.5, 0.7).unwrap(),
            NoiseModel::time_modulated(NoiseModel::bounded_trunc(1.0, 2.0).unwrap(), 1.0, 0.0).unwrap(),
            NoiseModel::time_modulated(NoiseModel::sinusoidal(2.0, 1.0).unwrap(), 3.0, 0.4).unwrap(),
        ]
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(NoiseModel::bounded_trunc(1.0, 2.0).unwrap().eval(0.3, 3.0), 2.0);
        assert_eq!(NoiseModel::linear(0.5).unwrap().eval(0.0, 4.0), 2.0);
        for m in shipped() {
            assert_eq!(m.eval(0.7, 0.0), 0.0, "{m:?}");
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(NoiseModel::bounded_trunc(0.0, 2.0).is_err());
        assert!(NoiseModel::bounded_trunc(1.0, -2.0).is_err());
        assert!(NoiseModel::linear(f64::NAN).is_err());
        assert!(NoiseModel::sinusoidal(1.0, 0.0).is_err());
        assert!(make_noise(&NoiseSpec::Linear { lipschitz: -1.0 }).is_err());
    }

    #[test]
    fn shipped_models_pass_validation() {
        for m in shipped() {
            let r = validate_noise(&m, 100_000, 1e3, 7).unwrap();
            assert!(r.is_clean(), "{m:?}: {:?}", r.violations);
        }
    }

    #[test]
    fn broken_square_model_is_caught() {
        let m = NoiseModel::custom("square", 1.0, None, |_, x| x * x).unwrap();
        let r = validate_noise(&m, 10_000, 10.0, 1).unwrap();
        assert!(!r.is_clean());
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, NoiseViolation::Lipschitz { quotient, .. } if *quotient > 1.0)));
    }

    #[test]
    fn nonzero_origin_and_bound_are_caught() {
        let m = NoiseModel::custom("shifted", 1.0, Some(1.0), |_, x| x.sin() + 0.5).unwrap();
        let r = validate_noise(&m, 1_000, 10.0, 3).unwrap();
        assert!(r.violations.iter().any(|v| matches!(v, NoiseViolation::NonzeroAtOrigin { .. })));
        assert!(r.violations.iter().any(|v| matches!(v, NoiseViolation::Bound { .. })));
    }

    #[test]
    fn increments_respect_local_lipschitz_bound() {
        // (Φ(a) − Φ(b))² ≤ L²δ² whenever |a − b| ≤ δ
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let delta = 0.05;
        for m in shipped() {
            let l = m.lipschitz();
            for _ in 0..20_000 {
                let t = rng.random_range(0.0..5.0);
                let a = rng.random_range(-50.0..50.0);
                let b = a + rng.random_range(-delta..=delta);
                let d = m.eval(t, a) - m.eval(t, b);
                assert!(d * d <= l * l * delta * delta * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn spec_round_trip() {
        let spec: NoiseSpec = toml::from_str(
            "kind = \"time_modulated\"\nomega = 1.0\n[base]\nkind = \"bounded_trunc\"\nL = 1.0\nM = 2.0\n",
        )
        .unwrap();
        let m = make_noise(&spec).unwrap();
        assert_eq!(m.lipschitz(), 1.0);
        assert_eq!(m.bound(), Some(2.0));
        assert!((m.eval(std::f64::consts::FRAC_PI_2, 5.0) - 2.0).abs() < 1e-15);
    }
}
