//! Truncation and renormalizer functions.
//!
//! Every function here is piecewise polynomial of degree at most two, so each
//! one is evaluated in closed form together with its first and second (weak)
//! derivative. Where a derivative jumps, the value returned at the breakpoint
//! is the right limit, i.e. the value on `[b, next)`.
//!
//! The free functions validate their parameters on every call. Hot loops
//! should build a [`Renormalizer`] once and call [`Renormalizer::jet`].

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

/// Value together with first and second derivative at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const fn new(value: f64, d1: f64, d2: f64) -> Self {
        Jet { value, d1, d2 }
    }
}

/// `T_k(r)`: clamp to `[-k, k]`.
pub fn trunc(k: f64, r: f64) -> Result<f64> {
    let k = positive("k", k)?;
    Ok(closed::trunc(k, r).value)
}

/// `∫₀ʳ T_k`: `r²/2` inside the level, `k|r| − k²/2` outside.
pub fn trunc_primitive(k: f64, r: f64) -> Result<f64> {
    let k = positive("k", k)?;
    Ok(closed::trunc_primitive(k, r).value)
}

/// `T_{k+kp}(r) − T_k(r)`.
pub fn theta(k: f64, kp: f64, r: f64) -> Result<f64> {
    let k = positive("k", k)?;
    let kp = positive("kp", kp)?;
    Ok(closed::theta(k, kp, r).value)
}

/// C¹ truncation with slope ramping linearly from 1 to 0 over `s < |r| < s + σ`.
pub fn smooth_trunc(s: f64, sigma: f64, r: f64) -> Result<Jet> {
    let s = positive("s", s)?;
    let sigma = positive("sigma", sigma)?;
    Ok(closed::smooth_trunc(s, sigma, r))
}

/// Plateau `h_l`: 1 on `|r| ≤ l`, linear down to 0 at `|r| = l + 1`.
pub fn plateau(l: f64, r: f64) -> Result<f64> {
    let l = positive("l", l)?;
    Ok(closed::plateau(l, r).value)
}

/// `∫₀ʳ h_l`; saturates at `±(l + 1/2)`.
pub fn plateau_primitive(l: f64, r: f64) -> Result<f64> {
    let l = positive("l", l)?;
    Ok(closed::plateau_primitive(l, r).value)
}

/// C¹ approximation of `|r|`: `r²/(2δ) + δ/2` on `|r| < δ`, exact outside.
pub fn abs_smooth(delta: f64, r: f64) -> Result<Jet> {
    let delta = positive("delta", delta)?;
    Ok(closed::abs_smooth(delta, r))
}

/// `H_k^δ` with `H'' = 1` on `|r| < k`, `−kδ` on `k ≤ |r| < k + 1/δ`, 0 beyond,
/// normalized by `H(0) = H'(0) = 0`. `H'` is an odd hat supported on
/// `[−(k + 1/δ), k + 1/δ]`.
pub fn hk_delta(k: f64, delta: f64, r: f64) -> Result<Jet> {
    let k = positive("k", k)?;
    let delta = positive("delta", delta)?;
    Ok(closed::hk_delta(k, delta, r))
}

/// `T_k(r)/k`, which tends to `sign(r)` as `k → 0`.
pub fn sign_approx(k: f64, r: f64) -> Result<f64> {
    let k = positive("k", k)?;
    Ok(closed::sign_approx(k, r).value)
}

/// Unchecked closed forms. Parameters are assumed positive.
mod closed {
    use super::Jet;

    #[inline]
    fn sgn(r: f64) -> f64 {
        if r < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    // Right-continuous indicator of the symmetric band [-b, b).
    #[inline]
    fn inside(b: f64, r: f64) -> bool {
        -b <= r && r < b
    }

    // Right-continuous indicator of a <= |r| < b, i.e. [a, b) ∪ [-b, -a).
    #[inline]
    fn in_band(a: f64, b: f64, r: f64) -> bool {
        (a <= r && r < b) || (-b <= r && r < -a)
    }

    #[inline]
    pub fn trunc(k: f64, r: f64) -> Jet {
        let value = r.clamp(-k, k);
        let d1 = if inside(k, r) { 1.0 } else { 0.0 };
        Jet::new(value, d1, 0.0)
    }

    #[inline]
    pub fn trunc_primitive(k: f64, r: f64) -> Jet {
        let a = r.abs();
        let value = if a <= k { 0.5 * r * r } else { k * a - 0.5 * k * k };
        let d2 = if inside(k, r) { 1.0 } else { 0.0 };
        Jet::new(value, r.clamp(-k, k), d2)
    }

    #[inline]
    pub fn theta(k: f64, kp: f64, r: f64) -> Jet {
        let a = r.abs();
        let value = if a <= k {
            0.0
        } else if a <= k + kp {
            sgn(r) * (a - k)
        } else {
            sgn(r) * kp
        };
        let d1 = if in_band(k, k + kp, r) { 1.0 } else { 0.0 };
        Jet::new(value, d1, 0.0)
    }

    #[inline]
    pub fn smooth_trunc(s: f64, sigma: f64, r: f64) -> Jet {
        let a = r.abs();
        let d2 = if in_band(s, s + sigma, r) {
            // -sign(r)/σ, with the sign taken on the right of the breakpoint
            if r >= s {
                -1.0 / sigma
            } else {
                1.0 / sigma
            }
        } else {
            0.0
        };
        if a <= s {
            Jet::new(r, 1.0, d2)
        } else if a < s + sigma {
            let x = a - s;
            Jet::new(
                sgn(r) * (s + x - x * x / (2.0 * sigma)),
                (s + sigma - a) / sigma,
                d2,
            )
        } else {
            Jet::new(sgn(r) * (s + 0.5 * sigma), 0.0, d2)
        }
    }

    #[inline]
    pub fn plateau(l: f64, r: f64) -> Jet {
        let a = r.abs();
        let value = if a <= l {
            1.0
        } else if a < l + 1.0 {
            l + 1.0 - a
        } else {
            0.0
        };
        let d1 = if l <= r && r < l + 1.0 {
            -1.0
        } else if -(l + 1.0) <= r && r < -l {
            1.0
        } else {
            0.0
        };
        Jet::new(value, d1, 0.0)
    }

    #[inline]
    pub fn plateau_primitive(l: f64, r: f64) -> Jet {
        let a = r.abs();
        let h = plateau(l, r);
        let value = if a <= l {
            r
        } else if a < l + 1.0 {
            let x = a - l;
            sgn(r) * (l + x - 0.5 * x * x)
        } else {
            sgn(r) * (l + 0.5)
        };
        Jet::new(value, h.value, h.d1)
    }

    #[inline]
    pub fn abs_smooth(delta: f64, r: f64) -> Jet {
        if r.abs() < delta {
            Jet::new(r * r / (2.0 * delta) + 0.5 * delta, r / delta, 1.0 / delta)
        } else {
            // right limit at r = -δ lies inside the band
            let d2 = if r == -delta { 1.0 / delta } else { 0.0 };
            Jet::new(r.abs(), sgn(r), d2)
        }
    }

    #[inline]
    pub fn hk_delta(k: f64, delta: f64, r: f64) -> Jet {
        let outer = k + 1.0 / delta;
        let a = r.abs();
        let d2 = if inside(k, r) {
            1.0
        } else if in_band(k, outer, r) {
            -k * delta
        } else {
            0.0
        };
        if a < k {
            Jet::new(0.5 * r * r, r, d2)
        } else if a < outer {
            let x = a - k;
            Jet::new(
                0.5 * k * k + k * x - 0.5 * k * delta * x * x,
                sgn(r) * (k - k * delta * x),
                d2,
            )
        } else {
            Jet::new(0.5 * k * k + 0.5 * k / delta, 0.0, d2)
        }
    }

    #[inline]
    pub fn sign_approx(k: f64, r: f64) -> Jet {
        let t = trunc(k, r);
        Jet::new(t.value / k, t.d1 / k, 0.0)
    }
}

/// One quadratic piece `c0 + c1·r + c2·r²` in the global variable `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Quadratic {
    pub const fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Quadratic { c0, c1, c2 }
    }

    pub const fn constant(c: f64) -> Self {
        Quadratic::new(c, 0.0, 0.0)
    }

    /// `a + b·(r − x0) + c·(r − x0)²` expanded around the origin.
    pub fn about(x0: f64, a: f64, b: f64, c: f64) -> Self {
        Quadratic::new(a - b * x0 + c * x0 * x0, b - 2.0 * c * x0, c)
    }

    #[inline]
    pub fn jet(&self, r: f64) -> Jet {
        Jet::new(
            self.c0 + r * (self.c1 + r * self.c2),
            self.c1 + 2.0 * self.c2 * r,
            2.0 * self.c2,
        )
    }

    fn is_flat(&self) -> bool {
        self.c1 == 0.0 && self.c2 == 0.0
    }
}

/// A continuous piecewise-quadratic function with exact derivatives.
///
/// Piece `i` covers `[b_{i−1}, b_i)` (with `b_{−1} = −∞`, `b_m = +∞`), so every
/// derivative is right-continuous. The value is checked to be continuous at
/// each breakpoint; the first derivative as well when the function is declared
/// C¹.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseC2 {
    breakpoints: Vec<f64>,
    pieces: Vec<Quadratic>,
    c1: bool,
    support_radius: Option<f64>,
}

/// Continuity tolerance at breakpoints, relative to the local magnitude.
pub const CONTINUITY_TOL: f64 = 1e-12;

impl PiecewiseC2 {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Quadratic>, c1: bool) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::Invalid(format!(
                "piecewise function needs {} pieces for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Invalid(
                "breakpoints must be finite and strictly ascending".into(),
            ));
        }
        for (i, &b) in breakpoints.iter().enumerate() {
            let left = pieces[i].jet(b);
            let right = pieces[i + 1].jet(b);
            let scale = 1.0_f64.max(left.value.abs()).max(b.abs());
            if (left.value - right.value).abs() > CONTINUITY_TOL * scale {
                return Err(Error::Invalid(format!(
                    "value jumps at breakpoint {b}: {} vs {}",
                    left.value, right.value
                )));
            }
            if c1 && (left.d1 - right.d1).abs() > CONTINUITY_TOL * scale.max(left.d1.abs()) {
                return Err(Error::Invalid(format!(
                    "first derivative jumps at breakpoint {b}: {} vs {}",
                    left.d1, right.d1
                )));
            }
        }
        let support_radius = Self::derivative_support(&breakpoints, &pieces);
        Ok(PiecewiseC2 {
            breakpoints,
            pieces,
            c1,
            support_radius,
        })
    }

    fn derivative_support(breakpoints: &[f64], pieces: &[Quadratic]) -> Option<f64> {
        let first_active = pieces.iter().position(|q| !q.is_flat());
        let Some(first) = first_active else {
            return Some(0.0);
        };
        let last = pieces.iter().rposition(|q| !q.is_flat()).unwrap_or(first);
        if first == 0 || last == pieces.len() - 1 {
            return None;
        }
        let lo = breakpoints[first - 1];
        let hi = breakpoints[last];
        Some(lo.abs().max(hi.abs()))
    }

    #[inline]
    pub fn jet(&self, r: f64) -> Jet {
        let idx = self.breakpoints.partition_point(|&b| b <= r);
        self.pieces[idx].jet(r)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Quadratic] {
        &self.pieces
    }

    pub fn is_c1(&self) -> bool {
        self.c1
    }

    /// Smallest `R` with `d1 ≡ 0` on `|r| > R`, or `None` if `d1` never dies out.
    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// C¹ step from 0 to 1: `2(r/a)²` up to `a/2`, `1 − 2(1 − |r|/a)²` up to `a`,
    /// then 1. Even, with `Z(0) = Z'(0) = 0` and `Z'` supported in `[−a, a]`.
    pub fn smooth_step(a: f64) -> Result<Self> {
        let a = positive("a", a)?;
        let c = 2.0 / (a * a);
        PiecewiseC2::new(
            vec![-a, -0.5 * a, 0.5 * a, a],
            vec![
                Quadratic::constant(1.0),
                Quadratic::about(-a, 1.0, 0.0, -c),
                Quadratic::new(0.0, 0.0, c),
                Quadratic::about(a, 1.0, 0.0, -c),
                Quadratic::constant(1.0),
            ],
            true,
        )
    }
}

/// The catalog of renormalizers, validated once at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Renormalizer {
    Trunc { k: f64 },
    TruncPrimitive { k: f64 },
    Theta { k: f64, kp: f64 },
    SmoothTrunc { s: f64, sigma: f64 },
    Plateau { l: f64 },
    PlateauPrimitive { l: f64 },
    AbsSmooth { delta: f64 },
    HkDelta { k: f64, delta: f64 },
    SignApprox { k: f64 },
    SmoothStep { a: f64 },
    Custom(PiecewiseC2),
}

impl Renormalizer {
    pub fn trunc(k: f64) -> Result<Self> {
        Renormalizer::Trunc { k }.validated()
    }
    pub fn trunc_primitive(k: f64) -> Result<Self> {
        Renormalizer::TruncPrimitive { k }.validated()
    }
    pub fn theta(k: f64, kp: f64) -> Result<Self> {
        Renormalizer::Theta { k, kp }.validated()
    }
    pub fn smooth_trunc(s: f64, sigma: f64) -> Result<Self> {
        Renormalizer::SmoothTrunc { s, sigma }.validated()
    }
    pub fn plateau(l: f64) -> Result<Self> {
        Renormalizer::Plateau { l }.validated()
    }
    pub fn plateau_primitive(l: f64) -> Result<Self> {
        Renormalizer::PlateauPrimitive { l }.validated()
    }
    pub fn abs_smooth(delta: f64) -> Result<Self> {
        Renormalizer::AbsSmooth { delta }.validated()
    }
    pub fn hk_delta(k: f64, delta: f64) -> Result<Self> {
        Renormalizer::HkDelta { k, delta }.validated()
    }
    pub fn sign_approx(k: f64) -> Result<Self> {
        Renormalizer::SignApprox { k }.validated()
    }
    pub fn smooth_step(a: f64) -> Result<Self> {
        Renormalizer::SmoothStep { a }.validated()
    }

    /// Checks parameters; used after deserialization too.
    pub fn validated(self) -> Result<Self> {
        use Renormalizer::*;
        match &self {
            Trunc { k } | TruncPrimitive { k } | SignApprox { k } => {
                positive("k", *k)?;
            }
            Theta { k, kp } => {
                positive("k", *k)?;
                positive("kp", *kp)?;
            }
            SmoothTrunc { s, sigma } => {
                positive("s", *s)?;
                positive("sigma", *sigma)?;
            }
            Plateau { l } | PlateauPrimitive { l } => {
                positive("l", *l)?;
            }
            AbsSmooth { delta } => {
                positive("delta", *delta)?;
            }
            HkDelta { k, delta } => {
                positive("k", *k)?;
                positive("delta", *delta)?;
            }
            SmoothStep { a } => {
                positive("a", *a)?;
            }
            Custom(_) => {}
        }
        Ok(self)
    }

    #[inline]
    pub fn jet(&self, r: f64) -> Jet {
        use Renormalizer::*;
        match self {
            Trunc { k } => closed::trunc(*k, r),
            TruncPrimitive { k } => closed::trunc_primitive(*k, r),
            Theta { k, kp } => closed::theta(*k, *kp, r),
            SmoothTrunc { s, sigma } => closed::smooth_trunc(*s, *sigma, r),
            Plateau { l } => closed::plateau(*l, r),
            PlateauPrimitive { l } => closed::plateau_primitive(*l, r),
            AbsSmooth { delta } => closed::abs_smooth(*delta, r),
            HkDelta { k, delta } => closed::hk_delta(*k, *delta, r),
            SignApprox { k } => closed::sign_approx(*k, r),
            SmoothStep { a } => smooth_step_jet(*a, r),
            Custom(f) => f.jet(r),
        }
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        self.jet(r).value
    }

    /// Radius of the support of the first derivative; `None` if unbounded.
    pub fn support_radius(&self) -> Option<f64> {
        use Renormalizer::*;
        match self {
            Trunc { k } | SignApprox { k } => Some(*k),
            TruncPrimitive { .. } | AbsSmooth { .. } => None,
            Theta { k, kp } => Some(k + kp),
            SmoothTrunc { s, sigma } => Some(s + sigma),
            Plateau { l } | PlateauPrimitive { l } => Some(l + 1.0),
            HkDelta { k, delta } => Some(k + 1.0 / delta),
            SmoothStep { a } => Some(*a),
            Custom(f) => f.support_radius(),
        }
    }

    /// Whether the catalog function is C¹ (continuous first derivative).
    pub fn is_c1(&self) -> bool {
        use Renormalizer::*;
        match self {
            Trunc { .. } | Theta { .. } | Plateau { .. } | SignApprox { .. } => false,
            Custom(f) => f.is_c1(),
            _ => true,
        }
    }

    /// The same function as explicit quadratic pieces, evaluated through the
    /// generic [`PiecewiseC2`] machinery.
    pub fn to_piecewise(&self) -> PiecewiseC2 {
        use Renormalizer::*;
        let q = Quadratic::new;
        let k_const = Quadratic::constant;
        let (bps, pieces, c1) = match *self {
            Trunc { k } => (
                vec![-k, k],
                vec![k_const(-k), q(0.0, 1.0, 0.0), k_const(k)],
                false,
            ),
            TruncPrimitive { k } => (
                vec![-k, k],
                vec![
                    q(-0.5 * k * k, -k, 0.0),
                    q(0.0, 0.0, 0.5),
                    q(-0.5 * k * k, k, 0.0),
                ],
                true,
            ),
            Theta { k, kp } => (
                vec![-(k + kp), -k, k, k + kp],
                vec![
                    k_const(-kp),
                    q(k, 1.0, 0.0),
                    k_const(0.0),
                    q(-k, 1.0, 0.0),
                    k_const(kp),
                ],
                false,
            ),
            SmoothTrunc { s, sigma } => {
                let c = -0.5 / sigma;
                (
                    vec![-(s + sigma), -s, s, s + sigma],
                    vec![
                        k_const(-(s + 0.5 * sigma)),
                        Quadratic::about(-s, -s, 1.0, -c),
                        q(0.0, 1.0, 0.0),
                        Quadratic::about(s, s, 1.0, c),
                        k_const(s + 0.5 * sigma),
                    ],
                    true,
                )
            }
            Plateau { l } => (
                vec![-(l + 1.0), -l, l, l + 1.0],
                vec![
                    k_const(0.0),
                    q(l + 1.0, 1.0, 0.0),
                    k_const(1.0),
                    q(l + 1.0, -1.0, 0.0),
                    k_const(0.0),
                ],
                false,
            ),
            PlateauPrimitive { l } => (
                vec![-(l + 1.0), -l, l, l + 1.0],
                vec![
                    k_const(-(l + 0.5)),
                    Quadratic::about(-l, -l, 1.0, 0.5),
                    q(0.0, 1.0, 0.0),
                    Quadratic::about(l, l, 1.0, -0.5),
                    k_const(l + 0.5),
                ],
                true,
            ),
            AbsSmooth { delta } => (
                vec![-delta, delta],
                vec![
                    q(0.0, -1.0, 0.0),
                    q(0.5 * delta, 0.0, 0.5 / delta),
                    q(0.0, 1.0, 0.0),
                ],
                true,
            ),
            HkDelta { k, delta } => {
                let outer = k + 1.0 / delta;
                let top = 0.5 * k * k + 0.5 * k / delta;
                let c = -0.5 * k * delta;
                (
                    vec![-outer, -k, k, outer],
                    vec![
                        k_const(top),
                        Quadratic::about(-k, 0.5 * k * k, -k, c),
                        q(0.0, 0.0, 0.5),
                        Quadratic::about(k, 0.5 * k * k, k, c),
                        k_const(top),
                    ],
                    true,
                )
            }
            SignApprox { k } => (
                vec![-k, k],
                vec![k_const(-1.0), q(0.0, 1.0 / k, 0.0), k_const(1.0)],
                false,
            ),
            SmoothStep { a } => {
                return PiecewiseC2::smooth_step(a).expect("validated parameter");
            }
            Custom(ref f) => return f.clone(),
        };
        PiecewiseC2::new(bps, pieces, c1).expect("catalog functions are continuous")
    }
}

#[inline]
fn smooth_step_jet(a: f64, r: f64) -> Jet {
    let x = r.abs();
    let c = 2.0 / (a * a);
    let s = if r < 0.0 { -1.0 } else { 1.0 };
    // right-continuous second derivative, matching the piecewise layout
    if -0.5 * a <= r && r < 0.5 * a {
        Jet::new(c * r * r, 2.0 * c * r, 2.0 * c)
    } else if (0.5 * a <= r && r < a) || (-a <= r && r < -0.5 * a) {
        let y = a - x;
        Jet::new(1.0 - c * y * y, s * 2.0 * c * y, -2.0 * c)
    } else {
        Jet::new(1.0, 0.0, 0.0)
    }
}
