//! The LUM loss family.
//!
//! For `0 <= p <= inf` and `0 < q <= inf` the loss is linear, `1 - t`, left of
//! the kink `p / (1 + p)` and a decaying tail right of it:
//!
//! * finite `q`: `(1 / (1 + p)) * (q / ((1 + p) t - p + q))^q`
//! * `q = inf`:  `(1 / (1 + p)) * exp(-((1 + p) t - p))`
//! * `p = inf`:  the hinge loss `(1 - t)_+`, whatever `q` is.
//!
//! `p = q = 1` is distance-weighted discrimination.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LumError, Result};

/// Above this `q` the tail is evaluated through `ln_1p` instead of `powf`.
const LOG_DOMAIN_Q: f64 = 50.0;

/// A nonnegative real number or `+inf`, with infinity as its own variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedParam {
    Finite(f64),
    Infinite,
}

impl ExtendedParam {
    pub fn finite(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(LumError::InvalidParameter(format!(
                "expected a finite value, got {value}"
            )));
        }
        if value < 0.0 {
            return Err(LumError::InvalidParameter(format!(
                "expected a nonnegative value, got {value}"
            )));
        }
        Ok(ExtendedParam::Finite(value))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedParam::Infinite)
    }

    /// The finite value, or `None` for infinity.
    pub fn value(&self) -> Option<f64> {
        match *self {
            ExtendedParam::Finite(v) => Some(v),
            ExtendedParam::Infinite => None,
        }
    }

    /// The value as an `f64`, mapping the infinite variant to `f64::INFINITY`.
    /// Intended for display and comparisons only.
    pub fn as_f64(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for ExtendedParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedParam::Finite(v) => write!(f, "{v}"),
            ExtendedParam::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for ExtendedParam {
    type Err = LumError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" | "∞" => Ok(ExtendedParam::Infinite),
            _ => {
                let v: f64 = t.parse().map_err(|_| {
                    LumError::InvalidParameter(format!("cannot parse '{s}' as a number or 'inf'"))
                })?;
                ExtendedParam::finite(v)
            }
        }
    }
}

impl Serialize for ExtendedParam {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            ExtendedParam::Finite(v) => serializer.serialize_f64(v),
            ExtendedParam::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedParam {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ParamVisitor;

        impl Visitor<'_> for ParamVisitor {
            type Value = ExtendedParam;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative number or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                ExtendedParam::finite(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(ParamVisitor)
    }
}

/// Which closed form applies; `p = inf` takes precedence over `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// finite `p`, finite `q`
    Power { p: FiniteF64, q: FiniteF64 },
    /// finite `p`, `q = inf`
    Exponential { p: FiniteF64 },
    /// `p = inf`
    Hinge,
}

/// An `f64` known to be finite; exists so [`Regime`] can be `Eq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteF64(f64);

impl Eq for FiniteF64 {}

impl FiniteF64 {
    pub fn get(self) -> f64 {
        self.0
    }
}

/// The `(p, q)` pair selecting one member of the LUM family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct LumParams {
    p: ExtendedParam,
    q: ExtendedParam,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    p: ExtendedParam,
    q: ExtendedParam,
}

impl TryFrom<RawParams> for LumParams {
    type Error = LumError;

    fn try_from(raw: RawParams) -> Result<Self> {
        LumParams::new(raw.p, raw.q)
    }
}

impl From<LumParams> for RawParams {
    fn from(params: LumParams) -> Self {
        RawParams {
            p: params.p,
            q: params.q,
        }
    }
}

impl fmt::Display for LumParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p={}, q={})", self.p, self.q)
    }
}

impl LumParams {
    /// Validates `p >= 0` and `q > 0`. `q = 0` is rejected, never clamped.
    pub fn new(p: ExtendedParam, q: ExtendedParam) -> Result<Self> {
        if let ExtendedParam::Finite(v) = p {
            ExtendedParam::finite(v)?;
        }
        if let ExtendedParam::Finite(v) = q {
            ExtendedParam::finite(v)?;
            if v == 0.0 {
                return Err(LumError::InvalidParameter(
                    "q must be strictly positive".into(),
                ));
            }
        }
        Ok(LumParams { p, q })
    }

    /// Both parameters finite.
    pub fn finite(p: f64, q: f64) -> Result<Self> {
        Self::new(ExtendedParam::finite(p)?, ExtendedParam::finite(q)?)
    }

    /// `p = inf`; `q` is kept but ignored by evaluation.
    pub fn hinge(q: f64) -> Result<Self> {
        Self::new(ExtendedParam::Infinite, ExtendedParam::finite(q)?)
    }

    /// `q = inf` with finite `p`: the hinge/exponential hybrid.
    pub fn exponential(p: f64) -> Result<Self> {
        Self::new(ExtendedParam::finite(p)?, ExtendedParam::Infinite)
    }

    /// Distance-weighted discrimination, `p = q = 1`.
    pub fn dwd() -> Self {
        LumParams {
            p: ExtendedParam::Finite(1.0),
            q: ExtendedParam::Finite(1.0),
        }
    }

    pub fn p(&self) -> ExtendedParam {
        self.p
    }

    pub fn q(&self) -> ExtendedParam {
        self.q
    }

    pub fn regime(&self) -> Regime {
        match (self.p, self.q) {
            (ExtendedParam::Infinite, _) => Regime::Hinge,
            (ExtendedParam::Finite(p), ExtendedParam::Infinite) => {
                Regime::Exponential { p: FiniteF64(p) }
            }
            (ExtendedParam::Finite(p), ExtendedParam::Finite(q)) => Regime::Power {
                p: FiniteF64(p),
                q: FiniteF64(q),
            },
        }
    }

    /// Where the linear piece ends: `p / (1 + p)`, or `1` for the hinge.
    pub fn kink_point(&self) -> f64 {
        match self.p {
            ExtendedParam::Finite(p) => p / (1.0 + p),
            ExtendedParam::Infinite => 1.0,
        }
    }

    /// `V(t)`, rejecting non-finite `t`.
    pub fn loss_value(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(LumError::NonFinite("loss argument t"));
        }
        Ok(self.value(t))
    }

    /// `V'(t)`, rejecting non-finite `t`.
    pub fn loss_derivative(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(LumError::NonFinite("loss argument t"));
        }
        Ok(self.derivative(t))
    }

    /// `V(t)` for finite `t`. The caller guarantees finiteness.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self.regime() {
            Regime::Hinge => (1.0 - t).max(0.0),
            Regime::Exponential { p } => {
                let p = p.get();
                if t < p / (1.0 + p) {
                    1.0 - t
                } else {
                    (-((1.0 + p) * t - p)).exp() / (1.0 + p)
                }
            }
            Regime::Power { p, q } => {
                let (p, q) = (p.get(), q.get());
                if t < p / (1.0 + p) {
                    1.0 - t
                } else {
                    let u = (1.0 + p) * t - p;
                    power_tail(u, q, q) / (1.0 + p)
                }
            }
        }
    }

    /// `V'(t)` for finite `t`. At the kink this is `-1` (both one-sided
    /// derivatives agree when `p < inf`); the hinge uses subgradient `0` at `t = 1`.
    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        match self.regime() {
            Regime::Hinge => {
                if t < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Regime::Exponential { p } => {
                let p = p.get();
                if t <= p / (1.0 + p) {
                    -1.0
                } else {
                    -(-((1.0 + p) * t - p)).exp()
                }
            }
            Regime::Power { p, q } => {
                let (p, q) = (p.get(), q.get());
                if t <= p / (1.0 + p) {
                    -1.0
                } else {
                    let u = (1.0 + p) * t - p;
                    -power_tail(u, q, q + 1.0)
                }
            }
        }
    }
}

/// `(q / (u + q))^exponent` for `u >= 0`, via `ln_1p` when `q` is large so
/// that neither `q^q` nor the base's rounding error blow up.
#[inline]
fn power_tail(u: f64, q: f64, exponent: f64) -> f64 {
    if q > LOG_DOMAIN_Q {
        (-exponent * (u / q).ln_1p()).exp()
    } else {
        (q / (u + q)).powf(exponent)
    }
}
