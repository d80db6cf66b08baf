//! Losses of the form `L(v, P) = ℓ(‖v − θ(P)‖)` and the separation each bound uses.
//!
//! A [`LossFn`] pairs the scalar map `ℓ : ℝ₊ → ℝ₊` with a declared [`LossClass`].
//! The class is never inferred from the function; it decides which form of the
//! constrained risk inequality applies and therefore how the separation `Δ`
//! between two parameters is measured:
//!
//! | class | separation `Δ` |
//! |-------|----------------|
//! | convex | `2ℓ(½‖θ₀ − θ₁‖)` |
//! | generic | `ℓ(½‖θ₀ − θ₁‖)` |
//! | power `k` | `‖θ₀ − θ₁‖` |

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// Declared shape of a scalar loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossClass {
    /// Any non-decreasing `ℓ`.
    Generic,
    /// Non-decreasing and convex.
    Convex,
    /// `ℓ(t) = t^k` for the given `k > 0`.
    Power(f64),
}

#[derive(Clone)]
enum Kind {
    Squared,
    Absolute,
    Power(f64),
    Threshold(f64),
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

/// A non-decreasing scalar loss with a declared class.
///
/// Immutable once built and cheap to clone; safe to share across threads.
#[derive(Clone)]
pub struct LossFn {
    class: LossClass,
    kind: Kind,
}

impl fmt::Debug for LossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossFn")
            .field("spec", &self.to_string())
            .field("class", &self.class)
            .finish()
    }
}

impl LossFn {
    /// `ℓ(t) = t²`, declared as the power class with `k = 2`.
    pub fn squared() -> Self {
        Self { class: LossClass::Power(2.0), kind: Kind::Squared }
    }

    /// `ℓ(t) = t`, declared as the power class with `k = 1`.
    pub fn absolute() -> Self {
        Self { class: LossClass::Power(1.0), kind: Kind::Absolute }
    }

    /// `ℓ(t) = t^k`.
    pub fn power(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(invalid(format!("power exponent must be positive and finite, got {k}")));
        }
        Ok(Self { class: LossClass::Power(k), kind: Kind::Power(k) })
    }

    /// `ℓ(t) = 1{t ≥ τ}`, declared generic.
    pub fn threshold(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(invalid(format!("threshold must be non-negative and finite, got {tau}")));
        }
        Ok(Self { class: LossClass::Generic, kind: Kind::Threshold(tau) })
    }

    /// A caller-supplied evaluator with a declared class.
    ///
    /// In debug builds the declared properties are sampled on a grid and the
    /// constructor fails if any of them is violated.
    pub fn custom<F>(name: impl Into<String>, class: LossClass, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if let LossClass::Power(k) = class {
            if !(k.is_finite() && k > 0.0) {
                return Err(invalid(format!("power exponent must be positive, got {k}")));
            }
        }
        let loss = Self { class, kind: Kind::Custom { name: name.into(), f: Arc::new(f) } };
        if cfg!(debug_assertions) {
            loss.validate()?;
        }
        Ok(loss)
    }

    pub fn class(&self) -> LossClass {
        self.class
    }

    /// Exponent `k` for the power class.
    pub fn exponent(&self) -> Option<f64> {
        match self.class {
            LossClass::Power(k) => Some(k),
            _ => None,
        }
    }

    /// Whether `ℓ` is convex, either declared directly or implied by a power class with `k ≥ 1`.
    pub fn is_convex(&self) -> bool {
        match self.class {
            LossClass::Convex => true,
            LossClass::Power(k) => k >= 1.0,
            LossClass::Generic => false,
        }
    }

    /// Evaluates `ℓ(t)` for `t ≥ 0`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Squared => t * t,
            Kind::Absolute => t,
            Kind::Power(k) => t.powf(*k),
            Kind::Threshold(tau) => {
                if t >= *tau {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::Custom { f, .. } => f(t),
        }
    }

    /// Scalar shorthand for `ℓ(|v − θ|)`.
    #[inline]
    pub fn at(&self, v: f64, theta: f64) -> f64 {
        self.eval((v - theta).abs())
    }

    /// Samples the declared properties on a fixed grid.
    pub fn validate(&self) -> Result<()> {
        let grid = validation_grid();
        let vals: Vec<f64> = grid.iter().map(|&t| self.eval(t)).collect();
        for (&t, &v) in grid.iter().zip(&vals) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{self}: ℓ({t}) = {v} is not a finite non-negative value")));
            }
        }
        for i in 1..grid.len() {
            if vals[i] < vals[i - 1] {
                return Err(invalid(format!(
                    "{self}: not non-decreasing, ℓ({}) = {} > ℓ({}) = {}",
                    grid[i - 1],
                    vals[i - 1],
                    grid[i],
                    vals[i]
                )));
            }
        }
        if self.is_convex() {
            for i in 0..grid.len() {
                for j in (i + 1)..grid.len() {
                    let (a, b) = (grid[i], grid[j]);
                    let mid = self.eval(0.5 * (a + b));
                    let chord = 0.5 * (vals[i] + vals[j]);
                    if mid > chord + 1e-9 * (1.0 + chord.abs()) {
                        return Err(invalid(format!(
                            "{self}: midpoint convexity fails on [{a}, {b}]"
                        )));
                    }
                }
            }
        }
        if let LossClass::Power(k) = self.class {
            for (&t, &v) in grid.iter().zip(&vals) {
                let want = t.powf(k);
                if (v - want).abs() > 1e-12 * (1.0 + want) {
                    return Err(invalid(format!("{self}: ℓ({t}) = {v}, expected t^{k} = {want}")));
                }
            }
        }
        Ok(())
    }
}

fn validation_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    // 1e-4 .. 1e2, ten points per decade
    grid.extend((0..=60).map(|i| 10f64.powf(-4.0 + i as f64 / 10.0)));
    grid
}

impl fmt::Display for LossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Squared => write!(f, "sq"),
            Kind::Absolute => write!(f, "abs"),
            Kind::Power(k) => write!(f, "pow:{k}"),
            Kind::Threshold(tau) => write!(f, "thresh:{tau}"),
            Kind::Custom { name, .. } => write!(f, "{name}"),
        }
    }
}

impl FromStr for LossFn {
    type Err = Error;

    /// Parses `sq`, `abs`, `pow:<k>` or `thresh:<tau>` (case-sensitive).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed loss spec {s:?}; expected sq, abs, pow:<k> or thresh:<tau>"));
        match s {
            "sq" => return Ok(Self::squared()),
            "abs" => return Ok(Self::absolute()),
            _ => {}
        }
        let (head, arg) = s.split_once(':').ok_or_else(bad)?;
        let x: f64 = arg.parse().map_err(|_| bad())?;
        match head {
            "pow" => Self::power(x).map_err(|e| Error::Config(e.to_string())),
            "thresh" => Self::threshold(x).map_err(|e| Error::Config(e.to_string())),
            _ => Err(bad()),
        }
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean(v: &[f64], theta: &[f64]) -> Result<f64> {
    if v.len() != theta.len() {
        return Err(Error::DimensionMismatch { left: v.len(), right: theta.len() });
    }
    Ok(v.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// `L(v, P) = ℓ(‖v − θ(P)‖)`.
pub fn loss_value(loss: &LossFn, v: &[f64], theta: &[f64]) -> Result<f64> {
    Ok(loss.eval(euclidean(v, theta)?))
}

/// The separation `Δ` between two parameters, measured according to the loss class.
pub fn separation(loss: &LossFn, theta0: &[f64], theta1: &[f64]) -> Result<f64> {
    let d = euclidean(theta0, theta1)?;
    Ok(separation_from_distance(loss, d))
}

pub(crate) fn separation_from_distance(loss: &LossFn, d: f64) -> f64 {
    match loss.class() {
        LossClass::Convex => 2.0 * loss.eval(0.5 * d),
        LossClass::Generic => loss.eval(0.5 * d),
        LossClass::Power(_) => d,
    }
}
