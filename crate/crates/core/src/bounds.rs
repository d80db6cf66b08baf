//! Constrained risk lower bounds.
//!
//! If an estimator has risk at most `δ` under `P₀`, its risk under `P₁` is at
//! least
//!
//! ```text
//! convex ℓ:     [√Δ − √(χ²₊₁·δ)]₊²              Δ = 2ℓ(‖θ₀ − θ₁‖/2)
//! generic ℓ:    [√Δ − √(χ²₊₁·δ)]₊²              Δ = ℓ(‖θ₀ − θ₁‖/2)
//! ℓ(t) = tᵏ:    [Δ^{k/2} − √(χ²₊₁·δᵏ)]₊²         k ≤ 2,  Δ = ‖θ₀ − θ₁‖
//!               [Δ − √(χ²₊₁·δ²)]₊ᵏ               k ≥ 2
//! ```
//!
//! For power losses the budget is passed as `δᵏ`, the bound on `E₀‖θ̂ − θ₀‖ᵏ`,
//! not as `δ` itself.

use std::fmt;

use serde::Serialize;

use crate::dist::Model;
use crate::divergence::{affinity, AffinityMethod, AffinityResult};
use crate::error::{invalid, Result};
use crate::loss::{separation, LossClass, LossFn};

/// `max(x, 0)`.
pub fn hinge(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Which inequality produced a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundBranch {
    ConvexThm1,
    GenericCor1,
    PowerSmallK,
    PowerLargeK,
}

impl fmt::Display for BoundBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundBranch::ConvexThm1 => "convex_thm1",
            BoundBranch::GenericCor1 => "generic_cor1",
            BoundBranch::PowerSmallK => "power_small_k",
            BoundBranch::PowerLargeK => "power_large_k",
        })
    }
}

/// A lower bound on the risk at `P₁` together with its inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub delta_sep: f64,
    /// `δ`, or `δᵏ` for the power branches.
    pub delta_budget: f64,
    /// `+∞` serializes as `null`.
    pub affinity: f64,
    pub value: f64,
    pub branch: BoundBranch,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affinity_detail: Option<AffinityResult>,
}

fn check_inputs(delta_sep: f64, affinity: f64, delta_budget: f64) -> Result<()> {
    if !(delta_sep.is_finite() && delta_sep >= 0.0) {
        return Err(invalid(format!("separation must be finite and non-negative, got {delta_sep}")));
    }
    if !(affinity >= 1.0) {
        return Err(invalid(format!("affinity must be at least 1, got {affinity}")));
    }
    if !(delta_budget.is_finite() && delta_budget >= 0.0) {
        return Err(invalid(format!("risk budget must be finite and non-negative, got {delta_budget}")));
    }
    Ok(())
}

/// `[√Δ − √(A·δ)]₊²`; an infinite affinity yields 0 unless `δ = 0`.
fn sqrt_form(delta_sep: f64, affinity: f64, delta_budget: f64) -> f64 {
    if delta_budget == 0.0 {
        return delta_sep;
    }
    if affinity.is_infinite() {
        return 0.0;
    }
    hinge(delta_sep.sqrt() - (affinity * delta_budget).sqrt()).powi(2)
}

fn report(delta_sep: f64, delta_budget: f64, affinity: f64, value: f64, branch: BoundBranch, k: Option<f64>) -> BoundReport {
    BoundReport { delta_sep, delta_budget, affinity, value, branch, k, affinity_detail: None }
}

/// Convex losses: `[√Δ − √(χ²₊₁·δ)]₊²` with `Δ = 2ℓ(‖θ₀ − θ₁‖/2)`.
pub fn bound_convex(delta_sep: f64, affinity: f64, delta_budget: f64) -> Result<BoundReport> {
    check_inputs(delta_sep, affinity, delta_budget)?;
    let v = sqrt_form(delta_sep, affinity, delta_budget);
    Ok(report(delta_sep, delta_budget, affinity, v, BoundBranch::ConvexThm1, None))
}

/// Arbitrary non-decreasing losses: same formula with `Δ = ℓ(‖θ₀ − θ₁‖/2)`.
pub fn bound_generic(delta_sep: f64, affinity: f64, delta_budget: f64) -> Result<BoundReport> {
    check_inputs(delta_sep, affinity, delta_budget)?;
    let v = sqrt_form(delta_sep, affinity, delta_budget);
    Ok(report(delta_sep, delta_budget, affinity, v, BoundBranch::GenericCor1, None))
}

/// Power losses `ℓ(t) = tᵏ` with `Δ = ‖θ₀ − θ₁‖` and `delta_budget_k ≥ E₀‖θ̂ − θ₀‖ᵏ`.
pub fn bound_power(sep: f64, k: f64, affinity: f64, delta_budget_k: f64) -> Result<BoundReport> {
    check_inputs(sep, affinity, delta_budget_k)?;
    if !(k.is_finite() && k > 0.0) {
        return Err(invalid(format!("power exponent must be positive and finite, got {k}")));
    }
    let (value, branch) = if k <= 2.0 {
        (sqrt_form(sep.powf(k), affinity, delta_budget_k), BoundBranch::PowerSmallK)
    } else {
        (power_large_k(sep, k, affinity, delta_budget_k), BoundBranch::PowerLargeK)
    };
    Ok(report(sep, delta_budget_k, affinity, value, branch, Some(k)))
}

fn power_large_k(sep: f64, k: f64, affinity: f64, delta_budget_k: f64) -> f64 {
    if delta_budget_k == 0.0 {
        return sep.powf(k);
    }
    if affinity.is_infinite() {
        return 0.0;
    }
    let delta = delta_budget_k.powf(1.0 / k);
    hinge(sep - (affinity * delta * delta).sqrt()).powf(k)
}

/// Both power branches evaluated at the same inputs; they agree at `k = 2`.
pub fn power_branches(sep: f64, k: f64, affinity: f64, delta_budget_k: f64) -> (f64, f64) {
    (sqrt_form(sep.powf(k), affinity, delta_budget_k), power_large_k(sep, k, affinity, delta_budget_k))
}

/// Computes `Δ` from the loss, the affinity by `method`, and dispatches on the
/// loss class.
///
/// `delta_budget` is `δ` for convex and generic losses and `δᵏ` for power losses.
pub fn bound_from_models(
    p1: &Model,
    p0: &Model,
    loss: &LossFn,
    delta_budget: f64,
    method: AffinityMethod,
) -> Result<BoundReport> {
    let sep = separation(loss, &[p0.theta()], &[p1.theta()])?;
    let aff = affinity(p1, p0, method)?;
    let mut r = match loss.class() {
        LossClass::Convex => bound_convex(sep, aff.value, delta_budget)?,
        LossClass::Generic => bound_generic(sep, aff.value, delta_budget)?,
        LossClass::Power(k) => bound_power(sep, k, aff.value, delta_budget)?,
    };
    r.affinity_detail = Some(aff);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge(-1.0), 0.0);
        assert_eq!(hinge(0.0), 0.0);
        assert_eq!(hinge(2.5), 2.5);
    }

    #[test]
    fn convex_examples() {
        let r = bound_convex(1.0, 10.0, 0.01).unwrap();
        assert!((r.value - 0.4675444679663241).abs() < 1e-15);
        assert_eq!(r.branch, BoundBranch::ConvexThm1);
        assert_eq!(bound_convex(3.7, 12.0, 0.0).unwrap().value, 3.7);
        assert_eq!(bound_convex(1.0, 20.0, 0.05).unwrap().value, 0.0);
        assert!(bound_convex(1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn generic_examples() {
        let d: f64 = 1e-3;
        let r = bound_generic(1.0, d.powf(-0.5), d).unwrap();
        assert!((r.value - 0.6759668945938992).abs() < 1e-13);
        assert_eq!(bound_generic(0.0, 5.0, 0.1).unwrap().value, 0.0);
        assert_eq!(bound_generic(1.0, 1.0, 0.0).unwrap().value, 1.0);
    }

    #[test]
    fn power_examples() {
        let r = bound_power(0.0758714, 1.0, 1.7782794, 0.001).unwrap();
        assert!((r.value - 0.05441861849704854).abs() < 1e-12);
        assert_eq!(r.branch, BoundBranch::PowerSmallK);
        let (small, large) = power_branches(1.0, 2.0, 2.0, 0.1);
        assert!((small - 0.3055728090000841).abs() < 1e-14);
        assert!((large - 0.3055728090000841).abs() < 1e-14);
        for k in [0.5, 1.0, 2.0, 3.0, 6.0] {
            let v = bound_power(0.7, k, 1.0, 0.0).unwrap().value;
            assert!((v - 0.7f64.powf(k)).abs() < 1e-15, "k={k}");
        }
        assert_eq!(bound_power(0.7, 3.0, 1.0, 0.0).unwrap().branch, BoundBranch::PowerLargeK);
        assert!(bound_power(1.0, 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn infinite_affinity_short_circuits() {
        for r in [
            bound_convex(1.0, f64::INFINITY, 0.1).unwrap(),
            bound_generic(1.0, f64::INFINITY, 0.1).unwrap(),
            bound_power(1.0, 1.0, f64::INFINITY, 0.1).unwrap(),
            bound_power(1.0, 4.0, f64::INFINITY, 0.1).unwrap(),
        ] {
            assert_eq!(r.value, 0.0);
        }
    }

    #[test]
    fn from_models_identical_laws() {
        let p = Model::gaussian(0.0, 1.0).unwrap();
        let r = bound_from_models(&p, &p, &LossFn::squared(), 0.1, AffinityMethod::Closed).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn from_models_matches_manual_pipelines() {
        // threshold σ/√n at |θ| = 4σ/√n, with the affinity set by θ
        let n = 100usize;
        let theta = 0.4;
        let p1 = Model::gaussian(theta, 1.0).unwrap().power(n).unwrap();
        let p0 = Model::gaussian(0.0, 1.0).unwrap().power(n).unwrap();
        let loss = LossFn::threshold(0.1).unwrap();
        let r = bound_from_models(&p1, &p0, &loss, 1e-3, AffinityMethod::Closed).unwrap();
        let manual = bound_generic(1.0, (n as f64 * theta * theta).exp(), 1e-3).unwrap();
        assert_eq!(r.value, manual.value);
        assert_eq!(r.branch, BoundBranch::GenericCor1);

        let eps: f64 = 0.01;
        let theta = (0.125 * (1.0 / eps).ln() / n as f64).sqrt();
        let p1 = Model::gaussian(theta, 1.0).unwrap().power(n).unwrap();
        let r = bound_from_models(&p1, &p0, &LossFn::absolute(), eps / 10.0, AffinityMethod::Closed).unwrap();
        assert!((r.value - 0.05441858157511076).abs() < 1e-14);
        assert!((r.delta_sep - 0.07587135646925731).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn convex_bound_monotone(d in 0.0f64..5.0, a in 1.0f64..100.0, b in 0.0f64..1.0, s in 0.0f64..1.0) {
            let v = bound_convex(d, a, b).unwrap().value;
            prop_assert!(v >= 0.0 && v <= d);
            prop_assert!(bound_convex(d, a, b + s).unwrap().value <= v);
            prop_assert!(bound_convex(d, a * (1.0 + s), b).unwrap().value <= v);
            prop_assert!(bound_convex(d + s, a, b).unwrap().value >= v);
        }

        #[test]
        fn power_bound_monotone(d in 0.0f64..5.0, k in 0.2f64..6.0, a in 1.0f64..100.0, b in 0.0f64..1.0, s in 0.0f64..1.0) {
            let v = bound_power(d, k, a, b).unwrap().value;
            prop_assert!(v >= 0.0);
            prop_assert!(bound_power(d, k, a, b + s).unwrap().value <= v);
            prop_assert!(bound_power(d, k, a * (1.0 + s), b).unwrap().value <= v);
            prop_assert!(bound_power(d + s, k, a, b).unwrap().value >= v);
        }

        #[test]
        fn power_branches_agree_at_two(d in 0.0f64..10.0, a in 1.0f64..1e4, b in 0.0f64..10.0) {
            let (small, large) = power_branches(d, 2.0, a, b);
            prop_assert!((small - large).abs() <= 1e-12);
        }
    }
}
