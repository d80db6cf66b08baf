//! Monte Carlo risk of concrete estimators, and a brute-force oracle for the
//! constrained minimum risk on finite sample spaces.

mod oracle;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::Model;
use crate::error::{invalid, Error, Result};
use crate::loss::LossFn;
use crate::rng::{blocks, rng_for, Moments};

pub use oracle::{oracle_min_risk, violation_search, Instance, OracleSolution, ViolationReport};

/// Fewest replications [`mc_risk`] accepts.
pub const MIN_REPS: usize = 100;

#[derive(Clone)]
enum Map {
    /// Depends on the sample only through its mean.
    Mean(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Sample(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

/// A deterministic map from an `n`-sample to a real estimate.
///
/// Randomized estimators are expressed by appending an auxiliary uniform
/// coordinate to the sample.
#[derive(Clone)]
pub struct Estimator {
    name: String,
    map: Map,
}

impl fmt::Debug for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Estimator({})", self.name)
    }
}

impl Estimator {
    /// An estimator of the form `x ↦ f(x̄)`.
    ///
    /// Under Gaussian products [`mc_risk`] samples `x̄` directly from its exact
    /// law `N(θ, σ²/n)` instead of drawing all `n` coordinates.
    pub fn from_mean<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), map: Map::Mean(Arc::new(f)) }
    }

    pub fn from_sample<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), map: Map::Sample(Arc::new(f)) }
    }

    pub fn sample_mean() -> Self {
        Self::from_mean("mean", |m| m)
    }

    pub fn constant(c: f64) -> Self {
        Self::from_mean(format!("const:{c}"), move |_| c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, xs: &[f64]) -> f64 {
        match &self.map {
            Map::Mean(f) => f(mean(xs)),
            Map::Sample(f) => f(xs),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    crate::quad::neumaier_sum(xs.iter().copied()) / xs.len() as f64
}

/// `x̄·1{|x̄| > τ}`.
pub fn hodges_estimator(tau: f64) -> Result<Estimator> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid(format!("hodges threshold must be positive, got {tau}")));
    }
    Ok(Estimator::from_mean(format!("hodges:{tau}"), move |m| if m.abs() > tau { m } else { 0.0 }))
}

/// The default Hodges threshold `n^{-1/4}`.
pub fn hodges_tau(n: usize) -> f64 {
    (n as f64).powf(-0.25)
}

/// Estimator spec strings: `mean`, `const:<c>`, `hodges:<tau>`, or `hodges`
/// for the default threshold `n^{-1/4}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    Mean,
    Constant(f64),
    Hodges(Option<f64>),
}

impl EstimatorSpec {
    /// Resolves the spec for samples of size `n`.
    pub fn build(&self, n: usize) -> Result<Estimator> {
        match *self {
            EstimatorSpec::Mean => Ok(Estimator::sample_mean()),
            EstimatorSpec::Constant(c) => Ok(Estimator::constant(c)),
            EstimatorSpec::Hodges(tau) => hodges_estimator(tau.unwrap_or_else(|| hodges_tau(n))),
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognized estimator spec {s:?}"));
        match s.split_once(':') {
            None if s == "mean" => Ok(EstimatorSpec::Mean),
            None if s == "hodges" => Ok(EstimatorSpec::Hodges(None)),
            Some(("hodges", t)) => {
                let tau: f64 = t.parse().map_err(|_| bad())?;
                if !(tau.is_finite() && tau > 0.0) {
                    return Err(bad());
                }
                Ok(EstimatorSpec::Hodges(Some(tau)))
            }
            Some(("const", c)) => Ok(EstimatorSpec::Constant(c.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Mean => f.write_str("mean"),
            EstimatorSpec::Constant(c) => write!(f, "const:{c}"),
            EstimatorSpec::Hodges(None) => f.write_str("hodges"),
            EstimatorSpec::Hodges(Some(t)) => write!(f, "hodges:{t}"),
        }
    }
}

/// Monte Carlo estimate of `E_P[ℓ(|θ̂ − θ(P)|)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√reps`.
    pub std_error: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Risk of `est` under the product `model` (its marginal if `n = 1`).
///
/// Deterministic for a given seed regardless of the thread count.
pub fn mc_risk(est: &Estimator, model: &Model, loss: &LossFn, reps: usize, seed: u64) -> Result<RiskEstimate> {
    if reps < MIN_REPS {
        return Err(invalid(format!("at least {MIN_REPS} replications are required, got {reps}")));
    }
    let theta = model.theta();
    let n = model.n();
    let shortcut = match (&est.map, model.marginal()) {
        (Map::Mean(f), Model::Gaussian(g)) => Some((f.clone(), g.mean(), (g.var() / n as f64).sqrt())),
        _ => None,
    };
    let parts: Vec<Moments> = blocks(reps)
        .into_par_iter()
        .map(|(idx, len)| {
            let mut rng = rng_for(seed, idx);
            let mut m = Moments::default();
            let mut xs = Vec::with_capacity(n);
            for _ in 0..len {
                let est_value = match &shortcut {
                    Some((f, mu, se)) => {
                        let z: f64 = rng.sample(StandardNormal);
                        f(mu + se * z)
                    }
                    None => {
                        model.sample_joint(&mut rng, &mut xs);
                        est.apply(&xs)
                    }
                };
                m.push(loss.at(est_value, theta));
            }
            m
        })
        .collect();
    let acc = Moments::merged(&parts);
    Ok(RiskEstimate { mean: acc.mean, std_error: acc.std_error(), reps, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erfc;

    fn phi(x: f64) -> f64 {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }

    #[test]
    fn constant_at_truth_has_zero_risk() {
        let m = Model::gaussian(0.3, 1.0).unwrap().power(10).unwrap();
        let r = mc_risk(&Estimator::constant(0.3), &m, &LossFn::squared(), 1000, 5).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn sample_mean_squared_risk() {
        let m = Model::gaussian(0.0, 1.0).unwrap().power(100).unwrap();
        let r = mc_risk(&Estimator::sample_mean(), &m, &LossFn::squared(), 100_000, 11).unwrap();
        assert!((r.mean - 0.01).abs() < 4.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn sample_mean_threshold_risk() {
        let m = Model::gaussian(0.0, 1.0).unwrap().power(100).unwrap();
        let loss = LossFn::threshold(0.1).unwrap();
        let r = mc_risk(&Estimator::sample_mean(), &m, &loss, 100_000, 12).unwrap();
        let want = 0.3173105078629141;
        assert!((2.0 * phi(-1.0) - want).abs() < 1e-9);
        assert!((r.mean - want).abs() < 4.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn shortcut_agrees_with_joint_sampling() {
        let m = Model::gaussian(0.2, 2.0).unwrap().power(16).unwrap();
        let loss = LossFn::absolute();
        let fast = mc_risk(&Estimator::sample_mean(), &m, &loss, 40_000, 3).unwrap();
        let joint = Estimator::from_sample("mean-joint", |xs| xs.iter().sum::<f64>() / xs.len() as f64);
        let slow = mc_risk(&joint, &m, &loss, 40_000, 3).unwrap();
        let want = (2.0 / 16.0f64).sqrt() * (2.0 / std::f64::consts::PI).sqrt();
        for r in [fast, slow] {
            assert!((r.mean - want).abs() < 4.0 * r.std_error, "{r:?}");
        }
    }

    #[test]
    fn hodges_examples() {
        let h = hodges_estimator(0.5).unwrap();
        assert_eq!(h.apply(&[0.0, 0.0]), 0.0);
        assert_eq!(h.apply(&[0.1, -0.1]), 0.0);
        assert_eq!(h.apply(&[3.0, 5.0]), 4.0);
        assert!(hodges_estimator(0.0).is_err());
    }

    #[test]
    fn hodges_null_risk_matches_normal_tail() {
        let n = 400;
        let tau = hodges_tau(n);
        let want = 2.0 * phi(-(n as f64).powf(0.25));
        assert!((want - 7.744216431044084e-6).abs() < 1e-15);
        // P₀(θ̂ ≠ 0), with threshold loss below τ so any non-zero estimate costs 1
        let m = Model::gaussian(0.0, 1.0).unwrap().power(n).unwrap();
        let loss = LossFn::threshold(1e-12).unwrap();
        let r = mc_risk(&hodges_estimator(tau).unwrap(), &m, &loss, 2_000_000, 8).unwrap();
        assert!((r.mean - want).abs() < 4.0 * r.std_error.max(want / 1e3), "{r:?}");
    }

    #[test]
    fn hodges_far_alternative_is_the_mean() {
        let n = 400;
        let m = Model::gaussian(2.0, 1.0).unwrap().power(n).unwrap();
        let a = mc_risk(&hodges_estimator(hodges_tau(n)).unwrap(), &m, &LossFn::squared(), 10_000, 1).unwrap();
        let b = mc_risk(&Estimator::sample_mean(), &m, &LossFn::squared(), 10_000, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reps_floor_and_determinism() {
        let m = Model::gaussian(0.0, 1.0).unwrap().power(3).unwrap();
        assert!(mc_risk(&Estimator::sample_mean(), &m, &LossFn::squared(), 99, 0).is_err());
        let a = mc_risk(&Estimator::sample_mean(), &m, &LossFn::squared(), 9000, 4).unwrap();
        let b = mc_risk(&Estimator::sample_mean(), &m, &LossFn::squared(), 9000, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimator_specs() {
        assert_eq!("mean".parse::<EstimatorSpec>().unwrap(), EstimatorSpec::Mean);
        assert_eq!("hodges".parse::<EstimatorSpec>().unwrap(), EstimatorSpec::Hodges(None));
        assert_eq!("hodges:0.25".parse::<EstimatorSpec>().unwrap(), EstimatorSpec::Hodges(Some(0.25)));
        assert_eq!("const:1.5".parse::<EstimatorSpec>().unwrap().to_string(), "const:1.5");
        for s in ["", "median", "hodges:", "hodges:-1", "hodges:x", "const"] {
            assert!(s.parse::<EstimatorSpec>().is_err(), "{s}");
        }
        let e = EstimatorSpec::Hodges(None).build(16).unwrap();
        assert_eq!(e.name(), "hodges:0.5");
    }
}
