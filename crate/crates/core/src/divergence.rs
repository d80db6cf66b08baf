//! χ²-affinities `χ²₊₁(P₁‖P₀) = ∫ dP₁²/dP₀ = E₁[dP₁/dP₀]`.
//!
//! Four routes are available and are meant to be cross-checked against each
//! other: the Gaussian closed form, tensorization over i.i.d. products,
//! quadrature (or exact summation for finite laws), and Monte Carlo over
//! draws from `P₁`.
//!
//! Every result satisfies `value ≥ 1`. Numerical jitter below one (within
//! `1e-9`, or within four standard errors for Monte Carlo) is clamped; anything
//! further below is reported as an error. Affinities too large to represent
//! come back as `+∞` with `overflow` set, which the bounds treat as "no
//! information" rather than failing.

use std::cell::Cell;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Model, Score, TiltedModel};
use crate::error::{invalid, Error, Result};
use crate::quad::{self, Integral};
use crate::rng::{blocks, rng_for, Moments};

/// Largest exponent handed to `exp` before returning the `+∞` sentinel.
pub const MAX_EXPONENT: f64 = 700.0;

const CLAMP_TOL: f64 = 1e-9;
const QUAD_ABS_TOL: f64 = 1e-10;
const QUAD_REL_TOL: f64 = 1e-12;

/// How an affinity was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffinityKind {
    ClosedForm,
    Tensorized,
    Quadrature,
    MonteCarlo,
}

impl fmt::Display for AffinityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AffinityKind::ClosedForm => "closed_form",
            AffinityKind::Tensorized => "tensorized",
            AffinityKind::Quadrature => "quadrature",
            AffinityKind::MonteCarlo => "monte_carlo",
        })
    }
}

/// A χ²-affinity with provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinityResult {
    /// `≥ 1`, or `+∞` (serialized as `null`) when `overflow` is set.
    pub value: f64,
    pub method: AffinityKind,
    pub error_estimate: f64,
    pub overflow: bool,
    pub meta: String,
}

impl AffinityResult {
    fn finite(value: f64, method: AffinityKind, error_estimate: f64, meta: String) -> Self {
        Self { value, method, error_estimate, overflow: false, meta }
    }

    fn infinite(method: AffinityKind, meta: String) -> Self {
        Self { value: f64::INFINITY, method, error_estimate: 0.0, overflow: true, meta }
    }

    /// `χ²(P₁‖P₀) = value − 1`.
    pub fn divergence(&self) -> f64 {
        self.value - 1.0
    }
}

/// Affinity route selector used by the bounds and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AffinityMethod {
    Closed,
    Quadrature,
    MonteCarlo { count: usize, seed: u64 },
}

fn clamp_at_one(value: f64, slack: f64, what: &str) -> Result<f64> {
    if value.is_nan() {
        return Err(Error::Numeric(format!("{what}: affinity is NaN")));
    }
    if value < 1.0 - slack {
        return Err(Error::Numeric(format!("{what}: affinity {value} is below 1")));
    }
    Ok(value.max(1.0))
}

/// `χ²₊₁(N(θ, σ²)ⁿ ‖ N(0, σ²)ⁿ) = exp(nθ²/σ²)`.
pub fn affinity_gaussian(theta: f64, sigma2: f64, n: usize) -> Result<AffinityResult> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(invalid(format!("variance must be positive, got {sigma2}")));
    }
    if !theta.is_finite() {
        return Err(invalid(format!("theta must be finite, got {theta}")));
    }
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let exponent = n as f64 * theta * theta / sigma2;
    let meta = format!("gaussian theta={theta} sigma2={sigma2} n={n}");
    if exponent > MAX_EXPONENT {
        return Ok(AffinityResult::infinite(AffinityKind::ClosedForm, meta));
    }
    Ok(AffinityResult::finite(exponent.exp(), AffinityKind::ClosedForm, 0.0, meta))
}

/// `χ²₊₁(P₁ⁿ‖P₀ⁿ) = χ²₊₁(P₁‖P₀)ⁿ`.
pub fn affinity_product(single: &AffinityResult, n: usize) -> Result<AffinityResult> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(single.value >= 1.0) {
        return Err(invalid(format!("single-observation affinity must be ≥ 1, got {}", single.value)));
    }
    let meta = format!("({})^{n}", single.meta);
    if single.overflow || single.value.is_infinite() {
        return Ok(AffinityResult::infinite(AffinityKind::Tensorized, meta));
    }
    let log = n as f64 * single.value.ln();
    if log > MAX_EXPONENT {
        return Ok(AffinityResult::infinite(AffinityKind::Tensorized, meta));
    }
    let value = if n == 1 { single.value } else { log.exp() };
    let rel = single.error_estimate / single.value;
    Ok(AffinityResult::finite(value, AffinityKind::Tensorized, n as f64 * rel * value, meta))
}

/// Affinity by quadrature of `p₁²/p₀` (exact summation for finite laws).
///
/// Products with matching `n` are handled by integrating the marginal pair and
/// tensorizing; the method stays `quadrature`.
pub fn affinity_quadrature(p1: &Model, p0: &Model) -> Result<AffinityResult> {
    if p1.n() != p0.n() {
        return Err(invalid(format!("product sizes differ: {} vs {}", p1.n(), p0.n())));
    }
    let single = marginal_affinity(p1.marginal(), p0.marginal())?;
    if p1.n() == 1 {
        return Ok(single);
    }
    let mut r = affinity_product(&single, p1.n())?;
    r.method = AffinityKind::Quadrature;
    Ok(r)
}

fn marginal_affinity(p1: &Model, p0: &Model) -> Result<AffinityResult> {
    let meta = format!("{p1} vs {p0}");
    match (p1.is_discrete(), p0.is_discrete()) {
        (true, true) => {
            let v = discrete_sum(p1, p0, |r| r * r)?;
            let v = clamp_at_one(v, CLAMP_TOL, &meta)?;
            Ok(AffinityResult::finite(v, AffinityKind::Quadrature, 0.0, meta))
        }
        (false, false) => {
            if let (Model::Gaussian(g1), Model::Gaussian(g0)) = (p1, p0) {
                // ∫ p₁²/p₀ is finite iff 2/σ₁² > 1/σ₀²
                if 2.0 / g1.var() <= 1.0 / g0.var() {
                    return Ok(AffinityResult::infinite(AffinityKind::Quadrature, format!("{meta}: divergent integral")));
                }
            }
            let (a, b) = integration_window(p1, p0);
            let breach = Cell::new(None);
            let r = quad::integrate_tol(
                |z| {
                    let l1 = p1.ln_density(z);
                    let l0 = p0.ln_density(z);
                    if l1 == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    if l0 == f64::NEG_INFINITY {
                        breach.set(Some(z));
                        return 0.0;
                    }
                    (2.0 * l1 - l0).exp()
                },
                a,
                b,
                QUAD_ABS_TOL,
                QUAD_REL_TOL,
            )?;
            if let Some(z) = breach.get() {
                return Err(Error::AbsoluteContinuity(format!("{meta}: p0 vanishes at z = {z} where p1 > 0")));
            }
            let v = clamp_at_one(r.value, CLAMP_TOL, &meta)?;
            Ok(AffinityResult::finite(v, AffinityKind::Quadrature, r.abs_error, meta))
        }
        _ => Err(Error::Unsupported(format!("{meta}: mixed discrete and continuous models"))),
    }
}

/// Sums `p₀(z)·f(p₁(z)/p₀(z))` over the support of either law.
fn discrete_sum<F: Fn(f64) -> f64>(p1: &Model, p0: &Model, f: F) -> Result<f64> {
    let mut points = p1.support().unwrap_or_default();
    for z in p0.support().unwrap_or_default() {
        if !points.contains(&z) {
            points.push(z);
        }
    }
    let mut terms = Vec::with_capacity(points.len());
    for z in points {
        let (q1, q0) = (p1.density(z), p0.density(z));
        if q1 > 0.0 && q0 <= 0.0 {
            return Err(Error::AbsoluteContinuity(format!("{p1} vs {p0}: p0({z}) = 0 but p1({z}) = {q1}")));
        }
        if q0 > 0.0 {
            terms.push(q0 * f(q1 / q0));
        }
    }
    Ok(quad::neumaier_sum(terms))
}

fn integration_window(p1: &Model, p0: &Model) -> (f64, f64) {
    let (a1, b1) = p1.domain().expect("continuous");
    let (a0, b0) = p0.domain().expect("continuous");
    let (mut a, mut b) = (a1.min(a0), b1.max(b0));
    if let (Model::Gaussian(g1), Model::Gaussian(g0)) = (p1, p0) {
        // p₁²/p₀ is itself Gaussian-shaped with precision 2/σ₁² − 1/σ₀²
        let prec = 2.0 / g1.var() - 1.0 / g0.var();
        let centre = (2.0 * g1.mean() / g1.var() - g0.mean() / g0.var()) / prec;
        let w = crate::dist::GAUSS_TRUNCATION_SDS / prec.sqrt();
        a = a.min(centre - w);
        b = b.max(centre + w);
    }
    (a, b)
}

/// `χ²(P₁‖P₀) = ∫ (p₁/p₀ − 1)² dP₀` computed directly, avoiding the
/// cancellation in `affinity − 1` when the two laws are close.
pub fn chi_square_quadrature(p1: &Model, p0: &Model) -> Result<Integral> {
    if p1.n() != 1 || p0.n() != 1 {
        return Err(invalid("chi_square_quadrature takes single-observation models"));
    }
    match (p1.is_discrete(), p0.is_discrete()) {
        (true, true) => Ok(Integral {
            value: discrete_sum(p1, p0, |r| (r - 1.0) * (r - 1.0))?,
            abs_error: 0.0,
            evaluations: 0,
            intervals: 0,
        }),
        (false, false) => {
            let (a, b) = integration_window(p1, p0);
            quad::integrate_tol(
                |z| {
                    let l0 = p0.ln_density(z);
                    if l0 == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    let r = (p1.ln_density(z) - l0).exp();
                    (r - 1.0) * (r - 1.0) * l0.exp()
                },
                a,
                b,
                1e-14,
                1e-10,
            )
        }
        _ => Err(Error::Unsupported("mixed discrete and continuous models".into())),
    }
}

/// Monte Carlo estimate of `E₁[dP₁/dP₀]` over `count` joint draws from `p₁`.
///
/// `error_estimate` is the standard error. Deterministic given `seed` for any
/// thread count.
pub fn affinity_monte_carlo(p1: &Model, p0: &Model, count: usize, seed: u64) -> Result<AffinityResult> {
    if p1.n() != p0.n() {
        return Err(invalid(format!("product sizes differ: {} vs {}", p1.n(), p0.n())));
    }
    if count < 2 {
        return Err(invalid("monte carlo needs at least two draws"));
    }
    let parts: Vec<Result<Moments>> = blocks(count)
        .into_par_iter()
        .map(|(idx, len)| {
            let mut rng = rng_for(seed, idx);
            let mut m = Moments::default();
            let mut x = Vec::with_capacity(p1.n());
            for _ in 0..len {
                p1.sample_joint(&mut rng, &mut x);
                let log_ratio: f64 = x.iter().map(|&z| p1.ln_density(z) - p0.ln_density(z)).sum();
                let r = log_ratio.exp();
                if !r.is_finite() {
                    return Err(Error::AbsoluteContinuity(format!(
                        "{p1} vs {p0}: non-finite likelihood ratio at {x:?}"
                    )));
                }
                m.push(r);
            }
            Ok(m)
        })
        .collect();
    let mut acc = Moments::default();
    for p in parts {
        acc.merge(&p?);
    }
    let se = acc.std_error();
    let meta = format!("{p1} vs {p0}: {count} draws, seed {seed}, raw mean {}", acc.mean);
    let value = clamp_at_one(acc.mean, 4.0 * se + CLAMP_TOL, &meta)?;
    Ok(AffinityResult::finite(value, AffinityKind::MonteCarlo, se, meta))
}

/// Affinity by the Gaussian closed form. Requires equal variances and equal `n`.
pub fn affinity_closed(p1: &Model, p0: &Model) -> Result<AffinityResult> {
    if p1.n() != p0.n() {
        return Err(invalid(format!("product sizes differ: {} vs {}", p1.n(), p0.n())));
    }
    match (p1.marginal(), p0.marginal()) {
        (Model::Gaussian(g1), Model::Gaussian(g0)) if g1.var() == g0.var() => {
            affinity_gaussian(g1.mean() - g0.mean(), g0.var(), p1.n())
        }
        _ if p1.is_discrete() && p0.is_discrete() => {
            let mut r = affinity_quadrature(p1, p0)?;
            r.method = AffinityKind::ClosedForm;
            Ok(r)
        }
        _ => Err(Error::Unsupported(format!(
            "no closed form for {p1} vs {p0}; use quad or mc"
        ))),
    }
}

/// Dispatches on [`AffinityMethod`].
pub fn affinity(p1: &Model, p0: &Model, method: AffinityMethod) -> Result<AffinityResult> {
    match method {
        AffinityMethod::Closed => affinity_closed(p1, p0),
        AffinityMethod::Quadrature => affinity_quadrature(p1, p0),
        AffinityMethod::MonteCarlo { count, seed } => affinity_monte_carlo(p1, p0, count, seed),
    }
}

/// One grid point of [`verify_lemma_tilt`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaRow {
    pub t: f64,
    pub chi_square: f64,
    /// `χ²(P_{t,g}‖P₀)/t²`
    pub ratio: f64,
    pub normalizer: f64,
    /// `(K/2)·t²·E₀[g²]`
    pub normalizer_bound: f64,
    pub normalizer_ok: bool,
}

/// Numerical check of the small-`t` behaviour of a tilt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub score: String,
    /// `E₀[g²]` by quadrature; the limit of `ratio`.
    pub second_moment: f64,
    pub rows: Vec<LemmaRow>,
    /// `|ratio − E₀[g²]|` strictly decreases along the grid.
    pub converging: bool,
    pub normalizer_ok: bool,
}

/// For each `t` in a grid shrinking toward zero, computes `χ²(P_{t,g}‖P₀)/t²`
/// and `C_t`, checks `|C_t − 1| ≤ (K/2)t²E₀[g²]`, and reports whether the
/// ratio approaches `E₀[g²]`.
pub fn verify_lemma_tilt(base: &Model, g: &Score, t_grid: &[f64]) -> Result<LemmaReport> {
    if t_grid.is_empty() {
        return Err(invalid("t grid is empty"));
    }
    if let Some(t) = t_grid.iter().find(|t| **t == 0.0 || !t.is_finite()) {
        return Err(invalid(format!("t grid entries must be finite and nonzero, got {t}")));
    }
    if t_grid.windows(2).any(|w| w[1].abs() >= w[0].abs()) {
        return Err(invalid("t grid must shrink strictly toward zero"));
    }
    let second_moment = base.expect(|z| g.eval(z).powi(2))?.value;
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let tilted = TiltedModel::new(base.clone(), g.clone(), t)?;
        let normalizer = tilted.normalizer();
        let bound = 0.5 * tilted.phi_smoothness() * t * t * second_moment;
        let chi = chi_square_quadrature(&Model::from(tilted), base)?.value;
        rows.push(LemmaRow {
            t,
            chi_square: chi,
            ratio: chi / (t * t),
            normalizer,
            normalizer_bound: bound,
            normalizer_ok: (normalizer - 1.0).abs() <= bound,
        });
    }
    let converging = rows
        .windows(2)
        .all(|w| (w[1].ratio - second_moment).abs() < (w[0].ratio - second_moment).abs());
    let normalizer_ok = rows.iter().all(|r| r.normalizer_ok);
    Ok(LemmaReport { score: g.name().to_string(), second_moment, rows, converging, normalizer_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n01() -> Model {
        Model::gaussian(0.0, 1.0).unwrap()
    }

    #[test]
    fn gaussian_closed_form_examples() {
        assert!((affinity_gaussian(1.0, 1.0, 1).unwrap().value - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(affinity_gaussian(0.0, 3.0, 17).unwrap().value, 1.0);
        assert!((affinity_gaussian(0.1, 1.0, 100).unwrap().value - std::f64::consts::E).abs() < 1e-12);
        let big = affinity_gaussian(10.0, 1.0, 10).unwrap();
        assert!(big.overflow && big.value.is_infinite());
        assert!(affinity_gaussian(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn product_examples() {
        let one = AffinityResult::finite(1.0, AffinityKind::Quadrature, 0.0, String::new());
        assert_eq!(affinity_product(&one, 1000).unwrap().value, 1.0);
        let small = AffinityResult::finite(0.01f64.exp(), AffinityKind::Quadrature, 0.0, String::new());
        assert!((affinity_product(&small, 100).unwrap().value - std::f64::consts::E).abs() < 1e-13);
        let two = AffinityResult::finite(2.0, AffinityKind::Quadrature, 0.0, String::new());
        assert_eq!(affinity_product(&two, 10).unwrap().value, 1024.0);
        assert!(affinity_product(&two, 2000).unwrap().overflow);
        let bad = AffinityResult::finite(0.5, AffinityKind::Quadrature, 0.0, String::new());
        assert!(affinity_product(&bad, 2).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let r = affinity_quadrature(&Model::gaussian(1.0, 1.0).unwrap(), &n01()).unwrap();
        assert!((r.value - std::f64::consts::E).abs() < 1e-12, "{r:?}");
        assert!(r.error_estimate <= 1e-8);

        // n = 100 through tensorization of the marginal pair
        let p1 = Model::gaussian(0.1, 1.0).unwrap().power(100).unwrap();
        let p0 = n01().power(100).unwrap();
        let q = affinity_quadrature(&p1, &p0).unwrap();
        assert_eq!(q.method, AffinityKind::Quadrature);
        assert!((q.value - std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn unequal_variances() {
        // closed form: σ0/σ1² · 1/sqrt(2/σ1² − 1/σ0²) for equal means
        let (v1, v0) = (0.8_f64, 1.0_f64);
        let want = v0.sqrt() / v1 / (2.0 / v1 - 1.0 / v0).sqrt();
        let r = affinity_quadrature(&Model::gaussian(0.0, v1).unwrap(), &Model::gaussian(0.0, v0).unwrap()).unwrap();
        assert!((r.value - want).abs() < 1e-10);
        let wide = affinity_quadrature(&Model::gaussian(0.0, 2.5).unwrap(), &n01()).unwrap();
        assert!(wide.overflow);
    }

    #[test]
    fn identical_discrete_laws() {
        let p = Model::discrete(vec![0.0, 1.0, 5.0], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(affinity_quadrature(&p, &p).unwrap().value, 1.0);
    }

    #[test]
    fn discrete_absolute_continuity() {
        let p1 = Model::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let p0 = Model::discrete(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert!(matches!(affinity_quadrature(&p1, &p0), Err(Error::AbsoluteContinuity(_))));
        // the reverse direction is fine only if p0 covers p1; it does not here either
        assert!(matches!(affinity_quadrature(&p0, &p1), Err(Error::AbsoluteContinuity(_))));
        let wide = Model::discrete(vec![0.0, 1.0, 2.0], vec![0.25, 0.5, 0.25]).unwrap();
        let r = affinity_quadrature(&p1, &wide).unwrap();
        assert!((r.value - (0.25 / 0.25 + 0.25 / 0.5)).abs() < 1e-15);
    }

    #[test]
    fn mixed_models_are_unsupported() {
        let d = Model::discrete(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(affinity_quadrature(&d, &n01()), Err(Error::Unsupported(_))));
        assert!(affinity_quadrature(&n01().power(2).unwrap(), &n01()).is_err());
    }

    #[test]
    fn monte_carlo_identity_and_determinism() {
        let r = affinity_monte_carlo(&n01(), &n01(), 10_000, 1).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.error_estimate, 0.0);
        let p1 = Model::gaussian(0.5, 1.0).unwrap();
        let a = affinity_monte_carlo(&p1, &n01(), 50_000, 9).unwrap();
        let b = affinity_monte_carlo(&p1, &n01(), 50_000, 9).unwrap();
        assert_eq!(a, b);
        assert!((a.value - 0.25f64.exp()).abs() < 4.0 * a.error_estimate);
    }

    #[test]
    fn monte_carlo_flags_support_breach() {
        let p1 = Model::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let p0 = Model::discrete(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert!(matches!(affinity_monte_carlo(&p1, &p0, 100, 0), Err(Error::AbsoluteContinuity(_))));
    }

    #[test]
    fn closed_dispatch() {
        let p1 = Model::gaussian(0.3, 2.0).unwrap().power(5).unwrap();
        let p0 = Model::gaussian(0.0, 2.0).unwrap().power(5).unwrap();
        let r = affinity(&p1, &p0, AffinityMethod::Closed).unwrap();
        assert!((r.value - (5.0 * 0.09 / 2.0f64).exp()).abs() < 1e-14);
        let q = affinity(&p1, &p0, AffinityMethod::Quadrature).unwrap();
        assert!((r.value - q.value).abs() <= 1e-6 * r.value);
        let unequal = Model::gaussian(0.0, 1.0).unwrap();
        assert!(matches!(affinity(&unequal, &Model::gaussian(0.0, 2.0).unwrap(), AffinityMethod::Closed), Err(Error::Unsupported(_))));
    }

    #[test]
    fn tensorization_agrees_for_products() {
        let single = affinity_quadrature(&Model::gaussian(0.4, 1.5).unwrap(), &Model::gaussian(0.0, 1.5).unwrap()).unwrap();
        for n in [1usize, 2, 5, 10] {
            let closed = affinity_gaussian(0.4, 1.5, n).unwrap().value;
            let t = affinity_product(&single, n).unwrap().value;
            assert!((closed - t).abs() <= 1e-9 * closed, "n={n}");
        }
    }

    #[test]
    fn tilt_affinity_near_one_plus_t_squared() {
        let excess: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&t| {
                let m: Model = TiltedModel::new(n01(), Score::identity(), t).unwrap().into();
                let a = affinity_quadrature(&m, &n01()).unwrap().value;
                ((a - 1.0) / (t * t) - 1.0).abs()
            })
            .collect();
        assert!(excess[0] > excess[1] && excess[1] > excess[2], "{excess:?}");
        assert!(excess[0] < 0.05);
    }

    #[test]
    fn lemma_report_preconditions() {
        let g = Score::identity();
        assert!(verify_lemma_tilt(&n01(), &g, &[0.1, 0.0]).is_err());
        assert!(verify_lemma_tilt(&n01(), &g, &[0.05, 0.1]).is_err());
        assert!(verify_lemma_tilt(&n01(), &g, &[]).is_err());
        let r = verify_lemma_tilt(&n01(), &g, &[0.2, 0.1, 0.05]).unwrap();
        assert!(r.converging && r.normalizer_ok);
    }

    #[test]
    fn lemma_tracks_second_moment() {
        let g = Score::identity().scaled(0.5);
        let r = verify_lemma_tilt(&n01(), &g, &[0.4, 0.2, 0.1, 0.05]).unwrap();
        assert!((r.second_moment - 0.25).abs() < 1e-10);
        assert!(r.converging);
        assert!((r.rows.last().unwrap().ratio - 0.25).abs() < 0.025);
    }

    fn pmf(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, len).prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        // E₁[h]² ≤ χ²₊₁(P₁‖P₀)·E₀[h²] for bounded h ≥ 0
        #[test]
        fn cauchy_schwarz_change_of_measure(
            (p1, p0, h) in (2usize..9).prop_flat_map(|m| (pmf(m), pmf(m), prop::collection::vec(0.0f64..10.0, m)))
        ) {
            let support: Vec<f64> = (0..p1.len()).map(|i| i as f64).collect();
            let m1 = Model::discrete(support.clone(), p1.clone()).unwrap();
            let m0 = Model::discrete(support, p0.clone()).unwrap();
            let aff = affinity_quadrature(&m1, &m0).unwrap().value;
            let e1: f64 = p1.iter().zip(&h).map(|(p, h)| p * h).sum();
            let e0sq: f64 = p0.iter().zip(&h).map(|(p, h)| p * h * h).sum();
            prop_assert!(e1 * e1 <= aff * e0sq * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn discrete_affinity_at_least_one(
            (p1, p0) in (1usize..9).prop_flat_map(|m| (pmf(m), pmf(m)))
        ) {
            let support: Vec<f64> = (0..p1.len()).map(|i| i as f64).collect();
            let a = affinity_quadrature(
                &Model::discrete(support.clone(), p1).unwrap(),
                &Model::discrete(support, p0).unwrap(),
            ).unwrap();
            prop_assert!(a.value >= 1.0);
        }
    }
}
