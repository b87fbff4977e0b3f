//! Error budgets for relation finding from approximate data.
//!
//! Given a target `ε` on `|⟨α, m⟩|`, a coefficient bound `G` and the weight
//! `ω`, a plan fixes the input accuracy `ε₁` and the termination threshold
//! `ε₂`:
//!
//! ```text
//! ε₁ = ω ε / (8 M C n^{3/2}),   ε₂ = (1 - ω) ε / (C α_n),   M = √n G,
//! C  = 2 (sqrt((n-2) α_n² + 1) + α_n) / α_n.
//! ```
//!
//! With `ω = 1/2` these are the thresholds `ε/(16 M C n^{3/2})` and `ε/(2 C α_n)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperplane::inverse_fro_norm;
use crate::numerics::{PrecisionContext, Real};
use crate::pslq::Gamma;

/// Decimal digits carried beyond `⌈log₁₀(1/ε₁)⌉` by default.
pub const DEFAULT_GUARD_DIGITS: u32 = 20;

/// A hypothesis that a requested plan or bound would violate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// `ε₁ < 1/(8n)`, needed for the hyperplane perturbation bound.
    InputAccuracy,
    /// `ε₃ < α_n / (2 sqrt((n-2) α_n² + 1))`, needed for the forward bound.
    HyperplanePerturbation,
    /// `ε₃ ‖H⁻¹‖_F < 1`, needed for the perturbed block to stay invertible.
    Nonsingularity,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::InputAccuracy => "eps1 < 1/(8n)",
            Constraint::HyperplanePerturbation => "eps3 < alpha_n / (2 sqrt((n-2) alpha_n^2 + 1))",
            Constraint::Nonsingularity => "eps3 * ||H^-1||_F < 1",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ErrorControlError {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("infeasible plan: {constraint} fails ({value} >= {limit}); choose a smaller eps")]
    Infeasible { constraint: Constraint, value: String, limit: String },
    #[error("bound not applicable: {constraint} fails ({value} >= {limit})")]
    NotApplicable { constraint: Constraint, value: String, limit: String },
    #[error("malformed plan field `{0}`")]
    Malformed(&'static str),
}

fn check_n_alpha(n: usize, alpha_n: &Real) -> Result<(), ErrorControlError> {
    if n < 2 {
        return Err(ErrorControlError::InvalidArgument("n must be at least 2"));
    }
    if alpha_n.is_sign_negative() || alpha_n.is_zero() || *alpha_n > 1 {
        return Err(ErrorControlError::InvalidArgument("alpha_n must lie in (0, 1]"));
    }
    Ok(())
}

fn n_pow_three_halves(ctx: PrecisionContext, n: usize) -> Real {
    let n = ctx.from_i64(n as i64);
    &n * &n.sqrt()
}

/// `sqrt((n-2) α_n² + 1)`.
fn radical(n: usize, alpha_n: &Real) -> Real {
    (alpha_n.square() * (n as i64 - 2) + 1).sqrt()
}

/// `C = 2 (sqrt((n-2) α_n² + 1) + α_n) / α_n`.
pub fn constant_c(n: usize, alpha_n: &Real) -> Result<Real, ErrorControlError> {
    check_n_alpha(n, alpha_n)?;
    Ok((radical(n, alpha_n) + alpha_n) * 2 / alpha_n)
}

/// Largest `ε₃` for which the forward bound holds.
pub fn forward_hypothesis_limit(n: usize, alpha_n: &Real) -> Real {
    alpha_n / &(radical(n, alpha_n) * 2)
}

/// A complete error budget. All reals share the context of `alpha_n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "PlanRecord", try_from = "PlanRecord")]
pub struct ErrorPlan {
    pub eps: Real,
    pub eps1: Real,
    pub eps2: Real,
    pub eps3: Real,
    pub c: Real,
    pub m_bound: Real,
    pub g: Real,
    pub omega: Real,
    pub n: usize,
    pub alpha_n: Real,
    pub guard_digits: u32,
    pub working_digits: u32,
}

/// Inputs to [`plan`].
#[derive(Clone, Debug)]
pub struct PlanRequest {
    pub eps: Real,
    pub g: Real,
    pub n: usize,
    pub alpha_n: Real,
    pub omega: Real,
    pub guard_digits: u32,
}

impl PlanRequest {
    /// `ω = 1/2` and the default guard.
    pub fn new(eps: Real, g: Real, n: usize, alpha_n: Real) -> Self {
        let ctx = alpha_n.context();
        Self { eps, g, n, alpha_n, omega: ctx.one() / 2, guard_digits: DEFAULT_GUARD_DIGITS }
    }
}

/// Derives `(ε₁, ε₂, ε₃)` for the request and checks both hypotheses.
///
/// `α_n` is taken from the empirical vector, so `C` is inflated by one unit in
/// the last decimal place to keep the thresholds strictly inside the bounds.
pub fn plan(request: &PlanRequest) -> Result<ErrorPlan, ErrorControlError> {
    let PlanRequest { eps, g, n, alpha_n, omega, guard_digits } = request;
    let n = *n;
    check_n_alpha(n, alpha_n)?;
    if eps.is_sign_negative() || eps.is_zero() {
        return Err(ErrorControlError::InvalidArgument("eps must be positive"));
    }
    if *g < 1 {
        return Err(ErrorControlError::InvalidArgument("G must be at least 1"));
    }
    if *omega <= 0 || *omega >= 1 {
        return Err(ErrorControlError::InvalidArgument("omega must lie in (0, 1)"));
    }
    let ctx = alpha_n.context();
    let c = constant_c(n, alpha_n)? * (ctx.one() + ctx.tolerance(0));
    let m_bound = ctx.from_i64(n as i64).sqrt() * g;
    let n32 = n_pow_three_halves(ctx, n);
    let eps1 = omega * eps / (&m_bound * &c * &n32 * 8);
    let eps2 = (ctx.one() - omega) * eps / (&c * alpha_n);
    let eps3 = &n32 * &eps1 * 8;

    let input_limit = ctx.one() / ctx.from_i64(8 * n as i64);
    if eps1 >= input_limit {
        return Err(infeasible(Constraint::InputAccuracy, &eps1, &input_limit));
    }
    let forward_limit = forward_hypothesis_limit(n, alpha_n);
    if eps3 >= forward_limit {
        return Err(infeasible(Constraint::HyperplanePerturbation, &eps3, &forward_limit));
    }
    let working_digits = digits_for(&eps1) + growth_digits(n, g) + guard_digits;
    Ok(ErrorPlan {
        eps: eps.clone(),
        eps1,
        eps2,
        eps3,
        c,
        m_bound,
        g: g.clone(),
        omega: omega.clone(),
        n,
        alpha_n: alpha_n.clone(),
        guard_digits: *guard_digits,
        working_digits,
    })
}

/// `⌈n log₁₀ G⌉`: headroom for the entries of the unimodular transforms,
/// which the arithmetic must resolve on top of the data digits.
pub fn growth_digits(n: usize, g: &Real) -> u32 {
    (n as f64 * g.log10_abs()).ceil().max(0.0) as u32
}

/// `⌈log₁₀(1/x)⌉`, clamped at zero.
pub fn digits_for(x: &Real) -> u32 {
    (-x.log10_abs()).ceil().max(0.0) as u32
}

fn infeasible(constraint: Constraint, value: &Real, limit: &Real) -> ErrorControlError {
    ErrorControlError::Infeasible { constraint, value: value.to_sci_string(6), limit: limit.to_sci_string(6) }
}

fn not_applicable(constraint: Constraint, value: &Real, limit: &Real) -> ErrorControlError {
    ErrorControlError::NotApplicable { constraint, value: value.to_sci_string(6), limit: limit.to_sci_string(6) }
}

/// `C (‖m‖ ε₃ + α_n ε₂)`, the guaranteed bound on `|⟨α, m⟩|`.
pub fn forward_bound(norm_m: &Real, eps2: &Real, eps3: &Real, n: usize, alpha_n: &Real) -> Result<Real, ErrorControlError> {
    let c = constant_c(n, alpha_n)?;
    let limit = forward_hypothesis_limit(n, alpha_n);
    if *eps3 >= limit {
        return Err(not_applicable(Constraint::HyperplanePerturbation, eps3, &limit));
    }
    Ok(c * (norm_m * eps3 + alpha_n * eps2))
}

/// `8 n^{3/2} ε₁`, the certified Frobenius distance between the hyperplane
/// matrices of a unit vector and an `ε₁`-close approximation.
pub fn h_perturbation_bound(n: usize, eps1: &Real) -> Result<Real, ErrorControlError> {
    let ctx = eps1.context();
    let limit = ctx.one() / ctx.from_i64(8 * n as i64);
    if *eps1 >= limit {
        return Err(not_applicable(Constraint::InputAccuracy, eps1, &limit));
    }
    Ok(n_pow_three_halves(ctx, n) * eps1 * 8)
}

/// `‖H⁻¹‖_F / (1 - ε₃ ‖H⁻¹‖_F)` for the leading block of a perturbed `H_α`.
pub fn perturbed_inverse_bound(n: usize, alpha_n: &Real, eps3: &Real) -> Result<Real, ErrorControlError> {
    check_n_alpha(n, alpha_n)?;
    let norm = inverse_fro_norm(n, alpha_n);
    let product = eps3 * &norm;
    if product >= 1 {
        return Err(not_applicable(Constraint::Nonsingularity, &product, &alpha_n.context().one()));
    }
    Ok(&norm / &(product * -1 + 1))
}

/// Lower bound on the last entry of the unit left-kernel vector of a
/// perturbed `H_α`: `α_n / (2 sqrt(1-α_n²) sqrt((n-2)α_n²+1) + 2α_n)`.
pub fn unit_last_component_bound(n: usize, alpha_n: &Real) -> Result<Real, ErrorControlError> {
    check_n_alpha(n, alpha_n)?;
    let complement = (alpha_n.square() * -1 + 1).sqrt();
    Ok(alpha_n / &(complement * radical(n, alpha_n) * 2 + alpha_n * 2))
}

/// Which leading factor the iteration bound uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundExponent {
    /// `n(n+1)`, the larger of the two.
    Statement,
    /// `n(n-1)`, the value the potential-function argument actually yields.
    Proof,
}

/// `⌈n(n±1) ((n-1) ln γ + ln(1/ε₂)) / (2 ln τ)⌉`.
pub fn iteration_bound(n: usize, gamma: &Gamma, eps2: &Real, exponent: BoundExponent) -> u64 {
    let n_f = n as f64;
    let factor = match exponent {
        BoundExponent::Statement => n_f * (n_f + 1.0),
        BoundExponent::Proof => n_f * (n_f - 1.0),
    };
    let ln_gamma = gamma.value().ln_abs();
    let ln_tau = gamma.tau().ln_abs();
    let bound = factor * ((n_f - 1.0) * ln_gamma - eps2.ln_abs()) / (2.0 * ln_tau);
    if bound.is_finite() && bound > 0.0 {
        bound.ceil().min(u64::MAX as f64) as u64
    } else {
        0
    }
}

/// Decimal-string form of [`ErrorPlan`]; reals keep their full precision.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanRecord {
    pub eps: String,
    pub eps1: String,
    pub eps2: String,
    pub eps3: String,
    #[serde(rename = "C")]
    pub c: String,
    #[serde(rename = "M")]
    pub m_bound: String,
    #[serde(rename = "G")]
    pub g: String,
    pub omega: String,
    pub n: usize,
    pub alpha_n: String,
    pub guard_digits: u32,
    pub working_digits: u32,
}

impl From<ErrorPlan> for PlanRecord {
    fn from(p: ErrorPlan) -> Self {
        Self {
            eps: p.eps.serialize(),
            eps1: p.eps1.serialize(),
            eps2: p.eps2.serialize(),
            eps3: p.eps3.serialize(),
            c: p.c.serialize(),
            m_bound: p.m_bound.serialize(),
            g: p.g.serialize(),
            omega: p.omega.serialize(),
            n: p.n,
            alpha_n: p.alpha_n.serialize(),
            guard_digits: p.guard_digits,
            working_digits: p.working_digits,
        }
    }
}

impl TryFrom<PlanRecord> for ErrorPlan {
    type Error = ErrorControlError;

    fn try_from(r: PlanRecord) -> Result<Self, Self::Error> {
        let field = |text: &str, name: &'static str| Real::deserialize(text).map_err(|_| ErrorControlError::Malformed(name));
        Ok(Self {
            eps: field(&r.eps, "eps")?,
            eps1: field(&r.eps1, "eps1")?,
            eps2: field(&r.eps2, "eps2")?,
            eps3: field(&r.eps3, "eps3")?,
            c: field(&r.c, "C")?,
            m_bound: field(&r.m_bound, "M")?,
            g: field(&r.g, "G")?,
            omega: field(&r.omega, "omega")?,
            n: r.n,
            alpha_n: field(&r.alpha_n, "alpha_n")?,
            guard_digits: r.guard_digits,
            working_digits: r.working_digits,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperplane::{build_h, normalize_and_permute, UnitVector};
    use crate::numerics::ConstantId;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(50).unwrap()
    }

    fn example_one_alpha_n(c: PrecisionContext) -> Real {
        let ln2 = c.constant(&ConstantId::Ln2);
        let pi2 = c.constant(&ConstantId::Pi).square();
        let t = c.from_i64(5) - &ln2 * 4 + ln2.square() * 16 - &pi2;
        let v = vec![t, c.one(), ln2.clone(), ln2.square(), pi2];
        normalize_and_permute(&v).unwrap().unit().unwrap().last().clone()
    }

    fn three_sig(x: &Real) -> String {
        x.to_sci_string(3)
    }

    #[test]
    fn constant_c_values() {
        let c = ctx();
        assert_eq!(constant_c(2, &c.one()).unwrap(), 4);
        let an = example_one_alpha_n(c);
        assert!((an.to_f64() - 0.99132).abs() < 1e-4);
        assert_eq!(constant_c(5, &an).unwrap().to_sci_string(3), "6.01e0");
        assert!(constant_c(3, &c.zero()).is_err());
        assert!(constant_c(3, &c.from_f64(-0.5)).is_err());
    }

    #[test]
    fn example_one_plan_matches_at_one_in_a_million() {
        let c = ctx();
        let request = PlanRequest::new(c.pow10(-6), c.from_i64(16), 5, example_one_alpha_n(c));
        let p = plan(&request).unwrap();
        assert_eq!(three_sig(&p.eps1), "2.60e-11");
        assert_eq!(three_sig(&p.eps2), "8.39e-8");
        assert_eq!(p.working_digits, 11 + 7 + DEFAULT_GUARD_DIGITS);
        // one decade larger at the literally stated target
        let loose = plan(&PlanRequest::new(c.pow10(-5), c.from_i64(16), 5, example_one_alpha_n(c))).unwrap();
        assert_eq!(three_sig(&loose.eps1), "2.60e-10");
    }

    #[test]
    fn omega_half_gives_the_sixteen_and_two_denominators() {
        let c = ctx();
        for n in [2usize, 3, 5, 8, 13, 21] {
            for an in ["0.3", "0.6", "0.95", "1"] {
                let an = c.parse(an).unwrap();
                if an < c.one() / c.from_i64(n as i64).sqrt() {
                    continue;
                }
                for e in [-8, -20, -60] {
                    let eps = c.pow10(e);
                    let p = plan(&PlanRequest::new(eps.clone(), c.from_i64(5), n, an.clone())).unwrap();
                    let n32 = n_pow_three_halves(c, n);
                    let e1 = &eps / &(&p.m_bound * &p.c * &n32 * 16);
                    let e2 = &eps / &(&p.c * &an * 2);
                    assert!(((&p.eps1 - &e1) / &e1).abs() < c.tolerance(3));
                    assert!(((&p.eps2 - &e2) / &e2).abs() < c.tolerance(3));
                    // the thresholds sit strictly below the bounds with the exact C
                    let exact_c = constant_c(n, &an).unwrap();
                    assert!(p.eps1 < &eps / &(&p.m_bound * &exact_c * &n32 * 16));
                    assert!(p.eps2 < &eps / &(&exact_c * &an * 2));
                }
            }
        }
    }

    #[test]
    fn infeasible_plans_name_the_constraint() {
        let c = ctx();
        let err = plan(&PlanRequest::new(c.from_i64(100), c.one(), 3, c.one())).unwrap_err();
        match err {
            ErrorControlError::Infeasible { constraint, .. } => assert_eq!(constraint, Constraint::InputAccuracy),
            other => panic!("unexpected {other:?}"),
        }
        let err = plan(&PlanRequest::new(c.from_i64(9), c.one(), 3, c.parse("0.6").unwrap())).unwrap_err();
        assert!(err.to_string().contains("eps3"), "{err}");
        let mut bad = PlanRequest::new(c.pow10(-5), c.one(), 3, c.one());
        bad.omega = c.one();
        assert!(matches!(plan(&bad), Err(ErrorControlError::InvalidArgument(_))));
    }

    #[test]
    fn omega_trades_eps1_against_eps2() {
        let c = ctx();
        let an = example_one_alpha_n(c);
        let mut last: Option<ErrorPlan> = None;
        for w in ["0.1", "0.3", "0.5", "0.7", "0.9"] {
            let mut req = PlanRequest::new(c.pow10(-6), c.from_i64(16), 5, an.clone());
            req.omega = c.parse(w).unwrap();
            let p = plan(&req).unwrap();
            if let Some(prev) = &last {
                assert!(p.eps1 > prev.eps1 && p.eps2 < prev.eps2);
            }
            last = Some(p);
        }
    }

    #[test]
    fn forward_bound_examples() {
        let c = ctx();
        let an = c.parse("0.8").unwrap();
        let b = forward_bound(&c.from_i64(3), &c.pow10(-10), &c.zero(), 4, &an).unwrap();
        let expect = constant_c(4, &an).unwrap() * &an * c.pow10(-10);
        assert!((b - expect).abs() < c.tolerance(5));
        assert!(matches!(
            forward_bound(&c.one(), &c.pow10(-10), &c.one(), 4, &an),
            Err(ErrorControlError::NotApplicable { constraint: Constraint::HyperplanePerturbation, .. })
        ));

        let alpha_n = example_one_alpha_n(c);
        let p = plan(&PlanRequest::new(c.pow10(-6), c.from_i64(16), 5, alpha_n.clone())).unwrap();
        let norm_m = c.from_i64(1 + 25 + 16 + 256 + 1).sqrt();
        assert!((norm_m.to_f64() - 17.29).abs() < 0.01);
        let bound = forward_bound(&norm_m, &p.eps2, &p.eps3, 5, &alpha_n).unwrap();
        assert!(bound < c.pow10(-6));
    }

    #[test]
    fn perturbation_bound_examples() {
        let c = ctx();
        let b = h_perturbation_bound(4, &c.pow10(-20)).unwrap();
        assert!((b - c.from_i64(64) * c.pow10(-20)).abs() < c.pow10(-60));
        assert!(h_perturbation_bound(4, &(c.one() / c.from_i64(16))).is_err());
        assert!(h_perturbation_bound(4, &(c.one() / c.from_i64(32))).is_err());
    }

    #[test]
    fn perturbed_inverse_examples() {
        let c = ctx();
        let an = c.parse("0.8").unwrap();
        assert!((perturbed_inverse_bound(2, &an, &c.zero()).unwrap() - c.parse("1.25").unwrap()).abs() < c.tolerance(5));
        let b = perturbed_inverse_bound(2, &an, &c.parse("0.1").unwrap()).unwrap();
        assert!((b - c.parse("1.25").unwrap() / c.parse("0.875").unwrap()).abs() < c.tolerance(5));
        assert!(perturbed_inverse_bound(2, &an, &c.one()).is_err());
    }

    #[test]
    fn unit_last_component_examples() {
        let c = ctx();
        assert!((unit_last_component_bound(7, &c.one()).unwrap() - c.parse("0.5").unwrap()).abs() < c.tolerance(5));
        let b = unit_last_component_bound(2, &c.parse("0.8").unwrap()).unwrap();
        assert!((b - c.parse("0.8").unwrap() / c.parse("2.8").unwrap()).abs() < c.tolerance(5));
    }

    #[test]
    fn iteration_bound_values() {
        let c = ctx();
        let g = Gamma::two(c);
        let eps2 = c.parse("8.39e-8").unwrap();
        let statement = iteration_bound(5, &g, &eps2, BoundExponent::Statement);
        let proof = iteration_bound(5, &g, &eps2, BoundExponent::Proof);
        // 30 (4 ln 2 + ln(1/eps2)) / ln 2
        let expect = 30.0 * (4.0 * 2f64.ln() - 8.39e-8f64.ln()) / 2f64.ln();
        assert_eq!(statement, expect.ceil() as u64);
        assert!((824..=826).contains(&statement));
        assert_eq!(proof, (expect * 20.0 / 30.0).ceil() as u64);
        assert!(30 <= proof);
        let tiny = c.pow10(-500);
        assert!(iteration_bound(50, &g, &tiny, BoundExponent::Proof) > 45385);
    }

    #[test]
    fn plan_round_trips_through_json_record() {
        let c = ctx();
        let p = plan(&PlanRequest::new(c.pow10(-6), c.from_i64(16), 5, example_one_alpha_n(c))).unwrap();
        let record = PlanRecord::from(p.clone());
        assert!(record.eps1.ends_with("@50"));
        let back = ErrorPlan::try_from(record).unwrap();
        assert_eq!(back.eps1, p.eps1);
        assert_eq!(back.working_digits, p.working_digits);
    }

    fn random_unit(rng: &mut ChaCha8Rng, c: PrecisionContext, n: usize) -> UnitVector {
        let v: Vec<Real> = (0..n).map(|_| c.from_f64(rng.random_range(-1.0..1.0))).collect();
        normalize_and_permute(&v).unwrap().unit().unwrap()
    }

    fn random_noise(rng: &mut ChaCha8Rng, c: PrecisionContext, n: usize, radius: &Real) -> Vec<Real> {
        let raw: Vec<Real> = (0..n).map(|_| c.from_f64(rng.random_range(-1.0..1.0))).collect();
        let norm = raw.iter().fold(c.zero(), |acc, x| acc + x.square()).sqrt();
        let scale = radius * &c.from_f64(rng.random_range(0.05..0.999)) / &norm;
        raw.iter().map(|x| x * &scale).collect()
    }

    #[test]
    fn hyperplane_perturbation_monte_carlo() {
        let c = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = 2 + trial % 9;
            let alpha = random_unit(&mut rng, c, n);
            let radius = c.one() / c.from_i64(8 * n as i64) * c.from_f64(rng.random_range(1e-6..1.0));
            let noise = random_noise(&mut rng, c, n, &radius);
            let distance = noise.iter().fold(c.zero(), |acc, x| acc + x.square()).sqrt();
            let h_bar = build_h(&alpha.perturbed(&noise));
            let h = build_h(&alpha);
            let measured = h.as_matrix().sub(h_bar.as_matrix()).frobenius();
            assert!(measured < h_perturbation_bound(n, &distance).unwrap(), "trial {trial}");
        }
    }

    /// Left-kernel unit vector `x` with `x·H = 0` and `x_n > 0`.
    fn left_kernel(h: &crate::matrix::RealMatrix) -> Vec<Real> {
        let c = h.context().unwrap();
        let n = h.rows();
        // x_top · H_top = -h_last, with H_top lower triangular: solve from the last column back
        let mut x = vec![c.zero(); n - 1];
        for j in (0..n - 1).rev() {
            let mut acc = -&h[(n - 1, j)];
            for i in j + 1..n - 1 {
                acc = acc - &x[i] * &h[(i, j)];
            }
            x[j] = acc / &h[(j, j)];
        }
        x.push(c.one());
        let norm = x.iter().fold(c.zero(), |acc, v| acc + v.square()).sqrt();
        x.iter().map(|v| v / &norm).collect()
    }

    #[test]
    fn perturbed_matrices_respect_inverse_and_kernel_bounds() {
        let c = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..60 {
            let n = 2 + trial % 7;
            let alpha = random_unit(&mut rng, c, n);
            let an = alpha.last().clone();
            let eps3 = forward_hypothesis_limit(n, &an) * c.from_f64(rng.random_range(0.01..0.99));
            let mut h = build_h(&alpha).into_matrix();
            // lower-trapezoidal noise with Frobenius norm below eps3
            let entries: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..(n - 1).min(i + 1)).map(move |j| (i, j))).collect();
            let noise = random_noise(&mut rng, c, entries.len(), &eps3);
            for ((i, j), e) in entries.iter().zip(&noise) {
                h[(*i, *j)] = &h[(*i, *j)] + e;
            }
            let top = h.block(n - 1, n - 1);
            let inverse_norm = gauss_inverse_frobenius(&top);
            assert!(inverse_norm <= perturbed_inverse_bound(n, &an, &eps3).unwrap(), "trial {trial}");
            let kernel = left_kernel(&h);
            assert!(kernel[n - 1].abs() >= unit_last_component_bound(n, &an).unwrap(), "trial {trial}");
        }
    }

    fn gauss_inverse_frobenius(m: &crate::matrix::RealMatrix) -> Real {
        // lower triangular: forward substitution column by column
        let c = m.context().unwrap();
        let k = m.rows();
        let mut total = c.zero();
        for col in 0..k {
            let mut x = vec![c.zero(); k];
            for i in 0..k {
                let mut acc = if i == col { c.one() } else { c.zero() };
                for j in 0..i {
                    acc = acc - &m[(i, j)] * &x[j];
                }
                x[i] = acc / &m[(i, i)];
            }
            total = total + x.iter().fold(c.zero(), |acc, v| acc + v.square());
        }
        total.sqrt()
    }

    proptest! {
        #[test]
        fn c_decreases_in_alpha_n(n in 2usize..40, a in 0.05f64..0.99, step in 0.001f64..0.5) {
            let c = ctx();
            let lo = c.from_f64(a);
            let hi = c.from_f64((a + step).min(1.0));
            prop_assert!(constant_c(n, &hi).unwrap() < constant_c(n, &lo).unwrap());
        }

        #[test]
        fn bounds_are_monotone(m in 1.0f64..100.0, e2 in 1e-30f64..1e-3, e3 in 1e-30f64..1e-3, bump in 1.0f64..3.0) {
            let c = ctx();
            let an = c.parse("0.9").unwrap();
            let n = 6;
            let base = forward_bound(&c.from_f64(m), &c.from_f64(e2), &c.from_f64(e3), n, &an).unwrap();
            for (mm, ee2, ee3) in [(m * bump, e2, e3), (m, e2 * bump, e3), (m, e2, e3 * bump)] {
                let bigger = forward_bound(&c.from_f64(mm), &c.from_f64(ee2), &c.from_f64(ee3), n, &an).unwrap();
                prop_assert!(bigger >= base);
            }
            let p1 = perturbed_inverse_bound(n, &an, &c.from_f64(e3)).unwrap();
            let p2 = perturbed_inverse_bound(n, &an, &c.from_f64(e3 * bump)).unwrap();
            prop_assert!(p2 >= p1);
        }

        #[test]
        fn feasible_plans_deliver_the_target(n in 2usize..30, a in 0.2f64..1.0, e in 3i32..200, g in 1i64..10_000) {
            let c = ctx();
            let an = c.from_f64(a);
            prop_assume!(an >= c.one() / c.from_i64(n as i64).sqrt());
            let eps = c.pow10(-e);
            if let Ok(p) = plan(&PlanRequest::new(eps.clone(), c.from_i64(g), n, an.clone())) {
                let eps3 = h_perturbation_bound(n, &p.eps1).unwrap();
                let bound = forward_bound(&p.m_bound, &p.eps2, &eps3, n, &an).unwrap();
                prop_assert!(bound < eps);
            }
        }

        #[test]
        fn normalized_last_entry_is_at_least_one_over_m(xi in proptest::collection::vec(-50.0f64..50.0, 1..10)) {
            let c = ctx();
            let mut v: Vec<Real> = xi.iter().map(|&x| c.from_f64(x)).collect();
            v.push(c.one());
            let norm = v.iter().fold(c.zero(), |acc, x| acc + x.square()).sqrt();
            let m_bound = &norm * &c.from_f64(1.0 + 1e-12);
            let beta_n = c.one() / &norm;
            prop_assert!(beta_n >= m_bound.recip());
        }
    }
}
