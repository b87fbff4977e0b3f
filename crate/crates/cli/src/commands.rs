//! The work behind each subcommand, free of argument parsing and printing so
//! tests can drive it directly.

use std::path::PathBuf;
use std::time::Instant;

use pslqe::error_control::{self, digits_for, BoundExponent, ErrorControlError, ErrorPlan, PlanRecord, PlanRequest};
use pslqe::hyperplane::{normalize_and_permute, HyperplaneError, Normalized};
use pslqe::ingest::{perturb, verify_relation, IngestError, VectorSpec};
use pslqe::numerics::NumericsError;
use pslqe::pslq::{find_relation, run_pslq_exact, Gamma, PslqError, PslqOptions, TraceRecord};
use pslqe::{PrecisionContext, Real, RelationStatus};
use rayon::prelude::*;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{
    canonical_sign, format_relation, relation_hash, same_up_to_sign, InputRecord, Outcome, ResultRecord, RunReport,
    SweepPoint, REPORT_SCHEMA_VERSION, TOOLKIT_VERSION,
};

pub mod exit {
    pub const OK: i32 = 0;
    /// `verify` or `selftest` found a failure.
    pub const CHECK_FAILED: i32 = 1;
    pub const BOUND_INAPPLICABLE: i32 = 2;
    pub const ITERATION_CAP: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
    pub const INPUT: i32 = 5;
}

/// Degree guard for `minpoly` unless `--extended` is given.
pub const MAX_DESK_DIMENSION: u32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Plan(#[from] ErrorControlError),
    #[error(transparent)]
    Pslq(#[from] PslqError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {}: {reason}", path.display())]
    Output { path: PathBuf, reason: String },
}

impl From<HyperplaneError> for CliError {
    fn from(e: HyperplaneError) -> Self {
        CliError::Pslq(PslqError::from(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Plan(ErrorControlError::Infeasible { .. }) => exit::INFEASIBLE,
            _ => exit::INPUT,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug)]
pub struct Settings {
    /// Working precision; derived from the plan when absent.
    pub digits: Option<u32>,
    pub gamma: String,
    pub omega: String,
    pub seed: u64,
    pub trace: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub extended: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self { digits: None, gamma: DEFAULT_GAMMA.into(), omega: "0.5".into(), seed: 0, trace: None, json: None, extended: false }
    }
}

/// How the termination threshold is chosen.
#[derive(Clone, Debug)]
pub enum Budget {
    /// Derive `ε₁, ε₂, ε₃` from a target `ε` and a coefficient bound `G`.
    Planned { eps: String, g: String },
    /// Use `ε₂` as given; no forward bound can be stated.
    Threshold { eps2: String },
}

/// Empirical-data model for a planned run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// Search the vector as computed at working precision.
    #[default]
    None,
    /// Round each raw entry to the fewest significant digits that keep the
    /// normalized vector within `ε₁`.
    Round,
    /// Add seeded noise, uniform in direction and radius, of norm below `ε₁`.
    Sphere,
}

#[derive(Clone, Debug)]
pub struct FindRequest {
    pub spec: VectorSpec,
    pub budget: Budget,
    /// How the searched data departs from the true vector.
    pub noise: Noise,
    pub exact: bool,
    pub max_iterations: Option<u64>,
    pub early_exit: bool,
}

impl FindRequest {
    pub fn new(spec: VectorSpec, budget: Budget) -> Self {
        Self { spec, budget, noise: Noise::None, exact: false, max_iterations: None, early_exit: false }
    }
}

#[derive(Clone, Debug)]
pub struct FindOutcome {
    pub report: RunReport,
    pub plan: Option<ErrorPlan>,
    pub relation: Vec<Integer>,
    pub trace: Vec<TraceRecord>,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

const PROBE_DIGITS: u32 = 40;

/// Just above the `2/√3` floor; reproduces the published iteration counts.
pub const DEFAULT_GAMMA: &str = "1.1547006";

fn probe_context(settings: &Settings) -> Result<PrecisionContext, CliError> {
    Ok(PrecisionContext::new(settings.digits.unwrap_or(PROBE_DIGITS).max(30))?)
}

/// Plans the error budget for a vector: `α_n` comes from the normalized input.
pub fn run_plan(spec: &VectorSpec, eps: &str, g: &str, settings: &Settings) -> Result<ErrorPlan, CliError> {
    let ctx = probe_context(settings)?;
    let values = spec.materialize(ctx)?.values;
    let alpha = match normalize_and_permute(&values)? {
        Normalized::Unit(u) => u,
        Normalized::Trivial(t) => {
            return Err(CliError::Usage(format!("entry {} vanishes; the vector has a trivial relation", t.index + 1)))
        }
    };
    let mut request = PlanRequest::new(ctx.parse(eps)?, ctx.parse(g)?, values.len(), alpha.last().clone());
    request.omega = ctx.parse(&settings.omega)?;
    Ok(error_control::plan(&request)?)
}

fn euclidean_norm(ctx: PrecisionContext, m: &[Integer]) -> Real {
    m.iter().fold(ctx.zero(), |acc, x| acc + ctx.from_integer(x).square()).sqrt()
}

/// Plans, builds the data at the working precision, runs the ε₂-terminated
/// search, and evaluates the forward bound.
/// Rounds the raw entries to `k ≥ start` significant digits, taking the
/// smallest `k` whose normalized result lies within `limit` of `alpha`.
/// Returns the normalized data and its distance from `alpha`.
fn round_within(raw: &[Real], alpha: &[Real], limit: &Real, start: u32) -> Result<(Vec<Real>, Real), CliError> {
    let ctx = alpha[0].context();
    for k in start.max(1)..ctx.digits() {
        let rounded = raw.iter().map(|x| ctx.parse(&x.to_sci_string(k as usize))).collect::<Result<Vec<_>, _>>()?;
        let norm = rounded.iter().fold(ctx.zero(), |acc, x| acc + x.square()).sqrt();
        let unit: Vec<Real> = rounded.iter().map(|x| x / &norm).collect();
        let distance = unit.iter().zip(alpha).fold(ctx.zero(), |acc, (a, b)| acc + (a - b).square()).sqrt();
        if distance < *limit {
            return Ok((unit, distance));
        }
    }
    Err(CliError::Usage("working precision too low to round within eps1".into()))
}

pub fn run_find(request: &FindRequest, settings: &Settings) -> Result<FindOutcome, CliError> {
    let start = Instant::now();
    if request.exact {
        return run_exact(request, settings, start);
    }
    let probe_ctx = probe_context(settings)?;
    let probe = request.spec.materialize(probe_ctx)?;
    let n = probe.values.len();
    if n < 2 {
        return Err(CliError::Usage("a relation needs at least two entries".into()));
    }
    let probe_alpha_n = match normalize_and_permute(&probe.values)? {
        Normalized::Unit(u) => u.last().clone(),
        Normalized::Trivial(_) => probe_ctx.one(),
    };

    let plan = match &request.budget {
        Budget::Planned { eps, g } => {
            let mut pr = PlanRequest::new(probe_ctx.parse(eps)?, probe_ctx.parse(g)?, n, probe_alpha_n);
            pr.omega = probe_ctx.parse(&settings.omega)?;
            Some(error_control::plan(&pr)?)
        }
        Budget::Threshold { .. } => None,
    };
    let digits = match (&plan, &request.budget, settings.digits) {
        (_, _, Some(d)) => d,
        (Some(p), _, None) => p.working_digits.max(30),
        (None, Budget::Threshold { eps2 }, None) => (digits_for(&probe_ctx.parse(eps2)?) + error_control::DEFAULT_GUARD_DIGITS).max(30),
        (None, Budget::Planned { .. }, None) => unreachable!("planned budgets always produce a plan"),
    };
    let ctx = PrecisionContext::new(digits)?;
    let data = request.spec.materialize(ctx)?;
    let mut warnings = data.warnings.clone();

    let norm = data.values.iter().fold(ctx.zero(), |acc, x| acc + x.square()).sqrt();
    let alpha_user: Vec<Real> = data.values.iter().map(|x| x / &norm).collect();
    let eps2 = match (&plan, &request.budget) {
        (Some(p), _) => p.eps2.with_context(ctx),
        (None, Budget::Threshold { eps2 }) => ctx.parse(eps2)?,
        (None, Budget::Planned { .. }) => unreachable!("planned budgets always produce a plan"),
    };

    // Rounding in the stored data, relative to a unit vector.
    let accurate_digits = data.min_significant_digits.map_or(digits, |d| (d as u32).min(digits));
    let rounding = ctx.from_i64(n as i64).sqrt() * ctx.pow10(1 - accurate_digits as i32);
    let data_certified = plan.as_ref().is_some_and(|p| rounding < p.eps1.with_context(ctx));
    if plan.is_some() && !data_certified {
        warnings.push(format!("input carries about {accurate_digits} digits, too few to be within eps1 of the true vector"));
    }

    let budget_left = match (&plan, request.noise) {
        (_, Noise::None) => None,
        (None, _) => return Err(CliError::Usage("injected noise needs a planned budget (--eps and --g)".into())),
        (Some(p), _) => {
            let left = p.eps1.with_context(ctx) - &rounding;
            if left.is_sign_negative() || left.is_zero() {
                return Err(CliError::Usage("working precision too low to stay within eps1".into()));
            }
            Some((left, p.eps1.with_context(ctx)))
        }
    };
    let (searched, perturbation) = match (request.noise, budget_left) {
        (Noise::Sphere, Some((left, _))) => (perturb(&alpha_user, &left, settings.seed), Some(left)),
        (Noise::Round, Some((left, eps1))) => {
            let (rounded, distance) = round_within(&data.values, &alpha_user, &left, digits_for(&eps1))?;
            (rounded, Some(distance))
        }
        _ => (alpha_user.clone(), None),
    };

    let gamma = Gamma::new(ctx.parse(&settings.gamma)?)?;
    let mut options = PslqOptions::new(ctx);
    options.gamma = gamma.clone();
    options.max_iterations = request.max_iterations;
    options.trace = settings.trace.is_some();
    options.early_exit = request.early_exit;
    let cap = request
        .max_iterations
        .unwrap_or_else(|| error_control::iteration_bound(n, &gamma, &eps2, BoundExponent::Statement));

    let result = find_relation(&searched, &eps2, &options)?;
    let residual = verify_relation(&alpha_user, &result.m)?;
    let data_residual = verify_relation(&searched, &result.m)?;

    let (forward_bound, bound_note) = match (&plan, result.status) {
        (_, RelationStatus::TrivialRelation) => (None, Some("an entry vanishes at working precision".to_string())),
        (_, RelationStatus::IterationCapExceeded) => (None, Some(format!("stopped at the iteration cap of {cap}"))),
        (None, RelationStatus::Found) => (None, Some("no plan: the run used an explicit eps2".to_string())),
        (Some(_), RelationStatus::Found) if !data_certified => {
            (None, Some("input data is not known to within eps1".to_string()))
        }
        (Some(p), RelationStatus::Found) => {
            let norm_m = euclidean_norm(ctx, &result.m);
            match error_control::forward_bound(
                &norm_m,
                &eps2,
                &p.eps3.with_context(ctx),
                n,
                &p.alpha_n.with_context(ctx),
            ) {
                Ok(b) if b < p.eps.with_context(ctx) => (Some(b), None),
                Ok(b) => (Some(b), Some("the relation exceeds the norm bound M, so eps is not guaranteed".to_string())),
                Err(e) => (None, Some(e.to_string())),
            }
        }
    };
    let exit_code = match result.status {
        RelationStatus::TrivialRelation => exit::OK,
        RelationStatus::IterationCapExceeded => exit::ITERATION_CAP,
        RelationStatus::Found if forward_bound.is_some() && bound_note.is_none() => exit::OK,
        RelationStatus::Found => exit::BOUND_INAPPLICABLE,
    };

    let (trace, violations) = match &result.trace {
        Some(t) => (
            t.diagnostics.iter().map(|d| d.record()).collect(),
            t.violations.iter().map(ToString::to_string).collect::<Vec<_>>(),
        ),
        None => (Vec::new(), Vec::new()),
    };

    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        toolkit_version: TOOLKIT_VERSION.to_string(),
        command: "find".into(),
        input: InputRecord {
            spec: request.spec.clone(),
            n,
            digits,
            seed: settings.seed,
            noise: request.noise,
            perturbation: perturbation.as_ref().map(Real::serialize),
            exact: false,
        },
        plan: plan.clone().map(PlanRecord::from),
        eps2: eps2.serialize(),
        gamma: settings.gamma.clone(),
        result: ResultRecord {
            status: result.status,
            m: result.m.iter().map(Integer::to_string).collect(),
            iterations: result.iterations,
            iteration_cap: Some(cap),
            final_h_nn1: result.final_h_nn1.to_sci_string(12),
            residual: residual.to_sci_string(12),
            data_residual: data_residual.to_sci_string(12),
            residual_within_bound: forward_bound.as_ref().map(|b| residual < *b),
            early_exit: result.early_exit,
            invariant_violations: violations.len(),
        },
        forward_bound: forward_bound.as_ref().map(|b| b.to_sci_string(12)),
        bound_note,
        polynomial: None,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        trace_path: settings.trace.clone(),
    };
    Ok(FindOutcome { report, plan, relation: result.m, trace, violations, warnings, exit_code })
}

fn run_exact(request: &FindRequest, settings: &Settings, start: Instant) -> Result<FindOutcome, CliError> {
    let values = request.spec.exact_values()?;
    let n = values.len();
    let digits = settings.digits.unwrap_or(50);
    let ctx = PrecisionContext::new(digits)?;
    let gamma = Gamma::new(ctx.parse(&settings.gamma)?)?;
    let result = run_pslq_exact(&values, &gamma, request.max_iterations)?;
    let residual = values
        .iter()
        .zip(&result.m)
        .fold(Rational::new(), |acc, (x, k)| acc + Rational::from(x * k))
        .abs();
    let exit_code = match result.status {
        RelationStatus::IterationCapExceeded => exit::ITERATION_CAP,
        _ => exit::OK,
    };
    let found = result.status != RelationStatus::IterationCapExceeded;
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        toolkit_version: TOOLKIT_VERSION.to_string(),
        command: "find".into(),
        input: InputRecord { spec: request.spec.clone(), n, digits, seed: settings.seed, noise: Noise::None, perturbation: None, exact: true },
        plan: None,
        eps2: "0".into(),
        gamma: settings.gamma.clone(),
        result: ResultRecord {
            status: result.status,
            m: result.m.iter().map(Integer::to_string).collect(),
            iterations: result.iterations,
            iteration_cap: request.max_iterations,
            final_h_nn1: "0".into(),
            residual: residual.to_string(),
            data_residual: residual.to_string(),
            residual_within_bound: found.then_some(residual == 0),
            early_exit: false,
            invariant_violations: 0,
        },
        // exact data: ε₂ = ε₃ = 0, so the bound is zero
        forward_bound: found.then(|| "0".to_string()),
        bound_note: (!found).then(|| "stopped at the iteration cap".to_string()),
        polynomial: None,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        trace_path: None,
    };
    Ok(FindOutcome { report, plan: None, relation: result.m, trace: Vec::new(), violations: Vec::new(), warnings: Vec::new(), exit_code })
}

#[derive(Clone, Debug)]
pub struct MinpolyRequest {
    pub base: String,
    pub degree: u32,
    pub budget: Budget,
    pub noise: Noise,
    pub max_iterations: Option<u64>,
}

/// Searches for a relation among `(x^d, …, x, 1)` and reports it as a
/// polynomial with positive leading coefficient.
pub fn run_minpoly(request: &MinpolyRequest, settings: &Settings) -> Result<FindOutcome, CliError> {
    if request.degree + 1 > MAX_DESK_DIMENSION && !settings.extended {
        return Err(CliError::Usage(format!(
            "degree {} gives a {}-dimensional search; pass --extended to allow more than {MAX_DESK_DIMENSION}",
            request.degree,
            request.degree + 1
        )));
    }
    let spec = VectorSpec::AlgebraicPowers { base: request.base.clone(), degree: request.degree };
    let mut find = FindRequest::new(spec, request.budget.clone());
    find.noise = request.noise;
    find.max_iterations = request.max_iterations;
    let mut outcome = run_find(&find, settings)?;
    let polynomial = canonical_sign(&outcome.relation);
    outcome.report.command = "minpoly".into();
    outcome.report.polynomial = Some(polynomial.iter().map(Integer::to_string).collect());
    outcome.relation = polynomial;
    Ok(outcome)
}

#[derive(Clone, Debug)]
pub struct SweepRequest {
    pub spec: VectorSpec,
    /// Exponents `i` of `ε = 10^-i`, inclusive.
    pub from: u32,
    pub to: u32,
    pub g: String,
    /// Relation counted as correct; without it the smallest-ε result is used.
    pub reference: Option<Vec<Integer>>,
    pub noise: Noise,
    pub max_iterations: Option<u64>,
}

/// Runs one planned search per `ε = 10^-i` in parallel and classifies each
/// against the reference relation.
pub fn run_sweep(request: &SweepRequest, settings: &Settings) -> Result<Vec<SweepPoint>, CliError> {
    if request.from == 0 || request.from > request.to {
        return Err(CliError::Usage(format!("empty exponent range {}..={}", request.from, request.to)));
    }
    let runs: Vec<(u32, Result<FindOutcome, CliError>)> = (request.from..=request.to)
        .into_par_iter()
        .map(|i| {
            let point_settings = Settings {
                seed: settings.seed.wrapping_add(u64::from(i)),
                trace: None,
                json: None,
                ..settings.clone()
            };
            let mut find = FindRequest::new(
                request.spec.clone(),
                Budget::Planned { eps: format!("1e-{i}"), g: request.g.clone() },
            );
            find.noise = request.noise;
            find.max_iterations = request.max_iterations;
            (i, run_find(&find, &point_settings))
        })
        .collect();

    let mut settled = Vec::with_capacity(runs.len());
    for (i, run) in runs {
        match run {
            Ok(outcome) => settled.push((i, Some(outcome))),
            Err(CliError::Plan(ErrorControlError::Infeasible { .. })) => settled.push((i, None)),
            Err(e) => return Err(e),
        }
    }

    let reference = request.reference.clone().or_else(|| {
        settled
            .iter()
            .rev()
            .filter_map(|(_, o)| o.as_ref())
            .find(|o| o.report.result.status == RelationStatus::Found)
            .map(|o| o.relation.clone())
    });

    Ok(settled
        .into_iter()
        .map(|(i, outcome)| match outcome {
            None => SweepPoint {
                i,
                eps1_digits: None,
                eps2_digits: None,
                outcome: Outcome::Infeasible,
                eps1: None,
                eps2: None,
                iterations: None,
                m: None,
                m_hash: None,
            },
            Some(o) => {
                let plan = o.plan.as_ref().expect("sweep points are planned");
                let found = o.report.result.status == RelationStatus::Found;
                let correct = found && reference.as_ref().is_some_and(|r| same_up_to_sign(r, &o.relation));
                SweepPoint {
                    i,
                    eps1_digits: Some(digits_for(&plan.eps1)),
                    eps2_digits: Some(digits_for(&plan.eps2)),
                    outcome: if correct { Outcome::Correct } else { Outcome::Incorrect },
                    eps1: Some(plan.eps1.to_sci_string(6)),
                    eps2: Some(plan.eps2.to_sci_string(6)),
                    iterations: Some(o.report.result.iterations),
                    m: Some(format_relation(&canonical_sign(&o.relation))),
                    m_hash: Some(relation_hash(&o.relation)),
                }
            }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct VerifyRequest {
    pub spec: VectorSpec,
    pub relation: Vec<Integer>,
    /// Termination threshold the terminal bound is stated for; defaults to
    /// `10^-(digits-10)`.
    pub eps2: Option<String>,
}

#[derive(Clone, Debug)]
pub struct VerifyOutcome {
    pub digits: u32,
    /// `|⟨v, m⟩|` on the vector as given.
    pub raw_residual: Real,
    /// `|⟨v/‖v‖, m⟩|`.
    pub residual: Real,
    /// `sqrt(α_{n-1}² + α_n²)·ε₂` on the normalized, reordered vector.
    pub terminal_bound: Real,
    pub passed: bool,
}

pub fn run_verify(request: &VerifyRequest, settings: &Settings) -> Result<VerifyOutcome, CliError> {
    let digits = settings.digits.unwrap_or(50);
    let ctx = PrecisionContext::new(digits)?;
    let values = request.spec.materialize(ctx)?.values;
    let raw_residual = verify_relation(&values, &request.relation)?;
    let norm = values.iter().fold(ctx.zero(), |acc, x| acc + x.square()).sqrt();
    if norm.is_zero() {
        return Err(CliError::Usage("the vector is zero".into()));
    }
    let unit: Vec<Real> = values.iter().map(|x| x / &norm).collect();
    let residual = verify_relation(&unit, &request.relation)?;
    let tail = match normalize_and_permute(&values)? {
        Normalized::Unit(u) => u.tail_norm(),
        Normalized::Trivial(_) => ctx.one(),
    };
    let eps2 = match &request.eps2 {
        Some(text) => ctx.parse(text)?,
        None => ctx.pow10(10 - digits as i32),
    };
    let terminal_bound = tail * eps2;
    let passed = request.relation.iter().any(|x| *x != 0) && residual <= terminal_bound;
    Ok(VerifyOutcome { digits, raw_residual, residual, terminal_bound, passed })
}

/// Parses `1,-5,4` or `1 -5 4`.
pub fn parse_relation(text: &str) -> Result<Vec<Integer>, CliError> {
    let entries: Vec<&str> = text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
    if entries.is_empty() {
        return Err(CliError::Usage("empty relation".into()));
    }
    entries
        .iter()
        .map(|s| s.parse::<Integer>().map_err(|_| CliError::Usage(format!("`{s}` is not an integer"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use pslqe::ingest::Preset;

    fn ints(v: &[i64]) -> Vec<Integer> {
        v.iter().map(|&x| Integer::from(x)).collect()
    }

    fn example_one() -> FindRequest {
        FindRequest::new(Preset::Example1.spec(), Budget::Planned { eps: "1e-6".into(), g: "16".into() })
    }

    #[test]
    fn relations_parse() {
        assert_eq!(parse_relation("1,-5, 4 -16,1").unwrap(), ints(&[1, -5, 4, -16, 1]));
        assert!(parse_relation("").is_err());
        assert!(parse_relation("1,x").is_err());
    }

    #[test]
    fn example_one_finds_the_relation_with_a_bound() {
        let out = run_find(&example_one(), &Settings::default()).unwrap();
        assert!(same_up_to_sign(&out.relation, &ints(&[1, -5, 4, -16, 1])));
        assert_eq!(out.exit_code, exit::OK);
        assert_eq!(out.report.result.residual_within_bound, Some(true));
        assert!(out.report.forward_bound.is_some());
    }

    #[test]
    fn explicit_threshold_gives_inapplicable_bound() {
        let request = FindRequest::new(Preset::Example1.spec(), Budget::Threshold { eps2: "1e-20".into() });
        let out = run_find(&request, &Settings::default()).unwrap();
        assert!(same_up_to_sign(&out.relation, &ints(&[1, -5, 4, -16, 1])));
        assert_eq!(out.exit_code, exit::BOUND_INAPPLICABLE);
        assert!(out.report.forward_bound.is_none());
    }

    #[test]
    fn infeasible_plans_exit_with_four() {
        let request = FindRequest::new(Preset::Example1.spec(), Budget::Planned { eps: "100".into(), g: "1".into() });
        let err = run_find(&request, &Settings::default()).unwrap_err();
        assert_eq!(err.exit_code(), exit::INFEASIBLE);
        assert!(err.to_string().contains("eps1"));
    }

    #[test]
    fn iteration_cap_exits_with_three() {
        let mut request = FindRequest::new(
            VectorSpec::ConstantList { entries: vec!["1".into(), "sqrt(2)".into(), "sqrt(3)".into(), "pi".into()] },
            Budget::Threshold { eps2: "1e-25".into() },
        );
        request.max_iterations = Some(3);
        let out = run_find(&request, &Settings::default()).unwrap();
        assert_eq!(out.report.result.status, RelationStatus::IterationCapExceeded);
        assert_eq!(out.exit_code, exit::ITERATION_CAP);
    }

    #[test]
    fn perturbed_runs_are_reproducible() {
        let mut request = example_one();
        request.noise = Noise::Sphere;
        let settings = Settings { seed: 11, ..Settings::default() };
        let a = run_find(&request, &settings).unwrap();
        let b = run_find(&request, &settings).unwrap();
        assert_eq!(a.relation, b.relation);
        assert_eq!(a.report.result.iterations, b.report.result.iterations);
        assert!(a.report.input.perturbation.is_some());
    }

    #[test]
    fn rounded_data_stays_within_eps1() {
        let mut request = example_one();
        request.noise = Noise::Round;
        let out = run_find(&request, &Settings::default()).unwrap();
        let distance = Real::deserialize(out.report.input.perturbation.as_deref().unwrap()).unwrap();
        let eps1 = out.plan.as_ref().unwrap().eps1.clone();
        assert!(distance < eps1);
        assert!(distance > &eps1 / 1000);
        assert!(same_up_to_sign(&out.relation, &ints(&[1, -5, 4, -16, 1])));
    }

    #[test]
    fn exact_mode_on_rationals() {
        let mut request = FindRequest::new(
            VectorSpec::ConstantList { entries: vec!["1/3".into(), "1/4".into()] },
            Budget::Threshold { eps2: "1e-10".into() },
        );
        request.exact = true;
        let out = run_find(&request, &Settings::default()).unwrap();
        assert!(same_up_to_sign(&out.relation, &ints(&[3, -4])));
        assert_eq!(out.report.result.residual, "0");
        assert_eq!(out.exit_code, exit::OK);
    }

    #[test]
    fn minpoly_of_sqrt_two() {
        let request = MinpolyRequest {
            base: "sqrt(2)".into(),
            degree: 2,
            budget: Budget::Planned { eps: "1e-10".into(), g: "2".into() },
            noise: Noise::None,
            max_iterations: None,
        };
        let out = run_minpoly(&request, &Settings::default()).unwrap();
        assert_eq!(out.relation, ints(&[1, 0, -2]));
        assert_eq!(out.report.polynomial, Some(vec!["1".into(), "0".into(), "-2".into()]));
    }

    #[test]
    fn minpoly_degree_guard() {
        let request = MinpolyRequest {
            base: "sqrt(2)".into(),
            degree: 64,
            budget: Budget::Planned { eps: "1e-10".into(), g: "2".into() },
            noise: Noise::None,
            max_iterations: None,
        };
        assert!(matches!(run_minpoly(&request, &Settings::default()), Err(CliError::Usage(_))));
    }

    #[test]
    fn verify_accepts_relations_and_rejects_others() {
        let settings = Settings { digits: Some(200), ..Settings::default() };
        let good = VerifyRequest { spec: Preset::Example1.spec(), relation: ints(&[1, -5, 4, -16, 1]), eps2: None };
        let out = run_verify(&good, &settings).unwrap();
        assert!(out.passed);
        assert!(out.raw_residual < settings_ctx(200).pow10(-190));
        let bad = VerifyRequest { spec: Preset::Example1.spec(), relation: ints(&[1, -5, 4, -16, 2]), eps2: None };
        assert!(!run_verify(&bad, &settings).unwrap().passed);
        let short = VerifyRequest { spec: Preset::Example1.spec(), relation: ints(&[1, -5]), eps2: None };
        let err = run_verify(&short, &settings).unwrap_err();
        assert_eq!(err.exit_code(), exit::INPUT);
    }

    fn settings_ctx(d: u32) -> PrecisionContext {
        PrecisionContext::new(d).unwrap()
    }

    #[test]
    fn sweep_rejects_empty_ranges() {
        let request = SweepRequest {
            spec: Preset::Example1.spec(),
            from: 5,
            to: 4,
            g: "16".into(),
            reference: None,
            noise: Noise::Sphere,
            max_iterations: None,
        };
        assert!(run_sweep(&request, &Settings::default()).is_err());
    }
}
