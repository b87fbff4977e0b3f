//! The PSLQ iteration on a lower-trapezoidal matrix, its ε-terminated driver,
//! and an exact rational variant.
//!
//! One iteration is a Bergman swap, a corner rotation when the swap is not on
//! the last row, and a full size reduction. The integer matrices `A` and `B`
//! record every unimodular step so that `H = A · H₀ · Q` and `A · B = I`.
//!
//! Indices in this API are 0-based. The swap row `r` in the trace stream is
//! reported 1-based to match the usual mathematical notation.

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error_control::{iteration_bound, BoundExponent};
use crate::hyperplane::{build_h, normalize_and_permute, HyperplaneError, HyperplaneMatrix, Normalized, UnitVector};
use crate::matrix::{IntMatrix, RealMatrix};
use crate::numerics::{PrecisionContext, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PslqError {
    #[error("diagonal entry {0} vanished before termination")]
    ZeroDiagonal(usize),
    #[error("corner rotation at row {0} has a zero pivot pair")]
    DegenerateCorner(usize),
    #[error("corner step needs r < n-2 (0-based), got r = {r} for n = {n}")]
    CornerOutOfRange { r: usize, n: usize },
    #[error("gamma must exceed 2/sqrt(3)")]
    GammaTooSmall,
    #[error("termination threshold must be positive")]
    NonPositiveThreshold,
    #[error("exact mode needs at least two rationals, not all zero")]
    ExactInput,
    #[error(transparent)]
    Hyperplane(#[from] HyperplaneError),
}

/// The swap-weighting parameter `γ > 2/√3`.
#[derive(Clone, Debug)]
pub struct Gamma(Real);

impl Gamma {
    pub fn new(value: Real) -> Result<Self, PslqError> {
        // γ² > 4/3 avoids the square root in the comparison.
        if value.square() * 3 <= 4 || value.is_sign_negative() {
            return Err(PslqError::GammaTooSmall);
        }
        Ok(Self(value))
    }

    /// `γ = 2`.
    pub fn two(ctx: PrecisionContext) -> Self {
        Self(ctx.from_i64(2))
    }

    pub fn value(&self) -> &Real {
        &self.0
    }

    pub fn with_context(&self, ctx: PrecisionContext) -> Self {
        Self(self.0.with_context(ctx))
    }

    /// `τ = 1/sqrt(1/4 + 1/γ²)`, the per-iteration decay rate of Π.
    pub fn tau(&self) -> Real {
        let ctx = self.0.context();
        let quarter = ctx.one() / ctx.from_i64(4);
        (quarter + self.0.square().recip()).sqrt().recip()
    }

    /// `(γ, γ², …, γ^k)`.
    fn powers(&self, k: usize) -> Vec<Real> {
        let mut out = Vec::with_capacity(k);
        let mut acc = self.0.clone();
        for _ in 0..k {
            out.push(acc.clone());
            acc = &acc * &self.0;
        }
        out
    }
}

/// Size-reduces `H` in place and applies the same unimodular row operations
/// to `A` (rows) and their inverses to `B` (columns).
///
/// Each multiplier is computed from the already-updated row, so the result
/// satisfies `|h_ij| ≤ |h_jj|/2` for all `j < i`.
fn reduce_in_place(h: &mut RealMatrix, a: &mut IntMatrix, b: &mut IntMatrix) -> Result<(), PslqError> {
    let n = h.rows();
    for j in 0..n - 1 {
        if h[(j, j)].is_zero() {
            return Err(PslqError::ZeroDiagonal(j));
        }
    }
    for i in 1..n {
        for j in (0..i).rev() {
            if j >= h.cols() {
                continue;
            }
            let q = (&h[(i, j)] / &h[(j, j)]).nearest_int();
            if q == 0 {
                continue;
            }
            for k in 0..=j {
                let v = &h[(i, k)] - &(&h[(j, k)] * &q);
                h[(i, k)] = v;
            }
            a.sub_row_multiple(i, j, &q);
            b.add_col_multiple(j, i, &q);
        }
    }
    Ok(())
}

/// Size reduction as a standalone step: returns `D` and `H' = D·H`.
pub fn size_reduce(h: &HyperplaneMatrix) -> Result<(IntMatrix, HyperplaneMatrix), PslqError> {
    let n = h.n();
    let mut m = h.as_matrix().clone();
    let mut d = IntMatrix::identity(n);
    let mut d_inv = IntMatrix::identity(n);
    reduce_in_place(&mut m, &mut d, &mut d_inv)?;
    Ok((d, HyperplaneMatrix::from_matrix_unchecked(m)))
}

/// Row maximizing `γ^(j+1) |h_jj|`, smallest on ties.
fn swap_row(h: &RealMatrix, gamma_powers: &[Real]) -> usize {
    let mut best = 0;
    let mut best_weight = &gamma_powers[0] * &h[(0, 0)].abs();
    for j in 1..h.cols() {
        let weight = &gamma_powers[j] * &h[(j, j)].abs();
        if weight > best_weight {
            best = j;
            best_weight = weight;
        }
    }
    best
}

/// Bergman swap selection: `D` is `I_n` with rows `r` and `r+1` exchanged.
pub fn bergman_swap(h: &HyperplaneMatrix, gamma: &Gamma) -> (IntMatrix, usize) {
    let powers = gamma.powers(h.n() - 1);
    let r = swap_row(h.as_matrix(), &powers);
    let mut d = IntMatrix::identity(h.n());
    d.swap_rows(r, r + 1);
    (d, r)
}

/// `H` with rows `r` and `r+1` exchanged; for `r + 2 < n` the result has a
/// nonzero `(r, r+1)` entry until [`corner`] is applied.
pub fn apply_swap(h: &HyperplaneMatrix, r: usize) -> HyperplaneMatrix {
    let mut m = h.as_matrix().clone();
    m.swap_rows(r, r + 1);
    HyperplaneMatrix::from_matrix_unchecked(m)
}

/// Applies the corner rotation on columns `r`, `r+1` in place and returns
/// `(β/δ, λ/δ)`.
fn rotate_in_place(h: &mut RealMatrix, r: usize) -> Result<(Real, Real), PslqError> {
    let beta = h[(r, r)].clone();
    let lambda = h[(r, r + 1)].clone();
    let delta = (beta.square() + lambda.square()).sqrt();
    if delta.is_zero() {
        return Err(PslqError::DegenerateCorner(r));
    }
    let cos = &beta / &delta;
    let sin = &lambda / &delta;
    for i in r..h.rows() {
        let x = h[(i, r)].clone();
        let y = h[(i, r + 1)].clone();
        h[(i, r)] = &x * &cos + &y * &sin;
        h[(i, r + 1)] = &y * &cos - &x * &sin;
    }
    h[(r, r + 1)] = h[(r, r)].context().zero();
    Ok((cos, sin))
}

/// The explicit corner matrix for a post-swap `H` and `H' = H·Q`.
pub fn corner(h: &HyperplaneMatrix, r: usize) -> Result<(RealMatrix, HyperplaneMatrix), PslqError> {
    let n = h.n();
    if r + 2 >= n {
        return Err(PslqError::CornerOutOfRange { r, n });
    }
    let mut m = h.as_matrix().clone();
    let (cos, sin) = rotate_in_place(&mut m, r)?;
    Ok((corner_matrix(h.context(), n - 1, r, &cos, &sin), HyperplaneMatrix::from_matrix_unchecked(m)))
}

fn corner_matrix(ctx: PrecisionContext, size: usize, r: usize, cos: &Real, sin: &Real) -> RealMatrix {
    let mut q = RealMatrix::identity(ctx, size);
    q[(r, r)] = cos.clone();
    q[(r, r + 1)] = -sin;
    q[(r + 1, r)] = sin.clone();
    q[(r + 1, r + 1)] = cos.clone();
    q
}

/// `Π = ∏_j max(|h_jj|, h_max/γ^(n-1))^(n-j)` (1-based `j`).
pub fn pi_function(h: &HyperplaneMatrix, gamma: &Gamma) -> Real {
    let n = h.n();
    let floor = h.h_max() / gamma.value().powi(n as i32 - 1);
    let ctx = h.context();
    (0..n - 1).fold(ctx.one(), |acc, j| acc * h.get(j, j).abs().max(&floor).powi((n - 1 - j) as i32))
}

/// `(|z_{n-1}|, sqrt(α_{n-1}² + α_n²)·|h_{n,n-1}|)` with `z = α·B`.
pub fn invariant_gauge(state: &PslqState, alpha: &UnitVector) -> (Real, Real) {
    let n = state.h.n();
    let z = row_times_column(alpha.entries(), &state.b, n - 2);
    (z.abs(), alpha.tail_norm() * state.h.corner_entry())
}

fn row_times_column(alpha: &[Real], b: &IntMatrix, col: usize) -> Real {
    let ctx = alpha[0].context();
    alpha.iter().enumerate().fold(ctx.zero(), |acc, (i, a)| acc + a * &b[(i, col)])
}

/// One trace record.
#[derive(Clone, Debug)]
pub struct IterationDiagnostic {
    pub iteration: u64,
    /// 0-based swap row.
    pub swap_row: usize,
    pub h_nn1: Real,
    pub h_max: Real,
    pub pi_value: Real,
    /// `(lhs, rhs)` of the terminal-residual invariant, when the input vector is known.
    pub gauge: Option<(Real, Real)>,
}

/// JSON-lines form of an [`IterationDiagnostic`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: u64,
    pub r: usize,
    pub h_nn1: String,
    pub h_max: String,
    pub pi: String,
    pub gauge_lhs: Option<String>,
    pub gauge_rhs: Option<String>,
}

impl IterationDiagnostic {
    pub fn record(&self) -> TraceRecord {
        let s = |x: &Real| x.to_sci_string(12);
        TraceRecord {
            k: self.iteration,
            r: self.swap_row + 1,
            h_nn1: s(&self.h_nn1),
            h_max: s(&self.h_max),
            pi: s(&self.pi_value),
            gauge_lhs: self.gauge.as_ref().map(|(l, _)| s(l)),
            gauge_rhs: self.gauge.as_ref().map(|(_, r)| s(r)),
        }
    }
}

/// An invariant that failed while tracing.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InvariantViolation {
    #[error("iteration {iteration}: |h[{i}][{j}]| exceeds |h[{j}][{j}]|/2")]
    HalfBound { iteration: u64, i: usize, j: usize },
    #[error("iteration {0}: A·B is not the identity")]
    Inverse(u64),
    #[error("iteration {0}: h_max increased")]
    HMaxIncreased(u64),
    #[error("iteration {0}: Π did not decay by τ")]
    PiDecay(u64),
    #[error("iteration {0}: terminal-residual gauge violated")]
    Gauge(u64),
    #[error("iteration {0}: |z_n / h_(n-1,n-1)| increased")]
    RatioIncreased(u64),
    #[error("iteration {0}: H differs from A·H0·Q")]
    Conjugation(u64),
}

/// Per-iteration diagnostics plus the invariant checks performed on them.
#[derive(Clone, Debug)]
pub struct Trace {
    pub diagnostics: Vec<IterationDiagnostic>,
    pub violations: Vec<InvariantViolation>,
    alpha: Option<UnitVector>,
    h0: RealMatrix,
    q_cumulative: RealMatrix,
    last_ratio: Option<Real>,
    last_pi: Real,
    last_h_max: Real,
}

impl Trace {
    fn new(h0: &HyperplaneMatrix, alpha: Option<UnitVector>, gamma: &Gamma) -> Self {
        let ctx = h0.context();
        Self {
            diagnostics: Vec::new(),
            violations: Vec::new(),
            alpha,
            h0: h0.as_matrix().clone(),
            q_cumulative: RealMatrix::identity(ctx, h0.n() - 1),
            last_ratio: None,
            last_pi: pi_function(h0, gamma),
            last_h_max: h0.h_max(),
        }
    }
}

/// Mutable PSLQ state: current `H`, the unimodular pair `A`, `B = A⁻¹`, and
/// the iteration counter.
#[derive(Clone, Debug)]
pub struct PslqState {
    h: HyperplaneMatrix,
    a: IntMatrix,
    b: IntMatrix,
    iteration: u64,
    gamma: Gamma,
    gamma_powers: Vec<Real>,
    trace: Option<Trace>,
}

impl PslqState {
    /// Starts from `H₀` and performs the initial size reduction.
    pub fn new(h0: HyperplaneMatrix, gamma: Gamma) -> Result<Self, PslqError> {
        Self::start(h0, gamma, None)
    }

    /// Like [`PslqState::new`], recording diagnostics and checking invariants
    /// after every iteration. `alpha`, when given, must be the vector `H₀` was
    /// built from; it enables the residual gauge.
    pub fn traced(h0: HyperplaneMatrix, gamma: Gamma, alpha: Option<UnitVector>) -> Result<Self, PslqError> {
        let trace = Trace::new(&h0, alpha, &gamma);
        Self::start(h0, gamma, Some(trace))
    }

    fn start(h0: HyperplaneMatrix, gamma: Gamma, trace: Option<Trace>) -> Result<Self, PslqError> {
        let n = h0.n();
        let gamma = gamma.with_context(h0.context());
        let mut state = Self {
            gamma_powers: gamma.powers(n - 1),
            h: h0,
            a: IntMatrix::identity(n),
            b: IntMatrix::identity(n),
            iteration: 0,
            gamma,
            trace,
        };
        reduce_in_place(state.h.matrix_mut(), &mut state.a, &mut state.b)?;
        if state.trace.is_some() {
            state.check_invariants(None);
        }
        Ok(state)
    }

    pub fn h(&self) -> &HyperplaneMatrix {
        &self.h
    }

    pub fn a(&self) -> &IntMatrix {
        &self.a
    }

    pub fn b(&self) -> &IntMatrix {
        &self.b
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn trace(&self) -> Option<&Trace> {
        self.trace.as_ref()
    }

    pub fn into_trace(self) -> Option<Trace> {
        self.trace
    }

    /// Column `n-2` of `B`, the candidate relation in internal order.
    pub fn candidate(&self) -> Vec<Integer> {
        self.b.column(self.h.n() - 2)
    }

    /// One swap / corner / size-reduction round. Returns the 0-based swap row.
    pub fn iterate(&mut self) -> Result<usize, PslqError> {
        let n = self.h.n();
        let r = swap_row(self.h.as_matrix(), &self.gamma_powers);
        let h = self.h.matrix_mut();
        h.swap_rows(r, r + 1);
        self.a.swap_rows(r, r + 1);
        self.b.swap_cols(r, r + 1);
        let mut rotation = None;
        if r + 2 < n {
            rotation = Some(rotate_in_place(h, r)?);
        }
        reduce_in_place(h, &mut self.a, &mut self.b)?;
        self.iteration += 1;
        if self.trace.is_some() {
            if let Some((cos, sin)) = rotation {
                let trace = self.trace.as_mut().expect("checked above");
                let q = corner_matrix(self.h.context(), n - 1, r, &cos, &sin);
                trace.q_cumulative = trace.q_cumulative.mul(&q);
            }
            self.check_invariants(Some(r));
        }
        Ok(r)
    }

    fn check_invariants(&mut self, swap: Option<usize>) {
        let n = self.h.n();
        let ctx = self.h.context();
        let tol = ctx.tolerance(5);
        let k = self.iteration;
        let mut found = Vec::new();

        let h = self.h.as_matrix();
        for j in 0..n - 1 {
            let limit = h[(j, j)].abs() / 2 * (ctx.one() + &tol);
            for i in j + 1..n {
                if h[(i, j)].abs() > limit {
                    found.push(InvariantViolation::HalfBound { iteration: k, i, j });
                }
            }
        }
        if !self.a.mul(&self.b).is_identity() {
            found.push(InvariantViolation::Inverse(k));
        }

        let trace = self.trace.as_mut().expect("tracing");
        let h_max = self.h.h_max();
        let pi = pi_function(&self.h, &self.gamma);
        if let Some(r) = swap {
            if h_max > &trace.last_h_max * &(ctx.one() + &tol) {
                found.push(InvariantViolation::HMaxIncreased(k));
            }
            if &pi * &self.gamma.tau() >= &trace.last_pi * &(ctx.one() + &tol) {
                found.push(InvariantViolation::PiDecay(k));
            }
            let gauge = trace.alpha.as_ref().map(|alpha| {
                let z = row_times_column(alpha.entries(), &self.b, n - 2);
                (z.abs(), alpha.tail_norm() * self.h.corner_entry())
            });
            trace.diagnostics.push(IterationDiagnostic {
                iteration: k,
                swap_row: r,
                h_nn1: self.h.corner_entry(),
                h_max: h_max.clone(),
                pi_value: pi.clone(),
                gauge,
            });
        }
        trace.last_h_max = h_max;
        trace.last_pi = pi;

        if let Some(alpha) = &trace.alpha {
            let scale = column_weight(ctx, &self.b, n - 2);
            let z = row_times_column(alpha.entries(), &self.b, n - 2);
            let rhs = alpha.tail_norm() * self.h.corner_entry();
            if z.abs() > &rhs * &(ctx.one() + &tol) + &tol * &scale {
                found.push(InvariantViolation::Gauge(k));
            }
            let z_last = row_times_column(alpha.entries(), &self.b, n - 1);
            let ratio = (z_last / self.h.get(n - 2, n - 2)).abs();
            let slack = &tol * &column_weight(ctx, &self.b, n - 1);
            if let Some(prev) = &trace.last_ratio {
                if ratio > prev * &(ctx.one() + &tol) + &slack {
                    found.push(InvariantViolation::RatioIncreased(k));
                }
            }
            trace.last_ratio = Some(ratio);
        }

        let conj = trace.h0.left_mul_int(&self.a).mul(&trace.q_cumulative);
        let weight = (0..n).map(|i| row_weight(ctx, &self.a, i)).fold(ctx.one(), |acc, w| acc.max(&w));
        if conj.sub(self.h.as_matrix()).max_abs() > &tol * &weight {
            found.push(InvariantViolation::Conjugation(k));
        }

        trace.violations.extend(found);
    }
}

/// `1 + Σ|b_i,col|`, the scale of the rounding error in `α·b_col`.
fn column_weight(ctx: PrecisionContext, b: &IntMatrix, col: usize) -> Real {
    let sum = (0..b.rows()).fold(Integer::from(1), |acc, i| acc + b[(i, col)].clone().abs());
    ctx.from_integer(&sum)
}

fn row_weight(ctx: PrecisionContext, a: &IntMatrix, row: usize) -> Real {
    let sum = (0..a.cols()).fold(Integer::from(1), |acc, j| acc + a[(row, j)].clone().abs());
    ctx.from_integer(&sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationStatus {
    Found,
    IterationCapExceeded,
    TrivialRelation,
}

/// Outcome of a relation search; `m` is in the caller's coordinate order.
#[derive(Clone, Debug)]
pub struct RelationResult {
    pub status: RelationStatus,
    pub m: Vec<Integer>,
    pub iterations: u64,
    pub final_h_nn1: Real,
    /// `sqrt(α_{n-1}² + α_n²)·|h_{n,n-1}|`, the residual guaranteed for the input vector.
    pub residual_bound: Real,
    /// gcd of the entries of `m`.
    pub gcd: Integer,
    /// Set when the early-exit check returned a column other than `n-1`.
    pub early_exit: bool,
    pub trace: Option<Trace>,
}

impl RelationResult {
    fn new(status: RelationStatus, m: Vec<Integer>, iterations: u64, final_h_nn1: Real, residual_bound: Real) -> Self {
        let gcd = m.iter().fold(Integer::new(), |acc, x| acc.gcd(x));
        Self { status, m, iterations, final_h_nn1, residual_bound, gcd, early_exit: false, trace: None }
    }
}

#[derive(Clone, Debug)]
pub struct PslqOptions {
    pub gamma: Gamma,
    /// Defaults to the iteration bound with the `n(n+1)` factor.
    pub max_iterations: Option<u64>,
    pub trace: bool,
    /// Stop as soon as any column of `B` meets the terminal residual bound.
    pub early_exit: bool,
}

impl PslqOptions {
    pub fn new(ctx: PrecisionContext) -> Self {
        Self { gamma: Gamma::two(ctx), max_iterations: None, trace: false, early_exit: false }
    }
}

/// Runs the ε₂-terminated loop on `H_α` and maps the relation back to the
/// caller's order.
pub fn run_pslq_epsilon(alpha: &UnitVector, eps2: &Real, options: &PslqOptions) -> Result<RelationResult, PslqError> {
    if eps2.is_sign_negative() || eps2.is_zero() {
        return Err(PslqError::NonPositiveThreshold);
    }
    let n = alpha.len();
    let h0 = build_h(alpha);
    let cap = options
        .max_iterations
        .unwrap_or_else(|| iteration_bound(n, &options.gamma, eps2, BoundExponent::Statement));
    let mut state = if options.trace {
        PslqState::traced(h0, options.gamma.clone(), Some(alpha.clone()))?
    } else {
        PslqState::new(h0, options.gamma.clone())?
    };
    let tail = alpha.tail_norm();
    let early_limit = &tail * eps2;
    let mut early_column = None;

    while state.h.corner_entry() >= *eps2 && state.iteration < cap {
        state.iterate()?;
        if options.early_exit {
            early_column = (0..n).find(|&c| row_times_column(alpha.entries(), &state.b, c).abs() <= early_limit);
            if early_column.is_some() {
                break;
            }
        }
    }

    let h_nn1 = state.h.corner_entry();
    let status = if h_nn1 < *eps2 || early_column.is_some() {
        RelationStatus::Found
    } else {
        RelationStatus::IterationCapExceeded
    };
    let column = early_column.unwrap_or(n - 2);
    let m = alpha.to_user_order(&state.b.column(column));
    let bound = &tail * &h_nn1;
    let mut result = RelationResult::new(status, m, state.iteration, h_nn1, bound);
    result.early_exit = early_column.is_some_and(|c| c != n - 2);
    result.trace = state.into_trace();
    Ok(result)
}

/// Normalizes `v` and runs [`run_pslq_epsilon`]; a vanishing entry returns the
/// corresponding unit vector without iterating.
pub fn find_relation(v: &[Real], eps2: &Real, options: &PslqOptions) -> Result<RelationResult, PslqError> {
    match normalize_and_permute(v)? {
        Normalized::Unit(alpha) => run_pslq_epsilon(&alpha, eps2, options),
        Normalized::Trivial(t) => {
            let ctx = v[0].context();
            Ok(RelationResult::new(RelationStatus::TrivialRelation, t.relation, 0, ctx.zero(), ctx.zero()))
        }
    }
}

/// Result of setting up [`ExactPslq`]: an exactly zero entry makes its unit
/// vector the relation and no iteration is needed.
#[derive(Clone, Debug)]
pub enum ExactStart {
    Running(ExactPslq),
    Trivial(Vec<Integer>),
}

/// PSLQ in exact rational arithmetic on the Gram–Schmidt data of `H`.
///
/// The corner rotation introduces square roots, so `H` itself is not kept.
/// Instead the state holds `μ_ij = h_ij / h_jj` and `d_j = h_jj²`, which stay
/// rational and determine every decision the real engine makes: the
/// multipliers `⌊μ_ij + 1/2⌋`, the swap weights `γ^(2j) d_j`, and the
/// termination test `h_{n,n-1} = 0 ⇔ μ_{n,n-1} = 0`.
#[derive(Clone, Debug)]
pub struct ExactPslq {
    mu: Vec<Vec<Rational>>,
    d: Vec<Rational>,
    gamma_sq_powers: Vec<Rational>,
    a: IntMatrix,
    b: IntMatrix,
    permutation: Vec<usize>,
    iteration: u64,
    swaps: Vec<usize>,
    half_ties: usize,
}

impl ExactPslq {
    /// Sets up the state for `alpha` with the same reordering the real engine
    /// uses (largest magnitude last) and performs the initial size reduction.
    pub fn new(alpha: &[Rational], gamma: &Gamma) -> Result<ExactStart, PslqError> {
        let n = alpha.len();
        if n < 2 || alpha.iter().all(|x| *x == 0) {
            return Err(PslqError::ExactInput);
        }
        if let Some(i) = alpha.iter().position(|x| *x == 0) {
            let mut m = vec![Integer::new(); n];
            m[i] = Integer::from(1);
            return Ok(ExactStart::Trivial(m));
        }
        let mut largest = 0;
        for i in 1..n {
            if Rational::from(alpha[i].abs_ref()) > Rational::from(alpha[largest].abs_ref()) {
                largest = i;
            }
        }
        let mut permutation: Vec<usize> = (0..n).collect();
        permutation.swap(largest, n - 1);
        let mut x: Vec<Rational> = permutation.iter().map(|&p| alpha[p].clone()).collect();
        if x[n - 1] < 0 {
            x = x.into_iter().map(|v| -v).collect();
        }

        // suffix[j] = x_j² + … + x_{n-1}²
        let mut suffix = vec![Rational::new(); n + 1];
        for j in (0..n).rev() {
            suffix[j] = &suffix[j + 1] + Rational::from(x[j].square_ref());
        }
        let mut d = vec![Rational::new(); n];
        let mut mu = vec![vec![Rational::new(); n - 1]; n];
        for j in 0..n - 1 {
            d[j] = Rational::from(&suffix[j + 1] / &suffix[j]);
            for i in j + 1..n {
                mu[i][j] = -Rational::from(&x[i] * &x[j]) / &suffix[j + 1];
            }
        }

        let gamma_rational = gamma.value().to_rational().ok_or(PslqError::GammaTooSmall)?;
        let gamma_sq = Rational::from(gamma_rational.square_ref());
        let mut gamma_sq_powers = Vec::with_capacity(n - 1);
        let mut acc = gamma_sq.clone();
        for _ in 0..n - 1 {
            gamma_sq_powers.push(acc.clone());
            acc *= &gamma_sq;
        }

        let mut state = Self {
            mu,
            d,
            gamma_sq_powers,
            a: IntMatrix::identity(n),
            b: IntMatrix::identity(n),
            permutation,
            iteration: 0,
            swaps: Vec::new(),
            half_ties: 0,
        };
        state.reduce();
        Ok(ExactStart::Running(state))
    }

    fn n(&self) -> usize {
        self.d.len()
    }

    fn reduce(&mut self) {
        let n = self.n();
        let half = Rational::from((1, 2));
        for i in 1..n {
            for j in (0..i).rev() {
                if *self.mu[i][j].denom() == 2 {
                    self.half_ties += 1;
                }
                let q = Rational::from(&self.mu[i][j] + &half).floor().numer().clone();
                if q == 0 {
                    continue;
                }
                for k in 0..j {
                    let delta = Rational::from(&self.mu[j][k] * &q);
                    self.mu[i][k] -= delta;
                }
                self.mu[i][j] -= &q;
                self.a.sub_row_multiple(i, j, &q);
                self.b.add_col_multiple(j, i, &q);
            }
        }
    }

    pub fn is_terminated(&self) -> bool {
        let n = self.n();
        self.mu[n - 1][n - 2] == 0
    }

    /// One swap / rotation / size-reduction round on the Gram–Schmidt data.
    pub fn iterate(&mut self) -> usize {
        let n = self.n();
        let mut r = 0;
        let mut best = Rational::from(&self.gamma_sq_powers[0] * &self.d[0]);
        for j in 1..n - 1 {
            let w = Rational::from(&self.gamma_sq_powers[j] * &self.d[j]);
            if w > best {
                r = j;
                best = w;
            }
        }

        let mu = self.mu[r + 1][r].clone();
        let big = &self.d[r + 1] + Rational::from(mu.square_ref()) * &self.d[r];
        let mu_new = Rational::from(&mu * &self.d[r]) / &big;
        self.d[r + 1] = Rational::from(&self.d[r] * &self.d[r + 1]) / &big;
        self.d[r] = big;
        for k in 0..r {
            let tmp = std::mem::take(&mut self.mu[r][k]);
            self.mu[r][k] = std::mem::replace(&mut self.mu[r + 1][k], tmp);
        }
        for i in r + 2..n {
            let t = self.mu[i][r + 1].clone();
            self.mu[i][r + 1] = &self.mu[i][r] - Rational::from(&mu * &t);
            self.mu[i][r] = t + Rational::from(&mu_new * &self.mu[i][r + 1]);
        }
        self.mu[r + 1][r] = mu_new;
        self.a.swap_rows(r, r + 1);
        self.b.swap_cols(r, r + 1);
        self.reduce();
        self.iteration += 1;
        self.swaps.push(r);
        r
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// 0-based swap rows in order.
    pub fn swaps(&self) -> &[usize] {
        &self.swaps
    }

    /// Multipliers taken at an exact half-integer, where a rounded real
    /// computation may legitimately round the other way.
    pub fn half_ties(&self) -> usize {
        self.half_ties
    }

    pub fn b(&self) -> &IntMatrix {
        &self.b
    }

    pub fn a(&self) -> &IntMatrix {
        &self.a
    }

    /// Column `n-2` of `B` in the caller's order.
    pub fn candidate(&self) -> Vec<Integer> {
        let n = self.n();
        let internal = self.b.column(n - 2);
        let mut out = internal.clone();
        for (k, &user) in self.permutation.iter().enumerate() {
            out[user] = internal[k].clone();
        }
        out
    }
}

/// Runs exact PSLQ until `h_{n,n-1} = 0`.
pub fn run_pslq_exact(alpha: &[Rational], gamma: &Gamma, max_iterations: Option<u64>) -> Result<RelationResult, PslqError> {
    let ctx = gamma.value().context();
    let mut state = match ExactPslq::new(alpha, gamma)? {
        ExactStart::Running(state) => state,
        ExactStart::Trivial(m) => return Ok(RelationResult::new(RelationStatus::TrivialRelation, m, 0, ctx.zero(), ctx.zero())),
    };
    let cap = max_iterations.unwrap_or(u64::MAX);
    while !state.is_terminated() && state.iteration < cap {
        state.iterate();
    }
    let status = if state.is_terminated() {
        RelationStatus::Found
    } else {
        RelationStatus::IterationCapExceeded
    };
    Ok(RelationResult::new(status, state.candidate(), state.iteration, ctx.zero(), ctx.zero()))
}
