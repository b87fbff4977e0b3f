//! Invariant suites run by `pslqe selftest`.

use std::time::Instant;

use pslqe::error_control::{self, h_perturbation_bound, PlanRequest};
use pslqe::hyperplane::{build_h, fro_norms, normalize_and_permute, principal_inverse, HyperplaneMatrix, UnitVector};
use pslqe::ingest::{brute_force_search, perturbation, verify_relation};
use pslqe::matrix::RealMatrix;
use pslqe::numerics::ConstantId;
use pslqe::pslq::{apply_swap, corner, find_relation, Gamma, PslqError, PslqOptions, PslqState};
use pslqe::{PrecisionContext, Real, RelationStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Integer;

/// A deliberate defect used to check that the suites can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the `(r, r+1)` entry of the corner matrix.
    CornerSign,
}

#[derive(Clone, Debug)]
pub struct SelftestConfig {
    pub digits: u32,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self { digits: 50, seed: 2024, fault: None }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
    pub seconds: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub type Suite = fn(&SelftestConfig) -> SuiteResult;

pub const SUITES: [(&str, Suite); 7] = [
    ("identities", identities),
    ("norms", norm_closed_forms),
    ("orthonormality", corner_orthonormality),
    ("loop-invariants", loop_invariants),
    ("perturbation", perturbation_lemma),
    ("forward-bound", forward_bound),
    ("oracle", oracle_agreement),
];

pub fn run_all(config: &SelftestConfig) -> Vec<SuiteResult> {
    SUITES.iter().map(|(_, suite)| suite(config)).collect()
}

struct Recorder {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
    start: Instant,
}

impl Recorder {
    fn new(name: &'static str) -> Self {
        Self { name, cases: 0, failures: Vec::new(), start: Instant::now() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult { name: self.name, cases: self.cases, failures: self.failures, seconds: self.start.elapsed().as_secs_f64() }
    }
}

fn context(config: &SelftestConfig) -> PrecisionContext {
    PrecisionContext::new(config.digits).expect("selftest precision is valid")
}

fn rng(config: &SelftestConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Entries uniform in `(-1, 1)` scaled by `10^u`, `u ∈ (-3, 0)`, so the
/// largest entry ranges from dominant to barely ahead.
fn random_vector(rng: &mut ChaCha8Rng, ctx: PrecisionContext, n: usize) -> Vec<Real> {
    (0..n)
        .map(|_| {
            let mut x: f64 = rng.random_range(-1.0..1.0);
            if x == 0.0 {
                x = 0.5;
            }
            ctx.from_f64(x * 10f64.powf(rng.random_range(-3.0..0.0)))
        })
        .collect()
}

fn random_unit(rng: &mut ChaCha8Rng, ctx: PrecisionContext, n: usize) -> UnitVector {
    normalize_and_permute(&random_vector(rng, ctx, n)).expect("n >= 2").unit().expect("nonzero entries")
}

/// Largest `|x|` with `x` a row of `α·H`.
fn left_kernel_defect(alpha: &UnitVector, h: &HyperplaneMatrix) -> Real {
    let ctx = alpha.context();
    let n = h.n();
    (0..n - 1)
        .map(|j| (0..n).fold(ctx.zero(), |acc, i| acc + &alpha.entries()[i] * h.get(i, j)).abs())
        .fold(ctx.zero(), |acc, x| acc.max(&x))
}

fn gram_defect(m: &RealMatrix) -> Real {
    let ctx = m.context().expect("nonempty");
    m.transpose().mul(m).sub(&RealMatrix::identity(ctx, m.cols())).max_abs()
}

/// Gauss–Jordan elimination with partial pivoting.
fn gauss_inverse(m: &RealMatrix) -> Option<RealMatrix> {
    let k = m.rows();
    let ctx = m.context()?;
    let mut a = m.clone();
    let mut inv = RealMatrix::identity(ctx, k);
    for col in 0..k {
        let pivot = (col..k).max_by(|&x, &y| a[(x, col)].abs().partial_cmp(&a[(y, col)].abs()).expect("finite"))?;
        if a[(pivot, col)].is_zero() {
            return None;
        }
        a.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let p = a[(col, col)].clone();
        for j in 0..k {
            a[(col, j)] = &a[(col, j)] / &p;
            inv[(col, j)] = &inv[(col, j)] / &p;
        }
        for i in 0..k {
            if i == col || a[(i, col)].is_zero() {
                continue;
            }
            let f = a[(i, col)].clone();
            for j in 0..k {
                a[(i, j)] = &a[(i, j)] - &(&f * &a[(col, j)]);
                inv[(i, j)] = &inv[(i, j)] - &(&f * &inv[(col, j)]);
            }
        }
    }
    Some(inv)
}

/// `αH = 0` and `HᵀH = I` for 200 random unit vectors, `n` from 2 to 12.
pub fn identities(config: &SelftestConfig) -> SuiteResult {
    let ctx = context(config);
    let tol = ctx.tolerance(5);
    let mut rng = rng(config, 1);
    let mut rec = Recorder::new("hyperplane identities");
    for k in 0..200 {
        let n = 2 + k % 11;
        let alpha = random_unit(&mut rng, ctx, n);
        let h = build_h(&alpha);
        let kernel = left_kernel_defect(&alpha, &h);
        let gram = gram_defect(h.as_matrix());
        rec.check(kernel < tol, || format!("case {k} (n = {n}): |αH| = {}", kernel.to_sci_string(3)));
        rec.check(gram < tol, || format!("case {k} (n = {n}): |HᵀH - I| = {}", gram.to_sci_string(3)));
        rec.cases += 1;
    }
    rec.finish()
}

/// Closed-form Frobenius norms and the closed-form inverse of the leading
/// block against direct summation and Gauss–Jordan elimination.
pub fn norm_closed_forms(config: &SelftestConfig) -> SuiteResult {
    let ctx = context(config);
    let mut rng = rng(config, 2);
    let mut rec = Recorder::new("norm closed forms");
    for k in 0..100 {
        let n = 2 + k % 11;
        let alpha = random_unit(&mut rng, ctx, n);
        let h = build_h(&alpha);
        let block = h.principal_block();
        let (h_norm, inv_norm) = fro_norms(&alpha);
        let Some(oracle) = gauss_inverse(&block) else {
            rec.failures.push(format!("case {k}: leading block is singular"));
            continue;
        };
        let scale = ctx.one().max(&inv_norm);
        let tol = ctx.tolerance(5) * &scale;
        let d1 = (&h_norm - &block.frobenius()).abs();
        let d2 = (&inv_norm - &oracle.frobenius()).abs();
        let d3 = principal_inverse(&alpha).sub(&oracle).max_abs();
        rec.check(d1 < tol, || format!("case {k}: ‖H‖_F closed form off by {}", d1.to_sci_string(3)));
        rec.check(d2 < tol, || format!("case {k}: ‖H⁻¹‖_F closed form off by {}", d2.to_sci_string(3)));
        rec.check(d3 < tol, || format!("case {k}: inverse entries off by {}", d3.to_sci_string(3)));
        rec.cases += 1;
    }
    rec.finish()
}

fn corner_pair(h: &HyperplaneMatrix, r: usize, fault: Option<Fault>) -> Result<(RealMatrix, RealMatrix), PslqError> {
    let (mut q, rotated) = corner(h, r)?;
    match fault {
        None => Ok((q, rotated.into_matrix())),
        Some(Fault::CornerSign) => {
            q[(r, r + 1)] = -q[(r, r + 1)].clone();
            let rotated = h.as_matrix().mul(&q);
            Ok((q, rotated))
        }
    }
}

/// The corner matrix is orthogonal, restores the zero at `(r, r+1)`, and
/// keeps the columns of `H` orthonormal.
pub fn corner_orthonormality(config: &SelftestConfig) -> SuiteResult {
    let ctx = context(config);
    let tol = ctx.tolerance(5);
    let mut rng = rng(config, 3);
    let mut rec = Recorder::new("corner orthonormality");
    for k in 0..100 {
        let n = 3 + k % 10;
        let alpha = random_unit(&mut rng, ctx, n);
        let r = rng.random_range(0..n - 2);
        let swapped = apply_swap(&build_h(&alpha), r);
        let (q, rotated) = match corner_pair(&swapped, r, config.fault) {
            Ok(pair) => pair,
            Err(e) => {
                rec.failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        let q_defect = gram_defect(&q);
        let h_defect = gram_defect(&rotated);
        let product = swapped.as_matrix().mul(&q).sub(&rotated).max_abs();
        let upper = rotated[(r, r + 1)].abs();
        rec.check(q_defect < tol, || format!("case {k} (n = {n}, r = {r}): |QᵀQ - I| = {}", q_defect.to_sci_string(3)));
        rec.check(h_defect < tol, || format!("case {k}: |H'ᵀH' - I| = {}", h_defect.to_sci_string(3)));
        rec.check(product < tol, || format!("case {k}: H' differs from H·Q by {}", product.to_sci_string(3)));
        rec.check(upper < tol, || format!("case {k}: h'[r][r+1] = {}", upper.to_sci_string(3)));
        rec.cases += 1;
    }
    rec.finish()
}

/// Independent entries followed by one dependent entry with small integer
/// coefficients; returns the vector and its planted relation.
fn planted(rng: &mut ChaCha8Rng, ctx: PrecisionContext, n: usize, coefficient_bound: i64) -> (Vec<Real>, Vec<Integer>) {
    let primes = [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31];
    let offset = rng.random_range(0..primes.len() - n);
    let mut v: Vec<Real> = (0..n - 1)
        .map(|i| ctx.constant(&ConstantId::Sqrt(primes[offset + i])).ln())
        .collect();
    let mut relation: Vec<Integer> = Vec::with_capacity(n);
    let mut last = ctx.zero();
    for x in &v {
        let c = rng.random_range(-coefficient_bound..=coefficient_bound);
        last = last + x * &ctx.from_i64(c);
        relation.push(Integer::from(c));
    }
    if relation.iter().all(|c| *c == 0) {
        relation[0] = Integer::from(1);
        last = v[0].clone();
    }
    v.push(last);
    relation.push(Integer::from(-1));
    (v, relation)
}

/// Traced runs on 50 random instances (`n ≤ 8`): every per-iteration
/// invariant holds, and `|det A| = 1` throughout.
pub fn loop_invariants(config: &SelftestConfig) -> SuiteResult {
    let ctx = context(config);
    let eps2 = ctx.pow10(-(config.digits as i32) / 2);
    let gamma = Gamma::two(ctx);
    let mut rng = rng(config, 4);
    let mut rec = Recorder::new("loop invariants");
    for k in 0..50 {
        let n = 3 + k % 6;
        let (v, _) = planted(&mut rng, ctx, n, 9);
        let alpha = match normalize_and_permute(&v).map(|x| x.unit()) {
            Ok(Some(a)) => a,
            _ => continue,
        };
        let mut state = match PslqState::traced(build_h(&alpha), gamma.clone(), Some(alpha.clone())) {
            Ok(s) => s,
            Err(e) => {
                rec.failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        while state.h().corner_entry() >= eps2 && state.iteration() < 5_000 {
            if let Err(e) = state.iterate() {
                rec.failures.push(format!("case {k}: {e}"));
                break;
            }
            let det = state.a().determinant();
            rec.check(det.clone().abs() == 1, || format!("case {k}, iteration {}: det A = {det}", state.iteration()));
        }
        rec.check(state.h().corner_entry() < eps2, || format!("case {k}: no termination within 5000 iterations"));
        if let Some(trace) = state.trace() {
            for v in &trace.violations {
                rec.failures.push(format!("case {k} (n = {n}): {v}"));
            }
        }
        rec.cases += 1;
    }
    rec.finish()
}

/// `‖H_α - H_ᾱ‖_F < 8 n^{3/2} ‖α - ᾱ‖` on 100 pairs with `‖α - ᾱ‖ < 1/(8n)`.
pub fn perturbation_lemma(config: &SelftestConfig) -> SuiteResult {
    let ctx = context(config);
    let mut rng = rng(config, 5);
    let mut rec = Recorder::new("hyperplane perturbation");
    for k in 0..100 {
        let n = 2 + k % 11;
        let alpha = random_unit(&mut rng, ctx, n);
        let radius = ctx.one() / ctx.from_i64(8 * n as i64) * ctx.from_f64(10f64.powf(rng.random_range(-8.0..0.0)));
        let noise = perturbation(n, &radius, rng.random());
        let distance = noise.iter().fold(ctx.zero(), |acc, x| acc + x.square()).sqrt();
        if distance.is_zero() {
            continue;
        }
        let approx = alpha.perturbed(&noise);
        let gap = build_h(&alpha).as_matrix().sub(build_h(&approx).as_matrix()).frobenius();
        match h_perturbation_bound(n, &distance) {
            Ok(bound) => rec.check(gap < bound, || {
                format!("case {k} (n = {n}): ‖ΔH‖_F = {} ≥ {}", gap.to_sci_string(4), bound.to_sci_string(4))
            }),
            Err(e) => rec.failures.push(format!("case {k}: {e}")),
        }
        rec.cases += 1;
    }
    rec.finish()
}

/// 50 planned runs on data perturbed within `ε₁`: the residual of the exact
/// vector stays below `C (‖m‖ ε₃ + α_n ε₂)`.
pub fn forward_bound(config: &SelftestConfig) -> SuiteResult {
    let ctx = context(config);
    let mut rng = rng(config, 6);
    let mut rec = Recorder::new("forward bound");
    for k in 0..50 {
        let n = 3 + k % 4;
        let (v, _) = planted(&mut rng, ctx, n, 6);
        let norm = v.iter().fold(ctx.zero(), |acc, x| acc + x.square()).sqrt();
        let alpha: Vec<Real> = v.iter().map(|x| x / &norm).collect();
        let Ok(Some(unit)) = normalize_and_permute(&alpha).map(|x| x.unit()) else {
            continue;
        };
        let exponent = rng.random_range(6..(config.digits as i32 / 2));
        let mut request = PlanRequest::new(ctx.pow10(-exponent), ctx.from_i64(10), n, unit.last().clone());
        request.omega = ctx.from_f64(rng.random_range(0.1..0.9));
        let plan = match error_control::plan(&request) {
            Ok(p) => p,
            Err(e) => {
                rec.failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        let noisy: Vec<Real> = alpha
            .iter()
            .zip(perturbation(n, &plan.eps1, rng.random()))
            .map(|(a, e)| a + &e)
            .collect();
        let result = match find_relation(&noisy, &plan.eps2, &PslqOptions::new(ctx)) {
            Ok(r) => r,
            Err(e) => {
                rec.failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        if result.status != RelationStatus::Found {
            rec.failures.push(format!("case {k}: search ended with {:?}", result.status));
            continue;
        }
        let residual = verify_relation(&alpha, &result.m).expect("same length");
        let norm_m = result.m.iter().fold(ctx.zero(), |acc, x| acc + ctx.from_integer(x).square()).sqrt();
        match error_control::forward_bound(&norm_m, &plan.eps2, &plan.eps3, n, &plan.alpha_n) {
            Ok(bound) => rec.check(residual < bound, || {
                format!("case {k} (n = {n}): |⟨α, m⟩| = {} ≥ {}", residual.to_sci_string(4), bound.to_sci_string(4))
            }),
            Err(e) => rec.failures.push(format!("case {k}: {e}")),
        }
        rec.cases += 1;
    }
    rec.finish()
}

/// 30 small instances (`n ≤ 4`, coefficients up to 30): the search agrees
/// with exhaustive enumeration on whether a relation exists, and its residual
/// is within the forward bound.
pub fn oracle_agreement(config: &SelftestConfig) -> SuiteResult {
    const BOUND: u32 = 30;
    let ctx = context(config);
    let tol = ctx.tolerance(10);
    let mut rng = rng(config, 7);
    let mut rec = Recorder::new("oracle agreement");
    for k in 0..30 {
        let n = 2 + k % 3;
        let with_relation = k % 2 == 0;
        let v: Vec<Real> = if with_relation {
            planted(&mut rng, ctx, n, i64::from(BOUND)).0
        } else {
            let offset = rng.random_range(0..4u64);
            (0..n as u64).map(|i| ctx.constant(&ConstantId::Sqrt([2, 3, 5, 7, 11, 13, 17][(offset + i) as usize])).ln()).collect()
        };
        let norm = v.iter().fold(ctx.zero(), |acc, x| acc + x.square()).sqrt();
        let alpha: Vec<Real> = v.iter().map(|x| x / &norm).collect();
        let Ok(Some(unit)) = normalize_and_permute(&alpha).map(|x| x.unit()) else {
            continue;
        };
        let request = PlanRequest::new(ctx.pow10(-20), ctx.from_i64(i64::from(BOUND)), n, unit.last().clone());
        let plan = match error_control::plan(&request) {
            Ok(p) => p,
            Err(e) => {
                rec.failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        let Some(oracle) = brute_force_search(&alpha, BOUND) else {
            rec.failures.push(format!("case {k}: brute force declined"));
            continue;
        };
        let oracle_has = oracle.best_residual < tol;
        rec.check(oracle_has == with_relation, || format!("case {k}: oracle disagrees with the construction"));

        let result = match find_relation(&alpha, &plan.eps2, &PslqOptions::new(ctx)) {
            Ok(r) => r,
            Err(e) => {
                rec.failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        let residual = verify_relation(&alpha, &result.m).expect("same length");
        let in_box = result.m.iter().all(|x| x.clone().abs() <= BOUND);
        let search_has = result.status == RelationStatus::Found && in_box && residual < tol;
        rec.check(search_has == oracle_has, || {
            format!("case {k} (n = {n}): search {} a relation, oracle {}", found_word(search_has), found_word(oracle_has))
        });
        if search_has && oracle_has {
            let same = crate::report::same_up_to_sign(&result.m, &oracle.best);
            rec.check(same, || format!("case {k}: search and oracle return different relations"));
        }
        if result.status == RelationStatus::Found {
            let norm_m = result.m.iter().fold(ctx.zero(), |acc, x| acc + ctx.from_integer(x).square()).sqrt();
            match error_control::forward_bound(&norm_m, &plan.eps2, &plan.eps3, n, &plan.alpha_n) {
                Ok(bound) => rec.check(residual < bound, || {
                    format!("case {k}: residual {} ≥ bound {}", residual.to_sci_string(4), bound.to_sci_string(4))
                }),
                Err(e) => rec.failures.push(format!("case {k}: {e}")),
            }
        }
        rec.cases += 1;
    }
    rec.finish()
}

fn found_word(found: bool) -> &'static str {
    if found {
        "found"
    } else {
        "did not find"
    }
}
