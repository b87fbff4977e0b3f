//! Input vectors: decimal files, constant expressions, algebraic power
//! vectors, controlled perturbations, and a brute-force relation oracle.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{parse_decimal, significant_digits, ConstantId, PrecisionContext, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("no values in input")]
    Empty,
    #[error("line {line}: cannot parse `{text}` as a decimal number")]
    Parse { line: usize, text: String },
    #[error("line {line}: malformed header `{text}`")]
    Header { line: usize, text: String },
    #[error("dimension mismatch: vector has {expected} entries, relation has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("expression `{text}`: {reason}")]
    Expression { text: String, reason: String },
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("base of a power vector must be nonzero")]
    ZeroBase,
}

/// A parsed vector file.
#[derive(Clone, Debug)]
pub struct VectorFile {
    pub values: Vec<Real>,
    /// Value of an `@digits N` header, when present.
    pub header_digits: Option<u32>,
    /// Under-precision notices, one per short literal.
    pub warnings: Vec<String>,
    /// Fewest significant digits among the non-integer literals.
    pub min_significant_digits: Option<usize>,
}

/// Parses the vector file format: one decimal literal per line, `#` comments,
/// blank lines ignored, an optional `@digits N` header.
pub fn parse_vector(text: &str, ctx: PrecisionContext) -> Result<VectorFile, IngestError> {
    let mut values = Vec::new();
    let mut warnings = Vec::new();
    let mut header_digits = None;
    let mut min_significant_digits: Option<usize> = None;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("@digits") {
            if !values.is_empty() || header_digits.is_some() {
                return Err(IngestError::Header { line, text: content.to_string() });
            }
            let digits = rest.trim().parse::<u32>().map_err(|_| IngestError::Header { line, text: content.to_string() })?;
            header_digits = Some(digits);
            continue;
        }
        let exact = parse_decimal(content).ok_or_else(|| IngestError::Parse { line, text: content.to_string() })?;
        let written = significant_digits(content);
        if *exact.denom() != 1 {
            min_significant_digits = Some(min_significant_digits.map_or(written, |m| m.min(written)));
        }
        if written < ctx.digits() as usize && *exact.denom() != 1 {
            warnings.push(format!(
                "line {line}: literal carries {written} significant digits, fewer than the working precision of {}",
                ctx.digits()
            ));
        }
        values.push(ctx.from_rational(&exact));
    }
    if values.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(VectorFile { values, header_digits, warnings, min_significant_digits })
}

/// Reads the same format as [`parse_vector`] without rounding; entries may
/// also be written as fractions `p/q`.
pub fn parse_rational_vector(text: &str) -> Result<Vec<Rational>, IngestError> {
    let mut values = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() || content.starts_with("@digits") {
            continue;
        }
        let value = parse_rational(content).ok_or_else(|| IngestError::Parse { line: index + 1, text: content.to_string() })?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(values)
}

/// A decimal literal or a fraction of two integers.
pub fn parse_rational(text: &str) -> Option<Rational> {
    match text.split_once('/') {
        Some((num, den)) => {
            let num: Integer = num.trim().parse().ok()?;
            let den: Integer = den.trim().parse().ok()?;
            (den != 0).then(|| Rational::from((num, den)))
        }
        None => parse_decimal(text.trim()),
    }
}

pub fn read_vector(path: &Path, ctx: PrecisionContext) -> Result<VectorFile, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io { path: path.to_path_buf(), reason: e.to_string() })?;
    parse_vector(&text, ctx)
}

/// `(base^degree, base^(degree-1), …, base, 1)`.
pub fn algebraic_power_vector(base: &Real, degree: u32) -> Result<Vec<Real>, IngestError> {
    if degree == 0 {
        return Err(IngestError::ZeroDegree);
    }
    if base.is_zero() {
        return Err(IngestError::ZeroBase);
    }
    let ctx = base.context();
    let mut out = Vec::with_capacity(degree as usize + 1);
    let mut acc = ctx.one();
    for _ in 0..=degree {
        out.push(acc.clone());
        acc = &acc * base;
    }
    out.reverse();
    Ok(out)
}

/// `v + e` with `e` uniform in direction and `‖e‖ = u·eps1`, `u ∈ [0, 1)`;
/// the same seed always yields the same `e`.
pub fn perturb(v: &[Real], eps1: &Real, seed: u64) -> Vec<Real> {
    let noise = perturbation(v.len(), eps1, seed);
    v.iter().zip(&noise).map(|(x, e)| x + e).collect()
}

/// The noise vector used by [`perturb`].
pub fn perturbation(n: usize, eps1: &Real, seed: u64) -> Vec<Real> {
    let ctx = eps1.context();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direction: Vec<Real> = loop {
        let raw: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if raw.iter().any(|x| *x != 0.0) {
            break raw.into_iter().map(|x| ctx.from_f64(x)).collect();
        }
    };
    let norm = direction.iter().fold(ctx.zero(), |acc, x| acc + x.square()).sqrt();
    let radius = eps1 * &ctx.from_f64(rng.random::<f64>()) / &norm;
    direction.iter().map(|x| x * &radius).collect()
}

/// `|⟨α, m⟩|` at the working precision of `alpha`.
pub fn verify_relation(alpha: &[Real], m: &[Integer]) -> Result<Real, IngestError> {
    if alpha.len() != m.len() {
        return Err(IngestError::DimensionMismatch { expected: alpha.len(), got: m.len() });
    }
    if alpha.is_empty() {
        return Err(IngestError::Empty);
    }
    let ctx = alpha[0].context();
    Ok(alpha.iter().zip(m).fold(ctx.zero(), |acc, (a, k)| acc + a * k).abs())
}

/// Everything an exhaustive search over `‖m‖∞ ≤ bound` learns.
#[derive(Clone, Debug)]
pub struct BruteForceReport {
    /// Best vector under the ranking (residual, 2-norm, sign, lexicographic).
    pub best: Vec<Integer>,
    pub best_residual: Real,
    /// Smallest residual among vectors that are not multiples of `best`.
    pub runner_up_residual: Option<Real>,
}

/// Exhaustive search for the integer vector with `‖m‖∞ ≤ inf_bound`
/// minimizing `|⟨α, m⟩|`.
///
/// The coordinate with the largest `|α_i|` is solved for: for every choice of
/// the others, only the nearest admissible value can be optimal. Candidates
/// are screened in `f64` and the survivors re-evaluated at full precision.
/// Among residuals that agree to working precision the smaller 2-norm wins,
/// then the vector whose first nonzero entry is positive, then lexicographic
/// order.
pub fn brute_force_search(alpha: &[Real], inf_bound: u32) -> Option<BruteForceReport> {
    let n = alpha.len();
    if n < 2 || inf_bound == 0 {
        return None;
    }
    let ctx = alpha[0].context();
    let pivot = (0..n)
        .max_by(|&a, &b| alpha[a].abs().partial_cmp(&alpha[b].abs()).expect("finite entries").then(b.cmp(&a)))
        .expect("nonempty");
    let scale = alpha.iter().map(|a| a.abs().to_f64()).fold(0.0, f64::max);
    let coarse: Vec<f64> = alpha.iter().map(|a| a.to_f64() / scale).collect();
    let others: Vec<usize> = (0..n).filter(|&i| i != pivot).collect();
    let bound = i64::from(inf_bound);

    let screened = screen(&coarse, pivot, &others, bound);
    let zero_tol = ctx.tolerance(5) * (n as i64 * bound) * &ctx.from_f64(scale.max(1.0));

    let ranked = |m: &[i64]| -> (Real, i64) {
        let ints: Vec<Integer> = m.iter().map(|&x| Integer::from(x)).collect();
        let r = verify_relation(alpha, &ints).expect("matching dimensions");
        (r, m.iter().map(|x| x * x).sum())
    };
    let mut evaluated: Vec<(Real, i64, Vec<i64>)> = screened
        .into_iter()
        .map(|m| {
            let m = canonical_sign(m);
            let (r, norm2) = ranked(&m);
            (r, norm2, m)
        })
        .collect();
    evaluated.sort_by(|a, b| {
        let ra = if a.0 < zero_tol { ctx.zero() } else { a.0.clone() };
        let rb = if b.0 < zero_tol { ctx.zero() } else { b.0.clone() };
        ra.partial_cmp(&rb).expect("finite").then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });
    let (best_residual, _, best) = evaluated.first().cloned()?;
    let runner_up_residual = evaluated.iter().find(|(_, _, m)| !parallel(m, &best)).map(|(r, _, _)| r.clone());
    Some(BruteForceReport { best: best.iter().map(|&x| Integer::from(x)).collect(), best_residual, runner_up_residual })
}

/// [`brute_force_search`] reduced to the relation, returned only when its
/// residual is below `residual_tol`.
pub fn brute_force_relation(alpha: &[Real], inf_bound: u32, residual_tol: &Real) -> Option<Vec<Integer>> {
    let report = brute_force_search(alpha, inf_bound)?;
    (report.best_residual < *residual_tol).then_some(report.best)
}

/// `f64` sweep keeping every candidate that could still be the best or the
/// best non-parallel vector once re-evaluated exactly.
fn screen(alpha: &[f64], pivot: usize, others: &[usize], bound: i64) -> Vec<Vec<i64>> {
    let n = alpha.len();
    let noise = 1e-12 * (n as f64) * (bound as f64);
    let mut keep: Vec<(f64, Vec<i64>)> = Vec::new();
    let mut threshold = f64::INFINITY;
    let mut prefix = vec![-bound; others.len()];
    // the prefix enumerates the non-pivot coordinates; halving by requiring
    // the first nonzero one to be positive
    let mut m = vec![0i64; n];
    loop {
        if let Some(first) = prefix.iter().find(|x| **x != 0) {
            if *first > 0 {
                let partial: f64 = others.iter().zip(&prefix).map(|(&i, &x)| alpha[i] * x as f64).sum();
                let solved = (-partial / alpha[pivot]).round().clamp(-bound as f64, bound as f64) as i64;
                for candidate in [solved - 1, solved, solved + 1] {
                    if candidate.abs() > bound {
                        continue;
                    }
                    let residual = (partial + alpha[pivot] * candidate as f64).abs();
                    if residual <= threshold + noise {
                        for (&i, &x) in others.iter().zip(&prefix) {
                            m[i] = x;
                        }
                        m[pivot] = candidate;
                        keep.push((residual, m.clone()));
                        if keep.len() > 4096 {
                            threshold = prune(&mut keep, noise);
                        }
                    }
                }
            }
        }
        if !advance(&mut prefix, bound) {
            break;
        }
    }
    let mut pivot_only = vec![0i64; n];
    pivot_only[pivot] = 1;
    keep.push((alpha[pivot].abs(), pivot_only));
    prune(&mut keep, noise);
    keep.into_iter().map(|(_, m)| m).collect()
}

/// Keeps the candidates within `noise` of the two smallest non-parallel
/// residual classes and returns the new admission threshold.
fn prune(keep: &mut Vec<(f64, Vec<i64>)>, noise: f64) -> f64 {
    keep.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best = keep[0].1.clone();
    let best_residual = keep[0].0;
    let second = keep.iter().find(|(_, m)| !parallel(m, &best)).map_or(f64::INFINITY, |(r, _)| *r);
    let threshold = second.max(best_residual);
    keep.retain(|(r, _)| *r <= threshold + noise);
    threshold
}

fn advance(prefix: &mut [i64], bound: i64) -> bool {
    for x in prefix.iter_mut().rev() {
        if *x < bound {
            *x += 1;
            return true;
        }
        *x = -bound;
    }
    false
}

fn canonical_sign(mut m: Vec<i64>) -> Vec<i64> {
    if m.iter().find(|x| **x != 0).is_some_and(|x| *x < 0) {
        for x in &mut m {
            *x = -*x;
        }
    }
    m
}

fn parallel(a: &[i64], b: &[i64]) -> bool {
    (0..a.len()).all(|i| (i + 1..a.len()).all(|j| i128::from(a[i]) * i128::from(b[j]) == i128::from(a[j]) * i128::from(b[i])))
}

/// How an input vector is produced; recorded in reports so runs can be repeated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorSpec {
    File { path: PathBuf },
    AlgebraicPowers { base: String, degree: u32 },
    ConstantList { entries: Vec<String> },
}

impl VectorSpec {
    pub fn materialize(&self, ctx: PrecisionContext) -> Result<Materialized, IngestError> {
        match self {
            VectorSpec::File { path } => {
                let file = read_vector(path, ctx)?;
                Ok(Materialized { values: file.values, warnings: file.warnings, min_significant_digits: file.min_significant_digits })
            }
            VectorSpec::AlgebraicPowers { base, degree } => {
                let base = evaluate(base, ctx)?;
                Ok(Materialized { values: algebraic_power_vector(&base, *degree)?, warnings: Vec::new(), min_significant_digits: None })
            }
            VectorSpec::ConstantList { entries } => {
                let values = entries.iter().map(|e| evaluate(e, ctx)).collect::<Result<Vec<_>, _>>()?;
                if values.is_empty() {
                    return Err(IngestError::Empty);
                }
                Ok(Materialized { values, warnings: Vec::new(), min_significant_digits: None })
            }
        }
    }

    /// The entries as exact rationals, for specs that are purely literal.
    pub fn exact_values(&self) -> Result<Vec<Rational>, IngestError> {
        match self {
            VectorSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io { path: path.clone(), reason: e.to_string() })?;
                parse_rational_vector(&text)
            }
            VectorSpec::ConstantList { entries } => {
                if entries.is_empty() {
                    return Err(IngestError::Empty);
                }
                entries
                    .iter()
                    .enumerate()
                    .map(|(i, e)| parse_rational(e).ok_or_else(|| IngestError::Parse { line: i + 1, text: e.clone() }))
                    .collect()
            }
            VectorSpec::AlgebraicPowers { base, .. } => Err(IngestError::Expression {
                text: base.clone(),
                reason: "power vectors have no exact rational form".into(),
            }),
        }
    }

    pub fn len_hint(&self) -> Option<usize> {
        match self {
            VectorSpec::File { .. } => None,
            VectorSpec::AlgebraicPowers { degree, .. } => Some(*degree as usize + 1),
            VectorSpec::ConstantList { entries } => Some(entries.len()),
        }
    }
}

impl fmt::Display for VectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorSpec::File { path } => write!(f, "file {}", path.display()),
            VectorSpec::AlgebraicPowers { base, degree } => write!(f, "powers of {base} up to degree {degree}"),
            VectorSpec::ConstantList { entries } => write!(f, "({})", entries.join(", ")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Materialized {
    pub values: Vec<Real>,
    pub warnings: Vec<String>,
    /// Set for file input: the shortest non-integer literal, which limits
    /// how accurately the data is known.
    pub min_significant_digits: Option<usize>,
}

/// The worked examples used throughout the tests and the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `(t, 1, ln 2, ln² 2, π²)` with `t = 5 - 4 ln 2 + 16 ln² 2 - π²`.
    Example1,
    /// Powers of `(3^(1/5) + 2^(1/4))^(-1)` up to degree 20.
    Example2,
    /// Powers of `(3^(1/7) + 2^(1/7))^(-1)` up to degree 49.
    Example3,
}

impl Preset {
    pub fn spec(self) -> VectorSpec {
        match self {
            Preset::Example1 => VectorSpec::ConstantList {
                entries: ["5 - 4*ln2 + 16*ln2^2 - pi^2", "1", "ln2", "ln2^2", "pi^2"].map(String::from).to_vec(),
            },
            Preset::Example2 => VectorSpec::AlgebraicPowers { base: "1/(nthroot(3,5) + nthroot(2,4))".into(), degree: 20 },
            Preset::Example3 => VectorSpec::AlgebraicPowers { base: "1/(nthroot(3,7) + nthroot(2,7))".into(), degree: 49 },
        }
    }

    /// `(ε exponent, G)` used for the published runs.
    pub fn published_budget(self) -> (i32, u64) {
        match self {
            Preset::Example1 => (-6, 16),
            Preset::Example2 => (-89, 7440),
            Preset::Example3 => (-487, 966_420_105),
        }
    }

    /// The relation reported for the example, when it is short enough to list.
    pub fn published_relation(self) -> Option<Vec<i64>> {
        match self {
            Preset::Example1 => Some(vec![1, -5, 4, -16, 1]),
            Preset::Example2 => Some(vec![
                49, -1080, 3960, -3360, 80, -108, -6120, -7440, -80, 0, 54, -1560, 40, 0, 0, -12, -10, 0, 0, 0, 1,
            ]),
            Preset::Example3 => None,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "example1" | "1" => Ok(Preset::Example1),
            "example2" | "2" => Ok(Preset::Example2),
            "example3" | "3" => Ok(Preset::Example3),
            other => Err(format!("unknown preset `{other}` (expected example1, example2 or example3)")),
        }
    }
}

/// Evaluates a constant expression: decimal literals, `pi`, `ln2`, `sqrt(k)`,
/// `nthroot(k,d)`, parentheses, `+ - * /`, and `^` with an integer exponent.
pub fn evaluate(text: &str, ctx: PrecisionContext) -> Result<Real, IngestError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens: &tokens, pos: 0, ctx, text };
    let value = parser.expr()?;
    if parser.pos != tokens.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    if !value.is_finite() {
        return Err(parser.error("value is not finite"));
    }
    Ok(value)
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(String),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Token>, IngestError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            tokens.push(Token::Number(chars[start..i].iter().collect()));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            tokens.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            tokens.push(Token::Op(c));
            i += 1;
        } else {
            return Err(IngestError::Expression { text: text.to_string(), reason: format!("unexpected character `{c}`") });
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    ctx: PrecisionContext,
    text: &'a str,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> IngestError {
        IngestError::Expression { text: self.text.to_string(), reason: reason.to_string() }
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> Result<(), IngestError> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Real, IngestError> {
        let mut value = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            value = if op == '+' { value + rhs } else { value - rhs };
        }
        Ok(value)
    }

    fn term(&mut self) -> Result<Real, IngestError> {
        let mut value = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            if op == '/' && rhs.is_zero() {
                return Err(self.error("division by zero"));
            }
            value = if op == '*' { value * rhs } else { value / rhs };
        }
        Ok(value)
    }

    fn unary(&mut self) -> Result<Real, IngestError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
        }
        self.power()
    }

    fn power(&mut self) -> Result<Real, IngestError> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let negative = self.peek_op() == Some('-');
            if negative {
                self.pos += 1;
            }
            let exponent = match self.tokens.get(self.pos) {
                Some(Token::Number(s)) => s.parse::<i32>().map_err(|_| self.error("exponent must be an integer"))?,
                _ => return Err(self.error("exponent must be an integer literal")),
            };
            self.pos += 1;
            return Ok(base.powi(if negative { -exponent } else { exponent }));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Real, IngestError> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Number(s)) => {
                self.pos += 1;
                let exact = parse_decimal(&s).ok_or_else(|| self.error("bad number"))?;
                Ok(self.ctx.from_rational(&exact))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let value = self.expr()?;
                self.expect(')')?;
                Ok(value)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                let mut call = name.clone();
                if self.peek_op() == Some('(') {
                    self.pos += 1;
                    let mut args = Vec::new();
                    loop {
                        match self.tokens.get(self.pos) {
                            Some(Token::Number(s)) => args.push(s.clone()),
                            _ => return Err(self.error("function arguments must be integer literals")),
                        }
                        self.pos += 1;
                        if self.peek_op() == Some(',') {
                            self.pos += 1;
                            continue;
                        }
                        self.expect(')')?;
                        break;
                    }
                    call = format!("{name}({})", args.join(","));
                }
                let id: ConstantId = call.parse().map_err(|_| self.error(&format!("unknown constant `{call}`")))?;
                Ok(self.ctx.constant(&id))
            }
            _ => Err(self.error("expected a number, constant or `(`")),
        }
    }
}
