//! Arbitrary-precision real arithmetic under an explicit decimal-digit budget.
//!
//! Every [`Real`] carries the [`PrecisionContext`] it was produced under. Binary
//! operations run at the larger of the two operand precisions, so mixing a
//! coarse constant into a fine computation never silently degrades it.
//!
//! The backing store is an MPFR float; each basic operation is correctly
//! rounded to the context's bit precision, which over-provisions the decimal
//! budget by [`GUARD_BITS`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use rug::float::{Constant, Round};
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use thiserror::Error;

/// Extra binary digits carried beyond the decimal budget.
pub const GUARD_BITS: u32 = 16;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumericsError {
    #[error("precision of {0} digits is below the minimum of {min}", min = PrecisionContext::MIN_DIGITS)]
    PrecisionTooLow(u32),
    #[error("unsupported constant `{0}`")]
    UnsupportedConstant(String),
    #[error("cannot parse `{0}` as a decimal number")]
    Parse(String),
}

/// Working precision, in significant decimal digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrecisionContext {
    digits: u32,
}

/// Builds a context with `digits` decimal digits of working precision.
pub fn with_precision(digits: u32) -> Result<PrecisionContext, NumericsError> {
    PrecisionContext::new(digits)
}

impl PrecisionContext {
    pub const MIN_DIGITS: u32 = 10;

    pub fn new(digits: u32) -> Result<Self, NumericsError> {
        if digits < Self::MIN_DIGITS {
            return Err(NumericsError::PrecisionTooLow(digits));
        }
        Ok(Self { digits })
    }

    pub fn digits(self) -> u32 {
        self.digits
    }

    /// Binary precision used for every value under this context.
    pub fn bits(self) -> u32 {
        (f64::from(self.digits) * LOG2_10).ceil() as u32 + GUARD_BITS
    }

    fn wrap(self, value: Float) -> Real {
        Real { value, ctx: self }
    }

    pub fn zero(self) -> Real {
        self.wrap(Float::new(self.bits()))
    }

    pub fn one(self) -> Real {
        self.from_i64(1)
    }

    pub fn from_i64(self, v: i64) -> Real {
        self.wrap(Float::with_val(self.bits(), v))
    }

    pub fn from_f64(self, v: f64) -> Real {
        self.wrap(Float::with_val(self.bits(), v))
    }

    pub fn from_integer(self, v: &Integer) -> Real {
        self.wrap(Float::with_val(self.bits(), v))
    }

    pub fn from_rational(self, v: &Rational) -> Real {
        self.wrap(Float::with_val(self.bits(), v))
    }

    /// `10^e`, rounded to the context.
    pub fn pow10(self, e: i32) -> Real {
        let ten = Float::with_val(self.bits(), 10);
        self.wrap(Float::with_val(self.bits(), ten.pow(e)))
    }

    /// `10^-(digits - slack)`: the agreement level expected of quantities that
    /// lose about `slack` digits to cancellation.
    pub fn tolerance(self, slack: u32) -> Real {
        let exponent = self.digits.saturating_sub(slack) as i32;
        self.pow10(-exponent)
    }

    /// Parses a decimal literal (`-1.25`, `3e-7`, `.5`) or a serialized
    /// [`Real`] (`1.25e0@50`). A serialized value keeps this context; its
    /// `@digits` suffix is ignored here.
    pub fn parse(self, text: &str) -> Result<Real, NumericsError> {
        let body = text.trim();
        let body = body.split_once('@').map_or(body, |(v, _)| v).trim();
        let literal = parse_decimal(body).ok_or_else(|| NumericsError::Parse(text.to_string()))?;
        Ok(self.from_rational(&literal))
    }

    pub fn constant(self, id: &ConstantId) -> Real {
        eval_constant(id, self)
    }
}

/// Exact value of a plain decimal literal.
pub(crate) fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from(digits.parse::<Integer>().ok()?);
    let scale = exponent.checked_sub(i32::try_from(frac_part.len()).ok()?)?;
    let power = Rational::from(Integer::from(10).pow(scale.unsigned_abs()));
    if scale >= 0 {
        value *= power;
    } else {
        value /= power;
    }
    if negative {
        value = -value;
    }
    Some(value)
}

/// Number of significant decimal digits written in a literal.
pub(crate) fn significant_digits(text: &str) -> usize {
    let mantissa = text.split(['e', 'E']).next().unwrap_or("");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let trimmed = digits.trim_start_matches('0');
    if trimmed.is_empty() {
        1
    } else {
        trimmed.len()
    }
}

/// An arbitrary-precision real number tied to the context it was computed in.
#[derive(Clone, Debug)]
pub struct Real {
    value: Float,
    ctx: PrecisionContext,
}

impl Real {
    pub fn context(&self) -> PrecisionContext {
        self.ctx
    }

    pub fn as_float(&self) -> &Float {
        &self.value
    }

    /// Re-rounds the value into another context.
    pub fn with_context(&self, ctx: PrecisionContext) -> Real {
        ctx.wrap(Float::with_val(ctx.bits(), &self.value))
    }

    fn unary(&self, value: Float) -> Real {
        self.ctx.wrap(value)
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.value.is_sign_negative() && !self.value.is_zero()
    }

    pub fn abs(&self) -> Real {
        self.unary(self.value.clone().abs())
    }

    pub fn sqrt(&self) -> Real {
        self.unary(self.value.clone().sqrt())
    }

    pub fn square(&self) -> Real {
        self.unary(self.value.clone().square())
    }

    pub fn recip(&self) -> Real {
        self.unary(self.value.clone().recip())
    }

    pub fn powi(&self, e: i32) -> Real {
        self.unary(Float::with_val(self.ctx.bits(), (&self.value).pow(e)))
    }

    pub fn ln(&self) -> Real {
        self.unary(self.value.clone().ln())
    }

    pub fn max(&self, other: &Real) -> Real {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Nearest `f64`; tiny or huge values saturate.
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }

    /// `log10 |x|` as an `f64`, valid far outside the `f64` exponent range.
    pub fn log10_abs(&self) -> f64 {
        if self.value.is_zero() {
            return f64::NEG_INFINITY;
        }
        let (mantissa, exp) = self.value.to_f64_exp();
        mantissa.abs().log10() + f64::from(exp) * std::f64::consts::LOG10_2
    }

    /// `ln |x|` as an `f64`, valid far outside the `f64` exponent range.
    pub fn ln_abs(&self) -> f64 {
        self.log10_abs() * std::f64::consts::LN_10
    }

    /// `⌊x + 1/2⌋`: nearest integer with ties toward +∞.
    pub fn nearest_int(&self) -> Integer {
        nearest_int(self)
    }

    pub fn to_rational(&self) -> Option<Rational> {
        self.value.to_rational()
    }

    /// Scientific notation with `sig` significant digits, e.g. `1.2457e0`.
    pub fn to_sci_string(&self, sig: usize) -> String {
        self.sci(Some(sig.max(1)))
    }

    fn sci(&self, sig: Option<usize>) -> String {
        let (negative, digits, exp) = self.value.to_sign_string_exp(10, sig);
        let sign = if negative { "-" } else { "" };
        match exp {
            None if self.value.is_zero() => format!("{sign}0e0"),
            None => digits,
            Some(e) => {
                let (head, tail) = digits.split_at(1);
                if tail.is_empty() {
                    format!("{sign}{head}e{}", e - 1)
                } else {
                    format!("{sign}{head}.{tail}e{}", e - 1)
                }
            }
        }
    }

    /// Decimal form with enough digits to restore every bit, followed by the
    /// digit budget, e.g. `1.2457309396155173259045e0@20`.
    pub fn serialize(&self) -> String {
        format!("{}@{}", self.sci(None), self.ctx.digits)
    }

    /// Inverse of [`Real::serialize`]; the context comes from the `@digits` suffix.
    pub fn deserialize(text: &str) -> Result<Real, NumericsError> {
        let (body, digits) = text
            .trim()
            .split_once('@')
            .ok_or_else(|| NumericsError::Parse(text.to_string()))?;
        let digits = digits.trim().parse::<u32>().map_err(|_| NumericsError::Parse(text.to_string()))?;
        PrecisionContext::new(digits)?.parse(body)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = f.precision().unwrap_or(self.ctx.digits as usize);
        f.write_str(&self.to_sci_string(sig))
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl PartialEq<i64> for Real {
    fn eq(&self, other: &i64) -> bool {
        self.value == *other
    }
}

impl PartialOrd<i64> for Real {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.value.partial_cmp(other)
    }
}

fn wider(a: PrecisionContext, b: PrecisionContext) -> PrecisionContext {
    if a.digits >= b.digits {
        a
    } else {
        b
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                let ctx = wider(self.ctx, rhs.ctx);
                ctx.wrap(Float::with_val(ctx.bits(), &self.value $op &rhs.value))
            }
        }
        impl $trait<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                (&self).$method(rhs)
            }
        }
        impl $trait<Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                self.$method(&rhs)
            }
        }
        impl $trait<i64> for &Real {
            type Output = Real;
            fn $method(self, rhs: i64) -> Real {
                self.ctx.wrap(Float::with_val(self.ctx.bits(), &self.value $op rhs))
            }
        }
        impl $trait<i64> for Real {
            type Output = Real;
            fn $method(self, rhs: i64) -> Real {
                (&self).$method(rhs)
            }
        }
        impl $trait<&Integer> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Integer) -> Real {
                self.ctx.wrap(Float::with_val(self.ctx.bits(), &self.value $op rhs))
            }
        }
    };
}

binary_op!(Add, add, +);
binary_op!(Sub, sub, -);
binary_op!(Mul, mul, *);
binary_op!(Div, div, /);

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        self.unary(-self.value.clone())
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        self.unary(-self.value.clone())
    }
}

/// `⌊x + 1/2⌋`, computed exactly.
pub fn nearest_int(x: &Real) -> Integer {
    let (floor, _) = x
        .value
        .to_integer_round(Round::Down)
        .expect("nearest_int of a non-finite value");
    // x - floor(x) only keeps the low-order bits of x, so it is exact at x's precision.
    let frac = Float::with_val(x.value.prec().max(2), &x.value - &floor);
    if frac >= 0.5 {
        floor + 1
    } else {
        floor
    }
}

/// Symbolic constants with a built-in evaluation routine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstantId {
    Pi,
    Ln2,
    /// `√k`, `k ≥ 2`.
    Sqrt(u32),
    /// `k^(1/d)`.
    NthRoot { radicand: u32, degree: u32 },
}

impl FromStr for ConstantId {
    type Err = NumericsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || NumericsError::UnsupportedConstant(s.to_string());
        let args = |name: &str| -> Option<Vec<u32>> {
            let inner = compact.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
            inner.split(',').map(|a| a.parse::<u32>().ok()).collect()
        };
        match compact.as_str() {
            "pi" => return Ok(Self::Pi),
            "ln2" => return Ok(Self::Ln2),
            _ => {}
        }
        if let Some(a) = args("sqrt") {
            return match a.as_slice() {
                [k] if *k >= 2 => Ok(Self::Sqrt(*k)),
                _ => Err(bad()),
            };
        }
        if let Some(a) = args("nthroot") {
            return match a.as_slice() {
                [k, d] if *k >= 1 && *d >= 1 => Ok(Self::NthRoot { radicand: *k, degree: *d }),
                _ => Err(bad()),
            };
        }
        Err(bad())
    }
}

impl fmt::Display for ConstantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pi => f.write_str("pi"),
            Self::Ln2 => f.write_str("ln2"),
            Self::Sqrt(k) => write!(f, "sqrt({k})"),
            Self::NthRoot { radicand, degree } => write!(f, "nthroot({radicand},{degree})"),
        }
    }
}

pub fn eval_constant(id: &ConstantId, ctx: PrecisionContext) -> Real {
    let bits = ctx.bits();
    let value = match *id {
        ConstantId::Pi => Float::with_val(bits, Constant::Pi),
        ConstantId::Ln2 => Float::with_val(bits, Constant::Log2),
        ConstantId::Sqrt(k) => Float::with_val(bits, k).sqrt(),
        ConstantId::NthRoot { radicand, degree } => Float::with_val(bits, radicand).root(degree),
    };
    ctx.wrap(value)
}

/// Parses a constant name and evaluates it; unknown names are an error.
pub fn eval_constant_named(name: &str, ctx: PrecisionContext) -> Result<Real, NumericsError> {
    Ok(eval_constant(&name.parse()?, ctx))
}
