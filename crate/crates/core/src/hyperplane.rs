//! The hyperplane matrix of a real vector and its structured closed forms.
//!
//! For a unit vector `α` with partial sums `s_j = sqrt(α_j² + … + α_n²)` the
//! hyperplane matrix `H_α` is the `n × (n-1)` lower-trapezoidal matrix with
//! `h_jj = s_{j+1}/s_j` and `h_ij = -α_i α_j / (s_j s_{j+1})` below the diagonal.
//! Its columns are an orthonormal basis of the hyperplane `α⊥`.

use rug::Integer;
use thiserror::Error;

use crate::matrix::RealMatrix;
use crate::numerics::{PrecisionContext, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HyperplaneError {
    #[error("need at least two entries, got {0}")]
    TooShort(usize),
    #[error("input vector is identically zero")]
    AllZero,
    #[error("expected an n x (n-1) matrix, got {rows} x {cols}")]
    Shape { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) above the diagonal is nonzero")]
    NotLowerTrapezoidal { row: usize, col: usize },
    #[error("diagonal entry {0} is zero")]
    ZeroDiagonal(usize),
}

/// A normalized input vector with its largest-magnitude entry moved last.
#[derive(Clone, Debug)]
pub struct UnitVector {
    entries: Vec<Real>,
    permutation: Vec<usize>,
}

/// An entry that vanished at working precision: `e_index` is an exact relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrivialRelation {
    /// Position of the vanishing entry, in user order (0-based).
    pub index: usize,
    pub relation: Vec<Integer>,
}

#[derive(Clone, Debug)]
pub enum Normalized {
    Unit(UnitVector),
    Trivial(TrivialRelation),
}

impl Normalized {
    pub fn unit(self) -> Option<UnitVector> {
        match self {
            Normalized::Unit(u) => Some(u),
            Normalized::Trivial(_) => None,
        }
    }
}

impl UnitVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in internal order (largest magnitude last, positive).
    pub fn entries(&self) -> &[Real] {
        &self.entries
    }

    /// `permutation()[k]` is the user index of internal position `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn context(&self) -> PrecisionContext {
        self.entries[0].context()
    }

    /// `α_n`, the largest entry.
    pub fn last(&self) -> &Real {
        &self.entries[self.entries.len() - 1]
    }

    /// `sqrt(α_{n-1}² + α_n²)`, the factor in the terminal residual bound.
    pub fn tail_norm(&self) -> Real {
        let n = self.entries.len();
        (self.entries[n - 2].square() + self.entries[n - 1].square()).sqrt()
    }

    /// Maps a vector indexed in internal order back to user order.
    pub fn to_user_order<T: Clone>(&self, internal: &[T]) -> Vec<T> {
        assert_eq!(internal.len(), self.permutation.len());
        let mut out = internal.to_vec();
        for (k, &user) in self.permutation.iter().enumerate() {
            out[user] = internal[k].clone();
        }
        out
    }

    /// Maps a vector indexed in user order into internal order.
    pub fn to_internal_order<T: Clone>(&self, user: &[T]) -> Vec<T> {
        assert_eq!(user.len(), self.permutation.len());
        self.permutation.iter().map(|&u| user[u].clone()).collect()
    }

    /// `(α + noise)/‖α + noise‖` with `noise` in internal order, keeping this
    /// vector's permutation so both hyperplane matrices share coordinates.
    pub fn perturbed(&self, noise: &[Real]) -> UnitVector {
        assert_eq!(noise.len(), self.entries.len());
        let raw: Vec<Real> = self.entries.iter().zip(noise).map(|(a, e)| a + e).collect();
        let norm = raw.iter().fold(self.context().zero(), |acc, x| acc + x.square()).sqrt();
        UnitVector { entries: raw.iter().map(|x| x / &norm).collect(), permutation: self.permutation.clone() }
    }
}

/// Normalizes `v`, moves its largest-magnitude entry last with a single
/// transposition, and flips the global sign so that entry is positive.
///
/// Any entry whose normalized magnitude is below `10^-(digits-2)` makes the
/// corresponding unit vector an exact relation, which is returned instead.
pub fn normalize_and_permute(v: &[Real]) -> Result<Normalized, HyperplaneError> {
    let n = v.len();
    if n < 2 {
        return Err(HyperplaneError::TooShort(n));
    }
    if v.iter().all(Real::is_zero) {
        return Err(HyperplaneError::AllZero);
    }
    let ctx = v.iter().map(Real::context).max().expect("nonempty");
    let norm = v.iter().fold(ctx.zero(), |acc, x| acc + x.square()).sqrt();
    let mut entries: Vec<Real> = v.iter().map(|x| x / &norm).collect();

    let cutoff = zero_cutoff(ctx);
    if let Some(index) = entries.iter().position(|x| x.abs() < cutoff) {
        let mut relation = vec![Integer::new(); n];
        relation[index] = Integer::from(1);
        return Ok(Normalized::Trivial(TrivialRelation { index, relation }));
    }

    let mut largest = 0;
    for i in 1..n {
        if entries[i].abs() > entries[largest].abs() {
            largest = i;
        }
    }
    let mut permutation: Vec<usize> = (0..n).collect();
    entries.swap(largest, n - 1);
    permutation.swap(largest, n - 1);
    if entries[n - 1].is_sign_negative() {
        entries = entries.iter().map(|x| -x).collect();
    }
    Ok(Normalized::Unit(UnitVector { entries, permutation }))
}

/// Magnitude below which a normalized entry counts as zero.
pub fn zero_cutoff(ctx: PrecisionContext) -> Real {
    ctx.tolerance(2)
}

/// `(s_1, …, s_n)` with `s_j = sqrt(α_j² + … + α_n²)`.
pub fn partial_sums(alpha: &UnitVector) -> Vec<Real> {
    let ctx = alpha.context();
    let mut acc = ctx.zero();
    let mut out: Vec<Real> = alpha
        .entries
        .iter()
        .rev()
        .map(|a| {
            acc = &acc + &a.square();
            acc.sqrt()
        })
        .collect();
    out.reverse();
    out
}

/// An `n × (n-1)` lower-trapezoidal matrix with nonzero diagonal.
#[derive(Clone, Debug)]
pub struct HyperplaneMatrix {
    m: RealMatrix,
}

impl HyperplaneMatrix {
    /// Validates shape, the zero upper triangle, and the nonzero diagonal.
    pub fn new(m: RealMatrix) -> Result<Self, HyperplaneError> {
        let (rows, cols) = (m.rows(), m.cols());
        if rows < 2 || cols + 1 != rows {
            return Err(HyperplaneError::Shape { rows, cols });
        }
        for i in 0..rows {
            for j in (i + 1)..cols {
                if !m[(i, j)].is_zero() {
                    return Err(HyperplaneError::NotLowerTrapezoidal { row: i, col: j });
                }
            }
        }
        if let Some(j) = (0..cols).find(|&j| m[(j, j)].is_zero()) {
            return Err(HyperplaneError::ZeroDiagonal(j));
        }
        Ok(Self { m })
    }

    pub(crate) fn from_matrix_unchecked(m: RealMatrix) -> Self {
        Self { m }
    }

    /// Number of rows `n`.
    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> &Real {
        &self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &RealMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> RealMatrix {
        self.m
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut RealMatrix {
        &mut self.m
    }

    pub fn context(&self) -> PrecisionContext {
        self.m[(0, 0)].context()
    }

    /// `|h_{n,n-1}|`, the quantity the termination test watches.
    pub fn corner_entry(&self) -> Real {
        let n = self.n();
        self.m[(n - 1, n - 2)].abs()
    }

    pub fn diagonal(&self) -> Vec<Real> {
        (0..self.n() - 1).map(|j| self.m[(j, j)].clone()).collect()
    }

    /// `max_j |h_jj|`.
    pub fn h_max(&self) -> Real {
        let ctx = self.context();
        (0..self.n() - 1).fold(ctx.zero(), |acc, j| acc.max(&self.m[(j, j)].abs()))
    }

    /// The leading `(n-1) × (n-1)` block.
    pub fn principal_block(&self) -> RealMatrix {
        let k = self.n() - 1;
        self.m.block(k, k)
    }
}

/// The hyperplane matrix `H_α`.
pub fn build_h(alpha: &UnitVector) -> HyperplaneMatrix {
    let n = alpha.len();
    let ctx = alpha.context();
    let s = partial_sums(alpha);
    let a = &alpha.entries;
    let mut m = RealMatrix::zeros(ctx, n, n - 1);
    for j in 0..n - 1 {
        m[(j, j)] = &s[j + 1] / &s[j];
        let denom = &s[j] * &s[j + 1];
        for i in j + 1..n {
            m[(i, j)] = -(&a[i] * &a[j]) / &denom;
        }
    }
    HyperplaneMatrix { m }
}

/// Closed-form inverse of the leading `(n-1) × (n-1)` block of `H_α`:
/// diagonal `s_j/s_{j+1}`, and `α_i α_j / (s_i s_{i+1})` below it.
pub fn principal_inverse(alpha: &UnitVector) -> RealMatrix {
    let n = alpha.len();
    let ctx = alpha.context();
    let s = partial_sums(alpha);
    let a = &alpha.entries;
    let k = n - 1;
    let mut inv = RealMatrix::zeros(ctx, k, k);
    for i in 0..k {
        inv[(i, i)] = &s[i] / &s[i + 1];
        let denom = &s[i] * &s[i + 1];
        for j in 0..i {
            inv[(i, j)] = &(&a[i] * &a[j]) / &denom;
        }
    }
    inv
}

/// `(‖H_[1..n-1]‖_F, ‖H_[1..n-1]^{-1}‖_F)` from the closed forms
/// `(n-2) + α_n²` and `(n-2) + 1/α_n²` (unit `α`).
pub fn fro_norms(alpha: &UnitVector) -> (Real, Real) {
    let ctx = alpha.context();
    let base = ctx.from_i64(alpha.len() as i64 - 2);
    let an2 = alpha.last().square();
    ((&base + &an2).sqrt(), (&base + &an2.recip()).sqrt())
}

/// `‖H_[1..n-1]^{-1}‖_F` for a unit vector with last entry `alpha_n`.
pub fn inverse_fro_norm(n: usize, alpha_n: &Real) -> Real {
    let ctx = alpha_n.context();
    (ctx.from_i64(n as i64 - 2) + alpha_n.square().recip()).sqrt()
}
