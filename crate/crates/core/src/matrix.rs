//! Dense row-major matrices over [`Real`] and exact integers.

use std::ops::{Index, IndexMut};

use rug::{Integer, Rational};

use crate::numerics::{PrecisionContext, Real};

#[derive(Clone, Debug)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Real>,
}

impl RealMatrix {
    pub fn zeros(ctx: PrecisionContext, rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ctx.zero(); rows * cols] }
    }

    pub fn identity(ctx: PrecisionContext, n: usize) -> Self {
        let mut m = Self::zeros(ctx, n, n);
        for i in 0..n {
            m[(i, i)] = ctx.one();
        }
        m
    }

    /// Builds a matrix from rows of equal length.
    ///
    /// # Panics
    /// Panics on ragged input.
    pub fn from_rows(rows: Vec<Vec<Real>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn context(&self) -> Option<PrecisionContext> {
        self.data.first().map(Real::context)
    }

    pub fn row(&self, i: usize) -> &[Real] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self[(i, j)].clone());
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    pub fn mul(&self, rhs: &RealMatrix) -> RealMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let ctx = self.context().or(rhs.context()).expect("empty matrix product");
        let mut out = Self::zeros(ctx, self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = ctx.zero();
                for k in 0..self.cols {
                    if !self[(i, k)].is_zero() {
                        acc = acc + &self[(i, k)] * &rhs[(k, j)];
                    }
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Integer matrix times real matrix.
    pub fn left_mul_int(&self, lhs: &IntMatrix) -> RealMatrix {
        assert_eq!(lhs.cols(), self.rows, "dimension mismatch in matrix product");
        let ctx = self.context().expect("empty matrix");
        let mut out = Self::zeros(ctx, lhs.rows(), self.cols);
        for i in 0..lhs.rows() {
            for j in 0..self.cols {
                let mut acc = ctx.zero();
                for k in 0..self.rows {
                    if lhs[(i, k)] != 0 {
                        acc = acc + &self[(k, j)] * &lhs[(i, k)];
                    }
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn sub(&self, rhs: &RealMatrix) -> RealMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Top-left `rows × cols` block.
    pub fn block(&self, rows: usize, cols: usize) -> RealMatrix {
        let data = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| self[(i, j)].clone())
            .collect();
        Self { rows, cols, data }
    }

    /// Frobenius norm by direct summation.
    pub fn frobenius(&self) -> Real {
        let ctx = self.context().expect("empty matrix");
        self.data.iter().fold(ctx.zero(), |acc, x| acc + x.square()).sqrt()
    }

    pub fn max_abs(&self) -> Real {
        let ctx = self.context().expect("empty matrix");
        self.data.iter().fold(ctx.zero(), |acc, x| acc.max(&x.abs()))
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = Real;
    fn index(&self, (i, j): (usize, usize)) -> &Real {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Real {
        &mut self.data[i * self.cols + j]
    }
}

/// Square or rectangular matrix of exact integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Integer>,
}

impl IntMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![Integer::new(); n * n];
        for i in 0..n {
            data[i * n + i] = Integer::from(1);
        }
        Self { rows: n, cols: n, data }
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().map(Integer::from).collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<Integer> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..self.cols).all(|j| self[(i, j)] == i32::from(i == j)))
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// `row[target] -= q * row[source]`.
    pub fn sub_row_multiple(&mut self, target: usize, source: usize, q: &Integer) {
        for k in 0..self.cols {
            let delta = Integer::from(q * &self.data[source * self.cols + k]);
            self.data[target * self.cols + k] -= delta;
        }
    }

    /// `col[target] += q * col[source]`.
    pub fn add_col_multiple(&mut self, target: usize, source: usize, q: &Integer) {
        for k in 0..self.rows {
            let delta = Integer::from(q * &self.data[k * self.cols + source]);
            self.data[k * self.cols + target] += delta;
        }
    }

    pub fn mul(&self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut data = vec![Integer::new(); self.rows * rhs.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if *a == 0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    data[i * rhs.cols + j] += Integer::from(a * &rhs[(k, j)]);
                }
            }
        }
        IntMatrix { rows: self.rows, cols: rhs.cols, data }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> Integer {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut m = self.data.clone();
        let mut sign = 1;
        let mut prev = Integer::from(1);
        for k in 0..n {
            if m[k * n + k] == 0 {
                let Some(p) = (k + 1..n).find(|&i| m[i * n + k] != 0) else {
                    return Integer::new();
                };
                for j in 0..n {
                    m.swap(k * n + j, p * n + j);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = Integer::from(&m[i * n + j] * &m[k * n + k]) - Integer::from(&m[i * n + k] * &m[k * n + j]);
                    m[i * n + j] = v.div_exact(&prev);
                }
            }
            prev = m[k * n + k].clone();
        }
        if n == 0 {
            return Integer::from(1);
        }
        Integer::from(&m[n * n - 1] * sign)
    }

    /// Inverse over the rationals, or `None` when singular.
    pub fn inverse_rational(&self) -> Option<Vec<Vec<Rational>>> {
        let n = self.rows;
        let mut aug: Vec<Vec<Rational>> = (0..n)
            .map(|i| {
                (0..2 * n)
                    .map(|j| if j < n { Rational::from(&self[(i, j)]) } else { Rational::from(i32::from(j - n == i)) })
                    .collect()
            })
            .collect();
        for k in 0..n {
            let p = (k..n).find(|&i| aug[i][k] != 0)?;
            aug.swap(k, p);
            let pivot = aug[k][k].clone();
            for v in &mut aug[k] {
                *v /= &pivot;
            }
            for i in 0..n {
                if i != k && aug[i][k] != 0 {
                    let f = aug[i][k].clone();
                    for j in 0..2 * n {
                        let d = Rational::from(&f * &aug[k][j]);
                        aug[i][j] -= d;
                    }
                }
            }
        }
        Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
    }
}

impl Index<(usize, usize)> for IntMatrix {
    type Output = Integer;
    fn index(&self, (i, j): (usize, usize)) -> &Integer {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Integer {
        &mut self.data[i * self.cols + j]
    }
}
