//! Exact rational scalars and dense rational matrices.
//!
//! All linear algebra in this crate runs over arbitrary-precision rationals.
//! Floating point appears only in the operator-norm estimate used by the
//! norm bound check, and that use is confined to [`QMat::op_norm_estimate`].

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Exact rational scalar.
pub type Q = BigRational;

/// Rational from an integer.
pub fn qi(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

/// Rational from numerator and denominator.
pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p"` or `"p/q"` with optional sign, as used in all JSON files.
pub fn parse_q(s: &str) -> Result<Q> {
    s.trim()
        .parse::<BigRational>()
        .map_err(|e| Error::Schema(format!("bad rational {s:?}: {e}")))
}

/// Canonical string form of a rational: `"p"` when integral, else `"p/q"`.
pub fn format_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Dense matrix over the rationals, row-major storage.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QMat {
    rows: usize,
    cols: usize,
    entries: Vec<Q>,
}

impl QMat {
    pub fn new(rows: usize, cols: usize, entries: Vec<Q>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must be rows*cols");
        QMat { rows, cols, entries }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        QMat::new(rows, cols, vec![Q::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = QMat::zero(n, n);
        for i in 0..n {
            m.set(i, i, Q::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Invalid("ragged matrix rows".into()));
        }
        Ok(QMat::new(r, c, rows.into_iter().flatten().collect()))
    }

    /// Convenience constructor from integer literals.
    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        let entries = rows
            .iter()
            .flat_map(|row| {
                assert_eq!(row.len(), c, "ragged matrix rows");
                row.iter().map(|&n| qi(n))
            })
            .collect();
        QMat::new(r, c, entries)
    }

    /// Column vector from a slice of rationals.
    pub fn col_vec(v: &[Q]) -> Self {
        QMat::new(v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &Q {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Q> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    if i == j {
                        self.at(i, j).is_one()
                    } else {
                        self.at(i, j).is_zero()
                    }
                })
            })
    }

    pub fn transpose(&self) -> QMat {
        let mut t = QMat::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.at(i, j).clone());
            }
        }
        t
    }

    pub fn add(&self, other: &QMat) -> Result<QMat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "add {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(QMat::new(self.rows, self.cols, entries))
    }

    pub fn sub(&self, other: &QMat) -> Result<QMat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "sub {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(QMat::new(self.rows, self.cols, entries))
    }

    pub fn scale(&self, s: &Q) -> QMat {
        QMat::new(self.rows, self.cols, self.entries.iter().map(|a| a * s).collect())
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &QMat) -> Result<QMat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "mul {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = QMat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.at(i, j) + a * other.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &QMat) -> QMat {
        let mut out = QMat::zero(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.at(i, j);
                if a.is_zero() {
                    continue;
                }
                for p in 0..other.rows {
                    for r in 0..other.cols {
                        out.set(i * other.rows + p, j * other.cols + r, a * other.at(p, r));
                    }
                }
            }
        }
        out
    }

    /// Block diagonal sum `diag(self, other)`.
    pub fn block_diag(&self, other: &QMat) -> QMat {
        let mut out = QMat::zero(self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.at(i, j).clone());
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                out.set(self.rows + i, self.cols + j, other.at(i, j).clone());
            }
        }
        out
    }

    /// Reduced row echelon form together with the pivot column indices.
    pub fn rref(&self) -> (QMat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.at(i, c).is_zero()) else {
                continue;
            };
            if p != r {
                for j in 0..m.cols {
                    let a = m.at(r, j).clone();
                    let b = m.at(p, j).clone();
                    m.set(r, j, b);
                    m.set(p, j, a);
                }
            }
            let inv = m.at(r, c).recip();
            for j in 0..m.cols {
                let v = m.at(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i != r && !m.at(i, c).is_zero() {
                    let f = m.at(i, c).clone();
                    for j in 0..m.cols {
                        let v = m.at(i, j) - &f * m.at(r, j);
                        m.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Two-sided inverse, when one exists.
    pub fn inverse(&self) -> Option<QMat> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut aug = QMat::zero(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.at(i, j).clone());
            }
            aug.set(i, n + i, Q::one());
        }
        let (red, pivots) = aug.rref();
        if pivots.len() < n || pivots.iter().enumerate().any(|(k, &c)| c != k) {
            return None;
        }
        let mut inv = QMat::zero(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, red.at(i, n + j).clone());
            }
        }
        Some(inv)
    }

    /// Determinant of a square matrix.
    pub fn det(&self) -> Result<Q> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "determinant of {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut m = self.clone();
        let mut det = Q::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m.at(i, c).is_zero()) else {
                return Ok(Q::zero());
            };
            if p != c {
                det = -det;
                for j in 0..n {
                    let a = m.at(c, j).clone();
                    let b = m.at(p, j).clone();
                    m.set(c, j, b);
                    m.set(p, j, a);
                }
            }
            det *= m.at(c, c).clone();
            let inv = m.at(c, c).recip();
            for i in c + 1..n {
                if m.at(i, c).is_zero() {
                    continue;
                }
                let f = m.at(i, c) * &inv;
                for j in c..n {
                    let v = m.at(i, j) - &f * m.at(c, j);
                    m.set(i, j, v);
                }
            }
        }
        Ok(det)
    }

    /// Basis of the right kernel, as columns. Empty when the kernel is zero.
    pub fn nullspace(&self) -> Vec<QMat> {
        let (red, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Q::zero(); self.cols];
                v[f] = Q::one();
                for (r, &p) in pivots.iter().enumerate() {
                    v[p] = -red.at(r, f).clone();
                }
                QMat::col_vec(&v)
            })
            .collect()
    }

    /// Canonical basis of the row space: the nonzero rows of the RREF.
    pub fn row_space_basis(&self) -> Vec<Vec<Q>> {
        let (red, pivots) = self.rref();
        (0..pivots.len()).map(|i| red.row(i).to_vec()).collect()
    }

    /// Squared Euclidean norm of a single-column matrix.
    pub fn col_sq_norm(&self) -> Q {
        assert_eq!(self.cols, 1, "squared norm of a column vector");
        self.entries.iter().map(|a| a * a).sum()
    }

    /// Float copy of the matrix, for the operator-norm estimate only.
    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|a| a.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    /// Spectral norm estimate by power iteration on `self * self^T`.
    ///
    /// The only floating-point computation in the crate. Deterministic:
    /// fixed start vector, fixed iteration count.
    pub fn op_norm_estimate(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let a = self.to_f64();
        let mut v = vec![1.0; self.rows];
        let mut lambda = 0.0_f64;
        for _ in 0..200 {
            // w = A A^T v
            let mut atv = vec![0.0; self.cols];
            for i in 0..self.rows {
                for j in 0..self.cols {
                    atv[j] += a[i][j] * v[i];
                }
            }
            let mut w = vec![0.0; self.rows];
            for i in 0..self.rows {
                for j in 0..self.cols {
                    w[i] += a[i][j] * atv[j];
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = w.iter().map(|x| x / norm).collect::<Vec<_>>();
            let new_lambda = norm;
            let done = (new_lambda - lambda).abs() <= 1e-15 * new_lambda.max(1.0);
            v = next;
            lambda = new_lambda;
            if done {
                break;
            }
        }
        lambda.sqrt()
    }

    /// Rayleigh quotient `v^T (self self^T) v / v^T v`, an exact lower bound
    /// for the squared spectral norm at any nonzero rational `v`.
    pub fn rayleigh_sq_lower_bound(&self, v: &[Q]) -> Option<Q> {
        if v.len() != self.rows || v.iter().all(Zero::is_zero) {
            return None;
        }
        let vm = QMat::new(1, self.rows, v.to_vec());
        let atv = vm.mul(self).ok()?;
        let num: Q = atv.entries.iter().map(|a| a * a).sum();
        let den: Q = v.iter().map(|a| a * a).sum();
        Some(num / den)
    }
}

impl fmt::Debug for QMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QMat{}x{}[", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", format_q(self.at(i, j)))?;
            }
        }
        write!(f, "]")
    }
}

/// Absolute value of a rational.
pub fn q_abs(x: &Q) -> Q {
    x.abs()
}
