//! Integer matrices and Smith normal form with tracked transforms.
//!
//! The diagonalization keeps both unimodular factors, so a presentation
//! matrix can be rewritten in the diagonal basis and group elements can be
//! carried along: `u * a * v = d` with `u`, `v` of determinant plus or
//! minus one and the diagonal of `d` a divisibility chain.

use crate::error::{Error, Result};
use crate::matrix::QMat;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use std::fmt;

/// Dense integer matrix, row major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZMat {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl ZMat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        ZMat { rows, cols, entries: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ZMat::zero(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::from(1));
        }
        m
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            entries.extend(row.iter().map(|&n| BigInt::from(n)));
        }
        ZMat { rows: r, cols: c, entries }
    }

    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Invalid("ragged integer matrix rows".to_string()));
        }
        Ok(ZMat { rows: r, cols: c, entries: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.entries[i * self.cols + j] = value;
    }

    pub fn col(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn transpose(&self) -> ZMat {
        let mut t = ZMat::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.at(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &ZMat) -> Result<ZMat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ZMat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = BigInt::zero();
                for k in 0..self.cols {
                    acc += self.at(i, k) * other.at(k, j);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[BigInt]) -> Result<Vec<BigInt>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * &x[j]).sum())
            .collect())
    }

    pub fn to_qmat(&self) -> QMat {
        let mut m = QMat::zero(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, crate::matrix::Q::from(self.at(i, j).clone()));
            }
        }
        m
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.entries.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.entries.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    fn add_row_multiple(&mut self, dst: usize, src: usize, k: &BigInt) {
        for j in 0..self.cols {
            let add = self.at(src, j) * k;
            let v = self.at(dst, j) + add;
            self.set(dst, j, v);
        }
    }

    /// col[dst] += k * col[src]
    fn add_col_multiple(&mut self, dst: usize, src: usize, k: &BigInt) {
        for i in 0..self.rows {
            let add = self.at(i, src) * k;
            let v = self.at(i, dst) + add;
            self.set(i, dst, v);
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -self.at(i, j).clone();
            self.set(i, j, v);
        }
    }
}

impl fmt::Display for ZMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.at(i, j).to_string()).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Smith normal form `u * a * v = d`.
#[derive(Debug, Clone)]
pub struct Snf {
    pub u: ZMat,
    pub d: ZMat,
    pub v: ZMat,
}

impl Snf {
    /// Nonzero diagonal entries, in chain order.
    pub fn divisors(&self) -> Vec<BigInt> {
        let n = self.d.rows().min(self.d.cols());
        (0..n).map(|i| self.d.at(i, i).clone()).filter(|e| !e.is_zero()).collect()
    }
}

/// Position of a nonzero entry of least absolute value in the trailing
/// submatrix starting at (t, t).
fn least_nonzero(d: &ZMat, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in t..d.rows() {
        for j in t..d.cols() {
            if d.at(i, j).is_zero() {
                continue;
            }
            match best {
                Some((bi, bj)) if d.at(bi, bj).abs() <= d.at(i, j).abs() => {}
                _ => best = Some((i, j)),
            }
        }
    }
    best
}

/// Diagonalizes an integer matrix by unimodular row and column operations,
/// tracking both transforms. The diagonal is nonnegative and each entry
/// divides the next.
pub fn smith_normal_form(a: &ZMat) -> Snf {
    let mut d = a.clone();
    let mut u = ZMat::identity(a.rows());
    let mut v = ZMat::identity(a.cols());
    let steps = a.rows().min(a.cols());

    for t in 0..steps {
        'pivot: loop {
            let Some((pi, pj)) = least_nonzero(&d, t) else { break 'pivot };
            d.swap_rows(t, pi);
            u.swap_rows(t, pi);
            d.swap_cols(t, pj);
            v.swap_cols(t, pj);

            let mut dirty = false;
            for i in t + 1..d.rows() {
                if d.at(i, t).is_zero() {
                    continue;
                }
                let q = -(d.at(i, t) / d.at(t, t));
                d.add_row_multiple(i, t, &q);
                u.add_row_multiple(i, t, &q);
                if !d.at(i, t).is_zero() {
                    dirty = true;
                }
            }
            for j in t + 1..d.cols() {
                if d.at(t, j).is_zero() {
                    continue;
                }
                let q = -(d.at(t, j) / d.at(t, t));
                d.add_col_multiple(j, t, &q);
                v.add_col_multiple(j, t, &q);
                if !d.at(t, j).is_zero() {
                    dirty = true;
                }
            }
            if dirty {
                continue 'pivot;
            }
            // The pivot must divide the whole trailing block; folding an
            // offending row into row t shrinks the pivot next round.
            for i in t + 1..d.rows() {
                for j in t + 1..d.cols() {
                    if !(d.at(i, j) % d.at(t, t)).is_zero() {
                        let one = BigInt::from(1);
                        d.add_row_multiple(t, i, &one);
                        u.add_row_multiple(t, i, &one);
                        continue 'pivot;
                    }
                }
            }
            break 'pivot;
        }
        if d.at(t, t).is_negative() {
            d.negate_row(t);
            u.negate_row(t);
        }
    }
    Snf { u, d, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_form(a: &ZMat, snf: &Snf) {
        assert_eq!(snf.u.mul(a).unwrap().mul(&snf.v).unwrap(), snf.d);
        let det_u = snf.u.to_qmat().det().unwrap();
        let det_v = snf.v.to_qmat().det().unwrap();
        assert!(det_u == crate::matrix::qi(1) || det_u == crate::matrix::qi(-1));
        assert!(det_v == crate::matrix::qi(1) || det_v == crate::matrix::qi(-1));
        for i in 0..snf.d.rows() {
            for j in 0..snf.d.cols() {
                if i != j {
                    assert!(snf.d.at(i, j).is_zero(), "off-diagonal at ({i},{j})");
                } else {
                    assert!(!snf.d.at(i, j).is_negative());
                }
            }
        }
        let divs = snf.divisors();
        for w in divs.windows(2) {
            assert!((&w[1] % &w[0]).is_zero(), "chain broken: {} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn identity_is_already_normal() {
        let a = ZMat::identity(3);
        let snf = smith_normal_form(&a);
        check_form(&a, &snf);
        assert_eq!(snf.d, ZMat::identity(3));
    }

    #[test]
    fn zero_matrix_has_no_divisors() {
        let a = ZMat::zero(2, 3);
        let snf = smith_normal_form(&a);
        check_form(&a, &snf);
        assert!(snf.divisors().is_empty());
    }

    #[test]
    fn textbook_two_by_two() {
        let a = ZMat::from_i64(&[&[2, 4], &[6, 8]]);
        let snf = smith_normal_form(&a);
        check_form(&a, &snf);
        assert_eq!(snf.divisors(), vec![BigInt::from(2), BigInt::from(4)]);
    }

    #[test]
    fn torsion_shows_in_the_chain() {
        // Presentation of Z/2 (+) Z/6.
        let a = ZMat::from_i64(&[&[2, 0], &[0, 6]]);
        let snf = smith_normal_form(&a);
        check_form(&a, &snf);
        assert_eq!(snf.divisors(), vec![BigInt::from(2), BigInt::from(6)]);
        let b = ZMat::from_i64(&[&[4, 2], &[2, 4]]);
        let snf_b = smith_normal_form(&b);
        check_form(&b, &snf_b);
        assert_eq!(snf_b.divisors(), vec![BigInt::from(2), BigInt::from(6)]);
    }

    #[test]
    fn seeded_matrices_keep_the_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x51f);
        for _ in 0..40 {
            let rows = rng.gen_range(1..=6);
            let cols = rng.gen_range(1..=6);
            let mut a = ZMat::zero(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    a.set(i, j, BigInt::from(rng.gen_range(-9..=9i64)));
                }
            }
            let snf = smith_normal_form(&a);
            check_form(&a, &snf);
        }
    }
}
