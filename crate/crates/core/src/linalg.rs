//! Sparse LU factorisation for the absorption systems.
//!
//! The systems are `I - Q` with `Q` a substochastic matrix whose mass leaks
//! to absorbing states, i.e. nonsingular M-matrices. Their Schur complements
//! are M-matrices again, so elimination in any order meets only positive
//! pivots and needs no pivoting. That keeps the same code exact over
//! rationals. The pattern is kept structurally symmetric, which lets the
//! rows touched by a pivot be read off the pivot row.

use thiserror::Error;

use crate::scalar::Field;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("zero pivot at position {0}")]
    ZeroPivot(usize),
    #[error("entry ({row}, {col}) outside a {n}x{n} matrix")]
    OutOfBounds { row: usize, col: usize, n: usize },
}

/// Row-wise sparse square matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix<S> {
    rows: Vec<Vec<(u32, S)>>,
}

impl<S: Field> SparseMatrix<S> {
    pub fn new(n: usize) -> Self {
        SparseMatrix {
            rows: vec![Vec::new(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Add `value` to entry `(row, col)`.
    pub fn add(&mut self, row: usize, col: usize, value: S) -> Result<(), LinalgError> {
        let n = self.dim();
        if row >= n || col >= n {
            return Err(LinalgError::OutOfBounds { row, col, n });
        }
        let r = &mut self.rows[row];
        match r.binary_search_by_key(&(col as u32), |e| e.0) {
            Ok(k) => r[k].1 = r[k].1.clone() + value,
            Err(k) => r.insert(k, (col as u32, value)),
        }
        Ok(())
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        self.rows
            .iter()
            .map(|r| {
                r.iter().fold(S::zero_value(), |acc, (c, v)| {
                    acc + v.clone() * x[*c as usize].clone()
                })
            })
            .collect()
    }

    /// Make the pattern symmetric and the diagonal present, adding zeros.
    fn symmetrize(&mut self) {
        let n = self.dim();
        let mut missing: Vec<(usize, usize)> = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            for (j, _) in r {
                let j = *j as usize;
                if self.rows[j]
                    .binary_search_by_key(&(i as u32), |e| e.0)
                    .is_err()
                {
                    missing.push((j, i));
                }
            }
        }
        missing.extend((0..n).map(|i| (i, i)));
        for (i, j) in missing {
            let r = &mut self.rows[i];
            if let Err(k) = r.binary_search_by_key(&(j as u32), |e| e.0) {
                r.insert(k, (j as u32, S::zero_value()));
            }
        }
    }
}

/// `A = L U` with unit lower `L`.
#[derive(Debug, Clone)]
pub struct SparseLu<S> {
    lower: Vec<Vec<(u32, S)>>,
    upper: Vec<Vec<(u32, S)>>,
    diag: Vec<S>,
}

/// `a - l * b` over sorted sparse rows.
fn merge_sub<S: Field>(a: &[(u32, S)], l: &S, b: &[(u32, S)]) -> Vec<(u32, S)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push(a[i].clone());
            i += 1;
        } else if take_b {
            out.push((b[j].0, S::zero_value() - l.clone() * b[j].1.clone()));
            j += 1;
        } else {
            out.push((a[i].0, a[i].1.clone() - l.clone() * b[j].1.clone()));
            i += 1;
            j += 1;
        }
    }
    out
}

impl<S: Field> SparseLu<S> {
    /// Factor in the natural order of the rows.
    pub fn factor(mut matrix: SparseMatrix<S>) -> Result<Self, LinalgError> {
        matrix.symmetrize();
        let n = matrix.dim();
        let mut rows = matrix.rows;
        let mut lower: Vec<Vec<(u32, S)>> = vec![Vec::new(); n];
        let mut upper = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        for k in 0..n {
            let mut row_k = std::mem::take(&mut rows[k]);
            debug_assert_eq!(row_k.first().map(|e| e.0 as usize), Some(k));
            let pivot = row_k[0].1.clone();
            if pivot.vanishes(0.0) {
                return Err(LinalgError::ZeroPivot(k));
            }
            let tail = row_k.split_off(1);
            for (i, _) in &tail {
                let i = *i as usize;
                let row_i = std::mem::take(&mut rows[i]);
                debug_assert_eq!(row_i[0].0 as usize, k);
                let l = row_i[0].1.clone() / pivot.clone();
                rows[i] = merge_sub(&row_i[1..], &l, &tail);
                lower[i].push((k as u32, l));
            }
            upper.push(tail);
            diag.push(pivot);
        }
        Ok(SparseLu { lower, upper, diag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Stored entries of both factors.
    pub fn fill(&self) -> usize {
        self.diag.len()
            + self.lower.iter().map(Vec::len).sum::<usize>()
            + self.upper.iter().map(Vec::len).sum::<usize>()
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.dim();
        let mut y: Vec<S> = Vec::with_capacity(n);
        for (row, bi) in self.lower.iter().zip(b) {
            let s = row.iter().fold(bi.clone(), |acc, (k, l)| {
                acc - l.clone() * y[*k as usize].clone()
            });
            y.push(s);
        }
        for k in (0..n).rev() {
            let s = self.upper[k].iter().fold(y[k].clone(), |acc, (j, u)| {
                acc - u.clone() * y[*j as usize].clone()
            });
            y[k] = s / self.diag[k].clone();
        }
        y
    }

    /// Solve `A^T x = b`.
    pub fn solve_transpose(&self, b: &[S]) -> Vec<S> {
        let n = self.dim();
        let mut z = b.to_vec();
        for k in 0..n {
            z[k] = z[k].clone() / self.diag[k].clone();
            let zk = z[k].clone();
            for (j, u) in &self.upper[k] {
                let j = *j as usize;
                z[j] = z[j].clone() - u.clone() * zk.clone();
            }
        }
        for i in (0..n).rev() {
            let zi = z[i].clone();
            for (k, l) in &self.lower[i] {
                let k = *k as usize;
                z[k] = z[k].clone() - l.clone() * zi.clone();
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn sample() -> SparseMatrix<Rational> {
        // Diagonally dominant with an unsymmetric pattern.
        let mut m = SparseMatrix::new(4);
        for (r, c, v) in [
            (0, 0, q(4, 1)),
            (0, 1, q(-1, 1)),
            (1, 1, q(5, 1)),
            (1, 3, q(-2, 1)),
            (2, 0, q(-1, 2)),
            (2, 2, q(3, 1)),
            (3, 2, q(-1, 1)),
            (3, 3, q(2, 1)),
            (3, 0, q(-1, 3)),
        ] {
            m.add(r, c, v).unwrap();
        }
        m
    }

    #[test]
    fn solves_exactly() {
        let m = sample();
        let lu = SparseLu::factor(m.clone()).unwrap();
        let b = vec![q(1, 1), q(-2, 1), q(3, 7), q(0, 1)];
        let x = lu.solve(&b);
        assert_eq!(m.mul_vec(&x), b);
    }

    #[test]
    fn transpose_solve() {
        let m = sample();
        let lu = SparseLu::factor(m.clone()).unwrap();
        let b = vec![q(2, 1), q(1, 5), q(-1, 1), q(4, 3)];
        let x = lu.solve_transpose(&b);
        // x^T A = b^T, checked column by column.
        for col in 0..4 {
            let mut e = vec![q(0, 1); 4];
            e[col] = q(1, 1);
            let a_col = m.mul_vec(&e);
            let dot = x.iter().zip(&a_col).fold(q(0, 1), |s, (u, v)| s + u * v);
            assert_eq!(dot, b[col]);
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let mut m = SparseMatrix::<f64>::new(2);
        m.add(0, 1, 1.0).unwrap();
        m.add(1, 0, 1.0).unwrap();
        assert_eq!(SparseLu::factor(m).unwrap_err(), LinalgError::ZeroPivot(0));
        let mut m = SparseMatrix::<f64>::new(2);
        assert!(m.add(2, 0, 1.0).is_err());
    }

    #[test]
    fn float_path_agrees() {
        let m = sample();
        let mf = SparseMatrix {
            rows: m
                .rows
                .iter()
                .map(|r| r.iter().map(|(c, v)| (*c, v.to_f64())).collect())
                .collect(),
        };
        let x = SparseLu::factor(m)
            .unwrap()
            .solve(&[q(1, 1), q(0, 1), q(0, 1), q(0, 1)]);
        let y = SparseLu::factor(mf).unwrap().solve(&[1.0, 0.0, 0.0, 0.0]);
        for (a, b) in x.iter().zip(&y) {
            assert!((a.to_f64() - b).abs() < 1e-14);
        }
    }
}
