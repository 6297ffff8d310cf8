//! Transfer matrices between nested cells.
//!
//! Row `k` of the level matrix `A_n^(i)` is the distribution of the corner
//! of `Γ^n` first reached from `i k^{n-1}`. Chaining these matrices along a
//! word gives its absorption distribution over the level corners, and the
//! limit matrices (entries 0, 1/5, 2/5, 1) drive the same construction for
//! infinite words.

use std::sync::Mutex;

use thiserror::Error;

use crate::kernel::ChainParams;
use crate::recursion::{init, step, HittingState, RecursionError};
use crate::scalar::Field;
use crate::words::{third, BoundaryWord, FiniteWord, LETTERS};

/// Product depth at which [`t_infinity`] gives up.
pub const MAX_PRODUCT_DEPTH: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error(transparent)]
    Recursion(#[from] RecursionError),
    #[error("level matrices start at level 2 (got {0})")]
    Level(usize),
    #[error("the empty word has no absorption row")]
    EmptyWord,
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("row spread still {spread:e} after {depth} factors")]
    NoConvergence { depth: usize, spread: f64 },
}

/// A 3x3 matrix whose rows are distributions over the letters.
#[derive(Debug, Clone, PartialEq)]
pub struct Stochastic3<S> {
    rows: [[S; 3]; 3],
}

/// The row vector `e_i`.
pub fn unit_row<S: Field>(i: u8) -> [S; 3] {
    LETTERS.map(|k| {
        if k == i {
            S::one_value()
        } else {
            S::zero_value()
        }
    })
}

/// `v M` for a row vector `v`.
pub fn row_times<S: Field>(v: &[S; 3], m: &Stochastic3<S>) -> [S; 3] {
    [0, 1, 2].map(|col| {
        (0..3).fold(S::zero_value(), |acc, k| {
            acc + v[k].clone() * m.rows[k][col].clone()
        })
    })
}

impl<S: Field> Stochastic3<S> {
    /// Wrap rows without checking them; see [`Stochastic3::is_stochastic`].
    pub fn from_rows(rows: [[S; 3]; 3]) -> Self {
        Stochastic3 { rows }
    }

    pub fn identity() -> Self {
        Stochastic3 {
            rows: LETTERS.map(unit_row),
        }
    }

    pub fn rows(&self) -> &[[S; 3]; 3] {
        &self.rows
    }

    /// Row for letter `i`.
    pub fn row(&self, i: u8) -> &[S; 3] {
        &self.rows[i as usize - 1]
    }

    pub fn mul(&self, other: &Self) -> Self {
        Stochastic3 {
            rows: [0, 1, 2].map(|r| row_times(&self.rows[r], other)),
        }
    }

    /// Largest column range `max - min`; zero iff all rows agree.
    pub fn spread(&self) -> f64 {
        (0..3)
            .map(|col| {
                let vals = self.rows.iter().map(|r| r[col].to_f64());
                let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(x), hi.max(x))
                });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Rows sum to one and entries lie in `[0, 1]` (exactly, or within `tol`
    /// for floats).
    pub fn is_stochastic(&self, tol: f64) -> bool {
        let zero = S::zero_value();
        let one = S::one_value();
        let in_range = |x: &S| {
            if S::EXACT {
                zero.certainly_le(x) && x.certainly_le(&one)
            } else {
                (-tol..=1.0 + tol).contains(&x.to_f64())
            }
        };
        self.rows.iter().all(|r| {
            let sum = r.iter().fold(zero.clone(), |a, x| a + x.clone());
            (sum - one.clone()).vanishes(tol) && r.iter().all(in_range)
        })
    }

    pub fn to_f64(&self) -> Stochastic3<f64> {
        Stochastic3 {
            rows: self.rows.clone().map(|r| r.map(|x| x.to_f64())),
        }
    }

    /// Average of the three rows, the common row once the spread vanishes.
    pub fn mean_row(&self) -> [f64; 3] {
        [0, 1, 2].map(|c| self.rows.iter().map(|r| r[c].to_f64()).sum::<f64>() / 3.0)
    }
}

/// `A_n^(i)` from the level-`n` triple `(alpha, beta, gamma)`: row `i` is
/// `e_i`, and row `k != i` puts `alpha` on `i`, `beta` on `k`, `gamma` on
/// the third letter.
pub fn level_matrix<S: Field>(i: u8, state: &HittingState<S>) -> Stochastic3<S> {
    let rows = LETTERS.map(|k| {
        if k == i {
            unit_row(i)
        } else {
            let l = third(i, k);
            let mut r = [S::zero_value(), S::zero_value(), S::zero_value()];
            r[i as usize - 1] = state.alpha.clone();
            r[k as usize - 1] = state.beta.clone();
            r[l as usize - 1] = state.gamma.clone();
            r
        }
    });
    Stochastic3 { rows }
}

/// `A^(i) = lim A_n^(i)`.
pub fn limit_matrix<S: Field>(i: u8) -> Stochastic3<S> {
    let lim = HittingState {
        n: usize::MAX,
        alpha: S::from_ratio(2, 5),
        beta: S::from_ratio(2, 5),
        gamma: S::from_ratio(1, 5),
        a: S::one_value(),
        b: S::zero_value(),
        c: S::zero_value(),
        denom: None,
    };
    level_matrix(i, &lim)
}

/// Corner-to-corner step across one level: row `i` is the distribution of
/// the level-`n` corner first reached after the walk leaves `i^{n-1}`.
/// It equals `(1 - s) I + (s/3) J` with `s = b_n + c_n`.
pub fn transfer_matrix<S: Field>(state: &HittingState<S>) -> Stochastic3<S> {
    let three = S::from_ratio(3, 1);
    let diag = (S::one_value() + S::from_ratio(2, 1) * state.a.clone()) / three.clone();
    let off = (state.b.clone() + state.c.clone()) / three;
    let rows = LETTERS.map(|i| LETTERS.map(|k| if k == i { diag.clone() } else { off.clone() }));
    Stochastic3 { rows }
}

/// The level recursion for one parameter, extended on demand.
#[derive(Debug)]
pub struct Levels<S> {
    params: ChainParams,
    states: Mutex<Vec<HittingState<S>>>,
}

impl<S: Field> Levels<S> {
    pub fn new(params: &ChainParams) -> Result<Self, MatrixError> {
        let first = init::<S>(params)?;
        Ok(Levels {
            params: params.clone(),
            states: Mutex::new(vec![first]),
        })
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    /// The state at level `n >= 2`.
    pub fn state(&self, n: usize) -> Result<HittingState<S>, MatrixError> {
        if n < 2 {
            return Err(MatrixError::Level(n));
        }
        let mut states = self.states.lock().expect("level cache poisoned");
        while states.len() + 1 < n {
            let next = step(&self.params, states.last().expect("nonempty"))?;
            states.push(next);
        }
        Ok(states[n - 2].clone())
    }

    /// `prod_{k=m+1}^{n} (1 - b_k - c_k)`, the factor by which the corner
    /// transfers from level `m` to level `n` shrink deviations from uniform.
    pub fn contraction(&self, m: usize, n: usize) -> Result<S, MatrixError> {
        if n > m {
            self.state(n)?;
        }
        let states = self.states.lock().expect("level cache poisoned");
        Ok((m.max(1) + 1..=n).fold(S::one_value(), |acc, k| {
            let st = &states[k - 2];
            acc * (S::one_value() - st.b.clone() - st.c.clone())
        }))
    }

    pub fn level_matrix(&self, i: u8, n: usize) -> Result<Stochastic3<S>, MatrixError> {
        Ok(level_matrix(i, &self.state(n)?))
    }

    /// The corner transfer from level `n - 1` to level `n`; uniform at `n = 1`.
    pub fn transfer(&self, n: usize) -> Result<Stochastic3<S>, MatrixError> {
        if n == 1 {
            let t = S::from_ratio(1, 3);
            return Ok(Stochastic3 {
                rows: [0; 3].map(|_| [t.clone(), t.clone(), t.clone()]),
            });
        }
        Ok(transfer_matrix(&self.state(n)?))
    }

    /// Absorption distribution of `x` over the corners of its level,
    /// `e_{i_n} A_2^(i_{n-1}) ... A_n^(i_1)`.
    pub fn rho(&self, x: &FiniteWord) -> Result<[S; 3], MatrixError> {
        let w = x.letters();
        let n = w.len();
        if n == 0 {
            return Err(MatrixError::EmptyWord);
        }
        let mut v = unit_row(w[n - 1]);
        for m in 2..=n {
            v = row_times(&v, &self.level_matrix(w[n - m], m)?);
        }
        Ok(v)
    }

    /// `T_n^x = A_2^(i_n) ... A_{n+1}^(i_1)`, split as `Q_{n,k} R_{n,k}`
    /// where `R` holds the last `k` factors. Returns `(Q, R)`.
    pub fn t_split(
        &self,
        letters: &[u8],
        n: usize,
        k: usize,
    ) -> Result<(Stochastic3<S>, Stochastic3<S>), MatrixError> {
        assert!(k <= n && letters.len() >= n, "need k <= n <= |x|");
        let factor = |j: usize| self.level_matrix(letters[n + 1 - j], j);
        let mut q = Stochastic3::identity();
        for j in 2..=n + 1 - k {
            q = q.mul(&factor(j)?);
        }
        let mut r = Stochastic3::identity();
        for j in n + 2 - k..=n + 1 {
            r = r.mul(&factor(j)?);
        }
        Ok((q, r))
    }
}

/// [`Levels::rho`] for a one-off call.
pub fn rho_finite<S: Field>(params: &ChainParams, x: &FiniteWord) -> Result<[S; 3], MatrixError> {
    Levels::<S>::new(params)?.rho(x)
}

/// `A^(i_k) ... A^(i_1)` for `letters = i_1 ... i_k`.
pub fn t_product<S: Field>(letters: &[u8]) -> Stochastic3<S> {
    letters
        .iter()
        .fold(Stochastic3::identity(), |acc, &i| limit_matrix(i).mul(&acc))
}

/// A converged limit product.
#[derive(Debug, Clone, PartialEq)]
pub struct TInfinity {
    pub matrix: Stochastic3<f64>,
    pub depth: usize,
    pub spread: f64,
}

/// `T_∞^x = lim A^(i_k) ... A^(i_1)`, grown until the row spread is below
/// `tol` or `max_depth` factors have been used. Each new factor multiplies
/// on the left, so the spread never increases.
pub fn t_infinity(x: &BoundaryWord, max_depth: usize, tol: f64) -> Result<TInfinity, MatrixError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(MatrixError::BadTolerance);
    }
    let limits: [Stochastic3<f64>; 3] = LETTERS.map(limit_matrix);
    let mut m = Stochastic3::<f64>::identity();
    for k in 0..max_depth {
        m = limits[x.letter(k) as usize - 1].mul(&m);
        let spread = m.spread();
        if spread < tol {
            return Ok(TInfinity {
                matrix: m,
                depth: k + 1,
                spread,
            });
        }
    }
    Err(MatrixError::NoConvergence {
        depth: max_depth,
        spread: m.spread(),
    })
}

/// `rho(x) = lim rho(x|_n)`: the common row of `T_∞^x`, accurate to `tol`.
pub fn rho_boundary(x: &BoundaryWord, tol: f64) -> Result<[f64; 3], MatrixError> {
    Ok(t_infinity(x, MAX_PRODUCT_DEPTH, tol)?.matrix.mean_row())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use crate::words::LetterPerm;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn third_p() -> ChainParams {
        ChainParams::exact(1, 3).unwrap()
    }

    fn w(s: &str) -> FiniteWord {
        s.parse().unwrap()
    }

    fn bw(s: &str) -> BoundaryWord {
        s.parse().unwrap()
    }

    #[test]
    fn level_two_matrix() {
        let lv = Levels::<Rational>::new(&third_p()).unwrap();
        let a = lv.level_matrix(1, 2).unwrap();
        assert_eq!(
            a.rows(),
            &[
                [q(1, 1), q(0, 1), q(0, 1)],
                [q(5, 8), q(1, 4), q(1, 8)],
                [q(5, 8), q(1, 8), q(1, 4)]
            ]
        );
        for n in 2..6 {
            assert_eq!(
                lv.level_matrix(2, n).unwrap().row(2),
                &unit_row::<Rational>(2)
            );
            assert!(lv.level_matrix(3, n).unwrap().is_stochastic(0.0));
        }
        assert_eq!(lv.level_matrix(1, 1), Err(MatrixError::Level(1)));
    }

    #[test]
    fn limit_matrices() {
        let a1 = limit_matrix::<Rational>(1);
        assert_eq!(a1.row(2), &[q(2, 5), q(2, 5), q(1, 5)]);
        assert_eq!(a1.row(3), &[q(2, 5), q(1, 5), q(2, 5)]);
        let a2 = limit_matrix::<Rational>(2);
        assert_eq!(a2.row(1), &[q(2, 5), q(2, 5), q(1, 5)]);
        assert_eq!(a2.row(3), &[q(1, 5), q(2, 5), q(2, 5)]);
        for i in LETTERS {
            assert!(limit_matrix::<Rational>(i).is_stochastic(0.0));
        }
        let lv = Levels::<f64>::new(&ChainParams::float(0.2).unwrap()).unwrap();
        let far = lv.level_matrix(3, 80).unwrap();
        assert!(far
            .rows()
            .iter()
            .flatten()
            .zip(limit_matrix::<f64>(3).rows().iter().flatten())
            .all(|(x, y)| (x - y).abs() < 1e-6));
    }

    #[test]
    fn rho_examples() {
        let lv = Levels::<Rational>::new(&third_p()).unwrap();
        assert_eq!(lv.rho(&w("12")).unwrap(), [q(5, 8), q(1, 4), q(1, 8)]);
        assert_eq!(lv.rho(&w("2222")).unwrap(), unit_row::<Rational>(2));
        let direct = row_times(
            &row_times(&unit_row(3), &lv.level_matrix(2, 2).unwrap()),
            &lv.level_matrix(1, 3).unwrap(),
        );
        assert_eq!(lv.rho(&w("123")).unwrap(), direct);
        assert_eq!(lv.rho(&FiniteWord::empty()), Err(MatrixError::EmptyWord));
    }

    #[test]
    fn rho_is_equivariant() {
        let lv = Levels::<Rational>::new(&ChainParams::exact(1, 4).unwrap()).unwrap();
        for x in FiniteWord::all(4) {
            let base = lv.rho(&x).unwrap();
            for perm in LetterPerm::all() {
                let moved = lv.rho(&x.permute(perm)).unwrap();
                for i in LETTERS {
                    assert_eq!(moved[perm.apply(i) as usize - 1], base[i as usize - 1]);
                }
            }
        }
    }

    #[test]
    fn transfer_is_corner_average() {
        let lv = Levels::<Rational>::new(&third_p()).unwrap();
        for n in 2..6 {
            let t = lv.transfer(n).unwrap();
            for i in LETTERS {
                let mut avg = [q(0, 1), q(0, 1), q(0, 1)];
                for k in LETTERS {
                    let r = lv.rho(&FiniteWord::power(i, n - 1).with(k)).unwrap();
                    for c in 0..3 {
                        avg[c] += &(r[c].clone() / q(3, 1));
                    }
                }
                assert_eq!(t.row(i), &avg);
            }
        }
    }

    #[test]
    fn contraction_matches_transfer_product() {
        let lv = Levels::<Rational>::new(&ChainParams::exact(2, 7).unwrap()).unwrap();
        let start = lv.rho(&w("1213")).unwrap();
        let mut v = start.clone();
        for n in 5..9 {
            v = row_times(&v, &lv.transfer(n).unwrap());
        }
        let f = lv.contraction(4, 8).unwrap();
        let t = q(1, 3);
        for k in 0..3 {
            assert_eq!(v[k], t.clone() + f.clone() * (start[k].clone() - t.clone()));
        }
        assert_eq!(lv.contraction(3, 3).unwrap(), q(1, 1));
    }

    #[test]
    fn t_split_recombines() {
        let lv = Levels::<Rational>::new(&third_p()).unwrap();
        let letters = [1, 2, 3, 3, 1, 2];
        let (q0, r0) = lv.t_split(&letters, 5, 0).unwrap();
        for k in 1..=5 {
            let (qk, rk) = lv.t_split(&letters, 5, k).unwrap();
            assert_eq!(qk.mul(&rk), q0.mul(&r0));
        }
        // rho(x) = e_{i_n} T_{n-1}
        let x = FiniteWord::new(letters.to_vec()).unwrap();
        let (t, _) = lv.t_split(&letters, 5, 0).unwrap();
        assert_eq!(lv.rho(&x).unwrap(), row_times(&unit_row(letters[5]), &t));
    }

    #[test]
    fn t_infinity_examples() {
        let t = t_infinity(&bw("(1)"), 1000, 1e-12).unwrap();
        assert_eq!(t.matrix.row(1), &[1.0, 0.0, 0.0]);
        assert!(t
            .matrix
            .row(2)
            .iter()
            .zip([1.0, 0.0, 0.0])
            .all(|(x, y)| (x - y).abs() < 1e-12));
        let a = rho_boundary(&bw("1(2)"), 1e-14).unwrap();
        let b = rho_boundary(&bw("2(1)"), 1e-14).unwrap();
        assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(a
            .iter()
            .zip([0.4, 0.4, 0.2])
            .all(|(x, y)| (x - y).abs() < 1e-12));
        let c = rho_boundary(&bw("(12)"), 1e-12).unwrap();
        let d = rho_boundary(&bw("(21)"), 1e-12).unwrap();
        assert!(c.iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(c.iter().zip(d).any(|(x, y)| (x - y).abs() > 1e-3));
        let e3 = rho_boundary(&bw("(3)"), 1e-12).unwrap();
        assert!(e3
            .iter()
            .zip([0.0, 0.0, 1.0])
            .all(|(x, y)| (x - y).abs() < 1e-12));
        assert_eq!(
            t_infinity(&bw("(3)"), 10, 0.0),
            Err(MatrixError::BadTolerance)
        );
        assert!(matches!(
            t_infinity(&bw("(12)"), 2, 1e-12),
            Err(MatrixError::NoConvergence { .. })
        ));
    }

    #[test]
    fn spread_is_monotone() {
        for s in ["(12)", "(123)", "1(3)", "(1132)"] {
            let x = bw(s);
            let mut m = Stochastic3::<f64>::identity();
            let mut last = m.spread();
            for k in 0..60 {
                m = limit_matrix::<f64>(x.letter(k)).mul(&m);
                assert!(m.spread() <= last + 1e-15);
                last = m.spread();
            }
            assert!(last < 1e-6, "{s}");
        }
    }
}
