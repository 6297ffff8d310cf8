//! The transition kernel and its parameter.
//!
//! From the empty word the walk moves to each letter with probability 1/3,
//! and from a corner word `i^n` to each `i^n k`. An interior word
//! `u = ω i j^r` (with `i != j`, `r >= 1`) has three neighbours on its own
//! level:
//!
//! * `v = ω i j^{r-1} i`, the partner in the same small cell,
//! * `w = ω j i^r`, the word across the bridge,
//! * `z = ω i j^{r-1} l`, the remaining cell member.
//!
//! The standard kernel puts `p` on `v` and `w` and `q = 1 - 2p` on `z`; the
//! rotated kernel puts `p` on `v` and `z` and `q` on `w`.

pub mod sim;

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::scalar::{Field, Rational, Scalar};
use crate::words::{third, FiniteWord, LETTERS};

pub use sim::{
    estimate_hitting, estimate_visits, estimate_word_hit, simulate_path, BernoulliEstimate,
    HittingEstimate, MeanEstimate, Path, PathOutcome, SimError, StopRule, DEFAULT_STEP_CAP,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamError {
    #[error("p must lie in (0, 1/2)")]
    OutOfRange,
    #[error("cannot parse p from {0:?}")]
    Parse(String),
    #[error("exact arithmetic needs a rational p, got the decimal {0}")]
    NotExact(String),
}

/// Arithmetic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

/// The chain parameter `p` in `(0, 1/2)`.
///
/// A rational or decimal `p` keeps its exact value even in floating mode,
/// so switching modes never re-rounds through binary.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams {
    exact: Option<Rational>,
    p: f64,
    mode: Mode,
}

fn half() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(2))
}

impl ChainParams {
    pub fn exact(num: i64, den: i64) -> Result<Self, ParamError> {
        if den == 0 {
            return Err(ParamError::Parse(format!("{num}/{den}")));
        }
        Self::from_rational(Rational::from_ratio(num, den))
    }

    pub fn from_rational(r: Rational) -> Result<Self, ParamError> {
        if r <= Rational::zero() || r >= half() {
            return Err(ParamError::OutOfRange);
        }
        let p = Field::to_f64(&r);
        Ok(ChainParams {
            exact: Some(r),
            p,
            mode: Mode::Exact,
        })
    }

    pub fn float(p: f64) -> Result<Self, ParamError> {
        if !(p > 0.0 && p < 0.5) {
            return Err(ParamError::OutOfRange);
        }
        Ok(ChainParams {
            exact: None,
            p,
            mode: Mode::Float,
        })
    }

    /// Same parameter, floating arithmetic.
    pub fn to_float(&self) -> Self {
        ChainParams {
            mode: Mode::Float,
            ..self.clone()
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn p_f64(&self) -> f64 {
        self.p
    }

    pub fn p_exact(&self) -> Option<&Rational> {
        self.exact.as_ref()
    }

    /// `p` in the scalar type `S`; exact types need a rational `p`.
    pub fn p<S: Field>(&self) -> Result<S, ParamError> {
        match &self.exact {
            Some(r) => Ok(S::from_rational(r)),
            None if S::EXACT => Err(ParamError::NotExact(self.p.to_string())),
            None => Ok(S::from_rational(
                &Rational::from_float(self.p).expect("finite p"),
            )),
        }
    }

    pub fn q<S: Field>(&self) -> Result<S, ParamError> {
        let p: S = self.p()?;
        Ok(S::one_value() - p.clone() - p)
    }
}

/// The exact value of a decimal literal such as `0.45` or `2.5e-1`.
fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int}{frac}");
    if digits.is_empty() || digits == "-" || digits == "+" {
        return None;
    }
    let numer: BigInt = digits.parse().ok()?;
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    Some(if shift >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, shift as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-shift) as usize))
    })
}

/// Parses `num/den` as an exact rational and anything else as a decimal.
impl FromStr for ChainParams {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParamError::Parse(s.to_string());
        match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| bad())?;
                let d: BigInt = d.trim().parse().map_err(|_| bad())?;
                if d.is_zero() {
                    return Err(bad());
                }
                Self::from_rational(Rational::new(n, d))
            }
            None => {
                let r = parse_decimal(s).ok_or_else(bad)?;
                let params = Self::from_rational(r)?;
                Ok(ChainParams {
                    p: s.parse().map_err(|_| bad())?,
                    ..params.to_float()
                })
            }
        }
    }
}

impl fmt::Display for ChainParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.exact, self.mode) {
            (Some(r), Mode::Exact) => write!(f, "{r}"),
            _ => write!(f, "{}", self.p),
        }
    }
}

impl Serialize for ChainParams {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Which of the two interior rules to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    #[default]
    Standard,
    Rotated,
}

/// One row of the transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow<S> {
    pub source: FiniteWord,
    pub targets: Vec<(FiniteWord, S)>,
}

impl<S: Scalar> TransitionRow<S> {
    pub fn total(&self) -> S {
        self.targets.iter().fold(S::zero(), |mut acc, (_, x)| {
            acc += x;
            acc
        })
    }

    pub fn prob(&self, target: &FiniteWord) -> S {
        self.targets
            .iter()
            .find(|(w, _)| w == target)
            .map_or_else(S::zero, |(_, x)| x.clone())
    }
}

/// The three same-level neighbours `(v, w, z)` of an interior word.
pub fn interior_neighbors(u: &FiniteWord) -> Option<(FiniteWord, FiniteWord, FiniteWord)> {
    if u.vertex_letter().is_some() || u.is_empty() {
        return None;
    }
    let n = u.len();
    let r = u.final_run();
    let letters = u.letters();
    let j = letters[n - 1];
    let i = letters[n - r - 1];
    let mut v = letters.to_vec();
    v[n - 1] = i;
    let mut z = letters.to_vec();
    z[n - 1] = third(i, j);
    let mut w = letters.to_vec();
    w[n - r - 1] = j;
    for c in &mut w[n - r..] {
        *c = i;
    }
    let mk = |x: Vec<u8>| FiniteWord::new(x).expect("letters stay valid");
    Some((mk(v), mk(w), mk(z)))
}

fn row<S: Scalar>(
    params: &ChainParams,
    choice: KernelChoice,
    u: &FiniteWord,
) -> Result<TransitionRow<S>, ParamError> {
    let third_prob = S::from_ratio(1, 3);
    let targets = match interior_neighbors(u) {
        None => LETTERS
            .iter()
            .map(|&k| (u.with(k), third_prob.clone()))
            .collect(),
        Some((v, w, z)) => {
            let p: S = params.p()?;
            let q: S = params.q()?;
            match choice {
                KernelChoice::Standard => vec![(v, p.clone()), (w, p), (z, q)],
                KernelChoice::Rotated => vec![(v, p.clone()), (w, q), (z, p)],
            }
        }
    };
    Ok(TransitionRow {
        source: u.clone(),
        targets,
    })
}

/// The row `P(u, .)`.
pub fn transition<S: Scalar>(
    params: &ChainParams,
    u: &FiniteWord,
) -> Result<TransitionRow<S>, ParamError> {
    row(params, KernelChoice::Standard, u)
}

/// The row of the rotated kernel.
pub fn rotated_transition<S: Scalar>(
    params: &ChainParams,
    u: &FiniteWord,
) -> Result<TransitionRow<S>, ParamError> {
    row(params, KernelChoice::Rotated, u)
}

pub fn transition_with<S: Scalar>(
    params: &ChainParams,
    choice: KernelChoice,
    u: &FiniteWord,
) -> Result<TransitionRow<S>, ParamError> {
    row(params, choice, u)
}
