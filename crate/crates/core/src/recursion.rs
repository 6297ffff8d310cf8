//! Hitting probabilities of the corner sets along the level hierarchy.
//!
//! At level `n` the walk started from `1 2^{n-1}` is absorbed at `1^n`,
//! `2^n`, `3^n` with probabilities `(alpha, beta, gamma)`, and the walk
//! started from `1^{n-1} 2` with probabilities `(a, b, c)`. By symmetry these
//! two triples determine every absorption distribution from a word of the
//! form `i j^{n-1}` or `i^{n-1} j`. The level-2 values are explicit rational
//! functions of `p`; each later level follows from a closed-form step whose
//! implicit linear relations are re-checked after every application.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::kernel::{ChainParams, ParamError};
use crate::scalar::{render, Field, Rational};

/// Tolerance for the implicit relations in floating mode.
pub const FLOAT_RELATION_TOL: f64 = 1e-12;

/// Largest bit size (numerator plus denominator) an exact value may reach.
/// For most rational `p` the reduced denominators double in length at each
/// level, so exact sequences are bounded by this budget rather than by time.
pub const DEFAULT_BIT_BUDGET: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecursionError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("denominator vanished at level {0}")]
    ZeroDenominator(usize),
    #[error("relation {relation} violated at level {n} (residual {residual:e})")]
    RelationViolated {
        n: usize,
        relation: &'static str,
        residual: f64,
    },
    #[error("no convergence to within {tol:e} by level {n_max} (deviation {deviation:e})")]
    NotConverged {
        tol: f64,
        n_max: usize,
        deviation: f64,
    },
    #[error("tolerance below float resolution")]
    ToleranceBelowResolution,
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("exact values exceed {budget} bits at level {n}")]
    PrecisionBudget { n: usize, budget: u64 },
    #[error("maximum level must be at least 2")]
    LevelTooSmall,
}

/// The six absorption probabilities at level `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingState<S> {
    pub n: usize,
    pub alpha: S,
    pub beta: S,
    pub gamma: S,
    pub a: S,
    pub b: S,
    pub c: S,
    /// The normaliser used to produce this state from level `n - 1`.
    pub denom: Option<S>,
}

impl<S: Field> HittingState<S> {
    pub fn triple_alpha(&self) -> [S; 3] {
        [self.alpha.clone(), self.beta.clone(), self.gamma.clone()]
    }

    pub fn triple_a(&self) -> [S; 3] {
        [self.a.clone(), self.b.clone(), self.c.clone()]
    }

    /// Signed offsets from the limits `(2/5, 2/5, 1/5, 1, 0, 0)`.
    fn offsets(&self) -> [S; 6] {
        let two5 = S::from_ratio(2, 5);
        [
            self.alpha.clone() - two5.clone(),
            self.beta.clone() - two5,
            self.gamma.clone() - S::from_ratio(1, 5),
            self.a.clone() - S::one_value(),
            self.b.clone(),
            self.c.clone(),
        ]
    }

    /// `max(|alpha-2/5|, |beta-2/5|, |gamma-1/5|, |a-1|, b, c)` as a float.
    pub fn deviation(&self) -> f64 {
        self.offsets()
            .iter()
            .map(|x| x.to_f64().abs())
            .fold(0.0, f64::max)
    }

    fn max_bits(&self) -> u64 {
        [
            &self.alpha,
            &self.beta,
            &self.gamma,
            &self.a,
            &self.b,
            &self.c,
        ]
        .iter()
        .map(|x| x.bits())
        .max()
        .unwrap_or(0)
    }
}

fn s<S: Field>(n: i64) -> S {
    S::from_ratio(n, 1)
}

/// Level-2 values.
pub fn init<S: Field>(params: &ChainParams) -> Result<HittingState<S>, RecursionError> {
    let p: S = params.p()?;
    let d = s::<S>(5) - s::<S>(7) * p.clone();
    let a = (s::<S>(3) - s::<S>(4) * p.clone()) / d.clone();
    let b = (S::one_value() - p.clone()) / d.clone();
    let c = (S::one_value() - s::<S>(2) * p) / d;
    Ok(HittingState {
        n: 2,
        alpha: a.clone(),
        beta: b.clone(),
        gamma: c.clone(),
        a,
        b,
        c,
        denom: None,
    })
}

/// Residuals of the six implicit relations linking level `n` to `n + 1`.
pub fn relation_residuals<S: Field>(
    p: &S,
    prev: &HittingState<S>,
    next: &HittingState<S>,
) -> [(&'static str, S); 6] {
    let one = S::one_value();
    let two = s::<S>(2);
    let three = s::<S>(3);
    let (a, b, c) = (&prev.a, &prev.b, &prev.c);
    let (al, be, ga) = (&next.alpha, &next.beta, &next.gamma);
    let q = one.clone() - two.clone() * p.clone();
    let mix = p.clone() * c.clone() + b.clone() * q.clone();
    [
        (
            "alpha",
            al.clone()
                * (one.clone()
                    - a.clone() * q.clone()
                    - b.clone() * (one.clone() - three * p.clone())
                    - p.clone())
                - (p.clone() * be.clone() + p.clone() * b.clone() + c.clone() * q),
        ),
        (
            "beta",
            be.clone() * (one.clone() - a.clone() * (one.clone() - p.clone()))
                - (p.clone() * al.clone() + ga.clone() * mix.clone()),
        ),
        (
            "gamma",
            ga.clone() * (one.clone() - p.clone()) * (one - a.clone()) - be.clone() * mix,
        ),
        (
            "a",
            next.a.clone() - (a.clone() + b.clone() * al.clone() + c.clone() * al.clone()),
        ),
        (
            "b",
            next.b.clone() - (b.clone() * be.clone() + c.clone() * ga.clone()),
        ),
        (
            "c",
            next.c.clone() - (b.clone() * ga.clone() + c.clone() * be.clone()),
        ),
    ]
}

fn check_relations<S: Field>(
    p: &S,
    prev: &HittingState<S>,
    next: &HittingState<S>,
) -> Result<(), RecursionError> {
    for (relation, r) in relation_residuals(p, prev, next) {
        if !r.vanishes(FLOAT_RELATION_TOL) {
            return Err(RecursionError::RelationViolated {
                n: next.n,
                relation,
                residual: r.to_f64(),
            });
        }
    }
    Ok(())
}

/// Advance one level and confirm the implicit relations.
pub fn step<S: Field>(
    params: &ChainParams,
    st: &HittingState<S>,
) -> Result<HittingState<S>, RecursionError> {
    let p: S = params.p()?;
    let one = S::one_value();
    let two = s::<S>(2);
    let three = s::<S>(3);
    let four = s::<S>(4);
    let six = s::<S>(6);
    let nine = s::<S>(9);
    let (b, c) = (st.b.clone(), st.c.clone());
    let bb = b.clone() * b.clone();
    let cc = c.clone() * c.clone();
    let bc = b.clone() * c.clone();
    let pp = p.clone() * p.clone();
    let q = one.clone() - two.clone() * p.clone();

    let d = c.clone() * (two.clone() - p.clone()) * p.clone()
        + cc.clone() * q.clone()
        + bb.clone() * p.clone() * (two.clone() - three.clone() * p.clone())
        + b.clone() * p.clone() * (three.clone() - four.clone() * p.clone())
        + bc.clone() * (two.clone() - six.clone() * p.clone() + six * pp.clone());
    if d.vanishes(0.0) {
        return Err(RecursionError::ZeroDenominator(st.n));
    }
    let bpc = b.clone() + c.clone();
    let alpha = (bpc.clone() * (one.clone() - p.clone()) * p.clone()
        + cc.clone() * q.clone()
        + bb.clone() * p.clone() * (two.clone() - three.clone() * p.clone())
        + bc.clone() * (two.clone() - s::<S>(6) * p.clone() * (one.clone() - p.clone())))
        / d.clone();
    let beta = bpc * (one.clone() - p.clone()) * p.clone() / d.clone();
    let gamma = p.clone() * (b.clone() * q.clone() + c.clone() * p.clone()) / d.clone();
    let a = (c.clone() * (two.clone() - p.clone()) * p.clone()
        + cc.clone() * (one.clone() - three.clone() * p.clone())
        + b.clone() * p.clone() * (three.clone() - four * p.clone())
        + bc.clone() * (two.clone() - nine.clone() * p.clone() + nine * pp))
        / d.clone();
    let b_next = p.clone()
        * (bc.clone() * (two - three * p.clone())
            + bb.clone() * (one.clone() - p.clone())
            + cc.clone() * p.clone())
        / d.clone();
    let c_next = p.clone() * (bc + cc * (one - p.clone()) + bb * q) / d.clone();
    let next = HittingState {
        n: st.n + 1,
        alpha,
        beta,
        gamma,
        a,
        b: b_next,
        c: c_next,
        denom: Some(d),
    };
    check_relations(&p, st, &next)?;
    Ok(next)
}

/// States for levels `2..=n_max`.
pub fn sequence<S: Field>(
    params: &ChainParams,
    n_max: usize,
) -> Result<Vec<HittingState<S>>, RecursionError> {
    sequence_with_budget(params, n_max, DEFAULT_BIT_BUDGET)
}

/// Like [`sequence`] with an explicit cap on exact bit growth.
pub fn sequence_with_budget<S: Field>(
    params: &ChainParams,
    n_max: usize,
    budget: u64,
) -> Result<Vec<HittingState<S>>, RecursionError> {
    if n_max < 2 {
        return Err(RecursionError::LevelTooSmall);
    }
    let mut out = vec![init::<S>(params)?];
    while out.len() + 1 < n_max {
        let next = step(params, out.last().expect("nonempty"))?;
        if S::EXACT && next.max_bits() > budget {
            return Err(RecursionError::PrecisionBudget { n: next.n, budget });
        }
        out.push(next);
    }
    Ok(out)
}

/// Exact states up to `n_max`, stopping early (without error) when the
/// bit budget is reached.
pub fn exact_prefix(
    params: &ChainParams,
    n_max: usize,
    budget: u64,
) -> Result<Vec<HittingState<Rational>>, RecursionError> {
    let mut out = vec![init(params)?];
    while out.len() + 1 < n_max {
        let next = step(params, out.last().expect("nonempty"))?;
        if next.max_bits() > budget {
            break;
        }
        out.push(next);
    }
    Ok(out)
}

/// Envelope on `b_n + c_n`: `(4/5)^{n-2}` for `p <= 1/3`, `(3/5)^{n-2}` above.
pub fn envelope_ratio(params: &ChainParams) -> (i64, i64) {
    let third = Rational::from_ratio(1, 3);
    let above = match params.p_exact() {
        Some(r) => *r > third,
        None => params.p_f64() > 1.0 / 3.0,
    };
    if above {
        (3, 5)
    } else {
        (4, 5)
    }
}

fn pow<S: Field>(x: &S, k: usize) -> S {
    let mut out = S::one_value();
    for _ in 0..k {
        out = out * x.clone();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub converged_at: usize,
    pub deviation: f64,
    pub envelope: String,
    pub envelope_holds: bool,
    /// Largest `(b_n + c_n) / envelope_n` seen up to convergence.
    pub worst_envelope_ratio: f64,
}

fn abs_le<S: Field>(x: &S, bound: &S) -> bool {
    x.certainly_le(bound) && (S::zero_value() - x.clone()).certainly_le(bound)
}

fn abs_lt<S: Field>(x: &S, bound: &S) -> bool {
    x.certainly_lt(bound) && (S::zero_value() - x.clone()).certainly_lt(bound)
}

/// First level at which all six values are within `tol` of their limits.
pub fn verify_limits<S: Field>(
    params: &ChainParams,
    tol: f64,
    n_max: usize,
) -> Result<LimitReport, RecursionError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(RecursionError::BadTolerance);
    }
    if !S::EXACT && tol < f64::EPSILON {
        return Err(RecursionError::ToleranceBelowResolution);
    }
    let tol_s = S::from_rational(&Rational::from_float(tol).expect("finite tolerance"));
    let (en, ed) = envelope_ratio(params);
    let ratio = S::from_ratio(en, ed);
    let mut st = init::<S>(params)?;
    let mut holds = true;
    let mut worst = 0f64;
    loop {
        let env = pow(&ratio, st.n - 2);
        let sum = st.b.clone() + st.c.clone();
        holds &= sum.certainly_le(&env);
        worst = worst.max(sum.to_f64() / env.to_f64());
        if st.offsets().iter().all(|x| abs_lt(x, &tol_s)) {
            return Ok(LimitReport {
                converged_at: st.n,
                deviation: st.deviation(),
                envelope: format!("({en}/{ed})^(n-2)"),
                envelope_holds: holds,
                worst_envelope_ratio: worst,
            });
        }
        if st.n >= n_max {
            return Err(RecursionError::NotConverged {
                tol,
                n_max,
                deviation: st.deviation(),
            });
        }
        let next = step(params, &st)?;
        if S::EXACT && next.max_bits() > DEFAULT_BIT_BUDGET {
            return Err(RecursionError::PrecisionBudget {
                n: next.n,
                budget: DEFAULT_BIT_BUDGET,
            });
        }
        st = next;
    }
}

/// Outcome of one inequality or identity over a run of levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub holds: bool,
    /// `None` when the check does not apply for this `p`.
    pub applicable: bool,
    pub first_failure: Option<usize>,
    pub levels_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub exact: bool,
    pub n_max: usize,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

fn tally(
    name: &'static str,
    applicable: bool,
    levels: impl Iterator<Item = (usize, bool)>,
) -> LemmaCheck {
    let mut first_failure = None;
    let mut count = 0;
    if applicable {
        for (n, ok) in levels {
            count += 1;
            if !ok && first_failure.is_none() {
                first_failure = Some(n);
            }
        }
    }
    LemmaCheck {
        name,
        holds: first_failure.is_none(),
        applicable,
        first_failure,
        levels_checked: count,
    }
}

/// Check every proved inequality and identity along `states` (consecutive
/// levels starting at 2). An inequality passes only when it is certain for
/// the number type; identities must vanish exactly, inside the enclosure,
/// or within [`FLOAT_RELATION_TOL`] for plain floats.
pub fn lemma_suite<S: Field>(
    params: &ChainParams,
    states: &[HittingState<S>],
) -> Result<LemmaReport, RecursionError> {
    let p: S = params.p()?;
    let one = S::one_value();
    let two5 = S::from_ratio(2, 5);
    let third = Rational::from_ratio(1, 3);
    let (le_third, ge_third) = match params.p_exact() {
        Some(r) => (*r <= third, *r >= third),
        None => (params.p_f64() <= 1.0 / 3.0, params.p_f64() >= 1.0 / 3.0),
    };
    let identity = |x: S| x.vanishes(FLOAT_RELATION_TOL);
    let pairs = || states.windows(2).map(|w| (&w[0], &w[1]));
    let ratio = |st: &HittingState<S>| (st.b.clone() - st.c.clone()) / st.c.clone();
    let r2 = ratio(&states[0]);
    let shrink = one.clone() - p.clone();
    let (en, ed) = envelope_ratio(params);
    let env = S::from_ratio(en, ed);

    let checks = vec![
        tally(
            "b_n >= c_n",
            true,
            states.iter().map(|st| (st.n, st.c.certainly_le(&st.b))),
        ),
        tally(
            "b_n decreasing",
            true,
            pairs().map(|(x, y)| (y.n, y.b.certainly_lt(&x.b))),
        ),
        tally(
            "beta_n <= 2/5 (p <= 1/3)",
            le_third,
            states.iter().map(|st| (st.n, st.beta.certainly_le(&two5))),
        ),
        tally(
            "alpha_n >= 2/5 (p >= 1/3)",
            ge_third,
            states.iter().map(|st| (st.n, two5.certainly_le(&st.alpha))),
        ),
        tally(
            "beta_n >= gamma_n",
            true,
            states
                .iter()
                .map(|st| (st.n, st.gamma.certainly_le(&st.beta))),
        ),
        tally(
            "|b_{n+1}/c_{n+1} - 1| <= ((b_2-c_2)/c_2)(1-p)^(n-1)",
            true,
            states.iter().skip(1).map(|st| {
                let lhs = st.b.clone() / st.c.clone() - one.clone();
                (st.n, abs_le(&lhs, &(r2.clone() * pow(&shrink, st.n - 2))))
            }),
        ),
        tally(
            "ratio contraction by 1-p",
            true,
            pairs().map(|(x, y)| (y.n, ratio(y).certainly_le(&(ratio(x) * shrink.clone())))),
        ),
        tally(
            "ratio identity",
            true,
            pairs().map(|(x, y)| {
                let (b, c) = (x.b.clone(), x.c.clone());
                let q = one.clone() - p.clone() - p.clone();
                let factor = (c.clone() * q.clone() + b.clone() * p.clone())
                    / (b.clone()
                        + c.clone() * (one.clone() - p.clone())
                        + b.clone() * b.clone() / c.clone() * q);
                (y.n, identity(ratio(y) - ratio(x) * factor))
            }),
        ),
        tally(
            "implicit relations",
            true,
            pairs().map(|(x, y)| {
                (
                    y.n,
                    relation_residuals(&p, x, y)
                        .into_iter()
                        .all(|(_, r)| identity(r)),
                )
            }),
        ),
        tally(
            "b_n + c_n envelope",
            true,
            states.iter().map(|st| {
                (
                    st.n,
                    (st.b.clone() + st.c.clone()).certainly_le(&pow(&env, st.n - 2)),
                )
            }),
        ),
        tally(
            "sums equal one",
            true,
            states.iter().map(|st| {
                let s1 = st.alpha.clone() + st.beta.clone() + st.gamma.clone() - one.clone();
                let s2 = st.a.clone() + st.b.clone() + st.c.clone() - one.clone();
                (st.n, identity(s1) && identity(s2))
            }),
        ),
    ];
    Ok(LemmaReport {
        exact: S::EXACT,
        n_max: states.last().map_or(0, |s| s.n),
        checks,
    })
}

/// The literal form of the ratio bound with exponent `n - 1` at level `n`.
/// It is weaker than the proved bound by one factor of `1 - p` and fails at
/// `n = 2`, where both sides are compared without any contraction.
pub fn literal_ratio_bound_failures<S: Field>(
    params: &ChainParams,
    states: &[HittingState<S>],
) -> Result<Vec<usize>, RecursionError> {
    let p: S = params.p()?;
    let one = S::one_value();
    let shrink = one.clone() - p;
    let r2 = (states[0].b.clone() - states[0].c.clone()) / states[0].c.clone();
    Ok(states
        .iter()
        .filter(|st| {
            let lhs = st.b.clone() / st.c.clone() - one.clone();
            !abs_le(&lhs, &(r2.clone() * pow(&shrink, st.n - 1)))
        })
        .map(|st| st.n)
        .collect())
}

/// CSV with columns `n,alpha,beta,gamma,a,b,c`.
pub fn to_csv<S: Field>(states: &[HittingState<S>]) -> String {
    let mut out = String::from("n,alpha,beta,gamma,a,b,c\n");
    for st in states {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            st.n,
            render(&st.alpha),
            render(&st.beta),
            render(&st.gamma),
            render(&st.a),
            render(&st.b),
            render(&st.c)
        );
    }
    out
}
