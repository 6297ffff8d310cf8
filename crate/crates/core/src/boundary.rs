//! Boundary points, the Martin metric and the harmonic functions `h_i`.
//!
//! Everything here runs in floating point: boundary kernels are limits, and
//! the doubling rules that evaluate them are float procedures anyway.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::potential::{green_boundary_limit, Potential, PotentialError};
use crate::words::{pi_partner, AnyWord, BoundaryWord, FiniteWord, WordError, LETTERS};

/// Longest prefix [`harmonic_at_boundary`] evaluates before giving up.
pub const MAX_HARMONIC_PREFIX: usize = 256;

/// The versioned boundary catalog shipped with the crate.
pub const CATALOG_V1: &str = include_str!("../data/catalog-v1.txt");

const CATALOG_HEADER: &str = "# boundary catalog v1";

/// Rounding slack charged per kernel value computed by direct solves.
const SOLVE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("invalid metric parameters: {0}")]
    MetricParams(&'static str),
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("letter {0} not in 1..=3")]
    Letter(u8),
    #[error("weights must be non-negative")]
    NegativeWeight,
    #[error("unsupported sequence shape: {0}")]
    Unsupported(String),
    #[error("no Cauchy behaviour along prefixes by length {length} (last gap {gap:e})")]
    NotCauchy { length: usize, gap: f64 },
    #[error("catalog line {line}: {reason}")]
    Catalog { line: usize, reason: String },
}

fn check_tol(tol: f64) -> Result<(), BoundaryError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(BoundaryError::BadTolerance);
    }
    Ok(())
}

fn check_letter(i: u8) -> Result<(), BoundaryError> {
    if !LETTERS.contains(&i) {
        return Err(BoundaryError::Letter(i));
    }
    Ok(())
}

/// Weight `r`, truncation depth `N` and boundary-kernel tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricParams {
    pub r: f64,
    pub depth: usize,
    pub kernel_tol: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            r: 0.5,
            depth: 8,
            kernel_tol: 1e-10,
        }
    }
}

impl MetricParams {
    pub fn new(r: f64, depth: usize, kernel_tol: f64) -> Result<Self, BoundaryError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(BoundaryError::MetricParams("r must lie in (0, 1)"));
        }
        if depth < 1 {
            return Err(BoundaryError::MetricParams("depth must be at least 1"));
        }
        if kernel_tol.is_nan() || kernel_tol <= 0.0 {
            return Err(BoundaryError::MetricParams("kernel_tol must be positive"));
        }
        Ok(MetricParams {
            r,
            depth,
            kernel_tol,
        })
    }

    /// `r^{N+1}/(1-r)`: every dropped summand is at most `r^n`.
    pub fn tail_bound(&self) -> f64 {
        self.r.powi(self.depth as i32 + 1) / (1.0 - self.r)
    }

    fn weight_sum(&self) -> f64 {
        (1.0 - self.r.powi(self.depth as i32 + 1)) / (1.0 - self.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub value: f64,
    pub error_bound: f64,
    pub params: MetricParams,
}

/// `K(z, x)` for every `z` with `|z| <= N`, grouped by level.
#[derive(Debug, Clone)]
pub struct KernelProfile {
    length: Option<usize>,
    levels: Vec<Vec<f64>>,
    error: f64,
}

impl KernelProfile {
    /// Word length, `None` for boundary words.
    pub fn length(&self) -> Option<usize> {
        self.length
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    /// Bound on the error of each stored kernel value.
    pub fn error(&self) -> f64 {
        self.error
    }
}

/// The truncated metric `ϱ` for one chain, with `ρ_{ϑ,z}` precomputed for
/// every `z` up to the truncation depth.
pub struct MartinMetric<'a> {
    potential: &'a Potential<f64>,
    params: MetricParams,
    weights: Vec<Vec<f64>>,
}

impl<'a> MartinMetric<'a> {
    pub fn new(potential: &'a Potential<f64>, params: MetricParams) -> Result<Self, BoundaryError> {
        let weights = (0..=params.depth)
            .map(|n| potential.root_hitting(n))
            .collect::<Result<_, _>>()?;
        Ok(MartinMetric {
            potential,
            params,
            weights,
        })
    }

    pub fn params(&self) -> &MetricParams {
        &self.params
    }

    pub fn profile(&self, x: &AnyWord) -> Result<KernelProfile, BoundaryError> {
        match x {
            AnyWord::Finite(y) => self.finite_profile(y),
            AnyWord::Boundary(b) => self.boundary_profile(b),
        }
    }

    fn finite_profile(&self, y: &FiniteWord) -> Result<KernelProfile, BoundaryError> {
        let pot = self.potential;
        let base = pot.hitting_probability(&FiniteWord::empty(), y)?;
        let levels = (0..=self.params.depth)
            .map(|n| {
                let zs: Vec<FiniteWord> = FiniteWord::all(n).collect();
                let h = pot.hitting_many(&zs, y)?;
                Ok(h.into_iter().map(|v| v / base).collect())
            })
            .collect::<Result<_, PotentialError>>()?;
        Ok(KernelProfile {
            length: Some(y.len()),
            levels,
            error: SOLVE_SLACK,
        })
    }

    fn boundary_profile(&self, x: &BoundaryWord) -> Result<KernelProfile, BoundaryError> {
        let pot = self.potential;
        let tol = self.params.kernel_tol;
        let mut limits = [0.0; 3];
        for (slot, j) in limits.iter_mut().zip(LETTERS) {
            *slot = green_boundary_limit(pot.params(), j, x, tol * 1e-3)?.value;
        }
        let levels = (0..=self.params.depth)
            .map(|n| {
                (0..3usize.pow(n as u32))
                    .into_par_iter()
                    .map(|idx| {
                        let z = FiniteWord::from_index(n, idx);
                        pot.kernel_with_limits(&z, &limits, tol).map(|k| k.value)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, PotentialError>>()?;
        Ok(KernelProfile {
            length: None,
            levels,
            error: tol,
        })
    }

    /// `ϱ` between two profiled points, truncated at depth `N`.
    pub fn distance(&self, a: &KernelProfile, b: &KernelProfile) -> MetricReport {
        let r = self.params.r;
        let pow = |len: Option<usize>| len.map_or(0.0, |n| r.powi(n as i32));
        let mut value = (pow(a.length) - pow(b.length)).abs();
        for (n, w) in self.weights.iter().enumerate() {
            let sup = w
                .iter()
                .zip(a.level(n).iter().zip(b.level(n)))
                .map(|(w, (ka, kb))| w * (ka - kb).abs())
                .fold(0.0, f64::max);
            value += r.powi(n as i32) * sup;
        }
        MetricReport {
            value,
            error_bound: self.params.tail_bound() + (a.error + b.error) * self.params.weight_sum(),
            params: self.params,
        }
    }
}

/// `ϱ(x, y)` with its error budget: the truncation tail plus the kernel
/// tolerance accumulated over the kept levels.
pub fn martin_metric(
    potential: &Potential<f64>,
    params: MetricParams,
    x: &AnyWord,
    y: &AnyWord,
) -> Result<MetricReport, BoundaryError> {
    let metric = MartinMetric::new(potential, params)?;
    let a = metric.profile(x)?;
    if x == y {
        return Ok(metric.distance(&a, &a));
    }
    let b = metric.profile(y)?;
    Ok(metric.distance(&a, &b))
}

fn lex_cmp(x: &BoundaryWord, y: &BoundaryWord) -> Ordering {
    if x == y {
        return Ordering::Equal;
    }
    let horizon = x.preperiod().max(y.preperiod()) + x.period() * y.period();
    (0..=horizon)
        .map(|k| x.letter(k).cmp(&y.letter(k)))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// A `π`-class of boundary words, held by its lexicographically smallest
/// member.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundaryPoint {
    representative: BoundaryWord,
}

impl BoundaryPoint {
    pub fn new(x: &BoundaryWord) -> Self {
        let representative = match pi_partner(x) {
            Some(y) if lex_cmp(&y, x).is_lt() => y,
            _ => x.clone(),
        };
        BoundaryPoint { representative }
    }

    pub fn representative(&self) -> &BoundaryWord {
        &self.representative
    }

    /// The class members in lexicographic order.
    pub fn members(&self) -> Vec<BoundaryWord> {
        let mut out = vec![self.representative.clone()];
        out.extend(pi_partner(&self.representative));
        out
    }

    pub fn class_size(&self) -> usize {
        1 + usize::from(pi_partner(&self.representative).is_some())
    }

    pub fn contains(&self, x: &BoundaryWord) -> bool {
        BoundaryPoint::new(x) == *self
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.representative)
    }
}

/// The sequence shapes [`cauchy_class`] understands. Written as
/// `const:<word>` or `prefixes:<boundary word>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceDescriptor {
    /// `(x, x, x, ...)`.
    Constant(FiniteWord),
    /// `(x|_1, x|_2, ...)`.
    Prefixes(BoundaryWord),
}

impl FromStr for SequenceDescriptor {
    type Err = BoundaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(w) = s.strip_prefix("const:") {
            Ok(SequenceDescriptor::Constant(w.parse()?))
        } else if let Some(w) = s.strip_prefix("prefixes:") {
            Ok(SequenceDescriptor::Prefixes(w.parse()?))
        } else {
            Err(BoundaryError::Unsupported(s.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    Interior(FiniteWord),
    Boundary(BoundaryPoint),
}

/// The limit of a `ϱ`-Cauchy sequence: constant sequences stay in the
/// interior, prefix sequences converge to the class of their word.
pub fn cauchy_class(seq: &SequenceDescriptor) -> Classification {
    match seq {
        SequenceDescriptor::Constant(x) => Classification::Interior(x.clone()),
        SequenceDescriptor::Prefixes(x) => Classification::Boundary(BoundaryPoint::new(x)),
    }
}

/// The three points carrying the minimal harmonic functions.
pub fn minimal_boundary() -> [BoundaryPoint; 3] {
    LETTERS.map(|i| BoundaryPoint::new(&BoundaryWord::vertex(i)))
}

/// `h_i(x) = K(x, i^∞)`.
pub fn harmonic_h(
    potential: &Potential<f64>,
    i: u8,
    x: &FiniteWord,
    tol: f64,
) -> Result<f64, BoundaryError> {
    check_letter(i)?;
    check_tol(tol)?;
    Ok(potential
        .kernel_at_boundary(x, &BoundaryWord::vertex(i), tol)?
        .value)
}

/// `h_i(x) = lim_n h_i(x|_n)`, doubling `n` until two values agree to `tol`.
pub fn harmonic_at_boundary(
    potential: &Potential<f64>,
    i: u8,
    x: &BoundaryWord,
    tol: f64,
) -> Result<f64, BoundaryError> {
    check_letter(i)?;
    check_tol(tol)?;
    let at = |n: usize| harmonic_h(potential, i, &x.truncate(n), tol * 0.25);
    let mut n = (x.preperiod() + x.period()).max(4);
    let mut prev = at(n)?;
    loop {
        if 2 * n > MAX_HARMONIC_PREFIX {
            return Err(BoundaryError::NotCauchy {
                length: n,
                gap: f64::NAN,
            });
        }
        let next = at(2 * n)?;
        if (next - prev).abs() < tol {
            return Ok(next);
        }
        n *= 2;
        prev = next;
    }
}

/// `Σ_i w_i h_i(x)`, the harmonic function of the atomic measure with
/// weights `w` on the minimal boundary.
pub fn harmonic_from_boundary(
    potential: &Potential<f64>,
    weights: [f64; 3],
    x: &FiniteWord,
    tol: f64,
) -> Result<f64, BoundaryError> {
    if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(BoundaryError::NegativeWeight);
    }
    let mut sum = 0.0;
    for (w, i) in weights.into_iter().zip(LETTERS) {
        if w > 0.0 {
            sum += w * harmonic_h(potential, i, x, tol)?;
        }
    }
    Ok(sum)
}

/// Parse a catalog: a version header, then one boundary word per line.
/// Other `#` lines and blank lines are ignored.
pub fn parse_catalog(text: &str) -> Result<Vec<BoundaryWord>, BoundaryError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, head)) if head.trim() == CATALOG_HEADER => {}
        _ => {
            return Err(BoundaryError::Catalog {
                line: 1,
                reason: format!("expected header `{CATALOG_HEADER}`"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(k, l)| {
            l.parse().map_err(|e: WordError| BoundaryError::Catalog {
                line: k + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// The shipped catalog: `i^∞`, `ω k^∞` with `|ω| <= 2`, and `(ij)^∞`.
pub fn catalog() -> Vec<BoundaryWord> {
    parse_catalog(CATALOG_V1).expect("shipped catalog parses")
}

/// Spearman rank correlation, with tied values given their mean rank.
pub fn rank_correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "samples must pair up");
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    sxy / (sxx * syy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && v[order[end]] == v[order[k]] {
            end += 1;
        }
        let rank = (k + end + 1) as f64 / 2.0;
        for &idx in &order[k..end] {
            out[idx] = rank;
        }
        k = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ChainParams;
    use crate::words::{pi_equivalent, LetterPerm};

    fn bw(s: &str) -> BoundaryWord {
        s.parse().unwrap()
    }

    fn fw(s: &str) -> FiniteWord {
        s.parse().unwrap()
    }

    fn pot(p: f64) -> Potential<f64> {
        Potential::new(&ChainParams::float(p).unwrap()).unwrap()
    }

    #[test]
    fn catalog_shape() {
        let c = catalog();
        assert_eq!(c.len(), 33);
        let mut sorted = c.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 33);
        let pairs = (0..c.len())
            .flat_map(|a| (a + 1..c.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| pi_equivalent(&c[a], &c[b]))
            .count();
        assert_eq!(pairs, 12);
        assert!(parse_catalog("(1)\n").is_err());
        assert!(parse_catalog("# boundary catalog v1\n1(2\n").is_err());
    }

    #[test]
    fn boundary_points() {
        let a = BoundaryPoint::new(&bw("2(1)"));
        assert_eq!(a.representative(), &bw("1(2)"));
        assert_eq!(a.class_size(), 2);
        assert_eq!(a, BoundaryPoint::new(&bw("1(2)")));
        assert_eq!(a.members(), vec![bw("1(2)"), bw("2(1)")]);
        let b = BoundaryPoint::new(&bw("(12)"));
        assert_eq!(b.class_size(), 1);
        assert_eq!(a.to_string(), "[1(2)]");
        let m = minimal_boundary();
        assert!(m.iter().all(|p| p.class_size() == 1));
        for perm in LetterPerm::all() {
            let mut imgs: Vec<_> = m
                .iter()
                .map(|p| BoundaryPoint::new(&p.representative().permute(perm)))
                .collect();
            imgs.sort_by(|x, y| x.representative().cmp(y.representative()));
            assert_eq!(imgs, m.to_vec());
        }
    }

    #[test]
    fn sequences_classify() {
        let c = |s: &str| cauchy_class(&s.parse().unwrap());
        assert_eq!(c("const:12"), Classification::Interior(fw("12")));
        assert_eq!(
            c("prefixes:2(1)"),
            Classification::Boundary(BoundaryPoint::new(&bw("1(2)")))
        );
        assert!(matches!(
            c("prefixes:(12)"),
            Classification::Boundary(p) if p.class_size() == 1
        ));
        assert!(matches!(
            "alternating:1,2".parse::<SequenceDescriptor>(),
            Err(BoundaryError::Unsupported(_))
        ));
    }

    #[test]
    fn metric_basics() {
        let pot = pot(1.0 / 3.0);
        let mp = MetricParams::new(0.5, 6, 1e-10).unwrap();
        let metric = MartinMetric::new(&pot, mp).unwrap();
        let prof = |s: &str| metric.profile(&s.parse().unwrap()).unwrap();
        let (a, b, c) = (prof("1(2)"), prof("2(1)"), prof("(1)"));
        let d = prof("(2)");
        assert_eq!(metric.distance(&a, &a).value, 0.0);
        assert!(metric.distance(&a, &b).value <= metric.distance(&a, &b).error_bound);
        let sep = metric.distance(&c, &d);
        assert!(sep.value > sep.error_bound);
        assert_eq!(sep.value, metric.distance(&d, &c).value);
        let f = prof("12");
        let g = prof("");
        let fg = metric.distance(&f, &g);
        assert!(fg.value > fg.error_bound);
        assert!(MetricParams::new(1.0, 8, 1e-10).is_err());
        assert!(MetricParams::new(0.5, 0, 1e-10).is_err());
    }

    #[test]
    fn finite_profile_matches_kernel() {
        let pot = pot(0.25);
        let metric = MartinMetric::new(&pot, MetricParams::new(0.5, 3, 1e-10).unwrap()).unwrap();
        let y = fw("121");
        let prof = metric.profile(&AnyWord::Finite(y.clone())).unwrap();
        for n in 0..=3 {
            for (idx, v) in prof.level(n).iter().enumerate() {
                let z = FiniteWord::from_index(n, idx);
                let k = pot.martin_kernel(&z, &y).unwrap();
                assert!((k - v).abs() < 1e-12, "{z} {y}");
            }
        }
    }

    #[test]
    fn harmonic_values() {
        let pot = pot(1.0 / 3.0);
        let tol = 1e-10;
        for i in LETTERS {
            assert!((harmonic_h(&pot, i, &FiniteWord::empty(), tol).unwrap() - 1.0).abs() < tol);
        }
        let h11 = harmonic_h(&pot, 1, &fw("1"), tol).unwrap();
        let h12 = harmonic_h(&pot, 1, &fw("2"), tol).unwrap();
        assert!(h11 > h12);
        let x = fw("1231");
        let s: f64 = LETTERS
            .iter()
            .map(|&i| harmonic_h(&pot, i, &x, tol).unwrap())
            .sum();
        assert!((s - 3.0).abs() < 3.0 * tol);
        let u = harmonic_from_boundary(&pot, [1.0 / 3.0; 3], &x, tol).unwrap();
        assert!((u - 1.0).abs() < 3.0 * tol);
        assert_eq!(
            harmonic_from_boundary(&pot, [0.0; 3], &x, tol).unwrap(),
            0.0
        );
        assert!(harmonic_from_boundary(&pot, [-1.0, 0.0, 0.0], &x, tol).is_err());
        assert!(harmonic_h(&pot, 4, &x, tol).is_err());
    }

    #[test]
    fn boundary_harmonic_rule() {
        let pot = pot(0.1);
        let tol = 1e-8;
        let h = |s: &str| harmonic_at_boundary(&pot, 1, &bw(s), tol).unwrap();
        assert!((h("(1)") - 3.0).abs() < tol);
        assert!(h("(2)").abs() < tol);
        let rule = 0.4 * h("3(2)") + 0.4 * h("3(1)") + 0.2 * h("(3)");
        assert!((h("32(1)") - rule).abs() < 3.0 * tol);
        assert!((h("1(2)") - h("2(1)")).abs() < 3.0 * tol);
    }

    #[test]
    fn spearman() {
        assert!((rank_correlation(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((rank_correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }
}
