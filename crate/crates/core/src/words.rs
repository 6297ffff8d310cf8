//! Words over the alphabet {1, 2, 3}.
//!
//! Finite words index the vertices of the level graphs; eventually periodic
//! infinite words stand in for points of the code space. Both carry the
//! usual base-3 encoding (letter `i` is digit `i - 1`, most significant
//! first) so that a level's vertices map onto `0..3^n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three letters, in order.
pub const LETTERS: [u8; 3] = [1, 2, 3];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("letter {0} is not in {{1,2,3}}")]
    BadLetter(u8),
    #[error("cannot parse word {0:?}")]
    Parse(String),
    #[error("cycle must be nonempty")]
    EmptyCycle,
}

fn check(letters: &[u8]) -> Result<(), WordError> {
    match letters.iter().find(|&&c| !(1..=3).contains(&c)) {
        Some(&c) => Err(WordError::BadLetter(c)),
        None => Ok(()),
    }
}

/// The letter of {1,2,3} different from both `a` and `b` (which must differ).
pub fn third(a: u8, b: u8) -> u8 {
    6 - a - b
}

/// A permutation of the alphabet, stored as the images of 1, 2, 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LetterPerm([u8; 3]);

impl LetterPerm {
    pub fn new(images: [u8; 3]) -> Option<Self> {
        let mut seen = [false; 3];
        for &c in &images {
            if !(1..=3).contains(&c) || seen[c as usize - 1] {
                return None;
            }
            seen[c as usize - 1] = true;
        }
        Some(LetterPerm(images))
    }

    pub fn identity() -> Self {
        LetterPerm([1, 2, 3])
    }

    /// All six permutations, identity first.
    pub fn all() -> [LetterPerm; 6] {
        [
            LetterPerm([1, 2, 3]),
            LetterPerm([1, 3, 2]),
            LetterPerm([2, 1, 3]),
            LetterPerm([2, 3, 1]),
            LetterPerm([3, 1, 2]),
            LetterPerm([3, 2, 1]),
        ]
    }

    pub fn apply(&self, letter: u8) -> u8 {
        self.0[letter as usize - 1]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = [0u8; 3];
        for (k, &img) in self.0.iter().enumerate() {
            inv[img as usize - 1] = k as u8 + 1;
        }
        LetterPerm(inv)
    }
}

/// A finite word; the empty word is written `e`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FiniteWord {
    letters: Vec<u8>,
}

impl FiniteWord {
    pub fn new(letters: Vec<u8>) -> Result<Self, WordError> {
        check(&letters)?;
        Ok(FiniteWord { letters })
    }

    pub fn empty() -> Self {
        FiniteWord {
            letters: Vec::new(),
        }
    }

    /// The vertex word `i^n`.
    pub fn power(letter: u8, n: usize) -> Self {
        assert!((1..=3).contains(&letter), "letter out of range");
        FiniteWord {
            letters: vec![letter; n],
        }
    }

    /// Decode a base-3 vertex index at the given level.
    pub fn from_index(level: usize, mut index: usize) -> Self {
        let mut letters = vec![0u8; level];
        for slot in letters.iter_mut().rev() {
            *slot = (index % 3) as u8 + 1;
            index /= 3;
        }
        debug_assert_eq!(index, 0, "index exceeds 3^level");
        FiniteWord { letters }
    }

    pub fn index(&self) -> usize {
        self.letters
            .iter()
            .fold(0usize, |acc, &c| acc * 3 + (c as usize - 1))
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn last(&self) -> Option<u8> {
        self.letters.last().copied()
    }

    /// `Some(i)` when the word is `i^n` with `n >= 1`.
    pub fn vertex_letter(&self) -> Option<u8> {
        let first = *self.letters.first()?;
        self.letters.iter().all(|&c| c == first).then_some(first)
    }

    /// Length of the final run of equal letters (0 for the empty word).
    pub fn final_run(&self) -> usize {
        match self.last() {
            None => 0,
            Some(c) => self.letters.iter().rev().take_while(|&&d| d == c).count(),
        }
    }

    pub fn with(&self, letter: u8) -> Self {
        assert!((1..=3).contains(&letter), "letter out of range");
        let mut letters = self.letters.clone();
        letters.push(letter);
        FiniteWord { letters }
    }

    pub fn concat(&self, other: &FiniteWord) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        FiniteWord { letters }
    }

    pub fn prefix(&self, n: usize) -> Self {
        FiniteWord {
            letters: self.letters[..n.min(self.len())].to_vec(),
        }
    }

    pub fn is_prefix_of(&self, other: &FiniteWord) -> bool {
        other.letters.starts_with(&self.letters)
    }

    pub fn permute(&self, perm: LetterPerm) -> Self {
        FiniteWord {
            letters: self.letters.iter().map(|&c| perm.apply(c)).collect(),
        }
    }

    /// All words of length `n` in index order.
    pub fn all(n: usize) -> impl Iterator<Item = FiniteWord> {
        (0..3usize.pow(n as u32)).map(move |k| FiniteWord::from_index(n, k))
    }
}

impl fmt::Display for FiniteWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("e");
        }
        for &c in &self.letters {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for FiniteWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteWord({self})")
    }
}

fn parse_letters(s: &str) -> Result<Vec<u8>, WordError> {
    s.chars()
        .map(|ch| match ch {
            '1' => Ok(1),
            '2' => Ok(2),
            '3' => Ok(3),
            _ => Err(WordError::Parse(s.to_string())),
        })
        .collect()
}

impl FromStr for FiniteWord {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "e" || s.is_empty() {
            return Ok(FiniteWord::empty());
        }
        Ok(FiniteWord {
            letters: parse_letters(s)?,
        })
    }
}

impl TryFrom<String> for FiniteWord {
    type Error = WordError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FiniteWord> for String {
    fn from(w: FiniteWord) -> String {
        w.to_string()
    }
}

/// An eventually periodic infinite word `prefix cycle cycle ...`, kept in
/// canonical form: primitive cycle, and a prefix that does not end with the
/// cycle's last letter.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BoundaryWord {
    prefix: Vec<u8>,
    cycle: Vec<u8>,
}

fn primitive_root(cycle: &[u8]) -> Vec<u8> {
    let n = cycle.len();
    for d in 1..=n {
        if n % d == 0 && (d..n).all(|k| cycle[k] == cycle[k - d]) {
            return cycle[..d].to_vec();
        }
    }
    cycle.to_vec()
}

impl BoundaryWord {
    pub fn new(prefix: Vec<u8>, cycle: Vec<u8>) -> Result<Self, WordError> {
        check(&prefix)?;
        check(&cycle)?;
        if cycle.is_empty() {
            return Err(WordError::EmptyCycle);
        }
        let mut prefix = prefix;
        let mut cycle = primitive_root(&cycle);
        // Absorb trailing prefix letters into the cycle by rotation.
        while let (Some(&p), Some(&c)) = (prefix.last(), cycle.last()) {
            if p != c {
                break;
            }
            prefix.pop();
            cycle.rotate_right(1);
        }
        Ok(BoundaryWord { prefix, cycle })
    }

    /// The word `prefix letter^infinity`.
    pub fn eventually_constant(prefix: &FiniteWord, letter: u8) -> Self {
        BoundaryWord::new(prefix.letters().to_vec(), vec![letter]).expect("valid letters")
    }

    /// The vertex point `i^infinity`.
    pub fn vertex(letter: u8) -> Self {
        BoundaryWord::new(Vec::new(), vec![letter]).expect("valid letter")
    }

    pub fn prefix(&self) -> FiniteWord {
        FiniteWord {
            letters: self.prefix.clone(),
        }
    }

    pub fn cycle(&self) -> FiniteWord {
        FiniteWord {
            letters: self.cycle.clone(),
        }
    }

    /// The k-th letter, counting from 0.
    pub fn letter(&self, k: usize) -> u8 {
        if k < self.prefix.len() {
            self.prefix[k]
        } else {
            self.cycle[(k - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// The restriction to the first `n` letters.
    pub fn truncate(&self, n: usize) -> FiniteWord {
        FiniteWord {
            letters: (0..n).map(|k| self.letter(k)).collect(),
        }
    }

    /// The left shift.
    pub fn shift(&self) -> Self {
        if self.prefix.is_empty() {
            let mut cycle = self.cycle.clone();
            cycle.rotate_left(1);
            BoundaryWord {
                prefix: Vec::new(),
                cycle,
            }
        } else {
            BoundaryWord::new(self.prefix[1..].to_vec(), self.cycle.clone())
                .expect("shift keeps letters valid")
        }
    }

    /// `Some(i)` for the fixed points `i^infinity`.
    pub fn vertex_letter(&self) -> Option<u8> {
        (self.prefix.is_empty() && self.cycle.len() == 1).then(|| self.cycle[0])
    }

    /// Length `t` of the leading run and its letter: the word is
    /// `i^t j ...` with `j != i`. `None` for `i^infinity`.
    pub fn head(&self) -> Option<(u8, usize)> {
        self.vertex_letter().map_or_else(
            || {
                let i = self.letter(0);
                let t = (0..).take_while(|&k| self.letter(k) == i).count();
                Some((i, t))
            },
            |_| None,
        )
    }

    pub fn permute(&self, perm: LetterPerm) -> Self {
        BoundaryWord::new(
            self.prefix.iter().map(|&c| perm.apply(c)).collect(),
            self.cycle.iter().map(|&c| perm.apply(c)).collect(),
        )
        .expect("permutation keeps letters valid")
    }

    /// Prefix length after which the word is periodic.
    pub fn preperiod(&self) -> usize {
        self.prefix.len()
    }

    pub fn period(&self) -> usize {
        self.cycle.len()
    }
}

impl fmt::Display for BoundaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &c in &self.prefix {
            write!(f, "{c}")?;
        }
        f.write_str("(")?;
        for &c in &self.cycle {
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for BoundaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoundaryWord({self})")
    }
}

impl FromStr for BoundaryWord {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || WordError::Parse(s.to_string());
        let open = s.find('(').ok_or_else(bad)?;
        let body = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        if body.is_empty() {
            return Err(bad());
        }
        BoundaryWord::new(parse_letters(&s[..open])?, parse_letters(body)?)
    }
}

impl TryFrom<String> for BoundaryWord {
    type Error = WordError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BoundaryWord> for String {
    fn from(w: BoundaryWord) -> String {
        w.to_string()
    }
}

/// Either kind of word, as accepted by the metric and the command line.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AnyWord {
    Finite(FiniteWord),
    Boundary(BoundaryWord),
}

impl FromStr for AnyWord {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains('(') {
            s.parse().map(AnyWord::Boundary)
        } else {
            s.parse().map(AnyWord::Finite)
        }
    }
}

impl fmt::Display for AnyWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnyWord::Finite(w) => w.fmt(f),
            AnyWord::Boundary(w) => w.fmt(f),
        }
    }
}

/// True iff `x = y` or `x = w l k^inf`, `y = w k l^inf` for distinct `k, l`.
pub fn pi_equivalent(x: &BoundaryWord, y: &BoundaryWord) -> bool {
    if x == y {
        return true;
    }
    if x.cycle.len() != 1 || y.cycle.len() != 1 || x.prefix.len() != y.prefix.len() {
        return false;
    }
    let m = x.prefix.len();
    if m == 0 || x.prefix[..m - 1] != y.prefix[..m - 1] {
        return false;
    }
    let (k, l) = (x.cycle[0], y.cycle[0]);
    k != l && x.prefix[m - 1] == l && y.prefix[m - 1] == k
}

/// The other member of a two-point class, if any.
pub fn pi_partner(x: &BoundaryWord) -> Option<BoundaryWord> {
    if x.cycle.len() != 1 || x.prefix.is_empty() {
        return None;
    }
    let m = x.prefix.len();
    let (k, l) = (x.cycle[0], x.prefix[m - 1]);
    let mut prefix = x.prefix.clone();
    prefix[m - 1] = k;
    Some(BoundaryWord::new(prefix, vec![l]).expect("valid letters"))
}

/// `2^-(longest common prefix)`, and 0 for equal words.
pub fn d_metric(x: &BoundaryWord, y: &BoundaryWord) -> f64 {
    if x == y {
        return 0.0;
    }
    // Distinct eventually periodic words differ within this many letters.
    let horizon = x.preperiod().max(y.preperiod()) + x.period() * y.period();
    let lcp = (0..=horizon)
        .take_while(|&k| x.letter(k) == y.letter(k))
        .count();
    0.5f64.powi(lcp as i32)
}

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn dist(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The fixed point `q_i` of the contraction `S_i`.
pub fn corner(letter: u8) -> Point2D {
    match letter {
        1 => Point2D::new(0.5, 3f64.sqrt() / 2.0),
        2 => Point2D::new(0.0, 0.0),
        3 => Point2D::new(1.0, 0.0),
        _ => panic!("letter out of range"),
    }
}

/// `S_i(z) = (z + q_i) / 2`.
pub fn contract(letter: u8, z: Point2D) -> Point2D {
    let q = corner(letter);
    Point2D::new((z.x + q.x) / 2.0, (z.y + q.y) / 2.0)
}

fn apply_word(letters: &[u8], z: Point2D) -> Point2D {
    letters.iter().rev().fold(z, |acc, &c| contract(c, acc))
}

/// The standard projection onto the gasket.
///
/// The periodic tail is the fixed point of the affine map `S_cycle`, which
/// is solved in closed form, so the result carries only rounding error.
pub fn project(w: &BoundaryWord) -> Point2D {
    let l = w.cycle.len() as i32;
    // S_cycle(z) = z / 2^l + sum_k q_{c_k} / 2^k
    let (mut sx, mut sy) = (0.0, 0.0);
    for (k, &c) in w.cycle.iter().enumerate() {
        let q = corner(c);
        let scale = 0.5f64.powi(k as i32 + 1);
        sx += q.x * scale;
        sy += q.y * scale;
    }
    let denom = 1.0 - 0.5f64.powi(l);
    let fixed = Point2D::new(sx / denom, sy / denom);
    apply_word(&w.prefix, fixed)
}

/// The gasket vertex `S_w(q_i)`.
pub fn vertex_point(w: &FiniteWord, letter: u8) -> Point2D {
    apply_word(w.letters(), corner(letter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bw(s: &str) -> BoundaryWord {
        s.parse().unwrap()
    }

    fn close(a: Point2D, b: Point2D) -> bool {
        a.dist(&b) < 1e-14
    }

    #[test]
    fn shift_examples() {
        assert_eq!(bw("12(3)").shift(), bw("2(3)"));
        assert_eq!(bw("(3)").shift(), bw("(3)"));
        assert_eq!(bw("(12)").shift(), bw("(21)"));
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(bw("122(2)"), bw("1(2)"));
        assert_eq!(bw("(1212)"), bw("(12)"));
        assert_eq!(bw("1(21)"), bw("(12)"));
        assert_eq!(bw("3(33)").to_string(), "(3)");
    }

    #[test]
    fn project_examples() {
        assert!(close(project(&bw("(2)")), Point2D::new(0.0, 0.0)));
        assert!(close(
            project(&bw("(1)")),
            Point2D::new(0.5, 3f64.sqrt() / 2.0)
        ));
        let s3 = 3f64.sqrt();
        assert!(close(project(&bw("1(2)")), Point2D::new(0.25, s3 / 4.0)));
    }

    #[test]
    fn project_agrees_with_iteration() {
        let w = bw("13(21)");
        let z = apply_word(w.truncate(60).letters(), Point2D::new(0.3, 0.1));
        assert!(project(&w).dist(&z) < 1e-12);
    }

    #[test]
    fn pi_equivalence_examples() {
        assert!(pi_equivalent(&bw("1(2)"), &bw("2(1)")));
        assert!(!pi_equivalent(&bw("(1)"), &bw("(2)")));
        assert!(pi_equivalent(&bw("31(2)"), &bw("32(1)")));
        assert!(!pi_equivalent(&bw("31(2)"), &bw("22(1)")));
        assert_eq!(pi_partner(&bw("31(2)")), Some(bw("32(1)")));
        assert_eq!(pi_partner(&bw("(12)")), None);
    }

    #[test]
    fn d_metric_examples() {
        assert_eq!(d_metric(&bw("(1)"), &bw("(1)")), 0.0);
        assert_eq!(d_metric(&bw("1(2)"), &bw("1(3)")), 0.5);
        assert_eq!(d_metric(&bw("(1)"), &bw("(2)")), 1.0);
        assert_eq!(d_metric(&bw("(12)"), &bw("1212(3)")), 0.5f64.powi(4));
    }

    #[test]
    fn vertex_point_examples() {
        let s3 = 3f64.sqrt();
        assert!(close(
            vertex_point(&FiniteWord::empty(), 2),
            Point2D::new(0.0, 0.0)
        ));
        let w1: FiniteWord = "1".parse().unwrap();
        assert!(close(vertex_point(&w1, 3), Point2D::new(0.75, s3 / 4.0)));
        assert!(close(vertex_point(&w1, 3), project(&bw("1(3)"))));
        let w22: FiniteWord = "22".parse().unwrap();
        assert!(close(vertex_point(&w22, 1), Point2D::new(0.125, s3 / 8.0)));
    }

    #[test]
    fn index_round_trip() {
        for n in 0..5 {
            for (k, w) in FiniteWord::all(n).enumerate() {
                assert_eq!(w.index(), k);
                assert_eq!(w.len(), n);
            }
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("e".parse::<FiniteWord>().unwrap(), FiniteWord::empty());
        assert!("124".parse::<FiniteWord>().is_err());
        assert!("12()".parse::<BoundaryWord>().is_err());
        assert!("12(3".parse::<BoundaryWord>().is_err());
        assert_eq!(
            "12(3)".parse::<AnyWord>().unwrap(),
            AnyWord::Boundary(bw("12(3)"))
        );
    }

    #[test]
    fn head_extraction() {
        assert_eq!(bw("2(3)").head(), Some((2, 1)));
        assert_eq!(bw("11(2)").head(), Some((1, 2)));
        assert_eq!(bw("(1)").head(), None);
        assert_eq!(bw("(12)").head(), Some((1, 1)));
    }
}
