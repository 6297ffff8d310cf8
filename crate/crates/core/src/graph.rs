//! Level graphs on `Σ^n` and their cells.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::words::{FiniteWord, LETTERS};

/// Largest level the graph builder accepts.
pub const MAX_LEVEL: usize = 14;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("level {0} outside 1..={MAX_LEVEL}")]
    Level(usize),
    #[error("word {word} has length {len}, expected {level}")]
    LengthMismatch {
        word: String,
        len: usize,
        level: usize,
    },
    #[error("cell needs 1 <= m <= n and |stem| = m - 1 (got m={m}, n={n}, stem {stem})")]
    Cell { stem: String, m: usize, n: usize },
}

/// The graph with vertex set `Σ^n`, vertices indexed in base 3.
#[derive(Debug, Clone)]
pub struct LevelGraph {
    level: usize,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
}

impl LevelGraph {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Edges as index pairs with the smaller index first, in construction order.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degree(&self, index: usize) -> usize {
        self.adjacency[index].len()
    }

    pub fn neighbor_indices(&self, index: usize) -> &[u32] {
        &self.adjacency[index]
    }

    /// The three vertices `1^n, 2^n, 3^n`.
    pub fn boundary(&self) -> [FiniteWord; 3] {
        LETTERS.map(|i| FiniteWord::power(i, self.level))
    }

    pub fn neighbors(&self, u: &FiniteWord) -> Result<BTreeSet<FiniteWord>, GraphError> {
        if u.len() != self.level {
            return Err(GraphError::LengthMismatch {
                word: u.to_string(),
                len: u.len(),
                level: self.level,
            });
        }
        Ok(self.adjacency[u.index()]
            .iter()
            .map(|&v| FiniteWord::from_index(self.level, v as usize))
            .collect())
    }

    /// Graphviz rendering with word labels.
    pub fn to_dot(&self) -> String {
        let mut out = format!("graph gamma{} {{\n", self.level);
        for k in 0..self.vertex_count() {
            let _ = writeln!(
                out,
                "  v{k} [label=\"{}\"];",
                FiniteWord::from_index(self.level, k)
            );
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  v{a} -- v{b};");
        }
        out.push_str("}\n");
        out
    }
}

/// Index of `i^m` among the words of length `m` (`i` as a digit 0..3).
fn vertex_index(digit: usize, m: usize) -> usize {
    digit * (3usize.pow(m as u32) - 1) / 2
}

/// Build the level-`n` graph: three prefixed copies of the previous level
/// joined by the bridges `(l k^{n-1}, k l^{n-1})`.
pub fn build_graph(n: usize) -> Result<LevelGraph, GraphError> {
    if !(1..=MAX_LEVEL).contains(&n) {
        return Err(GraphError::Level(n));
    }
    let mut edges: Vec<(u32, u32)> = vec![(0, 1), (0, 2), (1, 2)];
    for m in 2..=n {
        let block = 3usize.pow(m as u32 - 1);
        let mut next = Vec::with_capacity(3 * edges.len() + 3);
        for copy in 0..3 {
            let off = (copy * block) as u32;
            next.extend(edges.iter().map(|&(a, b)| (a + off, b + off)));
        }
        for (l, k) in [(0usize, 1usize), (0, 2), (1, 2)] {
            // l k^{m-1} and k l^{m-1}
            let a = l * block + vertex_index(k, m - 1);
            let b = k * block + vertex_index(l, m - 1);
            next.push((a.min(b) as u32, a.max(b) as u32));
        }
        edges = next;
    }
    let mut adjacency = vec![Vec::with_capacity(3); 3usize.pow(n as u32)];
    for &(a, b) in &edges {
        adjacency[a as usize].push(b);
        adjacency[b as usize].push(a);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }
    Ok(LevelGraph {
        level: n,
        edges,
        adjacency,
    })
}

/// The `(m, n)`-cell with stem `ω` of length `m - 1`: all words `ω i_m ... i_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub stem: FiniteWord,
    pub m: usize,
    pub n: usize,
}

impl Cell {
    pub fn new(stem: FiniteWord, m: usize, n: usize) -> Result<Self, GraphError> {
        if m < 1 || m > n || stem.len() != m - 1 {
            return Err(GraphError::Cell {
                stem: stem.to_string(),
                m,
                n,
            });
        }
        Ok(Cell { stem, m, n })
    }

    pub fn members(&self) -> Vec<FiniteWord> {
        FiniteWord::all(self.n - self.m + 1)
            .map(|tail| self.stem.concat(&tail))
            .collect()
    }

    /// The outer vertices `ω i^{n-m+1}`.
    pub fn outer(&self) -> [FiniteWord; 3] {
        LETTERS.map(|i| self.stem.concat(&FiniteWord::power(i, self.n - self.m + 1)))
    }

    pub fn contains(&self, u: &FiniteWord) -> bool {
        u.len() == self.n && self.stem.is_prefix_of(u)
    }
}

pub fn cell(stem: FiniteWord, m: usize, n: usize) -> Result<Cell, GraphError> {
    Cell::new(stem, m, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{pi_equivalent, BoundaryWord};

    fn w(s: &str) -> FiniteWord {
        s.parse().unwrap()
    }

    /// Independent edge rule: same-cell neighbours plus the bridge pairs.
    fn brute_edges(n: usize) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        let words: Vec<_> = FiniteWord::all(n).collect();
        for u in &words {
            for v in &words {
                let (a, b) = (u.letters(), v.letters());
                if a >= b {
                    continue;
                }
                let k = a.iter().zip(b).take_while(|(x, y)| x == y).count();
                let (l, r) = (a[k], b[k]);
                if a[k + 1..].iter().all(|&c| c == r) && b[k + 1..].iter().all(|&c| c == l) {
                    out.insert((u.index(), v.index()));
                }
            }
        }
        out
    }

    #[test]
    fn level_one_edges() {
        let g = build_graph(1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn edge_counts_match_closed_form() {
        for n in 1..=6 {
            let g = build_graph(n).unwrap();
            assert_eq!(g.edges().len(), 3 * (3usize.pow(n as u32) - 1) / 2);
            let deg2 = (0..g.vertex_count()).filter(|&k| g.degree(k) == 2).count();
            let deg3 = (0..g.vertex_count()).filter(|&k| g.degree(k) == 3).count();
            assert_eq!((deg2, deg3), (3, g.vertex_count() - 3));
        }
    }

    #[test]
    fn construction_matches_edge_rule() {
        for n in 1..=5 {
            let g = build_graph(n).unwrap();
            let built: BTreeSet<_> = g
                .edges()
                .iter()
                .map(|&(a, b)| (a as usize, b as usize))
                .collect();
            assert_eq!(built, brute_edges(n), "level {n}");
        }
    }

    #[test]
    fn neighbor_examples() {
        let g2 = build_graph(2).unwrap();
        let g3 = build_graph(3).unwrap();
        let set = |v: &[&str]| v.iter().map(|s| w(s)).collect::<BTreeSet<_>>();
        assert_eq!(g2.neighbors(&w("12")).unwrap(), set(&["11", "13", "21"]));
        assert_eq!(g2.neighbors(&w("11")).unwrap(), set(&["12", "13"]));
        assert_eq!(
            g3.neighbors(&w("122")).unwrap(),
            set(&["121", "123", "211"])
        );
        assert!(g3.neighbors(&w("12")).is_err());
        assert!(g2
            .edges()
            .contains(&(w("12").index() as u32, w("21").index() as u32)));
    }

    #[test]
    fn bridges_are_pi_equivalent_pairs() {
        for n in 2..=5 {
            let g = build_graph(n).unwrap();
            for &(a, b) in g.edges() {
                let (u, v) = (
                    FiniteWord::from_index(n, a as usize),
                    FiniteWord::from_index(n, b as usize),
                );
                let k = u
                    .letters()
                    .iter()
                    .zip(v.letters())
                    .take_while(|(x, y)| x == y)
                    .count();
                if k + 1 == n {
                    continue; // same n-cell
                }
                let stem = u.prefix(k + 1);
                let x = BoundaryWord::eventually_constant(&stem, u.letters()[n - 1]);
                let y = BoundaryWord::eventually_constant(&v.prefix(k + 1), v.letters()[n - 1]);
                assert!(pi_equivalent(&x, &y), "{u} ~ {v}");
            }
        }
    }

    #[test]
    fn cell_examples() {
        let c = cell(FiniteWord::empty(), 1, 2).unwrap();
        assert_eq!(c.members().len(), 9);
        assert_eq!(c.outer(), [w("11"), w("22"), w("33")]);
        let c = cell(w("1"), 2, 2).unwrap();
        assert_eq!(c.members(), vec![w("11"), w("12"), w("13")]);
        assert_eq!(c.outer().to_vec(), c.members());
        let c = cell(w("1"), 2, 3).unwrap();
        assert_eq!(c.members().len(), 9);
        assert_eq!(c.outer(), [w("111"), w("122"), w("133")]);
        assert!(cell(w("12"), 2, 3).is_err());
        assert!(cell(FiniteWord::empty(), 2, 1).is_err());
    }

    #[test]
    fn cells_containing_a_vertex_are_nested() {
        let n = 5;
        for u in FiniteWord::all(n).filter(|u| u.vertex_letter().is_none()) {
            let chain: Vec<Cell> = (1..=n)
                .map(|m| cell(u.prefix(m - 1), m, n).unwrap())
                .collect();
            for pair in chain.windows(2) {
                let inner: BTreeSet<_> = pair[1].members().into_iter().collect();
                let outer: BTreeSet<_> = pair[0].members().into_iter().collect();
                assert!(inner.is_subset(&outer));
                assert!(pair[1].contains(&u));
            }
        }
    }

    #[test]
    fn level_bounds() {
        assert_eq!(build_graph(0).unwrap_err(), GraphError::Level(0));
        assert!(build_graph(MAX_LEVEL + 1).is_err());
    }

    #[test]
    fn dot_export_lists_every_edge() {
        let g = build_graph(2).unwrap();
        let dot = g.to_dot();
        assert_eq!(dot.matches(" -- ").count(), 12);
        assert!(dot.contains("label=\"12\""));
    }
}
