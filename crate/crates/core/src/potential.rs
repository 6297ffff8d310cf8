//! Hitting probabilities, the Green function and the Martin kernel.
//!
//! The walk never returns to a level it has left, so every quantity reduces
//! to finite problems on single levels. Within level `n` the walk runs on
//! `Γ^n` until it is absorbed at a corner `i^n`, after which it steps to
//! `i^n k` with probability 1/3 each. A hitting probability `ρ_{x,y}` with
//! `|y| > |x|` is the corner distribution carried down to level `|y| - 1`,
//! spread over the nine entry words `i^{|y|-1} k`, and finished by one
//! absorption solve on `Γ^{|y|}`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::MAX_LEVEL;
use crate::kernel::{interior_neighbors, ChainParams, ParamError};
use crate::linalg::{LinalgError, SparseLu, SparseMatrix};
use crate::matrices::{rho_boundary, Levels, MatrixError};
use crate::scalar::{Field, Scalar};
use crate::words::{third, BoundaryWord, FiniteWord, LETTERS};

/// Deepest level [`Potential::kernel_at_boundary`] may reach while doubling.
pub const MAX_KERNEL_LEVEL: usize = 1024;

/// Relative tolerance for agreement checks between two float routes.
pub const FLOAT_AGREEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("level {0} outside 1..={MAX_LEVEL}")]
    Level(usize),
    #[error("kernel forms disagree for ({x}, {y}): {first} vs {second}")]
    KernelMismatch {
        x: String,
        y: String,
        first: f64,
        second: f64,
    },
    #[error("no Cauchy behaviour by level {level} (last gap {gap:e})")]
    NotCauchy { level: usize, gap: f64 },
    #[error("tolerance must be positive")]
    BadTolerance,
}

fn corner_index(letter: u8, n: usize) -> usize {
    (letter as usize - 1) * (3usize.pow(n as u32) - 1) / 2
}

fn final_run_of_index(mut idx: usize, n: usize) -> usize {
    let last = idx % 3;
    let mut run = 0;
    while run < n && idx % 3 == last {
        run += 1;
        idx /= 3;
    }
    run
}

const NONE: u32 = u32::MAX;

/// The walk on `Γ^n` stopped at a set of absorbing words that contains the
/// three corners. The solved form answers absorption and visit questions
/// for every start word at once.
#[derive(Debug)]
pub struct AbsorptionSystem<S> {
    level: usize,
    absorbing: Vec<usize>,
    position: Vec<u32>,
    order: Vec<u32>,
    /// Per unknown: the absorbing words reachable in one step.
    exits: Vec<Vec<(u32, S)>>,
    lu: SparseLu<S>,
}

impl<S: Field> AbsorptionSystem<S> {
    /// Factor `I - Q` on the transient words. Elimination runs from short
    /// final runs to long ones, which collapses each cell onto its corners
    /// and keeps fill bounded by a constant per word.
    pub fn build(
        params: &ChainParams,
        level: usize,
        extra: &[usize],
    ) -> Result<Self, PotentialError> {
        if !(1..=MAX_LEVEL).contains(&level) {
            return Err(PotentialError::Level(level));
        }
        let size = 3usize.pow(level as u32);
        let mut absorbing: Vec<usize> = LETTERS.iter().map(|&i| corner_index(i, level)).collect();
        absorbing.extend(extra.iter().copied().filter(|&x| x < size));
        absorbing.sort_unstable();
        absorbing.dedup();
        let mut position = vec![0u32; size];
        for &a in &absorbing {
            position[a] = NONE;
        }
        let mut order: Vec<u32> = (0..size as u32)
            .filter(|&k| position[k as usize] != NONE)
            .collect();
        order.sort_by_key(|&k| (final_run_of_index(k as usize, level), k));
        for (pos, &k) in order.iter().enumerate() {
            position[k as usize] = pos as u32;
        }
        let p: S = params.p()?;
        let q: S = params.q()?;
        let mut matrix = SparseMatrix::new(order.len());
        let mut exits = Vec::with_capacity(order.len());
        for (pos, &k) in order.iter().enumerate() {
            let u = FiniteWord::from_index(level, k as usize);
            let (v, w, z) = interior_neighbors(&u).expect("transient words are interior");
            matrix.add(pos, pos, S::one_value())?;
            let mut out = Vec::new();
            for (t, prob) in [(v, p.clone()), (w, p.clone()), (z, q.clone())] {
                let t = t.index();
                match position[t] {
                    NONE => out.push((t as u32, prob)),
                    col => matrix.add(pos, col as usize, S::zero_value() - prob)?,
                }
            }
            exits.push(out);
        }
        let lu = SparseLu::factor(matrix)?;
        Ok(AbsorptionSystem {
            level,
            absorbing,
            position,
            order,
            exits,
            lu,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn absorbing(&self) -> &[usize] {
        &self.absorbing
    }

    pub fn is_absorbing(&self, idx: usize) -> bool {
        self.position[idx] == NONE
    }

    /// Number of stored entries in the factors.
    pub fn fill(&self) -> usize {
        self.lu.fill()
    }

    /// For each word, the probability of being absorbed at `target` (an
    /// absorbing word); indicator values on the absorbing set.
    pub fn absorption(&self, target: usize) -> Vec<S> {
        assert!(self.is_absorbing(target), "target must be absorbing");
        let b: Vec<S> = self
            .exits
            .iter()
            .map(|ex| {
                ex.iter()
                    .filter(|(t, _)| *t as usize == target)
                    .fold(S::zero_value(), |acc, (_, x)| acc + x.clone())
            })
            .collect();
        let x = self.lu.solve(&b);
        self.scatter(&x, |idx| {
            if idx == target {
                S::one_value()
            } else {
                S::zero_value()
            }
        })
    }

    /// Expected visits to the transient word `y` before absorption, from
    /// every start word. `None` if `y` is absorbing.
    pub fn visits_to(&self, y: usize) -> Option<Vec<S>> {
        let col = self.position[y];
        if col == NONE {
            return None;
        }
        let mut b = vec![S::zero_value(); self.order.len()];
        b[col as usize] = S::one_value();
        let x = self.lu.solve(&b);
        Some(self.scatter(&x, |_| S::zero_value()))
    }

    /// Expected visits to each word from the start distribution `start`;
    /// on absorbing words this is the probability of ending there.
    pub fn visits_from(&self, start: &[(usize, S)]) -> Vec<S> {
        let mut b = vec![S::zero_value(); self.order.len()];
        let mut out_abs: HashMap<usize, S> = HashMap::new();
        for (idx, w) in start {
            match self.position[*idx] {
                NONE => {
                    let e = out_abs.entry(*idx).or_insert_with(S::zero_value);
                    *e = e.clone() + w.clone();
                }
                pos => b[pos as usize] = b[pos as usize].clone() + w.clone(),
            }
        }
        let g = self.lu.solve_transpose(&b);
        for (pos, ex) in self.exits.iter().enumerate() {
            for (t, prob) in ex {
                let e = out_abs.entry(*t as usize).or_insert_with(S::zero_value);
                *e = e.clone() + g[pos].clone() * prob.clone();
            }
        }
        self.scatter(&g, |idx| {
            out_abs.get(&idx).cloned().unwrap_or_else(S::zero_value)
        })
    }

    /// `G(y, y)` restricted to this level, for every transient `y`; zero on
    /// absorbing words.
    pub fn visit_diagonal(&self) -> Vec<S> {
        let diag: Vec<S> = (0..self.order.len())
            .into_par_iter()
            .map(|pos| {
                let mut b = vec![S::zero_value(); self.order.len()];
                b[pos] = S::one_value();
                self.lu.solve(&b)[pos].clone()
            })
            .collect();
        self.scatter(&diag, |_| S::zero_value())
    }

    fn scatter(&self, x: &[S], absorbing_value: impl Fn(usize) -> S) -> Vec<S> {
        (0..self.position.len())
            .map(|idx| match self.position[idx] {
                NONE => absorbing_value(idx),
                pos => x[pos as usize].clone(),
            })
            .collect()
    }
}

/// A Green function value.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenValue<S> {
    pub value: S,
    pub exact: bool,
}

type SystemKey = (usize, Vec<usize>);

/// Potential theory for one parameter, with a memo of solved systems keyed
/// by level and absorbing set.
#[derive(Debug)]
pub struct Potential<S> {
    levels: Levels<S>,
    systems: Mutex<HashMap<SystemKey, Arc<AbsorptionSystem<S>>>>,
}

impl<S: Scalar> Potential<S> {
    pub fn new(params: &ChainParams) -> Result<Self, PotentialError> {
        Ok(Potential {
            levels: Levels::new(params)?,
            systems: Mutex::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &ChainParams {
        self.levels.params()
    }

    pub fn levels(&self) -> &Levels<S> {
        &self.levels
    }

    /// The solved system on `Γ^level` absorbing at the corners and `extra`.
    /// Concurrent callers may both build a missing entry; the first insert
    /// wins, so every reader sees one value per key.
    pub fn system(
        &self,
        level: usize,
        extra: &[FiniteWord],
    ) -> Result<Arc<AbsorptionSystem<S>>, PotentialError> {
        let corners: Vec<usize> = LETTERS.iter().map(|&i| corner_index(i, level)).collect();
        let mut key: Vec<usize> = extra
            .iter()
            .map(FiniteWord::index)
            .filter(|k| !corners.contains(k))
            .collect();
        key.sort_unstable();
        key.dedup();
        let key = (level, key);
        if let Some(sys) = self.systems.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(sys));
        }
        let built = Arc::new(AbsorptionSystem::build(self.params(), level, &key.1)?);
        let mut cache = self.systems.lock().expect("cache poisoned");
        Ok(Arc::clone(cache.entry(key).or_insert(built)))
    }

    /// Distribution of the corner of `Γ^level` through which the walk from
    /// `x` leaves that level (`level >= max(|x|, 1)`).
    pub fn exit_distribution(
        &self,
        x: &FiniteWord,
        level: usize,
    ) -> Result<[S; 3], PotentialError> {
        let third = S::from_ratio(1, 3);
        let (start, m) = if x.is_empty() {
            ([third.clone(), third.clone(), third.clone()], 1)
        } else {
            (self.levels.rho(x)?, x.len())
        };
        if level < m {
            return Err(PotentialError::Level(level));
        }
        let f = self.levels.contraction(m, level)?;
        Ok(start.map(|v| third.clone() + f.clone() * (v - third.clone())))
    }

    /// Absorption distribution over the corners by direct solve on `Γ^{|x|}`.
    pub fn corner_distribution(&self, x: &FiniteWord) -> Result<[S; 3], PotentialError> {
        if x.is_empty() {
            return Err(MatrixError::EmptyWord.into());
        }
        let sys = self.system(x.len(), &[])?;
        let mut out = [S::zero_value(), S::zero_value(), S::zero_value()];
        for i in LETTERS {
            out[i as usize - 1] = sys.absorption(corner_index(i, x.len()))[x.index()].clone();
        }
        Ok(out)
    }

    /// Entry distribution into level `n >= 2` for the walk from `x`
    /// (`|x| < n`), as (word index, probability) pairs.
    fn entries(&self, x: &FiniteWord, n: usize) -> Result<Vec<(usize, S)>, PotentialError> {
        let e = self.exit_distribution(x, n - 1)?;
        let third = S::from_ratio(1, 3);
        let mut out = Vec::with_capacity(9);
        for i in LETTERS {
            let stem = FiniteWord::power(i, n - 1);
            for k in LETTERS {
                out.push((
                    stem.with(k).index(),
                    e[i as usize - 1].clone() * third.clone(),
                ));
            }
        }
        Ok(out)
    }

    /// `ρ_{x,y}`, the probability that the walk from `x` ever visits `y`.
    pub fn hitting_probability(&self, x: &FiniteWord, y: &FiniteWord) -> Result<S, PotentialError> {
        let mut out = self.hitting_many(std::slice::from_ref(x), y)?;
        Ok(out.pop().expect("one start"))
    }

    /// `ρ_{x,y}` for several starts `x`, sharing one absorption solve.
    pub fn hitting_many(
        &self,
        xs: &[FiniteWord],
        y: &FiniteWord,
    ) -> Result<Vec<S>, PotentialError> {
        let n = y.len();
        if n == 0 {
            return Ok(xs
                .iter()
                .map(|x| {
                    if x.is_empty() {
                        S::one_value()
                    } else {
                        S::zero_value()
                    }
                })
                .collect());
        }
        let sys = self.system(n, std::slice::from_ref(y))?;
        let h = sys.absorption(y.index());
        xs.iter()
            .map(|x| {
                let m = x.len();
                if x == y {
                    Ok(S::one_value())
                } else if n < m || (n == m && x.vertex_letter().is_some()) {
                    // Same level: a corner start leaves at once.
                    Ok(S::zero_value())
                } else if n == m {
                    Ok(h[x.index()].clone())
                } else if n == 1 {
                    Ok(S::from_ratio(1, 3))
                } else {
                    Ok(self
                        .entries(x, n)?
                        .into_iter()
                        .fold(S::zero_value(), |acc, (u, w)| acc + w * h[u].clone()))
                }
            })
            .collect()
    }

    /// `ρ̃_{y,y}`: probability of returning to `y` after leaving it.
    pub fn return_probability(&self, y: &FiniteWord) -> Result<S, PotentialError> {
        let Some((v, w, z)) = interior_neighbors(y) else {
            return Ok(S::zero_value());
        };
        let sys = self.system(y.len(), std::slice::from_ref(y))?;
        let h = sys.absorption(y.index());
        let p: S = self.params().p()?;
        let q: S = self.params().q()?;
        Ok(p.clone() * h[v.index()].clone() + p * h[w.index()].clone() + q * h[z.index()].clone())
    }

    /// `G(x, y) = ρ_{x,y} / (1 - ρ̃_{y,y})`.
    pub fn green(&self, x: &FiniteWord, y: &FiniteWord) -> Result<GreenValue<S>, PotentialError> {
        let rho = self.hitting_probability(x, y)?;
        let back = self.return_probability(y)?;
        Ok(GreenValue {
            value: rho / (S::one_value() - back),
            exact: S::EXACT,
        })
    }

    /// `K(x, y)`, computed as `ρ_{x,y}/ρ_{ϑ,y}` and as `G(x,y)/G(ϑ,y)`; the
    /// two forms must agree.
    pub fn martin_kernel(&self, x: &FiniteWord, y: &FiniteWord) -> Result<S, PotentialError> {
        let root = FiniteWord::empty();
        let by_rho = self.hitting_probability(x, y)? / self.hitting_probability(&root, y)?;
        let by_green = self.green(x, y)?.value / self.green(&root, y)?.value;
        if !by_rho.close(&by_green, FLOAT_AGREEMENT_TOL) {
            return Err(PotentialError::KernelMismatch {
                x: x.to_string(),
                y: y.to_string(),
                first: by_rho.to_f64(),
                second: by_green.to_f64(),
            });
        }
        Ok(by_rho)
    }

    /// `C_x = 1/ρ_{ϑ,x}`, the bound `K(x, ·) <= C_x`.
    pub fn kernel_bound(&self, x: &FiniteWord) -> Result<S, PotentialError> {
        Ok(S::one_value() / self.hitting_probability(&FiniteWord::empty(), x)?)
    }

    /// `ρ_{ϑ,z}` for every `z` of length `n`, from one transposed solve and
    /// the diagonal of the level's visit matrix: `ρ_{ϑ,z} = G(ϑ,z)/G(z,z)`.
    pub fn root_hitting(&self, n: usize) -> Result<Vec<S>, PotentialError> {
        if n == 0 {
            return Ok(vec![S::one_value()]);
        }
        if n == 1 {
            return Ok(vec![S::from_ratio(1, 3); 3]);
        }
        let sys = self.system(n, &[])?;
        let g = sys.visits_from(&self.entries(&FiniteWord::empty(), n)?);
        let diag = sys.visit_diagonal();
        Ok(g.into_iter()
            .zip(diag)
            .enumerate()
            .map(|(idx, (g, d))| if sys.is_absorbing(idx) { g } else { g / d })
            .collect())
    }
}

/// The constant in the boundary limits of the Green function, `1/(15p)`.
pub fn green_limit_constant(params: &ChainParams) -> f64 {
    1.0 / (15.0 * params.p_f64())
}

/// A boundary limit of the Green function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenLimit {
    pub value: f64,
    /// Set for the fixed points `i^∞`, where the formula is applied beyond
    /// its stated range.
    pub extrapolated: bool,
}

/// `lim_n G(j^{n-1}, x|_n)` by the closed formula with `c = 1/(15p)`:
/// writing `x = i^t i_{t+1} ...` with `i_{t+1} != i` and `{j, k} = Σ \ {i}`,
/// the limit is `c (2ρ_j + ρ_k)` for `j != i` and `c (5ρ_i + 2ρ_j + 2ρ_k)`
/// for `j = i`, with `ρ = ρ(σx)`.
pub fn green_boundary_limit(
    params: &ChainParams,
    j: u8,
    x: &BoundaryWord,
    tol: f64,
) -> Result<GreenLimit, PotentialError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(PotentialError::BadTolerance);
    }
    let c = green_limit_constant(params);
    let (i, rho, extrapolated) = match x.head() {
        Some((i, _)) => (i, rho_boundary(&x.shift(), tol)?, false),
        None => {
            let i = x.vertex_letter().expect("heads exist off the fixed points");
            (i, rho_boundary(x, tol)?, true)
        }
    };
    let r = |l: u8| rho[l as usize - 1];
    let value = if j == i {
        let others = LETTERS
            .iter()
            .filter(|&&l| l != i)
            .map(|&l| r(l))
            .sum::<f64>();
        c * (5.0 * r(i) + 2.0 * others)
    } else {
        c * (2.0 * r(j) + r(third(i, j)))
    };
    Ok(GreenLimit {
        value,
        extrapolated,
    })
}

/// A boundary kernel value and the level at which doubling stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryKernel {
    pub value: f64,
    pub level: usize,
}

impl Potential<f64> {
    /// `K(z, x) = lim_n K(z, x|_n)` through the cut at the corners of level
    /// `n - 1`: `Σ_i ρ_{z,i^{n-1}} L_i / ((1/3) Σ_i L_i)` with `L_i` the
    /// Green limits. Evaluated at `n` and `2n` until the two agree to `tol`.
    pub fn kernel_at_boundary(
        &self,
        z: &FiniteWord,
        x: &BoundaryWord,
        tol: f64,
    ) -> Result<BoundaryKernel, PotentialError> {
        let limits =
            LETTERS.map(|j| green_boundary_limit(self.params(), j, x, tol * 1e-3).map(|g| g.value));
        let mut l = [0.0; 3];
        for (slot, v) in l.iter_mut().zip(limits) {
            *slot = v?;
        }
        self.kernel_with_limits(z, &l, tol)
    }

    /// [`Potential::kernel_at_boundary`] with precomputed Green limits.
    pub fn kernel_with_limits(
        &self,
        z: &FiniteWord,
        limits: &[f64; 3],
        tol: f64,
    ) -> Result<BoundaryKernel, PotentialError> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(PotentialError::BadTolerance);
        }
        let mean = limits.iter().sum::<f64>() / 3.0;
        let at = |n: usize| -> Result<f64, PotentialError> {
            let e = self.exit_distribution(z, n - 1)?;
            Ok(e.iter().zip(limits).map(|(a, b)| a * b).sum::<f64>() / mean)
        };
        let mut n = z.len() + 2;
        let mut prev = at(n)?;
        loop {
            if 2 * n > MAX_KERNEL_LEVEL {
                return Err(PotentialError::NotCauchy {
                    level: n,
                    gap: f64::NAN,
                });
            }
            let next = at(2 * n)?;
            if (next - prev).abs() < tol {
                return Ok(BoundaryKernel {
                    value: next,
                    level: 2 * n,
                });
            }
            n *= 2;
            prev = next;
        }
    }
}
