//! Seeded Monte Carlo simulation of the walk.
//!
//! Randomness comes from xoshiro256++ (`rand_xoshiro`), seeded through
//! SplitMix64. A run with seed `s` is cut into batches of [`BATCH`] paths;
//! batch `b` starts from the seeded state advanced by `b` calls to `jump()`,
//! so batches use disjoint stretches of one stream. Batches are
//! independent, so any number of worker threads reproduces the same counts.
//!
//! Each step uses one 32-bit half of a generator output and compares it
//! with cumulative cut points `floor(P * 2^32)`, which shifts transition
//! probabilities by at most `2^-32`.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{transition_with, ChainParams, KernelChoice};
use crate::words::FiniteWord;

/// Paths per seeded batch.
pub const BATCH: u64 = 1 << 14;

/// Walkers advanced together inside a batch (even).
const LANES: usize = 4;

/// Default per-path step budget.
pub const DEFAULT_STEP_CAP: u64 = 10_000_000;

/// Largest level the compiled tables cover.
pub const MAX_SIM_LEVEL: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("start word {start} is deeper than the target level {level}")]
    StartTooDeep { start: String, level: usize },
    #[error("simulation level {0} exceeds {MAX_SIM_LEVEL}")]
    Level(usize),
    #[error("path count must be positive")]
    NoPaths,
}

/// When a single simulated path ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopRule {
    /// First time the walk reaches level `L + 1`.
    LevelExceeds(usize),
    /// First visit to the word; reported as a miss once the walk moves
    /// past its level.
    WordHit(FiniteWord),
    /// After this many steps.
    StepCap(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathOutcome {
    LevelExceeded,
    Hit,
    Missed,
    StepCap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub states: Vec<FiniteWord>,
    pub outcome: PathOutcome,
}

impl Path {
    pub fn last(&self) -> &FiniteWord {
        self.states.last().expect("paths contain their start")
    }

    /// The last state visited at the given level.
    pub fn last_at_level(&self, level: usize) -> Option<&FiniteWord> {
        self.states.iter().rev().find(|w| w.len() == level)
    }
}

type Rng = Xoshiro256PlusPlus;

/// Generators for batches `0..count`: the seeded base state followed by
/// successive `jump()`s, each `2^128` draws apart.
fn batch_rngs(seed: u64, count: u64) -> Vec<Rng> {
    let mut rng = Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let here = rng.clone();
            rng.jump();
            here
        })
        .collect()
}

fn cut(x: f64) -> u32 {
    (x * 4_294_967_296.0).floor().min(u32::MAX as f64) as u32
}

/// Index of the first word of level `k` in the stacked state space.
fn offset(k: usize) -> usize {
    (3usize.pow(k as u32) - 1) / 2
}

#[derive(Clone, Copy)]
struct Row {
    next: [u32; 3],
    cut: [u32; 2],
}

/// Transition tables for all levels up to `top`, with one tag per state.
struct Compiled {
    rows: Vec<Row>,
    tags: Vec<u8>,
    park: u32,
}

const COUNT: u8 = 1;
const STOP: u8 = 2;

impl Compiled {
    fn new(params: &ChainParams, choice: KernelChoice, top: usize) -> Result<Self, SimError> {
        if top > MAX_SIM_LEVEL {
            return Err(SimError::Level(top));
        }
        let total = offset(top + 1);
        let mut rows = Vec::with_capacity(total);
        for k in 0..=top {
            for u in FiniteWord::all(k) {
                if k == top && u.vertex_letter().is_some() {
                    // Never stepped from: every use stops on these.
                    let me = (offset(k) + u.index()) as u32;
                    rows.push(Row {
                        next: [me; 3],
                        cut: [u32::MAX; 2],
                    });
                    continue;
                }
                let r = transition_with::<f64>(params, choice, &u).expect("float p");
                let mut next = [0u32; 3];
                let mut acc = 0.0;
                let mut cuts = [0u32; 2];
                for (slot, (t, x)) in r.targets.iter().enumerate() {
                    next[slot] = (offset(t.len()) + t.index()) as u32;
                    acc += x;
                    if slot < 2 {
                        cuts[slot] = cut(acc);
                    }
                }
                rows.push(Row { next, cut: cuts });
            }
        }
        // One extra self-looping state for idle lanes.
        let park = total as u32;
        rows.push(Row {
            next: [park; 3],
            cut: [0; 2],
        });
        Ok(Compiled {
            rows,
            tags: vec![0; total + 1],
            park,
        })
    }

    fn state(w: &FiniteWord) -> u32 {
        (offset(w.len()) + w.index()) as u32
    }

    fn tag(&mut self, w: &FiniteWord, tag: u8) {
        self.tags[Self::state(w) as usize] |= tag;
    }

    /// Run `n` paths from `start`, reporting each one's stopping state,
    /// counted visits and whether it hit the step cap.
    ///
    /// [`LANES`] walkers advance in lockstep so that their independent table
    /// lookups overlap; a finished lane is refilled with the next path, and
    /// once the budget is spent it is parked on an inert state. The draw
    /// order is fixed by the lane schedule, so results depend only on the
    /// generator state.
    fn run_paths<F>(&self, start: u32, n: u64, rng: &mut Rng, cap: u64, mut sink: F)
    where
        F: FnMut(u32, u64, bool),
    {
        let t0 = self.tags[start as usize];
        let v0 = (t0 & COUNT != 0) as u64;
        if t0 & STOP != 0 {
            for _ in 0..n {
                sink(start, v0, false);
            }
            return;
        }
        let park = self.park;
        let mut state = [park; LANES];
        let mut steps = [0u64; LANES];
        let mut visits = [v0; LANES];
        let mut launched = 0u64;
        for s in state.iter_mut().take(n.min(LANES as u64) as usize) {
            *s = start;
            launched += 1;
        }
        let mut running = launched;
        while running > 0 {
            for k in (0..LANES).step_by(2) {
                let r = rng.next_u64();
                for (lane, r) in [(k, r as u32), (k + 1, (r >> 32) as u32)] {
                    let row = &self.rows[state[lane] as usize];
                    let slot = (r >= row.cut[0]) as usize + (r >= row.cut[1]) as usize;
                    let s = row.next[slot];
                    state[lane] = s;
                    steps[lane] += 1;
                    let t = self.tags[s as usize];
                    visits[lane] += (t & COUNT) as u64;
                    if t & STOP != 0 || steps[lane] >= cap {
                        if s == park {
                            steps[lane] = 0;
                            continue;
                        }
                        sink(s, visits[lane], t & STOP == 0);
                        steps[lane] = 0;
                        visits[lane] = v0;
                        if launched < n {
                            launched += 1;
                            state[lane] = start;
                        } else {
                            state[lane] = park;
                            running -= 1;
                        }
                    }
                }
            }
        }
    }
}

/// Simulate one trajectory, recording every state.
pub fn simulate_path(
    params: &ChainParams,
    choice: KernelChoice,
    start: &FiniteWord,
    stop: &StopRule,
    seed: u64,
) -> Path {
    let mut rng = Rng::seed_from_u64(seed);
    let mut states = vec![start.clone()];
    let mut u = start.clone();
    let cap = match stop {
        StopRule::StepCap(m) => *m,
        _ => DEFAULT_STEP_CAP,
    };
    if let StopRule::WordHit(y) = stop {
        if &u == y {
            return Path {
                states,
                outcome: PathOutcome::Hit,
            };
        }
    }
    for _ in 0..cap {
        let row = transition_with::<f64>(params, choice, &u).expect("float p");
        let r = rng.next_u32();
        let mut acc = 0.0;
        let mut pick = row.targets.len() - 1;
        for (slot, (_, x)) in row.targets.iter().enumerate().take(2) {
            acc += x;
            if r < cut(acc) {
                pick = slot;
                break;
            }
        }
        u = row.targets[pick].0.clone();
        states.push(u.clone());
        match stop {
            StopRule::LevelExceeds(l) if u.len() > *l => {
                return Path {
                    states,
                    outcome: PathOutcome::LevelExceeded,
                };
            }
            StopRule::WordHit(y) if &u == y => {
                return Path {
                    states,
                    outcome: PathOutcome::Hit,
                }
            }
            StopRule::WordHit(y) if u.len() > y.len() => {
                return Path {
                    states,
                    outcome: PathOutcome::Missed,
                };
            }
            _ => {}
        }
    }
    Path {
        states,
        outcome: PathOutcome::StepCap,
    }
}

/// Empirical absorption distribution over the three corners of a level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingEstimate {
    pub estimates: [f64; 3],
    pub stderr: [f64; 3],
    pub paths: u64,
    pub seed: u64,
    pub capped: u64,
}

impl HittingEstimate {
    /// True when every component lies within `k` standard errors of `exact`
    /// (components with zero error must match exactly).
    pub fn agrees(&self, exact: &[f64; 3], k: f64) -> bool {
        (0..3).all(|i| {
            let d = (self.estimates[i] - exact[i]).abs();
            if self.stderr[i] == 0.0 {
                d < 1e-12
            } else {
                d <= k * self.stderr[i]
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub paths: u64,
    pub seed: u64,
    pub capped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub paths: u64,
    pub seed: u64,
    pub capped: u64,
}

/// Per-batch tallies: outcome counts, visit sums and capped paths.
#[derive(Default, Clone, Copy)]
struct Tally {
    counts: [u64; 3],
    visits: u64,
    visits_sq: u64,
    capped: u64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        for k in 0..3 {
            self.counts[k] += o.counts[k];
        }
        self.visits += o.visits;
        self.visits_sq += o.visits_sq;
        self.capped += o.capped;
        self
    }
}

fn run_batches<F>(paths: u64, seed: u64, body: F) -> Tally
where
    F: Fn(&mut Rng, u64) -> Tally + Sync,
{
    let rngs = batch_rngs(seed, paths.div_ceil(BATCH));
    rngs.into_par_iter()
        .enumerate()
        .map(|(b, mut rng)| {
            let n = BATCH.min(paths - b as u64 * BATCH);
            body(&mut rng, n)
        })
        .reduce(Tally::default, Tally::merge)
}

fn binomial_se(count: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let f = count as f64 / n as f64;
    (f * (1.0 - f) / n as f64).sqrt()
}

/// Where a walk from `start` first lands in the corner set of `level`.
pub fn estimate_hitting(
    params: &ChainParams,
    choice: KernelChoice,
    start: &FiniteWord,
    level: usize,
    paths: u64,
    seed: u64,
) -> Result<HittingEstimate, SimError> {
    if start.len() > level {
        return Err(SimError::StartTooDeep {
            start: start.to_string(),
            level,
        });
    }
    if paths == 0 {
        return Err(SimError::NoPaths);
    }
    let mut table = Compiled::new(params, choice, level)?;
    for i in 1..=3 {
        table.tag(&FiniteWord::power(i, level), STOP);
    }
    let corner0 = offset(level) as u32;
    let stride = ((3usize.pow(level as u32) - 1) / 2) as u32;
    let s0 = Compiled::state(start);
    let tally = run_batches(paths, seed, |rng, n| {
        let mut t = Tally::default();
        table.run_paths(s0, n, rng, DEFAULT_STEP_CAP, |end, _, capped| {
            if capped {
                t.capped += 1;
            } else {
                t.counts[((end - corner0) / stride) as usize] += 1;
            }
        });
        t
    });
    let done = paths - tally.capped;
    let estimates = tally.counts.map(|c| c as f64 / done.max(1) as f64);
    let stderr = tally.counts.map(|c| binomial_se(c, done));
    Ok(HittingEstimate {
        estimates,
        stderr,
        paths,
        seed,
        capped: tally.capped,
    })
}

/// Probability that a walk from `x` ever visits `y`.
pub fn estimate_word_hit(
    params: &ChainParams,
    choice: KernelChoice,
    x: &FiniteWord,
    y: &FiniteWord,
    paths: u64,
    seed: u64,
) -> Result<BernoulliEstimate, SimError> {
    if paths == 0 {
        return Err(SimError::NoPaths);
    }
    if y.len() < x.len() {
        let estimate = if x == y { 1.0 } else { 0.0 };
        return Ok(BernoulliEstimate {
            estimate,
            stderr: 0.0,
            paths,
            seed,
            capped: 0,
        });
    }
    let m = y.len();
    let mut table = Compiled::new(params, choice, m)?;
    for i in 1..=3 {
        table.tag(&FiniteWord::power(i, m), STOP);
    }
    table.tag(y, STOP | COUNT);
    let s0 = Compiled::state(x);
    let tally = run_batches(paths, seed, |rng, n| {
        let mut t = Tally::default();
        table.run_paths(s0, n, rng, DEFAULT_STEP_CAP, |_, visits, capped| {
            if capped {
                t.capped += 1;
            } else {
                t.counts[0] += visits;
            }
        });
        t
    });
    let done = paths - tally.capped;
    Ok(BernoulliEstimate {
        estimate: tally.counts[0] as f64 / done.max(1) as f64,
        stderr: binomial_se(tally.counts[0], done),
        paths,
        seed,
        capped: tally.capped,
    })
}

/// Expected number of visits to `y` from `x`.
pub fn estimate_visits(
    params: &ChainParams,
    choice: KernelChoice,
    x: &FiniteWord,
    y: &FiniteWord,
    paths: u64,
    seed: u64,
) -> Result<MeanEstimate, SimError> {
    if paths == 0 {
        return Err(SimError::NoPaths);
    }
    if y.len() < x.len() {
        let estimate = if x == y { 1.0 } else { 0.0 };
        return Ok(MeanEstimate {
            estimate,
            stderr: 0.0,
            paths,
            seed,
            capped: 0,
        });
    }
    let m = y.len();
    let mut table = Compiled::new(params, choice, m)?;
    for i in 1..=3 {
        table.tag(&FiniteWord::power(i, m), STOP);
    }
    table.tag(y, COUNT);
    let s0 = Compiled::state(x);
    let tally = run_batches(paths, seed, |rng, n| {
        let mut t = Tally::default();
        table.run_paths(s0, n, rng, DEFAULT_STEP_CAP, |_, visits, capped| {
            if capped {
                t.capped += 1;
            } else {
                t.visits += visits;
                t.visits_sq += visits * visits;
            }
        });
        t
    });
    let done = (paths - tally.capped).max(1) as f64;
    let mean = tally.visits as f64 / done;
    let var = (tally.visits_sq as f64 / done - mean * mean).max(0.0);
    Ok(MeanEstimate {
        estimate: mean,
        stderr: (var / done).sqrt(),
        paths,
        seed,
        capped: tally.capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> FiniteWord {
        s.parse().unwrap()
    }

    fn third() -> ChainParams {
        ChainParams::exact(1, 3).unwrap()
    }

    #[test]
    fn first_step_from_empty_word() {
        let path = simulate_path(
            &third(),
            KernelChoice::Standard,
            &FiniteWord::empty(),
            &StopRule::LevelExceeds(0),
            7,
        );
        assert_eq!(path.states.len(), 2);
        assert_eq!(path.last().len(), 1);
        assert_eq!(path.outcome, PathOutcome::LevelExceeded);
    }

    #[test]
    fn corner_step_goes_down_one_level() {
        for seed in 0..20 {
            let path = simulate_path(
                &third(),
                KernelChoice::Standard,
                &w("111"),
                &StopRule::StepCap(1),
                seed,
            );
            assert!(w("111").is_prefix_of(path.last()));
            assert_eq!(path.last().len(), 4);
            assert_eq!(path.outcome, PathOutcome::StepCap);
        }
    }

    #[test]
    fn levels_never_decrease() {
        for seed in 0..50 {
            let path = simulate_path(
                &ChainParams::float(0.2).unwrap(),
                KernelChoice::Standard,
                &w("1"),
                &StopRule::LevelExceeds(4),
                seed,
            );
            for pair in path.states.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                assert!(b.len() >= a.len());
                if b.len() > a.len() {
                    assert!(a.vertex_letter().is_some() && a.is_prefix_of(b));
                }
            }
        }
    }

    #[test]
    fn word_hit_reports_misses() {
        let mut seen = [false; 2];
        for seed in 0..200 {
            let path = simulate_path(
                &third(),
                KernelChoice::Standard,
                &w("12"),
                &StopRule::WordHit(w("13")),
                seed,
            );
            match path.outcome {
                PathOutcome::Hit => seen[0] = true,
                PathOutcome::Missed => seen[1] = true,
                o => panic!("unexpected {o:?}"),
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn absorbed_start_is_exact() {
        let e = estimate_hitting(&third(), KernelChoice::Standard, &w("22"), 2, 1000, 1).unwrap();
        assert_eq!(e.estimates, [0.0, 1.0, 0.0]);
        assert_eq!(e.stderr, [0.0; 3]);
    }

    #[test]
    fn start_too_deep_is_rejected() {
        let e = estimate_hitting(&third(), KernelChoice::Standard, &w("123"), 2, 10, 1);
        assert!(matches!(e, Err(SimError::StartTooDeep { .. })));
    }

    #[test]
    fn level_two_frequencies() {
        let e =
            estimate_hitting(&third(), KernelChoice::Standard, &w("12"), 2, 200_000, 11).unwrap();
        assert!(e.agrees(&[0.625, 0.25, 0.125], 4.0), "{e:?}");
        let quarter = ChainParams::float(0.25).unwrap();
        let e =
            estimate_hitting(&quarter, KernelChoice::Standard, &w("12"), 2, 200_000, 12).unwrap();
        assert!(
            e.agrees(&[8.0 / 13.0, 3.0 / 13.0, 2.0 / 13.0], 4.0),
            "{e:?}"
        );
    }

    #[test]
    fn path_simulation_matches_fast_engine_in_law() {
        let params = third();
        let paths = 20_000;
        let mut counts = [0u64; 3];
        for seed in 0..paths {
            let path = simulate_path(
                &params,
                KernelChoice::Standard,
                &w("12"),
                &StopRule::LevelExceeds(2),
                seed,
            );
            let end = path.last_at_level(2).unwrap();
            counts[end.vertex_letter().unwrap() as usize - 1] += 1;
        }
        for (k, exact) in [0.625, 0.25, 0.125].iter().enumerate() {
            let f = counts[k] as f64 / paths as f64;
            let se = (exact * (1.0 - exact) / paths as f64).sqrt();
            assert!((f - exact).abs() < 4.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let params = ChainParams::float(0.3).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    estimate_hitting(&params, KernelChoice::Standard, &w("123"), 3, 50_000, 99)
                        .unwrap()
                })
        };
        let a = run(1);
        assert_eq!(a, run(3));
        assert_eq!(a, run(1));
        let b =
            estimate_hitting(&params, KernelChoice::Standard, &w("123"), 3, 50_000, 100).unwrap();
        assert_ne!(a.estimates, b.estimates);
    }

    #[test]
    fn visits_to_self_at_least_one() {
        let e = estimate_visits(
            &third(),
            KernelChoice::Standard,
            &w("12"),
            &w("12"),
            10_000,
            3,
        )
        .unwrap();
        assert!(e.estimate >= 1.0);
        let h =
            estimate_word_hit(&third(), KernelChoice::Standard, &w("12"), &w("12"), 10, 3).unwrap();
        assert_eq!(h.estimate, 1.0);
        let h = estimate_word_hit(&third(), KernelChoice::Standard, &w("123"), &w("12"), 10, 3)
            .unwrap();
        assert_eq!(h.estimate, 0.0);
    }
}
