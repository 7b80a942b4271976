//! The weighted sequential edge-insertion sampler.
//!
//! Starting from an empty graph, edges are inserted one at a time between a
//! "suitable" pair of vertices (distinct, non-adjacent, both with residual
//! degree left), pair `(i,j)` being chosen with probability proportional to
//! `d̂_i d̂_j (1 - d_i d_j / 4m)`. The running product `P` of the chosen
//! probabilities gives the importance weight `N = 1/(m! P)`, an unbiased
//! estimator of the number of labeled graphs with the sequence.
//!
//! The per-step normalizer is maintained incrementally via five exact integer
//! aggregates, so a step costs O(d_max) amortized and a full sample
//! O(m d_max). All probability arithmetic is exact-integer on an `8m`-scaled
//! form; logs are taken only when accumulating `P`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::degrees::DegreeSequence;
use crate::logspace::log_factorial;

/// Execution phase of the pair-selection step.
///
/// While many stubs remain, rejection sampling from the stub array is cheap
/// and almost always accepts. Near the end (or if rejections pile up) the
/// suitable pairs are enumerated outright, which also makes failure detection
/// exact: an empty enumeration is the sampler's failure event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Rejection,
    ExactEnumeration,
}

/// In-flight state of one sampling run.
pub struct SamplerState {
    degrees: Vec<u32>,
    residual: Vec<u32>,
    m: u64,
    d_max: u32,
    r: u64,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
    // Stub array: one slot per unmatched mini-vertex, live prefix [0..live).
    // slots_of[v] lists the live slots currently owned by vertex v.
    stubs: Vec<u32>,
    live: usize,
    slots_of: Vec<Vec<u32>>,
    // Exact integer aggregates for the weighted suitable-pair mass.
    delta1: i128,        // Σ_u C(d̂_u, 2)
    adj_pair_mass: i128, // Σ_{(u,v) placed} d̂_u d̂_v
    l1: i128,            // Σ_u d̂_u d_u
    q: i128,             // Σ_u d̂_u² d_u²
    b: i128,             // Σ_{(u,v) placed} d̂_u d̂_v d_u d_v
    log_p: f64,
}

/// Outcome of one full run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSample {
    /// Canonical edge list: `u < v`, sorted lexicographically.
    pub edges: Vec<(u32, u32)>,
    /// Edges in the order the sampler placed them.
    pub insertion_order: Vec<(u32, u32)>,
    pub success: bool,
    /// `log Π p_ij` over the chosen pairs.
    pub log_p: f64,
    /// `log N = -log m! - log P`; `None` on failure (N counts as 0).
    pub log_n: Option<f64>,
}

impl SamplerState {
    pub fn new(seq: &DegreeSequence) -> Self {
        let degrees = seq.degrees().to_vec();
        let n = degrees.len();
        let mut delta1: i128 = 0;
        let mut l1: i128 = 0;
        let mut q: i128 = 0;
        let mut stubs = Vec::with_capacity(2 * seq.m() as usize);
        let mut slots_of = vec![Vec::new(); n];
        for (v, &d) in degrees.iter().enumerate() {
            let d = d as i128;
            delta1 += d * (d - 1) / 2;
            l1 += d * d;
            q += d * d * d * d;
            for _ in 0..d {
                slots_of[v].push(stubs.len() as u32);
                stubs.push(v as u32);
            }
        }
        let live = stubs.len();
        SamplerState {
            residual: degrees.clone(),
            degrees,
            m: seq.m(),
            d_max: seq.d_max(),
            r: 0,
            edges: Vec::with_capacity(seq.m() as usize),
            adjacency: vec![Vec::new(); n],
            stubs,
            live,
            slots_of,
            delta1,
            adj_pair_mass: 0,
            l1,
            q,
            b: 0,
            log_p: 0.0,
        }
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn residual(&self) -> &[u32] {
        &self.residual
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// `(delta1, adj_pair_mass, l1, q, b)`, for oracle cross-checks.
    pub fn aggregates(&self) -> (i128, i128, i128, i128, i128) {
        (self.delta1, self.adj_pair_mass, self.l1, self.q, self.b)
    }

    pub fn phase(&self) -> Phase {
        let remaining = 2 * self.m - 2 * self.r;
        let d_max = self.d_max as u64;
        if remaining > 2 * d_max * d_max {
            Phase::Rejection
        } else {
            Phase::ExactEnumeration
        }
    }

    fn four_m(&self) -> i128 {
        4 * self.m as i128
    }

    /// The scaled suitable-pair mass `8m·W_r` where
    /// `W_r = Σ_{suitable (u,v)} d̂_u d̂_v (1 - d_u d_v / 4m)`.
    pub fn weighted_suitable_mass(&self) -> i128 {
        let remaining = (2 * self.m - 2 * self.r) as i128;
        let pairs = remaining * (remaining - 1) / 2;
        8 * self.m as i128 * (pairs - self.delta1 - self.adj_pair_mass)
            - (self.l1 * self.l1 - self.q)
            + 2 * self.b
    }

    fn is_adjacent(&self, i: u32, j: u32) -> bool {
        let (a, b) = if self.adjacency[i as usize].len() <= self.adjacency[j as usize].len() {
            (i, j)
        } else {
            (j, i)
        };
        self.adjacency[a as usize].contains(&b)
    }

    /// Scaled weight of pair `(i,j)`: `2 d̂_i d̂_j (4m - d_i d_j)`, the
    /// numerator of `p_ij` over `weighted_suitable_mass`. May be negative
    /// outside the analyzed degree regime; such pairs are never selected.
    pub fn pair_weight(&self, i: u32, j: u32) -> i128 {
        let di_hat = self.residual[i as usize] as i128;
        let dj_hat = self.residual[j as usize] as i128;
        let dd = self.degrees[i as usize] as i128 * self.degrees[j as usize] as i128;
        2 * di_hat * dj_hat * (self.four_m() - dd)
    }

    /// Exact `(numerator, denominator)` of `p_ij` in the current state.
    pub fn price_exact(&self, i: u32, j: u32) -> (i128, i128) {
        (self.pair_weight(i, j), self.weighted_suitable_mass())
    }

    fn enumerate_suitable(&self) -> (Vec<(u32, u32, i128)>, i128) {
        let mut active: Vec<u32> = self.stubs[..self.live].to_vec();
        active.sort_unstable();
        active.dedup();
        let mut pairs = Vec::new();
        let mut total: i128 = 0;
        for (idx, &i) in active.iter().enumerate() {
            for &j in &active[idx + 1..] {
                if self.is_adjacent(i, j) {
                    continue;
                }
                let w = self.pair_weight(i, j);
                if w > 0 {
                    pairs.push((i, j, w));
                    total += w;
                }
            }
        }
        (pairs, total)
    }

    /// Picks a suitable pair with probability `p_ij`, or `None` when no
    /// suitable pair exists (the failure event).
    ///
    /// Returns `(i, j, log p_ij)` with the log computed from exact integers.
    pub fn select_pair<R: Rng>(&self, rng: &mut R) -> Option<(u32, u32, f64)> {
        let scaled_mass = self.weighted_suitable_mass();
        if self.phase() == Phase::Rejection && scaled_mass > 0 {
            let remaining = (2 * self.m - 2 * self.r) as i128;
            let pairs = remaining * (remaining - 1) / 2;
            // Expected draws until acceptance, over-estimated upward; past
            // 64x that many consecutive rejections, fall through to
            // enumeration so termination never rests on a tail bound.
            let expected_retries = ((8 * self.m as i128 * pairs) / scaled_mass).max(1) as u64;
            let cap = 64 * expected_retries;
            let four_m = self.four_m();
            let mut rejections = 0u64;
            while rejections < cap {
                let a = rng.random_range(0..self.live);
                let b = rng.random_range(0..self.live);
                if a == b {
                    rejections += 1;
                    continue;
                }
                let i = self.stubs[a];
                let j = self.stubs[b];
                if i == j || self.is_adjacent(i, j) {
                    rejections += 1;
                    continue;
                }
                let keep = four_m
                    - self.degrees[i as usize] as i128 * self.degrees[j as usize] as i128;
                if keep > 0 && (rng.random_range(0..four_m as u64) as i128) < keep {
                    let (i, j) = if i < j { (i, j) } else { (j, i) };
                    let w = self.pair_weight(i, j);
                    let log_p = (w as f64).ln() - (scaled_mass as f64).ln();
                    return Some((i, j, log_p));
                }
                rejections += 1;
            }
        }
        let (pairs, total) = self.enumerate_suitable();
        if pairs.is_empty() {
            return None;
        }
        let mut t = rng.random_range(0..total as u128) as i128;
        for &(i, j, w) in &pairs {
            if t < w {
                let log_p = (w as f64).ln() - (total as f64).ln();
                return Some((i, j, log_p));
            }
            t -= w;
        }
        unreachable!("cumulative weight walk exhausted below total");
    }

    fn remove_stub(&mut self, v: u32) {
        let slot = self
            .slots_of[v as usize]
            .pop()
            .expect("vertex has a live stub") as usize;
        let last = self.live - 1;
        if slot != last {
            let moved = self.stubs[last];
            self.stubs[slot] = moved;
            self.stubs[last] = v;
            let list = &mut self.slots_of[moved as usize];
            let pos = list
                .iter()
                .position(|&s| s as usize == last)
                .expect("moved stub tracked");
            list[pos] = slot as u32;
        }
        self.live = last;
    }

    /// Records the chosen pair: decrements residuals, updates the aggregates
    /// incrementally (touching only `i`, `j`, and their neighbors), and
    /// accumulates `log_p`.
    pub fn apply_edge(&mut self, i: u32, j: u32, log_p: f64) {
        debug_assert!(i != j && !self.is_adjacent(i, j));
        let (iu, ju) = (i as usize, j as usize);
        let di_hat = self.residual[iu] as i128;
        let dj_hat = self.residual[ju] as i128;
        debug_assert!(di_hat >= 1 && dj_hat >= 1);
        let di = self.degrees[iu] as i128;
        let dj = self.degrees[ju] as i128;

        self.delta1 -= (di_hat - 1) + (dj_hat - 1);
        self.l1 -= di + dj;
        self.q -= (2 * di_hat - 1) * di * di + (2 * dj_hat - 1) * dj * dj;
        for &u in &self.adjacency[iu] {
            let du_hat = self.residual[u as usize] as i128;
            let du = self.degrees[u as usize] as i128;
            self.adj_pair_mass -= du_hat;
            self.b -= du_hat * du * di;
        }
        for &u in &self.adjacency[ju] {
            let du_hat = self.residual[u as usize] as i128;
            let du = self.degrees[u as usize] as i128;
            self.adj_pair_mass -= du_hat;
            self.b -= du_hat * du * dj;
        }
        self.adj_pair_mass += (di_hat - 1) * (dj_hat - 1);
        self.b += (di_hat - 1) * (dj_hat - 1) * di * dj;

        self.residual[iu] -= 1;
        self.residual[ju] -= 1;
        self.adjacency[iu].push(j);
        self.adjacency[ju].push(i);
        self.edges.push(if i < j { (i, j) } else { (j, i) });
        self.remove_stub(i);
        self.remove_stub(j);
        self.r += 1;
        self.log_p += log_p;

        // Sanity bounds on the unsuitable-pair mass; exceeding either would
        // mean the incremental bookkeeping has drifted.
        let remaining = (2 * self.m - 2 * self.r) as i128;
        let d_max = self.d_max as i128;
        assert!(
            2 * (self.delta1 + self.adj_pair_mass) <= remaining * d_max * d_max,
            "unsuitable-pair mass exceeds ({remaining}·d_max²)/2"
        );
        assert!(
            self.l1 <= d_max * remaining,
            "residual-degree moment exceeds d_max·(2m-2r)"
        );
    }

    /// Prices the forced pair `(i,j)` exactly as a free run would have, then
    /// applies it. Used to replay a known graph edge by edge.
    ///
    /// Returns `log p_ij`, or `None` if the pair carries non-positive weight
    /// in the current state (the replayed graph is unreachable).
    pub fn replay_edge(&mut self, i: u32, j: u32) -> Option<f64> {
        let (num, den) = self.price_exact(i, j);
        if num <= 0 || den <= 0 {
            return None;
        }
        let log_p = (num as f64).ln() - (den as f64).ln();
        self.apply_edge(i, j, log_p);
        Some(log_p)
    }

    fn finish(self, success: bool) -> GraphSample {
        let insertion_order = self.edges;
        let mut edges = insertion_order.clone();
        edges.sort_unstable();
        let log_n = success.then(|| -log_factorial(self.m) - self.log_p);
        GraphSample {
            edges,
            insertion_order,
            success,
            log_p: self.log_p,
            log_n,
        }
    }
}

/// One full run of the sequential sampler.
///
/// Failure (a dead end with no suitable pair left) is a value, not an error;
/// the corresponding estimator contribution is `N = 0`. An all-zero sequence
/// succeeds immediately with an empty edge set and `N = 1`.
pub fn sample<R: Rng>(seq: &DegreeSequence, rng: &mut R) -> GraphSample {
    let mut state = SamplerState::new(seq);
    while state.r() < state.m() {
        match state.select_pair(rng) {
            Some((i, j, log_p)) => state.apply_edge(i, j, log_p),
            None => return state.finish(false),
        }
    }
    state.finish(true)
}

/// Deterministic sampling: identical `(seq, seed)` gives an identical sample.
pub fn sample_with_seed(seq: &DegreeSequence, seed: u64) -> GraphSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample(seq, &mut rng)
}
