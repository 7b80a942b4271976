//! Importance-sampling estimators built on the sequential sampler: graph
//! counting, per-graph probability estimation by edge-order replay, and
//! accept/reject (ε,δ)-uniform generation.
//!
//! Trials are embarrassingly parallel. Every trial owns an RNG stream seeded
//! by a splitmix64 derivation from `(base_seed, stream, index)`, and results
//! are aggregated by trial index, so output is bit-identical regardless of
//! the worker-pool size.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::degrees::DegreeSequence;
use crate::logspace::{log_factorial, log_mean_and_relvar, log_sum_exp, LogValue};
use crate::sampler::{sample, GraphSample, SamplerState};

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("all {pilot} pilot trials failed; sequence is likely outside the tractable regime")]
    AllTrialsFailed { pilot: u64 },
    #[error("edge list does not realize the degree sequence")]
    EdgeSetMismatch,
    #[error("no sample accepted after {attempts} attempts")]
    GenerationStalled { attempts: u64 },
}

// RNG stream tags, mixed into the seed derivation so the count trials, the
// raw samples, the replay trials, and the acceptance coins never share a
// stream.
const STREAM_COUNT: u64 = 1;
const STREAM_SAMPLE: u64 = 2;
const STREAM_REPLAY: u64 = 3;
const STREAM_ACCEPT: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `index` of `stream`, derived from the base seed. Fixed
/// across versions; reproducibility under parallelism depends on it.
pub fn trial_seed(base_seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base_seed ^ splitmix64(stream)).wrapping_add(index))
}

/// Output of the counting estimator: log-space mean of `N = 1/(m! P)` over
/// `k` independent sampler runs, failures contributing `N = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountEstimate {
    pub log_mean: f64,
    pub log_second_moment: f64,
    pub k: u64,
    pub failures: u64,
    pub rel_std_err: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl CountEstimate {
    /// `log10` of the estimated graph count.
    pub fn log10_count(&self) -> f64 {
        self.log_mean / std::f64::consts::LN_10
    }
}

/// Output of the per-graph probability estimator `P_G = m!·mean(P_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbEstimate {
    pub log_p_g: f64,
    pub ell: u64,
    pub epsilon: f64,
    pub delta: f64,
}

fn run_count_trials(seq: &DegreeSequence, base_seed: u64, from: u64, to: u64) -> Vec<LogValue> {
    (from..to)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(base_seed, STREAM_COUNT, t));
            let g = sample(seq, &mut rng);
            match g.log_n {
                Some(log_n) => LogValue(log_n),
                None => LogValue::ZERO,
            }
        })
        .collect()
}

fn aggregate(values: &[LogValue], epsilon: f64, delta: f64) -> CountEstimate {
    let k = values.len() as u64;
    let failures = values.iter().filter(|v| v.is_zero()).count() as u64;
    let (log_mean, relvar) = log_mean_and_relvar(values);
    let squares: Vec<LogValue> = values.iter().map(|v| LogValue(2.0 * v.0)).collect();
    let log_second_moment = log_sum_exp(&squares).0 - (k as f64).ln();
    CountEstimate {
        log_mean: log_mean.0,
        log_second_moment,
        k,
        failures,
        rel_std_err: (relvar / k as f64).sqrt(),
        epsilon,
        delta,
    }
}

/// Two-sided standard normal quantile: `P(|Z| > z) = delta`.
///
/// Acklam's rational approximation of the inverse normal CDF plus one
/// Halley refinement step; absolute error well under 1e-8.
pub fn z_delta(delta: f64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0);
    inverse_normal_cdf(1.0 - delta / 2.0)
}

fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement against the erfc-based CDF.
    let e = 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Number of pilot trials for the two-stage rule.
pub fn pilot_trials(epsilon: f64) -> u64 {
    1000.max((1.0 / (epsilon * epsilon)).ceil() as u64)
}

/// Runs exactly `k` sampler trials and aggregates them. Errors if every
/// trial failed.
pub fn count_graphs_fixed_k(
    seq: &DegreeSequence,
    k: u64,
    epsilon: f64,
    delta: f64,
    base_seed: u64,
) -> Result<CountEstimate, EstimatorError> {
    let values = run_count_trials(seq, base_seed, 0, k);
    if values.iter().all(|v| v.is_zero()) {
        return Err(EstimatorError::AllTrialsFailed { pilot: k });
    }
    Ok(aggregate(&values, epsilon, delta))
}

/// The counting estimator with the two-stage trial rule: a pilot of
/// `max(1000, ceil(1/ε²))` trials estimates the relative variance
/// `ρ̂ = Var(N)/E(N)²`, then `ceil(z_δ²·ρ̂/ε²)` further trials are added.
///
/// Deterministic given `(seq, base_seed, ε, δ)`.
pub fn count_graphs(
    seq: &DegreeSequence,
    epsilon: f64,
    delta: f64,
    base_seed: u64,
) -> Result<CountEstimate, EstimatorError> {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must be in (0,1)");
    assert!(delta > 0.0 && delta < 1.0, "delta must be in (0,1)");
    let k0 = pilot_trials(epsilon);
    let mut values = run_count_trials(seq, base_seed, 0, k0);
    if values.iter().all(|v| v.is_zero()) {
        return Err(EstimatorError::AllTrialsFailed { pilot: k0 });
    }
    let (_, relvar) = log_mean_and_relvar(&values);
    let z = z_delta(delta);
    let extra = (z * z * relvar / (epsilon * epsilon)).ceil() as u64;
    if extra > 0 {
        values.extend(run_count_trials(seq, base_seed, k0, k0 + extra));
    }
    Ok(aggregate(&values, epsilon, delta))
}

fn check_realizes(edges: &[(u32, u32)], seq: &DegreeSequence) -> Result<(), EstimatorError> {
    let mut deg = vec![0u32; seq.n()];
    let mut seen = std::collections::HashSet::new();
    for &(u, v) in edges {
        if u == v || u as usize >= seq.n() || v as usize >= seq.n() {
            return Err(EstimatorError::EdgeSetMismatch);
        }
        let key = if u < v { (u, v) } else { (v, u) };
        if !seen.insert(key) {
            return Err(EstimatorError::EdgeSetMismatch);
        }
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    if deg != seq.degrees() {
        return Err(EstimatorError::EdgeSetMismatch);
    }
    Ok(())
}

/// Log of `P` for one replay of `edges` in the given order: the probability
/// the free sampler would have assigned to exactly this edge sequence.
fn replay_log_p(seq: &DegreeSequence, order: &[(u32, u32)]) -> LogValue {
    let mut state = SamplerState::new(seq);
    let mut log_p = 0.0;
    for &(u, v) in order {
        match state.replay_edge(u, v) {
            Some(lp) => log_p += lp,
            // a forced pair with non-positive weight: this ordering (and in
            // fact this graph) is unreachable by the sampler
            None => return LogValue::ZERO,
        }
    }
    LogValue(log_p)
}

fn run_replay_trials(
    seq: &DegreeSequence,
    edges: &[(u32, u32)],
    base_seed: u64,
    from: u64,
    to: u64,
) -> Vec<LogValue> {
    (from..to)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(base_seed, STREAM_REPLAY, t));
            let mut order = edges.to_vec();
            order.shuffle(&mut rng);
            replay_log_p(seq, &order)
        })
        .collect()
}

/// Estimates `P_A(G)`, the sampler's probability of producing `G`, by
/// replaying uniformly random orderings of `G`'s edges and averaging
/// `m!·P`. Unbiased; trial count follows the same two-stage rule as
/// [`count_graphs`].
pub fn procedure_b(
    edges: &[(u32, u32)],
    seq: &DegreeSequence,
    epsilon: f64,
    delta: f64,
    base_seed: u64,
) -> Result<ProbEstimate, EstimatorError> {
    check_realizes(edges, seq)?;
    let ell0 = pilot_trials(epsilon);
    let mut values = run_replay_trials(seq, edges, base_seed, 0, ell0);
    let (_, relvar) = log_mean_and_relvar(&values);
    let z = z_delta(delta);
    let extra = (z * z * relvar / (epsilon * epsilon)).ceil() as u64;
    if extra > 0 {
        values.extend(run_replay_trials(seq, edges, base_seed, ell0, ell0 + extra));
    }
    let (log_mean, _) = log_mean_and_relvar(&values);
    let log_p_g = log_factorial(seq.m()) + log_mean.0;
    debug_assert!(log_p_g < 1.0, "P_G estimate exceeds e");
    Ok(ProbEstimate {
        log_p_g,
        ell: values.len() as u64,
        epsilon,
        delta,
    })
}

/// Bookkeeping for one accepted sample of [`UniformGenerator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GenerateMeta {
    /// Successful sampler runs that entered the accept/reject step.
    pub attempts: u64,
    /// Sampler runs that dead-ended and were retried.
    pub failures: u64,
    /// Times the raw acceptance probability `1/(5·X·P_G)` exceeded 1 and was
    /// clamped; nonzero values flag the small-n regime.
    pub acceptance_overflows: u64,
}

/// (ε,δ)-approximately uniform generator: estimates the graph count `X`
/// once, then repeats {sample `G`, estimate `P_G`, accept with probability
/// `min(1, 1/(5·X·P_G))`}.
///
/// `P_G` estimates are memoized per graph. The replay seed is a pure
/// function of the base seed and the edge set, so the memoized value is
/// identical no matter which `generate` call computes it first; batches
/// stay reproducible under any evaluation order or thread count.
pub struct UniformGenerator {
    seq: DegreeSequence,
    epsilon: f64,
    delta: f64,
    base_seed: u64,
    count: CountEstimate,
    p_g_cache: Mutex<HashMap<Vec<(u32, u32)>, f64>>,
}

const MAX_GENERATE_ATTEMPTS: u64 = 100_000;

impl UniformGenerator {
    pub fn new(
        seq: DegreeSequence,
        epsilon: f64,
        delta: f64,
        base_seed: u64,
    ) -> Result<Self, EstimatorError> {
        let count = count_graphs(&seq, epsilon, delta, base_seed)?;
        Ok(UniformGenerator {
            seq,
            epsilon,
            delta,
            base_seed,
            count,
            p_g_cache: Mutex::new(HashMap::new()),
        })
    }

    fn graph_seed(&self, edges: &[(u32, u32)]) -> u64 {
        let mut h = splitmix64(self.base_seed ^ splitmix64(STREAM_REPLAY));
        for &(u, v) in edges {
            h = splitmix64(h ^ (((u as u64) << 32) | v as u64));
        }
        h
    }

    fn log_p_g(&self, edges: &[(u32, u32)]) -> Result<f64, EstimatorError> {
        if let Some(&hit) = self.p_g_cache.lock().expect("cache lock").get(edges) {
            return Ok(hit);
        }
        let p = procedure_b(
            edges,
            &self.seq,
            self.epsilon,
            self.delta,
            self.graph_seed(edges),
        )?;
        self.p_g_cache
            .lock()
            .expect("cache lock")
            .insert(edges.to_vec(), p.log_p_g);
        Ok(p.log_p_g)
    }

    pub fn count_estimate(&self) -> &CountEstimate {
        &self.count
    }

    /// Produces accepted sample number `index`. Distinct indices use
    /// disjoint RNG streams, so a batch can run in parallel and still be
    /// reproducible.
    pub fn generate(&self, index: u64) -> Result<(GraphSample, GenerateMeta), EstimatorError> {
        let sample_base = trial_seed(self.base_seed, STREAM_SAMPLE, index);
        let mut coin_rng =
            ChaCha8Rng::seed_from_u64(trial_seed(self.base_seed, STREAM_ACCEPT, index));
        let mut meta = GenerateMeta {
            attempts: 0,
            failures: 0,
            acceptance_overflows: 0,
        };
        for attempt in 0..MAX_GENERATE_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(sample_base, STREAM_SAMPLE, attempt));
            let g = sample(&self.seq, &mut rng);
            if !g.success {
                meta.failures += 1;
                continue;
            }
            meta.attempts += 1;
            let log_p_g = self.log_p_g(&g.edges)?;
            // accept w.p. 1/(5·X·P_G), clamped at 1
            let log_accept = -(5.0_f64.ln() + self.count.log_mean + log_p_g);
            if log_accept >= 0.0 {
                meta.acceptance_overflows += 1;
                return Ok((g, meta));
            }
            if coin_rng.random::<f64>() < log_accept.exp() {
                return Ok((g, meta));
            }
        }
        Err(EstimatorError::GenerationStalled {
            attempts: MAX_GENERATE_ATTEMPTS,
        })
    }
}

/// One-shot convenience wrapper around [`UniformGenerator`].
pub fn generate_uniform(
    seq: &DegreeSequence,
    epsilon: f64,
    delta: f64,
    base_seed: u64,
) -> Result<(GraphSample, GenerateMeta), EstimatorError> {
    UniformGenerator::new(seq.clone(), epsilon, delta, base_seed)?.generate(0)
}
