//! Ground-truth machinery for desk-scale validation: exhaustive enumeration
//! of all labeled realizations of a degree sequence, the exact distribution
//! of the sequential sampler computed in rational arithmetic, and a
//! chi-square harness for empirical uniformity checks.
//!
//! Everything here trades speed for exactness and is guarded to tiny
//! instances; the production sampling path never goes through this module.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::degrees::DegreeSequence;

/// Canonical labeled-graph key: edges `(u,v)` with `u < v`, sorted. No
/// isomorphism reduction; the counted set is labeled graphs.
pub type GraphKey = Vec<(u32, u32)>;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for the oracle (n={n}, m={m}; limit n<={max_n}, m<={max_m})")]
    InstanceTooLarge {
        n: usize,
        m: u64,
        max_n: usize,
        max_m: u64,
    },
    #[error("sample outside the enumerated support: {0:?}")]
    UnknownGraph(GraphKey),
    #[error("need at least {needed} samples for {cells} cells, got {got}")]
    TooFewSamples {
        needed: usize,
        cells: usize,
        got: usize,
    },
}

/// Exhaustively enumerates every labeled simple graph with degree sequence
/// `seq`, by satisfying the lowest-index unfinished vertex with every
/// possible partner combination.
pub fn enumerate_graphs(seq: &DegreeSequence) -> Result<Vec<GraphKey>, OracleError> {
    // Dense instances are fine at n <= 6 (at most 2^15 candidate edge sets);
    // beyond that the edge count must stay small.
    if seq.n() > 10 || (seq.n() > 6 && seq.m() > 12) {
        return Err(OracleError::InstanceTooLarge {
            n: seq.n(),
            m: seq.m(),
            max_n: 10,
            max_m: 12,
        });
    }
    let mut residual: Vec<u32> = seq.degrees().to_vec();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut out = Vec::new();
    backtrack(&mut residual, &mut edges, &mut out);
    out.sort();
    Ok(out)
}

fn backtrack(residual: &mut Vec<u32>, edges: &mut Vec<(u32, u32)>, out: &mut Vec<GraphKey>) {
    let Some(u) = residual.iter().position(|&d| d > 0) else {
        let mut g = edges.clone();
        g.sort_unstable();
        out.push(g);
        return;
    };
    let need = residual[u] as usize;
    // Every earlier vertex is finished, so candidate partners all lie after u.
    let candidates: Vec<usize> = (u + 1..residual.len()).filter(|&v| residual[v] > 0).collect();
    if candidates.len() < need {
        return;
    }
    let mut chosen = Vec::with_capacity(need);
    choose_partners(u, &candidates, 0, need, &mut chosen, residual, edges, out);
}

#[allow(clippy::too_many_arguments)]
fn choose_partners(
    u: usize,
    candidates: &[usize],
    from: usize,
    need: usize,
    chosen: &mut Vec<usize>,
    residual: &mut Vec<u32>,
    edges: &mut Vec<(u32, u32)>,
    out: &mut Vec<GraphKey>,
) {
    if need == 0 {
        residual[u] = 0;
        for &v in chosen.iter() {
            residual[v] -= 1;
            edges.push((u as u32, v as u32));
        }
        backtrack(residual, edges, out);
        for &v in chosen.iter() {
            residual[v] += 1;
            edges.pop();
        }
        residual[u] = chosen.len() as u32;
        return;
    }
    if candidates.len() - from < need {
        return;
    }
    for idx in from..candidates.len() {
        chosen.push(candidates[idx]);
        choose_partners(u, candidates, idx + 1, need - 1, chosen, residual, edges, out);
        chosen.pop();
    }
}

/// The exact outcome distribution of one run of the sequential sampler.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub per_graph: BTreeMap<GraphKey, BigRational>,
    pub failure_prob: BigRational,
    pub graph_count: u64,
}

impl ExactDistribution {
    pub fn to_json(&self) -> serde_json::Value {
        let graphs: Vec<_> = self
            .per_graph
            .iter()
            .map(|(g, p)| {
                json!({
                    "edges": g,
                    "prob_num": p.numer().to_string(),
                    "prob_den": p.denom().to_string(),
                })
            })
            .collect();
        json!({
            "count": self.graph_count,
            "failure_prob_num": self.failure_prob.numer().to_string(),
            "failure_prob_den": self.failure_prob.denom().to_string(),
            "graphs": graphs,
        })
    }
}

struct TreeWalker {
    degrees: Vec<u32>,
    m: u64,
    // memo keyed on the placed edge set; residual degrees and step number
    // are functions of it
    memo: HashMap<GraphKey, (BTreeMap<GraphKey, BigRational>, BigRational)>,
    path_counts: HashMap<GraphKey, BigInt>,
}

impl TreeWalker {
    fn new(seq: &DegreeSequence) -> Self {
        TreeWalker {
            degrees: seq.degrees().to_vec(),
            m: seq.m(),
            memo: HashMap::new(),
            path_counts: HashMap::new(),
        }
    }

    fn residuals(&self, edges: &GraphKey) -> Vec<u32> {
        let mut res = self.degrees.clone();
        for &(u, v) in edges {
            res[u as usize] -= 1;
            res[v as usize] -= 1;
        }
        res
    }

    fn suitable_pairs(&self, edges: &GraphKey) -> Vec<(u32, u32, i128)> {
        let res = self.residuals(edges);
        let four_m = 4 * self.m as i128;
        let n = self.degrees.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            if res[i] == 0 {
                continue;
            }
            for j in i + 1..n {
                if res[j] == 0 || edges.contains(&(i as u32, j as u32)) {
                    continue;
                }
                let w = res[i] as i128
                    * res[j] as i128
                    * (four_m - self.degrees[i] as i128 * self.degrees[j] as i128);
                if w > 0 {
                    pairs.push((i as u32, j as u32, w));
                }
            }
        }
        pairs
    }

    fn distribution(&mut self, edges: &GraphKey) -> (BTreeMap<GraphKey, BigRational>, BigRational) {
        if let Some(hit) = self.memo.get(edges) {
            return hit.clone();
        }
        let result = if edges.len() as u64 == self.m {
            let mut map = BTreeMap::new();
            map.insert(edges.clone(), BigRational::one());
            (map, BigRational::zero())
        } else {
            let pairs = self.suitable_pairs(edges);
            if pairs.is_empty() {
                (BTreeMap::new(), BigRational::one())
            } else {
                let total: i128 = pairs.iter().map(|&(_, _, w)| w).sum();
                let total = BigInt::from(total);
                let mut map: BTreeMap<GraphKey, BigRational> = BTreeMap::new();
                let mut fail = BigRational::zero();
                for (i, j, w) in pairs {
                    let p = BigRational::new(BigInt::from(w), total.clone());
                    let mut child = edges.clone();
                    child.push((i, j));
                    child.sort_unstable();
                    let (child_map, child_fail) = self.distribution(&child);
                    for (g, gp) in child_map {
                        *map.entry(g).or_insert_with(BigRational::zero) += &p * gp;
                    }
                    fail += &p * child_fail;
                }
                (map, fail)
            }
        };
        self.memo.insert(edges.clone(), result.clone());
        result
    }

    /// Number of orderings that complete a full matching from this state,
    /// through positive-weight transitions only.
    fn success_paths(&mut self, edges: &GraphKey) -> BigInt {
        if let Some(hit) = self.path_counts.get(edges) {
            return hit.clone();
        }
        let result = if edges.len() as u64 == self.m {
            BigInt::one()
        } else {
            let mut total = BigInt::zero();
            for (i, j, _) in self.suitable_pairs(edges) {
                let mut child = edges.clone();
                child.push((i, j));
                child.sort_unstable();
                total += self.success_paths(&child);
            }
            total
        };
        self.path_counts.insert(edges.clone(), result.clone());
        result
    }
}

fn guard_tree(seq: &DegreeSequence) -> Result<(), OracleError> {
    // States are keyed on placed edge sets, at most 2^C(6,2) of them.
    if seq.n() > 6 || seq.m() > 15 {
        return Err(OracleError::InstanceTooLarge {
            n: seq.n(),
            m: seq.m(),
            max_n: 6,
            max_m: 15,
        });
    }
    Ok(())
}

/// Exact per-graph probabilities and failure probability of the sampler,
/// from a memoized traversal of its decision tree in rational arithmetic.
pub fn exact_distribution(seq: &DegreeSequence) -> Result<ExactDistribution, OracleError> {
    guard_tree(seq)?;
    let mut walker = TreeWalker::new(seq);
    let (per_graph, failure_prob) = walker.distribution(&Vec::new());
    Ok(ExactDistribution {
        graph_count: per_graph.len() as u64,
        per_graph,
        failure_prob,
    })
}

/// Exact `E[N]` over the execution tree, as a rational.
///
/// Each success path contributes `P(path)·1/(m!·P(path)) = 1/m!`, so the
/// expectation is the number of success paths over `m!`; it equals the
/// labeled-graph count exactly whenever every ordering is reachable.
pub fn expected_estimator(seq: &DegreeSequence) -> Result<BigRational, OracleError> {
    guard_tree(seq)?;
    let mut walker = TreeWalker::new(seq);
    let paths = walker.success_paths(&Vec::new());
    let mut m_fact = BigInt::one();
    for i in 2..=seq.m() {
        m_fact *= BigInt::from(i);
    }
    Ok(BigRational::new(paths, m_fact))
}

/// Pearson chi-square of `samples` against the uniform distribution over
/// `support`. Returns `(statistic, p_value)`.
pub fn chi_square_uniformity(
    samples: &[GraphKey],
    support: &[GraphKey],
) -> Result<(f64, f64), OracleError> {
    let cells = support.len();
    assert!(cells >= 2, "need at least two cells");
    if samples.len() < 10 * cells {
        return Err(OracleError::TooFewSamples {
            needed: 10 * cells,
            cells,
            got: samples.len(),
        });
    }
    let index: HashMap<&GraphKey, usize> = support.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let mut counts = vec![0u64; cells];
    for s in samples {
        match index.get(s) {
            Some(&i) => counts[i] += 1,
            None => return Err(OracleError::UnknownGraph(s.clone())),
        }
    }
    let expected = samples.len() as f64 / cells as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let diff = c as f64 - expected;
            diff * diff / expected
        })
        .sum();
    let dist = ChiSquared::new((cells - 1) as f64).expect("valid dof");
    Ok((stat, dist.sf(stat)))
}
