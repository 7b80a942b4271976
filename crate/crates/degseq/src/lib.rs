//! Near-uniform random generation and approximate counting of simple graphs
//! with a prescribed degree sequence.
//!
//! The core is a weighted sequential edge-insertion sampler: starting from an
//! empty graph, edges are added one at a time between non-adjacent vertices
//! `i`, `j` with probability proportional to `d̂_i d̂_j (1 - d_i d_j / 4m)`,
//! where `d̂` are residual degrees. Tracking the exact probability of the
//! generated sequence yields an unbiased importance-sampling estimator for the
//! number of labeled simple graphs with the given degrees, and an
//! accept/reject wrapper turns the sampler into an (ε,δ)-approximately
//! uniform generator.
//!
//! Modules:
//! - [`degrees`]: degree-sequence validation and closed-form quantities
//! - [`sampler`]: the weighted sequential sampler with O(d_max) incremental
//!   state updates
//! - [`estimators`]: count estimation, per-graph probability estimation, and
//!   (ε,δ)-uniform generation
//! - [`oracle`]: exact brute-force machinery for desk-scale validation
//! - [`logspace`]: stable log-domain arithmetic

pub mod cli;
pub mod degrees;
pub mod estimators;
pub mod logspace;
pub mod oracle;
pub mod sampler;

pub use degrees::DegreeSequence;
pub use sampler::GraphSample;
