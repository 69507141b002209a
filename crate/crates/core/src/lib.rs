//! Simulation core for independent Q-learners whose rewards are weighted by
//! genetic relatedness.
//!
//! Everything here is deterministic given a seed and needs only `alloc`:
//!
//! - [`genotype`]: genotypes, Hamming similarity, mutation
//! - [`games`]: prisoner's dilemma payoffs and the inclusive reward
//! - [`network`]: complete and random partition interaction networks
//! - [`learning`]: myopic epsilon-greedy Q-tables
//! - [`experiment`]: opponent-discrimination and limited-dispersal runs
//! - [`population`]: longevity, replication and combined population rewards,
//!   plus a birth-death sandbox that produces traces for them
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod experiment;
pub mod games;
pub mod genotype;
pub mod learning;
pub mod network;
pub mod population;

pub use experiment::{ExperimentError, ExperimentKind, RunParams, RunResult};
pub use games::{Action, DilemmaParams};
pub use genotype::{hamming_similarity, Genotype, GenotypeSpace, MutationSpec, SimilarityMatrix};
pub use learning::{LearnerConfig, QTable};
pub use network::{NetworkTopology, PartitionSpec};
