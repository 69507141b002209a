//! The two network experiments (opponent discrimination and limited dispersal),
//! convergence detection, and aggregation over seeds.

mod aggregate;
mod convergence;
mod discrimination;
mod dispersal;

pub use aggregate::{aggregate, AggregateRow, Binning};
pub use convergence::{detect_convergence, ConvergenceTracker, MeasurementWindow};
pub use discrimination::{
    run_discrimination, run_discrimination_population, run_discrimination_with,
    DiscriminationConfig,
};
pub use dispersal::{run_dispersal, run_dispersal_with, DispersalConfig, InteractionMode};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::games::GameError;
use crate::genotype::{GenotypeError, SimilarityMatrix};
use crate::learning::{LearnerError, QTable};
use crate::network::{DegreeStats, NetworkError};

/// Random stream used for network sampling; learning uses [`LEARNING_STREAM`].
pub const NETWORK_STREAM: u64 = 0;
pub const LEARNING_STREAM: u64 = 1;

/// Step budget used by the default sweeps.
pub const DEFAULT_STEPS_MAX: u64 = 5000;
/// Convergence and measurement window used by the default sweeps.
pub const DEFAULT_WINDOW: u64 = 100;

/// Independent ChaCha stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Genotype(#[from] GenotypeError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("need steps_max > window > 0, got steps_max={steps_max}, window={window}")]
    Schedule { steps_max: u64, window: u64 },
    #[error("similarity override is {got}x{got}, the population has {expected} agents")]
    SimilaritySize { expected: usize, got: usize },
    #[error("similarity override entry ({i}, {j}) = {value} is outside [0, 1]")]
    SimilarityRange { i: usize, j: usize, value: f64 },
    #[error(
        "partition has {communities} communities but the genotype space has {genotypes} genotypes"
    )]
    CommunityMismatch {
        communities: usize,
        genotypes: usize,
    },
    #[error("nothing to aggregate")]
    NoResults,
    #[error("cannot aggregate runs of different shape: {0}")]
    MixedShapes(&'static str),
}

pub(crate) fn check_similarity(
    sim: &SimilarityMatrix,
    agents: usize,
) -> Result<(), ExperimentError> {
    if sim.size() != agents {
        return Err(ExperimentError::SimilaritySize {
            expected: agents,
            got: sim.size(),
        });
    }
    for i in 0..agents {
        for (j, &value) in sim.row(i).iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ExperimentError::SimilarityRange { i, j, value });
            }
        }
    }
    Ok(())
}

pub(crate) fn check_schedule(steps_max: u64, window: u64) -> Result<(), ExperimentError> {
    if window == 0 || steps_max <= window {
        return Err(ExperimentError::Schedule { steps_max, window });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ExperimentKind {
    Discrimination,
    Dispersal,
}

/// Parameter point a run was produced at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams {
    pub b: f64,
    pub c: f64,
    pub eta: Option<f64>,
    pub inclusive: bool,
}

impl RunParams {
    pub fn b_over_c(&self) -> f64 {
        self.b / self.c
    }

    pub fn c_over_b(&self) -> f64 {
        self.c / self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub params: RunParams,
    pub agents: usize,
    pub states_per_agent: usize,
    pub loci: usize,
    /// Greedy cooperation frequency per (agent, state) cell over the
    /// measurement window, agent-major.
    pub coop_freq: Vec<f64>,
    /// Loci shared by the agent and the opponent a cell refers to. `None` for
    /// cells without an opponent (dispersal) or that were never played.
    pub cell_matches: Vec<Option<u32>>,
    /// Final greedy cooperation per agent (ties count one half), averaged
    /// over the agent's played states.
    pub cooperators: Vec<f64>,
    pub converged_at: Option<u64>,
    pub steps_run: u64,
    pub window_len: u64,
    pub degree: DegreeStats,
    pub q_tables: Vec<QTable>,
}

impl RunResult {
    pub fn cooperator_proportion(&self) -> f64 {
        if self.cooperators.is_empty() {
            return 0.0;
        }
        self.cooperators.iter().sum::<f64>() / self.cooperators.len() as f64
    }

    /// Mean cooperation frequency per similarity value `h`, ascending in `h`.
    pub fn similarity_bins(&self) -> Vec<(f64, f64)> {
        let mut bins: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for (freq, matches) in self.coop_freq.iter().zip(&self.cell_matches) {
            if let Some(k) = matches {
                let slot = bins.entry(*k).or_insert((0.0, 0));
                slot.0 += freq;
                slot.1 += 1;
            }
        }
        bins.into_iter()
            .map(|(k, (sum, n))| (k as f64 / self.loci as f64, sum / n as f64))
            .collect()
    }

    pub fn converged(&self) -> bool {
        self.converged_at.is_some()
    }
}
