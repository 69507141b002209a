//! Limited dispersal: one community per genotype on a random partition network,
//! a single strategy per agent for all of its neighbours.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::games::{pd_payoffs, Action, DilemmaParams};
use crate::genotype::{GenotypeSpace, SimilarityMatrix};
use crate::learning::{greedy_action, select_arm, Greedy, LearnerConfig, QTable};
use crate::network::{
    build_partition_network_with_probs, degree_stats, derive_partition_probs, EdgeProbabilities,
    PartitionSpec,
};

use super::{
    check_schedule, check_similarity, stream_rng, ConvergenceTracker, ExperimentError,
    ExperimentKind, MeasurementWindow, RunParams, RunResult, LEARNING_STREAM, NETWORK_STREAM,
};

/// How an agent meets its neighbours each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InteractionMode {
    /// Play every neighbour; learn from the mean pairwise reward.
    #[default]
    AllNeighbors,
    /// Play one uniformly sampled neighbour.
    SampledEdge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersalConfig {
    pub space: GenotypeSpace,
    pub params: DilemmaParams,
    pub partition: PartitionSpec,
    /// Bypasses the degree-preserving derivation.
    pub probabilities: Option<EdgeProbabilities>,
    pub learner: LearnerConfig,
    pub inclusive: bool,
    pub interaction: InteractionMode,
    pub steps_max: u64,
    pub window: u64,
}

impl DispersalConfig {
    pub fn validate(&self) -> Result<EdgeProbabilities, ExperimentError> {
        self.learner.validate()?;
        check_schedule(self.steps_max, self.window)?;
        let genotypes = self.space.cardinality().unwrap_or(u64::MAX);
        if genotypes != self.partition.community_count as u64 {
            return Err(ExperimentError::CommunityMismatch {
                communities: self.partition.community_count,
                genotypes: genotypes as usize,
            });
        }
        match self.probabilities {
            Some(p) => Ok(p),
            None => Ok(derive_partition_probs(&self.partition)?),
        }
    }
}

pub fn run_dispersal(config: &DispersalConfig, seed: u64) -> Result<RunResult, ExperimentError> {
    run_dispersal_with(config, seed, None)
}

/// As [`run_dispersal`], optionally overriding the node-by-node relatedness table.
pub fn run_dispersal_with(
    config: &DispersalConfig,
    seed: u64,
    similarity: Option<&SimilarityMatrix>,
) -> Result<RunResult, ExperimentError> {
    let probs = config.validate()?;
    let genotypes = config.space.enumerate()?;
    let mut net_rng = stream_rng(seed, NETWORK_STREAM);
    let net = build_partition_network_with_probs(
        config.partition.community_size,
        config.partition.community_count,
        probs,
        &genotypes,
        &mut net_rng,
    )?;
    let n = net.node_count();
    let owned;
    let sim = match similarity {
        Some(s) => {
            check_similarity(s, n)?;
            s
        }
        None => {
            owned = SimilarityMatrix::from_genotypes(net.genotypes())?;
            &owned
        }
    };

    let learner = config.learner;
    let params = config.params;
    let inclusive = config.inclusive;
    let reward = |own: f64, other: f64, h: f64| if inclusive { own + h * other } else { own };

    let adjacency = net.adjacency();
    let degrees: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut rng = stream_rng(seed, LEARNING_STREAM);
    let mut tables: Vec<QTable> = (0..n).map(|_| QTable::new(1, learner.q_init)).collect();
    let mut actions = vec![0usize; n];
    let mut accrued = vec![0.0f64; n];
    let mut snapshot = vec![Greedy::Tie; n];
    let mut tracker = ConvergenceTracker::new(config.window);
    let mut measure = MeasurementWindow::new(config.window as usize, n);
    let mut converged_at = None;
    let mut steps_run = 0;

    for t in 0..config.steps_max {
        let epsilon = learner.epsilon_at(t);
        for (a, table) in actions.iter_mut().zip(&tables) {
            *a = select_arm(table, 0, epsilon, &mut rng);
        }

        match config.interaction {
            InteractionMode::AllNeighbors => {
                accrued.iter_mut().for_each(|r| *r = 0.0);
                for &(u, v) in net.edges() {
                    let p = pd_payoffs(
                        Action::from_index(actions[u]),
                        Action::from_index(actions[v]),
                        params,
                    );
                    accrued[u] += reward(p.own, p.other, sim.get(u, v));
                    accrued[v] += reward(p.other, p.own, sim.get(v, u));
                }
                for i in 0..n {
                    if degrees[i] > 0 {
                        let mean = accrued[i] / degrees[i] as f64;
                        tables[i].update(0, actions[i], mean, learner.alpha);
                    }
                }
            }
            InteractionMode::SampledEdge => {
                for i in 0..n {
                    if degrees[i] == 0 {
                        continue;
                    }
                    let j = adjacency[i][rng.random_range(0..degrees[i])];
                    let p = pd_payoffs(
                        Action::from_index(actions[i]),
                        Action::from_index(actions[j]),
                        params,
                    );
                    let r = reward(p.own, p.other, sim.get(i, j));
                    tables[i].update(0, actions[i], r, learner.alpha);
                }
            }
        }

        for (g, table) in snapshot.iter_mut().zip(&tables) {
            *g = greedy_action(table, 0);
        }
        measure.push(&snapshot);
        tracker.observe(&snapshot);
        steps_run = t + 1;
        if tracker.converged(learner.at_floor(t)) {
            converged_at = Some(steps_run);
            break;
        }
    }

    Ok(RunResult {
        kind: ExperimentKind::Dispersal,
        seed,
        params: RunParams {
            b: params.benefit(),
            c: params.cost(),
            eta: Some(config.partition.eta),
            inclusive,
        },
        agents: n,
        states_per_agent: 1,
        loci: config.space.loci(),
        coop_freq: measure.frequencies(),
        cell_matches: vec![None; n],
        cooperators: snapshot.iter().map(|g| g.cooperation()).collect(),
        converged_at,
        steps_run,
        window_len: measure.len() as u64,
        degree: degree_stats(&net),
        q_tables: tables,
    })
}
