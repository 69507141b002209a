//! Opponent discrimination: a complete network over every genotype of the
//! space, one Q-state per opponent.

use alloc::vec;
use alloc::vec::Vec;

use crate::games::{pd_payoffs, Action, DilemmaParams};
use crate::genotype::{matching_loci, Genotype, GenotypeSpace, SimilarityMatrix};
use crate::learning::{greedy_action, select_arm, Greedy, LearnerConfig, QTable};
use crate::network::{build_complete_network, degree_stats};

use super::{
    check_schedule, check_similarity, stream_rng, ConvergenceTracker, ExperimentError,
    ExperimentKind, MeasurementWindow, RunParams, RunResult, LEARNING_STREAM,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminationConfig {
    pub space: GenotypeSpace,
    pub params: DilemmaParams,
    pub learner: LearnerConfig,
    pub inclusive: bool,
    /// Each agent also plays itself, drawing the two roles independently from
    /// its self-state.
    pub self_play: bool,
    pub steps_max: u64,
    pub window: u64,
}

impl DiscriminationConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.learner.validate()?;
        check_schedule(self.steps_max, self.window)?;
        self.space.enumerate()?;
        Ok(())
    }
}

/// One agent per genotype of `config.space`, everyone plays everyone.
pub fn run_discrimination(
    config: &DiscriminationConfig,
    seed: u64,
) -> Result<RunResult, ExperimentError> {
    config.validate()?;
    let genotypes = config.space.enumerate()?;
    let sim = SimilarityMatrix::from_genotypes(&genotypes)?;
    simulate(config, seed, &genotypes, &sim)
}

/// As [`run_discrimination`], with the relatedness table supplied by the caller.
pub fn run_discrimination_with(
    config: &DiscriminationConfig,
    seed: u64,
    sim: &SimilarityMatrix,
) -> Result<RunResult, ExperimentError> {
    config.validate()?;
    let genotypes = config.space.enumerate()?;
    simulate(config, seed, &genotypes, sim)
}

/// Complete network over an explicit population (genotypes may repeat).
pub fn run_discrimination_population(
    config: &DiscriminationConfig,
    seed: u64,
    genotypes: &[Genotype],
) -> Result<RunResult, ExperimentError> {
    config.validate()?;
    for g in genotypes {
        config.space.check(g)?;
    }
    let sim = SimilarityMatrix::from_genotypes(genotypes)?;
    simulate(config, seed, genotypes, &sim)
}

fn simulate(
    config: &DiscriminationConfig,
    seed: u64,
    genotypes: &[Genotype],
    sim: &SimilarityMatrix,
) -> Result<RunResult, ExperimentError> {
    let net = build_complete_network(genotypes)?;
    let n = net.node_count();
    check_similarity(sim, n)?;

    let learner = config.learner;
    let params = config.params;
    let mut rng = stream_rng(seed, LEARNING_STREAM);
    let mut tables: Vec<QTable> = (0..n).map(|_| QTable::new(n, learner.q_init)).collect();

    let cells = n * n;
    let played = |i: usize, j: usize| i != j || config.self_play;
    let reward = |own: f64, other: f64, h: f64| {
        if config.inclusive {
            own + h * other
        } else {
            own
        }
    };

    let mut actions = vec![0usize; cells];
    let mut mirror = vec![0usize; n];
    let mut snapshot = vec![Greedy::Tie; cells];
    let mut tracker = ConvergenceTracker::new(config.window);
    let mut measure = MeasurementWindow::new(config.window as usize, cells);
    let mut converged_at = None;
    let mut steps_run = 0;

    for t in 0..config.steps_max {
        let epsilon = learner.epsilon_at(t);
        for i in 0..n {
            for j in 0..n {
                if played(i, j) {
                    actions[i * n + j] = select_arm(&tables[i], j, epsilon, &mut rng);
                }
            }
        }
        if config.self_play {
            for (i, m) in mirror.iter_mut().enumerate() {
                *m = select_arm(&tables[i], i, epsilon, &mut rng);
            }
        }

        for i in 0..n {
            for j in (i + 1)..n {
                let ai = actions[i * n + j];
                let aj = actions[j * n + i];
                let p = pd_payoffs(Action::from_index(ai), Action::from_index(aj), params);
                tables[i].update(j, ai, reward(p.own, p.other, sim.get(i, j)), learner.alpha);
                tables[j].update(i, aj, reward(p.other, p.own, sim.get(j, i)), learner.alpha);
            }
            if config.self_play {
                let row = actions[i * n + i];
                let col = mirror[i];
                let p = pd_payoffs(Action::from_index(row), Action::from_index(col), params);
                let h = sim.get(i, i);
                tables[i].update(i, row, reward(p.own, p.other, h), learner.alpha);
                tables[i].update(i, col, reward(p.other, p.own, h), learner.alpha);
            }
        }

        for i in 0..n {
            for j in 0..n {
                snapshot[i * n + j] = greedy_action(&tables[i], j);
            }
        }
        measure.push(&snapshot);
        tracker.observe(&snapshot);
        steps_run = t + 1;
        if tracker.converged(learner.at_floor(t)) {
            converged_at = Some(steps_run);
            break;
        }
    }

    let mut cell_matches = vec![None; cells];
    for i in 0..n {
        for j in 0..n {
            if played(i, j) {
                cell_matches[i * n + j] = Some(matching_loci(&genotypes[i], &genotypes[j])? as u32);
            }
        }
    }

    let cooperators = (0..n)
        .map(|i| {
            let (sum, count) = (0..n)
                .filter(|&j| played(i, j))
                .fold((0.0, 0usize), |(s, c), j| {
                    (s + snapshot[i * n + j].cooperation(), c + 1)
                });
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect();

    Ok(RunResult {
        kind: ExperimentKind::Discrimination,
        seed,
        params: RunParams {
            b: params.benefit(),
            c: params.cost(),
            eta: None,
            inclusive: config.inclusive,
        },
        agents: n,
        states_per_agent: n,
        loci: config.space.loci(),
        coop_freq: measure.frequencies(),
        cell_matches,
        cooperators,
        converged_at,
        steps_run,
        window_len: measure.len() as u64,
        degree: degree_stats(&net),
        q_tables: tables,
    })
}
