//! Non-spatial birth-death world: health decays by one per step, food
//! restores it, and reproducing hands a quarter of the parent's health to a
//! (possibly mutated) child.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::genotype::{Genotype, GenotypeError, GenotypeSpace, MutationSpec};
use crate::learning::{select_arm, LearnerConfig, LearnerError, QTable};

use super::rewards::{combined_reward, longevity_reward, replication_reward};
use super::{
    AgentId, HealthBalance, LifeEvent, PopulationState, PopulationTrace, RewardKind, RewardRecord,
    TraceRow,
};

/// Fraction of the parent's current health handed to a child.
pub const REPRODUCTION_SHARE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SandboxError {
    #[error(transparent)]
    Genotype(#[from] GenotypeError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("initial health must be positive and finite, got {0}")]
    InitialHealth(f64),
    #[error("reproduction probability must lie in [0, 1], got {0}")]
    Probability(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandboxConfig {
    pub space: GenotypeSpace,
    pub initial: Genotype,
    pub mutation: MutationSpec,
    /// Starting health of the founder; also the cap food can restore to.
    pub initial_health: f64,
    /// Food units handed out per step, each to a uniformly chosen agent.
    pub food_per_step: u32,
    pub steps: u64,
}

impl SandboxConfig {
    pub fn validate(&self) -> Result<(), SandboxError> {
        self.space.check(&self.initial)?;
        MutationSpec::new(self.mutation.mu)?;
        if !(self.initial_health.is_finite() && self.initial_health > 0.0) {
            return Err(SandboxError::InitialHealth(self.initial_health));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandboxAgent {
    pub id: AgentId,
    pub genotype: Genotype,
    pub health: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Reproduce,
    Idle,
}

/// Decides, each step, whether a living agent reproduces.
pub trait ReproductionPolicy {
    fn decide(&mut self, agent: &SandboxAgent, t: u64, rng: &mut dyn RngCore) -> Decision;

    /// Rewards earned at the end of the step in which the agent made `decision`.
    fn observe(&mut self, _agent: AgentId, _decision: Decision, _rewards: &RewardRecord) {}

    /// The agent died; drop any per-agent state.
    fn retire(&mut self, _agent: AgentId) {}
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Idle;

impl ReproductionPolicy for Idle {
    fn decide(&mut self, _: &SandboxAgent, _: u64, _: &mut dyn RngCore) -> Decision {
        Decision::Idle
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysReproduce;

impl ReproductionPolicy for AlwaysReproduce {
    fn decide(&mut self, _: &SandboxAgent, _: u64, _: &mut dyn RngCore) -> Decision {
        Decision::Reproduce
    }
}

/// Reproduces with a fixed probability each step.
#[derive(Debug, Clone, Copy)]
pub struct RandomReproduction {
    probability: f64,
}

impl RandomReproduction {
    pub fn new(probability: f64) -> Result<Self, SandboxError> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(SandboxError::Probability(probability));
        }
        Ok(Self { probability })
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }
}

impl ReproductionPolicy for RandomReproduction {
    fn decide(&mut self, _: &SandboxAgent, _: u64, rng: &mut dyn RngCore) -> Decision {
        if rng.random_bool(self.probability) {
            Decision::Reproduce
        } else {
            Decision::Idle
        }
    }
}

/// Reproduces whenever health is at least `min_health`.
#[derive(Debug, Clone, Copy)]
pub struct HealthThreshold {
    pub min_health: f64,
}

impl ReproductionPolicy for HealthThreshold {
    fn decide(&mut self, agent: &SandboxAgent, _: u64, _: &mut dyn RngCore) -> Decision {
        if agent.health >= self.min_health {
            Decision::Reproduce
        } else {
            Decision::Idle
        }
    }
}

/// One single-state Q-table per agent over {reproduce, idle}, trained on the
/// chosen population reward.
#[derive(Debug, Clone)]
pub struct QLearningPolicy {
    learner: LearnerConfig,
    reward: RewardKind,
    tables: BTreeMap<AgentId, QTable>,
}

impl QLearningPolicy {
    /// Q-table column for [`Decision::Reproduce`].
    pub const REPRODUCE: usize = 0;
    /// Q-table column for [`Decision::Idle`].
    pub const IDLE: usize = 1;

    pub fn new(learner: LearnerConfig, reward: RewardKind) -> Result<Self, LearnerError> {
        learner.validate()?;
        Ok(Self {
            learner,
            reward,
            tables: BTreeMap::new(),
        })
    }

    pub fn tables(&self) -> &BTreeMap<AgentId, QTable> {
        &self.tables
    }
}

impl ReproductionPolicy for QLearningPolicy {
    fn decide(&mut self, agent: &SandboxAgent, t: u64, rng: &mut dyn RngCore) -> Decision {
        let q_init = self.learner.q_init;
        let table = self
            .tables
            .entry(agent.id)
            .or_insert_with(|| QTable::new(1, q_init));
        match select_arm(table, 0, self.learner.epsilon_at(t), rng) {
            Self::REPRODUCE => Decision::Reproduce,
            _ => Decision::Idle,
        }
    }

    fn observe(&mut self, agent: AgentId, decision: Decision, rewards: &RewardRecord) {
        if let Some(table) = self.tables.get_mut(&agent) {
            let arm = match decision {
                Decision::Reproduce => Self::REPRODUCE,
                Decision::Idle => Self::IDLE,
            };
            table.update(0, arm, rewards.get(self.reward), self.learner.alpha);
        }
    }

    fn retire(&mut self, agent: AgentId) {
        self.tables.remove(&agent);
    }
}

fn snapshot(agents: &[SandboxAgent]) -> PopulationState {
    PopulationState::new(agents.iter().map(|a| (a.id, a.genotype.clone())).collect())
        .expect("agent ids are unique")
}

/// Runs the world for `config.steps` steps or until extinction.
///
/// Per step: every agent loses one health; food units go to uniformly drawn
/// agents (+1 each, capped at the initial health); each pre-existing agent
/// with positive health may reproduce; agents at health <= 0 are removed.
/// All three population rewards are recorded for every survivor.
pub fn run_sandbox<R: Rng>(
    config: &SandboxConfig,
    policy: &mut dyn ReproductionPolicy,
    rng: &mut R,
) -> Result<PopulationTrace, SandboxError> {
    config.validate()?;
    let cap = config.initial_health;
    let mut agents = alloc::vec![SandboxAgent {
        id: AgentId(0),
        genotype: config.initial.clone(),
        health: cap,
    }];
    let mut next_id = 1u64;
    let mut trace = PopulationTrace {
        states: alloc::vec![snapshot(&agents)],
        ..PopulationTrace::default()
    };
    let mut decisions: BTreeMap<AgentId, Decision> = BTreeMap::new();

    for t in 1..=config.steps {
        let population_before = agents.len();
        let health_before: f64 = agents.iter().map(|a| a.health).sum();

        for a in &mut agents {
            a.health -= 1.0;
        }

        let mut food_gained = 0.0;
        if !agents.is_empty() {
            for _ in 0..config.food_per_step {
                let k = rng.random_range(0..agents.len());
                let gain = (cap - agents[k].health).clamp(0.0, 1.0);
                agents[k].health += gain;
                food_gained += gain;
            }
        }

        decisions.clear();
        let mut births = Vec::new();
        for a in &mut agents {
            let decision = policy.decide(a, t, rng);
            decisions.insert(a.id, decision);
            if decision == Decision::Reproduce && a.health > 0.0 {
                let share = a.health * REPRODUCTION_SHARE;
                a.health -= share;
                births.push(SandboxAgent {
                    id: AgentId(next_id),
                    genotype: config.space.mutate(&a.genotype, config.mutation, rng),
                    health: share,
                });
                next_id += 1;
            }
        }
        let newborn_ids: Vec<AgentId> = births.iter().map(|b| b.id).collect();
        agents.extend(births);

        let health_after: f64 = agents.iter().map(|a| a.health).sum();
        trace.balances.push(HealthBalance {
            t,
            population_before,
            health_before,
            health_after,
            food_gained,
        });

        let (alive, dead): (Vec<_>, Vec<_>) = agents.into_iter().partition(|a| a.health > 0.0);
        agents = alive;
        for d in &dead {
            policy.retire(d.id);
            trace.rows.push(TraceRow {
                t,
                agent: d.id,
                genotype: d.genotype.clone(),
                health: d.health,
                event: LifeEvent::Death,
            });
        }

        let curr = snapshot(&agents);
        let prev = trace.states.last().expect("initial state recorded");
        let mut cache: BTreeMap<&Genotype, (f64, f64, f64)> = BTreeMap::new();
        for a in &agents {
            let (longevity, replication, combined) = match cache.get(&a.genotype) {
                Some(&cached) => cached,
                None => {
                    let fresh = (
                        longevity_reward(&a.genotype, &curr)?,
                        replication_reward(&a.genotype, prev, &curr)?,
                        combined_reward(&a.genotype, &curr)?,
                    );
                    cache.insert(&a.genotype, fresh);
                    fresh
                }
            };
            let record = RewardRecord {
                t,
                agent: a.id,
                longevity,
                replication,
                combined,
            };
            if let Some(&decision) = decisions.get(&a.id) {
                policy.observe(a.id, decision, &record);
            }
            trace.rewards.push(record);
            trace.rows.push(TraceRow {
                t,
                agent: a.id,
                genotype: a.genotype.clone(),
                health: a.health,
                event: if newborn_ids.contains(&a.id) {
                    LifeEvent::Birth
                } else {
                    LifeEvent::None
                },
            });
        }
        trace.states.push(curr);

        if agents.is_empty() {
            trace.extinct_at = Some(t);
            break;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::check_reward_identities;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(mu: f64, food: u32, health: f64, steps: u64) -> SandboxConfig {
        SandboxConfig {
            space: GenotypeSpace::new(6, 2).unwrap(),
            initial: "0-0-0-0-0-0".parse().unwrap(),
            mutation: MutationSpec::new(mu).unwrap(),
            initial_health: health,
            food_per_step: food,
            steps,
        }
    }

    #[test]
    fn starving_idle_founder_dies_on_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trace = run_sandbox(&config(0.0, 0, 5.0, 100), &mut Idle, &mut rng).unwrap();
        assert_eq!(trace.extinct_at, Some(5));
        assert_eq!(trace.steps(), 5);
        assert!(trace.states.last().unwrap().is_empty());
        let last = trace.rows.last().unwrap();
        assert_eq!((last.t, last.event), (5, LifeEvent::Death));
        assert_eq!(trace.rewards.len(), 4);
    }

    #[test]
    fn clonal_growth_keeps_longevity_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trace =
            run_sandbox(&config(0.0, 40, 8.0, 200), &mut AlwaysReproduce, &mut rng).unwrap();
        assert_eq!(trace.extinct_at, None);
        assert!(trace.states.iter().any(|s| s.len() > 5));
        for s in &trace.states {
            assert!(s.unique_genotypes().len() <= 1);
        }
        for r in &trace.rewards {
            assert_eq!(r.longevity, 1.0);
            assert_eq!(r.combined, trace.states[r.t as usize].len() as f64);
        }
    }

    #[test]
    fn reproduction_hands_over_a_quarter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trace = run_sandbox(&config(0.0, 0, 8.0, 1), &mut AlwaysReproduce, &mut rng).unwrap();
        // 8 - 1 = 7, child gets 1.75, parent keeps 5.25
        let rows: Vec<_> = trace
            .rows
            .iter()
            .map(|r| (r.agent.0, r.health, r.event))
            .collect();
        assert_eq!(
            rows,
            [(0, 5.25, LifeEvent::None), (1, 1.75, LifeEvent::Birth)]
        );
    }

    #[test]
    fn food_is_capped_at_initial_health() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trace = run_sandbox(&config(0.0, 10, 3.0, 50), &mut Idle, &mut rng).unwrap();
        assert!(trace.rows.iter().all(|r| r.health <= 3.0));
        assert_eq!(trace.extinct_at, None);
    }

    #[test]
    fn zero_steps_gives_an_empty_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trace = run_sandbox(&config(0.1, 3, 5.0, 0), &mut AlwaysReproduce, &mut rng).unwrap();
        assert_eq!(trace.steps(), 0);
        assert!(trace.rows.is_empty() && trace.rewards.is_empty());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut c = config(0.0, 1, 5.0, 3);
        c.initial_health = 0.0;
        assert!(matches!(
            run_sandbox(&c, &mut Idle, &mut rng),
            Err(SandboxError::InitialHealth(_))
        ));
        let mut c = config(0.0, 1, 5.0, 3);
        c.mutation.mu = 1.5;
        assert!(run_sandbox(&c, &mut Idle, &mut rng).is_err());
        let mut c = config(0.0, 1, 5.0, 3);
        c.initial = "0-1".parse().unwrap();
        assert!(run_sandbox(&c, &mut Idle, &mut rng).is_err());
        assert!(RandomReproduction::new(-0.1).is_err());
        assert!(RandomReproduction::new(f64::NAN).is_err());
        assert_eq!(RandomReproduction::new(1.0).unwrap().probability(), 1.0);
    }

    #[test]
    fn mutating_world_satisfies_identities() {
        for (seed, mu) in [(7u64, 0.05), (8, 0.2)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut policy = RandomReproduction::new(0.2).unwrap();
            let trace = run_sandbox(&config(mu, 25, 10.0, 300), &mut policy, &mut rng).unwrap();
            assert!(trace.states.iter().any(|s| s.unique_genotypes().len() > 1));
            let report = check_reward_identities(&trace).unwrap();
            assert!(report.passed(1e-9), "{report:?}");
        }
    }

    #[test]
    fn learning_policy_trains_and_forgets() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let learner = LearnerConfig::for_budget(300);
        let mut policy = QLearningPolicy::new(learner, RewardKind::Combined).unwrap();
        let trace = run_sandbox(&config(0.05, 20, 10.0, 300), &mut policy, &mut rng).unwrap();
        let alive = trace.states.last().unwrap().len();
        assert_eq!(policy.tables().len(), alive);
        assert!(policy
            .tables()
            .values()
            .any(|q| q.entries().any(|(_, _, v)| v != 0.0)));
        assert!(check_reward_identities(&trace).unwrap().passed(1e-9));
    }

    #[test]
    fn same_seed_same_trace() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            run_sandbox(
                &config(0.1, 15, 6.0, 150),
                &mut RandomReproduction::new(0.3).unwrap(),
                &mut rng,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
