//! Population-level rewards over changing populations, and a minimal
//! birth-death sandbox that generates traces for them.

mod rewards;
mod sandbox;

pub use rewards::{
    check_reward_identities, combined_reward, longevity_reward, replication_reward, IdentityReport,
    RewardKind, RewardRecord,
};
pub use sandbox::{
    run_sandbox, AlwaysReproduce, Decision, HealthThreshold, Idle, QLearningPolicy,
    RandomReproduction, ReproductionPolicy, SandboxAgent, SandboxConfig, SandboxError,
};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::genotype::Genotype;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The agents alive at one time step, ordered by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PopulationState {
    alive: Vec<(AgentId, Genotype)>,
}

impl PopulationState {
    /// Sorts by id; returns `None` if an id repeats.
    pub fn new(mut alive: Vec<(AgentId, Genotype)>) -> Option<Self> {
        alive.sort_by_key(|(id, _)| *id);
        if alive.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(Self { alive })
    }

    pub fn alive(&self) -> &[(AgentId, Genotype)] {
        &self.alive
    }

    pub fn len(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    /// Distinct living genotypes with their copy counts.
    pub fn genotype_counts(&self) -> BTreeMap<&Genotype, usize> {
        let mut counts = BTreeMap::new();
        for (_, g) in &self.alive {
            *counts.entry(g).or_insert(0) += 1;
        }
        counts
    }

    pub fn unique_genotypes(&self) -> Vec<&Genotype> {
        self.genotype_counts().into_keys().collect()
    }

    pub fn genotype_of(&self, id: AgentId) -> Option<&Genotype> {
        self.alive
            .binary_search_by_key(&id, |(i, _)| *i)
            .ok()
            .map(|k| &self.alive[k].1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifeEvent {
    Birth,
    Death,
    None,
}

impl LifeEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            LifeEvent::Birth => "birth",
            LifeEvent::Death => "death",
            LifeEvent::None => "none",
        }
    }
}

/// One exported trace line: an agent's health at the end of step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub agent: AgentId,
    pub genotype: Genotype,
    pub health: f64,
    pub event: LifeEvent,
}

/// Health bookkeeping for one step; dead agents are counted with their final health.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HealthBalance {
    pub t: u64,
    pub population_before: usize,
    pub health_before: f64,
    pub health_after: f64,
    pub food_gained: f64,
}

impl HealthBalance {
    /// `health_after - health_before - (food_gained - population_before)`; zero when conserved.
    pub fn residual(&self) -> f64 {
        (self.health_after - self.health_before)
            - (self.food_gained - self.population_before as f64)
    }
}

/// States `0..=T` (state 0 is the initial population) plus everything that
/// happened in between.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PopulationTrace {
    pub states: Vec<PopulationState>,
    pub rows: Vec<TraceRow>,
    pub rewards: Vec<RewardRecord>,
    pub balances: Vec<HealthBalance>,
    pub extinct_at: Option<u64>,
}

impl PopulationTrace {
    /// Number of simulated steps.
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}
