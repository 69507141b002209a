use alloc::collections::{BTreeMap, BTreeSet};

use crate::genotype::{hamming_similarity, Genotype, GenotypeError};

use super::{AgentId, PopulationState, PopulationTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RewardKind {
    Longevity,
    Replication,
    Combined,
}

/// All three rewards for one living agent at step `t >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardRecord {
    pub t: u64,
    pub agent: AgentId,
    pub longevity: f64,
    pub replication: f64,
    pub combined: f64,
}

impl RewardRecord {
    pub fn get(&self, kind: RewardKind) -> f64 {
        match kind {
            RewardKind::Longevity => self.longevity,
            RewardKind::Replication => self.replication,
            RewardKind::Combined => self.combined,
        }
    }
}

/// Sum of similarities to each distinct living genotype; copies count once.
pub fn longevity_reward(me: &Genotype, state: &PopulationState) -> Result<f64, GenotypeError> {
    state
        .genotype_counts()
        .into_keys()
        .map(|g| hamming_similarity(me, g))
        .sum()
}

/// Sum of similarities to every living agent.
pub fn combined_reward(me: &Genotype, state: &PopulationState) -> Result<f64, GenotypeError> {
    state
        .genotype_counts()
        .into_iter()
        .map(|(g, copies)| Ok(copies as f64 * hamming_similarity(me, g)?))
        .sum()
}

/// Similarity-weighted newborns minus similarity-weighted deaths between two
/// consecutive states. Agents are matched by id.
pub fn replication_reward(
    me: &Genotype,
    prev: &PopulationState,
    curr: &PopulationState,
) -> Result<f64, GenotypeError> {
    let (mut i, mut j) = (0, 0);
    let (a, b) = (prev.alive(), curr.alive());
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some((pid, pg)), Some((cid, cg))) if pid == cid => {
                if pg != cg {
                    total += hamming_similarity(me, cg)? - hamming_similarity(me, pg)?;
                }
                i += 1;
                j += 1;
            }
            (Some((pid, pg)), next) if next.is_none_or(|(cid, _)| pid < cid) => {
                total -= hamming_similarity(me, pg)?;
                i += 1;
            }
            (_, Some((_, cg))) => {
                total += hamming_similarity(me, cg)?;
                j += 1;
            }
            (_, None) => unreachable!("loop condition guarantees an unmatched prev entry"),
        }
    }
    Ok(total)
}

/// Outcome of checking a finished trace against the reward identities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityReport {
    pub records_checked: usize,
    /// Largest `|replication(t) - (combined(t) - combined(t-1))|` over recorded rewards.
    pub max_replication_gap: f64,
    /// Records where longevity exceeded combined.
    pub dominance_violations: usize,
    /// Largest telescoping mismatch, per genotype over the whole trace and
    /// per agent over its lifetime.
    pub max_telescoping_gap: f64,
    /// Largest health conservation residual.
    pub max_health_residual: f64,
}

impl IdentityReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_replication_gap < tolerance
            && self.dominance_violations == 0
            && self.max_telescoping_gap < tolerance
            && self.max_health_residual < tolerance
    }
}

pub fn check_reward_identities(trace: &PopulationTrace) -> Result<IdentityReport, GenotypeError> {
    let mut report = IdentityReport::default();
    let states = &trace.states;

    // agent id -> (genotype, first t, last t, summed replication)
    let mut lifetimes: BTreeMap<AgentId, (&Genotype, u64, u64, f64)> = BTreeMap::new();
    for rec in &trace.rewards {
        let t = rec.t as usize;
        let me = states[t]
            .genotype_of(rec.agent)
            .expect("rewards are only recorded for living agents");
        let delta = combined_reward(me, &states[t])? - combined_reward(me, &states[t - 1])?;
        report.max_replication_gap = report
            .max_replication_gap
            .max((rec.replication - delta).abs());
        if rec.longevity > rec.combined {
            report.dominance_violations += 1;
        }
        let life = lifetimes
            .entry(rec.agent)
            .or_insert((me, rec.t, rec.t, 0.0));
        life.2 = rec.t;
        life.3 += rec.replication;
        report.records_checked += 1;
    }

    for (me, first, last, sum) in lifetimes.values() {
        let expected = combined_reward(me, &states[*last as usize])?
            - combined_reward(me, &states[*first as usize - 1])?;
        report.max_telescoping_gap = report.max_telescoping_gap.max((sum - expected).abs());
    }

    if let (Some(first), Some(last)) = (states.first(), states.last()) {
        let everyone: BTreeSet<&Genotype> = states
            .iter()
            .flat_map(|s| s.alive().iter().map(|(_, g)| g))
            .collect();
        for me in everyone {
            let mut sum = 0.0;
            for w in states.windows(2) {
                sum += replication_reward(me, &w[0], &w[1])?;
            }
            let expected = combined_reward(me, last)? - combined_reward(me, first)?;
            report.max_telescoping_gap = report.max_telescoping_gap.max((sum - expected).abs());
        }
    }

    for b in &trace.balances {
        report.max_health_residual = report.max_health_residual.max(b.residual().abs());
    }
    Ok(report)
}
