//! Myopic tabular Q-learning with exponentially decaying epsilon-greedy exploration.
//!
//! The discount factor is fixed at zero, so every state is an independent
//! two-armed bandit and the update is a plain exponential moving average.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::games::Action;

/// Fraction of the step budget after which the automatic decay reaches the floor.
pub const AUTO_DECAY_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnerError {
    #[error("learning rate {0} is outside (0, 1]")]
    Alpha(f64),
    #[error("initial exploration {0} is outside [0, 1]")]
    Epsilon0(f64),
    #[error("decay {0} is outside (0, 1]")]
    Decay(f64),
    #[error("exploration floor {min} is outside [0, epsilon0={epsilon0}]")]
    EpsilonMin { min: f64, epsilon0: f64 },
    #[error("initial action value must be finite, got {0}")]
    QInit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearnerConfig {
    pub alpha: f64,
    pub epsilon0: f64,
    pub decay: f64,
    pub epsilon_min: f64,
    pub q_init: f64,
}

impl LearnerConfig {
    pub const DEFAULT_ALPHA: f64 = 0.8;
    pub const DEFAULT_EPSILON0: f64 = 1.0;
    pub const DEFAULT_EPSILON_MIN: f64 = 1e-5;

    /// Defaults with the decay tuned to `steps`; see [`auto_decay`].
    pub fn for_budget(steps: u64) -> Self {
        let epsilon0 = Self::DEFAULT_EPSILON0;
        let epsilon_min = Self::DEFAULT_EPSILON_MIN;
        Self {
            alpha: Self::DEFAULT_ALPHA,
            epsilon0,
            decay: auto_decay(epsilon0, epsilon_min, steps),
            epsilon_min,
            q_init: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LearnerError::Alpha(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.epsilon0) {
            return Err(LearnerError::Epsilon0(self.epsilon0));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(LearnerError::Decay(self.decay));
        }
        if !(self.epsilon_min >= 0.0 && self.epsilon_min <= self.epsilon0) {
            return Err(LearnerError::EpsilonMin {
                min: self.epsilon_min,
                epsilon0: self.epsilon0,
            });
        }
        if !self.q_init.is_finite() {
            return Err(LearnerError::QInit(self.q_init));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        epsilon_at(self, t)
    }

    pub fn at_floor(&self, t: u64) -> bool {
        epsilon_at(self, t) <= self.epsilon_min
    }
}

/// Per-step decay that takes `epsilon0` down to the floor after
/// [`AUTO_DECAY_FRACTION`] of `steps`. A zero floor targets 0.01 instead.
pub fn auto_decay(epsilon0: f64, epsilon_min: f64, steps: u64) -> f64 {
    let target = if epsilon_min > 0.0 { epsilon_min } else { 0.01 };
    let horizon = AUTO_DECAY_FRACTION * steps as f64;
    if epsilon0 <= target || horizon < 1.0 {
        return 1.0;
    }
    libm::pow(target / epsilon0, 1.0 / horizon)
}

/// `max(epsilon_min, epsilon0 * decay^t)`.
pub fn epsilon_at(config: &LearnerConfig, t: u64) -> f64 {
    let decayed = config.epsilon0 * libm::pow(config.decay, t as f64);
    decayed.max(config.epsilon_min)
}

/// Zero-discount update: `q + alpha (reward - q)`.
#[inline]
pub fn q_update(q: f64, reward: f64, alpha: f64) -> f64 {
    q + alpha * (reward - q)
}

/// Argmax of a state's two action values, with exact ties reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Greedy {
    Cooperate,
    Defect,
    Tie,
}

impl Greedy {
    /// 1 for cooperate, 0 for defect, one half for a tie.
    pub fn cooperation(self) -> f64 {
        match self {
            Greedy::Cooperate => 1.0,
            Greedy::Defect => 0.0,
            Greedy::Tie => 0.5,
        }
    }

    /// Cooperation in half-units (2, 1, 0) for exact integer accumulation.
    pub fn half_units(self) -> u32 {
        match self {
            Greedy::Cooperate => 2,
            Greedy::Tie => 1,
            Greedy::Defect => 0,
        }
    }
}

/// Dense two-armed action values for `states` states.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<[f64; 2]>,
}

impl QTable {
    pub fn new(states: usize, q_init: f64) -> Self {
        Self {
            values: vec![[q_init; 2]; states],
        }
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn value(&self, state: usize, arm: usize) -> f64 {
        self.values[state][arm]
    }

    #[inline]
    pub fn set(&mut self, state: usize, arm: usize, value: f64) {
        self.values[state][arm] = value;
    }

    #[inline]
    pub fn update(&mut self, state: usize, arm: usize, reward: f64, alpha: f64) {
        let q = &mut self.values[state][arm];
        *q = q_update(*q, reward, alpha);
    }

    /// `(state, arm, value)` in state-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .flat_map(|(s, arms)| arms.iter().enumerate().map(move |(a, &v)| (s, a, v)))
    }
}

#[inline]
pub fn greedy_action(table: &QTable, state: usize) -> Greedy {
    let [c, d] = table.values[state];
    if c > d {
        Greedy::Cooperate
    } else if d > c {
        Greedy::Defect
    } else {
        Greedy::Tie
    }
}

/// Epsilon-greedy draw over arms `{0, 1}`; exact ties are broken by a fair coin.
#[inline]
pub fn select_arm<R: Rng + ?Sized>(
    table: &QTable,
    state: usize,
    epsilon: f64,
    rng: &mut R,
) -> usize {
    if rng.random::<f64>() < epsilon {
        return usize::from(rng.random::<bool>());
    }
    let [a0, a1] = table.values[state];
    if a0 > a1 {
        0
    } else if a1 > a0 {
        1
    } else {
        usize::from(rng.random::<bool>())
    }
}

#[inline]
pub fn select_action<R: Rng + ?Sized>(
    table: &QTable,
    state: usize,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    Action::from_index(select_arm(table, state, epsilon, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(epsilon0: f64, decay: f64, epsilon_min: f64) -> LearnerConfig {
        LearnerConfig {
            alpha: 0.1,
            epsilon0,
            decay,
            epsilon_min,
            q_init: 0.0,
        }
    }

    #[test]
    fn update_examples() {
        assert!((q_update(0.0, 2.0, 0.1) - 0.2).abs() < 1e-15);
        assert_eq!(q_update(1.3, 1.3, 0.37), 1.3);
        assert_eq!(q_update(-4.0, 2.5, 1.0), 2.5);
    }

    #[test]
    fn epsilon_schedule_examples() {
        let c = config(0.8, 0.99, 0.0);
        assert_eq!(epsilon_at(&c, 0), 0.8);
        let flat = config(0.3, 1.0, 0.1);
        assert_eq!(epsilon_at(&flat, 12345), 0.3);
        let e = epsilon_at(&config(1.0, 0.999, 0.0), 1000);
        assert!((e - 0.36770).abs() < 1e-5, "{e}");
        let floored = config(1.0, 0.5, 0.05);
        assert_eq!(epsilon_at(&floored, 50), 0.05);
        assert!(floored.at_floor(50));
        assert!(!floored.at_floor(1));
    }

    #[test]
    fn auto_decay_hits_floor_at_fraction() {
        let c = LearnerConfig::for_budget(5000);
        c.validate().unwrap();
        assert!(!c.at_floor(3990));
        assert!(c.at_floor(4001));
        assert_eq!(auto_decay(0.001, 0.001, 100), 1.0);
        assert_eq!(auto_decay(1.0, 0.1, 0), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(config(1.0, 0.99, 0.01).validate().is_ok());
        assert_eq!(
            LearnerConfig {
                alpha: 0.0,
                ..config(1.0, 0.99, 0.0)
            }
            .validate(),
            Err(LearnerError::Alpha(0.0))
        );
        assert!(config(1.2, 0.99, 0.0).validate().is_err());
        assert!(config(1.0, 0.0, 0.0).validate().is_err());
        assert!(config(0.1, 0.9, 0.2).validate().is_err());
        assert!(LearnerConfig {
            q_init: f64::NAN,
            ..config(1.0, 0.9, 0.0)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn greedy_examples() {
        let mut q = QTable::new(1, 0.0);
        assert_eq!(greedy_action(&q, 0), Greedy::Tie);
        q.set(0, 0, 0.3);
        q.set(0, 1, 0.1);
        assert_eq!(greedy_action(&q, 0), Greedy::Cooperate);
        q.set(0, 0, -1.0);
        q.set(0, 1, 0.0);
        assert_eq!(greedy_action(&q, 0), Greedy::Defect);
    }

    #[test]
    fn pure_greedy_selection() {
        let mut q = QTable::new(2, 0.0);
        q.set(1, 0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(select_action(&q, 1, 0.0, &mut rng), Action::Cooperate);
        }
    }

    fn cooperate_rate(q: &QTable, epsilon: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = 10_000;
        let coop = (0..draws)
            .filter(|_| select_action(q, 0, epsilon, &mut rng) == Action::Cooperate)
            .count();
        coop as f64 / draws as f64
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut q = QTable::new(1, 0.0);
        q.set(0, 1, 5.0);
        let rate = cooperate_rate(&q, 1.0, 11);
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn ties_are_broken_fairly() {
        let q = QTable::new(1, 0.25);
        let rate = cooperate_rate(&q, 0.0, 12);
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn selection_is_reproducible() {
        let q = QTable::new(1, 0.0);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| select_arm(&q, 0, 0.3, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }

    proptest! {
        #[test]
        fn update_contracts_toward_reward(q in -100.0f64..100.0, r in -100.0f64..100.0, alpha in 0.001f64..=1.0) {
            let next = q_update(q, r, alpha);
            prop_assert!(((next - r).abs() - (1.0 - alpha) * (q - r).abs()).abs() < 1e-9);
        }

        #[test]
        fn values_stay_within_reward_bounds(
            rewards in proptest::collection::vec(-3.0f64..5.0, 1..200),
            alpha in 0.01f64..=1.0,
        ) {
            let lo = rewards.iter().copied().fold(0.0f64, f64::min);
            let hi = rewards.iter().copied().fold(0.0f64, f64::max);
            let mut q = 0.0;
            for r in rewards {
                q = q_update(q, r, alpha);
                prop_assert!(q >= lo - 1e-12 && q <= hi + 1e-12);
            }
        }

        #[test]
        fn epsilon_is_monotone(e0 in 0.0f64..=1.0, decay in 0.9f64..=1.0, frac in 0.0f64..=1.0, t in 0u64..10_000) {
            let c = config(e0, decay, e0 * frac);
            let now = epsilon_at(&c, t);
            prop_assert!(epsilon_at(&c, t + 1) <= now);
            prop_assert!(now >= c.epsilon_min);
        }
    }
}
