//! Config documents for each subcommand and their translation into core configs.

use kinrl_core::experiment::{
    DiscriminationConfig, DispersalConfig, ExperimentError, InteractionMode, DEFAULT_STEPS_MAX,
    DEFAULT_WINDOW,
};
use kinrl_core::genotype::GenotypeError;
use kinrl_core::learning::{auto_decay, LearnerError};
use kinrl_core::network::{derive_partition_probs, EdgeProbabilities, NetworkError};
use kinrl_core::population::{RewardKind, SandboxConfig, SandboxError};
use kinrl_core::{
    DilemmaParams, Genotype, GenotypeSpace, LearnerConfig, MutationSpec, PartitionSpec,
};
use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::config::{Invalid, Settings};

/// Default genotype length for one command's `[genotype]` section.
pub trait DefaultLoci {
    const LOCI: usize;
}

macro_rules! default_loci {
    ($($name:ident = $loci:literal),*) => {$(
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name;
        impl DefaultLoci for $name {
            const LOCI: usize = $loci;
        }
    )*};
}

default_loci!(SixLoci = 6, ThreeLoci = 3, FourLoci = 4);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "")]
pub struct GenotypeSettings<D: DefaultLoci> {
    pub loci: usize,
    pub variants: u32,
    #[serde(skip)]
    marker: PhantomData<D>,
}

impl<D: DefaultLoci> Default for GenotypeSettings<D> {
    fn default() -> Self {
        Self {
            loci: D::LOCI,
            variants: 2,
            marker: PhantomData,
        }
    }
}

impl<D: DefaultLoci> GenotypeSettings<D> {
    pub fn space(&self) -> Result<GenotypeSpace, Invalid> {
        GenotypeSpace::new(self.loci, self.variants).map_err(|e| Invalid::new("genotype", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSettings {
    pub alpha: f64,
    pub epsilon0: f64,
    pub epsilon_min: f64,
    /// Per-step exploration decay; derived from the step budget when unset.
    pub decay: Option<f64>,
    pub q_init: f64,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        Self {
            alpha: LearnerConfig::DEFAULT_ALPHA,
            epsilon0: LearnerConfig::DEFAULT_EPSILON0,
            epsilon_min: LearnerConfig::DEFAULT_EPSILON_MIN,
            decay: None,
            q_init: 0.0,
        }
    }
}

impl LearnerSettings {
    pub fn to_core(&self, steps: u64) -> Result<LearnerConfig, Invalid> {
        let config = LearnerConfig {
            alpha: self.alpha,
            epsilon0: self.epsilon0,
            decay: self
                .decay
                .unwrap_or_else(|| auto_decay(self.epsilon0, self.epsilon_min, steps)),
            epsilon_min: self.epsilon_min,
            q_init: self.q_init,
        };
        config.validate().map_err(learner_invalid)?;
        Ok(config)
    }
}

fn learner_invalid(e: LearnerError) -> Invalid {
    let key = match e {
        LearnerError::Alpha(_) => "learner.alpha",
        LearnerError::Epsilon0(_) => "learner.epsilon0",
        LearnerError::Decay(_) => "learner.decay",
        LearnerError::EpsilonMin { .. } => "learner.epsilon_min",
        LearnerError::QInit(_) => "learner.q_init",
    };
    Invalid::new(key, e)
}

/// Maps a core validation error onto the config key that caused it.
fn experiment_invalid(e: ExperimentError) -> Invalid {
    let key = match &e {
        ExperimentError::Learner(inner) => return learner_invalid(inner.clone()),
        ExperimentError::Genotype(_) => "genotype",
        ExperimentError::Network(
            NetworkError::InvalidEta(_) | NetworkError::InfeasibleEta { .. },
        ) => "partition.eta",
        ExperimentError::Network(
            NetworkError::InvalidDegree(_) | NetworkError::DegreeTooHigh { .. },
        ) => "partition.k_avg",
        ExperimentError::Network(_) => "partition",
        ExperimentError::Game(_) => "game",
        ExperimentError::Schedule { .. } => "window",
        ExperimentError::CommunityMismatch { .. } => "partition.community_count",
        _ => "config",
    };
    Invalid::new(key, e)
}

fn check_seeds(seeds: &[u64]) -> Result<(), Invalid> {
    if seeds.is_empty() {
        return Err(Invalid::new("seeds", "at least one seed is required"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Invalid::new(
            "seeds",
            format!("seed {} appears more than once", w[0]),
        ));
    }
    Ok(())
}

fn check_positive(key: &str, value: f64) -> Result<(), Invalid> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Invalid::new(
            key,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminationGame {
    pub c: f64,
    /// Each entry gives one curve with `b = c / c_over_b`.
    pub c_over_b: Vec<f64>,
}

impl Default for DiscriminationGame {
    fn default() -> Self {
        Self {
            c: 1.0,
            c_over_b: vec![0.25, 0.4, 0.7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminationSettings {
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses every available processor.
    pub parallelism: usize,
    pub plot: bool,
    pub export_q_tables: bool,
    pub inclusive: bool,
    pub self_play: bool,
    pub steps_max: u64,
    pub window: u64,
    pub genotype: GenotypeSettings<SixLoci>,
    pub game: DiscriminationGame,
    pub learner: LearnerSettings,
}

impl Default for DiscriminationSettings {
    fn default() -> Self {
        Self {
            seeds: (1..=5).collect(),
            parallelism: 0,
            plot: true,
            export_q_tables: false,
            inclusive: true,
            self_play: true,
            steps_max: DEFAULT_STEPS_MAX,
            window: DEFAULT_WINDOW,
            genotype: GenotypeSettings::default(),
            game: DiscriminationGame::default(),
            learner: LearnerSettings::default(),
        }
    }
}

impl DiscriminationSettings {
    /// One core config per distinct `c_over_b` entry, in ascending order.
    pub fn points(&self) -> Result<Vec<(f64, DiscriminationConfig)>, Invalid> {
        check_positive("game.c", self.game.c)?;
        let space = self.genotype.space()?;
        let learner = self.learner.to_core(self.steps_max)?;
        if self.game.c_over_b.is_empty() {
            return Err(Invalid::new(
                "game.c_over_b",
                "at least one value is required",
            ));
        }
        let mut ratios = self.game.c_over_b.clone();
        ratios.sort_by(f64::total_cmp);
        ratios.dedup();
        let mut points = Vec::new();
        for ratio in ratios {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(Invalid::new(
                    "game.c_over_b",
                    format!("{ratio} is outside (0, 1)"),
                ));
            }
            let params = DilemmaParams::new(self.game.c / ratio, self.game.c)
                .map_err(|e| Invalid::new("game.c_over_b", e))?;
            let config = DiscriminationConfig {
                space,
                params,
                learner,
                inclusive: self.inclusive,
                self_play: self.self_play,
                steps_max: self.steps_max,
                window: self.window,
            };
            config.validate().map_err(experiment_invalid)?;
            points.push((ratio, config));
        }
        Ok(points)
    }
}

impl Settings for DiscriminationSettings {
    const OPTIONAL_KEYS: &'static [&'static str] = &["learner.decay"];

    fn check(&self) -> Result<(), Invalid> {
        check_seeds(&self.seeds)?;
        self.points().map(drop)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersalGame {
    pub c: f64,
    pub b_over_c: Vec<f64>,
}

impl Default for DispersalGame {
    fn default() -> Self {
        Self {
            c: 1.0,
            b_over_c: vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSettings {
    pub community_size: usize,
    pub community_count: usize,
    pub k_avg: f64,
    pub eta: Vec<f64>,
}

impl Default for PartitionSettings {
    fn default() -> Self {
        Self {
            community_size: 8,
            community_count: 8,
            k_avg: 9.0,
            eta: vec![0.05, 0.1, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersalSettings {
    pub seeds: Vec<u64>,
    pub parallelism: usize,
    pub plot: bool,
    pub export_networks: bool,
    pub export_q_tables: bool,
    pub inclusive: Vec<bool>,
    pub interaction: InteractionMode,
    pub steps_max: u64,
    pub window: u64,
    pub genotype: GenotypeSettings<ThreeLoci>,
    pub partition: PartitionSettings,
    pub game: DispersalGame,
    pub learner: LearnerSettings,
}

impl Default for DispersalSettings {
    fn default() -> Self {
        Self {
            seeds: (1..=10).collect(),
            parallelism: 0,
            plot: true,
            export_networks: false,
            export_q_tables: false,
            inclusive: vec![true, false],
            interaction: InteractionMode::AllNeighbors,
            steps_max: DEFAULT_STEPS_MAX,
            window: DEFAULT_WINDOW,
            genotype: GenotypeSettings::default(),
            partition: PartitionSettings::default(),
            game: DispersalGame::default(),
            learner: LearnerSettings::default(),
        }
    }
}

/// One (eta, b/c, reward variant) cell of the dispersal sweep.
#[derive(Debug, Clone, Copy)]
pub struct DispersalPoint {
    pub eta: f64,
    pub b_over_c: f64,
    pub inclusive: bool,
    pub config: DispersalConfig,
}

impl DispersalSettings {
    pub fn partition(&self, eta: f64) -> PartitionSpec {
        PartitionSpec {
            community_size: self.partition.community_size,
            community_count: self.partition.community_count,
            k_avg: self.partition.k_avg,
            eta,
        }
    }

    pub fn probabilities(&self, eta: f64) -> Result<EdgeProbabilities, Invalid> {
        derive_partition_probs(&self.partition(eta)).map_err(|e| experiment_invalid(e.into()))
    }

    /// Points ordered by eta, then b/c, then inclusive before baseline.
    pub fn points(&self) -> Result<Vec<DispersalPoint>, Invalid> {
        check_positive("game.c", self.game.c)?;
        let space = self.genotype.space()?;
        let learner = self.learner.to_core(self.steps_max)?;
        for (key, empty) in [
            ("partition.eta", self.partition.eta.is_empty()),
            ("game.b_over_c", self.game.b_over_c.is_empty()),
            ("inclusive", self.inclusive.is_empty()),
        ] {
            if empty {
                return Err(Invalid::new(key, "at least one value is required"));
            }
        }
        let mut etas = self.partition.eta.clone();
        etas.sort_by(f64::total_cmp);
        etas.dedup();
        let mut ratios = self.game.b_over_c.clone();
        ratios.sort_by(f64::total_cmp);
        ratios.dedup();
        let mut variants = self.inclusive.clone();
        variants.sort_unstable_by(|a, b| b.cmp(a));
        variants.dedup();

        let mut points = Vec::new();
        for &eta in &etas {
            self.probabilities(eta)?;
            for &ratio in &ratios {
                let params = DilemmaParams::new(self.game.c * ratio, self.game.c)
                    .map_err(|e| Invalid::new("game.b_over_c", e))?;
                for &inclusive in &variants {
                    let config = DispersalConfig {
                        space,
                        params,
                        partition: self.partition(eta),
                        probabilities: None,
                        learner,
                        inclusive,
                        interaction: self.interaction,
                        steps_max: self.steps_max,
                        window: self.window,
                    };
                    config.validate().map_err(experiment_invalid)?;
                    points.push(DispersalPoint {
                        eta,
                        b_over_c: ratio,
                        inclusive,
                        config,
                    });
                }
            }
        }
        Ok(points)
    }
}

impl Settings for DispersalSettings {
    const OPTIONAL_KEYS: &'static [&'static str] = &["learner.decay"];

    fn check(&self) -> Result<(), Invalid> {
        check_seeds(&self.seeds)?;
        self.points().map(drop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Idle,
    Always,
    Random,
    Threshold,
    QLearning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySettings {
    pub kind: PolicyKind,
    /// Used by `random`.
    pub probability: f64,
    /// Used by `threshold`.
    pub min_health: f64,
    /// Reward optimised by `q_learning`.
    pub reward: RewardKind,
}

impl Default for PolicySettings {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Random,
            probability: 0.2,
            min_health: 5.0,
            reward: RewardKind::Combined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxSettings {
    pub seed: u64,
    pub steps: u64,
    pub plot: bool,
    pub export_q_tables: bool,
    pub initial_genotype: String,
    pub genotype: GenotypeSettings<FourLoci>,
    pub mu: f64,
    pub initial_health: f64,
    pub food_per_step: u32,
    pub policy: PolicySettings,
    pub learner: LearnerSettings,
}

impl Default for SandboxSettings {
    fn default() -> Self {
        Self {
            seed: 1,
            steps: 1000,
            plot: true,
            export_q_tables: false,
            initial_genotype: "0-0-0-0".into(),
            genotype: GenotypeSettings::default(),
            mu: 0.05,
            initial_health: 10.0,
            food_per_step: 4,
            policy: PolicySettings::default(),
            learner: LearnerSettings::default(),
        }
    }
}

impl SandboxSettings {
    pub fn to_core(&self) -> Result<SandboxConfig, Invalid> {
        let space = self.genotype.space()?;
        let initial: Genotype = self
            .initial_genotype
            .parse()
            .map_err(|e: GenotypeError| Invalid::new("initial_genotype", e))?;
        let mutation = MutationSpec::new(self.mu).map_err(|e| Invalid::new("mu", e))?;
        let config = SandboxConfig {
            space,
            initial,
            mutation,
            initial_health: self.initial_health,
            food_per_step: self.food_per_step,
            steps: self.steps,
        };
        config.validate().map_err(|e| {
            let key = match &e {
                SandboxError::InitialHealth(_) => "initial_health",
                SandboxError::Genotype(_) => "initial_genotype",
                SandboxError::Learner(_) => "learner",
                SandboxError::Probability(_) => "policy.probability",
            };
            Invalid::new(key, e)
        })?;
        Ok(config)
    }
}

impl Settings for SandboxSettings {
    const OPTIONAL_KEYS: &'static [&'static str] = &["learner.decay"];

    fn check(&self) -> Result<(), Invalid> {
        self.to_core()?;
        match self.policy.kind {
            PolicyKind::Random if !(0.0..=1.0).contains(&self.policy.probability) => {
                Err(Invalid::new(
                    "policy.probability",
                    format!("{} is outside [0, 1]", self.policy.probability),
                ))
            }
            PolicyKind::Threshold if !self.policy.min_health.is_finite() => {
                Err(Invalid::new("policy.min_health", "must be finite"))
            }
            PolicyKind::QLearning => self.learner.to_core(self.steps.max(1)).map(drop),
            _ => Ok(()),
        }
    }
}
