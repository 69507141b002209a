use kinrl_core::experiment::{
    run_discrimination, run_discrimination_with, run_dispersal, run_dispersal_with,
    DiscriminationConfig, DispersalConfig, InteractionMode,
};
use kinrl_core::{
    DilemmaParams, GenotypeSpace, LearnerConfig, PartitionSpec, RunResult, SimilarityMatrix,
};

fn discrimination(inclusive: bool) -> DiscriminationConfig {
    DiscriminationConfig {
        space: GenotypeSpace::new(4, 2).unwrap(),
        params: DilemmaParams::new(3.0, 1.0).unwrap(),
        learner: LearnerConfig::for_budget(400),
        inclusive,
        self_play: true,
        steps_max: 400,
        window: 40,
    }
}

fn dispersal(inclusive: bool, interaction: InteractionMode) -> DispersalConfig {
    DispersalConfig {
        space: GenotypeSpace::new(3, 2).unwrap(),
        params: DilemmaParams::new(6.0, 1.0).unwrap(),
        partition: PartitionSpec {
            community_size: 8,
            community_count: 8,
            k_avg: 9.0,
            eta: 0.1,
        },
        probabilities: None,
        learner: LearnerConfig::for_budget(400),
        inclusive,
        interaction,
        steps_max: 400,
        window: 40,
    }
}

fn bits(r: &RunResult) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    (
        r.coop_freq.iter().map(|x| x.to_bits()).collect(),
        r.cooperators.iter().map(|x| x.to_bits()).collect(),
        r.q_tables
            .iter()
            .flat_map(|t| t.entries().map(|(_, _, v)| v.to_bits()).collect::<Vec<_>>())
            .collect(),
    )
}

fn zeros(n: usize) -> SimilarityMatrix {
    SimilarityMatrix::from_values(n, vec![0.0; n * n]).unwrap()
}

#[test]
fn zero_relatedness_makes_discrimination_variants_identical() {
    let sim = zeros(16);
    for seed in [1, 2, 3] {
        let inclusive = run_discrimination_with(&discrimination(true), seed, &sim).unwrap();
        let baseline = run_discrimination_with(&discrimination(false), seed, &sim).unwrap();
        assert_eq!(bits(&inclusive), bits(&baseline), "seed {seed}");
        assert_eq!(inclusive.converged_at, baseline.converged_at);
    }
}

#[test]
fn zero_relatedness_makes_dispersal_variants_identical() {
    let sim = zeros(64);
    for mode in [InteractionMode::AllNeighbors, InteractionMode::SampledEdge] {
        for seed in [1, 2, 3] {
            let inclusive = run_dispersal_with(&dispersal(true, mode), seed, Some(&sim)).unwrap();
            let baseline = run_dispersal_with(&dispersal(false, mode), seed, Some(&sim)).unwrap();
            assert_eq!(bits(&inclusive), bits(&baseline), "{mode:?} seed {seed}");
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let a = run_discrimination(&discrimination(true), 9).unwrap();
    let b = run_discrimination(&discrimination(true), 9).unwrap();
    assert_eq!(bits(&a), bits(&b));
    let c = run_dispersal(&dispersal(true, InteractionMode::AllNeighbors), 9).unwrap();
    let d = run_dispersal(&dispersal(true, InteractionMode::AllNeighbors), 9).unwrap();
    assert_eq!(bits(&c), bits(&d));
    assert_eq!(c.degree, d.degree);
}

#[test]
fn different_seeds_explore_differently() {
    let a = run_discrimination(&discrimination(true), 1).unwrap();
    let b = run_discrimination(&discrimination(true), 2).unwrap();
    assert_ne!(bits(&a).2, bits(&b).2);
}

#[test]
fn shapes_follow_the_configuration() {
    let r = run_discrimination(&discrimination(true), 1).unwrap();
    assert_eq!(r.agents, 16);
    assert_eq!(r.states_per_agent, 16);
    assert_eq!(r.coop_freq.len(), 256);
    assert_eq!(r.similarity_bins().len(), 5);
    let d = run_dispersal(&dispersal(true, InteractionMode::AllNeighbors), 1).unwrap();
    assert_eq!(d.agents, 64);
    assert_eq!(d.cooperators.len(), 64);
    assert!((0.0..=1.0).contains(&d.cooperator_proportion()));
}
