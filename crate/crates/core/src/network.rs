//! Interaction topologies: complete graphs and random partition graphs with
//! one genotype per community.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::genotype::Genotype;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("partition needs community_size >= 2 and community_count >= 2, got {size} x {count}")]
    TooSmall { size: usize, count: usize },
    #[error("target mean degree must be positive, got {0}")]
    InvalidDegree(f64),
    #[error("dispersal coefficient {0} is outside (0, 1]")]
    InvalidEta(f64),
    #[error("infeasible partition: eta={eta} needs p_in={p_in} > 1; the smallest feasible eta is {min_eta}")]
    InfeasibleEta { eta: f64, p_in: f64, min_eta: f64 },
    #[error("mean degree {k_avg} exceeds the complete graph's degree {max}")]
    DegreeTooHigh { k_avg: f64, max: f64 },
    #[error("edge probabilities must lie in [0, 1], got p_in={p_in}, p_out={p_out}")]
    InvalidProbability { p_in: f64, p_out: f64 },
    #[error("expected {expected} community genotypes, got {got}")]
    GenotypeCount { expected: usize, got: usize },
    #[error("community genotypes must be distinct (communities {0} and {1} share one)")]
    DuplicateGenotype(usize, usize),
    #[error("a network needs at least one node")]
    Empty,
}

/// Undirected simple graph with a genotype and community per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    genotypes: Vec<Genotype>,
    communities: Vec<usize>,
    /// Sorted, `u < v`, no duplicates.
    edges: Vec<(usize, usize)>,
}

impl NetworkTopology {
    pub fn node_count(&self) -> usize {
        self.genotypes.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn genotypes(&self) -> &[Genotype] {
        &self.genotypes
    }

    pub fn genotype_of(&self, node: usize) -> &Genotype {
        &self.genotypes[node]
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.communities[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Adjacency lists, each sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionSpec {
    pub community_size: usize,
    pub community_count: usize,
    pub k_avg: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeProbabilities {
    pub p_in: f64,
    pub p_out: f64,
}

/// Within/between edge probabilities that give mean degree `k_avg` at dispersal `eta`:
/// `k_avg = (s-1) p_in + s (m-1) p_out` with `p_out = eta * p_in`.
pub fn derive_partition_probs(spec: &PartitionSpec) -> Result<EdgeProbabilities, NetworkError> {
    let PartitionSpec {
        community_size: s,
        community_count: m,
        k_avg,
        eta,
    } = *spec;
    if s < 2 || m < 2 {
        return Err(NetworkError::TooSmall { size: s, count: m });
    }
    if !(k_avg.is_finite() && k_avg > 0.0) {
        return Err(NetworkError::InvalidDegree(k_avg));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(NetworkError::InvalidEta(eta));
    }
    let within = (s - 1) as f64;
    let between = (s * (m - 1)) as f64;
    if k_avg > within + between {
        return Err(NetworkError::DegreeTooHigh {
            k_avg,
            max: within + between,
        });
    }
    let p_in = k_avg / (within + between * eta);
    if p_in > 1.0 {
        return Err(NetworkError::InfeasibleEta {
            eta,
            p_in,
            min_eta: (k_avg - within) / between,
        });
    }
    Ok(EdgeProbabilities {
        p_in,
        p_out: eta * p_in,
    })
}

/// Every pair connected, one singleton community per node.
pub fn build_complete_network(genotypes: &[Genotype]) -> Result<NetworkTopology, NetworkError> {
    if genotypes.is_empty() {
        return Err(NetworkError::Empty);
    }
    let n = genotypes.len();
    let edges = (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .collect();
    Ok(NetworkTopology {
        genotypes: genotypes.to_vec(),
        communities: (0..n).collect(),
        edges,
    })
}

/// Random partition network from a degree-preserving spec.
pub fn build_partition_network<R: Rng + ?Sized>(
    spec: &PartitionSpec,
    genotypes: &[Genotype],
    rng: &mut R,
) -> Result<NetworkTopology, NetworkError> {
    let probs = derive_partition_probs(spec)?;
    build_partition_network_with_probs(
        spec.community_size,
        spec.community_count,
        probs,
        genotypes,
        rng,
    )
}

/// Random partition network with the edge probabilities given directly.
///
/// Node `u` belongs to community `u / community_size`. One uniform draw is
/// consumed per node pair, in `(u, v)` lexicographic order.
pub fn build_partition_network_with_probs<R: Rng + ?Sized>(
    community_size: usize,
    community_count: usize,
    probs: EdgeProbabilities,
    genotypes: &[Genotype],
    rng: &mut R,
) -> Result<NetworkTopology, NetworkError> {
    if community_size < 2 || community_count < 2 {
        return Err(NetworkError::TooSmall {
            size: community_size,
            count: community_count,
        });
    }
    let EdgeProbabilities { p_in, p_out } = probs;
    if !((0.0..=1.0).contains(&p_in) && (0.0..=1.0).contains(&p_out)) {
        return Err(NetworkError::InvalidProbability { p_in, p_out });
    }
    if genotypes.len() != community_count {
        return Err(NetworkError::GenotypeCount {
            expected: community_count,
            got: genotypes.len(),
        });
    }
    for i in 0..genotypes.len() {
        for j in (i + 1)..genotypes.len() {
            if genotypes[i] == genotypes[j] {
                return Err(NetworkError::DuplicateGenotype(i, j));
            }
        }
    }

    let n = community_size * community_count;
    let communities: Vec<usize> = (0..n).map(|u| u / community_size).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if communities[u] == communities[v] {
                p_in
            } else {
                p_out
            };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Ok(NetworkTopology {
        genotypes: communities.iter().map(|&c| genotypes[c].clone()).collect(),
        communities,
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeStats {
    pub mean_degree: f64,
    pub min_degree: usize,
    pub isolated_count: usize,
}

pub fn degree_stats(net: &NetworkTopology) -> DegreeStats {
    let deg = net.degrees();
    if deg.is_empty() {
        return DegreeStats {
            mean_degree: 0.0,
            min_degree: 0,
            isolated_count: 0,
        };
    }
    DegreeStats {
        mean_degree: 2.0 * net.edges.len() as f64 / deg.len() as f64,
        min_degree: deg.iter().copied().min().unwrap_or(0),
        isolated_count: deg.iter().filter(|&&d| d == 0).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::GenotypeSpace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(eta: f64) -> PartitionSpec {
        PartitionSpec {
            community_size: 8,
            community_count: 8,
            k_avg: 9.0,
            eta,
        }
    }

    fn eight() -> Vec<Genotype> {
        GenotypeSpace::new(3, 2).unwrap().enumerate().unwrap()
    }

    #[test]
    fn derive_probs_examples() {
        let p = derive_partition_probs(&spec(0.1)).unwrap();
        assert!((p.p_in - 9.0 / 12.6).abs() < 1e-12);
        assert!((p.p_out - 0.9 / 12.6).abs() < 1e-12);
        assert!((p.p_in - 0.714286).abs() < 1e-6);

        let flat = derive_partition_probs(&spec(1.0)).unwrap();
        assert!((flat.p_in - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(flat.p_in, flat.p_out);

        match derive_partition_probs(&spec(0.01)) {
            Err(NetworkError::InfeasibleEta { p_in, min_eta, .. }) => {
                assert!((p_in - 9.0 / 7.56).abs() < 1e-12);
                assert!((min_eta - 2.0 / 56.0).abs() < 1e-15);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn derive_probs_rejects_bad_specs() {
        assert!(matches!(
            derive_partition_probs(&spec(0.0)),
            Err(NetworkError::InvalidEta(_))
        ));
        assert!(matches!(
            derive_partition_probs(&spec(1.5)),
            Err(NetworkError::InvalidEta(_))
        ));
        let mut s = spec(0.5);
        s.community_size = 1;
        assert!(matches!(
            derive_partition_probs(&s),
            Err(NetworkError::TooSmall { .. })
        ));
        let mut s = spec(0.5);
        s.k_avg = 100.0;
        assert!(matches!(
            derive_partition_probs(&s),
            Err(NetworkError::DegreeTooHigh { .. })
        ));
    }

    #[test]
    fn complete_network_sizes() {
        let all = GenotypeSpace::new(6, 2).unwrap().enumerate().unwrap();
        let net = build_complete_network(&all).unwrap();
        assert_eq!(net.node_count(), 64);
        assert_eq!(net.edges().len(), 2016);
        assert_eq!(
            degree_stats(&net),
            DegreeStats {
                mean_degree: 63.0,
                min_degree: 63,
                isolated_count: 0
            }
        );
        assert_eq!(build_complete_network(&all[..1]).unwrap().edges().len(), 0);
        assert_eq!(
            build_complete_network(&all[..2]).unwrap().edges(),
            &[(0, 1)]
        );
        assert_eq!(net.community_of(17), 17);
        assert!(build_complete_network(&[]).is_err());
    }

    #[test]
    fn forced_probabilities_give_disjoint_cliques() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probs = EdgeProbabilities {
            p_in: 1.0,
            p_out: 0.0,
        };
        let net = build_partition_network_with_probs(8, 8, probs, &eight(), &mut rng).unwrap();
        assert_eq!(net.edges().len(), 8 * 28);
        for &(u, v) in net.edges() {
            assert_eq!(net.community_of(u), net.community_of(v));
        }
        assert_eq!(
            degree_stats(&net),
            DegreeStats {
                mean_degree: 7.0,
                min_degree: 7,
                isolated_count: 0
            }
        );
        for u in 0..64 {
            assert_eq!(net.genotype_of(u), &eight()[u / 8]);
        }
    }

    #[test]
    fn partition_rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = eight();
        assert!(matches!(
            build_partition_network(&spec(0.1), &g[..7], &mut rng),
            Err(NetworkError::GenotypeCount { .. })
        ));
        let mut dup = g.clone();
        dup[3] = dup[0].clone();
        assert!(matches!(
            build_partition_network(&spec(0.1), &dup, &mut rng),
            Err(NetworkError::DuplicateGenotype(0, 3))
        ));
        assert!(matches!(
            build_partition_network(&spec(0.01), &g, &mut rng),
            Err(NetworkError::InfeasibleEta { .. })
        ));
    }

    #[test]
    fn edgeless_stats() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probs = EdgeProbabilities {
            p_in: 0.0,
            p_out: 0.0,
        };
        let g = eight();
        let net = build_partition_network_with_probs(2, 2, probs, &g[..2], &mut rng).unwrap();
        assert_eq!(
            degree_stats(&net),
            DegreeStats {
                mean_degree: 0.0,
                min_degree: 0,
                isolated_count: 4
            }
        );
    }

    #[test]
    fn sampled_graphs_are_simple() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = build_partition_network(&spec(0.3), &eight(), &mut rng).unwrap();
            let mut seen = alloc::collections::BTreeSet::new();
            for &(u, v) in net.edges() {
                assert!(u < v && v < 64);
                assert!(seen.insert((u, v)));
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn derived_probs_reproduce_degree(
            s in 2usize..12, m in 2usize..12, k in 0.5f64..10.0, eta in 0.001f64..=1.0
        ) {
            let spec = PartitionSpec { community_size: s, community_count: m, k_avg: k, eta };
            if let Ok(p) = derive_partition_probs(&spec) {
                let back = (s - 1) as f64 * p.p_in + (s * (m - 1)) as f64 * p.p_out;
                proptest::prop_assert!((back - k).abs() < 1e-12);
                proptest::prop_assert!(p.p_in <= 1.0 && p.p_out <= p.p_in);
            }
        }
    }
}
