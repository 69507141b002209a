use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{ExperimentError, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binning {
    /// Key is the similarity `h` to the opponent; value is the run's mean
    /// cooperation frequency in that bin.
    BySimilarity,
    /// Key is `b / c`; value is the run's cooperator proportion.
    ByParameter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub key: f64,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for a single run.
    pub std_error: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn summarize(key: f64, values: &[f64]) -> AggregateRow {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_error = if n < 2 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        libm::sqrt(ss / (n - 1) as f64) / libm::sqrt(n as f64)
    };
    AggregateRow {
        key,
        mean,
        std_error,
        n,
    }
}

/// Mean and standard error across runs (seeds), rows sorted by key.
pub fn aggregate(
    results: &[RunResult],
    binning: Binning,
) -> Result<Vec<AggregateRow>, ExperimentError> {
    let first = results.first().ok_or(ExperimentError::NoResults)?;
    for r in results {
        if r.kind != first.kind {
            return Err(ExperimentError::MixedShapes("experiment kind"));
        }
        if r.agents != first.agents || r.states_per_agent != first.states_per_agent {
            return Err(ExperimentError::MixedShapes("population size"));
        }
        if r.loci != first.loci {
            return Err(ExperimentError::MixedShapes("genotype length"));
        }
        if r.params.inclusive != first.params.inclusive {
            return Err(ExperimentError::MixedShapes("reward variant"));
        }
    }

    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    match binning {
        Binning::BySimilarity => {
            let keys: Vec<f64> = first.similarity_bins().iter().map(|b| b.0).collect();
            if keys.is_empty() {
                return Err(ExperimentError::MixedShapes(
                    "runs carry no similarity cells",
                ));
            }
            for r in results {
                if r.params.b != first.params.b || r.params.c != first.params.c {
                    return Err(ExperimentError::MixedShapes("dilemma parameters"));
                }
                let bins = r.similarity_bins();
                if bins.len() != keys.len() || bins.iter().zip(&keys).any(|(b, k)| b.0 != *k) {
                    return Err(ExperimentError::MixedShapes("similarity bins"));
                }
                for (h, freq) in bins {
                    groups.entry(Key(h)).or_default().push(freq);
                }
            }
        }
        Binning::ByParameter => {
            for r in results {
                if r.params.eta != first.params.eta {
                    return Err(ExperimentError::MixedShapes("dispersal coefficient"));
                }
                groups
                    .entry(Key(r.params.b_over_c()))
                    .or_default()
                    .push(r.cooperator_proportion());
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|(k, values)| summarize(k.0, &values))
        .collect())
}
