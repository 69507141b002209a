//! Abstract genotypes, the Hamming similarity between them, and per-locus mutation.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

/// Largest genotype space `enumerate` will materialise.
pub const MAX_ENUMERATED: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenotypeError {
    #[error("genotype must have at least one locus")]
    Empty,
    #[error("genotype lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("gene {value} at locus {locus} is outside 0..{variants}")]
    GeneOutOfRange {
        locus: usize,
        value: u32,
        variants: u32,
    },
    #[error("genotype has {got} loci, space expects {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error(
        "invalid genotype space: loci={loci}, variants={variants} (need loci >= 1, variants >= 2)"
    )]
    InvalidSpace { loci: usize, variants: u32 },
    #[error("genotype space {variants}^{loci} exceeds the enumeration limit of {MAX_ENUMERATED}")]
    SpaceTooLarge { loci: usize, variants: u32 },
    #[error("mutation probability {0} is outside [0, 1]")]
    InvalidMutation(f64),
    #[error("cannot parse genotype {0:?}")]
    Parse(String),
}

/// A fixed-length sequence of gene variants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Genotype {
    genes: Vec<u32>,
}

impl Genotype {
    pub fn new(genes: Vec<u32>) -> Result<Self, GenotypeError> {
        if genes.is_empty() {
            return Err(GenotypeError::Empty);
        }
        Ok(Self { genes })
    }

    pub fn genes(&self) -> &[u32] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, g) in self.genes.iter().enumerate() {
            if k > 0 {
                f.write_str("-")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Genotype {
    type Err = GenotypeError;

    /// Parses the hyphen-joined form, e.g. `"1-1-0-1"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let genes = s
            .trim()
            .split('-')
            .map(|part| part.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| GenotypeError::Parse(s.to_string()))?;
        Genotype::new(genes)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Genotype {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Genotype {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All genotypes with `loci` genes, each drawn from `variants` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenotypeSpace {
    loci: usize,
    variants: u32,
}

impl GenotypeSpace {
    pub fn new(loci: usize, variants: u32) -> Result<Self, GenotypeError> {
        if loci == 0 || variants < 2 {
            return Err(GenotypeError::InvalidSpace { loci, variants });
        }
        Ok(Self { loci, variants })
    }

    pub fn loci(&self) -> usize {
        self.loci
    }

    pub fn variants(&self) -> u32 {
        self.variants
    }

    /// `variants^loci`, or `None` on overflow.
    pub fn cardinality(&self) -> Option<u64> {
        let exp = u32::try_from(self.loci).ok()?;
        u64::from(self.variants).checked_pow(exp)
    }

    pub fn check(&self, g: &Genotype) -> Result<(), GenotypeError> {
        if g.len() != self.loci {
            return Err(GenotypeError::WrongLength {
                expected: self.loci,
                got: g.len(),
            });
        }
        match g.genes.iter().position(|&v| v >= self.variants) {
            Some(locus) => Err(GenotypeError::GeneOutOfRange {
                locus,
                value: g.genes[locus],
                variants: self.variants,
            }),
            None => Ok(()),
        }
    }

    /// Every genotype of the space in lexicographic order (last locus varies fastest).
    pub fn enumerate(&self) -> Result<Vec<Genotype>, GenotypeError> {
        let total = self.cardinality().filter(|&c| c <= MAX_ENUMERATED).ok_or(
            GenotypeError::SpaceTooLarge {
                loci: self.loci,
                variants: self.variants,
            },
        )?;
        let mut out = Vec::with_capacity(total as usize);
        let mut current = vec![0u32; self.loci];
        for _ in 0..total {
            out.push(Genotype {
                genes: current.clone(),
            });
            // odometer increment
            for digit in current.iter_mut().rev() {
                *digit += 1;
                if *digit < self.variants {
                    break;
                }
                *digit = 0;
            }
        }
        Ok(out)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Genotype {
        Genotype {
            genes: (0..self.loci)
                .map(|_| rng.random_range(0..self.variants))
                .collect(),
        }
    }

    /// Copies `g`, replacing each locus with probability `mu` by one of the
    /// `variants - 1` other values, chosen uniformly. A mutation always changes the locus.
    pub fn mutate<R: Rng + ?Sized>(
        &self,
        g: &Genotype,
        spec: MutationSpec,
        rng: &mut R,
    ) -> Genotype {
        let genes = g
            .genes
            .iter()
            .map(|&old| {
                if rng.random_bool(spec.mu) {
                    let draw = rng.random_range(0..self.variants - 1);
                    if draw >= old {
                        draw + 1
                    } else {
                        draw
                    }
                } else {
                    old
                }
            })
            .collect();
        Genotype { genes }
    }
}

/// Per-locus mutation probability.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MutationSpec {
    pub mu: f64,
}

impl MutationSpec {
    pub fn new(mu: f64) -> Result<Self, GenotypeError> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(GenotypeError::InvalidMutation(mu));
        }
        Ok(Self { mu })
    }
}

/// Number of loci at which `a` and `b` carry the same variant.
pub fn matching_loci(a: &Genotype, b: &Genotype) -> Result<usize, GenotypeError> {
    if a.len() != b.len() {
        return Err(GenotypeError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.genes.iter().zip(&b.genes).filter(|(x, y)| x == y).count())
}

/// Fraction of loci at which `a` and `b` agree: one minus the normalised Hamming distance.
pub fn hamming_similarity(a: &Genotype, b: &Genotype) -> Result<f64, GenotypeError> {
    let same = matching_loci(a, b)?;
    Ok(same as f64 / a.len() as f64)
}

/// Symmetric table of pairwise similarities for a fixed population.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_genotypes(genotypes: &[Genotype]) -> Result<Self, GenotypeError> {
        let size = genotypes.len();
        let mut values = vec![0.0; size * size];
        for i in 0..size {
            values[i * size + i] = 1.0;
            for j in (i + 1)..size {
                let h = hamming_similarity(&genotypes[i], &genotypes[j])?;
                values[i * size + j] = h;
                values[j * size + i] = h;
            }
        }
        Ok(Self { size, values })
    }

    /// Identity on the diagonal, `off_diagonal` everywhere else.
    pub fn uniform(size: usize, off_diagonal: f64) -> Self {
        let mut values = vec![off_diagonal; size * size];
        for i in 0..size {
            values[i * size + i] = 1.0;
        }
        Self { size, values }
    }

    /// Arbitrary row-major table. Returns `None` if `values.len() != size * size`.
    pub fn from_values(size: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == size * size).then_some(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }
}
