//! Prisoner's dilemma payoffs and the relatedness-weighted (inclusive) reward.

use core::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("not a prisoner's dilemma: need benefit > cost > 0, got b={b}, c={c}")]
    InvalidDilemma { b: f64, c: f64 },
    #[error("relatedness {0} is outside [0, 1]")]
    RelatednessOutOfRange(f64),
    #[error("payoff vector has {payoffs} entries but similarity row has {similarities}")]
    DimensionMismatch { payoffs: usize, similarities: usize },
    #[error("self index {index} out of bounds for {len} agents")]
    SelfIndexOutOfBounds { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Cooperate, Action::Defect];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Action::Cooperate => 0,
            Action::Defect => 1,
        }
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Cooperate
        } else {
            Action::Defect
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Cooperate => "C",
            Action::Defect => "D",
        })
    }
}

/// Benefit `b` handed to the partner by cooperating, at cost `c` to the cooperator.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DilemmaParams {
    b: f64,
    c: f64,
}

impl DilemmaParams {
    pub fn new(b: f64, c: f64) -> Result<Self, GameError> {
        if !(b.is_finite() && c.is_finite() && b > c && c > 0.0) {
            return Err(GameError::InvalidDilemma { b, c });
        }
        Ok(Self { b, c })
    }

    pub fn benefit(&self) -> f64 {
        self.b
    }

    pub fn cost(&self) -> f64 {
        self.c
    }
}

/// Individual payoffs `(P_i, P_j)` of one pairwise game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffPair {
    pub own: f64,
    pub other: f64,
}

#[inline]
pub fn pd_payoffs(mine: Action, theirs: Action, params: DilemmaParams) -> PayoffPair {
    let DilemmaParams { b, c } = params;
    let (own, other) = match (mine, theirs) {
        (Action::Cooperate, Action::Cooperate) => (b - c, b - c),
        (Action::Cooperate, Action::Defect) => (-c, b),
        (Action::Defect, Action::Cooperate) => (b, -c),
        (Action::Defect, Action::Defect) => (0.0, 0.0),
    };
    PayoffPair { own, other }
}

fn check_relatedness(h: f64) -> Result<(), GameError> {
    if (0.0..=1.0).contains(&h) {
        Ok(())
    } else {
        Err(GameError::RelatednessOutOfRange(h))
    }
}

/// `P_i + h * P_j`.
pub fn inclusive_pairwise_reward(p: PayoffPair, h: f64) -> Result<f64, GameError> {
    check_relatedness(h)?;
    Ok(p.own + h * p.other)
}

/// Similarity-weighted sum of everyone's payoffs, seen from `self_index`.
///
/// The own term carries the weight stored at `similarities[self_index]`,
/// which is 1 for a genuine similarity row.
pub fn inclusive_reward_vector(
    payoffs: &[f64],
    similarities: &[f64],
    self_index: usize,
) -> Result<f64, GameError> {
    if payoffs.len() != similarities.len() {
        return Err(GameError::DimensionMismatch {
            payoffs: payoffs.len(),
            similarities: similarities.len(),
        });
    }
    if self_index >= payoffs.len() {
        return Err(GameError::SelfIndexOutOfBounds {
            index: self_index,
            len: payoffs.len(),
        });
    }
    Ok(payoffs.iter().zip(similarities).map(|(r, h)| h * r).sum())
}

/// Row player's inclusive payoffs, indexed `[own action][opponent action]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffMatrix(pub [[f64; 2]; 2]);

impl PayoffMatrix {
    pub fn get(&self, own: Action, other: Action) -> f64 {
        self.0[own.index()][other.index()]
    }
}

/// The dilemma as seen through the inclusive reward at relatedness `h`.
///
/// Entries: CC = (b-c)(1+h), CD = hb - c, DC = b - hc, DD = 0.
pub fn transformed_matrix(params: DilemmaParams, h: f64) -> Result<PayoffMatrix, GameError> {
    check_relatedness(h)?;
    let mut m = [[0.0; 2]; 2];
    for own in Action::ALL {
        for other in Action::ALL {
            let p = pd_payoffs(own, other, params);
            m[own.index()][other.index()] = p.own + h * p.other;
        }
    }
    Ok(PayoffMatrix(m))
}

/// Hamilton's rule, strict: `c < h * b`.
pub fn cooperation_favored(params: DilemmaParams, h: f64) -> Result<bool, GameError> {
    check_relatedness(h)?;
    Ok(params.c < h * params.b)
}
