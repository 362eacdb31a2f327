//! Plackett-Luce choice environment.
//!
//! A score vector `v` assigns every arm a positive utility. Rankings are built
//! stagewise, each remaining arm being placed next with probability proportional
//! to its score, and the winner among an offered subset `S` is arm `i` with
//! probability `v_i / sum_{j in S} v_j`.
//!
//! Arms are 0-based everywhere in the library; user-facing output converts to
//! 1-based indices.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hidden utility vector of an environment instance.
///
/// Entries are stored as given. Instances drawn from the simplex are not
/// normalized to a maximum of one; [`Scores::is_normalized`] reports membership
/// in the max-equals-one parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores<T> {
    values: Vec<T>,
}

impl<T: Scalar> Scores<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewArms(values.len()));
        }
        for (arm, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value > T::zero()) {
                return Err(Error::InvalidScore {
                    arm,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, arm: usize) -> T {
        self.values[arm]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// True iff the largest score is exactly one.
    pub fn is_normalized(&self) -> bool {
        self.max() == T::one()
    }

    /// Membership in the parameter space with lower bound `v_min`: max is one and every entry is at least `v_min`.
    pub fn in_parameter_space(&self, v_min: T) -> bool {
        self.is_normalized() && self.min() >= v_min
    }

    /// All arms attaining the maximal score, ascending.
    pub fn argmax_set(&self) -> Vec<usize> {
        let max = self.max();
        (0..self.len()).filter(|&i| self.values[i] == max).collect()
    }

    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| v * factor).collect())
    }

    /// Arms sorted by score descending, ties by ascending index.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.values[b]
                .partial_cmp(&self.values[a])
                .expect("scores are finite")
                .then(a.cmp(&b))
        });
        order
    }
}

/// A total order of the arms, stored as the arm occupying each position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    order: Vec<usize>,
    positions: Vec<usize>,
}

impl Ranking {
    /// `order[k]` is the arm placed at position `k` (position 0 is the top).
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut positions = vec![usize::MAX; n];
        for (pos, &arm) in order.iter().enumerate() {
            if arm >= n || positions[arm] != usize::MAX {
                return Err(Error::NotAPermutation(n));
            }
            positions[arm] = pos;
        }
        Ok(Self { order, positions })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_order((0..n).collect()).expect("identity is a permutation")
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Rank of `arm`, 0 for the top.
    pub fn position(&self, arm: usize) -> usize {
        self.positions[arm]
    }

    pub fn arm_at(&self, position: usize) -> usize {
        self.order[position]
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

/// Nonempty set of distinct arms offered to the selector, kept in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Preselection {
    arms: Vec<usize>,
}

impl Preselection {
    /// Validates against an arm count `n`.
    pub fn new(arms: Vec<usize>, n: usize) -> Result<Self> {
        let subset = Self::try_from(arms)?;
        if let Some(&last) = subset.arms.last() {
            if last >= n {
                return Err(Error::ArmOutOfRange { arm: last, n });
            }
        }
        Ok(subset)
    }

    pub fn singleton(arm: usize) -> Self {
        Self { arms: vec![arm] }
    }

    /// From 1-based indices as written in user-facing input.
    pub fn from_one_based(arms: &[usize], n: usize) -> Result<Self> {
        let zero_based = arms
            .iter()
            .map(|&a| a.checked_sub(1).ok_or(Error::ArmOutOfRange { arm: 0, n }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero_based, n)
    }

    pub fn arms(&self) -> &[usize] {
        &self.arms
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, arm: usize) -> bool {
        self.arms.binary_search(&arm).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.arms.iter().copied()
    }

    pub fn max_arm(&self) -> usize {
        *self.arms.last().expect("nonempty")
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.arms.iter().map(|a| a + 1).collect()
    }
}

impl TryFrom<Vec<usize>> for Preselection {
    type Error = Error;

    fn try_from(mut arms: Vec<usize>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::EmptyPreselection);
        }
        arms.sort_unstable();
        if let Some(w) = arms.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateArm(w[0]));
        }
        Ok(Self { arms })
    }
}

impl From<Preselection> for Vec<usize> {
    fn from(p: Preselection) -> Self {
        p.arms
    }
}

/// Prints 1-based, e.g. `{1,4,5}`.
impl fmt::Display for Preselection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, arm) in self.arms.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", arm + 1)?;
        }
        write!(f, "}}")
    }
}

/// The selector's pick from an offered subset at round `round` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceObservation {
    pub offered: Preselection,
    pub chosen: usize,
    pub round: u64,
}

impl ChoiceObservation {
    pub fn new(offered: Preselection, chosen: usize, round: u64) -> Result<Self> {
        if !offered.contains(chosen) {
            return Err(Error::NotOffered { arm: chosen });
        }
        if round == 0 {
            return Err(Error::ZeroRound);
        }
        Ok(Self {
            offered,
            chosen,
            round,
        })
    }
}

fn check_subset<T: Scalar>(subset: &Preselection, v: &Scores<T>) -> Result<()> {
    if subset.max_arm() >= v.len() {
        return Err(Error::ArmOutOfRange {
            arm: subset.max_arm(),
            n: v.len(),
        });
    }
    Ok(())
}

/// Probability of a full ranking: product over stages of the placed arm's share of the remaining mass.
pub fn ranking_probability<T: Scalar>(ranking: &Ranking, v: &Scores<T>) -> Result<T> {
    if ranking.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            actual: ranking.len(),
        });
    }
    let mut remaining: T = v.as_slice().iter().copied().sum();
    let mut prob = T::one();
    for &arm in ranking.order() {
        let score = v.get(arm);
        prob = prob * score / remaining;
        remaining = remaining - score;
    }
    Ok(prob)
}

/// Weighted draw of one arm among `candidates`; `total` is the sum of their scores.
fn draw_weighted<T: Scalar, R: Rng + ?Sized>(
    candidates: &[usize],
    v: &Scores<T>,
    total: T,
    rng: &mut R,
) -> usize {
    let target = T::lit(rng.random::<f64>()) * total;
    let mut acc = T::zero();
    for &arm in candidates {
        acc = acc + v.get(arm);
        if target < acc {
            return arm;
        }
    }
    *candidates.last().expect("nonempty candidates")
}

/// Stagewise sampling of a ranking.
pub fn sample_ranking<T: Scalar, R: Rng + ?Sized>(v: &Scores<T>, rng: &mut R) -> Ranking {
    let mut remaining: Vec<usize> = (0..v.len()).collect();
    let mut order = Vec::with_capacity(v.len());
    while !remaining.is_empty() {
        let total: T = remaining.iter().map(|&a| v.get(a)).sum();
        let arm = draw_weighted(&remaining, v, total, rng);
        remaining.retain(|&a| a != arm);
        order.push(arm);
    }
    Ranking::from_order(order).expect("stagewise draw yields a permutation")
}

/// Marginal probability that `arm` is picked from `subset`.
pub fn choice_probability<T: Scalar>(
    arm: usize,
    subset: &Preselection,
    v: &Scores<T>,
) -> Result<T> {
    check_subset(subset, v)?;
    if !subset.contains(arm) {
        return Err(Error::NotOffered { arm });
    }
    let total: T = subset.iter().map(|a| v.get(a)).sum();
    Ok(v.get(arm) / total)
}

/// Categorical draw of the selector's pick.
pub fn sample_choice<T: Scalar, R: Rng + ?Sized>(
    subset: &Preselection,
    v: &Scores<T>,
    rng: &mut R,
) -> usize {
    if subset.len() == 1 {
        return subset.arms()[0];
    }
    let total: T = subset.iter().map(|a| v.get(a)).sum();
    draw_weighted(subset.arms(), v, total, rng)
}

/// `v_i / v_j`.
pub fn relative_score<T: Scalar>(i: usize, j: usize, v: &Scores<T>) -> T {
    v.get(i) / v.get(j)
}

/// Expected utility of the selector's pick: `sum v_i^2 / sum v_i` over the subset.
pub fn expected_reward<T: Scalar>(subset: &Preselection, v: &Scores<T>) -> T {
    let (sq, lin) = subset.iter().fold((T::zero(), T::zero()), |(sq, lin), a| {
        let s = v.get(a);
        (sq + s * s, lin + s)
    });
    sq / lin
}

/// Expected utility measured in units of a reference arm `J`, with `relative[i] = O_{i,J}`.
pub fn reference_reward<T: Scalar>(subset: &Preselection, relative: &[T]) -> Result<T> {
    let mut sq = T::zero();
    let mut lin = T::zero();
    for arm in subset.iter() {
        let o = *relative.get(arm).ok_or(Error::ArmOutOfRange {
            arm,
            n: relative.len(),
        })?;
        if !(o.is_finite() && o > T::zero()) {
            return Err(Error::InvalidRelativeScore {
                arm,
                value: o.as_f64(),
            });
        }
        sq = sq + o * o;
        lin = lin + o;
    }
    Ok(sq / lin)
}

/// `opt_reward - R(S)`. A shortfall beyond rounding noise is reported as an error; noise is clamped to zero.
pub fn instant_regret<T: Scalar>(subset: &Preselection, v: &Scores<T>, opt_reward: T) -> Result<T> {
    let gap = opt_reward - expected_reward(subset, v);
    if gap >= T::zero() {
        return Ok(gap);
    }
    let noise = T::epsilon() * T::lit(64.0) * opt_reward.abs().max(T::one());
    if -gap <= noise {
        Ok(T::zero())
    } else {
        Err(Error::NegativeRegret(gap.as_f64()))
    }
}
