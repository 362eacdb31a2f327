//! Optimal preselections.
//!
//! Three routes to the fixed-size maximizer of the expected reward:
//! exhaustive enumeration (the oracle), the greedy endpoint construction
//! ([`optimal_subset_greedy`]) and an exact scan over "top arms plus bottom arms"
//! splits ([`optimal_subset_scan`]). The greedy construction is not optimal on every
//! instance; see its docs.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::pl::{expected_reward, Preselection, Scores};
use crate::scalar::Scalar;

/// Largest number of subsets [`optimal_subset_bruteforce`] will enumerate.
pub const BRUTE_FORCE_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<T> {
    pub subset: Preselection,
    pub reward: T,
}

/// `(x^2 + sum_S v_i^2) / (x + sum_S v_i)`: reward of `S` after adding an arm of score `x`.
pub fn f_eval<T: Scalar>(x: T, subset: &Preselection, v: &Scores<T>) -> T {
    let (sq, lin) = sums(subset, v);
    (x * x + sq) / (x + lin)
}

/// Unique minimizer of [`f_eval`] over `x >= 0`.
pub fn f_minimizer<T: Scalar>(subset: &Preselection, v: &Scores<T>) -> T {
    let (sq, lin) = sums(subset, v);
    (lin * lin + sq).sqrt() - lin
}

fn sums<T: Scalar>(subset: &Preselection, v: &Scores<T>) -> (T, T) {
    subset.iter().fold((T::zero(), T::zero()), |(sq, lin), a| {
        let s = v.get(a);
        (sq + s * s, lin + s)
    })
}

/// `C(n, k)` without overflow for the sizes in use.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn check_size(n: usize, l: usize) -> Result<()> {
    if l < 2 || l > n {
        return Err(Error::SizeOutOfRange { l, n });
    }
    Ok(())
}

fn subset_of(arms: Vec<usize>) -> Preselection {
    Preselection::try_from(arms).expect("distinct nonempty arms")
}

/// Exhaustive maximum over all `l`-subsets. Among equal rewards the lexicographically
/// smallest subset wins.
pub fn optimal_subset_bruteforce<T: Scalar>(v: &Scores<T>, l: usize) -> Result<OptResult<T>> {
    let n = v.len();
    check_size(n, l)?;
    if binomial(n, l) > BRUTE_FORCE_BUDGET {
        return Err(Error::BudgetExceeded {
            n,
            l,
            budget: BRUTE_FORCE_BUDGET,
        });
    }
    let mut best: Option<OptResult<T>> = None;
    // combinations() yields in lexicographic order, so a strict comparison keeps the first optimum.
    for arms in (0..n).combinations(l) {
        let subset = subset_of(arms);
        let reward = expected_reward(&subset, v);
        if best.as_ref().is_none_or(|b| reward > b.reward) {
            best = Some(OptResult { subset, reward });
        }
    }
    Ok(best.expect("at least one subset"))
}

/// Greedy endpoint construction.
///
/// Seeds the subset with every arm of maximal score (the lexicographically smallest
/// `l` of them if there are at least `l`), then repeatedly adds whichever end of the
/// remaining score-sorted run changes the current reward least, measured as
/// `|R(S) - f(v_candidate; S)|`. Ties go to the higher-scored end.
///
/// This is not an exact maximizer. It can commit to a low-score decoy early when a
/// run of strong arms would have been better, e.g. on
/// `(0.863, 0.587, 0.586, 0.511, 0.406, 0.238, 0.162)` with `l = 3`. Use
/// [`optimal_subset_scan`] when the optimum is needed.
pub fn optimal_subset_greedy<T: Scalar>(v: &Scores<T>, l: usize) -> Result<OptResult<T>> {
    let n = v.len();
    check_size(n, l)?;
    let order = v.descending_order();
    let max = v.max();
    let tied = order.iter().take_while(|&&a| v.get(a) == max).count();
    if tied >= l {
        let subset = subset_of(order[..l].to_vec());
        let reward = expected_reward(&subset, v);
        return Ok(OptResult { subset, reward });
    }

    let mut chosen: Vec<usize> = order[..tied].to_vec();
    let (mut sq, mut lin) = chosen.iter().fold((T::zero(), T::zero()), |(sq, lin), &a| {
        (sq + v.get(a) * v.get(a), lin + v.get(a))
    });
    let (mut lo, mut hi) = (tied, n - 1);
    while chosen.len() < l {
        let current = sq / lin;
        let change = |arm: usize| {
            let x = v.get(arm);
            (current - (x * x + sq) / (x + lin)).abs()
        };
        let (top, bottom) = (order[lo], order[hi]);
        let pick = if change(top) <= change(bottom) {
            lo += 1;
            top
        } else {
            hi -= 1;
            bottom
        };
        let x = v.get(pick);
        sq = sq + x * x;
        lin = lin + x;
        chosen.push(pick);
    }
    let subset = subset_of(chosen);
    let reward = expected_reward(&subset, v);
    Ok(OptResult { subset, reward })
}

/// Exact maximizer over `l`-subsets in `O(n log n + l^2)`.
///
/// Every optimal subset consists of the `k` highest-scored arms together with the
/// `l - k` lowest-scored ones for some `1 <= k <= l`, so only those `l` candidates are
/// scored. Ties in reward go to the lexicographically smallest candidate.
pub fn optimal_subset_scan<T: Scalar>(v: &Scores<T>, l: usize) -> Result<OptResult<T>> {
    let n = v.len();
    check_size(n, l)?;
    let order = v.descending_order();
    let mut best: Option<OptResult<T>> = None;
    for top in 1..=l {
        let arms: Vec<usize> = order[..top]
            .iter()
            .chain(&order[n - (l - top)..])
            .copied()
            .collect();
        let subset = subset_of(arms);
        let reward = expected_reward(&subset, v);
        let better = match &best {
            None => true,
            Some(b) => reward > b.reward || (reward == b.reward && subset < b.subset),
        };
        if better {
            best = Some(OptResult { subset, reward });
        }
    }
    Ok(best.expect("l >= 1"))
}

/// Best `l`-subset that contains `anchor`, by the same split scan over the other arms.
///
/// For the optimal reward `r`, the other members maximize `sum(x^2 - r x)`, a sum of a convex
/// function of the score, so they form a top block plus a bottom block of the remaining order.
pub fn optimal_subset_containing<T: Scalar>(
    v: &Scores<T>,
    l: usize,
    anchor: usize,
) -> Result<OptResult<T>> {
    let n = v.len();
    check_size(n, l)?;
    if anchor >= n {
        return Err(Error::ArmOutOfRange { arm: anchor, n });
    }
    let order: Vec<usize> = v
        .descending_order()
        .into_iter()
        .filter(|&i| i != anchor)
        .collect();
    let rest = l - 1;
    let mut best: Option<OptResult<T>> = None;
    for top in 0..=rest {
        let arms: Vec<usize> = std::iter::once(anchor)
            .chain(order[..top].iter().copied())
            .chain(order[order.len() - (rest - top)..].iter().copied())
            .collect();
        let subset = subset_of(arms);
        let reward = expected_reward(&subset, v);
        let better = match &best {
            None => true,
            Some(b) => reward > b.reward || (reward == b.reward && subset < b.subset),
        };
        if better {
            best = Some(OptResult { subset, reward });
        }
    }
    Ok(best.expect("at least one split"))
}

/// Best preselection of any size: every arm of maximal score.
pub fn optimal_subset_flexible<T: Scalar>(v: &Scores<T>) -> OptResult<T> {
    OptResult {
        subset: subset_of(v.argmax_set()),
        reward: v.max(),
    }
}

/// Restricted optimum with brute force when affordable, the exact scan otherwise.
pub fn optimal_subset<T: Scalar>(v: &Scores<T>, l: usize) -> Result<OptResult<T>> {
    if binomial(v.len(), l) <= BRUTE_FORCE_BUDGET {
        optimal_subset_bruteforce(v, l)
    } else {
        optimal_subset_scan(v, l)
    }
}
