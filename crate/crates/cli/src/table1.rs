//! The three five-arm instances with differing optimal 3-subsets, and their printed rewards.

use prebandit::pl::expected_reward;
use prebandit::subset::optimal_subset_bruteforce;
use prebandit::{Preselection, ScoreVector};

pub struct Instance {
    pub scores: [f64; 5],
    /// Printed reward of each of [`SUBSETS`], in order.
    pub printed: [f64; 5],
    /// Position in [`SUBSETS`] of the printed optimum.
    pub best: usize,
}

/// Column headers, 1-based as printed.
pub const SUBSETS: [[usize; 3]; 5] = [[1, 2, 3], [1, 2, 5], [1, 3, 5], [1, 4, 5], [2, 3, 4]];

pub const INSTANCES: [Instance; 3] = [
    Instance {
        scores: [1.0, 0.122, 0.044, 0.037, 0.017],
        printed: [0.872, 0.891, 0.945, 0.951, 0.0896],
        best: 3,
    },
    Instance {
        scores: [1.0, 0.681, 0.572, 0.543, 0.399],
        printed: [0.795, 0.780, 0.754, 0.749, 0.604],
        best: 0,
    },
    Instance {
        scores: [1.0, 0.681, 0.572, 0.543, 0.171],
        printed: [0.795, 0.806, 0.778, 0.773, 0.604],
        best: 1,
    },
];

pub struct Evaluation {
    pub rewards: [f64; 5],
    /// Best of the listed subsets.
    pub listed_best: usize,
    /// Optimum over all 3-subsets.
    pub global_best: Preselection,
}

impl Evaluation {
    pub fn argmax_matches(&self, inst: &Instance) -> bool {
        self.listed_best == inst.best && subset(SUBSETS[inst.best]) == self.global_best
    }

    /// Largest deviation from a printed value.
    pub fn max_deviation(&self, inst: &Instance) -> f64 {
        self.rewards
            .iter()
            .zip(inst.printed)
            .map(|(r, p)| (r - p).abs())
            .fold(0.0, f64::max)
    }
}

fn subset(one_based: [usize; 3]) -> Preselection {
    Preselection::from_one_based(&one_based, 5).expect("valid column")
}

pub fn evaluate(inst: &Instance) -> Evaluation {
    let v = ScoreVector::new(inst.scores.to_vec()).expect("positive scores");
    let rewards = SUBSETS.map(|s| expected_reward(&subset(s), &v));
    let listed_best = (0..5)
        .max_by(|&a, &b| rewards[a].total_cmp(&rewards[b]))
        .expect("five columns");
    let global_best = optimal_subset_bruteforce(&v, 3).expect("3 of 5").subset;
    Evaluation {
        rewards,
        listed_best,
        global_best,
    }
}
