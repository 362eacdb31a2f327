//! Learning policies behind a common suggest/observe interface.
//!
//! [`TrcbState`] targets the fixed-size problem, [`CbrState`] the flexible one.
//! Both keep a [`WinMatrix`] of pairwise wins, obtained by splitting every
//! observed pick into "chosen beats each other offered arm".

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pl::{ChoiceObservation, Preselection, Scores};
use crate::subset::{
    optimal_subset, optimal_subset_containing, optimal_subset_flexible, optimal_subset_scan,
};

/// Action space of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Variant {
    /// Preselections of exactly `l` arms.
    Restricted { l: usize },
    /// Any nonempty preselection.
    Flexible,
}

impl Variant {
    pub fn size(&self) -> Option<usize> {
        match self {
            Variant::Restricted { l } => Some(*l),
            Variant::Flexible => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Restricted { .. } => "restricted",
            Variant::Flexible => "flexible",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Variant::Restricted { l } if l < 2 || l > n => Err(Error::SizeOutOfRange { l, n }),
            _ => Ok(()),
        }
    }
}

/// Pairwise win counts `w[i][j]`: how often `i` was picked while `j` was also offered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl WinMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn wins(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n + j]
    }

    /// `w[i][j] + w[j][i]`.
    pub fn comparisons(&self, i: usize, j: usize) -> u64 {
        self.wins(i, j) + self.wins(j, i)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    pub fn record(&mut self, obs: &ChoiceObservation) -> Result<()> {
        let winner = obs.chosen;
        if obs.offered.max_arm() >= self.n {
            return Err(Error::ArmOutOfRange {
                arm: obs.offered.max_arm(),
                n: self.n,
            });
        }
        if !obs.offered.contains(winner) {
            return Err(Error::NotOffered { arm: winner });
        }
        for loser in obs.offered.iter().filter(|&j| j != winner) {
            self.counts[winner * self.n + loser] += 1;
        }
        Ok(())
    }

    /// Arm with the most pairwise non-losing records `#{j != i : w[i][j] >= w[j][i]}`; ties to the lowest index.
    pub fn reference_arm(&self) -> usize {
        let mut best = (0, 0usize);
        for i in 0..self.n {
            let score = (0..self.n)
                .filter(|&j| j != i && self.wins(i, j) >= self.wins(j, i))
                .count();
            if score > best.1 || i == 0 {
                best = (i, score);
            }
        }
        best.0
    }

    fn validate(&self) -> Result<()> {
        if self.counts.len() != self.n * self.n {
            return Err(Error::Snapshot(format!(
                "win matrix needs {} entries, has {}",
                self.n * self.n,
                self.counts.len()
            )));
        }
        if (0..self.n).any(|i| self.wins(i, i) != 0) {
            return Err(Error::Snapshot("win matrix diagonal must be zero".into()));
        }
        Ok(())
    }
}

/// Monotone map into `[0, 1]` with `sigma(1/2) = 1/2` and `sigma(x) > 0` iff `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SShaped {
    /// `min(1, max(0, x))`.
    Clamp,
    /// `atan((x - 1/2) / ((1 - x)^gamma x^gamma)) / pi + 1/2` on `(0, 1)`, 0 below, 1 above.
    Arctan { gamma: f64 },
}

impl SShaped {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match *self {
            SShaped::Clamp => x,
            SShaped::Arctan { gamma } => {
                let denom = ((1.0 - x) * x).powf(gamma);
                ((x - 0.5) / denom).atan() / PI + 0.5
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SShaped::Clamp => "clamp",
            SShaped::Arctan { .. } => "arctan",
        }
    }
}

/// Common interface of every policy driven by the harness.
pub trait Policy: Send {
    fn name(&self) -> String;

    fn suggest(&mut self, rng: &mut dyn RngCore) -> Preselection;

    fn observe(&mut self, obs: &ChoiceObservation) -> Result<()>;

    fn wins(&self) -> Option<&WinMatrix> {
        None
    }

    /// Reference arm used by the most recent suggestion.
    fn reference_arm(&self) -> Option<usize> {
        None
    }

    /// Arms still eligible for inclusion, for policies that eliminate arms.
    fn active_arms(&self) -> Option<Vec<usize>> {
        None
    }
}

/// `sqrt(numer / comparisons)`, infinite when nothing has been compared yet.
fn width(numer: f64, comparisons: u64) -> f64 {
    if comparisons == 0 {
        f64::INFINITY
    } else {
        (numer / comparisons as f64).sqrt()
    }
}

/// State of the thresholding random confidence bound policy for `l`-sized preselections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrcbState {
    pub l: usize,
    pub c_shrink: f64,
    pub v_min: f64,
    /// Index of the upcoming round, starting at 1.
    pub round: u64,
    pub wins: WinMatrix,
    /// Raw relative score estimates `O[i][j]`, row-major.
    pub estimates: Vec<f64>,
    #[serde(default)]
    pub last_reference: Option<usize>,
    /// Restrict the maximization to subsets containing the reference arm.
    #[serde(default = "anchored")]
    pub anchor_reference: bool,
}

fn anchored() -> bool {
    true
}

impl TrcbState {
    pub fn new(n: usize, l: usize, c_shrink: f64, v_min: f64) -> Result<Self> {
        Variant::Restricted { l }.validate(n)?;
        if !(c_shrink > 0.0 && c_shrink < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "c_shrink must lie in (0, 1/2), got {c_shrink}"
            )));
        }
        if !(v_min > 0.0 && v_min < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "v_min must lie in (0, 1), got {v_min}"
            )));
        }
        Ok(Self {
            l,
            c_shrink,
            v_min,
            round: 1,
            wins: WinMatrix::new(n),
            estimates: vec![1.0; n * n],
            last_reference: None,
            anchor_reference: true,
        })
    }

    /// Chooses between the anchored maximization (the default) and the maximization over all
    /// `l`-subsets.
    ///
    /// Without the anchor the reference arm has relative score 1 while every other arm carries
    /// an `O(1)` perturbation until it has been compared with the reference many times, so once
    /// `l` or more arms draw above 1 the reference drops out of the offer and those comparisons
    /// stop accruing. On simplex instances with `n = 20` this stalls learning for the whole
    /// horizon of `10^4` rounds.
    pub fn with_anchor(mut self, anchor_reference: bool) -> Self {
        self.anchor_reference = anchor_reference;
        self
    }

    pub fn n(&self) -> usize {
        self.wins.n()
    }

    pub fn estimate(&self, i: usize, j: usize) -> f64 {
        self.estimates[i * self.n() + j]
    }

    /// `sqrt(32 log(l t^{3/2}) / (v_min^4 (w[i][J] + w[J][i])))`; infinite before the first comparison.
    pub fn confidence_width(&self, i: usize, reference: usize) -> f64 {
        let t = self.round as f64;
        let numer = 32.0 * (self.l as f64 * t.powf(1.5)).ln() / self.v_min.powi(4);
        width(numer, self.wins.comparisons(i, reference))
    }

    /// Shifts an estimate by `c_shrink * theta` and clamps into `[v_min, 1/v_min]`.
    pub fn threshold(&self, estimate: f64, theta: f64) -> f64 {
        (estimate + self.c_shrink * theta)
            .max(self.v_min)
            .min(self.v_min.recip())
    }

    /// Randomized, thresholded relative score of `i` against the reference arm.
    ///
    /// With an infinite width the draw is uniform on `[v_min, 1/v_min]`.
    pub fn perturbed_score<R: Rng + ?Sized>(&self, i: usize, reference: usize, rng: &mut R) -> f64 {
        if i == reference {
            return 1.0;
        }
        let c = self.confidence_width(i, reference);
        if c.is_infinite() {
            return rng.random_range(self.v_min..=self.v_min.recip());
        }
        let theta = rng.random_range(-c..=c);
        self.threshold(self.estimate(i, reference), theta)
    }

    /// Perturbed relative scores of all arms against `reference`, drawn in ascending arm order.
    pub fn perturbed_vector<R: Rng + ?Sized>(&self, reference: usize, rng: &mut R) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.perturbed_score(i, reference, rng))
            .collect()
    }

    /// Best `l`-subset for the perturbed relative scores, containing the reference arm when
    /// anchored.
    pub fn suggest_with<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Preselection) {
        let reference = self.wins.reference_arm();
        let relative = self.perturbed_vector(reference, rng);
        let scores = Scores::new(relative).expect("thresholded scores are positive");
        let best = if self.anchor_reference {
            optimal_subset_containing(&scores, self.l, reference)
        } else {
            optimal_subset_scan(&scores, self.l)
        };
        (reference, best.expect("l validated at construction").subset)
    }

    pub fn observe_choice(&mut self, obs: &ChoiceObservation) -> Result<()> {
        self.wins.record(obs)?;
        let n = self.n();
        for i in obs.offered.iter() {
            for j in obs.offered.iter().filter(|&j| j != i) {
                let lost = self.wins.wins(j, i);
                self.estimates[i * n + j] = if lost != 0 {
                    self.wins.comparisons(i, j) as f64 / lost as f64 - 1.0
                } else {
                    self.v_min
                };
            }
        }
        self.round += 1;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: Self = serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))?;
        state.wins.validate()?;
        let n = state.n();
        if state.estimates.len() != n * n {
            return Err(Error::Snapshot("estimate matrix has wrong size".into()));
        }
        let rebuilt = Self::new(n, state.l, state.c_shrink, state.v_min)
            .map_err(|e| Error::Snapshot(e.to_string()))?;
        if state.round == 0 {
            return Err(Error::Snapshot("round must be at least 1".into()));
        }
        drop(rebuilt);
        Ok(state)
    }
}

impl Policy for TrcbState {
    fn name(&self) -> String {
        if self.anchor_reference {
            "trcb".into()
        } else {
            "trcb-unanchored".into()
        }
    }

    fn suggest(&mut self, rng: &mut dyn RngCore) -> Preselection {
        let (reference, subset) = self.suggest_with(rng);
        self.last_reference = Some(reference);
        subset
    }

    fn observe(&mut self, obs: &ChoiceObservation) -> Result<()> {
        self.observe_choice(obs)
    }

    fn wins(&self) -> Option<&WinMatrix> {
        Some(&self.wins)
    }

    fn reference_arm(&self) -> Option<usize> {
        self.last_reference
    }
}

/// State of the confidence bound racing policy for flexible preselections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbrState {
    pub sigma: SShaped,
    /// Index of the upcoming round, starting at 1.
    pub round: u64,
    pub wins: WinMatrix,
    /// Pairwise winning probability estimates `q[i][j]`, row-major.
    pub probs: Vec<f64>,
    /// `active[i]` is false once arm `i` was eliminated.
    pub active: Vec<bool>,
    #[serde(default)]
    pub last_reference: Option<usize>,
}

impl CbrState {
    pub fn new(n: usize, sigma: SShaped) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewArms(n));
        }
        if let SShaped::Arctan { gamma } = sigma {
            if !(gamma.is_finite() && gamma >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "arctan gamma must be finite and nonnegative, got {gamma}"
                )));
            }
        }
        Ok(Self {
            sigma,
            round: 1,
            wins: WinMatrix::new(n),
            probs: vec![0.5; n * n],
            active: vec![true; n],
            last_reference: None,
        })
    }

    pub fn n(&self) -> usize {
        self.wins.n()
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.n() + j]
    }

    /// `sqrt(2 log(n t^{3/2}) / (w[i][J] + w[J][i]))`; infinite before the first comparison.
    pub fn confidence(&self, i: usize, reference: usize) -> f64 {
        let t = self.round as f64;
        let numer = 2.0 * (self.n() as f64 * t.powf(1.5)).ln();
        width(numer, self.wins.comparisons(i, reference))
    }

    /// `sigma((q[i][J] + c - 1/2) / (2c))`, which tends to `sigma(1/2)` as `c` grows.
    ///
    /// Evaluated as `1/2 + (q - 1/2) / (2c)` so that `q = 1/2` maps to exactly `sigma(1/2)`.
    pub fn inclusion_prob(&self, i: usize, reference: usize) -> f64 {
        let c = self.confidence(i, reference);
        if c.is_infinite() {
            return self.sigma.eval(0.5);
        }
        self.sigma
            .eval(0.5 + (self.prob(i, reference) - 0.5) / (2.0 * c))
    }

    /// Builds the next preselection, eliminating every arm whose inclusion probability hit zero.
    pub fn suggest_with<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Preselection {
        let reference = self.wins.reference_arm();
        let mut arms = vec![reference];
        for i in 0..self.n() {
            if !self.active[i] || i == reference {
                continue;
            }
            let p = self.inclusion_prob(i, reference);
            if p == 0.0 {
                self.active[i] = false;
            } else if rng.random_bool(p) {
                arms.push(i);
            }
        }
        self.last_reference = Some(reference);
        Preselection::try_from(arms).expect("distinct arms")
    }

    pub fn active_set(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.active[i]).collect()
    }

    pub fn observe_choice(&mut self, obs: &ChoiceObservation) -> Result<()> {
        self.wins.record(obs)?;
        let n = self.n();
        for i in obs.offered.iter() {
            for j in obs.offered.iter().filter(|&j| j != i) {
                let total = self.wins.comparisons(i, j);
                if total > 0 {
                    self.probs[i * n + j] = self.wins.wins(i, j) as f64 / total as f64;
                }
            }
        }
        self.round += 1;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: Self = serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))?;
        state.wins.validate()?;
        let n = state.n();
        if state.probs.len() != n * n || state.active.len() != n {
            return Err(Error::Snapshot("state dimensions disagree".into()));
        }
        if state.probs.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::Snapshot("probabilities must lie in [0, 1]".into()));
        }
        if state.round == 0 {
            return Err(Error::Snapshot("round must be at least 1".into()));
        }
        Ok(state)
    }
}

impl Policy for CbrState {
    fn name(&self) -> String {
        match self.sigma {
            SShaped::Clamp => "cbr".into(),
            SShaped::Arctan { .. } => "cbr-as".into(),
        }
    }

    fn suggest(&mut self, rng: &mut dyn RngCore) -> Preselection {
        self.suggest_with(rng)
    }

    fn observe(&mut self, obs: &ChoiceObservation) -> Result<()> {
        self.observe_choice(obs)
    }

    fn wins(&self) -> Option<&WinMatrix> {
        Some(&self.wins)
    }

    fn reference_arm(&self) -> Option<usize> {
        self.last_reference
    }

    fn active_arms(&self) -> Option<Vec<usize>> {
        Some(self.active_set())
    }
}

/// Uniformly random `l`-subset, or uniformly random nonempty subset in the flexible case.
pub fn baseline_uniform_suggest<R: Rng + ?Sized>(
    n: usize,
    variant: Variant,
    rng: &mut R,
) -> Preselection {
    let arms = match variant {
        Variant::Restricted { l } => rand::seq::index::sample(rng, n, l).into_vec(),
        Variant::Flexible => loop {
            let arms: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            if !arms.is_empty() {
                break arms;
            }
        },
    };
    Preselection::try_from(arms).expect("distinct nonempty arms")
}

/// The optimal preselection for the true scores.
pub fn baseline_oracle_suggest(v: &Scores<f64>, variant: Variant) -> Result<Preselection> {
    variant.validate(v.len())?;
    Ok(match variant {
        Variant::Restricted { l } => optimal_subset(v, l)?.subset,
        Variant::Flexible => optimal_subset_flexible(v).subset,
    })
}

#[derive(Debug, Clone)]
pub struct UniformPolicy {
    pub n: usize,
    pub variant: Variant,
}

impl Policy for UniformPolicy {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn suggest(&mut self, rng: &mut dyn RngCore) -> Preselection {
        baseline_uniform_suggest(self.n, self.variant, rng)
    }

    fn observe(&mut self, _obs: &ChoiceObservation) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OraclePolicy {
    pub subset: Preselection,
}

impl OraclePolicy {
    pub fn new(v: &Scores<f64>, variant: Variant) -> Result<Self> {
        Ok(Self {
            subset: baseline_oracle_suggest(v, variant)?,
        })
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn suggest(&mut self, _rng: &mut dyn RngCore) -> Preselection {
        self.subset.clone()
    }

    fn observe(&mut self, _obs: &ChoiceObservation) -> Result<()> {
        Ok(())
    }
}
