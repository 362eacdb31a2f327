//! Seeded Monte-Carlo harness: episodes, batches of replicates and regret summaries.
//!
//! Replicate `k` of a batch draws everything from [`child_seed`]`(master_seed, k)`:
//! the instance comes from stream 0 of a ChaCha8 generator with that seed, and the
//! episode of the `p`-th configured policy from stream `p + 1`. Results therefore
//! do not depend on the number of replicates, the thread count or the scheduling
//! order, and all policies of a replicate face the same instance.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pl::{instant_regret, sample_choice, ChoiceObservation, Preselection};
use crate::policy::{
    CbrState, OraclePolicy, Policy, SShaped, TrcbState, UniformPolicy, Variant, WinMatrix,
};
use crate::subset::optimal_subset;
use crate::ScoreVector;

/// Where the hidden score vectors of a batch come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceSource {
    /// Uniform on the probability simplex.
    Simplex,
    /// Independent uniforms on `(0, 1]`.
    UnitInterval,
    /// The same fixed scores in every replicate.
    Explicit { scores: Vec<f64> },
}

/// Draws one instance with `n` arms.
pub fn draw_instance<R: Rng + ?Sized>(
    source: &InstanceSource,
    n: usize,
    rng: &mut R,
) -> Result<ScoreVector> {
    if n < 2 {
        return Err(Error::TooFewArms(n));
    }
    match source {
        InstanceSource::Simplex => {
            let draws: Vec<f64> = (0..n)
                .map(|_| loop {
                    let e: f64 = rng.sample(Exp1);
                    if e > 0.0 {
                        break e;
                    }
                })
                .collect();
            let total: f64 = draws.iter().sum();
            ScoreVector::new(draws.into_iter().map(|e| e / total).collect())
        }
        InstanceSource::UnitInterval => {
            ScoreVector::new((0..n).map(|_| 1.0 - rng.random::<f64>()).collect())
        }
        InstanceSource::Explicit { scores } => {
            if scores.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: scores.len(),
                });
            }
            ScoreVector::new(scores.clone())
        }
    }
}

/// Policy selection with parameters, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    Trcb {
        c_shrink: f64,
        v_min: f64,
        /// Keep the reference arm in every offer (see [`TrcbState::with_anchor`]).
        #[serde(default = "yes")]
        anchor_reference: bool,
    },
    Cbr {
        #[serde(default = "clamp")]
        sigma: SShaped,
    },
    Uniform,
    Oracle,
}

fn clamp() -> SShaped {
    SShaped::Clamp
}

fn yes() -> bool {
    true
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::Trcb {
                anchor_reference: true,
                ..
            } => "trcb",
            PolicySpec::Trcb { .. } => "trcb-unanchored",
            PolicySpec::Cbr {
                sigma: SShaped::Clamp,
            } => "cbr",
            PolicySpec::Cbr { .. } => "cbr-as",
            PolicySpec::Uniform => "uniform",
            PolicySpec::Oracle => "oracle",
        }
    }

    /// Checks parameters and that the policy fits the variant.
    pub fn validate(&self, n: usize, variant: Variant) -> Result<()> {
        match (self, variant) {
            (
                PolicySpec::Trcb {
                    c_shrink, v_min, ..
                },
                Variant::Restricted { l },
            ) => TrcbState::new(n, l, *c_shrink, *v_min).map(|_| ()),
            (PolicySpec::Trcb { .. }, Variant::Flexible) => Err(Error::InvalidParameter(
                "trcb needs the restricted variant".into(),
            )),
            (PolicySpec::Cbr { sigma }, Variant::Flexible) => CbrState::new(n, *sigma).map(|_| ()),
            (PolicySpec::Cbr { .. }, Variant::Restricted { .. }) => Err(Error::InvalidParameter(
                "cbr needs the flexible variant".into(),
            )),
            _ => variant.validate(n),
        }
    }

    /// Fresh policy for one episode on instance `v`.
    pub fn build(&self, v: &ScoreVector, variant: Variant) -> Result<Box<dyn Policy>> {
        let n = v.len();
        self.validate(n, variant)?;
        Ok(match (self, variant) {
            (
                PolicySpec::Trcb {
                    c_shrink,
                    v_min,
                    anchor_reference,
                },
                Variant::Restricted { l },
            ) => Box::new(TrcbState::new(n, l, *c_shrink, *v_min)?.with_anchor(*anchor_reference)),
            (PolicySpec::Cbr { sigma }, _) => Box::new(CbrState::new(n, *sigma)?),
            (PolicySpec::Uniform, _) => Box::new(UniformPolicy { n, variant }),
            (PolicySpec::Oracle, _) => Box::new(OraclePolicy::new(v, variant)?),
            (PolicySpec::Trcb { .. }, Variant::Flexible) => unreachable!("rejected by validate"),
        })
    }
}

/// Declarative batch experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub variant: Variant,
    pub n: usize,
    /// Checkpoints `T` at which cumulative regret is reported, strictly ascending.
    pub horizons: Vec<u64>,
    pub replicates: usize,
    pub instances: InstanceSource,
    pub policies: Vec<PolicySpec>,
    pub master_seed: u64,
    /// Keep full per-round traces in the result.
    #[serde(default)]
    pub retain_traces: bool,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewArms(self.n));
        }
        self.variant.validate(self.n)?;
        if self.horizons.is_empty() || self.horizons[0] == 0 {
            return Err(Error::InvalidParameter(
                "horizons must be nonempty and positive".into(),
            ));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "horizons must be strictly ascending".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter(
                "replicates must be at least 1".into(),
            ));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidParameter("no policies configured".into()));
        }
        if let InstanceSource::Explicit { scores } = &self.instances {
            if scores.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    actual: scores.len(),
                });
            }
            ScoreVector::new(scores.clone())?;
        }
        for p in &self.policies {
            p.validate(self.n, self.variant)?;
        }
        Ok(())
    }

    pub fn max_horizon(&self) -> u64 {
        *self.horizons.last().expect("validated nonempty")
    }
}

/// Per-round expected regret of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    /// Cumulative regret after `t` rounds, `t >= 1`.
    pub fn at(&self, t: u64) -> Option<f64> {
        let idx = usize::try_from(t).ok()?.checked_sub(1)?;
        self.cumulative.get(idx).copied()
    }

    pub fn checkpoints(&self, horizons: &[u64]) -> Result<Vec<f64>> {
        horizons
            .iter()
            .map(|&t| self.at(t).ok_or(Error::UnknownCheckpoint(t)))
            .collect()
    }
}

/// What happened in one round, handed to episode observers.
#[derive(Debug, Clone)]
pub struct RoundRecord<'a> {
    pub round: u64,
    pub offered: &'a Preselection,
    pub chosen: usize,
    pub regret: f64,
}

/// Reward of an optimal preselection for the variant.
pub fn optimal_reward(v: &ScoreVector, variant: Variant) -> Result<f64> {
    variant.validate(v.len())?;
    match variant {
        Variant::Restricted { l } => Ok(optimal_subset(v, l)?.reward),
        Variant::Flexible => Ok(v.max()),
    }
}

fn check_suggestion(subset: &Preselection, n: usize, variant: Variant, round: u64) -> Result<()> {
    if subset.max_arm() >= n {
        return Err(Error::ContractViolation(format!(
            "round {round}: arm {} out of range for {n} arms",
            subset.max_arm() + 1
        )));
    }
    if let Some(l) = variant.size() {
        if subset.len() != l {
            return Err(Error::ContractViolation(format!(
                "round {round}: suggested {} arms, expected {l}",
                subset.len()
            )));
        }
    }
    Ok(())
}

pub fn run_episode(
    policy: &mut dyn Policy,
    v: &ScoreVector,
    horizon: u64,
    variant: Variant,
    rng: &mut dyn RngCore,
) -> Result<RegretTrace> {
    run_episode_with(policy, v, horizon, variant, rng, &mut |_, _| Ok(()))
}

/// Runs `horizon` rounds of suggest, choose, observe. `inspect` sees every round after the
/// policy has observed it and may abort the episode by returning an error.
pub fn run_episode_with(
    policy: &mut dyn Policy,
    v: &ScoreVector,
    horizon: u64,
    variant: Variant,
    rng: &mut dyn RngCore,
    inspect: &mut dyn FnMut(&RoundRecord<'_>, &dyn Policy) -> Result<()>,
) -> Result<RegretTrace> {
    let opt = optimal_reward(v, variant)?;
    let len = usize::try_from(horizon)
        .map_err(|_| Error::InvalidParameter("horizon too large".into()))?;
    let mut instantaneous = Vec::with_capacity(len);
    let mut cumulative = Vec::with_capacity(len);
    let mut total = 0.0;
    for round in 1..=horizon {
        let offered = policy.suggest(rng);
        check_suggestion(&offered, v.len(), variant, round)?;
        let regret = instant_regret(&offered, v, opt)?;
        let chosen = sample_choice(&offered, v, rng);
        let obs = ChoiceObservation::new(offered, chosen, round)?;
        policy.observe(&obs)?;
        total += regret;
        instantaneous.push(regret);
        cumulative.push(total);
        inspect(
            &RoundRecord {
                round,
                offered: &obs.offered,
                chosen,
                regret,
            },
            &*policy,
        )?;
    }
    Ok(RegretTrace {
        instantaneous,
        cumulative,
    })
}

/// Per-episode checker for the behavioural contracts every policy must honour:
/// restricted subsets have exactly `l` arms, instantaneous regret is nonnegative, win counts
/// never decrease and grow by `|S| - 1` per round, and for eliminating policies the reference
/// arm is offered, only active arms join it, and eliminated arms stay eliminated.
#[derive(Debug, Clone)]
pub struct ContractMonitor {
    variant: Variant,
    wins: Option<WinMatrix>,
    active: Option<Vec<usize>>,
}

impl ContractMonitor {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            wins: None,
            active: None,
        }
    }

    pub fn check(&mut self, rec: &RoundRecord<'_>, policy: &dyn Policy) -> Result<()> {
        let fail = |what: String| {
            Err(Error::ContractViolation(format!(
                "round {}: {what}",
                rec.round
            )))
        };
        if let Some(l) = self.variant.size() {
            if rec.offered.len() != l {
                return fail(format!("offered {} arms instead of {l}", rec.offered.len()));
            }
        }
        if rec.regret < 0.0 || rec.regret.is_nan() {
            return fail(format!("instantaneous regret {}", rec.regret));
        }
        if !rec.offered.contains(rec.chosen) {
            return fail(format!("chosen arm {} was not offered", rec.chosen + 1));
        }
        if let Some(wins) = policy.wins() {
            let expected_total =
                self.wins.as_ref().map_or(0, |w| w.total()) + rec.offered.len() as u64 - 1;
            if let Some(prev) = &self.wins {
                if prev
                    .as_slice()
                    .iter()
                    .zip(wins.as_slice())
                    .any(|(a, b)| b < a)
                {
                    return fail("a win count decreased".into());
                }
            }
            if wins.total() != expected_total {
                return fail(format!(
                    "win total {} instead of {expected_total}",
                    wins.total()
                ));
            }
            self.wins = Some(wins.clone());
        }
        if let Some(active) = policy.active_arms() {
            let Some(reference) = policy.reference_arm() else {
                return fail("eliminating policy reports no reference arm".into());
            };
            if !rec.offered.contains(reference) {
                return fail(format!("reference arm {} not offered", reference + 1));
            }
            if let Some(arm) = rec
                .offered
                .iter()
                .find(|&a| a != reference && active.binary_search(&a).is_err())
            {
                return fail(format!("eliminated arm {} offered", arm + 1));
            }
            if let Some(prev) = &self.active {
                if let Some(arm) = active.iter().find(|a| prev.binary_search(a).is_err()) {
                    return fail(format!("arm {} reactivated", arm + 1));
                }
            }
            self.active = Some(active);
        }
        Ok(())
    }
}

fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(master_seed ^ splitmix64(replicate))`. Distinct replicates get distinct seeds,
/// since the splitmix64 finalizer is a bijection on `u64`.
pub fn child_seed(master_seed: u64, replicate: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(replicate as u64))
}

/// Generator of stream `stream` for a replicate seed.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Aggregated cumulative regret of one policy over all replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub label: String,
    pub checkpoints: Vec<u64>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (denominator `replicates - 1`; 0 for one replicate).
    pub std: Vec<f64>,
    /// `per_replicate[k][c]`: cumulative regret of replicate `k` at checkpoint `c`.
    pub per_replicate: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub traces: Option<Vec<RegretTrace>>,
}

impl PolicySummary {
    fn from_replicates(
        label: String,
        checkpoints: Vec<u64>,
        per_replicate: Vec<Vec<f64>>,
        traces: Option<Vec<RegretTrace>>,
    ) -> Self {
        let reps = per_replicate.len() as f64;
        let cols = checkpoints.len();
        let mut mean = vec![0.0; cols];
        for row in &per_replicate {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= reps);
        let mut std = vec![0.0; cols];
        if per_replicate.len() > 1 {
            for row in &per_replicate {
                for c in 0..cols {
                    std[c] += (row[c] - mean[c]).powi(2);
                }
            }
            std.iter_mut().for_each(|s| *s = (*s / (reps - 1.0)).sqrt());
        }
        Self {
            label,
            checkpoints,
            mean,
            std,
            per_replicate,
            traces,
        }
    }

    fn index_of(&self, t: u64) -> Result<usize> {
        self.checkpoints
            .iter()
            .position(|&c| c == t)
            .ok_or(Error::UnknownCheckpoint(t))
    }

    pub fn mean_at(&self, t: u64) -> Result<f64> {
        Ok(self.mean[self.index_of(t)?])
    }

    pub fn std_at(&self, t: u64) -> Result<f64> {
        Ok(self.std[self.index_of(t)?])
    }
}

/// `mean Reg(t2) / mean Reg(t1)`; `None` when the mean at `t1` is zero.
pub fn regret_growth_ratio(summary: &PolicySummary, t1: u64, t2: u64) -> Result<Option<f64>> {
    if t1 >= t2 {
        return Err(Error::InvalidParameter(format!(
            "growth ratio needs t1 < t2, got {t1} and {t2}"
        )));
    }
    let (a, b) = (summary.mean_at(t1)?, summary.mean_at(t2)?);
    Ok((a != 0.0).then(|| b / a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub variant: Variant,
    pub n: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub policies: Vec<PolicySummary>,
}

impl BatchResult {
    pub fn policy(&self, label: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("batch result serializes")
    }
}

struct ReplicateOutcome {
    checkpoints: Vec<Vec<f64>>,
    traces: Vec<RegretTrace>,
}

/// Runs replicate `replicate` for every configured policy.
pub fn run_replicate(
    config: &SimulationConfig,
    replicate: usize,
) -> Result<(ScoreVector, Vec<RegretTrace>)> {
    replicate_traces(config, replicate, false)
}

fn replicate_traces(
    config: &SimulationConfig,
    replicate: usize,
    monitored: bool,
) -> Result<(ScoreVector, Vec<RegretTrace>)> {
    let seed = child_seed(config.master_seed, replicate);
    let v = draw_instance(&config.instances, config.n, &mut replicate_rng(seed, 0))?;
    let traces = config
        .policies
        .iter()
        .enumerate()
        .map(|(p, spec)| {
            let mut policy = spec.build(&v, config.variant)?;
            let mut rng = replicate_rng(seed, p as u64 + 1);
            let mut monitor = ContractMonitor::new(config.variant);
            run_episode_with(
                policy.as_mut(),
                &v,
                config.max_horizon(),
                config.variant,
                &mut rng,
                &mut |rec, pol| {
                    if monitored {
                        monitor.check(rec, pol)
                    } else {
                        Ok(())
                    }
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((v, traces))
}

fn replicate_outcome(
    config: &SimulationConfig,
    replicate: usize,
    monitored: bool,
) -> Result<ReplicateOutcome> {
    let (_, traces) =
        replicate_traces(config, replicate, monitored).map_err(|e| Error::Replicate {
            replicate,
            source: Box::new(e),
        })?;
    let checkpoints = traces
        .iter()
        .map(|t| t.checkpoints(&config.horizons))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateOutcome {
        checkpoints,
        traces: if config.retain_traces {
            traces
        } else {
            Vec::new()
        },
    })
}

/// Runs every replicate on the current rayon pool and aggregates in replicate order.
pub fn run_batch(config: &SimulationConfig) -> Result<BatchResult> {
    batch(config, false)
}

/// [`run_batch`] with a [`ContractMonitor`] attached to every episode. Results are identical
/// to the unmonitored run; the first violation aborts the batch.
pub fn run_batch_monitored(config: &SimulationConfig) -> Result<BatchResult> {
    batch(config, true)
}

fn batch(config: &SimulationConfig, monitored: bool) -> Result<BatchResult> {
    config.validate()?;
    let outcomes = (0..config.replicates)
        .into_par_iter()
        .map(|k| replicate_outcome(config, k, monitored))
        .collect::<Result<Vec<_>>>()?;

    let policies = config
        .policies
        .iter()
        .enumerate()
        .map(|(p, spec)| {
            let per_replicate = outcomes.iter().map(|o| o.checkpoints[p].clone()).collect();
            let traces = config
                .retain_traces
                .then(|| outcomes.iter().map(|o| o.traces[p].clone()).collect());
            PolicySummary::from_replicates(
                spec.label().to_string(),
                config.horizons.clone(),
                per_replicate,
                traces,
            )
        })
        .collect();
    Ok(BatchResult {
        variant: config.variant,
        n: config.n,
        replicates: config.replicates,
        master_seed: config.master_seed,
        policies,
    })
}

/// [`run_batch`] on a dedicated pool of `threads` workers.
pub fn run_batch_with_threads(config: &SimulationConfig, threads: usize) -> Result<BatchResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_batch(config))
}
