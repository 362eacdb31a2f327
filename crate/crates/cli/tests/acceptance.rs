//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.
//!
//! Run with `cargo test --release -p prebandit-cli --test acceptance`.

use std::path::Path;
use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use itertools::Itertools;
use prebandit::pl::{choice_probability, expected_reward, sample_choice};
use prebandit::sim::{child_seed, draw_instance, replicate_rng, run_episode_with, ContractMonitor};
use prebandit::subset::{optimal_subset_bruteforce, optimal_subset_greedy};
use prebandit::{
    run_batch_monitored, BatchResult, CbrState, InstanceSource, PolicySpec, Preselection, SShaped,
    ScoreVector, SimulationConfig, Variant,
};
use prebandit_cli::output::regret_csv;
use prebandit_cli::table1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Episodes and rounds watched by the contract monitor, and every violation it raised.
#[derive(Default)]
struct Contracts {
    episodes: usize,
    rounds: u64,
    violations: Vec<String>,
}

impl Contracts {
    fn batch(&mut self, config: &SimulationConfig) -> Option<BatchResult> {
        match run_batch_monitored(config) {
            Ok(result) => {
                self.episodes += config.replicates * config.policies.len();
                self.rounds +=
                    (config.replicates * config.policies.len()) as u64 * config.max_horizon();
                Some(result)
            }
            Err(e) => {
                self.violations.push(e.to_string());
                None
            }
        }
    }
}

const HORIZONS: [u64; 5] = [2000, 4000, 6000, 8000, 10000];

fn trcb() -> PolicySpec {
    PolicySpec::Trcb {
        c_shrink: 7e-5,
        v_min: 0.02,
        anchor_reference: true,
    }
}

fn restricted(
    n: usize,
    l: usize,
    replicates: usize,
    policies: Vec<PolicySpec>,
) -> SimulationConfig {
    SimulationConfig {
        variant: Variant::Restricted { l },
        n,
        horizons: HORIZONS.to_vec(),
        replicates,
        instances: InstanceSource::Simplex,
        policies,
        master_seed: 20200106,
        retain_traces: false,
    }
}

// Scores inside the rounding interval of the printed ones for which every printed reward is
// reproduced exactly after rounding.
const TABLE1_WITNESSES: [[f64; 5]; 3] = [
    [1.0, 0.122, 0.0442, 0.0369, 0.0168],
    [1.0, 0.6806, 0.5716, 0.5429, 0.3994],
    [1.0, 0.6806, 0.5716, 0.5432, 0.1706],
];

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut problems = Vec::new();
    for (k, (inst, witness)) in table1::INSTANCES.iter().zip(TABLE1_WITNESSES).enumerate() {
        let e = table1::evaluate(inst);
        if !e.argmax_matches(inst) {
            problems.push(format!("instance {}: optimum {}", k + 1, e.global_best));
        }
        worst = worst.max(e.max_deviation(inst));

        let w = ScoreVector::new(witness.to_vec()).unwrap();
        let in_box = witness
            .iter()
            .zip(inst.scores)
            .all(|(a, b)| (a - b).abs() < 5e-4);
        let rounds_to_printed = table1::SUBSETS
            .iter()
            .zip(inst.printed)
            .all(|(s, printed)| {
                let r = expected_reward(&Preselection::from_one_based(s, 5).unwrap(), &w);
                let digits = if printed < 0.1 { 4 } else { 3 };
                let scale = 10f64.powi(digits);
                (r * scale).round() == (printed * scale).round()
            });
        if !(in_box && rounds_to_printed) {
            problems.push(format!("instance {}: rounding witness rejected", k + 1));
        }
    }
    let pass = problems.is_empty() && worst < 1e-3;
    outcome(
        pass,
        format!(
            "argmax {{1,4,5}} {{1,2,3}} {{1,2,5}}; max |computed - printed| = {worst:.5} (< 1e-3); \
             witnesses within score rounding reproduce every printed cell{}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join(", ")) }
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let instances = 10_000;
    let mut gaps = Vec::new();
    let mut missing_best = 0;
    for _ in 0..instances {
        let n = rng.random_range(4..=12);
        let l = rng.random_range(2..=n.min(5));
        let v = ScoreVector::new((0..n).map(|_| 1.0 - rng.random::<f64>()).collect()).unwrap();
        let brute = optimal_subset_bruteforce(&v, l).unwrap();
        let greedy = optimal_subset_greedy(&v, l).unwrap();
        let best = v.descending_order()[0];
        if !brute.subset.contains(best) || !greedy.subset.contains(best) {
            missing_best += 1;
        }
        let gap = brute.reward - greedy.reward;
        if gap.abs() > 1e-12 {
            gaps.push((gap, v.as_slice().to_vec(), l));
        }
    }
    let worst = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let mut detail = format!(
        "{} of {instances} instances with greedy reward off the optimum by more than 1e-12 \
         (largest shortfall {worst:.3e}); best arm missing from {missing_best} returned optima",
        gaps.len()
    );
    if let Some((gap, v, l)) = gaps.first() {
        detail.push_str(&format!("; first: l={l} gap={gap:.3e} v={v:.4?}"));
    }
    outcome(gaps.is_empty() && missing_best == 0, detail)
}

/// Probability that `arm` heads a ranking of `offered`, summed over all orderings.
fn first_place_by_enumeration(arm: usize, offered: &[usize], v: &[f64]) -> f64 {
    offered
        .iter()
        .copied()
        .permutations(offered.len())
        .filter(|order| order[0] == arm)
        .map(|order| {
            let mut remaining: f64 = order.iter().map(|&i| v[i]).sum();
            let mut p = 1.0;
            for &i in &order {
                p *= v[i] / remaining;
                remaining -= v[i];
            }
            p
        })
        .sum()
}

fn criterion_3() -> Outcome {
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs: Vec<(ScoreVector, Preselection)> = (0..20)
        .map(|k| {
            let n = rng.random_range(5..=10);
            let source = if k % 2 == 0 {
                InstanceSource::Simplex
            } else {
                InstanceSource::UnitInterval
            };
            let v = draw_instance(&source, n, &mut rng).unwrap();
            let size = rng.random_range(2..=5);
            let arms = rand::seq::index::sample(&mut rng, n, size).into_vec();
            (v, Preselection::new(arms, n).unwrap())
        })
        .collect();
    let (mut freq_err, mut enum_err): (f64, f64) = (0.0, 0.0);
    for (k, (v, offered)) in pairs.iter().enumerate() {
        let mut sampler = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        let mut counts = vec![0usize; v.len()];
        for _ in 0..draws {
            counts[sample_choice(offered, v, &mut sampler)] += 1;
        }
        for arm in offered.iter() {
            let p = choice_probability(arm, offered, v).unwrap();
            freq_err = freq_err.max((counts[arm] as f64 / draws as f64 - p).abs());
            let oracle = first_place_by_enumeration(arm, offered.arms(), v.as_slice());
            enum_err = enum_err.max((p - oracle).abs());
        }
    }
    outcome(
        freq_err <= 0.01 && enum_err <= 1e-10,
        format!(
            "20 pairs x {draws} draws: max frequency error {freq_err:.4} (<= 0.01), \
             max closed form vs enumeration {enum_err:.2e} (<= 1e-10)"
        ),
    )
}

fn criterion_4(contracts: &mut Contracts) -> Outcome {
    let mut config = restricted(10, 3, 200, vec![trcb(), PolicySpec::Uniform]);
    config.horizons = vec![2000, 4000, 5000, 6000, 8000, 10000];
    let Some(result) = contracts.batch(&config) else {
        return outcome(false, "batch aborted by a contract violation");
    };
    let trcb = result.policy("trcb").unwrap();
    let uniform = result.policy("uniform").unwrap();
    let ratio = |p: &prebandit::PolicySummary| {
        prebandit::sim::regret_growth_ratio(p, 5000, 10000)
            .unwrap()
            .unwrap_or(f64::NAN)
    };
    let increasing = trcb.mean[0] > 0.0 && trcb.mean.windows(2).all(|w| w[1] > w[0]);
    let (rt, ru) = (ratio(trcb), ratio(uniform));
    outcome(
        increasing && rt <= 1.7 && ru > 1.9,
        format!(
            "trcb mean {:.1?}; trcb Reg(10000)/Reg(5000) = {rt:.3} (<= 1.7), uniform = {ru:.3} (> 1.9)",
            trcb.mean
        ),
    )
}

fn criterion_5(contracts: &mut Contracts) -> Outcome {
    let target = 66.36;
    let config = restricted(20, 4, 1000, vec![trcb()]);
    let Some(result) = contracts.batch(&config) else {
        return outcome(false, "batch aborted by a contract violation");
    };
    let p = result.policy("trcb").unwrap();
    let std = p.std_at(10000).unwrap();
    outcome(
        std >= target / 2.0 && std <= target * 2.0,
        format!(
            "std of Reg(10000) over 1000 replicates = {std:.2}, target band [{:.2}, {:.2}]; \
             std at all checkpoints {:.2?}",
            target / 2.0,
            target * 2.0,
            p.std
        ),
    )
}

struct CbrReplicate {
    cumulative_at: [f64; 2],
    singleton_rounds: usize,
    best_deactivated: bool,
    violation: Option<String>,
}

fn criterion_6(contracts: &mut Contracts) -> Outcome {
    let (n, horizon, replicates, seed) = (10, 10_000u64, 100, 20200106);
    let mut scores = vec![0.7; n];
    scores[0] = 1.0;
    let v = ScoreVector::new(scores.clone()).unwrap();
    let best_only = Preselection::singleton(0);

    let reps: Vec<CbrReplicate> = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut policy = CbrState::new(n, SShaped::Clamp).unwrap();
            let mut rng = replicate_rng(child_seed(seed, k), 1);
            let mut monitor = ContractMonitor::new(Variant::Flexible);
            let mut singleton_rounds = 0;
            let mut best_deactivated = false;
            let trace = run_episode_with(
                &mut policy,
                &v,
                horizon,
                Variant::Flexible,
                &mut rng,
                &mut |rec, pol| {
                    monitor.check(rec, pol)?;
                    if rec.round > horizon - 1000 && *rec.offered == best_only {
                        singleton_rounds += 1;
                    }
                    if !pol.active_arms().unwrap().contains(&0) {
                        best_deactivated = true;
                    }
                    Ok(())
                },
            );
            match trace {
                Ok(t) => CbrReplicate {
                    cumulative_at: [t.at(5000).unwrap(), t.at(horizon).unwrap()],
                    singleton_rounds,
                    best_deactivated,
                    violation: None,
                },
                Err(e) => CbrReplicate {
                    cumulative_at: [f64::NAN; 2],
                    singleton_rounds,
                    best_deactivated,
                    violation: Some(format!("replicate {k}: {e}")),
                },
            }
        })
        .collect();

    contracts.episodes += replicates;
    contracts.rounds += replicates as u64 * horizon;
    contracts
        .violations
        .extend(reps.iter().filter_map(|r| r.violation.clone()));

    // The harness must agree with the hand-rolled episodes above.
    let config = SimulationConfig {
        variant: Variant::Flexible,
        n,
        horizons: vec![5000, horizon],
        replicates,
        instances: InstanceSource::Explicit { scores },
        policies: vec![PolicySpec::Cbr {
            sigma: SShaped::Clamp,
        }],
        master_seed: seed,
        retain_traces: false,
    };
    let harness = contracts.batch(&config);
    let consistent = harness.as_ref().is_some_and(|r| {
        r.policies[0]
            .per_replicate
            .iter()
            .zip(&reps)
            .all(|(row, rep)| row[..] == rep.cumulative_at[..])
    });

    let converged = reps.iter().filter(|r| r.singleton_rounds >= 900).count();
    let deactivated = reps.iter().filter(|r| r.best_deactivated).count();
    let mean = |i: usize| reps.iter().map(|r| r.cumulative_at[i]).sum::<f64>() / replicates as f64;
    let ratio = mean(1) / mean(0);
    let median_singletons = {
        let mut s: Vec<usize> = reps.iter().map(|r| r.singleton_rounds).collect();
        s.sort_unstable();
        s[s.len() / 2]
    };
    outcome(
        converged * 10 >= replicates * 9 && deactivated == 0 && ratio <= 1.3 && consistent,
        format!(
            "{converged}/{replicates} replicates offer {{1}} in >= 900 of the last 1000 rounds (need >= 90); \
             median such rounds {median_singletons}; arm 1 deactivated in {deactivated} replicates; \
             Reg(10000)/Reg(5000) = {ratio:.3} (<= 1.3); harness agrees: {consistent}"
        ),
    )
}

fn criterion_7(contracts: &mut Contracts) -> Outcome {
    let configs = [
        SimulationConfig {
            variant: Variant::Restricted { l: 3 },
            n: 8,
            horizons: vec![250, 500, 1000],
            replicates: 24,
            instances: InstanceSource::Simplex,
            policies: vec![trcb(), PolicySpec::Uniform, PolicySpec::Oracle],
            master_seed: 7,
            retain_traces: false,
        },
        SimulationConfig {
            variant: Variant::Flexible,
            n: 6,
            horizons: vec![500, 1000],
            replicates: 24,
            instances: InstanceSource::UnitInterval,
            policies: vec![
                PolicySpec::Cbr {
                    sigma: SShaped::Clamp,
                },
                PolicySpec::Cbr {
                    sigma: SShaped::Arctan { gamma: 2.0 },
                },
                PolicySpec::Uniform,
            ],
            master_seed: 8,
            retain_traces: false,
        },
    ];
    let mut identical = true;
    for config in &configs {
        let mut reference = None;
        for threads in [1, 2, 4, 1] {
            let csv = prebandit_cli::simulate(config, Some(threads))
                .map_err(|e| e.to_string())
                .and_then(|r| regret_csv(&r).map_err(|e| e.to_string()));
            let csv = match csv {
                Ok(c) => c,
                Err(e) => {
                    contracts.violations.push(e);
                    return outcome(false, "batch aborted");
                }
            };
            contracts.episodes += config.replicates * config.policies.len();
            contracts.rounds +=
                (config.replicates * config.policies.len()) as u64 * config.max_horizon();
            match &reference {
                None => reference = Some(csv),
                Some(r) => identical &= *r == csv,
            }
        }
    }

    // Through the binary, with the thread count from the environment.
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.toml");
    std::fs::write(
        &spec,
        "n = 8\nhorizons = [500, 1000]\nreplicates = 12\nmaster_seed = 5\n\
         variant = { kind = \"restricted\", l = 3 }\ninstances = { source = \"simplex\" }\n\
         policies = [{ kind = \"trcb\", c_shrink = 7e-5, v_min = 0.02 }, { kind = \"uniform\" }]\n",
    )
    .unwrap();
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("out{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_prebandit"))
            .args(["simulate", "--config"])
            .arg(&spec)
            .arg("--out")
            .arg(&out)
            .env(prebandit_cli::THREADS_ENV, threads)
            .stdout(Stdio::null())
            .status()
            .unwrap();
        identical &= status.success();
        files.push(std::fs::read(out.join("regret.csv")).unwrap_or_default());
    }
    identical &= !files[0].is_empty() && files[0] == files[1];
    outcome(
        identical,
        "regret.csv byte-identical across 1, 2 and 4 worker threads, a rerun, and the binary \
         with PREBANDIT_THREADS=1 and 3",
    )
}

fn criterion_8(contracts: &Contracts) -> Outcome {
    let pass = contracts.violations.is_empty() && contracts.episodes > 0;
    let mut detail = format!(
        "{} monitored episodes, {} rounds: {} violations of offer size, reference arm in CBR \
         offers, permanent deactivation, nonnegative regret, monotone win counts",
        contracts.episodes,
        contracts.rounds,
        contracts.violations.len()
    );
    if let Some(first) = contracts.violations.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    outcome(pass, detail)
}

fn main() -> ExitCode {
    if !Path::new(env!("CARGO_BIN_EXE_prebandit")).exists() {
        eprintln!("binary missing");
        return ExitCode::FAILURE;
    }
    let mut contracts = Contracts::default();
    let mut results: Vec<(u8, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: u8, name: &'static str, f: &mut dyn FnMut(&mut Contracts) -> Outcome| {
        let start = Instant::now();
        let o = f(&mut contracts);
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} [{id}] {name} ({secs:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };
    run(1, "table 1 rewards and optima", &mut |_| criterion_1());
    run(2, "greedy subset matches brute force", &mut |_| {
        criterion_2()
    });
    run(3, "choice sampler fidelity", &mut |_| criterion_3());
    run(4, "trcb sublinear regret", &mut criterion_4);
    run(5, "trcb dispersion at T=10000", &mut criterion_5);
    run(6, "cbr convergence on a gap instance", &mut criterion_6);
    run(7, "determinism across thread counts", &mut criterion_7);
    run(8, "policy contracts", &mut |c| criterion_8(c));

    let failed: Vec<u8> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
