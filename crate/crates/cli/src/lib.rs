//! Front end for preselection bandit experiments: config loading, subcommands and output files.

pub mod config;
pub mod error;
pub mod output;
pub mod table1;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use prebandit::subset::{binomial, optimal_subset, optimal_subset_greedy, BRUTE_FORCE_BUDGET};
use prebandit::{run_batch_monitored, BatchResult, ScoreVector, SimulationConfig};

pub use config::{load_config, parse_config};
pub use error::CliError;

/// Environment variable overriding the number of worker threads.
pub const THREADS_ENV: &str = "PREBANDIT_THREADS";

/// Runs a validated batch with contract monitoring, on `threads` workers if given.
pub fn simulate(
    config: &SimulationConfig,
    threads: Option<usize>,
) -> Result<BatchResult, CliError> {
    let run = || run_batch_monitored(config).map_err(CliError::from);
    match threads {
        None => run(),
        Some(0) => Err(CliError::Usage("thread count must be positive".into())),
        Some(t) => rayon_pool(t)?.install(run),
    }
}

fn rayon_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

/// Writes `regret.csv`, `regret.svg` and `summary.json` into `out_dir`; returns a short report.
pub fn cmd_simulate(
    config_path: &Path,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<String, CliError> {
    let config = load_config(config_path)?;
    let result = simulate(&config, threads)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io(format!("creating {}", out_dir.display()), e))?;
    let write = |name: &str, body: &str| {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    };
    write("regret.csv", &output::regret_csv(&result)?)?;
    write("regret.svg", &output::regret_svg(&result))?;
    write("summary.json", &(result.to_json() + "\n"))?;

    let mut report = String::new();
    let t = config.max_horizon();
    for p in &result.policies {
        let _ = writeln!(
            report,
            "{:<8} mean Reg({t}) = {:.3} (std {:.3})",
            p.label,
            p.mean_at(t)?,
            p.std_at(t)?
        );
    }
    let _ = writeln!(
        report,
        "wrote regret.csv, regret.svg, summary.json to {}",
        out_dir.display()
    );
    Ok(report)
}

/// Prints the rewards of the listed subsets per instance and marks the argmax with `*`.
pub fn cmd_table1() -> Result<String, CliError> {
    let mut out = String::new();
    let header: Vec<String> = table1::SUBSETS
        .iter()
        .map(|s| format!("{{{},{},{}}}", s[0], s[1], s[2]))
        .collect();
    let _ = writeln!(
        out,
        "{:<10}{}",
        "S",
        header
            .iter()
            .map(|h| format!("{h:>10}"))
            .collect::<String>()
    );
    let mut mismatches = Vec::new();
    for (k, inst) in table1::INSTANCES.iter().enumerate() {
        let e = table1::evaluate(inst);
        let _ = writeln!(out, "v = {:?}", inst.scores);
        let cells: String = e
            .rewards
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mark = if i == e.listed_best { "*" } else { " " };
                format!("{:>9.4}{mark}", r)
            })
            .collect();
        let _ = writeln!(out, "{:<10}{cells}", "R(S)");
        let printed: String = inst.printed.iter().map(|p| format!("{p:>10}")).collect();
        let _ = writeln!(out, "{:<10}{printed}", "printed");
        let _ = writeln!(
            out,
            "optimum over all 3-subsets: {}, max deviation from printed {:.5}",
            e.global_best,
            e.max_deviation(inst)
        );
        if !e.argmax_matches(inst) {
            mismatches.push(format!("instance {}: optimum {}", k + 1, e.global_best));
        }
    }
    if mismatches.is_empty() {
        Ok(out)
    } else {
        print!("{out}");
        Err(CliError::Table1Mismatch(mismatches.join("; ")))
    }
}

/// Greedy subset and its reward, confirmed against the exact optimum.
pub fn cmd_optimal_subset(scores: &[f64], l: usize) -> Result<String, CliError> {
    let v = ScoreVector::new(scores.to_vec())?;
    let greedy = optimal_subset_greedy(&v, l)?;
    let exact = optimal_subset(&v, l)?;
    let count = binomial(v.len(), l);
    let method = if count <= BRUTE_FORCE_BUDGET {
        format!("brute force over {count} subsets")
    } else {
        "top/bottom split scan".to_string()
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "greedy:  {} reward {:.4}",
        greedy.subset, greedy.reward
    );
    let _ = writeln!(
        out,
        "optimum: {} reward {:.4} ({method})",
        exact.subset, exact.reward
    );
    let gap = exact.reward - greedy.reward;
    if gap <= 1e-12 * exact.reward.max(1.0) {
        let _ = writeln!(out, "greedy is optimal");
    } else {
        let _ = writeln!(out, "greedy falls short by {gap:.3e}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimal_subset_table1_instance() {
        let out = cmd_optimal_subset(&[1.0, 0.122, 0.044, 0.037, 0.017], 3).unwrap();
        assert!(out.contains("greedy:  {1,4,5} reward 0.9503"));
        assert!(out.contains("brute force over 10 subsets"));
        assert!(out.contains("greedy is optimal"));
    }

    #[test]
    fn optimal_subset_full_set() {
        let out = cmd_optimal_subset(&[0.2, 0.9, 0.4], 3).unwrap();
        assert!(out.contains("{1,2,3}"));
    }

    #[test]
    fn optimal_subset_rejects_bad_input() {
        assert_eq!(
            cmd_optimal_subset(&[1.0, 0.5], 3).unwrap_err().exit_code(),
            1
        );
        assert_eq!(
            cmd_optimal_subset(&[1.0, 0.0, 0.5], 2)
                .unwrap_err()
                .exit_code(),
            1
        );
    }

    #[test]
    fn table1_marks_printed_optima() {
        let out = cmd_table1().unwrap();
        assert!(out.contains("optimum over all 3-subsets: {1,4,5}"));
        assert!(out.contains("optimum over all 3-subsets: {1,2,3}"));
        assert!(out.contains("optimum over all 3-subsets: {1,2,5}"));
        assert_eq!(out.matches('*').count(), 3);
    }

    #[test]
    fn exit_codes() {
        use prebandit::Error;
        let contract = CliError::Core(Error::Replicate {
            replicate: 2,
            source: Box::new(Error::ContractViolation("x".into())),
        });
        assert_eq!(contract.exit_code(), 3);
        assert_eq!(CliError::Core(Error::ZeroRound).exit_code(), 1);
        assert_eq!(CliError::Table1Mismatch(String::new()).exit_code(), 2);
    }
}
