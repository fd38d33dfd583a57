//! Multi-trial experiment execution and its artifacts.
//!
//! Output layout under the output directory:
//!
//! ```text
//! config.toml                     resolved configuration
//! records/<label>-trial<k>.json   full run record
//! trajectories/<label>-trial<k>.csv
//! mean_trajectories/<label>.csv
//! summary.csv
//! failures.json                   only when a run failed
//! ```

use std::path::{Path, PathBuf};

use anyhow::Context;
use fmqa::optimizer::{self, aggregate, fmt_f64, LoopConfig, RunRecord, Summary};
use fmqa::initdesign::DesignSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, MethodConfig};
use crate::{write_file, CliError, CliResult};

pub const SUMMARY_HEADER: &str =
    "method,trials,n0,initial_mean,initial_std,final_mean,final_std,gain,delta_vs_baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub label: String,
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub summary: Summary,
    /// Final mean minus the baseline's final mean; `None` for the baseline.
    pub delta_vs_baseline: Option<f64>,
}

impl SummaryRow {
    fn csv_line(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method,
            s.trials,
            s.n0,
            fmt_f64(s.initial_mean),
            fmt_f64(s.initial_std),
            fmt_f64(s.final_mean),
            fmt_f64(s.final_std),
            fmt_f64(s.gain),
            self.delta_vs_baseline.map(fmt_f64).unwrap_or_default()
        )
    }
}

pub struct Outcome {
    /// Successful records, in method then trial order.
    pub records: Vec<RunRecord>,
    pub failures: Vec<Failure>,
    pub rows: Vec<SummaryRow>,
    pub config_hash: String,
}

pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

pub fn artifact_stem(label: &str, trial: usize) -> String {
    format!("{label}-trial{trial}")
}

fn run_one(cfg: &ExperimentConfig, method: &MethodConfig, seed: u64, hash: &str) -> anyhow::Result<RunRecord> {
    let (problem, grid) = cfg.build()?;
    let e = &cfg.experiment;
    let mut record = match method.design.design() {
        None => optimizer::random_search(&problem, &grid, e.budget, method.n0, seed)?,
        Some(design) => {
            let loop_cfg = LoopConfig {
                budget: e.budget,
                design: DesignSpec::new(design, method.n0, seed),
                train: cfg.train,
                anneal: cfg.anneal,
                k: e.rank,
                seed,
                scale_qubo: e.scale_qubo,
            };
            optimizer::run(&problem, &grid, &loop_cfg)?
        }
    };
    record.label = method.label.clone();
    record.config_hash = hash.to_string();
    Ok(record)
}

/// Runs every method for every trial and writes all artifacts under `out`.
///
/// Returns `Err(Runtime)` after writing partial artifacts and a failure
/// manifest if any run failed.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, parallel: Option<usize>) -> CliResult<Outcome> {
    cfg.validate().map_err(CliError::config)?;
    let hash = cfg.hash();
    let e = &cfg.experiment;
    let threads = parallel.or(e.parallel).unwrap_or(1);
    if threads == 0 {
        return Err(CliError::config(anyhow::anyhow!("--parallel: must be positive")));
    }
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(CliError::runtime)?;
    let resolved = toml::to_string(cfg).context("serializing config").map_err(CliError::runtime)?;
    write_file(&out.join("config.toml"), &resolved).map_err(CliError::runtime)?;

    let jobs: Vec<(usize, usize)> =
        (0..cfg.methods.len()).flat_map(|m| (0..e.trials).map(move |t| (m, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")
        .map_err(CliError::runtime)?;
    let results: Vec<anyhow::Result<RunRecord>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, t)| {
                let method = &cfg.methods[m];
                let seed = trial_seed(e.seed, t);
                log::info!("running {} trial {t} (seed {seed})", method.label);
                let record = run_one(cfg, method, seed, &hash)?;
                write_run_artifacts(out, &record, t)?;
                Ok(record)
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut per_method: Vec<Vec<RunRecord>> = vec![Vec::new(); cfg.methods.len()];
    for (&(m, t), result) in jobs.iter().zip(results) {
        match result {
            Ok(r) => {
                per_method[m].push(r.clone());
                records.push(r);
            }
            Err(err) => {
                log::error!("{} trial {t} failed: {err:#}", cfg.methods[m].label);
                failures.push(Failure {
                    label: cfg.methods[m].label.clone(),
                    trial: t,
                    seed: trial_seed(e.seed, t),
                    error: format!("{err:#}"),
                });
            }
        }
    }

    let mut summaries = Vec::new();
    for (method, recs) in cfg.methods.iter().zip(&per_method) {
        if recs.is_empty() {
            continue;
        }
        let summary = aggregate(recs)
            .with_context(|| format!("aggregating {}", method.label))
            .map_err(CliError::runtime)?;
        write_file(
            &out.join("mean_trajectories").join(format!("{}.csv", method.label)),
            &mean_trajectory_csv(&method.label, &summary, &hash),
        )
        .map_err(CliError::runtime)?;
        summaries.push((method.label.clone(), summary));
    }
    let baseline_final = cfg
        .baseline()
        .and_then(|b| summaries.iter().find(|(l, _)| l == b))
        .map(|(_, s)| s.final_mean);
    let rows: Vec<SummaryRow> = summaries
        .into_iter()
        .map(|(method, summary)| {
            let is_baseline = cfg.baseline() == Some(method.as_str());
            let delta_vs_baseline = match (is_baseline, baseline_final) {
                (false, Some(b)) => Some(summary.final_mean - b),
                _ => None,
            };
            SummaryRow { method, summary, delta_vs_baseline }
        })
        .collect();
    write_file(&out.join("summary.csv"), &summary_csv(&rows, &hash, cfg)).map_err(CliError::runtime)?;

    if !failures.is_empty() {
        let manifest = serde_json::to_string_pretty(&failures).expect("failures serialize");
        write_file(&out.join("failures.json"), &manifest).map_err(CliError::runtime)?;
        return Err(CliError::Runtime(anyhow::anyhow!(
            "{} of {} runs failed; see {}",
            failures.len(),
            jobs.len(),
            out.join("failures.json").display()
        )));
    }
    Ok(Outcome { records, failures, rows, config_hash: hash })
}

fn write_run_artifacts(out: &Path, record: &RunRecord, trial: usize) -> anyhow::Result<()> {
    let stem = artifact_stem(&record.label, trial);
    let json = serde_json::to_string_pretty(record).context("serializing record")?;
    write_file(&out.join("records").join(format!("{stem}.json")), &json)?;
    let csv = format!(
        "# label={} trial={trial} seed={} n0={} config_hash={}\n{}",
        record.label,
        record.seed,
        record.n0,
        record.config_hash,
        record.trajectory_csv()
    );
    write_file(&out.join("trajectories").join(format!("{stem}.csv")), &csv)
}

pub fn mean_trajectory_csv(label: &str, s: &Summary, hash: &str) -> String {
    let mut out = format!(
        "# label={label} trials={} n0={} config_hash={hash}\nevaluation,mean_best,std_best\n",
        s.trials, s.n0
    );
    for (i, (m, sd)) in s.mean_trajectory.iter().zip(&s.std_trajectory).enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, fmt_f64(*m), fmt_f64(*sd)));
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow], hash: &str, cfg: &ExperimentConfig) -> String {
    let e = &cfg.experiment;
    let mut out = format!(
        "# config_hash={hash} base_seed={} trials={} budget={} baseline={}\n{SUMMARY_HEADER}\n",
        e.seed,
        e.trials,
        e.budget,
        cfg.baseline().unwrap_or("")
    );
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Loads every `records/*.json` file under an experiment directory, sorted by path.
pub fn load_records(dir: &Path) -> anyhow::Result<Vec<(PathBuf, RunRecord)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))?;
            let r: RunRecord =
                serde_json::from_str(&text).with_context(|| format!("cannot parse {}", p.display()))?;
            Ok((p, r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(final_mean: f64) -> Summary {
        Summary {
            trials: 2,
            budget: 3,
            n0: 1,
            mean_trajectory: vec![3.0, 2.0, final_mean],
            std_trajectory: vec![0.0; 3],
            initial_mean: 3.0,
            initial_std: 0.5,
            final_mean,
            final_std: 0.25,
            gain: final_mean - 3.0,
        }
    }

    #[test]
    fn seeds_are_paired_across_methods() {
        assert_eq!(trial_seed(10, 0), 10);
        assert_eq!(trial_seed(10, 3), 13);
        assert_eq!(trial_seed(u64::MAX, 1), 0);
    }

    #[test]
    fn baseline_delta_is_blank() {
        let base = SummaryRow { method: "u".into(), summary: summary(1.0), delta_vs_baseline: None };
        let other = SummaryRow { method: "l".into(), summary: summary(0.5), delta_vs_baseline: Some(-0.5) };
        assert_eq!(base.csv_line(), "u,2,1,3.0,0.5,1.0,0.25,-2.0,");
        assert_eq!(other.csv_line(), "l,2,1,3.0,0.5,0.5,0.25,-2.5,-0.5");
        assert_eq!(SUMMARY_HEADER.split(',').count(), other.csv_line().split(',').count());
    }

    #[test]
    fn mean_trajectory_layout() {
        let csv = mean_trajectory_csv("u", &summary(1.0), "abc");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# label=u trials=2 n0=1 config_hash=abc");
        assert_eq!(lines[1], "evaluation,mean_best,std_best");
        assert_eq!(lines[4], "3,1.0,0.0");
        assert_eq!(lines.len(), 5);
    }
}
