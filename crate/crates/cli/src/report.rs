//! Activation-coverage reports from run records.
//!
//! For every evaluation with a snapshot, each one-hot bit is placed in one
//! of the buckets 0, 1, 2-9 or >=10 by how many evaluated inputs activated
//! it. Bucket counts are averaged over the records of each method. The plot
//! colors are red, green, blue and black in bucket order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fmqa::initdesign::{bucket_counts, BUCKET_LABELS};
use fmqa::optimizer::{fmt_f64, RunRecord};

use crate::experiment::load_records;
use crate::svg::{self, Layer};
use crate::{write_file, CliError, CliResult};

pub const BUCKET_COLORS: [&str; 4] = ["red", "green", "blue", "black"];
pub const CSV_HEADER: &str = "evaluation,bucket_0,bucket_1,bucket_2_9,bucket_ge10";

/// Mean bucket counts per snapshot evaluation for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodCoverage {
    pub label: String,
    pub n_bits: usize,
    pub n0: usize,
    pub records: usize,
    pub evaluations: Vec<usize>,
    pub mean_buckets: Vec<[f64; 4]>,
}

impl MethodCoverage {
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut out = format!(
            "# label={} records={} n_bits={} n0={} config_hash={config_hash}\n{CSV_HEADER}\n",
            self.label, self.records, self.n_bits, self.n0
        );
        for (e, b) in self.evaluations.iter().zip(&self.mean_buckets) {
            out.push_str(&format!("{e},{},{},{},{}\n", fmt_f64(b[0]), fmt_f64(b[1]), fmt_f64(b[2]), fmt_f64(b[3])));
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let xs: Vec<f64> = self.evaluations.iter().map(|&e| e as f64).collect();
        let layers: Vec<Layer> = (0..4)
            .map(|k| Layer {
                label: format!("active {}", BUCKET_LABELS[k]),
                color: BUCKET_COLORS[k].to_string(),
                values: self.mean_buckets.iter().map(|b| b[k]).collect(),
            })
            .collect();
        svg::stacked_area(
            &format!("Bit activation counts: {}", self.label),
            "number of function evaluations",
            "number of bits",
            &xs,
            &layers,
            Some(self.n0 as f64),
        )
    }
}

#[derive(Debug, Default)]
pub struct ReportOutcome {
    pub methods: Vec<MethodCoverage>,
    /// Records skipped because they carry no snapshots.
    pub missing: Vec<PathBuf>,
    pub written: Vec<PathBuf>,
}

/// Per-evaluation mean bucket counts over records sharing a label. Only
/// evaluations present in every record are kept.
pub fn summarize(label: &str, records: &[&RunRecord]) -> anyhow::Result<MethodCoverage> {
    let first = records.first().context("no records")?;
    let n_bits = first.n_vars * first.levels;
    for r in records {
        if r.n_vars * r.levels != n_bits {
            anyhow::bail!("records for {label} use different encodings");
        }
    }
    let mut by_eval: BTreeMap<usize, (usize, [f64; 4])> = BTreeMap::new();
    for r in records {
        for s in &r.snapshots {
            if s.counts.len() != n_bits {
                anyhow::bail!("snapshot at evaluation {} has {} counts, expected {n_bits}", s.evaluation, s.counts.len());
            }
            let b = bucket_counts(s.counts.iter().map(|&c| c as usize));
            let entry = by_eval.entry(s.evaluation).or_insert((0, [0.0; 4]));
            entry.0 += 1;
            for k in 0..4 {
                entry.1[k] += b[k] as f64;
            }
        }
    }
    let n = records.len();
    let (evaluations, mean_buckets) = by_eval
        .into_iter()
        .filter(|(_, (seen, _))| *seen == n)
        .map(|(e, (_, sums))| (e, sums.map(|s| s / n as f64)))
        .unzip();
    Ok(MethodCoverage { label: label.to_string(), n_bits, n0: first.n0, records: n, evaluations, mean_buckets })
}

/// Expands directories into the record files they contain.
fn collect_records(inputs: &[PathBuf]) -> anyhow::Result<Vec<(PathBuf, RunRecord)>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let dir = if p.join("records").is_dir() { p.join("records") } else { p.clone() };
            out.extend(load_records(&dir)?);
        } else {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let r: RunRecord =
                serde_json::from_str(&text).with_context(|| format!("cannot parse {}", p.display()))?;
            out.push((p.clone(), r));
        }
    }
    Ok(out)
}

/// Writes `<label>.csv` and `<label>.svg` per method into `out`.
pub fn coverage_report(inputs: &[PathBuf], out: &Path) -> CliResult<ReportOutcome> {
    if inputs.is_empty() {
        return Err(CliError::config(anyhow::anyhow!("coverage-report: no record paths given")));
    }
    let loaded = collect_records(inputs).map_err(CliError::runtime)?;
    let mut outcome = ReportOutcome::default();
    let mut groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    let mut hashes: BTreeMap<String, String> = BTreeMap::new();
    for (path, r) in &loaded {
        if r.snapshots.is_empty() {
            log::warn!("{}: record has no activation snapshots, skipped", path.display());
            outcome.missing.push(path.clone());
            continue;
        }
        groups.entry(r.label.clone()).or_default().push(r);
        hashes.entry(r.label.clone()).or_insert_with(|| r.config_hash.clone());
    }
    if groups.is_empty() {
        return Err(CliError::runtime(anyhow::anyhow!("no record carries activation snapshots")));
    }
    for (label, recs) in &groups {
        let cov = summarize(label, recs).map_err(CliError::runtime)?;
        let csv = out.join(format!("{label}.csv"));
        let img = out.join(format!("{label}.svg"));
        write_file(&csv, &cov.to_csv(&hashes[label])).map_err(CliError::runtime)?;
        write_file(&img, &cov.to_svg()).map_err(CliError::runtime)?;
        outcome.written.extend([csv, img]);
        outcome.methods.push(cov);
    }
    Ok(outcome)
}
