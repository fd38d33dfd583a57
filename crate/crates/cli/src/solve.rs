//! Standalone annealing of a coordinate-format QUBO file.

use std::path::Path;

use anyhow::Context;
use fmqa::annealer::{brute_force_min, sample, AnnealConfig, SampleResult};
use fmqa::optimizer::fmt_f64;
use fmqa::qubo::QuboMatrix;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub one_based: bool,
    pub anneal: AnnealConfig,
    pub brute_force: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub annealed: SampleResult,
    pub exact: Option<SampleResult>,
}

fn bit_string(bits: &[u8]) -> String {
    bits.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
}

impl Solution {
    /// `key value` lines; energies exclude the constant offset.
    pub fn render(&self) -> String {
        let mut out = format!(
            "energy {}\nstate {}\n",
            fmt_f64(self.annealed.best_energy),
            bit_string(&self.annealed.best_bits)
        );
        if let Some(exact) = &self.exact {
            out.push_str(&format!(
                "brute_force_energy {}\nbrute_force_state {}\nmatches_brute_force {}\n",
                fmt_f64(exact.best_energy),
                bit_string(&exact.best_bits),
                self.annealed.best_energy <= exact.best_energy + 1e-9 * exact.best_energy.abs().max(1.0)
            ));
        }
        out
    }
}

pub fn solve_text(text: &str, opts: &SolveOptions) -> CliResult<Solution> {
    let q = QuboMatrix::parse_coordinate_text(text, opts.one_based).map_err(CliError::config)?;
    opts.anneal.validate().map_err(CliError::config)?;
    let annealed = sample(&q, &opts.anneal).map_err(CliError::runtime)?;
    let exact = if opts.brute_force { Some(brute_force_min(&q).map_err(CliError::runtime)?) } else { None };
    Ok(Solution { annealed, exact })
}

pub fn solve_file(path: &Path, opts: &SolveOptions) -> CliResult<Solution> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(CliError::config)?;
    solve_text(&text, opts).map_err(|e| match e {
        CliError::Config(err) => CliError::Config(err.context(path.display().to_string())),
        other => other,
    })
}
