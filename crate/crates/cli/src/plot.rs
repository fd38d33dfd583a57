//! Mean best-so-far curves from trajectory CSVs.
//!
//! Accepts per-trial files (`index,raw,best`) and mean files
//! (`evaluation,mean_best,std_best`). Per-trial files are grouped by the
//! `label=` tag of their comment line, falling back to the file stem without
//! its `-trial<k>` suffix, and averaged per evaluation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use fmqa::optimizer::fmt_f64;

use crate::svg::{self, Series, PALETTE};
use crate::{write_file, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Svg,
    Csv,
}

/// One parsed trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: String,
    pub n0: Option<usize>,
    pub best: Vec<f64>,
}

fn tag<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    comment
        .trim_start_matches('#')
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

fn stem_label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match stem.rfind("-trial") {
        Some(i) if stem[i + 6..].chars().all(|c| c.is_ascii_digit()) && i + 6 < stem.len() => stem[..i].to_string(),
        _ => stem,
    }
}

pub fn parse_trajectory(text: &str, path: &Path) -> anyhow::Result<Trajectory> {
    let mut label = None;
    let mut n0 = None;
    let mut column = None;
    let mut best = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            label = label.or_else(|| tag(line, "label").map(str::to_string));
            if let Some(v) = tag(line, "n0") {
                n0 = Some(v.parse().with_context(|| format!("line {line_no}: bad n0 tag"))?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match column {
            None => {
                let idx = ["best", "mean_best"].iter().find_map(|name| fields.iter().position(|f| f == name));
                column = Some(idx.with_context(|| format!("line {line_no}: header lacks a best or mean_best column"))?);
            }
            Some(c) => {
                let v: f64 = fields
                    .get(c)
                    .with_context(|| format!("line {line_no}: missing column {}", c + 1))?
                    .parse()
                    .with_context(|| format!("line {line_no}: not a number"))?;
                best.push(v);
            }
        }
    }
    if best.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(Trajectory { label: label.unwrap_or_else(|| stem_label(path)), n0, best })
}

fn collect_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let dir = if p.join("trajectories").is_dir() { p.join("trajectories") } else { p.clone() };
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                .with_context(|| format!("cannot read {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Mean curve per label, in label order.
pub fn mean_curves(trajectories: &[Trajectory]) -> anyhow::Result<Vec<(String, Vec<f64>)>> {
    let len = trajectories.first().context("no trajectories")?.best.len();
    let mut groups: BTreeMap<&str, Vec<&Trajectory>> = BTreeMap::new();
    for t in trajectories {
        if t.best.len() != len {
            bail!("trajectory lengths differ: {} has {} rows, expected {len}", t.label, t.best.len());
        }
        groups.entry(&t.label).or_default().push(t);
    }
    Ok(groups
        .into_iter()
        .map(|(label, ts)| {
            let mean = (0..len).map(|i| ts.iter().map(|t| t.best[i]).sum::<f64>() / ts.len() as f64).collect();
            (label.to_string(), mean)
        })
        .collect())
}

/// Shading edge shared by all inputs; the smallest if they disagree.
fn common_n0(trajectories: &[Trajectory]) -> Option<usize> {
    let tags: Vec<usize> = trajectories.iter().filter_map(|t| t.n0).collect();
    let min = tags.iter().copied().min()?;
    if tags.iter().any(|&n| n != min) {
        log::warn!("inputs disagree on the initial phase length; shading up to {min}");
    }
    Some(min)
}

pub fn curves_csv(curves: &[(String, Vec<f64>)]) -> String {
    let mut out = String::from("evaluation");
    for (label, _) in curves {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    let len = curves.first().map_or(0, |c| c.1.len());
    for i in 0..len {
        out.push_str(&(i + 1).to_string());
        for (_, c) in curves {
            out.push(',');
            out.push_str(&fmt_f64(c[i]));
        }
        out.push('\n');
    }
    out
}

pub fn curves_svg(curves: &[(String, Vec<f64>)], n0: Option<usize>) -> String {
    let series: Vec<Series> = curves
        .iter()
        .enumerate()
        .map(|(k, (label, c))| Series {
            label: label.clone(),
            color: PALETTE[k % PALETTE.len()].to_string(),
            points: c.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect(),
        })
        .collect();
    svg::line_plot(
        "Best value found",
        "number of function evaluations",
        "best value",
        &series,
        n0.map(|n| n as f64),
    )
}

/// Writes `best.svg` or `best.csv` into `out` and returns its path.
pub fn plot(inputs: &[PathBuf], out: &Path, format: Format) -> CliResult<PathBuf> {
    if inputs.is_empty() {
        return Err(CliError::config(anyhow::anyhow!("plot: no trajectory paths given")));
    }
    let files = collect_files(inputs).map_err(CliError::runtime)?;
    let mut trajectories = Vec::with_capacity(files.len());
    for f in &files {
        let text = std::fs::read_to_string(f)
            .with_context(|| format!("cannot read {}", f.display()))
            .map_err(CliError::runtime)?;
        let t = parse_trajectory(&text, f)
            .with_context(|| format!("{}", f.display()))
            .map_err(CliError::config)?;
        trajectories.push(t);
    }
    let curves = mean_curves(&trajectories).map_err(CliError::config)?;
    let (name, body) = match format {
        Format::Svg => ("best.svg", curves_svg(&curves, common_n0(&trajectories))),
        Format::Csv => ("best.csv", curves_csv(&curves)),
    };
    let path = out.join(name);
    write_file(&path, &body).map_err(CliError::runtime)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(label: &str, best: &[f64]) -> Trajectory {
        Trajectory { label: label.into(), n0: Some(2), best: best.to_vec() }
    }

    #[test]
    fn parses_both_layouts() {
        let per_trial = "# label=lhs trial=0 seed=1 n0=8 config_hash=x\nindex,raw,best\n1,3.0,3.0\n2,1.5,1.5\n";
        let t = parse_trajectory(per_trial, Path::new("a.csv")).unwrap();
        assert_eq!(t, Trajectory { label: "lhs".into(), n0: Some(8), best: vec![3.0, 1.5] });
        let mean = "evaluation,mean_best,std_best\n1,2.0,0.1\n";
        let t = parse_trajectory(mean, Path::new("dir/sobol.csv")).unwrap();
        assert_eq!((t.label.as_str(), t.n0, t.best), ("sobol", None, vec![2.0]));
    }

    #[test]
    fn label_from_stem() {
        assert_eq!(stem_label(Path::new("x/uniform-trial12.csv")), "uniform");
        assert_eq!(stem_label(Path::new("x/my-trial.csv")), "my-trial");
        assert_eq!(stem_label(Path::new("x/a-trialx.csv")), "a-trialx");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_trajectory("index,raw,best\n1,2,zz\n", Path::new("a.csv")).unwrap_err();
        assert!(format!("{err:#}").contains("line 2"));
        assert!(parse_trajectory("a,b\n1,2\n", Path::new("a.csv")).is_err());
    }

    #[test]
    fn averages_per_label() {
        let curves = mean_curves(&[traj("a", &[4.0, 2.0]), traj("b", &[1.0, 1.0]), traj("a", &[2.0, 2.0])]).unwrap();
        assert_eq!(curves, vec![("a".into(), vec![3.0, 2.0]), ("b".into(), vec![1.0, 1.0])]);
        assert_eq!(curves_csv(&curves), "evaluation,a,b\n1,3.0,1.0\n2,2.0,1.0\n");
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(mean_curves(&[traj("a", &[1.0, 2.0]), traj("b", &[1.0])]).is_err());
    }

    #[test]
    fn flat_curve_is_horizontal() {
        let svg = curves_svg(&[("a".into(), vec![5.0; 4])], None);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]));
    }
}
