//! Black-box objectives, evaluation accounting and the synthetic suite.
//!
//! The optimizer always minimizes the internal value; for `Maximize`
//! problems that is the negated raw value. Raw values are kept in the
//! problem's natural units for reporting.

use std::fmt;
use std::fs;
use std::io::{Read, Seek, SeekFrom, Write};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::encoding::{DiscretizationGrid, IndexVector};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Minimize,
    Maximize,
}

impl Direction {
    /// Internal (minimization) value from a raw value.
    pub fn to_internal(self, raw: f64) -> f64 {
        match self {
            Direction::Minimize => raw,
            Direction::Maximize => -raw,
        }
    }

    /// Raw value from an internal value.
    pub fn to_natural(self, internal: f64) -> f64 {
        self.to_internal(internal)
    }

    /// Whether raw value `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> std::result::Result<f64, String> + Send + Sync>;

#[derive(Clone)]
pub struct BlackBoxProblem {
    name: String,
    bounds: Vec<(f64, f64)>,
    direction: Direction,
    evaluator: Evaluator,
}

impl fmt::Debug for BlackBoxProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxProblem")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("direction", &self.direction)
            .finish_non_exhaustive()
    }
}

impl BlackBoxProblem {
    pub fn new(
        name: impl Into<String>,
        bounds: Vec<(f64, f64)>,
        direction: Direction,
        evaluator: Evaluator,
    ) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidConfig("problem has no variables".into()));
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!("variable {j}: invalid bounds ({lo}, {hi})")));
            }
        }
        Ok(Self { name: name.into(), bounds, direction, evaluator })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_vars(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Grid with `levels` points per variable over the problem's box.
    pub fn grid(&self, levels: usize) -> Result<DiscretizationGrid> {
        DiscretizationGrid::new(levels, self.bounds.clone())
    }

    /// Calls the evaluator directly, outside any ledger.
    pub fn raw_value(&self, z: &[f64]) -> std::result::Result<f64, String> {
        (self.evaluator)(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub point: Vec<f64>,
    /// Value in natural units; for failures the penalty converted back.
    pub raw: f64,
    pub internal: f64,
    pub failed: bool,
    pub clipped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Append-only record of every evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalLedger {
    entries: Vec<Evaluation>,
}

impl EvalLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Evaluation] {
        &self.entries
    }

    pub fn raw_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.raw).collect()
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.failed).count()
    }

    /// Best-so-far in natural units after each evaluation.
    pub fn best_trajectory(&self, direction: Direction) -> Vec<f64> {
        best_so_far(&self.raw_values(), direction)
    }

    /// Worst successful internal value plus one spread unit.
    pub fn failure_penalty(&self) -> f64 {
        let ok: Vec<f64> = self.entries.iter().filter(|e| !e.failed).map(|e| e.internal).collect();
        let worst = ok.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best = ok.iter().copied().fold(f64::INFINITY, f64::min);
        match ok.len() {
            0 => 1.0,
            1 => worst + 1.0,
            _ => worst + (worst - best).max(f64::MIN_POSITIVE),
        }
    }
}

/// Running best of `values` in the given direction.
pub fn best_so_far(values: &[f64], direction: Direction) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let next = match out.last() {
            Some(&b) if !direction.better(v, b) => b,
            _ => v,
        };
        out.push(next);
    }
    out
}

/// Evaluates `z`, appends to `ledger` and returns the internal value.
///
/// Out-of-bounds coordinates are clipped. Evaluator errors and non-finite
/// outputs are recorded as failures with the ledger's penalty value.
pub fn evaluate(problem: &BlackBoxProblem, z: &[f64], ledger: &mut EvalLedger) -> Result<f64> {
    if z.len() != problem.n_vars() {
        return Err(Error::LengthMismatch { expected: problem.n_vars(), actual: z.len() });
    }
    let mut clipped = false;
    let point: Vec<f64> = z
        .iter()
        .zip(problem.bounds())
        .map(|(&v, &(lo, hi))| {
            let c = if v.is_nan() { lo } else { v.clamp(lo, hi) };
            clipped |= c != v;
            c
        })
        .collect();
    if clipped {
        log::warn!("{}: design point clipped to bounds", problem.name());
    }
    let outcome = match problem.raw_value(&point) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(format!("non-finite objective value {v}")),
        Err(e) => Err(e),
    };
    let direction = problem.direction();
    let entry = match outcome {
        Ok(raw) => Evaluation {
            point,
            raw,
            internal: direction.to_internal(raw),
            failed: false,
            clipped,
            message: None,
        },
        Err(message) => {
            log::warn!("{}: evaluation {} failed: {message}", problem.name(), ledger.count());
            let internal = ledger.failure_penalty();
            Evaluation {
                point,
                raw: direction.to_natural(internal),
                internal,
                failed: true,
                clipped,
                message: Some(message),
            }
        }
    };
    let internal = entry.internal;
    ledger.entries.push(entry);
    Ok(internal)
}

/// Synthetic benchmark functions, all minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticFunction {
    /// `sum z_i^2` on `[-5.12, 5.12]`.
    Sphere,
    /// `sum 10^(3 i / (n-1)) y_i^2` with `y = R z`, `R` a fixed random rotation, on `[-5, 5]`.
    Ellipsoid,
    /// `10 n + sum (z_i^2 - 10 cos(2 pi z_i))` on `[-5.12, 5.12]`.
    Rastrigin,
    /// `10 sum t(z_i / 10)` on `[0, 10]`, `t(u) = u - 0.8` for `u <= 0.8`,
    /// `-(u - 0.8) / 0.2` above. The slope leads to `z = 0` (value `-8` per
    /// variable) while the global minimum `-10` per variable sits at `z = 10`.
    Trap,
}

pub const SUITE_DIMENSIONS: [usize; 3] = [5, 17, 32];

impl SyntheticFunction {
    pub const ALL: [SyntheticFunction; 4] = [
        SyntheticFunction::Sphere,
        SyntheticFunction::Ellipsoid,
        SyntheticFunction::Rastrigin,
        SyntheticFunction::Trap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticFunction::Sphere => "sphere",
            SyntheticFunction::Ellipsoid => "ellipsoid",
            SyntheticFunction::Rastrigin => "rastrigin",
            SyntheticFunction::Trap => "trap",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            SyntheticFunction::Sphere | SyntheticFunction::Rastrigin => (-5.12, 5.12),
            SyntheticFunction::Ellipsoid => (-5.0, 5.0),
            SyntheticFunction::Trap => (0.0, 10.0),
        }
    }

    pub fn is_separable(self) -> bool {
        self != SyntheticFunction::Ellipsoid
    }

    /// Per-coordinate term of a separable function.
    fn term(self, z: f64) -> f64 {
        match self {
            SyntheticFunction::Sphere => z * z,
            SyntheticFunction::Rastrigin => {
                z * z - 10.0 * (2.0 * std::f64::consts::PI * z).cos() + 10.0
            }
            // 10 t(z / 10), expanded so the end points are exact.
            SyntheticFunction::Trap => {
                if z <= 8.0 {
                    z - 8.0
                } else {
                    -5.0 * (z - 8.0)
                }
            }
            SyntheticFunction::Ellipsoid => unreachable!("not separable"),
        }
    }

    /// Continuous-box global minimum value.
    pub fn continuous_minimum(self, n_vars: usize) -> f64 {
        match self {
            SyntheticFunction::Trap => -10.0 * n_vars as f64,
            _ => 0.0,
        }
    }

    pub fn problem(self, n_vars: usize) -> BlackBoxProblem {
        let bounds = vec![self.bounds(); n_vars];
        let evaluator: Evaluator = match self {
            SyntheticFunction::Ellipsoid => {
                let rotation = Arc::new(rotation_matrix(n_vars, 0x5eed_e111 ^ n_vars as u64));
                let scales: Vec<f64> = (0..n_vars)
                    .map(|i| {
                        let e = if n_vars > 1 { 3.0 * i as f64 / (n_vars - 1) as f64 } else { 0.0 };
                        10f64.powf(e)
                    })
                    .collect();
                Arc::new(move |z: &[f64]| {
                    Ok((0..z.len())
                        .map(|i| {
                            let y: f64 = rotation[i * z.len()..(i + 1) * z.len()]
                                .iter()
                                .zip(z)
                                .map(|(r, x)| r * x)
                                .sum();
                            scales[i] * y * y
                        })
                        .sum())
                })
            }
            f => Arc::new(move |z: &[f64]| Ok(z.iter().map(|&x| f.term(x)).sum())),
        };
        BlackBoxProblem::new(format!("{}-{n_vars}", self.name()), bounds, Direction::Minimize, evaluator)
            .expect("synthetic bounds are valid")
    }

    /// Exact minimum over the grid for separable functions.
    pub fn grid_minimum(self, grid: &DiscretizationGrid) -> Option<(IndexVector, f64)> {
        if !self.is_separable() {
            return None;
        }
        let mut idx = Vec::with_capacity(grid.n_vars());
        let mut total = 0.0;
        for j in 0..grid.n_vars() {
            let (m, v) = (0..grid.levels())
                .map(|m| (m, self.term(grid.value(j, m))))
                .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
            idx.push(m);
            total += v;
        }
        Some((IndexVector(idx), total))
    }
}

/// Orthogonal matrix (row-major) from Gram–Schmidt on Gaussian columns.
fn rotation_matrix(n: usize, seed: u64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = seeded(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for r in &rows {
            let d: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(x, a)| *x -= d * a);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows.concat()
}

/// Every synthetic function at every suite dimension.
pub fn synthetic_suite() -> Vec<BlackBoxProblem> {
    SyntheticFunction::ALL
        .into_iter()
        .flat_map(|f| SUITE_DIMENSIONS.into_iter().map(move |n| f.problem(n)))
        .collect()
}

/// Wraps an external command as a black box.
///
/// The design point is written to a temporary file, one value per line; the
/// token `{input}` in `command` is replaced by its path (or the path is
/// appended). The command runs under `sh -c` and must print the objective on
/// the first line of stdout. A nonzero exit, a timeout or unparsable output
/// is an evaluator failure.
pub fn external_adapter(
    name: impl Into<String>,
    command: impl Into<String>,
    bounds: Vec<(f64, f64)>,
    direction: Direction,
    timeout_ms: u64,
) -> Result<BlackBoxProblem> {
    let command = command.into();
    if command.trim().is_empty() {
        return Err(Error::InvalidConfig("external command is empty".into()));
    }
    if timeout_ms == 0 {
        return Err(Error::InvalidConfig("external timeout must be positive".into()));
    }
    let timeout = Duration::from_millis(timeout_ms);
    let evaluator: Evaluator = Arc::new(move |z: &[f64]| run_external(&command, z, timeout));
    BlackBoxProblem::new(name, bounds, direction, evaluator)
}

fn run_external(command: &str, z: &[f64], timeout: Duration) -> std::result::Result<f64, String> {
    let io = |e: std::io::Error| format!("io error: {e}");
    let mut input = tempfile::NamedTempFile::new().map_err(io)?;
    for v in z {
        writeln!(input, "{v:?}").map_err(io)?;
    }
    input.flush().map_err(io)?;
    let path = input.path().to_string_lossy().into_owned();
    let script = if command.contains("{input}") {
        command.replace("{input}", &shell_quote(&path))
    } else {
        format!("{command} {}", shell_quote(&path))
    };
    let mut stdout = tempfile::tempfile().map_err(io)?;
    let mut stderr = tempfile::tempfile().map_err(io)?;
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&script)
        .stdin(Stdio::null())
        .stdout(stdout.try_clone().map_err(io)?)
        .stderr(stderr.try_clone().map_err(io)?)
        .spawn()
        .map_err(|e| format!("failed to start command: {e}"))?;
    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait().map_err(io)? {
            break status;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(format!("timed out after {} ms", timeout.as_millis()));
        }
        std::thread::sleep(Duration::from_millis(2));
    };
    let read_all = |f: &mut fs::File| -> std::result::Result<String, String> {
        let mut s = String::new();
        f.seek(SeekFrom::Start(0)).map_err(io)?;
        f.read_to_string(&mut s).map_err(io)?;
        Ok(s)
    };
    let out = read_all(&mut stdout)?;
    let err = read_all(&mut stderr)?;
    if !status.success() {
        return Err(format!("command exited with {status}; stderr: {}", err.trim()));
    }
    let first = out.lines().next().unwrap_or("").trim();
    first
        .parse::<f64>()
        .map_err(|_| format!("malformed output {first:?}; stderr: {}", err.trim()))
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}
