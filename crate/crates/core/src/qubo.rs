//! QUBO matrices built from FM parameters, plus the one-hot penalty.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::encoding::DiscretizationGrid;
use crate::surrogate::FmParams;
use crate::{Error, Result};

/// One-hot block structure carried by a penalized matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotBlocks {
    pub n_vars: usize,
    pub levels: usize,
}

impl OneHotBlocks {
    pub fn is_feasible(&self, bits: &[u8]) -> bool {
        bits.len() == self.n_vars * self.levels
            && bits.chunks(self.levels).all(|b| b.iter().map(|&x| x as usize).sum::<usize>() == 1)
    }
}

/// Dense upper-triangular QUBO matrix.
///
/// The diagonal holds linear terms and `Q[i][j]` for `i < j` the couplings;
/// the strict lower triangle is always zero. `offset` collects constants
/// (the FM bias and penalty constants) that do not affect the minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboMatrix {
    n: usize,
    q: Vec<f64>,
    offset: f64,
    blocks: Option<OneHotBlocks>,
}

impl QuboMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, q: vec![0.0; n * n], offset: 0.0, blocks: None }
    }

    /// Builds a matrix from a dense row-major `n x n` array, folding the lower
    /// triangle onto the upper one.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, actual: dense.len() });
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.add(i, j, dense[i * n + j])?;
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    pub fn blocks(&self) -> Option<OneHotBlocks> {
        self.blocks
    }

    /// Entry `(i, j)` of the canonical form; `get(i, j) == 0` for `i > j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    /// Adds `value` at `(min(i,j), max(i,j))`.
    pub fn add(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: i.max(j) + 1 });
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("QUBO entry ({i}, {j})")));
        }
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.q[a * self.n + b] += value;
        Ok(())
    }

    /// Row-major symmetric coupling matrix with a zero diagonal
    /// (`S[i][j] = Q[min][max]` for `i != j`).
    pub fn symmetric_couplings(&self) -> Vec<f64> {
        let n = self.n;
        let mut s = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = self.get(i, j);
                s[i * n + j] = v;
                s[j * n + i] = v;
            }
        }
        s
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest absolute entry; 0 for the zero matrix.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.q.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Every entry and the offset multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidConfig(format!("scale factor must be positive, got {factor}")));
        }
        let mut out = self.clone();
        out.q.iter_mut().for_each(|v| *v *= factor);
        out.offset *= factor;
        Ok(out)
    }

    /// `sum_{i <= j} Q[i][j] x_i x_j`, offset excluded.
    pub fn energy(&self, x: &[u8]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: x.len() });
        }
        let active: Vec<usize> = (0..self.n).filter(|&i| x[i] != 0).collect();
        let mut e = 0.0;
        for (a, &i) in active.iter().enumerate() {
            let row = &self.q[i * self.n..(i + 1) * self.n];
            for &j in &active[a..] {
                e += row[j];
            }
        }
        Ok(e)
    }

    /// Adds `lambda * sum_j (sum_m x_{j,m} - 1)^2` in QUBO form.
    ///
    /// Per block: diagonal `-lambda`, intra-block couplings `+2 lambda`,
    /// and `lambda` per block added to the offset.
    pub fn augment_penalty(&self, grid: &DiscretizationGrid, lambda_pen: f64) -> Result<Self> {
        if grid.n_bits() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: grid.n_bits() });
        }
        if !lambda_pen.is_finite() {
            return Err(Error::NonFinite("penalty coefficient".into()));
        }
        let mut out = self.clone();
        let levels = grid.levels();
        for var in 0..grid.n_vars() {
            for a in 0..levels {
                let i = grid.bit_index(var, a);
                out.q[i * self.n + i] -= lambda_pen;
                for b in a + 1..levels {
                    let j = grid.bit_index(var, b);
                    out.q[i * self.n + j] += 2.0 * lambda_pen;
                }
            }
        }
        out.offset += grid.n_vars() as f64 * lambda_pen;
        out.blocks = Some(OneHotBlocks { n_vars: grid.n_vars(), levels });
        Ok(out)
    }

    /// Sparse coordinate text: a `# n=<N> offset=<c>` header, then one
    /// `i j value` line per nonzero entry (0-based, `i <= j`).
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# n={} offset={}", self.n, self.offset);
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                if v != 0.0 {
                    let _ = writeln!(out, "{i} {j} {v}");
                }
            }
        }
        out
    }

    /// Parses coordinate text. Without an `n=` header the size is inferred
    /// from the largest index. Entries with `i > j` are folded onto `(j, i)`
    /// and repeated entries are summed.
    pub fn parse_coordinate_text(text: &str, one_based: bool) -> Result<Self> {
        let mut declared_n = None;
        let mut offset = 0.0;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    if let Some(v) = token.strip_prefix("n=") {
                        declared_n = Some(v.parse::<usize>().map_err(|e| Error::Parse {
                            line: line_no,
                            message: format!("bad n: {e}"),
                        })?);
                    } else if let Some(v) = token.strip_prefix("offset=") {
                        offset = v.parse::<f64>().map_err(|e| Error::Parse {
                            line: line_no,
                            message: format!("bad offset: {e}"),
                        })?;
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected `i j value`, found {} fields", fields.len()),
                });
            }
            let parse_index = |s: &str| -> Result<usize> {
                let raw: usize = s.parse().map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("bad index {s:?}: {e}"),
                })?;
                if one_based {
                    raw.checked_sub(1).ok_or(Error::Parse {
                        line: line_no,
                        message: "index 0 in a one-based file".into(),
                    })
                } else {
                    Ok(raw)
                }
            };
            let i = parse_index(fields[0])?;
            let j = parse_index(fields[1])?;
            let v: f64 = fields[2].parse().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad value {:?}: {e}", fields[2]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: line_no, message: "non-finite value".into() });
            }
            entries.push((line_no, i, j, v));
        }
        let inferred = entries.iter().map(|&(_, i, j, _)| i.max(j) + 1).max().unwrap_or(0);
        let n = declared_n.unwrap_or(inferred);
        if n == 0 {
            return Err(Error::Parse { line: 0, message: "empty matrix".into() });
        }
        let mut m = Self::zeros(n);
        m.offset = offset;
        for (line, i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::Parse { line, message: format!("index out of range for n={n}") });
            }
            m.add(i, j, v)?;
        }
        Ok(m)
    }
}

/// QUBO of an FM: `Q[i][i] = w_i`, `Q[i][j] = <v_i, v_j>` for `i < j`, offset `w0`.
pub fn from_fm(params: &FmParams) -> QuboMatrix {
    let n = params.n_bits();
    let mut m = QuboMatrix::zeros(n);
    m.offset = params.omega0();
    let omega = params.omega();
    for i in 0..n {
        let vi = params.v_row(i);
        let row = &mut m.q[i * n..(i + 1) * n];
        row[i] = omega[i];
        for j in i + 1..n {
            row[j] = vi.iter().zip(params.v_row(j)).map(|(a, b)| a * b).sum();
        }
    }
    m
}

/// Free function form of [`QuboMatrix::energy`].
pub fn energy(q: &QuboMatrix, x: &[u8]) -> Result<f64> {
    q.energy(x)
}

/// Penalty weight `8 * max(1, floor(max|f| + 0.5))`.
pub fn compute_lambda_pen(history_max_abs: f64) -> Result<f64> {
    if !history_max_abs.is_finite() {
        return Err(Error::NonFinite("objective history maximum".into()));
    }
    if history_max_abs < 0.0 {
        return Err(Error::InvalidConfig("history maximum must be non-negative".into()));
    }
    Ok(8.0 * (history_max_abs + 0.5).floor().max(1.0))
}
