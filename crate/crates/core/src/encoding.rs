//! Discretization grids and one-hot encoding.
//!
//! Bits are laid out in contiguous blocks: bit `j * M + m` is level `m` of
//! variable `j` (both zero-based).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Per-variable bounds with `M` equally spaced levels on each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationGrid {
    levels: usize,
    bounds: Vec<(f64, f64)>,
}

impl DiscretizationGrid {
    pub fn new(levels: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 levels, got {levels}")));
        }
        if bounds.is_empty() {
            return Err(Error::InvalidGrid("no variables".into()));
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidGrid(format!("variable {j} has non-finite bounds")));
            }
            if lo >= hi {
                return Err(Error::InvalidGrid(format!(
                    "variable {j}: lower bound {lo} is not below upper bound {hi}"
                )));
            }
        }
        Ok(Self { levels, bounds })
    }

    /// Same bounds for every variable.
    pub fn uniform(n_vars: usize, levels: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(levels, vec![(lo, hi); n_vars])
    }

    pub fn n_vars(&self) -> usize {
        self.bounds.len()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Total bit count `n_x * M`.
    pub fn n_bits(&self) -> usize {
        self.bounds.len() * self.levels
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    #[inline]
    pub fn bit_index(&self, var: usize, level: usize) -> usize {
        var * self.levels + level
    }

    /// Number of grid points `M^n_x`, or `None` if it overflows `u128`.
    pub fn total_points(&self) -> Option<u128> {
        (self.levels as u128).checked_pow(self.n_vars() as u32)
    }

    /// Continuous value of level `m` of variable `j`. Endpoints are exact.
    pub fn value(&self, var: usize, level: usize) -> f64 {
        let (lo, hi) = self.bounds[var];
        if level == 0 {
            lo
        } else if level == self.levels - 1 {
            hi
        } else {
            lo + (level as f64 / (self.levels - 1) as f64) * (hi - lo)
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_bits() {
            return Err(Error::LengthMismatch { expected: self.n_bits(), actual: len });
        }
        Ok(())
    }
}

/// Integer level per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexVector(pub Vec<usize>);

impl IndexVector {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, grid: &DiscretizationGrid) -> Result<()> {
        if self.0.len() != grid.n_vars() {
            return Err(Error::LengthMismatch { expected: grid.n_vars(), actual: self.0.len() });
        }
        for (var, &index) in self.0.iter().enumerate() {
            if index >= grid.levels() {
                return Err(Error::IndexOutOfRange { var, index, levels: grid.levels() });
            }
        }
        Ok(())
    }
}

/// A bit vector with exactly one active bit per block.
///
/// Serialized as a compact `"0100..."` string.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct OneHotVector {
    bits: Vec<u8>,
}

impl OneHotVector {
    /// Wraps raw bits after checking the one-hot invariant.
    pub fn from_bits(bits: Vec<u8>, grid: &DiscretizationGrid) -> Result<Self> {
        grid.check_len(bits.len())?;
        for (block, chunk) in bits.chunks(grid.levels()).enumerate() {
            let active = chunk.iter().filter(|&&b| b != 0).count();
            if active != 1 || chunk.iter().any(|&b| b > 1) {
                return Err(Error::InvalidOneHot { block, active });
            }
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Active level in each block.
    pub fn indices(&self, levels: usize) -> IndexVector {
        IndexVector(
            self.bits
                .chunks(levels)
                .map(|c| c.iter().position(|&b| b == 1).expect("one-hot invariant"))
                .collect(),
        )
    }
}

impl fmt::Debug for OneHotVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("OneHot(")?;
        for &b in &self.bits {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

impl Serialize for OneHotVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text: String = self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        s.serialize_str(&text)
    }
}

impl<'de> Deserialize<'de> for OneHotVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let bits = text
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(serde::de::Error::custom(format!("invalid bit character {other:?}"))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { bits })
    }
}

pub fn encode(q: &IndexVector, grid: &DiscretizationGrid) -> Result<OneHotVector> {
    q.validate(grid)?;
    let mut bits = vec![0u8; grid.n_bits()];
    for (var, &level) in q.0.iter().enumerate() {
        bits[grid.bit_index(var, level)] = 1;
    }
    Ok(OneHotVector { bits })
}

/// The decoding map from a valid one-hot vector to the continuous design point.
pub fn decode(x: &OneHotVector, grid: &DiscretizationGrid) -> Result<Vec<f64>> {
    grid.check_len(x.len())?;
    let q = x.indices(grid.levels());
    Ok(grid_point(&q, grid))
}

/// Continuous design point of an index vector (assumed valid).
pub fn grid_point(q: &IndexVector, grid: &DiscretizationGrid) -> Vec<f64> {
    q.0.iter().enumerate().map(|(j, &m)| grid.value(j, m)).collect()
}

/// Blockwise decoding of arbitrary sampler output.
///
/// One active bit: its level. Several: the lowest active level. None: a level
/// drawn uniformly from `rng`.
pub fn repair_decode<R: Rng + ?Sized>(
    raw_bits: &[u8],
    grid: &DiscretizationGrid,
    rng: &mut R,
) -> Result<IndexVector> {
    grid.check_len(raw_bits.len())?;
    let indices = raw_bits
        .chunks(grid.levels())
        .map(|block| match block.iter().position(|&b| b != 0) {
            Some(m) => m,
            None => rng.random_range(0..grid.levels()),
        })
        .collect();
    Ok(IndexVector(indices))
}

pub fn validate_onehot(raw_bits: &[u8], grid: &DiscretizationGrid) -> Result<bool> {
    grid.check_len(raw_bits.len())?;
    Ok(raw_bits
        .chunks(grid.levels())
        .all(|block| block.iter().map(|&b| b as usize).sum::<usize>() == 1))
}
