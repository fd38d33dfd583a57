//! Sobol' points with Joe–Kuo direction numbers and hash-based Owen scrambling.
//!
//! Points are generated as 32-bit integers in Gray-code order; `x / 2^32`
//! is the coordinate in `[0, 1)`. The first dimension is the van der Corput
//! sequence, dimensions 2..=1024 come from the bundled `new-joe-kuo-6`
//! parameter table.

use std::sync::OnceLock;

use crate::rng::mix64;
use crate::{Error, Result};

const TABLE: &str = include_str!("joe_kuo_1024.txt");

pub const BITS: usize = 32;

struct Directions {
    dims: Vec<[u32; BITS]>,
}

fn directions() -> &'static Directions {
    static DIRS: OnceLock<Directions> = OnceLock::new();
    DIRS.get_or_init(|| {
        let mut dims = Vec::with_capacity(1024);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (31 - k);
        }
        dims.push(first);
        for line in TABLE.lines().skip(1) {
            let fields: Vec<u32> =
                line.split_whitespace().map(|f| f.parse().expect("direction table")).collect();
            let (s, a) = (fields[1] as usize, fields[2]);
            let m = &fields[3..3 + s];
            let mut v = [0u32; BITS];
            for k in 0..s.min(BITS) {
                v[k] = m[k] << (31 - k);
            }
            for k in s..BITS {
                let mut value = v[k - s] ^ (v[k - s] >> s);
                for i in 1..s {
                    if (a >> (s - 1 - i)) & 1 == 1 {
                        value ^= v[k - i];
                    }
                }
                v[k] = value;
            }
            dims.push(v);
        }
        Directions { dims }
    })
}

/// Number of dimensions in the bundled table.
pub fn max_dimensions() -> usize {
    directions().dims.len()
}

/// Unscrambled points: `points[t][j]` is coordinate `j` of point `t`.
pub fn points(n_dims: usize, n_points: usize) -> Result<Vec<Vec<u32>>> {
    let dirs = directions();
    if n_dims > dirs.dims.len() {
        return Err(Error::Capacity {
            what: "Sobol' dimension",
            requested: n_dims,
            limit: dirs.dims.len(),
        });
    }
    if n_points as u64 > 1u64 << BITS {
        return Err(Error::Capacity {
            what: "Sobol' sequence length",
            requested: n_points,
            limit: u32::MAX as usize,
        });
    }
    let mut out = Vec::with_capacity(n_points);
    let mut x = vec![0u32; n_dims];
    for t in 0..n_points {
        if t > 0 {
            // Gray-code update: flip the direction number of the lowest zero bit of t-1.
            let c = (t - 1).trailing_ones() as usize;
            for (j, xj) in x.iter_mut().enumerate() {
                *xj ^= dirs.dims[j][c];
            }
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// Nested uniform (Owen) scrambling of a 32-bit coordinate.
///
/// The flip applied to digit `k` is a pseudo-random function of `seed`, `k`
/// and the `k` preceding digits, i.e. one random permutation per node of the
/// binary digit tree. Points sharing a prefix keep sharing it, so every
/// elementary interval maps bijectively onto an interval of the same size.
pub fn owen_scramble(x: u32, seed: u64) -> u32 {
    let mut out = 0u32;
    for k in 0..BITS {
        let prefix = if k == 0 { 0 } else { (x >> (BITS - k)) as u64 };
        let node = ((k as u64) << 32) | prefix;
        let flip = (mix64(seed ^ mix64(node)) >> 63) as u32;
        let bit = (x >> (BITS - 1 - k)) & 1;
        out |= (bit ^ flip) << (BITS - 1 - k);
    }
    out
}

/// Per-coordinate Owen-scrambled points; each dimension gets its own tree.
pub fn scrambled_points(n_dims: usize, n_points: usize, seed: u64) -> Result<Vec<Vec<u32>>> {
    let mut pts = points(n_dims, n_points)?;
    let dim_seeds: Vec<u64> = (0..n_dims as u64).map(|j| mix64(mix64(seed) ^ j)).collect();
    for p in &mut pts {
        for (xj, &s) in p.iter_mut().zip(&dim_seeds) {
            *xj = owen_scramble(*xj, s);
        }
    }
    Ok(pts)
}

pub fn to_unit(x: u32) -> f64 {
    x as f64 / 4_294_967_296.0
}
