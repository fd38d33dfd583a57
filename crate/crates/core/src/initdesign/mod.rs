//! Initial designs over the discretized space and bit-coverage statistics.

pub mod sobol;

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{DiscretizationGrid, IndexVector, OneHotVector};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignMethod {
    Uniform,
    Lhs,
    Sobol,
}

impl DesignMethod {
    pub fn name(self) -> &'static str {
        match self {
            DesignMethod::Uniform => "uniform",
            DesignMethod::Lhs => "lhs",
            DesignMethod::Sobol => "sobol",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub method: DesignMethod,
    pub n_samples: usize,
    pub seed: u64,
}

impl DesignSpec {
    pub fn new(method: DesignMethod, n_samples: usize, seed: u64) -> Self {
        Self { method, n_samples, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("design: n_samples must be positive".into()));
        }
        Ok(())
    }
}

/// Generates the design selected by `spec.method`.
///
/// Logs a warning when complete marginal coverage cannot be guaranteed.
pub fn generate(grid: &DiscretizationGrid, spec: &DesignSpec) -> Result<Vec<IndexVector>> {
    spec.validate()?;
    let m = grid.levels();
    if spec.n_samples < m {
        log::warn!(
            "{} design with N0 = {} < M = {}: complete bit coverage is unattainable",
            spec.method.name(),
            spec.n_samples,
            m
        );
    } else if spec.method == DesignMethod::Sobol && (!m.is_power_of_two() || spec.n_samples != m) {
        log::warn!(
            "Sobol' design with N0 = {}, M = {}: exact coverage needs N0 = M = 2^p",
            spec.n_samples,
            m
        );
    }
    match spec.method {
        DesignMethod::Uniform => Ok(uniform_design(grid, spec)),
        DesignMethod::Lhs => Ok(lhs_design(grid, spec)),
        DesignMethod::Sobol => sobol_design(grid, spec),
    }
}

/// Independent uniform levels for every coordinate.
pub fn uniform_design(grid: &DiscretizationGrid, spec: &DesignSpec) -> Vec<IndexVector> {
    let mut rng = seeded(spec.seed);
    (0..spec.n_samples)
        .map(|_| {
            IndexVector((0..grid.n_vars()).map(|_| rng.random_range(0..grid.levels())).collect())
        })
        .collect()
}

/// Latin hypercube design: one point per stratum per variable, with jitter.
///
/// The continuous coordinate `(pi + u) / N0` is mapped to level
/// `floor(M * s)`; `u` is a 32-bit fraction so the mapping is exact integer
/// arithmetic.
pub fn lhs_design(grid: &DiscretizationGrid, spec: &DesignSpec) -> Vec<IndexVector> {
    let n0 = spec.n_samples;
    let m = grid.levels() as u128;
    let mut rng = seeded(spec.seed);
    let mut out = vec![IndexVector(Vec::with_capacity(grid.n_vars())); n0];
    let mut perm: Vec<usize> = (0..n0).collect();
    for _ in 0..grid.n_vars() {
        perm.shuffle(&mut rng);
        for (t, point) in out.iter_mut().enumerate() {
            let u: u32 = rng.random();
            let scaled = ((perm[t] as u128) << 32) | u as u128;
            let q = (m * scaled) / ((n0 as u128) << 32);
            point.0.push((q as usize).min(grid.levels() - 1));
        }
    }
    out
}

/// Owen-scrambled Sobol' design seeded by `spec.seed`.
pub fn sobol_design(grid: &DiscretizationGrid, spec: &DesignSpec) -> Result<Vec<IndexVector>> {
    let pts = sobol::scrambled_points(grid.n_vars(), spec.n_samples, spec.seed)?;
    let m = grid.levels() as u64;
    Ok(pts
        .into_iter()
        .map(|p| {
            IndexVector(
                p.into_iter().map(|x| ((m * x as u64) >> 32).min(m - 1) as usize).collect(),
            )
        })
        .collect())
}

/// Activation counts `c[j][m]` and pair coverage of a set of one-hot inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub counts: Vec<Vec<usize>>,
    pub n_points: usize,
    pub never_active: usize,
    pub fraction_never_active: f64,
    pub pair_capacity: u64,
    pub pairs_covered: u64,
}

/// Scalar fields of a [`CoverageReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub n_vars: usize,
    pub levels: usize,
    pub n_points: usize,
    pub never_active: usize,
    pub fraction_never_active: f64,
    pub pair_capacity: u64,
    pub pairs_covered: u64,
}

impl CoverageReport {
    pub fn summary(&self) -> CoverageSummary {
        CoverageSummary {
            n_vars: self.counts.len(),
            levels: self.counts.first().map_or(0, Vec::len),
            n_points: self.n_points,
            never_active: self.never_active,
            fraction_never_active: self.fraction_never_active,
            pair_capacity: self.pair_capacity,
            pairs_covered: self.pairs_covered,
        }
    }

    /// Counts matrix, one row per variable.
    pub fn to_csv(&self) -> String {
        let levels = self.counts.first().map_or(0, Vec::len);
        let mut s = String::from("variable");
        for m in 0..levels {
            let _ = write!(s, ",level_{m}");
        }
        s.push('\n');
        for (j, row) in self.counts.iter().enumerate() {
            let _ = write!(s, "{j}");
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }
}

/// `C(n_x, 2) * M^2`.
pub fn pair_capacity(n_vars: usize, levels: usize) -> u64 {
    let n = n_vars as u64;
    n * n.saturating_sub(1) / 2 * (levels as u64).pow(2)
}

/// Flat activation counts indexed by bit position.
pub fn activation_counts(inputs: &[OneHotVector], grid: &DiscretizationGrid) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; grid.n_bits()];
    for x in inputs {
        if x.len() != grid.n_bits() {
            return Err(Error::LengthMismatch { expected: grid.n_bits(), actual: x.len() });
        }
        for (c, &b) in counts.iter_mut().zip(x.bits()) {
            *c += b as usize;
        }
    }
    Ok(counts)
}

pub fn coverage_counts(inputs: &[OneHotVector], grid: &DiscretizationGrid) -> Result<CoverageReport> {
    let flat = activation_counts(inputs, grid)?;
    let m = grid.levels();
    let never_active = flat.iter().filter(|&&c| c == 0).count();
    let mut pairs = HashSet::new();
    for x in inputs {
        let active: Vec<u64> = x.indices(m).0.iter().enumerate().map(|(j, &q)| (j * m + q) as u64).collect();
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                pairs.insert((active[a] << 32) | active[b]);
            }
        }
    }
    Ok(CoverageReport {
        counts: flat.chunks(m).map(<[usize]>::to_vec).collect(),
        n_points: inputs.len(),
        never_active,
        fraction_never_active: never_active as f64 / grid.n_bits() as f64,
        pair_capacity: pair_capacity(grid.n_vars(), m),
        pairs_covered: pairs.len() as u64,
    })
}

/// Probability that a given bit is never active after `n0` uniform draws, and
/// the expected number of such bits.
pub fn expected_uncovered(levels: usize, n0: usize, n_vars: usize) -> (f64, f64) {
    let p = (1.0 - 1.0 / levels as f64).powf(n0 as f64);
    (p, (n_vars * levels) as f64 * p)
}

/// Activation-count buckets `{0, 1, 2-9, >=10}`.
pub const BUCKET_LABELS: [&str; 4] = ["0", "1", "2-9", ">=10"];

pub fn bucket_counts<I: IntoIterator<Item = usize>>(counts: I) -> [usize; 4] {
    let mut b = [0usize; 4];
    for c in counts {
        let k = match c {
            0 => 0,
            1 => 1,
            2..=9 => 2,
            _ => 3,
        };
        b[k] += 1;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode;
    use proptest::prelude::*;

    fn grid(n_vars: usize, levels: usize) -> DiscretizationGrid {
        DiscretizationGrid::uniform(n_vars, levels, 0.0, 1.0).unwrap()
    }

    fn encode_all(design: &[IndexVector], g: &DiscretizationGrid) -> Vec<OneHotVector> {
        design.iter().map(|q| encode(q, g).unwrap()).collect()
    }

    fn report(method: DesignMethod, n_vars: usize, levels: usize, n0: usize, seed: u64) -> CoverageReport {
        let g = grid(n_vars, levels);
        let design = generate(&g, &DesignSpec::new(method, n0, seed)).unwrap();
        assert_eq!(design.len(), n0);
        coverage_counts(&encode_all(&design, &g), &g).unwrap()
    }

    fn assert_all_ones(r: &CoverageReport) {
        assert!(r.counts.iter().flatten().all(|&c| c == 1), "{:?}", r.counts);
        assert_eq!(r.never_active, 0);
    }

    #[test]
    fn lhs_and_sobol_cover_every_bit_exactly_once() {
        for (n_vars, levels) in [(2, 4), (5, 8), (17, 32)] {
            for seed in 0..100 {
                assert_all_ones(&report(DesignMethod::Lhs, n_vars, levels, levels, seed));
                assert_all_ones(&report(DesignMethod::Sobol, n_vars, levels, levels, seed));
            }
        }
        for p in 1..=5 {
            for seed in 0..20 {
                assert_all_ones(&report(DesignMethod::Sobol, 7, 1 << p, 1 << p, seed));
            }
        }
    }

    #[test]
    fn lhs_columns_are_permutations() {
        let g = grid(2, 4);
        for seed in 0..50 {
            let d = lhs_design(&g, &DesignSpec::new(DesignMethod::Lhs, 4, seed));
            for j in 0..2 {
                let mut col: Vec<usize> = d.iter().map(|q| q.0[j]).collect();
                col.sort_unstable();
                assert_eq!(col, vec![0, 1, 2, 3]);
            }
        }
    }

    #[test]
    fn lhs_with_multiple_of_levels_hits_each_level_equally() {
        for seed in 0..50 {
            let r = report(DesignMethod::Lhs, 3, 4, 12, seed);
            assert!(r.counts.iter().flatten().all(|&c| c == 3));
        }
    }

    #[test]
    fn lhs_marginals_are_uniform() {
        let g = grid(2, 8);
        let mut freq = [0usize; 8];
        let mut total = 0;
        for seed in 0..10_000 {
            for q in lhs_design(&g, &DesignSpec::new(DesignMethod::Lhs, 5, seed)) {
                for &m in &q.0 {
                    freq[m] += 1;
                    total += 1;
                }
            }
        }
        for f in freq {
            assert!((f as f64 / total as f64 - 0.125).abs() < 0.01, "{freq:?}");
        }
    }

    #[test]
    fn uniform_never_active_fraction_matches_estimate() {
        let (p, _) = expected_uncovered(32, 32, 1);
        let mean: f64 = (0..1000)
            .map(|seed| report(DesignMethod::Uniform, 4, 32, 32, seed).fraction_never_active)
            .sum::<f64>()
            / 1000.0;
        assert!((mean - p).abs() < 0.02, "mean {mean} vs {p}");
        assert!((mean - 0.364).abs() < 0.02);
    }

    #[test]
    fn uniform_never_active_counts_scale_with_dimension() {
        for (n_vars, expect) in [(17usize, 198.0), (32, 372.0)] {
            let (_, count) = expected_uncovered(32, 32, n_vars);
            // Published counts use p = 0.364 instead of the exact 0.3621.
            assert!((count - expect).abs() < 1.5, "{count}");
            let trials = 300;
            let xs: Vec<f64> = (0..trials)
                .map(|s| report(DesignMethod::Uniform, n_vars, 32, 32, s).never_active as f64)
                .collect();
            let mean = xs.iter().sum::<f64>() / trials as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
            let se = (var / trials as f64).sqrt();
            assert!((mean - count).abs() < 3.0 * se, "n_x {n_vars}: {mean} vs {count} (se {se})");
        }
    }

    #[test]
    fn designs_are_deterministic_per_seed() {
        let g = grid(6, 8);
        for method in [DesignMethod::Uniform, DesignMethod::Lhs, DesignMethod::Sobol] {
            let a = generate(&g, &DesignSpec::new(method, 8, 11)).unwrap();
            let b = generate(&g, &DesignSpec::new(method, 8, 11)).unwrap();
            let c = generate(&g, &DesignSpec::new(method, 8, 12)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
            for q in &a {
                q.validate(&g).unwrap();
            }
        }
    }

    #[test]
    fn sobol_rejects_too_many_dimensions() {
        let g = grid(1025, 2);
        let err = generate(&g, &DesignSpec::new(DesignMethod::Sobol, 2, 0)).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(generate(&grid(2, 2), &DesignSpec::new(DesignMethod::Lhs, 0, 0)).is_err());
    }

    #[test]
    fn single_point_coverage() {
        let g = grid(5, 4);
        let x = encode(&IndexVector(vec![0, 1, 2, 3, 0]), &g).unwrap();
        let r = coverage_counts(&[x], &g).unwrap();
        assert_eq!(r.counts.iter().flatten().filter(|&&c| c == 1).count(), 5);
        assert_eq!(r.never_active, 20 - 5);
        assert_eq!(r.pairs_covered, 10);
    }

    #[test]
    fn pair_capacity_formula() {
        assert_eq!(pair_capacity(2, 2), 4);
        assert_eq!(pair_capacity(17, 32), 136 * 1024);
        assert_eq!(pair_capacity(1, 8), 0);
        let g = grid(2, 2);
        let all: Vec<OneHotVector> = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|q| encode(&IndexVector(q.to_vec()), &g).unwrap())
            .collect();
        let r = coverage_counts(&all, &g).unwrap();
        assert_eq!(r.pair_capacity, 4);
        assert_eq!(r.pairs_covered, 4);
    }

    #[test]
    fn coverage_rejects_length_mismatch() {
        let x = encode(&IndexVector(vec![0, 1]), &grid(2, 3)).unwrap();
        assert!(matches!(
            coverage_counts(&[x], &grid(2, 4)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn expected_uncovered_examples() {
        let (p, _) = expected_uncovered(32, 32, 1);
        assert!((p - 0.362_055_289_256_316_6).abs() < 1e-15);
        // Published figure is 0.364, i.e. the exact value rounded loosely.
        assert!((p - 0.364).abs() < 0.002);
        assert_eq!(expected_uncovered(8, 0, 3), (1.0, 24.0));
        assert_eq!(expected_uncovered(2, 1, 1).0, 0.5);
    }

    #[test]
    fn buckets_partition() {
        let counts = [0usize, 1, 2, 9, 10, 250, 0];
        assert_eq!(bucket_counts(counts), [2, 1, 2, 2]);
    }

    #[test]
    fn csv_and_json_outputs() {
        let r = report(DesignMethod::Lhs, 2, 3, 3, 1);
        let csv = r.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "variable,level_0,level_1,level_2");
        assert_eq!(csv.lines().nth(1).unwrap(), "0,1,1,1");
        let v: serde_json::Value = serde_json::from_str(&r.summary_json()).unwrap();
        assert_eq!(v["pair_capacity"], 9);
        assert_eq!(v["never_active"], 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn coverage_invariants(
            n_vars in 1usize..7,
            levels in 2usize..9,
            n0 in 1usize..20,
            seed in any::<u64>(),
            method in prop_oneof![
                Just(DesignMethod::Uniform), Just(DesignMethod::Lhs), Just(DesignMethod::Sobol)
            ],
        ) {
            let r = report(method, n_vars, levels, n0, seed);
            for row in &r.counts {
                prop_assert_eq!(row.iter().sum::<usize>(), n0);
            }
            let pairs = (n_vars * n_vars.saturating_sub(1) / 2) as u64;
            prop_assert!(r.pairs_covered <= r.pair_capacity.min(n0 as u64 * pairs));
            prop_assert_eq!(r.pair_capacity, pairs * (levels * levels) as u64);
            let buckets = bucket_counts(r.counts.concat());
            prop_assert_eq!(buckets.iter().sum::<usize>(), n_vars * levels);
        }

        #[test]
        fn stratified_designs_cover_when_n0_equals_levels(
            n_vars in 1usize..12, p in 1u32..6, seed in any::<u64>(),
        ) {
            let m = 1usize << p;
            let lhs = report(DesignMethod::Lhs, n_vars, m + 1, m + 1, seed);
            prop_assert!(lhs.counts.iter().flatten().all(|&c| c == 1));
            let sob = report(DesignMethod::Sobol, n_vars, m, m, seed);
            prop_assert!(sob.counts.iter().flatten().all(|&c| c == 1));
        }
    }
}
