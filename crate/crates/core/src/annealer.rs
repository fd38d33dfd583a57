//! Single-flip Metropolis simulated annealing for QUBO matrices.
//!
//! Each restart is an independent chain with its own ChaCha stream
//! (`seed`, chain index). Chains keep a cached local field per bit so a
//! proposal costs O(1) and an accepted flip O(N).

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qubo::QuboMatrix;
use crate::{Error, Result};

/// Largest matrix accepted by [`brute_force_min`].
pub const BRUTE_FORCE_MAX_BITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub num_sweeps: usize,
    pub num_restarts: usize,
    pub beta_initial: f64,
    pub beta_final: f64,
    /// Soft wall-clock deadline, checked between sweeps.
    pub time_budget_ms: Option<u64>,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            num_sweeps: 2000,
            num_restarts: 64,
            beta_initial: 0.01,
            beta_final: 10.0,
            time_budget_ms: None,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("anneal: {msg}")));
        if self.num_sweeps == 0 {
            return bad("num_sweeps must be positive");
        }
        if self.num_restarts == 0 {
            return bad("num_restarts must be positive");
        }
        if !(self.beta_initial > 0.0) || self.beta_initial.is_nan() {
            return bad("beta_initial must be positive");
        }
        if !(self.beta_final >= self.beta_initial) {
            return bad("beta_final must not be below beta_initial");
        }
        if self.time_budget_ms == Some(0) {
            return bad("time_budget_ms must be positive when set");
        }
        Ok(())
    }

    /// Geometric inverse-temperature schedule, one value per sweep.
    pub fn schedule(&self) -> Vec<f64> {
        let s = self.num_sweeps;
        if s == 1 {
            return vec![self.beta_final];
        }
        let ratio = self.beta_final / self.beta_initial;
        (0..s)
            .map(|k| {
                if k == s - 1 {
                    self.beta_final
                } else {
                    self.beta_initial * ratio.powf(k as f64 / (s - 1) as f64)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub best_bits: Vec<u8>,
    /// Exact energy of `best_bits`, offset excluded.
    pub best_energy: f64,
    /// Chains that completed at least one sweep; 0 means the deadline expired
    /// first and `best_bits` is the best random initial state.
    pub restarts_run: usize,
    /// One-hot validity of `best_bits` (always true for unconstrained matrices).
    pub feasible: bool,
    pub timed_out: bool,
}

impl SampleResult {
    fn new(q: &QuboMatrix, bits: Vec<u8>, restarts_run: usize, timed_out: bool) -> Result<Self> {
        let best_energy = q.energy(&bits)?;
        let feasible = q.blocks().is_none_or(|b| b.is_feasible(&bits));
        Ok(Self { best_bits: bits, best_energy, restarts_run, feasible, timed_out })
    }
}

struct ChainOutcome {
    bits: Vec<u8>,
    energy: f64,
    sweeps: usize,
    timed_out: bool,
}

/// Energy change from flipping bit `i`, in O(N).
pub fn incremental_delta(q: &QuboMatrix, x: &[u8], i: usize) -> f64 {
    let n = q.n();
    let mut local = q.get(i, i);
    for j in 0..i {
        if x[j] != 0 {
            local += q.get(j, i);
        }
    }
    for j in i + 1..n {
        if x[j] != 0 {
            local += q.get(i, j);
        }
    }
    if x[i] != 0 {
        -local
    } else {
        local
    }
}

struct Couplings {
    n: usize,
    diag: Vec<f64>,
    sym: Vec<f64>,
}

fn run_chain<R: Rng>(
    c: &Couplings,
    betas: &[f64],
    rng: &mut R,
    deadline: Option<Instant>,
    mut on_accept: impl FnMut(usize, f64, f64),
) -> ChainOutcome {
    let n = c.n;
    let mut x: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    let mut field = vec![0.0; n];
    for i in (0..n).filter(|&i| x[i] == 1) {
        for (f, s) in field.iter_mut().zip(&c.sym[i * n..(i + 1) * n]) {
            *f += s;
        }
    }
    let mut energy: f64 = (0..n)
        .filter(|&i| x[i] == 1)
        .map(|i| c.diag[i] + 0.5 * field[i])
        .sum();
    let mut best = x.clone();
    let mut best_energy = energy;
    let mut sweeps = 0;
    let mut timed_out = false;

    for (sweep, &beta) in betas.iter().enumerate() {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            timed_out = true;
            break;
        }
        let mut accepted = 0usize;
        for i in 0..n {
            let local = c.diag[i] + field[i];
            let delta = if x[i] == 1 { -local } else { local };
            let accept = delta < 0.0
                || (beta.is_finite() && {
                    let exponent = beta * delta;
                    exponent < 40.0 && rng.random::<f64>() < (-exponent).exp()
                });
            if !accept {
                continue;
            }
            x[i] ^= 1;
            energy += delta;
            let sign = if x[i] == 1 { 1.0 } else { -1.0 };
            for (f, s) in field.iter_mut().zip(&c.sym[i * n..(i + 1) * n]) {
                *f += sign * s;
            }
            accepted += 1;
            if energy < best_energy {
                best_energy = energy;
                best.copy_from_slice(&x);
            }
            on_accept(sweep, delta, best_energy);
        }
        sweeps += 1;
        if accepted == 0 && beta.is_infinite() {
            break;
        }
    }
    ChainOutcome { bits: best, energy: best_energy, sweeps, timed_out }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Minimizes `q` (offset excluded) with restarted simulated annealing.
///
/// Deterministic for a fixed config unless the time budget cuts chains short.
pub fn sample(q: &QuboMatrix, config: &AnnealConfig) -> Result<SampleResult> {
    config.validate()?;
    if q.n() == 0 {
        return Err(Error::InvalidConfig("cannot sample an empty QUBO".into()));
    }
    let couplings = Couplings { n: q.n(), diag: q.diagonal(), sym: q.symmetric_couplings() };
    let betas = config.schedule();
    let deadline = config.time_budget_ms.map(|ms| Instant::now() + Duration::from_millis(ms));

    let outcomes: Vec<ChainOutcome> = (0..config.num_restarts)
        .into_par_iter()
        .map(|chain| {
            let mut rng = chain_rng(config.seed, chain);
            run_chain(&couplings, &betas, &mut rng, deadline, |_, _, _| {})
        })
        .collect();

    let restarts_run = outcomes.iter().filter(|o| o.sweeps > 0).count();
    let timed_out = outcomes.iter().any(|o| o.timed_out);
    let mut best: Option<(f64, Vec<u8>)> = None;
    for o in outcomes {
        let e = q.energy(&o.bits)?;
        debug_assert!((e - o.energy).abs() <= 1e-6 * e.abs().max(1.0));
        if best.as_ref().is_none_or(|(be, _)| e < *be) {
            best = Some((e, o.bits));
        }
    }
    let (_, bits) = best.expect("at least one restart");
    SampleResult::new(q, bits, restarts_run, timed_out)
}

/// Exact minimum by enumerating all `2^N` states.
///
/// Ties go to the smallest bit string read as a binary integer with bit 0
/// as the most significant digit.
pub fn brute_force_min(q: &QuboMatrix) -> Result<SampleResult> {
    let n = q.n();
    if n > BRUTE_FORCE_MAX_BITS {
        return Err(Error::Capacity {
            what: "brute-force enumeration size",
            requested: n,
            limit: BRUTE_FORCE_MAX_BITS,
        });
    }
    if n == 0 {
        return Err(Error::InvalidConfig("cannot enumerate an empty QUBO".into()));
    }
    struct Search<'a> {
        q: &'a QuboMatrix,
        x: Vec<u8>,
        active: Vec<usize>,
        best: Vec<u8>,
        best_energy: f64,
    }
    impl Search<'_> {
        // Depth-first with 0 before 1 visits states in increasing integer order.
        fn visit(&mut self, depth: usize, energy: f64) {
            if depth == self.x.len() {
                if energy < self.best_energy {
                    self.best_energy = energy;
                    self.best.copy_from_slice(&self.x);
                }
                return;
            }
            self.visit(depth + 1, energy);
            let mut gain = self.q.get(depth, depth);
            for &j in &self.active {
                gain += self.q.get(j, depth);
            }
            self.x[depth] = 1;
            self.active.push(depth);
            self.visit(depth + 1, energy + gain);
            self.active.pop();
            self.x[depth] = 0;
        }
    }
    let mut search = Search {
        q,
        x: vec![0; n],
        active: Vec::with_capacity(n),
        best: vec![0; n],
        best_energy: f64::INFINITY,
    };
    search.visit(0, 0.0);
    SampleResult::new(q, search.best, 1, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::DiscretizationGrid;
    use crate::rng::seeded;

    fn random_qubo(n: usize, rng: &mut impl Rng) -> QuboMatrix {
        let dense: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        QuboMatrix::from_dense(n, &dense).unwrap()
    }

    fn single(v: f64) -> QuboMatrix {
        QuboMatrix::from_dense(1, &[v]).unwrap()
    }

    #[test]
    fn single_variable() {
        let r = sample(&single(-5.0), &AnnealConfig::default()).unwrap();
        assert_eq!(r.best_bits, vec![1]);
        assert_eq!(r.best_energy, -5.0);
        let r = sample(&single(5.0), &AnnealConfig::default()).unwrap();
        assert_eq!(r.best_bits, vec![0]);
        assert_eq!(r.best_energy, 0.0);
        assert!(r.feasible);
    }

    #[test]
    fn brute_force_examples() {
        let r = brute_force_min(&QuboMatrix::zeros(5)).unwrap();
        assert_eq!(r.best_bits, vec![0; 5]);
        assert_eq!(r.best_energy, 0.0);
        let r = brute_force_min(&QuboMatrix::from_dense(2, &[-1.0, 0.0, 0.0, -1.0]).unwrap()).unwrap();
        assert_eq!(r.best_bits, vec![1, 1]);
        assert_eq!(r.best_energy, -2.0);
        assert!(matches!(brute_force_min(&QuboMatrix::zeros(25)), Err(Error::Capacity { .. })));
    }

    #[test]
    fn brute_force_tie_break() {
        // x0 + x1 - 2 x0 x1 ... minimum 0 at 00 and 11; lowest integer wins.
        let q = QuboMatrix::from_dense(3, &[1.0, -2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(brute_force_min(&q).unwrap().best_bits, vec![0, 0, 0]);
        // Two minima: 010 and 001 -> 001 is smaller when bit 0 is most significant.
        let q = QuboMatrix::from_dense(3, &[0.0, 0.0, 0.0, 0.0, -1.0, 5.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(brute_force_min(&q).unwrap().best_bits, vec![0, 0, 1]);
    }

    #[test]
    fn brute_force_beats_random_states() {
        let mut rng = seeded(31);
        for _ in 0..5 {
            let q = random_qubo(12, &mut rng);
            let best = brute_force_min(&q).unwrap();
            for _ in 0..10_000 {
                let x: Vec<u8> = (0..12).map(|_| rng.random_range(0..2)).collect();
                assert!(best.best_energy <= q.energy(&x).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn delta_matches_recompute() {
        let mut rng = seeded(2);
        for _ in 0..200 {
            let n = rng.random_range(1..15);
            let q = random_qubo(n, &mut rng);
            let mut x: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let i = rng.random_range(0..n);
            let before = q.energy(&x).unwrap();
            let d1 = incremental_delta(&q, &x, i);
            x[i] ^= 1;
            let after = q.energy(&x).unwrap();
            assert!((d1 - (after - before)).abs() < 1e-10);
            let d2 = incremental_delta(&q, &x, i);
            assert!((d1 + d2).abs() < 1e-12);
        }
        let zero = QuboMatrix::zeros(4);
        assert_eq!(incremental_delta(&zero, &[1, 0, 1, 1], 2), 0.0);
    }

    #[test]
    fn deterministic_for_seed() {
        let q = random_qubo(20, &mut seeded(9));
        let cfg = AnnealConfig { num_sweeps: 200, num_restarts: 8, seed: 5, ..Default::default() };
        assert_eq!(sample(&q, &cfg).unwrap(), sample(&q, &cfg).unwrap());
    }

    #[test]
    fn best_energy_monotone_and_descent_strict() {
        let q = random_qubo(24, &mut seeded(10));
        let c = Couplings { n: 24, diag: q.diagonal(), sym: q.symmetric_couplings() };
        let cfg = AnnealConfig { num_sweeps: 300, ..Default::default() };
        let mut last = f64::INFINITY;
        run_chain(&c, &cfg.schedule(), &mut seeded(1), None, |_, _, best| {
            assert!(best <= last);
            last = best;
        });

        let descent = vec![f64::INFINITY; 1000];
        let out = run_chain(&c, &descent, &mut seeded(2), None, |_, delta, _| {
            assert!(delta < 0.0);
        });
        assert!(out.sweeps < 1000);
        for i in 0..24 {
            assert!(incremental_delta(&q, &out.bits, i) >= 0.0);
        }
    }

    #[test]
    fn matches_oracle_on_small_instances() {
        let mut rng = seeded(77);
        let mut hits = 0;
        for seed in 0..20 {
            let q = random_qubo(12, &mut rng);
            let exact = brute_force_min(&q).unwrap();
            let cfg = AnnealConfig { seed, ..Default::default() };
            let r = sample(&q, &cfg).unwrap();
            if (r.best_energy - exact.best_energy).abs() < 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 19, "hits {hits}");
    }

    #[test]
    fn zero_time_budget_rejected_and_expired_deadline_flagged() {
        let q = random_qubo(8, &mut seeded(3));
        let cfg = AnnealConfig { time_budget_ms: Some(0), ..Default::default() };
        assert!(sample(&q, &cfg).is_err());
        let c = Couplings { n: 8, diag: q.diagonal(), sym: q.symmetric_couplings() };
        let past = Instant::now() - Duration::from_millis(1);
        let out = run_chain(&c, &[1.0; 10], &mut seeded(0), Some(past), |_, _, _| {});
        assert_eq!(out.sweeps, 0);
        assert!(out.timed_out);
        assert!((out.energy - q.energy(&out.bits).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn feasibility_reported_for_penalized_matrices() {
        let grid = DiscretizationGrid::uniform(2, 3, 0.0, 1.0).unwrap();
        let q = random_qubo(6, &mut seeded(4)).augment_penalty(&grid, 16.0).unwrap();
        let r = sample(&q, &AnnealConfig { num_sweeps: 200, num_restarts: 4, ..Default::default() }).unwrap();
        assert!(r.feasible);
        assert!(q.blocks().unwrap().is_feasible(&r.best_bits));
    }

    #[test]
    fn invalid_configs() {
        let q = single(1.0);
        for cfg in [
            AnnealConfig { num_sweeps: 0, ..Default::default() },
            AnnealConfig { num_restarts: 0, ..Default::default() },
            AnnealConfig { beta_initial: 0.0, ..Default::default() },
            AnnealConfig { beta_initial: 5.0, beta_final: 1.0, ..Default::default() },
        ] {
            assert!(sample(&q, &cfg).is_err());
        }
    }
}
