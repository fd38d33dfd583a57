//! The surrogate-guided optimization loop and the random-search baseline.
//!
//! Each run: evaluate an initial design, then repeatedly retrain the FM from
//! scratch on all data, minimize its penalized QUBO with the annealer, decode
//! the best state, move it off already-evaluated points and evaluate it.

use std::collections::HashSet;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annealer::{self, AnnealConfig};
use crate::blackbox::{evaluate, BlackBoxProblem, Direction, EvalLedger};
use crate::encoding::{encode, grid_point, repair_decode, DiscretizationGrid, IndexVector};
use crate::initdesign::{self, DesignMethod, DesignSpec};
use crate::qubo::{compute_lambda_pen, from_fm};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::surrogate::{self, Dataset, FmParams, TrainConfig};
use crate::{Error, Result};

/// Bit count above which activation snapshots are thinned.
pub const SNAPSHOT_DENSE_LIMIT: usize = 2048;
/// Snapshot stride used above [`SNAPSHOT_DENSE_LIMIT`].
pub const SNAPSHOT_STRIDE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Total evaluations, initial design included.
    pub budget: usize,
    pub design: DesignSpec,
    pub train: TrainConfig,
    pub anneal: AnnealConfig,
    /// FM factor rank.
    pub k: usize,
    /// Trial seed; training, annealing and repair streams derive from it.
    pub seed: u64,
    /// Divide the penalized QUBO by the largest surrogate coefficient before
    /// sampling, so the annealing schedule is in units of the surrogate scale.
    #[serde(default = "default_true")]
    pub scale_qubo: bool,
}

fn default_true() -> bool {
    true
}

impl LoopConfig {
    /// Default training and annealing settings with the design seeded by `seed`.
    pub fn new(budget: usize, method: DesignMethod, n0: usize, seed: u64) -> Self {
        Self {
            budget,
            design: DesignSpec::new(method, n0, seed),
            train: TrainConfig::default(),
            anneal: AnnealConfig::default(),
            k: 5,
            seed,
            scale_qubo: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.train.validate()?;
        self.anneal.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidConfig("factor rank k must be positive".into()));
        }
        if self.budget <= self.design.n_samples {
            return Err(Error::InvalidConfig(format!(
                "budget ({}) must exceed the initial design size ({})",
                self.budget, self.design.n_samples
            )));
        }
        Ok(())
    }
}

/// Activation counts after `evaluation` evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSnapshot {
    pub evaluation: usize,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub design_ms: f64,
    pub train_ms: f64,
    pub qubo_ms: f64,
    pub anneal_ms: f64,
    pub evaluate_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub problem: String,
    pub direction: Direction,
    pub seed: u64,
    pub config_hash: String,
    /// Length of the initial phase used for reporting.
    pub n0: usize,
    pub budget: usize,
    pub n_vars: usize,
    pub levels: usize,
    /// Evaluated level vectors in evaluation order.
    pub evaluated: Vec<IndexVector>,
    /// Objective values in natural units.
    pub raw_values: Vec<f64>,
    pub failed: Vec<bool>,
    /// Best-so-far in natural units after each evaluation.
    pub best_trajectory: Vec<f64>,
    pub snapshots: Vec<ActivationSnapshot>,
    /// Inputs with internal (minimization) targets.
    pub final_dataset: Dataset,
    pub timing: PhaseTiming,
    /// Annealer outputs that violated a one-hot block before repair.
    pub infeasible_samples: usize,
    /// Candidates moved by duplicate avoidance.
    pub perturbed: usize,
}

impl RunRecord {
    pub fn initial_best(&self) -> f64 {
        self.best_trajectory[self.n0.clamp(1, self.budget) - 1]
    }

    pub fn final_best(&self) -> f64 {
        *self.best_trajectory.last().expect("non-empty trajectory")
    }

    /// Best-so-far trajectory CSV: `index,raw,best`, one row per evaluation.
    pub fn trajectory_csv(&self) -> String {
        let mut s = String::from("index,raw,best\n");
        for (i, (r, b)) in self.raw_values.iter().zip(&self.best_trajectory).enumerate() {
            s.push_str(&format!("{},{},{}\n", i + 1, fmt_f64(*r), fmt_f64(*b)));
        }
        s
    }
}

/// Shortest round-trip representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Per-iteration view passed to run observers.
pub struct IterationInfo<'a> {
    pub iteration: usize,
    pub dataset: &'a Dataset,
    pub params: &'a FmParams,
    pub train_seed: u64,
}

/// Hex SHA-256 of the JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[derive(Serialize)]
struct HashedRun<'a> {
    problem: &'a str,
    direction: Direction,
    bounds: &'a [(f64, f64)],
    levels: usize,
    kind: &'a str,
    config: &'a LoopConfig,
}

fn check_grid(problem: &BlackBoxProblem, grid: &DiscretizationGrid) -> Result<()> {
    if grid.n_vars() != problem.n_vars() {
        return Err(Error::LengthMismatch { expected: problem.n_vars(), actual: grid.n_vars() });
    }
    Ok(())
}

/// Seed of the FM initialization and minibatch stream at `iteration`.
pub fn train_seed(trial_seed: u64, iteration: usize) -> u64 {
    derive_seed(trial_seed, Stream::Train, iteration as u64)
}

pub fn anneal_seed(trial_seed: u64, iteration: usize) -> u64 {
    derive_seed(trial_seed, Stream::Anneal, iteration as u64)
}

pub fn run(problem: &BlackBoxProblem, grid: &DiscretizationGrid, config: &LoopConfig) -> Result<RunRecord> {
    run_with_observer(problem, grid, config, |_| {})
}

struct Tracker<'a> {
    problem: &'a BlackBoxProblem,
    grid: &'a DiscretizationGrid,
    ledger: EvalLedger,
    dataset: Dataset,
    evaluated: Vec<IndexVector>,
    seen: HashSet<IndexVector>,
    counts: Vec<u32>,
    snapshots: Vec<ActivationSnapshot>,
    budget: usize,
    n0: usize,
}

impl<'a> Tracker<'a> {
    fn new(problem: &'a BlackBoxProblem, grid: &'a DiscretizationGrid, budget: usize, n0: usize) -> Self {
        Self {
            problem,
            grid,
            ledger: EvalLedger::new(),
            dataset: Dataset::new(),
            evaluated: Vec::with_capacity(budget),
            seen: HashSet::with_capacity(budget),
            counts: vec![0; grid.n_bits()],
            snapshots: Vec::new(),
            budget,
            n0,
        }
    }

    fn evaluate(&mut self, q: IndexVector) -> Result<()> {
        let x = encode(&q, self.grid)?;
        let internal = evaluate(self.problem, &grid_point(&q, self.grid), &mut self.ledger)?;
        for (c, &b) in self.counts.iter_mut().zip(x.bits()) {
            *c += b as u32;
        }
        self.dataset.push(x, internal);
        self.seen.insert(q.clone());
        self.evaluated.push(q);
        let e = self.ledger.count();
        let dense = self.grid.n_bits() <= SNAPSHOT_DENSE_LIMIT;
        if dense || e % SNAPSHOT_STRIDE == 0 || e == self.n0 || e == self.budget {
            self.snapshots.push(ActivationSnapshot { evaluation: e, counts: self.counts.clone() });
        }
        Ok(())
    }

    fn finish(self, label: String, seed: u64, config_hash: String, timing: PhaseTiming) -> RunRecord {
        let direction = self.problem.direction();
        RunRecord {
            label,
            problem: self.problem.name().to_string(),
            direction,
            seed,
            config_hash,
            n0: self.n0,
            budget: self.budget,
            n_vars: self.grid.n_vars(),
            levels: self.grid.levels(),
            evaluated: self.evaluated,
            raw_values: self.ledger.raw_values(),
            failed: self.ledger.entries().iter().map(|e| e.failed).collect(),
            best_trajectory: self.ledger.best_trajectory(direction),
            snapshots: self.snapshots,
            final_dataset: self.dataset,
            timing,
            infeasible_samples: 0,
            perturbed: 0,
        }
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the loop, calling `observer` after each surrogate fit.
pub fn run_with_observer(
    problem: &BlackBoxProblem,
    grid: &DiscretizationGrid,
    config: &LoopConfig,
    mut observer: impl FnMut(&IterationInfo<'_>),
) -> Result<RunRecord> {
    config.validate()?;
    check_grid(problem, grid)?;
    if let Some(total) = grid.total_points() {
        if config.budget as u128 > total {
            return Err(Error::InvalidConfig(format!(
                "budget ({}) exceeds the number of grid points ({total})",
                config.budget
            )));
        }
    }
    let n0 = config.design.n_samples;
    let mut timing = PhaseTiming::default();
    let mut tracker = Tracker::new(problem, grid, config.budget, n0);
    let mut repair_rng = stream_rng(config.seed, Stream::Repair, 0);
    let mut perturbed = 0;
    let mut infeasible = 0;

    let t = Instant::now();
    let design = initdesign::generate(grid, &config.design)?;
    timing.design_ms += ms_since(t);
    for q in design {
        let q2 = dedupe_perturb(&q, &tracker.seen, grid, &mut repair_rng)?;
        perturbed += usize::from(q2 != q);
        let t = Instant::now();
        tracker.evaluate(q2)?;
        timing.evaluate_ms += ms_since(t);
    }

    for iteration in 0..config.budget - n0 {
        let mut step = || -> Result<()> {
            let t = Instant::now();
            let seed = train_seed(config.seed, iteration);
            let mut rng = crate::rng::seeded(seed);
            let params = surrogate::train(&tracker.dataset, &config.train, grid, config.k, &mut rng)?;
            timing.train_ms += ms_since(t);
            observer(&IterationInfo { iteration, dataset: &tracker.dataset, params: &params, train_seed: seed });

            let t = Instant::now();
            let lambda = compute_lambda_pen(tracker.dataset.max_abs_target())?;
            let fm = from_fm(&params);
            let mut q = fm.augment_penalty(grid, lambda)?;
            let scale = fm.max_abs_coefficient();
            if config.scale_qubo && scale > 0.0 {
                q = q.scaled(1.0 / scale)?;
            }
            timing.qubo_ms += ms_since(t);

            let t = Instant::now();
            let anneal = AnnealConfig { seed: anneal_seed(config.seed, iteration), ..config.anneal };
            let sample = annealer::sample(&q, &anneal)?;
            timing.anneal_ms += ms_since(t);
            infeasible += usize::from(!sample.feasible);

            let candidate = repair_decode(&sample.best_bits, grid, &mut repair_rng)?;
            let next = dedupe_perturb(&candidate, &tracker.seen, grid, &mut repair_rng)?;
            perturbed += usize::from(next != candidate);
            let t = Instant::now();
            tracker.evaluate(next)?;
            timing.evaluate_ms += ms_since(t);
            Ok(())
        };
        step().map_err(|e| e.at_iteration(iteration))?;
    }

    let hash = config_hash(&HashedRun {
        problem: problem.name(),
        direction: problem.direction(),
        bounds: grid.bounds(),
        levels: grid.levels(),
        kind: "fmqa",
        config,
    });
    let mut record = tracker.finish(config.design.method.name().to_string(), config.seed, hash, timing);
    record.infeasible_samples = infeasible;
    record.perturbed = perturbed;
    Ok(record)
}

/// Returns `candidate` if unevaluated, else a random walk from it.
///
/// Each step moves every index by an independent draw from `{-1, 0, +1}`,
/// clipped to the grid, until an unevaluated vector is reached.
pub fn dedupe_perturb<R: Rng + ?Sized>(
    candidate: &IndexVector,
    evaluated: &HashSet<IndexVector>,
    grid: &DiscretizationGrid,
    rng: &mut R,
) -> Result<IndexVector> {
    candidate.validate(grid)?;
    if !evaluated.contains(candidate) {
        return Ok(candidate.clone());
    }
    if let Some(total) = grid.total_points() {
        if evaluated.len() as u128 >= total {
            return Err(Error::Exhausted(total));
        }
    }
    let top = grid.levels() - 1;
    let mut q = candidate.clone();
    loop {
        for v in q.0.iter_mut() {
            *v = match rng.random_range(0..3u8) {
                0 => v.saturating_sub(1),
                1 => *v,
                _ => (*v + 1).min(top),
            };
        }
        if !evaluated.contains(&q) {
            return Ok(q);
        }
    }
}

/// Independent uniform grid points; `n0` only sets the reported initial phase.
pub fn random_search(
    problem: &BlackBoxProblem,
    grid: &DiscretizationGrid,
    budget: usize,
    n0: usize,
    seed: u64,
) -> Result<RunRecord> {
    check_grid(problem, grid)?;
    if budget == 0 {
        return Err(Error::InvalidConfig("budget must be positive".into()));
    }
    let mut rng = stream_rng(seed, Stream::Random, 0);
    let mut tracker = Tracker::new(problem, grid, budget, n0.min(budget));
    let t = Instant::now();
    for _ in 0..budget {
        let q = IndexVector((0..grid.n_vars()).map(|_| rng.random_range(0..grid.levels())).collect());
        tracker.evaluate(q)?;
    }
    let timing = PhaseTiming { evaluate_ms: ms_since(t), ..Default::default() };
    #[derive(Serialize)]
    struct HashedRandom<'a> {
        problem: &'a str,
        direction: Direction,
        bounds: &'a [(f64, f64)],
        levels: usize,
        kind: &'a str,
        budget: usize,
        n0: usize,
        seed: u64,
    }
    let hash = config_hash(&HashedRandom {
        problem: problem.name(),
        direction: problem.direction(),
        bounds: grid.bounds(),
        levels: grid.levels(),
        kind: "random",
        budget,
        n0,
        seed,
    });
    Ok(tracker.finish("random".into(), seed, hash, timing))
}

/// Across-trial statistics in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub budget: usize,
    pub n0: usize,
    pub mean_trajectory: Vec<f64>,
    pub std_trajectory: Vec<f64>,
    pub initial_mean: f64,
    pub initial_std: f64,
    pub final_mean: f64,
    pub final_std: f64,
    /// `final_mean - initial_mean`.
    pub gain: f64,
}

/// Mean and sample standard deviation (`n - 1`; zero for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(records: &[RunRecord]) -> Result<Summary> {
    let first = records.first().ok_or_else(|| Error::InvalidConfig("no records to aggregate".into()))?;
    for r in records {
        if r.budget != first.budget || r.best_trajectory.len() != first.budget {
            return Err(Error::LengthMismatch { expected: first.budget, actual: r.best_trajectory.len() });
        }
        if r.n0 != first.n0 {
            return Err(Error::InvalidConfig(format!(
                "initial phase lengths differ ({} vs {})",
                first.n0, r.n0
            )));
        }
    }
    let mut mean_trajectory = Vec::with_capacity(first.budget);
    let mut std_trajectory = Vec::with_capacity(first.budget);
    for i in 0..first.budget {
        let col: Vec<f64> = records.iter().map(|r| r.best_trajectory[i]).collect();
        let (m, s) = mean_std(&col);
        mean_trajectory.push(m);
        std_trajectory.push(s);
    }
    let initial: Vec<f64> = records.iter().map(RunRecord::initial_best).collect();
    let finals: Vec<f64> = records.iter().map(RunRecord::final_best).collect();
    let (initial_mean, initial_std) = mean_std(&initial);
    let (final_mean, final_std) = mean_std(&finals);
    Ok(Summary {
        trials: records.len(),
        budget: first.budget,
        n0: first.n0,
        mean_trajectory,
        std_trajectory,
        initial_mean,
        initial_std,
        final_mean,
        final_std,
        gain: final_mean - initial_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::SyntheticFunction;
    use crate::initdesign::coverage_counts;
    use crate::rng::seeded;

    fn small_config(budget: usize, method: DesignMethod, n0: usize, seed: u64) -> LoopConfig {
        let mut c = LoopConfig::new(budget, method, n0, seed);
        c.train.epochs = 30;
        c.anneal.num_sweeps = 100;
        c.anneal.num_restarts = 4;
        c
    }

    fn setup(f: SyntheticFunction, n: usize, m: usize) -> (BlackBoxProblem, DiscretizationGrid) {
        let p = f.problem(n);
        let g = p.grid(m).unwrap();
        (p, g)
    }

    #[test]
    fn budget_and_uniqueness() {
        let (p, g) = setup(SyntheticFunction::Sphere, 3, 4);
        for seed in 0..5 {
            let r = run(&p, &g, &small_config(20, DesignMethod::Lhs, 4, seed)).unwrap();
            assert_eq!(r.raw_values.len(), 20);
            assert_eq!(r.best_trajectory.len(), 20);
            assert_eq!(r.final_dataset.len(), 20);
            let distinct: HashSet<_> = r.final_dataset.inputs().iter().map(|x| x.bits().to_vec()).collect();
            assert_eq!(distinct.len(), 20);
            assert!(r.best_trajectory.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn loop_iteration_count() {
        let (p, g) = setup(SyntheticFunction::Trap, 2, 8);
        let mut iterations = 0;
        let r = run_with_observer(&p, &g, &small_config(14, DesignMethod::Sobol, 8, 1), |_| iterations += 1)
            .unwrap();
        assert_eq!(iterations, 6);
        assert_eq!(r.raw_values.len(), 14);
    }

    #[test]
    fn runs_are_deterministic() {
        let (p, g) = setup(SyntheticFunction::Rastrigin, 3, 4);
        let c = small_config(12, DesignMethod::Uniform, 4, 9);
        let mut a = run(&p, &g, &c).unwrap();
        let mut b = run(&p, &g, &c).unwrap();
        a.timing = PhaseTiming::default();
        b.timing = PhaseTiming::default();
        assert_eq!(a, b);
        let other = run(&p, &g, &small_config(12, DesignMethod::Uniform, 4, 10)).unwrap();
        assert_ne!(a.evaluated, other.evaluated);
    }

    #[test]
    fn coverage_inherited_at_initial_phase() {
        for method in [DesignMethod::Lhs, DesignMethod::Sobol] {
            let (p, g) = setup(SyntheticFunction::Sphere, 4, 8);
            let r = run(&p, &g, &small_config(10, method, 8, 3)).unwrap();
            let first = &r.final_dataset.inputs()[..8];
            assert_eq!(coverage_counts(first, &g).unwrap().never_active, 0);
            let snap = r.snapshots.iter().find(|s| s.evaluation == 8).unwrap();
            assert!(snap.counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn snapshots_dense_for_small_grids() {
        let (p, g) = setup(SyntheticFunction::Sphere, 2, 4);
        let r = run(&p, &g, &small_config(9, DesignMethod::Lhs, 4, 0)).unwrap();
        assert_eq!(r.snapshots.len(), 9);
        for (i, s) in r.snapshots.iter().enumerate() {
            assert_eq!(s.evaluation, i + 1);
            assert_eq!(s.counts.iter().sum::<u32>() as usize, 2 * (i + 1));
        }
    }

    #[test]
    fn training_is_fresh_each_iteration() {
        let (p, g) = setup(SyntheticFunction::Sphere, 3, 4);
        let c = small_config(10, DesignMethod::Lhs, 4, 21);
        let mut checks = 0;
        run_with_observer(&p, &g, &c, |info| {
            let mut rng = seeded(info.train_seed);
            let again = surrogate::train(info.dataset, &c.train, &g, c.k, &mut rng).unwrap();
            assert_eq!(&again, info.params);
            checks += 1;
        })
        .unwrap();
        assert_eq!(checks, 6);
    }

    #[test]
    fn near_exhaustion_runs_cover_whole_space() {
        let (p, g) = setup(SyntheticFunction::Sphere, 3, 2);
        let r = run(&p, &g, &small_config(8, DesignMethod::Uniform, 2, 5)).unwrap();
        let distinct: HashSet<_> = r.evaluated.iter().cloned().collect();
        assert_eq!(distinct.len(), 8);
        assert!(run(&p, &g, &small_config(9, DesignMethod::Uniform, 2, 5)).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let (p, g) = setup(SyntheticFunction::Sphere, 3, 4);
        assert!(run(&p, &g, &small_config(4, DesignMethod::Lhs, 4, 0)).is_err());
        let mut c = small_config(10, DesignMethod::Lhs, 4, 0);
        c.k = 0;
        assert!(run(&p, &g, &c).is_err());
        let g2 = SyntheticFunction::Sphere.problem(2).grid(4).unwrap();
        assert!(matches!(
            run(&p, &g2, &small_config(10, DesignMethod::Lhs, 4, 0)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn evaluator_failures_consume_budget() {
        let p = BlackBoxProblem::new(
            "flaky",
            vec![(0.0, 1.0); 2],
            Direction::Maximize,
            std::sync::Arc::new(|z| if z[0] > 0.5 { Err("crash".into()) } else { Ok(z[1]) }),
        )
        .unwrap();
        let g = p.grid(4).unwrap();
        let r = run(&p, &g, &small_config(12, DesignMethod::Lhs, 4, 2)).unwrap();
        assert_eq!(r.raw_values.len(), 12);
        assert!(r.failed.iter().any(|&f| f));
        assert!(r.best_trajectory.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn dedupe_returns_unevaluated_unchanged() {
        let g = DiscretizationGrid::uniform(2, 4, 0.0, 1.0).unwrap();
        let q = IndexVector(vec![1, 2]);
        let mut rng = seeded(0);
        assert_eq!(dedupe_perturb(&q, &HashSet::new(), &g, &mut rng).unwrap(), q);
    }

    #[test]
    fn dedupe_finds_last_free_point() {
        let g = DiscretizationGrid::uniform(1, 2, 0.0, 1.0).unwrap();
        let seen: HashSet<_> = [IndexVector(vec![0])].into_iter().collect();
        for seed in 0..20 {
            let mut rng = seeded(seed);
            assert_eq!(dedupe_perturb(&IndexVector(vec![0]), &seen, &g, &mut rng).unwrap().0, vec![1]);
        }
        let g3 = DiscretizationGrid::uniform(3, 2, 0.0, 1.0).unwrap();
        let mut all: HashSet<IndexVector> = HashSet::new();
        for k in 0..8usize {
            all.insert(IndexVector(vec![k & 1, (k >> 1) & 1, (k >> 2) & 1]));
        }
        all.remove(&IndexVector(vec![1, 1, 1]));
        let mut rng = seeded(4);
        assert_eq!(dedupe_perturb(&IndexVector(vec![0, 0, 0]), &all, &g3, &mut rng).unwrap().0, vec![1, 1, 1]);
        all.insert(IndexVector(vec![1, 1, 1]));
        assert!(matches!(
            dedupe_perturb(&IndexVector(vec![0, 0, 0]), &all, &g3, &mut rng),
            Err(Error::Exhausted(8))
        ));
    }

    #[test]
    fn dedupe_clips_at_bounds() {
        let g = DiscretizationGrid::uniform(2, 5, 0.0, 1.0).unwrap();
        let seen: HashSet<_> = [IndexVector(vec![0, 4])].into_iter().collect();
        for seed in 0..200 {
            let mut rng = seeded(seed);
            let q = dedupe_perturb(&IndexVector(vec![0, 4]), &seen, &g, &mut rng).unwrap();
            assert!(q.0[0] <= 1 && q.0[1] >= 3);
            q.validate(&g).unwrap();
        }
    }

    #[test]
    fn random_search_accounting() {
        let (p, g) = setup(SyntheticFunction::Sphere, 3, 8);
        let r = random_search(&p, &g, 10, 4, 1).unwrap();
        assert_eq!(r.raw_values.len(), 10);
        assert!(r.best_trajectory.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r, {
            let mut b = random_search(&p, &g, 10, 4, 1).unwrap();
            b.timing = r.timing;
            b
        });
    }

    fn fake(traj: Vec<f64>, n0: usize) -> RunRecord {
        let (p, g) = setup(SyntheticFunction::Sphere, 1, 2);
        let mut r = random_search(&p, &g, traj.len(), n0, 0).unwrap();
        r.best_trajectory = traj;
        r
    }

    #[test]
    fn aggregate_single_and_flat() {
        let s = aggregate(&[fake(vec![3.0, 2.0, 1.0], 1)]).unwrap();
        assert_eq!(s.mean_trajectory, vec![3.0, 2.0, 1.0]);
        assert_eq!(s.std_trajectory, vec![0.0; 3]);
        let flat = aggregate(&[fake(vec![2.0; 4], 2), fake(vec![5.0; 4], 2)]).unwrap();
        assert_eq!(flat.gain, 0.0);
    }

    #[test]
    fn aggregate_matches_hand_computation() {
        let rs = [
            fake(vec![4.0, 3.0, 1.0], 2),
            fake(vec![6.0, 5.0, 2.0], 2),
            fake(vec![5.0, 1.0, 0.0], 2),
        ];
        let s = aggregate(&rs).unwrap();
        let expect_mean = [5.0, 3.0, 1.0];
        let expect_std = [1.0, 2.0, 1.0];
        for i in 0..3 {
            assert!((s.mean_trajectory[i] - expect_mean[i]).abs() < 1e-12);
            assert!((s.std_trajectory[i] - expect_std[i]).abs() < 1e-12);
        }
        assert!((s.initial_mean - 3.0).abs() < 1e-12);
        assert!((s.final_mean - 1.0).abs() < 1e-12);
        assert!((s.gain + 2.0).abs() < 1e-12);
        assert!(aggregate(&[fake(vec![1.0; 3], 1), fake(vec![1.0; 4], 1)]).is_err());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn trajectory_csv_rows() {
        let (p, g) = setup(SyntheticFunction::Sphere, 2, 4);
        let r = random_search(&p, &g, 5, 2, 3).unwrap();
        let csv = r.trajectory_csv();
        assert_eq!(csv.lines().count(), 6);
        let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last[0], 5.0);
        assert_eq!(last[2], r.final_best());
    }
}
