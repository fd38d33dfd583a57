//! Per-sample gradient cost grows linearly in the number of bits.

use std::hint::black_box;
use std::time::Instant;

use fmqa::rng::seeded;
use fmqa::surrogate::{gradient, init_params};
use rand::Rng;

/// Fastest of several timed batches, in seconds per gradient call.
fn per_call(n: usize, k: usize) -> f64 {
    let mut rng = seeded(n as u64);
    let p = init_params(n, k, &mut rng);
    let xs: Vec<Vec<u8>> = (0..8).map(|_| (0..n).map(|_| rng.random_range(0..2u8)).collect()).collect();
    let calls = (1_000_000 / n).max(10);
    (0..15)
        .map(|_| {
            let t = Instant::now();
            for c in 0..calls {
                black_box(gradient(&p, &xs[c % xs.len()], 0.5).unwrap());
            }
            t.elapsed().as_secs_f64() / calls as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// Least-squares slope of `log2 t` against `log2 n`, as a per-doubling factor.
/// Single steps that cross a cache level can exceed the trend, so the fit
/// uses the whole sweep.
#[test]
fn doubling_bits_at_most_doubles_cost() {
    let k = 8;
    let sizes: Vec<usize> = (8..=16).map(|p| 1 << p).collect();
    let times: Vec<f64> = sizes.iter().map(|&n| per_call(n, k)).collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.log2()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let factor = slope.exp2();
    assert!(factor <= 2.3, "time grows {factor:.2}x per doubling ({times:?})");
    assert!(factor >= 1.5, "implausibly flat timing {factor:.2}x ({times:?})");
}
