//! Surrogate-assisted black-box optimization over one-hot encoded grids.
//!
//! A factorization machine (FM) is trained on every evaluated point, reduced
//! exactly to a QUBO matrix, augmented with one-hot penalties and minimized by
//! simulated annealing. The initial training design can be drawn uniformly,
//! by Latin hypercube sampling or from a scrambled Sobol' sequence; the latter
//! two activate every one-hot bit at least once when the number of initial
//! samples equals the number of grid levels.
//!
//! Module map:
//!
//! * [`encoding`]: grids, one-hot vectors and the decoding map.
//! * [`surrogate`]: the FM model, its gradients and AdamW training.
//! * [`qubo`]: FM to QUBO reduction and the one-hot penalty.
//! * [`annealer`]: single-flip simulated annealing plus a brute-force oracle.
//! * [`initdesign`]: initial designs and bit-coverage statistics.
//! * [`blackbox`]: objective interface, evaluation ledger, benchmark suite.
//! * [`optimizer`]: the optimization loop, random search and aggregation.

pub mod annealer;
pub mod blackbox;
pub mod encoding;
mod error;
pub mod initdesign;
pub mod optimizer;
pub mod qubo;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
