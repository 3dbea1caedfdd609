//! Discrete-time Hawkes processes.
//!
//! The crate simulates the Markov-chain approximation of a marked Hawkes
//! intensity on a uniform grid (exponential and Erlang kernels), provides
//! continuous-time reference samplers, and ships the numerical checks that
//! the chain converges to the continuous process: generator convergence on
//! test functions, one-step operator oracles and marginal distribution tests.
//!
//! ```
//! use hawkes_dt::{simulate_chain, GridSpec, HawkesParams, PathSeed};
//!
//! let params = HawkesParams::fig4();
//! let grid = GridSpec::new(1.0, 1_000).unwrap();
//! let path = simulate_chain(&params, grid, PathSeed::new(1, 0));
//! assert_eq!(path.l_values.len(), 1_001);
//! ```

pub mod analysis;
pub mod dthp;
pub mod exact;
pub mod io;
pub mod model;
pub mod operators;
pub mod quadrature;
pub mod rng;

pub use analysis::{
    empirical_rate, ks_two_sample, marginal_convergence_experiment, wasserstein1,
    ConvergenceReport, ConvergenceRow, ExperimentSpec, SampleSet,
};
pub use dthp::{
    path_value, reconstruct_loss, simulate_chain, step_erlang, step_exponential, ChainPath,
    ChainState, LossPath, StepCoefficients,
};
pub use exact::{exact_exponential, simulate_exact, state_at, thinning_erlang, EventRecord};
pub use model::{
    mean_count, mean_intensity, GridSpec, HawkesParams, KernelKind, KernelSpec, MarkDistribution,
    ParamError,
};
pub use operators::{OperatorConfig, Operators};
pub use rng::{PathRng, PathSeed};
