//! Simulation of measure-valued selection-mutation evolutionary games on
//! finite metric strategy spaces.
//!
//! The state of a game is a signed measure over the strategy points, living
//! in the dual of the bounded Lipschitz functions and measured with the
//! flat (dual bounded-Lipschitz) norm. A mutation kernel assigns each parent
//! strategy a probability vector over offspring strategies, and the dynamics
//!
//! ```text
//! mu'(t) = (B(X, .) gamma(.) - D(X, .)) . mu(t),    X = mu(t)(1)
//! ```
//!
//! are integrated either with a Picard iteration of the mild (integral)
//! form or with classical RK4.
//!
//! Module map:
//! - [`space`]: finite metric strategy spaces
//! - [`bl`]: test functions, measures, kernels, the flat norm and the bullet action
//! - [`rates`]: density-dependent birth and death rates
//! - [`dynamics`]: vector field, time steppers and trajectories
//! - [`asymptotics`]: reproduction numbers, carrying capacities, dissipativity
//! - [`harness`]: configuration, simulation runs, sweeps and the verify suites

pub mod asymptotics;
pub mod bl;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod rates;
pub mod simplex;
pub mod space;
pub mod verify;

pub use asymptotics::{AsymptoticProfile, DissipativityReport};
pub use bl::{BLFunction, DiscreteMeasure, MeasureFamily, MutationKernel};
pub use dynamics::{GameState, Scheme, Trajectory};
pub use error::{Error, Result};
pub use rates::{RateFamily, VitalRates};
pub use space::StrategySpace;
