//! Twin reinforcement-learning environments and a hierarchical equivalence
//! harness for them.
//!
//! Each environment ships as a scalar reference backend and a batched
//! performance backend. The [`verify`] module checks that the two agree through
//! property cases, interaction scenarios and seed-matched rollouts; the
//! [`transfer`] module checks that policies carry across backends with a TOST
//! equivalence test; [`bench`] measures throughput.

pub mod bench;
pub mod cartpole;
pub mod env;
pub mod pong;
pub mod registry;
pub mod rng;
pub mod transfer;
pub mod verify;

pub use env::{Backend, BatchEnv, ComparisonMode, EnvError, EnvKind, EnvState, StepOutcome, Value};
pub use rng::{derive_stream, rng_next, rng_uniform, RngState};
