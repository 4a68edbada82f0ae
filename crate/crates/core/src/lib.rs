//! Heat-bath algorithmic cooling of spin systems.
//!
//! A run takes a [`SpinSystem`] (spin count, heat-bath bias `eps0` and the
//! reset spins), a [`Schedule`] (algorithm plus termination rule) and a
//! backend, and produces an [`Outcome`] with the final biases and a
//! [`Trace`].
//!
//! ```
//! use spincool::{fernandez, BackendKind, SpinSystem};
//!
//! let sys = SpinSystem::new(3, 1e-3).unwrap();
//! let out = fernandez(&sys, 40, BackendKind::Bias).unwrap();
//! let c = out.final_over_eps0()[2];
//! assert!((c - 2.0).abs() < 1e-4);
//! ```
//!
//! Spin `i` is bit `i` of a basis index and is printed as the letter
//! `A + i`. Three backends evolve the same gate sequences:
//!
//! * [`BiasBackend`] tracks single-spin biases under leading-order (or
//!   exact-marginal) compression updates; it scales to any `n`.
//! * [`ExactBackend`] evolves the full `2^n` diagonal in `f64`.
//! * [`RationalBackend`] evolves the shifted-and-scaled diagonal exactly in
//!   rationals, in the `eps0 -> 0` limit.

pub mod algorithms;
pub mod analysis;
pub mod backend;
pub mod error;
pub mod format;
pub mod gates;
pub mod leading_order;
pub mod rational;
pub mod schedule;
pub mod state;
pub mod system;
pub mod trace;

pub use algorithms::{
    all_bonacci, bcs, fernandez, fibonacci, kbonacci, pac1, pac2, ppa, simulate, tribonacci, Outcome, RunOptions,
};
pub use analysis::{
    check_ppa_invariance, conditional_bias, expected_limit, expected_target, kstep_sequence, shannon_bound, theorem1,
    theorem1_bound,
};
pub use backend::{make_backend, Backend, BackendKind, BiasBackend, ExactBackend, RationalBackend};
pub use error::{Error, Result};
pub use gates::{GateKind, GateSpec};
pub use leading_order::Mode;
pub use rational::RationalState;
pub use schedule::{Algorithm, InitialState, Schedule, Termination};
pub use state::{DiagonalState, SandSDiagonal};
pub use system::{spin_name, BiasVector, SpinSystem};
pub use trace::{Trace, TraceHeader, TraceOptions, TraceRecord};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    mod algorithms {}
    #[doc = include_str!("../../../book/src/backends.md")]
    mod backends {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
}
