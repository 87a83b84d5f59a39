//! Tail-matching importance sampling for targets that are not log-concave.
//!
//! A target `e^{−U}` is flattened below a level `M` into a proposal
//! `e^{−T∘U}` that is easier to sample, draws from the proposal are produced
//! with Langevin chains or exact rejection, and expectations under the target
//! are recovered with self-normalized importance weights `e^{T(U)−U}`.
//!
//! The crate also evaluates the explicit constants that control the weight
//! second moment `ρ`, and builds the counterexample densities on which no
//! sampler can be efficient.

pub mod adversarial;
pub mod bounds;
pub mod density;
pub mod error;
pub mod estimator;
pub mod flatten;
pub mod harness;
pub mod math;
mod par;
pub mod profiles;
pub mod quad;
pub mod rng;
pub mod samplers;

pub use density::TargetDensity;
pub use error::{Error, Result};
pub use flatten::FlattenSpec;
