//! Compute-and-forward over block-fading channels with algebraic lattices
//! built from real quadratic number fields.
//!
//! * [`numfield`]: exact `O_K` arithmetic, embeddings, prime ideals.
//! * [`cfchan`]: channel model and closed-form rates.
//! * [`svp`]: coefficient search as an exact shortest-vector problem.
//! * [`codec`]: Construction A codes over `O_K/𝔭` at desk scale.
//! * [`simkit`]: seeded Monte Carlo sweeps of ergodic rates.

pub mod cfchan;
pub mod codec;
pub mod gf;
pub mod numfield;
pub mod rng;
pub mod simkit;
pub mod svp;

pub use cfchan::{BlockFadingChannel, ChannelError, EquationCandidate};
pub use numfield::{CoefficientRing, NumberField, PrimeIdeal, RingElement};
