//! Tropical scale transforms of state dynamics: max-plus presentations and
//! their rational lifts, automata on rooted trees with real extensions,
//! two-index state dynamics with explicit comparison bounds, and the
//! first-order hyperbolic Mealy PDE systems with a Picard solver and
//! admissibility / energy verification.

// grid kernels index several parallel arrays by the same loop variable,
// and the operation signatures mirror their documented contracts
#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::type_complexity)]

pub mod automata;
pub mod dynamics;
pub mod error;
pub mod extensions;
pub mod pde;
pub mod presentation;

pub use error::{Error, Result};
pub use presentation::{
    AffineTerm, EquivalenceVerdict, MaxPlusPresentation, PresentationStats, Rational,
    RationalMode, TropicalParam,
};

use rand_chacha::rand_core::SeedableRng;

/// Deterministic RNG used throughout: same seed, same stream, everywhere.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
