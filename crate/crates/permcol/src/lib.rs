//! Permuted graph coloring: random instances, exact solving, and the moment
//! machinery for locating the colorability threshold.
//!
//! The constraint model: each edge (u, v) of a multigraph carries a
//! permutation pi of the k colors, and a coloring s is proper when
//! s(v) != pi(s(u)) on every edge. Instances are drawn by sampling m edges
//! with replacement (self-loops and parallel edges included) and decorating
//! each with a uniform permutation.
//!
//! Module map:
//! - [`perm`], [`graph`]: permutations, decorated multigraphs, the random
//!   model, and gauge transformations (relabelings, tree unwinding).
//! - [`solver`]: exact decision, counting, and the weighted count Z that
//!   downweights each proper coloring by its per-vertex recolor freedom.
//! - [`iso`]: the product-cube inequality Z(S) >= 1 behind that weighting,
//!   verified exhaustively and randomly in exact rationals.
//! - [`moments`]: closed forms for E[X], E[X^2], E[Z], their rate functions,
//!   and the numeric threshold bounds they imply.
//! - [`experiments`]: seeded Monte Carlo estimators tying samples to the
//!   closed forms, plus empirical checks of the distributional lemmas.
//! - [`rng`], [`stats`], [`numerics`]: deterministic seed derivation,
//!   interval/test statistics, and root/extremum search.
//!
//! Everything randomized is seeded and deterministic: fixed inputs produce
//! bit-identical outputs regardless of thread count.

pub mod error;
pub mod experiments;
pub mod graph;
pub mod iso;
pub mod moments;
pub mod numerics;
pub mod perm;
pub mod rng;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
