//! Branching random walks on Cayley graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`group_graph`] — the ambient graphs (regular trees, free groups, integer
//!   lattices), word arithmetic and exact n-step transition probabilities.
//! * [`gw_trees`] — offspring distributions, Galton-Watson trees and their
//!   augmented / unimodular variants, Bernoulli edge thinning.
//! * [`tree_walk`] — tree-indexed random walks and their traces.
//! * [`magic`] — branching and supported vertices of marked trees, horocycle
//!   layers, auxiliary trees and the ends census.
//! * [`mtp`] — exact and Monte Carlo checks of the (local, weighted)
//!   mass-transport principle.
//! * [`intersections`] — intersections of two independent branching random
//!   walks, thinning sweeps and ends diagnostics.
//!
//! Every sampler takes an explicit random generator. Parallel experiments
//! derive one generator per replicate from `(seed, replicate)` with
//! [`rng::substream`], so results do not depend on the worker count.

pub mod error;
pub mod graph;
pub mod group_graph;
pub mod gw_trees;
pub mod intersections;
pub mod magic;
pub mod mtp;
pub mod numeric;
pub mod rng;
pub mod stats;
pub mod tree_walk;

pub use error::{Error, Result};
pub use group_graph::{Elem, GroupKind, GroupSpec};
pub use gw_trees::{MarkedTree, OffspringDistribution};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
