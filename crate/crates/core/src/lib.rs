//! Proof-labeling schemes with super-constant verification time, on a
//! deterministic synchronous-network simulator.
//!
//! The crate provides:
//! - [`graph`]: graph configurations, generators, edge crossing and
//!   edge k-neighborhoods;
//! - [`engine`]: the synchronous round executor with exact accounting of
//!   rounds, label bits, message bits and vertex state bits;
//! - [`acyclic`]: an O(t)-round acyclicity scheme whose labels carry
//!   shares of a distance-to-root counter;
//! - [`recursive`]: an acyclicity verifier using iterated-log space and
//!   no prior knowledge of the round count;
//! - [`universal`]: a t-round scheme for arbitrary predicates, sharing the
//!   full configuration representation across a neighborhood;
//! - [`attack`]: executable lower-bound machinery (edge-crossing collision
//!   attacks and a cycle indistinguishability demonstration).

pub mod acyclic;
pub mod attack;
pub mod bits;
pub mod engine;
pub mod graph;
pub mod recursive;
pub mod universal;
