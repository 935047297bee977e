//! Numerical toolkit for two-dimensional lattice Schrödinger operators
//! `H = -Δ + V` with independent, bounded, non-identically-distributed
//! site potentials.
//!
//! The crate is organised around the objects that drive localization
//! estimates at desk scale:
//!
//! - [`geometry`]: standard and tilted boxes on `ℤ²`, boundaries, sparsity
//!   and regularity of frozen sets, covers, nets, and the defect-graph
//!   distance used by the deterministic multiscale step.
//! - [`ensembles`]: exact atom + uniform-piece site distributions,
//!   non-stationary ensembles, anti-concentration functionals, and
//!   reproducible counter-keyed sampling with frozen-site conditioning.
//! - [`bernoulli`]: the constructive uniform Bernoulli decomposition
//!   `X ≐ Y(t) + Z(t)ξ` with its closed-form parameter window.
//! - [`sperner`]: product measures on the hypercube, Poisson-binomial
//!   layer laws, κ-Sperner verification, LYM sums, and the exact
//!   maximal-chain sampler.
//! - [`spectral`]: Hamiltonian assembly, dense symmetric eigensolves,
//!   resolvents, the geometric resolvent identity, Wegner-resonance
//!   Monte Carlo, and deterministic lemma checkers.
//! - [`tilted`]: unique extension of eigenfunction data from the west
//!   boundary of a tilted rectangle and the associated growth and
//!   unique-continuation event estimators.
//! - [`msa`]: dyadic scale schedules, frozen-set recursion, good/bad/ready
//!   classification, and the deterministic propagation check.
//!
//! Everything here is pure: all values are immutable after construction
//! and all randomness flows through explicit `(seed, site, replica)` keys,
//! so replicas can be evaluated concurrently and re-runs are bit-stable.

#![no_std]
#![forbid(unsafe_code)]
// Numeric kernels keep explicit indices to mirror the matrix algebra, and
// `!(x > 0.0)` guards reject NaN parameters.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bernoulli;
pub mod ensembles;
pub mod geometry;
pub mod linalg;
pub mod math;
pub mod msa;
pub mod rng;
pub mod sperner;
pub mod spectral;
pub mod tilted;
