//! Continuum percolation in the Hilbert space of N qubits.
//!
//! The Hilbert space of pure states is compact — its diameter under the
//! Fubini-Study metric is pi/2 — so the usual "infinite cluster" criterion
//! of percolation theory has no meaning there. This crate implements the
//! compact-space replacement: scatter M Haar-uniform random states, connect
//! pairs closer than a threshold dS, and ask for a *maximal span cluster*,
//! one whose largest internal distance comes within eps of pi/2. The
//! critical threshold dS*(M, N) where such a cluster first appears (with
//! eps = dS) follows the power law dS = (pi/2)·A·M^(-B), whose factors
//! themselves scale with the dimension D = 2^N.
//!
//! Modules, bottom to top:
//!
//! - [`states`]: reproducible Haar-uniform state ensembles.
//! - [`metric`]: Fubini-Study distances and packed distance matrices.
//! - [`clusters`]: union-find clustering, spans, MSC detection, plus the
//!   cubic boolean-list oracle used to cross-check the fast path.
//! - [`percolation`]: bisection for dS* and replicated (N, M) sweeps.
//! - [`fitting`]: the per-dimension power law and the meta-laws A(D), B(D).
//! - [`concentration`]: the fidelity tail bound, its derivation diagnostics,
//!   and Monte Carlo validation.
//! - [`cli`]: the `hperc` command-line front end.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below pin the `f64` instantiations that the CLI and the file
//! formats use.

// `!(x > 0)` guards reject NaN along with non-positive values; the
// un-negated forms would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clusters;
pub mod concentration;
pub mod error;
pub mod fitting;
pub mod metric;
pub mod percolation;
pub mod scalar;
pub mod states;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the CLI and all file formats.
pub type Real = f64;

pub type QuantumState64 = states::QuantumState<Real>;
pub type StateEnsemble64 = states::StateEnsemble<Real>;
pub type DistanceMatrix64 = metric::DistanceMatrix<Real>;
pub type ClusterPartition64 = clusters::ClusterPartition<Real>;
pub type MscReport64 = clusters::MscReport<Real>;
pub type CriticalPoint64 = percolation::CriticalPoint<Real>;
pub type CriticalThresholdResult64 = percolation::CriticalThresholdResult<Real>;
pub type SweepConfig64 = percolation::SweepConfig<Real>;
pub type SweepRecord64 = percolation::SweepRecord<Real>;
pub type PowerLawFit64 = fitting::PowerLawFit<Real>;
pub type MetaFit64 = fitting::MetaFit<Real>;
pub type ConcentrationBoundReport64 = concentration::ConcentrationBoundReport<Real>;
