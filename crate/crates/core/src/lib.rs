// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Stochastic unravelings of local dephasing on tight-binding lattices.
//!
//! The quantum-drift (QD) unraveling adds, at every Trotter step, a random
//! Lorentzian phase to each decohering site. The evolution stays unitary,
//! so site densities never jump; the dephasing only appears after the
//! ensemble average. A quantum-jump (QJ) unraveling of the same channel is
//! provided as a baseline.
//!
//! Module map:
//!
//! - [`lattice`]: Hamiltonians (resonant level between leads, two-level
//!   system, XY spin chain in the one-excitation sector) and initial states.
//! - [`noise`]: counter-based, seed-derived phase streams.
//! - [`propagator`]: exact `e^{-iH₀dt}` followed by the diagonal drift.
//! - [`unraveling`]: QD and QJ stepping protocols.
//! - [`observables`]: trajectories, transmittance, σ metric, Loschmidt echo.
//! - [`oracle`]: closed-form references (Fisher-Lee, Büttiker probe, GLBE
//!   two-level solutions) and rate fits.
//! - [`ensemble`]: deterministic parallel ensembles.
//! - [`experiments`]: transmittance sweeps, two-level decay, spin-chain
//!   and Loschmidt echoes, QD/QJ convergence.
//! - [`scenario`]: config files, presets, CSV/JSON outputs for the CLI.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod noise;
pub mod observables;
pub mod oracle;
pub mod propagator;
pub mod scenario;
pub mod unraveling;

pub use error::{Error, Result};
pub use lattice::{StateVector, TightBindingModel};
pub use noise::{Distribution, NoiseSpec, PhaseSource, PhaseStream};
pub use propagator::Propagator;
pub use unraveling::{Unraveling, UnravelingKind};
