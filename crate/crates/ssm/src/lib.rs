//! Link-level simulator and library for secure spatial modulation (SM).
//!
//! Spatial modulation carries information in both the index of the active
//! transmit antenna and a constellation symbol. This crate implements the
//! building blocks of a secure SM link and the Monte-Carlo machinery to
//! measure it:
//!
//! - [`numerics`] — complex linear algebra and reproducible RNG streams.
//! - [`smcore`] — bit mapping, constellations, and the transmit/receive model.
//! - [`tas`] — transmit antenna selection (random, exhaustive, Max-SLNR, EDAS).
//! - [`anpa`] — artificial-noise projection and power-allocation strategies.
//! - [`secrecy`] — finite-alphabet mutual information and secrecy rate.
//! - [`detectors`] — joint ML, ZF, and MMSE detection with FLOP accounting.
//! - [`dnn`] — from-scratch neural detectors, both the conventional structure
//!   and the per-layer-supervised structure.
//! - [`harness`] — seeded parallel sweep engine, experiment configs, CSV output.
//!
//! The `examples/` directory contains one runnable example per capability;
//! the `ssm` binary exposes the sweep engine as CLI subcommands.

pub mod anpa;
pub mod detectors;
pub mod dnn;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod secrecy;
pub mod smcore;
pub mod tas;

pub use error::{Error, Result};
