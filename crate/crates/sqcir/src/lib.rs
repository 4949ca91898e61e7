//! Simulation and analysis toolkit for the SQCIR mob-propagation model.
//!
//! The model splits a social-media population into Susceptible,
//! Quarantined, Contacted, Infected, and Recovered compartments, with a
//! contact rate that mob events modulate over time. This crate provides:
//!
//! - the reduced and mobility-coupled model right-hand sides ([`model`]);
//! - a fixed-step RK4 integrator with an exact total-population oracle
//!   ([`integrator`]);
//! - closed-form analysis: reproduction numbers, equilibria, the MFE
//!   spectrum, critical thresholds, sensitivity indices, and a
//!   bifurcation sweep ([`analytics`]);
//! - seeded mob-event processes and Monte Carlo ensembles ([`mob`]);
//! - least-squares parameter estimation from cumulative-incidence series
//!   ([`fit`]);
//! - strict JSON configs, CSV series/trajectory formats, and JSON
//!   reports ([`io`]).
//!
//! Everything stochastic is a pure function of its configuration and
//! seed; identical inputs give byte-identical outputs.

pub mod analytics;
pub mod error;
pub mod fit;
pub mod integrator;
pub mod io;
pub mod mob;
pub mod model;
pub mod presets;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
pub use model::{ModelParams, NetworkParams, NetworkState, StateVector};
pub use presets::Preset;
